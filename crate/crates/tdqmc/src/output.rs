//! Persistence formats: CSV for 1D traces, raw binary with a JSON sidecar
//! for density matrices, and a run manifest with checksums of every emitted
//! file. All floating-point text uses 17 significant digits, so files
//! round-trip bit-exactly.

use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use ndarray::Array2;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::analysis::DensityMatrixCoord;
use crate::config::ExperimentConfig;
use crate::error::{Error, Result};
use crate::grid::{make_grid, Grid1D};

/// Format a float with full double precision (17 significant digits).
fn full_precision(v: f64) -> String {
    format!("{v:.16e}")
}

/// Create `dir` if needed and refuse to reuse a non-empty one unless
/// `force` is set. Nothing is ever silently overwritten.
pub fn prepare_out_dir(dir: &Path, force: bool) -> Result<()> {
    fs::create_dir_all(dir)?;
    let occupied = fs::read_dir(dir)?.next().is_some();
    if occupied && !force {
        return Err(Error::Config(format!(
            "output directory {} is not empty; pass --force to write into it",
            dir.display()
        )));
    }
    Ok(())
}

/// Write one density per time as CSV columns: header `x,t=<t0>,t=<t1>,...`,
/// first column the grid positions, columns ordered by increasing time.
pub fn write_density_csv(
    path: &Path,
    times: &[f64],
    grid: &Grid1D,
    densities: &[Vec<f64>],
) -> Result<()> {
    if times.len() != densities.len() {
        return Err(Error::Shape(format!(
            "{} times but {} densities",
            times.len(),
            densities.len()
        )));
    }
    if times.is_empty() {
        return Err(Error::Parameter("density CSV needs at least one time".into()));
    }
    if times.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Parameter(
            "density CSV times must be strictly increasing".into(),
        ));
    }
    for d in densities {
        if d.len() != grid.n_points() {
            return Err(Error::Shape(format!(
                "density length {} does not match grid size {}",
                d.len(),
                grid.n_points()
            )));
        }
    }
    let mut out = BufWriter::new(File::create(path)?);
    write!(out, "x")?;
    for &t in times {
        write!(out, ",t={}", full_precision(t))?;
    }
    writeln!(out)?;
    for (j, &x) in grid.positions().iter().enumerate() {
        write!(out, "{}", full_precision(x))?;
        for d in densities {
            write!(out, ",{}", full_precision(d[j]))?;
        }
        writeln!(out)?;
    }
    out.flush()?;
    Ok(())
}

/// A density table read back from [`write_density_csv`] output.
#[derive(Clone, Debug)]
pub struct DensityTable {
    pub times: Vec<f64>,
    pub positions: Vec<f64>,
    /// One density per time, in header order.
    pub densities: Vec<Vec<f64>>,
}

pub fn read_density_csv(path: &Path) -> Result<DensityTable> {
    let mut lines = BufReader::new(File::open(path)?).lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Parameter(format!("{}: empty file", path.display())))??;
    let mut fields = header.split(',');
    if fields.next() != Some("x") {
        return Err(Error::Parameter(format!(
            "{}: expected header to start with 'x'",
            path.display()
        )));
    }
    let parse = |s: &str| -> Result<f64> {
        s.trim()
            .parse::<f64>()
            .map_err(|e| Error::Parameter(format!("{}: bad float {s:?}: {e}", path.display())))
    };
    let mut times = Vec::new();
    for field in fields {
        let t = field
            .strip_prefix("t=")
            .ok_or_else(|| {
                Error::Parameter(format!("{}: bad time column {field:?}", path.display()))
            })?;
        times.push(parse(t)?);
    }
    let mut positions = Vec::new();
    let mut densities = vec![Vec::new(); times.len()];
    for line in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let mut fields = line.split(',');
        positions.push(parse(fields.next().unwrap_or_default())?);
        for (column, field) in densities.iter_mut().zip(&mut fields) {
            column.push(parse(field)?);
        }
    }
    for column in &densities {
        if column.len() != positions.len() {
            return Err(Error::Shape(format!(
                "{}: ragged rows",
                path.display()
            )));
        }
    }
    Ok(DensityTable {
        times,
        positions,
        densities,
    })
}

/// Write a generic CSV of named columns with full-precision floats.
pub fn write_columns_csv(path: &Path, headers: &[&str], columns: &[Vec<f64>]) -> Result<()> {
    if headers.len() != columns.len() || columns.is_empty() {
        return Err(Error::Shape(format!(
            "{} headers for {} columns",
            headers.len(),
            columns.len()
        )));
    }
    let rows = columns[0].len();
    if columns.iter().any(|c| c.len() != rows) {
        return Err(Error::Shape("columns differ in length".into()));
    }
    let mut out = BufWriter::new(File::create(path)?);
    writeln!(out, "{}", headers.join(","))?;
    for r in 0..rows {
        for (c, column) in columns.iter().enumerate() {
            if c > 0 {
                write!(out, ",")?;
            }
            write!(out, "{}", full_precision(column[r]))?;
        }
        writeln!(out)?;
    }
    out.flush()?;
    Ok(())
}

/// Sidecar metadata stored beside a raw density-matrix file.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DensityMatrixSidecar {
    pub n: usize,
    pub x_min: f64,
    pub x_max: f64,
    pub time: f64,
    pub trace: f64,
    pub purity: f64,
}

/// Write `<path_base>.f64` (row-major little-endian doubles, each element
/// interleaved Re then Im) and `<path_base>.json` with the sidecar.
pub fn write_density_matrix(path_base: &Path, rho: &DensityMatrixCoord) -> Result<()> {
    let n = rho.grid.n_points();
    let mut out = BufWriter::new(File::create(path_base.with_extension("f64"))?);
    for row in rho.rho.rows() {
        for v in row {
            out.write_all(&v.re.to_le_bytes())?;
            out.write_all(&v.im.to_le_bytes())?;
        }
    }
    out.flush()?;
    let sidecar = DensityMatrixSidecar {
        n,
        x_min: rho.grid.x_min(),
        x_max: rho.grid.x_max(),
        time: rho.time,
        trace: rho.trace(),
        purity: rho.purity(),
    };
    let json = serde_json::to_string_pretty(&sidecar)?;
    fs::write(path_base.with_extension("json"), json)?;
    Ok(())
}

/// Read a density matrix written by [`write_density_matrix`].
pub fn read_density_matrix(path_base: &Path) -> Result<DensityMatrixCoord> {
    let sidecar: DensityMatrixSidecar =
        serde_json::from_str(&fs::read_to_string(path_base.with_extension("json"))?)?;
    let grid = make_grid(sidecar.x_min, sidecar.x_max, sidecar.n)?;
    let data_path = path_base.with_extension("f64");
    let bytes = fs::read(&data_path)?;
    let expected = sidecar.n * sidecar.n * 2 * 8;
    if bytes.len() != expected {
        return Err(Error::Shape(format!(
            "{}: expected {expected} bytes for n = {}, found {}",
            data_path.display(),
            sidecar.n,
            bytes.len()
        )));
    }
    let mut rho = Array2::<Complex64>::default((sidecar.n, sidecar.n));
    for (slot, pair) in rho.iter_mut().zip(bytes.chunks_exact(16)) {
        let re = f64::from_le_bytes(pair[0..8].try_into().expect("8-byte chunk"));
        let im = f64::from_le_bytes(pair[8..16].try_into().expect("8-byte chunk"));
        *slot = Complex64::new(re, im);
    }
    Ok(DensityMatrixCoord {
        grid,
        rho,
        time: sidecar.time,
    })
}

/// One emitted file, relative to the run directory.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FileEntry {
    pub path: String,
    pub bytes: u64,
    pub sha256: String,
}

/// Run provenance: the resolved configuration, code version, timing, and a
/// checksummed inventory of every other file in the output directory.
/// Always written last.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunManifest {
    pub config: ExperimentConfig,
    pub version: String,
    /// Seconds since the Unix epoch at the start of the run.
    pub started_unix: f64,
    pub wall_seconds: f64,
    pub status: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub failed_stage: Option<String>,
    pub files: Vec<FileEntry>,
}

pub const MANIFEST_NAME: &str = "manifest.json";

fn sha256_hex(path: &Path) -> Result<String> {
    let mut file = File::open(path)?;
    let mut hasher = Sha256::new();
    let mut buf = vec![0u8; 1 << 16];
    loop {
        let read = file.read(&mut buf)?;
        if read == 0 {
            break;
        }
        hasher.update(&buf[..read]);
    }
    let digest = hasher.finalize();
    let mut hex = String::with_capacity(64);
    for byte in digest {
        hex.push_str(&format!("{byte:02x}"));
    }
    Ok(hex)
}

fn inventory_into(dir: &Path, base: &Path, files: &mut Vec<FileEntry>) -> Result<()> {
    for entry in fs::read_dir(dir)? {
        let entry = entry?;
        let path = entry.path();
        if path.is_dir() {
            inventory_into(&path, base, files)?;
            continue;
        }
        let rel = path
            .strip_prefix(base)
            .expect("inventory stays under the run directory")
            .to_string_lossy()
            .into_owned();
        if rel == MANIFEST_NAME {
            continue;
        }
        files.push(FileEntry {
            bytes: entry.metadata()?.len(),
            sha256: sha256_hex(&path)?,
            path: rel,
        });
    }
    Ok(())
}

/// Checksummed inventory of everything under `dir` except the manifest.
pub fn inventory(dir: &Path) -> Result<Vec<FileEntry>> {
    let mut files = Vec::new();
    inventory_into(dir, dir, &mut files)?;
    files.sort_by(|a, b| a.path.cmp(&b.path));
    Ok(files)
}

/// Build and write `manifest.json` for a finished (or failed) run.
pub fn write_manifest(
    dir: &Path,
    config: &ExperimentConfig,
    started_unix: f64,
    wall_seconds: f64,
    failed_stage: Option<&str>,
) -> Result<RunManifest> {
    let manifest = RunManifest {
        config: config.clone(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        started_unix,
        wall_seconds,
        status: if failed_stage.is_some() { "failed" } else { "ok" }.to_string(),
        failed_stage: failed_stage.map(str::to_string),
        files: inventory(dir)?,
    };
    let json = serde_json::to_string_pretty(&manifest)?;
    fs::write(dir.join(MANIFEST_NAME), json)?;
    Ok(manifest)
}

pub fn read_manifest(dir: &Path) -> Result<RunManifest> {
    let text = fs::read_to_string(dir.join(MANIFEST_NAME))?;
    Ok(serde_json::from_str(&text)?)
}

/// Path helper: `dir` joined with a file name.
pub fn out_path(dir: &Path, name: &str) -> PathBuf {
    dir.join(name)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::build_density_matrix;
    use crate::grid::{normalize, Wavefunction1D};
    use num_complex::Complex64;

    #[test]
    fn density_csv_round_trips_bit_exactly() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("density.csv");
        let grid = make_grid(-1.0, 1.0, 16).unwrap();
        let densities: Vec<Vec<f64>> = (0..3)
            .map(|c| {
                (0..16)
                    .map(|j| (j as f64 * 0.37 + c as f64).sin() * 1e-7 + c as f64)
                    .collect()
            })
            .collect();
        let times = vec![0.0, 0.5, 1.0];
        write_density_csv(&path, &times, &grid, &densities).unwrap();
        let table = read_density_csv(&path).unwrap();
        assert_eq!(table.times, times);
        assert_eq!(table.positions, grid.positions());
        assert_eq!(table.densities, densities);
    }

    #[test]
    fn density_csv_shape_and_ordering_checks() {
        let dir = tempfile::tempdir().unwrap();
        let grid = make_grid(-1.0, 1.0, 16).unwrap();
        let one = vec![vec![0.0; 16]];
        // Header + one row per grid point.
        let path = dir.path().join("single.csv");
        write_density_csv(&path, &[0.0], &grid, &one).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 17);
        assert!(text.starts_with("x,t="));

        let two = vec![vec![0.0; 16], vec![0.0; 16]];
        let err = write_density_csv(&dir.path().join("bad.csv"), &[1.0, 0.5], &grid, &two);
        assert!(err.is_err(), "decreasing times must be rejected");
        let err = write_density_csv(&dir.path().join("bad.csv"), &[0.0], &grid, &two);
        assert!(err.is_err(), "time/density count mismatch must be rejected");
    }

    #[test]
    fn density_matrix_file_has_exact_size_and_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let grid = make_grid(-8.0, 8.0, 64).unwrap();
        let a = normalize(&Wavefunction1D::gaussian(&grid, -1.0, 0.7, 0.3)).unwrap();
        let b = normalize(&Wavefunction1D::gaussian(&grid, 1.0, 0.9, -0.2)).unwrap();
        let rho = build_density_matrix(&[a, b], 2.5).unwrap();
        let base = dir.path().join("dm_test");
        write_density_matrix(&base, &rho).unwrap();

        let bytes = std::fs::metadata(base.with_extension("f64")).unwrap().len();
        assert_eq!(bytes, 64 * 64 * 2 * 8);

        let sidecar: DensityMatrixSidecar = serde_json::from_str(
            &std::fs::read_to_string(base.with_extension("json")).unwrap(),
        )
        .unwrap();
        assert_eq!(sidecar.n, 64);
        assert!((sidecar.trace - 1.0).abs() < 1e-9);
        assert_eq!(sidecar.time, 2.5);

        let back = read_density_matrix(&base).unwrap();
        assert_eq!(back.time, rho.time);
        assert_eq!(back.grid, rho.grid);
        let worst = back
            .rho
            .iter()
            .zip(rho.rho.iter())
            .map(|(x, y)| (x - y).norm())
            .fold(0.0, f64::max);
        assert_eq!(worst, 0.0, "binary round-trip must be exact");
    }

    #[test]
    fn truncated_density_matrix_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let grid = make_grid(-8.0, 8.0, 32).unwrap();
        let a = normalize(&Wavefunction1D::gaussian(&grid, 0.0, 1.0, 0.0)).unwrap();
        let rho = build_density_matrix(&[a], 0.0).unwrap();
        let base = dir.path().join("dm");
        write_density_matrix(&base, &rho).unwrap();
        let data = base.with_extension("f64");
        let bytes = std::fs::read(&data).unwrap();
        std::fs::write(&data, &bytes[..bytes.len() - 8]).unwrap();
        assert!(read_density_matrix(&base).is_err());
    }

    #[test]
    fn out_dir_guard_refuses_reuse_without_force() {
        let dir = tempfile::tempdir().unwrap();
        let run = dir.path().join("run");
        prepare_out_dir(&run, false).unwrap();
        prepare_out_dir(&run, false).unwrap(); // still empty
        std::fs::write(run.join("old.csv"), "x\n").unwrap();
        assert!(prepare_out_dir(&run, false).is_err());
        prepare_out_dir(&run, true).unwrap();
    }

    #[test]
    fn manifest_checksums_match_files() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("a.csv"), "x\n1\n").unwrap();
        std::fs::create_dir(dir.path().join("sub")).unwrap();
        std::fs::write(dir.path().join("sub/b.bin"), [1u8, 2, 3]).unwrap();
        let config = crate::config::preset_config("fig1-atom").unwrap();
        let manifest = write_manifest(dir.path(), &config, 0.0, 1.0, None).unwrap();
        assert_eq!(manifest.status, "ok");
        assert_eq!(manifest.files.len(), 2);
        assert!(manifest.files.iter().all(|f| f.path != MANIFEST_NAME));
        // Stored digests match independent recomputation.
        for entry in &manifest.files {
            let recomputed = sha256_hex(&dir.path().join(&entry.path)).unwrap();
            assert_eq!(recomputed, entry.sha256, "{}", entry.path);
        }
        let back = read_manifest(dir.path()).unwrap();
        assert_eq!(back.files.len(), 2);
        assert_eq!(back.version, env!("CARGO_PKG_VERSION"));

        let failed = write_manifest(dir.path(), &config, 0.0, 2.0, Some("evolve")).unwrap();
        assert_eq!(failed.status, "failed");
        assert_eq!(failed.failed_stage.as_deref(), Some("evolve"));
    }

    #[test]
    fn complex_entries_survive_the_interleaved_layout() {
        // Spot-check the byte layout directly: element (0, 1) starts at
        // byte 16 (row-major), Re first.
        let dir = tempfile::tempdir().unwrap();
        let grid = make_grid(-1.0, 1.0, 16).unwrap();
        let wave = normalize(&Wavefunction1D::from_fn(&grid, |x| {
            Complex64::new(x, 0.25 - x * x)
        }))
        .unwrap();
        let rho = build_density_matrix(&[wave], 0.0).unwrap();
        let base = dir.path().join("dm");
        write_density_matrix(&base, &rho).unwrap();
        let bytes = std::fs::read(base.with_extension("f64")).unwrap();
        let re = f64::from_le_bytes(bytes[16..24].try_into().unwrap());
        let im = f64::from_le_bytes(bytes[24..32].try_into().unwrap());
        assert_eq!(Complex64::new(re, im), rho.rho[[0, 1]]);
    }
}
