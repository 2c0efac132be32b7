//! End-to-end experiment orchestration: ground-state preparation, sudden
//! release, real-time evolution, the exact two-body reference, and all file
//! artifacts. Every failure is tagged with the pipeline stage that produced
//! it, and a manifest (marked failed if need be) is always written last, so
//! partial outputs stay inspectable.

use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde_json::json;

use crate::analysis::{
    coherence_antidiagonal, coherence_antidiagonal_from_rows, density_matrix_from_rows,
    fringe_visibility, l1_deviation, purity_from_rows, stride_sample, CoherenceTrace,
    DensityMatrixCoord,
};
use crate::config::ExperimentConfig;
use crate::engine::{
    estimate_energy, evolve_observed, init_ensemble, release, relax_ground_state, scan_alpha,
    EnergyEstimate, EnsembleState, EvolveEnsembleOptions,
};
use crate::error::{Error, Result};
use crate::exact::{
    exact_evolve, exact_ground_state, marginal_density, reduced_density_matrix, Electron,
    EvolveOptions,
};
use crate::grid::{make_grid, Grid1D};
use crate::output::{
    prepare_out_dir, read_density_csv, read_density_matrix, write_columns_csv, write_density_csv,
    write_density_matrix, write_manifest, RunManifest,
};
use crate::potentials::{CouplingMode, NuclearFrame};

/// Central fraction of the grid scanned for interference extrema.
pub const VISIBILITY_WINDOW: f64 = 0.5;

/// Cap on exact-solver imaginary-time steps.
const EXACT_RELAX_MAX_STEPS: usize = 50_000;

fn at<T>(stage: &'static str, result: Result<T>) -> Result<T> {
    result.map_err(|e| e.stage(stage))
}

fn write_json(stage: &'static str, path: &Path, value: &serde_json::Value) -> Result<()> {
    let text = at(stage, serde_json::to_string_pretty(value).map_err(Error::from))?;
    at(stage, std::fs::write(path, text).map_err(Error::from))
}

struct RunContext {
    dir: PathBuf,
    started_unix: f64,
    timer: Instant,
}

fn begin(config: &ExperimentConfig, force: bool) -> Result<RunContext> {
    at("config", config.validate())?;
    at("io", prepare_out_dir(&config.out_dir, force))?;
    let started_unix = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs_f64())
        .unwrap_or(0.0);
    Ok(RunContext {
        dir: config.out_dir.clone(),
        started_unix,
        timer: Instant::now(),
    })
}

/// Run `body`, then write the manifest: on failure the manifest records the
/// stage and partial outputs are preserved.
fn guarded(
    config: &ExperimentConfig,
    force: bool,
    body: impl FnOnce(&RunContext) -> Result<()>,
) -> Result<RunManifest> {
    let ctx = begin(config, force)?;
    match body(&ctx) {
        Ok(()) => at(
            "manifest",
            write_manifest(
                &ctx.dir,
                config,
                ctx.started_unix,
                ctx.timer.elapsed().as_secs_f64(),
                None,
            ),
        ),
        Err(err) => {
            let stage = err.stage_name().unwrap_or("run");
            // Best effort: a failed manifest must not mask the root cause.
            let _ = write_manifest(
                &ctx.dir,
                config,
                ctx.started_unix,
                ctx.timer.elapsed().as_secs_f64(),
                Some(stage),
            );
            Err(err)
        }
    }
}

fn energy_json(e: &EnergyEstimate) -> serde_json::Value {
    json!({
        "total": e.total,
        "one_body": e.one_body,
        "interaction": e.interaction,
        "std_error": e.std_error,
    })
}

/// Initialize and relax the ensemble, writing the ground-state artifacts:
/// the energy trace, the ensemble densities, and the electron-1 density
/// matrix.
fn prepare_ground(
    config: &ExperimentConfig,
    dir: &Path,
) -> Result<(EnsembleState, EnergyEstimate)> {
    let mut state = at("init", init_ensemble(config))?;
    let trace = at(
        "relax",
        relax_ground_state(&mut state, config.relax_steps),
    )?;
    let energy = at("relax", estimate_energy(&state))?;

    let steps: Vec<f64> = trace.iter().map(|(s, _)| *s as f64).collect();
    let columns: Vec<Vec<f64>> = [
        steps,
        trace.iter().map(|(_, e)| e.total).collect(),
        trace.iter().map(|(_, e)| e.one_body).collect(),
        trace.iter().map(|(_, e)| e.interaction).collect(),
        trace.iter().map(|(_, e)| e.std_error).collect(),
    ]
    .into();
    at(
        "write-ground",
        write_columns_csv(
            &dir.join("relax_energy.csv"),
            &["step", "total", "one_body", "interaction", "std_error"],
            &columns,
        ),
    )?;

    let densities: Vec<Vec<f64>> = (0..state.n_electrons())
        .map(|i| crate::analysis::mean_density_from_rows(state.grid(), state.wave_rows(i)))
        .collect();
    let mut ground_columns = vec![state.grid().positions().to_vec()];
    ground_columns.extend(densities);
    at(
        "write-ground",
        write_columns_csv(
            &dir.join("ground_density.csv"),
            &["x", "electron1", "electron2"],
            &ground_columns,
        ),
    )?;

    let dm = at(
        "write-ground",
        density_matrix_from_rows(state.grid(), state.wave_rows(0), state.time()),
    )?;
    at(
        "write-ground",
        write_density_matrix(&dir.join("dm_ground"), &dm),
    )?;
    Ok((state, energy))
}

/// Everything collected while streaming through the real-time evolution.
struct TdqmcEvolution {
    times: Vec<f64>,
    /// Snapshot densities per electron.
    densities: Vec<Vec<Vec<f64>>>,
    coherence: CoherenceTrace,
    purities: Vec<f64>,
    final_dm: DensityMatrixCoord,
    clamped_events: u64,
}

/// Release the nuclei and propagate, streaming coherence and purity so the
/// guide waves never need to be stored per snapshot.
fn evolve_tdqmc(state: &mut EnsembleState, config: &ExperimentConfig) -> Result<TdqmcEvolution> {
    at("release", release(state))?;
    let options = EvolveEnsembleOptions::from_config(config);
    let mut times = Vec::new();
    let mut coherence = CoherenceTrace::default();
    let mut purities = Vec::new();
    let snapshots = at(
        "evolve",
        evolve_observed(state, &options, |st, snap| {
            times.push(snap.time);
            let raw = coherence_antidiagonal_from_rows(st.grid(), st.wave_rows(0))?;
            coherence.push(snap.time, raw)?;
            purities.push(purity_from_rows(st.grid(), st.wave_rows(0))?);
            Ok(())
        }),
    )?;
    let n_electrons = state.n_electrons();
    let densities: Vec<Vec<Vec<f64>>> = (0..n_electrons)
        .map(|i| snapshots.iter().map(|s| s.densities[i].clone()).collect())
        .collect();
    let clamped_events = snapshots.last().map_or(0, |s| s.clamped_events);
    let final_dm = at(
        "evolve",
        density_matrix_from_rows(state.grid(), state.wave_rows(0), state.time()),
    )?;
    Ok(TdqmcEvolution {
        times,
        densities,
        coherence,
        purities,
        final_dm,
        clamped_events,
    })
}

fn write_tdqmc_artifacts(
    dir: &Path,
    state: &EnsembleState,
    evolution: &TdqmcEvolution,
) -> Result<f64> {
    let grid = state.grid();
    for i in 0..state.n_electrons() {
        at(
            "write-tdqmc",
            write_density_csv(
                &dir.join(format!("density_tdqmc_e{}.csv", i + 1)),
                &evolution.times,
                grid,
                &evolution.densities[i],
            ),
        )?;
    }
    at(
        "write-tdqmc",
        write_columns_csv(
            &dir.join("walkers_final.csv"),
            &["electron1", "electron2"],
            &[state.walkers(0).to_vec(), state.walkers(1).to_vec()],
        ),
    )?;
    at(
        "write-tdqmc",
        write_columns_csv(
            &dir.join("coherence_tdqmc.csv"),
            &["t", "raw", "normalized"],
            &[
                evolution.coherence.times.clone(),
                evolution.coherence.raw.clone(),
                evolution.coherence.normalized.clone(),
            ],
        ),
    )?;
    at(
        "write-tdqmc",
        write_columns_csv(
            &dir.join("purity_tdqmc.csv"),
            &["t", "purity"],
            &[evolution.times.clone(), evolution.purities.clone()],
        ),
    )?;
    at(
        "write-tdqmc",
        write_density_matrix(&dir.join("dm_final"), &evolution.final_dm),
    )?;
    let final_density = evolution.densities[0]
        .last()
        .ok_or_else(|| Error::State("evolution produced no snapshots".into()))?;
    at(
        "write-tdqmc",
        fringe_visibility(final_density, grid, VISIBILITY_WINDOW),
    )
}

/// Results of the exact two-body reference pipeline.
struct ExactRun {
    grid: Grid1D,
    energy: f64,
    times: Vec<f64>,
    /// Electron-1 marginal per snapshot.
    densities: Vec<Vec<f64>>,
    coherence: CoherenceTrace,
    purities: Vec<f64>,
    final_visibility: f64,
}

/// Ground state, release, and evolution of the numerically exact two-body
/// wavefunction on the same physics, with its own artifacts.
fn run_exact_reference(config: &ExperimentConfig, dir: &Path) -> Result<ExactRun> {
    let grid = at("exact-ground", config.make_exact_grid())?;
    let frame = config.frame();
    let ground = at(
        "exact-ground",
        exact_ground_state(
            &frame,
            config.b,
            &grid,
            config.d_tau,
            config.exact_tol,
            EXACT_RELAX_MAX_STEPS,
        ),
    )?;
    let mut ground_dm = at("exact-ground", reduced_density_matrix(&ground.state))?;
    ground_dm.time = 0.0;
    at(
        "write-exact",
        write_density_matrix(&dir.join("dm_exact_ground"), &ground_dm),
    )?;

    let mut released_state = ground.state.clone();
    released_state.time = 0.0;
    let released_frame = NuclearFrame {
        nuclei: frame.nuclei.clone(),
        active: false,
    };
    let series = at(
        "exact-evolve",
        exact_evolve(
            &released_state,
            &released_frame,
            config.b,
            &EvolveOptions {
                t_final: config.t_final,
                dt: config.dt_real,
                snapshot_stride: config.snapshot_stride,
                ..EvolveOptions::default()
            },
        ),
    )?;

    let mut times = Vec::new();
    let mut densities = Vec::new();
    let mut coherence = CoherenceTrace::default();
    let mut purities = Vec::new();
    let mut final_dm = None;
    for snapshot in &series {
        times.push(snapshot.time);
        densities.push(marginal_density(snapshot, Electron::First));
        let dm = at("exact-evolve", reduced_density_matrix(snapshot))?;
        at(
            "exact-evolve",
            coherence.push(snapshot.time, coherence_antidiagonal(&dm)?),
        )?;
        purities.push(dm.purity());
        final_dm = Some(dm);
    }
    at(
        "write-exact",
        write_density_csv(&dir.join("density_exact_e1.csv"), &times, &grid, &densities),
    )?;
    at(
        "write-exact",
        write_columns_csv(
            &dir.join("coherence_exact.csv"),
            &["t", "raw", "normalized"],
            &[
                coherence.times.clone(),
                coherence.raw.clone(),
                coherence.normalized.clone(),
            ],
        ),
    )?;
    at(
        "write-exact",
        write_columns_csv(
            &dir.join("purity_exact.csv"),
            &["t", "purity"],
            &[times.clone(), purities.clone()],
        ),
    )?;
    let final_dm = final_dm.ok_or_else(|| {
        Error::State("exact evolution produced no snapshots".into()).stage("exact-evolve")
    })?;
    at(
        "write-exact",
        write_density_matrix(&dir.join("dm_exact_final"), &final_dm),
    )?;
    let final_visibility = at(
        "write-exact",
        fringe_visibility(densities.last().expect("nonempty"), &grid, VISIBILITY_WINDOW),
    )?;
    Ok(ExactRun {
        grid,
        energy: ground.energy,
        times,
        densities,
        coherence,
        purities,
        final_visibility,
    })
}

/// Per-snapshot L1 deviation between a TDQMC density table and the exact
/// marginals, downsampling the TDQMC grid when it is an integer refinement
/// of the exact one.
fn deviation_trace(
    tdqmc_times: &[f64],
    tdqmc_densities: &[Vec<f64>],
    exact: &ExactRun,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let n_exact = exact.grid.n_points();
    let pairs = tdqmc_times.len().min(exact.times.len());
    let mut times = Vec::with_capacity(pairs);
    let mut deviations = Vec::with_capacity(pairs);
    for k in 0..pairs {
        if (tdqmc_times[k] - exact.times[k]).abs() > 1e-9 {
            return Err(Error::Shape(format!(
                "snapshot times diverge at index {k}: {} vs {}",
                tdqmc_times[k], exact.times[k]
            )));
        }
        let fine = &tdqmc_densities[k];
        if !fine.len().is_multiple_of(n_exact) {
            return Err(Error::Shape(format!(
                "grid size {} is not an integer refinement of {n_exact}",
                fine.len()
            )));
        }
        let coarse = stride_sample(fine, fine.len() / n_exact);
        times.push(tdqmc_times[k]);
        deviations.push(l1_deviation(&coarse, &exact.densities[k], &exact.grid)?);
    }
    Ok((times, deviations))
}

/// The standard experiment: TDQMC ground state, release, evolution, and
/// (when configured) the exact reference plus comparison traces.
fn standard_body(config: &ExperimentConfig, ctx: &RunContext) -> Result<()> {
    let dir = &ctx.dir;
    let (mut state, ground_energy) = prepare_ground(config, dir)?;
    let evolution = evolve_tdqmc(&mut state, config)?;
    let tdqmc_visibility = write_tdqmc_artifacts(dir, &state, &evolution)?;

    let mut summary = json!({
        "preset": config.preset,
        "mode": config.mode,
        "m_walkers": config.m_walkers,
        "seed": config.seed,
        "tdqmc": {
            "ground_energy": energy_json(&ground_energy),
            "final_visibility": tdqmc_visibility,
            "final_purity": evolution.purities.last(),
            "final_coherence_normalized": evolution.coherence.normalized.last(),
            "clamped_events": evolution.clamped_events,
        },
    });

    if config.run_exact {
        let exact = run_exact_reference(config, dir)?;
        let (dev_times, deviations) =
            at("analyze", deviation_trace(&evolution.times, &evolution.densities[0], &exact))?;
        at(
            "analyze",
            write_columns_csv(
                &dir.join("deviation_e1.csv"),
                &["t", "l1"],
                &[dev_times, deviations.clone()],
            ),
        )?;
        let mean_l1 = deviations.iter().sum::<f64>() / deviations.len().max(1) as f64;
        let max_l1 = deviations.iter().copied().fold(0.0, f64::max);
        summary["exact"] = json!({
            "ground_energy": exact.energy,
            "final_visibility": exact.final_visibility,
            "final_purity": exact.purities.last(),
            "final_coherence_normalized": exact.coherence.normalized.last(),
        });
        summary["deviation"] = json!({"mean_l1": mean_l1, "max_l1": max_l1});

        // Per-snapshot visibilities for both methods.
        let mut vis_tdqmc = Vec::new();
        for density in &evolution.densities[0] {
            vis_tdqmc.push(fringe_visibility(density, state.grid(), VISIBILITY_WINDOW)?);
        }
        let mut vis_exact = Vec::new();
        for density in &exact.densities {
            vis_exact.push(fringe_visibility(density, &exact.grid, VISIBILITY_WINDOW)?);
        }
        let pairs = vis_tdqmc.len().min(vis_exact.len());
        at(
            "analyze",
            write_columns_csv(
                &dir.join("visibility.csv"),
                &["t", "tdqmc", "exact"],
                &[
                    evolution.times[..pairs].to_vec(),
                    vis_tdqmc[..pairs].to_vec(),
                    vis_exact[..pairs].to_vec(),
                ],
            ),
        )?;
    } else {
        let mut vis_tdqmc = Vec::new();
        for density in &evolution.densities[0] {
            vis_tdqmc.push(fringe_visibility(density, state.grid(), VISIBILITY_WINDOW)?);
        }
        at(
            "analyze",
            write_columns_csv(
                &dir.join("visibility.csv"),
                &["t", "tdqmc"],
                &[evolution.times.clone(), vis_tdqmc],
            ),
        )?;
    }

    write_json("write", &dir.join("summary.json"), &summary)
}

/// The coherence-comparison family: one full run per coupling mode plus the
/// exact reference, each contributing one decay curve.
fn coherence_body(config: &ExperimentConfig, ctx: &RunContext) -> Result<()> {
    let dir = &ctx.dir;
    let curves = [
        ("coherence_tdqmc.csv", CouplingMode::Optimized),
        ("coherence_ultra.csv", CouplingMode::UltraCorrelated),
        ("coherence_hartree.csv", CouplingMode::MeanField),
    ];
    let mut summary = json!({
        "preset": config.preset,
        "m_walkers": config.m_walkers,
        "seed": config.seed,
    });
    for (file_name, mode) in curves {
        let mut variant = config.clone();
        variant.mode = mode;
        let mut state = at("init", init_ensemble(&variant))?;
        at("relax", relax_ground_state(&mut state, variant.relax_steps))?;
        at("release", release(&mut state))?;
        let options = EvolveEnsembleOptions::from_config(&variant);
        let mut coherence = CoherenceTrace::default();
        at(
            "evolve",
            evolve_observed(&mut state, &options, |st, snap| {
                let raw = coherence_antidiagonal_from_rows(st.grid(), st.wave_rows(0))?;
                coherence.push(snap.time, raw)
            }),
        )?;
        at(
            "write",
            write_columns_csv(
                &dir.join(file_name),
                &["t", "raw", "normalized"],
                &[
                    coherence.times.clone(),
                    coherence.raw.clone(),
                    coherence.normalized.clone(),
                ],
            ),
        )?;
        let key = format!("final_{mode:?}");
        summary[key.as_str()] = json!(coherence.normalized.last());
    }
    if config.run_exact {
        let exact = run_exact_reference(config, dir)?;
        summary["final_exact"] = json!(exact.coherence.normalized.last());
    }
    write_json("write", &dir.join("summary.json"), &summary)
}

fn alpha_scan_body(config: &ExperimentConfig, ctx: &RunContext) -> Result<()> {
    let results = at("scan", scan_alpha(config, &config.scan_alphas))?;
    let columns: Vec<Vec<f64>> = [
        results.iter().map(|(a, _)| *a).collect(),
        results.iter().map(|(_, e)| e.total).collect(),
        results.iter().map(|(_, e)| e.one_body).collect(),
        results.iter().map(|(_, e)| e.interaction).collect(),
        results.iter().map(|(_, e)| e.std_error).collect(),
    ]
    .into();
    at(
        "write",
        write_columns_csv(
            &ctx.dir.join("alpha_scan.csv"),
            &["alpha", "total", "one_body", "interaction", "std_error"],
            &columns,
        ),
    )?;
    let best = results
        .iter()
        .min_by(|a, b| a.1.total.total_cmp(&b.1.total))
        .expect("scan produced results");
    let summary = json!({
        "preset": config.preset,
        "alphas": config.scan_alphas,
        "best_alpha": best.0,
        "best_energy": energy_json(&best.1),
    });
    write_json("write", &ctx.dir.join("summary.json"), &summary)
}

/// Full experiment dispatch: presets with special output families get them,
/// everything else runs the standard relax → release → evolve → compare
/// pipeline.
pub fn run_experiment(config: &ExperimentConfig, force: bool) -> Result<RunManifest> {
    match config.preset.as_deref() {
        Some("alpha-scan") => guarded(config, force, |ctx| alpha_scan_body(config, ctx)),
        Some("fig5-coherence") => guarded(config, force, |ctx| coherence_body(config, ctx)),
        _ => guarded(config, force, |ctx| standard_body(config, ctx)),
    }
}

/// Ground-state preparation only.
pub fn run_ground(config: &ExperimentConfig, force: bool) -> Result<RunManifest> {
    guarded(config, force, |ctx| {
        let (state, energy) = prepare_ground(config, &ctx.dir)?;
        let summary = json!({
            "preset": config.preset,
            "ground_energy": energy_json(&energy),
            "sigma": [state.sigma(0), state.sigma(1)],
        });
        write_json("write", &ctx.dir.join("summary.json"), &summary)
    })
}

/// TDQMC pipeline without the exact reference, regardless of `run_exact`.
pub fn run_evolve(config: &ExperimentConfig, force: bool) -> Result<RunManifest> {
    let mut tdqmc_only = config.clone();
    tdqmc_only.run_exact = false;
    guarded(&tdqmc_only, force, |ctx| standard_body(&tdqmc_only, ctx))
}

/// Exact two-body reference only.
pub fn run_exact_only(config: &ExperimentConfig, force: bool) -> Result<RunManifest> {
    guarded(config, force, |ctx| {
        let exact = run_exact_reference(config, &ctx.dir)?;
        let summary = json!({
            "preset": config.preset,
            "exact": {
                "ground_energy": exact.energy,
                "final_visibility": exact.final_visibility,
                "final_purity": exact.purities.last(),
                "final_coherence_normalized": exact.coherence.normalized.last(),
            },
        });
        write_json("write", &ctx.dir.join("summary.json"), &summary)
    })
}

/// Alpha scan using `config.scan_alphas`, regardless of preset.
pub fn run_scan(config: &ExperimentConfig, force: bool) -> Result<RunManifest> {
    guarded(config, force, |ctx| alpha_scan_body(config, ctx))
}

fn grid_of_table(positions: &[f64]) -> Result<Grid1D> {
    if positions.len() < 2 {
        return Err(Error::Shape("density table needs at least 2 rows".into()));
    }
    let dx = positions[1] - positions[0];
    let x_min = positions[0];
    make_grid(x_min, x_min + dx * positions.len() as f64, positions.len())
}

/// Post-hoc analysis of an existing run directory: visibility traces from
/// density CSVs, L1 deviation when both methods are present, and validation
/// plus coherence metrics for stored density matrices. Writes
/// `analysis.json` and returns its contents.
pub fn analyze_dir(dir: &Path, force: bool) -> Result<serde_json::Value> {
    let report_path = dir.join("analysis.json");
    if report_path.exists() && !force {
        return Err(Error::Config(format!(
            "{} already exists; pass --force to overwrite",
            report_path.display()
        ))
        .stage("analyze"));
    }
    let mut report = json!({});
    let mut tables = Vec::new();
    for name in ["density_tdqmc_e1", "density_tdqmc_e2", "density_exact_e1"] {
        let path = dir.join(format!("{name}.csv"));
        if !path.exists() {
            continue;
        }
        let table = at("analyze", read_density_csv(&path))?;
        let grid = at("analyze", grid_of_table(&table.positions))?;
        let mut visibilities = Vec::new();
        for density in &table.densities {
            visibilities.push(at(
                "analyze",
                fringe_visibility(density, &grid, VISIBILITY_WINDOW),
            )?);
        }
        report[name] = json!({
            "times": table.times,
            "visibility": visibilities,
        });
        tables.push((name, table, grid));
    }
    let tdqmc = tables.iter().find(|(name, ..)| *name == "density_tdqmc_e1");
    let exact = tables.iter().find(|(name, ..)| *name == "density_exact_e1");
    if let (Some((_, fine, _)), Some((_, coarse, coarse_grid))) = (tdqmc, exact) {
        let pairs = fine.times.len().min(coarse.times.len());
        let mut deviations = Vec::new();
        for k in 0..pairs {
            let stride = fine.positions.len() / coarse.positions.len().max(1);
            let sampled = stride_sample(&fine.densities[k], stride);
            deviations.push(at(
                "analyze",
                l1_deviation(&sampled, &coarse.densities[k], coarse_grid),
            )?);
        }
        let mean = deviations.iter().sum::<f64>() / deviations.len().max(1) as f64;
        report["deviation"] = json!({
            "times": coarse.times[..pairs].to_vec(),
            "l1": deviations,
            "mean_l1": mean,
        });
    }
    for name in ["dm_ground", "dm_final", "dm_exact_ground", "dm_exact_final"] {
        let base = dir.join(name);
        if !base.with_extension("json").exists() {
            continue;
        }
        let dm = at("analyze", read_density_matrix(&base))?;
        at("analyze", dm.validate())?;
        let coherence = if dm.grid.is_symmetric() {
            Some(at("analyze", coherence_antidiagonal(&dm))?)
        } else {
            None
        };
        report[name] = json!({
            "time": dm.time,
            "trace": dm.trace(),
            "purity": dm.purity(),
            "coherence": coherence,
            "hermiticity_error": dm.hermiticity_error(),
        });
    }
    write_json("analyze", &report_path, &report)?;
    Ok(report)
}
