//! Experiment configuration: a flat JSON schema plus a frozen table of named
//! presets. A preset fixes every field; explicit keys in the user's file win
//! over the preset's values. Unknown keys are rejected by name.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{make_grid, Grid1D};
use crate::potentials::{CouplingMode, CouplingParams, NuclearFrame};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Geometry {
    /// Single nucleus at the origin.
    Atom,
    /// Two nuclei straddling the origin (the double slit).
    Molecule,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub x_min: f64,
    pub x_max: f64,
    pub n: usize,
}

/// Fully-resolved experiment parameters. Field names double as JSON keys.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Preset this configuration was expanded from, if any. The run
    /// pipeline keys output families off it (for example `fig5-coherence`
    /// emits one coherence trace per coupling mode).
    #[serde(default)]
    pub preset: Option<String>,
    pub geometry: Geometry,
    /// Distance between the molecule's nuclei; ignored for the atom.
    pub separation: f64,
    /// Soft-core strength per nucleus.
    pub a: f64,
    /// Electron-electron soft-core strength.
    pub b: f64,
    /// Kernel width multiplier.
    pub alpha: f64,
    pub mode: CouplingMode,
    pub m_walkers: usize,
    pub grid: GridSpec,
    /// Real-time step.
    pub dt_real: f64,
    /// Imaginary-time step.
    pub d_tau: f64,
    /// Real-time horizon after release.
    pub t_final: f64,
    /// Imaginary-time steps for ground-state preparation.
    pub relax_steps: usize,
    /// Time between stored snapshots.
    pub snapshot_stride: f64,
    pub seed: u64,
    /// Also run the exact two-body reference on the same physics.
    pub run_exact: bool,
    pub out_dir: PathBuf,
    /// Width of the initial guide-wave Gaussian; 0 selects the geometry
    /// default (1 for the atom, 3 for the molecule).
    #[serde(default)]
    pub initial_width: f64,
    /// Per-axis points of the exact solver's 2D grid.
    #[serde(default = "default_exact_n")]
    pub exact_n_points: usize,
    /// Per-step energy tolerance of the exact ground-state relaxation.
    #[serde(default = "default_exact_tol")]
    pub exact_tol: f64,
    #[serde(default = "crate::potentials::default_sigma_floor")]
    pub sigma_floor: f64,
    /// Kernel weights below this are dropped (0 = keep all).
    #[serde(default)]
    pub weight_cutoff: f64,
    /// Alpha values visited by the scan subcommand.
    #[serde(default = "default_scan_alphas")]
    pub scan_alphas: Vec<f64>,
}

fn default_exact_n() -> usize {
    512
}

fn default_exact_tol() -> f64 {
    1e-8
}

fn default_scan_alphas() -> Vec<f64> {
    vec![0.2, 0.4, 0.6, 0.8, 1.0, 1.4]
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        let positive: [(&str, f64); 7] = [
            ("a", self.a),
            ("dt_real", self.dt_real),
            ("d_tau", self.d_tau),
            ("t_final", self.t_final),
            ("snapshot_stride", self.snapshot_stride),
            ("sigma_floor", self.sigma_floor),
            ("exact_tol", self.exact_tol),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if self.geometry == Geometry::Molecule && !(self.separation > 0.0) {
            return Err(Error::Config(format!(
                "separation must be positive for the molecule, got {}",
                self.separation
            )));
        }
        if self.m_walkers < 2 {
            return Err(Error::Config(format!(
                "m_walkers must be at least 2, got {}",
                self.m_walkers
            )));
        }
        if self.initial_width < 0.0 {
            return Err(Error::Config(format!(
                "initial_width must be nonnegative, got {}",
                self.initial_width
            )));
        }
        if self.exact_n_points < 16 || !self.exact_n_points.is_power_of_two() {
            return Err(Error::Config(format!(
                "exact_n_points must be a power of two >= 16, got {}",
                self.exact_n_points
            )));
        }
        if self.scan_alphas.iter().any(|&a| !(a > 0.0)) {
            return Err(Error::Config("scan_alphas must all be positive".into()));
        }
        self.coupling().validate()?;
        self.frame().validate()?;
        // Grid construction performs its own checks.
        make_grid(self.grid.x_min, self.grid.x_max, self.grid.n)?;
        Ok(())
    }

    pub fn make_grid(&self) -> Result<Grid1D> {
        make_grid(self.grid.x_min, self.grid.x_max, self.grid.n)
    }

    pub fn make_exact_grid(&self) -> Result<Grid1D> {
        make_grid(self.grid.x_min, self.grid.x_max, self.exact_n_points)
    }

    pub fn frame(&self) -> NuclearFrame {
        match self.geometry {
            Geometry::Atom => NuclearFrame {
                nuclei: vec![(0.0, self.a)],
                active: true,
            },
            Geometry::Molecule => NuclearFrame {
                nuclei: vec![
                    (-0.5 * self.separation, self.a),
                    (0.5 * self.separation, self.a),
                ],
                active: true,
            },
        }
    }

    pub fn coupling(&self) -> CouplingParams {
        CouplingParams {
            b: self.b,
            alpha: self.alpha,
            mode: self.mode,
            sigma_floor: self.sigma_floor,
            weight_cutoff: self.weight_cutoff,
        }
    }

    /// Initial guide-wave width: explicit value or the geometry default.
    pub fn resolved_initial_width(&self) -> f64 {
        if self.initial_width > 0.0 {
            self.initial_width
        } else {
            match self.geometry {
                Geometry::Atom => 1.0,
                Geometry::Molecule => 3.0,
            }
        }
    }
}

/// The frozen preset names, in documentation order.
pub const PRESET_NAMES: [&str; 8] = [
    "fig1-atom",
    "fig1-molecule",
    "fig2-atom-single-slit",
    "fig2c-ultra",
    "fig3-molecule",
    "fig4-dm",
    "fig5-coherence",
    "alpha-scan",
];

/// The fully-expanded configuration behind a preset name.
pub fn preset_config(name: &str) -> Result<ExperimentConfig> {
    let atom_base = ExperimentConfig {
        preset: Some(name.to_string()),
        geometry: Geometry::Atom,
        separation: 0.0,
        a: 2.0,
        b: 1.0,
        alpha: 0.6,
        mode: CouplingMode::Optimized,
        m_walkers: 1000,
        grid: GridSpec {
            x_min: -60.0,
            x_max: 60.0,
            n: 1024,
        },
        dt_real: 0.01,
        d_tau: 0.02,
        t_final: 10.0,
        relax_steps: 500,
        snapshot_stride: 0.5,
        seed: 42,
        run_exact: true,
        out_dir: PathBuf::from(format!("out/{name}")),
        initial_width: 0.0,
        exact_n_points: 512,
        exact_tol: 1e-8,
        sigma_floor: 1e-3,
        weight_cutoff: 0.0,
        scan_alphas: default_scan_alphas(),
    };
    let molecule_base = ExperimentConfig {
        geometry: Geometry::Molecule,
        separation: 8.0,
        a: 1.0,
        relax_steps: 700,
        ..atom_base.clone()
    };
    let config = match name {
        // Ground-state preparation showcases (guide-wave spread, Fig. 1).
        "fig1-atom" => atom_base,
        "fig1-molecule" => molecule_base,
        // Sudden release of the atom: single-slit diffraction.
        "fig2-atom-single-slit" => atom_base,
        // Same release in the fully correlated limit.
        "fig2c-ultra" => ExperimentConfig {
            mode: CouplingMode::UltraCorrelated,
            ..atom_base
        },
        // Double slit; b defaults to the high-visibility case.
        "fig3-molecule" => ExperimentConfig {
            b: 0.02,
            ..molecule_base
        },
        // Density-matrix heat maps before and after diffraction.
        "fig4-dm" => molecule_base,
        // Coherence decay: optimized vs ultra vs mean field vs exact.
        "fig5-coherence" => atom_base,
        // Variational search for the kernel width multiplier.
        "alpha-scan" => ExperimentConfig {
            run_exact: false,
            relax_steps: 400,
            ..atom_base
        },
        other => {
            return Err(Error::Config(format!(
                "unknown preset '{other}' (expected one of: {})",
                PRESET_NAMES.join(", ")
            )))
        }
    };
    Ok(config)
}

/// Parse a JSON configuration, expanding `"preset"` first; explicit keys
/// override the preset. Without a preset every required key must appear.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let value: serde_json::Value = serde_json::from_str(text)?;
    let serde_json::Value::Object(mut map) = value else {
        return Err(Error::Config("configuration must be a JSON object".into()));
    };
    let merged = match map.remove("preset") {
        Some(serde_json::Value::String(name)) => {
            let base = serde_json::to_value(preset_config(&name)?)?;
            let serde_json::Value::Object(mut base_map) = base else {
                unreachable!("configs serialize to objects")
            };
            for (k, v) in map {
                base_map.insert(k, v);
            }
            serde_json::Value::Object(base_map)
        }
        Some(other) => {
            return Err(Error::Config(format!(
                "preset must be a string, got {other}"
            )))
        }
        None => serde_json::Value::Object(map),
    };
    let config: ExperimentConfig = serde_json::from_value(merged)
        .map_err(|e| Error::Config(format!("invalid configuration: {e}")))?;
    config.validate()?;
    Ok(config)
}

/// Load and resolve a configuration file.
pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path)?;
    parse_config(&text)
}
