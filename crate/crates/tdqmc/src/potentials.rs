//! Soft-core Coulomb potentials and the kernel-weighted effective
//! electron-electron potential that couples one electron's guide waves to the
//! other electron's walker ensemble.
//!
//! The soft core `1/sqrt(1 + x^2)` regularizes the 1D Coulomb singularity.
//! The coupling kernel is a Gaussian in walker-walker distance with width
//! `sigma_j`; its limits select the physics: a very wide kernel averages over
//! the whole partner ensemble (Hartree mean field), a collapsed kernel pins
//! each walker to a single index-paired partner (full correlation).

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::grid::{Grid1D, PotentialGrid};

/// A set of fixed nuclei. `active = false` models sudden release: the
/// electron-nuclear attraction is switched off wholesale.
#[derive(Clone, Debug, PartialEq)]
pub struct NuclearFrame {
    /// `(position, strength)` per nucleus; strength is the soft-core depth.
    pub nuclei: Vec<(f64, f64)>,
    pub active: bool,
}

impl NuclearFrame {
    /// Single nucleus of strength 2 at the origin (helium-like 1D atom).
    pub fn atom() -> Self {
        Self {
            nuclei: vec![(0.0, 2.0)],
            active: true,
        }
    }

    /// Two protons separated by 8 a.u., one unit of strength each.
    pub fn molecule() -> Self {
        Self::molecule_with_strength(1.0)
    }

    pub fn molecule_with_strength(a_w: f64) -> Self {
        Self {
            nuclei: vec![(-4.0, a_w), (4.0, a_w)],
            active: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.nuclei.iter().any(|&(x, a)| !x.is_finite() || !(a >= 0.0)) {
            return Err(Error::Config(
                "nuclear strengths must be finite and nonnegative".into(),
            ));
        }
        Ok(())
    }
}

/// Coupling mode of the effective electron-electron potential.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CouplingMode {
    /// Kernel-weighted average over the partner ensemble (finite sigma).
    Optimized,
    /// Each walker interacts with its index-paired partner only (sigma -> 0).
    UltraCorrelated,
    /// Unweighted average over the partner ensemble (sigma -> infinity).
    MeanField,
}

/// Parameters of the electron-electron coupling.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct CouplingParams {
    /// Electron-electron soft-core strength.
    pub b: f64,
    /// Kernel width as a multiple of the walker-ensemble standard deviation.
    pub alpha: f64,
    pub mode: CouplingMode,
    /// Lower bound on the kernel width, guarding against ensemble collapse.
    #[serde(default = "default_sigma_floor")]
    pub sigma_floor: f64,
    /// Kernel weights below this value are dropped before normalization;
    /// 0 disables the cutoff.
    #[serde(default)]
    pub weight_cutoff: f64,
}

pub(crate) fn default_sigma_floor() -> f64 {
    1e-3
}

impl CouplingParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.b >= 0.0) {
            return Err(Error::Config(format!(
                "coupling strength b must be >= 0, got {}",
                self.b
            )));
        }
        if self.mode == CouplingMode::Optimized && !(self.alpha > 0.0) {
            return Err(Error::Config(format!(
                "alpha must be > 0 in optimized mode, got {}",
                self.alpha
            )));
        }
        if !(self.sigma_floor > 0.0) {
            return Err(Error::Config(format!(
                "sigma_floor must be > 0, got {}",
                self.sigma_floor
            )));
        }
        if !(self.weight_cutoff >= 0.0) {
            return Err(Error::Config(format!(
                "weight_cutoff must be >= 0, got {}",
                self.weight_cutoff
            )));
        }
        Ok(())
    }
}

/// Electron-nuclear soft-core attraction; zero once the frame is released.
pub fn v_en(x: f64, frame: &NuclearFrame) -> f64 {
    if !frame.active {
        return 0.0;
    }
    frame
        .nuclei
        .iter()
        .map(|&(pos, a)| -a / (1.0 + (x - pos).powi(2)).sqrt())
        .sum()
}

/// Electron-electron soft-core repulsion.
pub fn v_ee(separation: f64, b: f64) -> f64 {
    b / (1.0 + separation * separation).sqrt()
}

/// Gaussian kernel weight for a walker pair at the given distance.
pub fn kernel_weight(distance: f64, sigma: f64) -> Result<f64> {
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(Error::Parameter(format!(
            "kernel width must be positive and finite, got {sigma}"
        )));
    }
    Ok((-distance * distance / (2.0 * sigma * sigma)).exp())
}

/// Kernel width from the walker ensemble: `alpha` times the population
/// standard deviation, bounded below by `sigma_floor`.
pub fn sigma_update(walkers: &[f64], alpha: f64, sigma_floor: f64) -> Result<f64> {
    if walkers.is_empty() {
        return Err(Error::State("sigma_update needs a nonempty ensemble".into()));
    }
    let m = walkers.len() as f64;
    let mean = walkers.iter().sum::<f64>() / m;
    let var = walkers.iter().map(|&x| (x - mean).powi(2)).sum::<f64>() / m;
    Ok((alpha * var.sqrt()).max(sigma_floor))
}

/// Electron-nuclear potential sampled on a grid.
pub fn v_en_grid(frame: &NuclearFrame, grid: &Grid1D) -> PotentialGrid {
    let values = grid.positions().iter().map(|&x| v_en(x, frame)).collect();
    PotentialGrid {
        grid: grid.clone(),
        values,
    }
}

/// Effective electron-electron potential seen by the wave guiding walker
/// `k_index`, built from the partner electron's frozen walker positions.
///
/// Reference single-walker form; the engine uses
/// [`effective_potential_batch`] which must agree with this to 1e-12.
pub fn effective_potential(
    grid: &Grid1D,
    other_walkers: &[f64],
    k_index: usize,
    sigma_j: f64,
    b: f64,
    mode: CouplingMode,
    weight_cutoff: f64,
) -> Result<PotentialGrid> {
    if other_walkers.is_empty() {
        return Err(Error::State(
            "effective_potential needs a nonempty partner ensemble".into(),
        ));
    }
    if k_index >= other_walkers.len() {
        return Err(Error::Parameter(format!(
            "walker index {k_index} out of range for ensemble of {}",
            other_walkers.len()
        )));
    }
    let xs = grid.positions();
    let mut values = vec![0.0; grid.n_points()];
    match mode {
        CouplingMode::UltraCorrelated => {
            let p = other_walkers[k_index];
            for (v, &x) in values.iter_mut().zip(xs) {
                *v = v_ee(x - p, b);
            }
        }
        CouplingMode::MeanField => {
            let inv_m = 1.0 / other_walkers.len() as f64;
            for &p in other_walkers {
                for (v, &x) in values.iter_mut().zip(xs) {
                    *v += v_ee(x - p, b) * inv_m;
                }
            }
        }
        CouplingMode::Optimized => {
            let anchor = other_walkers[k_index];
            let mut weights = Vec::with_capacity(other_walkers.len());
            for &p in other_walkers {
                let w = kernel_weight(p - anchor, sigma_j)?;
                weights.push(if w < weight_cutoff { 0.0 } else { w });
            }
            let total: f64 = weights.iter().sum();
            // The anchor's own weight is 1, so the sum can never vanish
            // unless the cutoff exceeds 1.
            if !(total > 0.0) {
                return Err(Error::Degenerate(
                    "all kernel weights cut off; lower weight_cutoff".into(),
                ));
            }
            for (&p, &w) in other_walkers.iter().zip(&weights) {
                if w == 0.0 {
                    continue;
                }
                let scaled = w / total;
                for (v, &x) in values.iter_mut().zip(xs) {
                    *v += v_ee(x - p, b) * scaled;
                }
            }
        }
    }
    PotentialGrid::new(grid.clone(), values)
}

/// Effective potentials for a whole ensemble at once.
pub enum BatchPotentials {
    /// One row shared by every walker (mean field, or b = 0).
    Shared(Vec<f64>),
    /// Row `k` is the potential for walker `k` (M x n).
    PerWalker(Array2<f64>),
}

impl BatchPotentials {
    pub fn row(&self, k: usize) -> &[f64] {
        match self {
            BatchPotentials::Shared(row) => row,
            BatchPotentials::PerWalker(rows) => {
                rows.row(k).to_slice().expect("rows are contiguous")
            }
        }
    }
}

/// Soft-core rows `ROW[l][g] = v_ee(x_g - p_l)` for every partner walker.
fn coulomb_rows(grid: &Grid1D, walkers: &[f64], b: f64) -> Array2<f64> {
    let n = grid.n_points();
    let xs = grid.positions();
    let mut rows = Array2::zeros((walkers.len(), n));
    for (mut row, &p) in rows.rows_mut().into_iter().zip(walkers) {
        let row = row.as_slice_mut().unwrap();
        for (v, &x) in row.iter_mut().zip(xs) {
            let d = x - p;
            *v = b / (1.0 + d * d).sqrt();
        }
    }
    rows
}

/// Row-stochastic kernel weight matrix `W[k][l]` over the partner ensemble.
fn weight_matrix(walkers: &[f64], sigma: f64, cutoff: f64) -> Result<Array2<f64>> {
    let m = walkers.len();
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(Error::Parameter(format!(
            "kernel width must be positive and finite, got {sigma}"
        )));
    }
    let inv_two_sigma_sq = 1.0 / (2.0 * sigma * sigma);
    let mut w = Array2::zeros((m, m));
    // The kernel is symmetric before normalization; fill both triangles at once.
    for k in 0..m {
        w[[k, k]] = 1.0;
        for l in (k + 1)..m {
            let d = walkers[l] - walkers[k];
            let val = (-d * d * inv_two_sigma_sq).exp();
            let val = if val < cutoff { 0.0 } else { val };
            w[[k, l]] = val;
            w[[l, k]] = val;
        }
    }
    for mut row in w.rows_mut() {
        let total = row.sum();
        if !(total > 0.0) {
            return Err(Error::Degenerate(
                "all kernel weights cut off; lower weight_cutoff".into(),
            ));
        }
        row.mapv_inplace(|v| v / total);
    }
    Ok(w)
}

/// All-walker counterpart of [`effective_potential`]: computes the effective
/// electron-electron potential for every walker of the ensemble in one pass.
///
/// In optimized mode this is a dense matrix product
/// `ACC = W · ROW` (weights x Coulomb rows), the dominant cost of a
/// propagation step; it agrees with the single-walker reference to 1e-12.
pub fn effective_potential_batch(
    grid: &Grid1D,
    other_walkers: &[f64],
    sigma_j: f64,
    b: f64,
    mode: CouplingMode,
    weight_cutoff: f64,
) -> Result<BatchPotentials> {
    if other_walkers.is_empty() {
        return Err(Error::State(
            "effective_potential_batch needs a nonempty partner ensemble".into(),
        ));
    }
    if b == 0.0 {
        return Ok(BatchPotentials::Shared(vec![0.0; grid.n_points()]));
    }
    match mode {
        CouplingMode::UltraCorrelated => Ok(BatchPotentials::PerWalker(coulomb_rows(
            grid,
            other_walkers,
            b,
        ))),
        CouplingMode::MeanField => {
            let rows = coulomb_rows(grid, other_walkers, b);
            let inv_m = 1.0 / other_walkers.len() as f64;
            let mean = rows.sum_axis(ndarray::Axis(0)).mapv(|v| v * inv_m);
            Ok(BatchPotentials::Shared(mean.to_vec()))
        }
        CouplingMode::Optimized => {
            let rows = coulomb_rows(grid, other_walkers, b);
            let w = weight_matrix(other_walkers, sigma_j, weight_cutoff)?;
            Ok(BatchPotentials::PerWalker(w.dot(&rows)))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_grid;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn nuclear_attraction_presets() {
        let atom = NuclearFrame::atom();
        assert_eq!(v_en(0.0, &atom), -2.0);
        let mut released = atom.clone();
        released.active = false;
        assert_eq!(v_en(0.0, &released), 0.0);
        assert_eq!(v_en(-17.3, &released), 0.0);

        let molecule = NuclearFrame::molecule();
        let expected = -1.0 - 1.0 / 65.0_f64.sqrt();
        assert!((v_en(4.0, &molecule) - expected).abs() < 1e-12);
        assert!((expected - -1.12403).abs() < 1e-5);
    }

    #[test]
    fn electron_repulsion_values() {
        assert_eq!(v_ee(0.0, 1.0), 1.0);
        assert_eq!(v_ee(123.4, 0.0), 0.0);
        assert!((v_ee(3.0_f64.sqrt(), 1.0) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn kernel_weight_values() {
        assert_eq!(kernel_weight(0.0, 1.0).unwrap(), 1.0);
        let w = kernel_weight(0.7, 0.7).unwrap();
        assert!((w - (-0.5f64).exp()).abs() < 1e-12);
        assert!((w - 0.60653).abs() < 1e-5);
        assert!(kernel_weight(10.0, 1.0).unwrap() < 2e-22);
        assert!(matches!(kernel_weight(1.0, 0.0), Err(Error::Parameter(_))));
        assert!(matches!(kernel_weight(1.0, -2.0), Err(Error::Parameter(_))));
    }

    #[test]
    fn sigma_update_values() {
        assert!((sigma_update(&[-1.0, 1.0], 0.6, 1e-3).unwrap() - 0.6).abs() < 1e-12);
        assert_eq!(sigma_update(&[2.5, 2.5, 2.5], 0.6, 1e-3).unwrap(), 1e-3);
        assert!((sigma_update(&[0.0, 0.0, 3.0, 3.0], 1.0, 1e-3).unwrap() - 1.5).abs() < 1e-12);
        assert!(sigma_update(&[], 0.6, 1e-3).is_err());
    }

    #[test]
    fn effective_potential_single_walker_reduces_to_plain_coulomb() {
        let grid = make_grid(-8.0, 8.0, 64).unwrap();
        for sigma in [0.3, 1.0, 50.0] {
            let pot = effective_potential(&grid, &[1.5], 0, sigma, 0.7, CouplingMode::Optimized, 0.0)
                .unwrap();
            for (v, &x) in pot.values.iter().zip(grid.positions()) {
                assert!((v - v_ee(x - 1.5, 0.7)).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn effective_potential_two_walker_scalar_value() {
        // Partner walkers at 1 and 2, anchor at 1, sigma = b = 1, x = 0:
        // (v_ee(1) + e^{-1/2} v_ee(2)) / (1 + e^{-1/2}).
        let grid = make_grid(-8.0, 8.0, 64).unwrap();
        let j0 = grid
            .positions()
            .iter()
            .position(|&x| x.abs() < 1e-12)
            .unwrap();
        let pot =
            effective_potential(&grid, &[1.0, 2.0], 0, 1.0, 1.0, CouplingMode::Optimized, 0.0)
                .unwrap();
        let w2 = (-0.5f64).exp();
        let expected = (0.5f64.sqrt() + w2 / 5.0f64.sqrt()) / (1.0 + w2);
        assert!(
            (pot.values[j0] - expected).abs() < 1e-12,
            "got {}, expected {expected}",
            pot.values[j0]
        );
        // Two-decimal sanity anchor on the same number.
        assert!((expected - 0.6090).abs() < 2e-4);
    }

    #[test]
    fn mean_field_matches_huge_sigma_optimized() {
        let grid = make_grid(-20.0, 20.0, 128).unwrap();
        let walkers = [-2.0, -0.5, 0.1, 1.7, 3.2];
        let mf = effective_potential(&grid, &walkers, 3, 1.0, 1.0, CouplingMode::MeanField, 0.0)
            .unwrap();
        let wide =
            effective_potential(&grid, &walkers, 3, 1e6, 1.0, CouplingMode::Optimized, 0.0)
                .unwrap();
        for (a, b) in mf.values.iter().zip(&wide.values) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn mean_field_is_independent_of_walker_index() {
        let grid = make_grid(-20.0, 20.0, 128).unwrap();
        let walkers = [-2.0, -0.5, 0.1, 1.7, 3.2];
        let a = effective_potential(&grid, &walkers, 0, 1.0, 0.8, CouplingMode::MeanField, 0.0)
            .unwrap();
        let b = effective_potential(&grid, &walkers, 4, 1.0, 0.8, CouplingMode::MeanField, 0.0)
            .unwrap();
        assert_eq!(a.values, b.values);
    }

    #[test]
    fn zero_coupling_gives_zero_potential_in_every_mode() {
        let grid = make_grid(-20.0, 20.0, 128).unwrap();
        let walkers = [-1.0, 0.3, 2.0];
        for mode in [
            CouplingMode::Optimized,
            CouplingMode::UltraCorrelated,
            CouplingMode::MeanField,
        ] {
            let pot = effective_potential(&grid, &walkers, 1, 0.7, 0.0, mode, 0.0).unwrap();
            assert!(pot.values.iter().all(|&v| v == 0.0));
            match effective_potential_batch(&grid, &walkers, 0.7, 0.0, mode, 0.0).unwrap() {
                BatchPotentials::Shared(row) => assert!(row.iter().all(|&v| v == 0.0)),
                BatchPotentials::PerWalker(_) => panic!("b=0 should short-circuit"),
            }
        }
    }

    #[test]
    fn batch_agrees_with_single_walker_reference() {
        let grid = make_grid(-30.0, 30.0, 256).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let walkers: Vec<f64> = (0..40).map(|_| rng.gen_range(-5.0..5.0)).collect();
        for mode in [
            CouplingMode::Optimized,
            CouplingMode::UltraCorrelated,
            CouplingMode::MeanField,
        ] {
            let batch =
                effective_potential_batch(&grid, &walkers, 0.8, 1.0, mode, 0.0).unwrap();
            for k in [0usize, 7, 39] {
                let single =
                    effective_potential(&grid, &walkers, k, 0.8, 1.0, mode, 0.0).unwrap();
                let row = batch.row(k);
                let max_diff = single
                    .values
                    .iter()
                    .zip(row)
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max);
                assert!(max_diff < 1e-12, "{mode:?} walker {k}: {max_diff}");
            }
        }
    }

    #[test]
    fn weight_cutoff_perturbs_results_below_tolerance() {
        let grid = make_grid(-30.0, 30.0, 256).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let walkers: Vec<f64> = (0..200).map(|_| rng.gen_range(-4.0..4.0)).collect();
        let sigma = 0.6;
        let exact =
            effective_potential_batch(&grid, &walkers, sigma, 1.0, CouplingMode::Optimized, 0.0)
                .unwrap();
        let cut =
            effective_potential_batch(&grid, &walkers, sigma, 1.0, CouplingMode::Optimized, 2e-8)
                .unwrap();
        let (BatchPotentials::PerWalker(a), BatchPotentials::PerWalker(b)) = (&exact, &cut)
        else {
            panic!("expected per-walker potentials");
        };
        let max_diff = a
            .iter()
            .zip(b.iter())
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max);
        assert!(max_diff <= 1e-8, "cutoff changed results by {max_diff}");
    }

    #[test]
    fn potentials_are_bounded_by_soft_core_limits() {
        let frame = NuclearFrame::molecule();
        let total_strength: f64 = frame.nuclei.iter().map(|&(_, a)| a).sum();
        for x in [-50.0, -4.0, 0.0, 4.0, 50.0] {
            assert!(v_en(x, &frame).abs() <= total_strength);
        }
        for s in [-10.0, 0.0, 0.1, 10.0] {
            assert!(v_ee(s, 0.3).abs() <= 0.3);
        }
    }

    proptest! {
        #[test]
        fn effective_potential_is_convex_combination(
            seed in 0u64..1000,
            m in 2usize..30,
            sigma in 0.05f64..5.0,
            b in 0.01f64..2.0,
        ) {
            let grid = make_grid(-30.0, 30.0, 64).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let walkers: Vec<f64> = (0..m).map(|_| rng.gen_range(-6.0..6.0)).collect();
            let k = rng.gen_range(0..m);
            for mode in [CouplingMode::Optimized, CouplingMode::UltraCorrelated, CouplingMode::MeanField] {
                let pot = effective_potential(&grid, &walkers, k, sigma, b, mode, 0.0).unwrap();
                for (v, &x) in pot.values.iter().zip(grid.positions()) {
                    let lo = walkers.iter().map(|&p| v_ee(x - p, b)).fold(f64::INFINITY, f64::min);
                    let hi = walkers.iter().map(|&p| v_ee(x - p, b)).fold(f64::NEG_INFINITY, f64::max);
                    prop_assert!(*v >= lo - 1e-12 && *v <= hi + 1e-12);
                }
            }
        }

        #[test]
        fn batch_matches_reference_on_random_ensembles(
            seed in 0u64..500,
            m in 2usize..25,
            sigma in 0.1f64..3.0,
        ) {
            let grid = make_grid(-20.0, 20.0, 64).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let walkers: Vec<f64> = (0..m).map(|_| rng.gen_range(-5.0..5.0)).collect();
            let batch = effective_potential_batch(&grid, &walkers, sigma, 1.0, CouplingMode::Optimized, 0.0).unwrap();
            for k in 0..m {
                let single = effective_potential(&grid, &walkers, k, sigma, 1.0, CouplingMode::Optimized, 0.0).unwrap();
                for (a, b) in single.values.iter().zip(batch.row(k)) {
                    prop_assert!((a - b).abs() < 1e-12);
                }
            }
        }
    }
}
