//! Uniform 1D grids, complex wavefunctions on them, and the numerical
//! substrate every other module builds on: norms, densities, inverse-CDF
//! sampling, Strang split-operator steps with a spectral kinetic term,
//! spectral derivatives, Bohmian velocities, and single-particle energies.
//!
//! Conventions: atomic units throughout (hbar = m = 1), periodic grid with
//! `x_j = x_min + j*dx` for `j in 0..n` (`x_max` excluded), wavenumbers in
//! FFT ordering.

use std::f64::consts::PI;
use std::sync::Arc;

use ndarray::Array1;
use num_complex::Complex64;
use rustfft::Fft;

use crate::error::{Error, Result};
use crate::fft;

/// Relative density threshold below which a point counts as a node for
/// Bohmian velocity evaluation.
pub const NODE_DENSITY_THRESHOLD: f64 = 1e-12;

#[derive(Clone)]
pub struct Grid1D {
    inner: Arc<GridInner>,
}

struct GridInner {
    x_min: f64,
    x_max: f64,
    n: usize,
    dx: f64,
    positions: Vec<f64>,
    k_values: Vec<f64>,
    fft_fwd: Arc<dyn Fft<f64>>,
    fft_inv: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for Grid1D {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Grid1D")
            .field("x_min", &self.inner.x_min)
            .field("x_max", &self.inner.x_max)
            .field("n", &self.inner.n)
            .field("dx", &self.inner.dx)
            .finish()
    }
}

impl PartialEq for Grid1D {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.inner, &other.inner)
            || (self.inner.x_min == other.inner.x_min
                && self.inner.x_max == other.inner.x_max
                && self.inner.n == other.inner.n)
    }
}

/// Build a uniform grid on `[x_min, x_max)` with `n_points` samples.
/// `n_points` must be a power of two, at least 16.
pub fn make_grid(x_min: f64, x_max: f64, n_points: usize) -> Result<Grid1D> {
    if !(x_min.is_finite() && x_max.is_finite()) || x_max <= x_min {
        return Err(Error::Config(format!(
            "grid bounds must satisfy x_min < x_max, got [{x_min}, {x_max}]"
        )));
    }
    if n_points < 16 || !n_points.is_power_of_two() {
        return Err(Error::Config(format!(
            "n_points must be a power of two >= 16, got {n_points}"
        )));
    }
    let n = n_points;
    let dx = (x_max - x_min) / n as f64;
    let length = x_max - x_min;
    let positions: Vec<f64> = (0..n).map(|j| x_min + j as f64 * dx).collect();
    // FFT ordering: k_j = 2*pi*j/L for j <= n/2, then negative frequencies.
    let k_values: Vec<f64> = (0..n)
        .map(|j| {
            let m = if j <= n / 2 { j as i64 } else { j as i64 - n as i64 };
            2.0 * PI * m as f64 / length
        })
        .collect();
    Ok(Grid1D {
        inner: Arc::new(GridInner {
            x_min,
            x_max,
            n,
            dx,
            positions,
            k_values,
            fft_fwd: fft::forward_plan(n),
            fft_inv: fft::inverse_plan(n),
        }),
    })
}

impl Grid1D {
    pub fn x_min(&self) -> f64 {
        self.inner.x_min
    }

    pub fn x_max(&self) -> f64 {
        self.inner.x_max
    }

    pub fn n_points(&self) -> usize {
        self.inner.n
    }

    pub fn dx(&self) -> f64 {
        self.inner.dx
    }

    pub fn positions(&self) -> &[f64] {
        &self.inner.positions
    }

    pub fn k_values(&self) -> &[f64] {
        &self.inner.k_values
    }

    pub fn position(&self, j: usize) -> f64 {
        self.inner.positions[j]
    }

    /// True when the grid is symmetric about the origin (x_min = -x_max).
    pub fn is_symmetric(&self) -> bool {
        (self.inner.x_min + self.inner.x_max).abs() < 1e-12 * (self.inner.x_max - self.inner.x_min)
    }

    /// Grid index of `-x_j` on a symmetric periodic grid.
    pub fn mirror_index(&self, j: usize) -> usize {
        (self.inner.n - j) % self.inner.n
    }

    /// Spectral-derivative multipliers `i k`, with the self-conjugate
    /// Nyquist bin zeroed so derivatives of real waves stay real.
    pub(crate) fn ik_factors(&self) -> Vec<Complex64> {
        let n = self.inner.n;
        self.inner
            .k_values
            .iter()
            .enumerate()
            .map(|(j, &k)| {
                if j == n / 2 {
                    Complex64::default()
                } else {
                    Complex64::new(0.0, k)
                }
            })
            .collect()
    }

    pub(crate) fn fft_forward(&self, buf: &mut [Complex64], scratch: &mut Vec<Complex64>) {
        fft::process(&self.inner.fft_fwd, buf, scratch);
    }

    /// Inverse FFT including the 1/n normalization.
    pub(crate) fn fft_inverse(&self, buf: &mut [Complex64], scratch: &mut Vec<Complex64>) {
        fft::process(&self.inner.fft_inv, buf, scratch);
        let scale = 1.0 / self.inner.n as f64;
        for v in buf.iter_mut() {
            *v *= scale;
        }
    }
}

/// A single-particle wavefunction sampled on a [`Grid1D`].
#[derive(Clone, Debug)]
pub struct Wavefunction1D {
    pub grid: Grid1D,
    pub amplitudes: Array1<Complex64>,
}

impl Wavefunction1D {
    pub fn new(grid: Grid1D, amplitudes: Array1<Complex64>) -> Result<Self> {
        if amplitudes.len() != grid.n_points() {
            return Err(Error::Shape(format!(
                "wavefunction length {} does not match grid size {}",
                amplitudes.len(),
                grid.n_points()
            )));
        }
        Ok(Self { grid, amplitudes })
    }

    pub fn from_fn(grid: &Grid1D, mut f: impl FnMut(f64) -> Complex64) -> Self {
        let amplitudes = grid.positions().iter().map(|&x| f(x)).collect();
        Self {
            grid: grid.clone(),
            amplitudes,
        }
    }

    /// Normalized Gaussian packet whose probability density has standard
    /// deviation `width`, centered at `center`, with carrier momentum `momentum`.
    pub fn gaussian(grid: &Grid1D, center: f64, width: f64, momentum: f64) -> Self {
        let norm = (2.0 * PI * width * width).powf(-0.25);
        Self::from_fn(grid, |x| {
            let arg = -(x - center).powi(2) / (4.0 * width * width);
            Complex64::from_polar(norm * arg.exp(), momentum * (x - center))
        })
    }

    pub fn norm_sq(&self) -> f64 {
        norm_sq_slice(&self.grid, self.amplitudes.as_slice().unwrap())
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub(crate) fn amps(&self) -> &[Complex64] {
        self.amplitudes.as_slice().unwrap()
    }
}

/// A real potential sampled on a [`Grid1D`]. Values must be finite.
#[derive(Clone, Debug)]
pub struct PotentialGrid {
    pub grid: Grid1D,
    pub values: Vec<f64>,
}

impl PotentialGrid {
    pub fn new(grid: Grid1D, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.n_points() {
            return Err(Error::Shape(format!(
                "potential length {} does not match grid size {}",
                values.len(),
                grid.n_points()
            )));
        }
        if !values.iter().all(|v| v.is_finite()) {
            return Err(Error::Blowup("potential contains non-finite values".into()));
        }
        Ok(Self { grid, values })
    }

    pub fn from_fn(grid: &Grid1D, f: impl Fn(f64) -> f64) -> Result<Self> {
        let values = grid.positions().iter().map(|&x| f(x)).collect();
        Self::new(grid.clone(), values)
    }

    pub fn zero(grid: &Grid1D) -> Self {
        Self {
            grid: grid.clone(),
            values: vec![0.0; grid.n_points()],
        }
    }
}

/// Propagation mode of [`split_step`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StepMode {
    /// Unitary evolution by `exp(-iH dt)`.
    RealTime,
    /// Diffusive relaxation by `exp(-H dtau)` followed by renormalization.
    ImaginaryTime,
}

pub(crate) fn norm_sq_slice(grid: &Grid1D, amps: &[Complex64]) -> f64 {
    amps.iter().map(|a| a.norm_sqr()).sum::<f64>() * grid.dx()
}

/// Scale `amps` to unit norm; returns the norm it had before scaling.
pub(crate) fn normalize_slice(grid: &Grid1D, amps: &mut [Complex64]) -> Result<f64> {
    let norm = norm_sq_slice(grid, amps).sqrt();
    if !norm.is_finite() {
        return Err(Error::Blowup("wave norm is not finite".into()));
    }
    if norm < 1e-150 {
        return Err(Error::Degenerate("cannot normalize a zero-norm wave".into()));
    }
    let inv = 1.0 / norm;
    for a in amps.iter_mut() {
        *a *= inv;
    }
    Ok(norm)
}

/// Returns a unit-norm copy of `wave`.
pub fn normalize(wave: &Wavefunction1D) -> Result<Wavefunction1D> {
    let mut out = wave.clone();
    normalize_slice(&wave.grid, out.amplitudes.as_slice_mut().unwrap())?;
    Ok(out)
}

pub(crate) fn density_slice(amps: &[Complex64], out: &mut [f64]) {
    for (o, a) in out.iter_mut().zip(amps) {
        *o = a.norm_sqr();
    }
}

/// Pointwise probability density `|psi|^2`.
pub fn density(wave: &Wavefunction1D) -> Vec<f64> {
    wave.amplitudes.iter().map(|a| a.norm_sqr()).collect()
}

/// Draw a position from a gridded density by inverting its CDF at `u`.
///
/// Each grid point carries mass `density[j]*dx` spread uniformly over the
/// cell `[x_j - dx/2, x_j + dx/2)`; the inverse is linear within cells.
pub fn sample_inverse_cdf(density: &[f64], grid: &Grid1D, u: f64) -> Result<f64> {
    if density.len() != grid.n_points() {
        return Err(Error::Shape(format!(
            "density length {} does not match grid size {}",
            density.len(),
            grid.n_points()
        )));
    }
    let total: f64 = density.iter().map(|&d| d.max(0.0)).sum();
    if !(total > 0.0) || !total.is_finite() {
        return Err(Error::Degenerate(
            "cannot sample from an all-zero or non-finite density".into(),
        ));
    }
    let target = u.clamp(0.0, 1.0 - f64::EPSILON) * total;
    let mut acc = 0.0;
    for (j, &d) in density.iter().enumerate() {
        let mass = d.max(0.0);
        if acc + mass > target {
            let frac = if mass > 0.0 { (target - acc) / mass } else { 0.5 };
            return Ok(grid.position(j) + (frac - 0.5) * grid.dx());
        }
        acc += mass;
    }
    // Rounding pushed the target past the last occupied cell.
    let last = density.iter().rposition(|&d| d > 0.0).unwrap();
    Ok(grid.position(last) + 0.5 * grid.dx() * (1.0 - f64::EPSILON))
}

/// Kinetic split-step factors for a fixed `dt` and mode, in FFT ordering.
pub(crate) fn kinetic_factors(grid: &Grid1D, dt: f64, mode: StepMode) -> Vec<Complex64> {
    grid.k_values()
        .iter()
        .map(|&k| {
            let half_k2 = 0.5 * k * k;
            match mode {
                StepMode::RealTime => Complex64::from_polar(1.0, -half_k2 * dt),
                StepMode::ImaginaryTime => Complex64::new((-half_k2 * dt).exp(), 0.0),
            }
        })
        .collect()
}

/// One Strang-split step with precomputed kinetic factors.
/// Imaginary mode renormalizes afterwards.
pub(crate) fn split_step_with_tables(
    grid: &Grid1D,
    amps: &mut [Complex64],
    potential: &[f64],
    dt: f64,
    mode: StepMode,
    kinetic: &[Complex64],
    scratch: &mut Vec<Complex64>,
) -> Result<()> {
    debug_assert_eq!(potential.len(), amps.len());
    debug_assert_eq!(kinetic.len(), amps.len());
    let half = 0.5 * dt;
    match mode {
        StepMode::RealTime => {
            for (a, &v) in amps.iter_mut().zip(potential) {
                *a *= Complex64::from_polar(1.0, -v * half);
            }
        }
        StepMode::ImaginaryTime => {
            for (a, &v) in amps.iter_mut().zip(potential) {
                *a *= (-v * half).exp();
            }
        }
    }
    grid.fft_forward(amps, scratch);
    for (a, f) in amps.iter_mut().zip(kinetic) {
        *a *= f;
    }
    grid.fft_inverse(amps, scratch);
    match mode {
        StepMode::RealTime => {
            for (a, &v) in amps.iter_mut().zip(potential) {
                *a *= Complex64::from_polar(1.0, -v * half);
            }
        }
        StepMode::ImaginaryTime => {
            for (a, &v) in amps.iter_mut().zip(potential) {
                *a *= (-v * half).exp();
            }
            normalize_slice(grid, amps)?;
        }
    }
    Ok(())
}

/// One Strang split-operator step `exp(-iV dt/2) exp(-iT dt) exp(-iV dt/2)`
/// (real mode) or its imaginary-time counterpart with renormalization.
pub fn split_step(
    wave: &Wavefunction1D,
    potential: &PotentialGrid,
    dt: f64,
    mode: StepMode,
) -> Result<Wavefunction1D> {
    if potential.grid != wave.grid {
        return Err(Error::Shape(
            "potential and wavefunction live on different grids".into(),
        ));
    }
    if !(dt.abs() > 0.0) || !dt.is_finite() {
        return Err(Error::Parameter(format!("time step must be nonzero, got {dt}")));
    }
    let mut out = wave.clone();
    let kinetic = kinetic_factors(&wave.grid, dt, mode);
    let mut scratch = Vec::new();
    split_step_with_tables(
        &wave.grid,
        out.amplitudes.as_slice_mut().unwrap(),
        &potential.values,
        dt,
        mode,
        &kinetic,
        &mut scratch,
    )?;
    Ok(out)
}

/// Spectral derivative with a caller-provided `i k` table (engine hot path).
pub(crate) fn spectral_derivative_with_table(
    grid: &Grid1D,
    amps: &[Complex64],
    out: &mut [Complex64],
    ik: &[Complex64],
    scratch: &mut Vec<Complex64>,
) {
    out.copy_from_slice(amps);
    grid.fft_forward(out, scratch);
    for (o, f) in out.iter_mut().zip(ik) {
        *o *= f;
    }
    grid.fft_inverse(out, scratch);
}

/// Spectral derivative: `out = d/dx amps` via multiplication by `i k`
/// (Nyquist bin dropped; see [`Grid1D::ik_factors`]).
pub(crate) fn spectral_derivative_slice(
    grid: &Grid1D,
    amps: &[Complex64],
    out: &mut [Complex64],
    scratch: &mut Vec<Complex64>,
) {
    spectral_derivative_with_table(grid, amps, out, &grid.ik_factors(), scratch);
}

/// Linear interpolation of gridded complex values at `x`, clamped to the
/// grid's edge cells outside the covered range.
pub(crate) fn interp_complex(grid: &Grid1D, values: &[Complex64], x: f64) -> Complex64 {
    let n = grid.n_points();
    let t = (x - grid.x_min()) / grid.dx();
    if t <= 0.0 {
        return values[0];
    }
    let j = t.floor() as usize;
    if j >= n - 1 {
        return values[n - 1];
    }
    let frac = t - j as f64;
    values[j] * (1.0 - frac) + values[j + 1] * frac
}

/// Piecewise-linear interpolation of a gridded density at `x`, returning
/// the value and the in-cell slope. Points outside the interpolated
/// interior report zero density, so samplers treat them as forbidden.
pub(crate) fn interp_density_with_slope(grid: &Grid1D, density: &[f64], x: f64) -> (f64, f64) {
    let n = grid.n_points();
    let t = (x - grid.x_min()) / grid.dx();
    if t < 0.0 || t >= (n - 1) as f64 {
        return (0.0, 0.0);
    }
    let j = t.floor() as usize;
    let frac = t - j as f64;
    let slope = (density[j + 1] - density[j]) / grid.dx();
    (density[j] * (1.0 - frac) + density[j + 1] * frac, slope)
}

/// Velocity sample with node-handling information.
#[derive(Clone, Copy, Debug)]
pub struct VelocitySample {
    pub velocity: f64,
    /// Set when the evaluation point sat on a node (or produced a speed
    /// beyond the cap) and the speed was clamped.
    pub clamped: bool,
}

/// de Broglie-Bohm velocity `v = Im[psi'(x)/psi(x)]` with hbar = m = 1.
///
/// The derivative is spectral; both `psi` and `psi'` are linearly
/// interpolated at `x`. At nodes (relative density below
/// [`NODE_DENSITY_THRESHOLD`]) the speed is clamped to `speed_cap` and the
/// sample is flagged.
pub fn bohm_velocity(wave: &Wavefunction1D, x: f64, speed_cap: f64) -> VelocitySample {
    let mut deriv = vec![Complex64::default(); wave.amplitudes.len()];
    let mut scratch = Vec::new();
    spectral_derivative_slice(&wave.grid, wave.amps(), &mut deriv, &mut scratch);
    let max_density = wave
        .amplitudes
        .iter()
        .map(|a| a.norm_sqr())
        .fold(0.0, f64::max);
    bohm_velocity_precomputed(&wave.grid, wave.amps(), &deriv, max_density, x, speed_cap)
}

/// Hot-path variant of [`bohm_velocity`] with the spectral derivative and
/// the wave's peak density computed once per wave by the caller.
pub(crate) fn bohm_velocity_precomputed(
    grid: &Grid1D,
    amps: &[Complex64],
    deriv: &[Complex64],
    max_density: f64,
    x: f64,
    speed_cap: f64,
) -> VelocitySample {
    let psi = interp_complex(grid, amps, x);
    let dpsi = interp_complex(grid, deriv, x);
    let density = psi.norm_sqr();
    let at_node = density < NODE_DENSITY_THRESHOLD * max_density || density == 0.0;
    let raw = if density == 0.0 {
        0.0
    } else {
        (dpsi / psi).im
    };
    if at_node || raw.abs() > speed_cap {
        VelocitySample {
            velocity: raw.clamp(-speed_cap, speed_cap),
            clamped: true,
        }
    } else {
        VelocitySample {
            velocity: raw,
            clamped: false,
        }
    }
}

/// Kinetic and potential parts of `<psi|H|psi>` for a unit-norm wave.
pub(crate) fn energy_parts_slice(
    grid: &Grid1D,
    amps: &[Complex64],
    potential: &[f64],
    scratch: &mut Vec<Complex64>,
    work: &mut Vec<Complex64>,
) -> (f64, f64) {
    let n = grid.n_points();
    let dx = grid.dx();
    let pot: f64 = amps
        .iter()
        .zip(potential)
        .map(|(a, &v)| v * a.norm_sqr())
        .sum::<f64>()
        * dx;
    work.clear();
    work.extend_from_slice(amps);
    grid.fft_forward(work, scratch);
    let kin: f64 = work
        .iter()
        .zip(grid.k_values())
        .map(|(a, &k)| 0.5 * k * k * a.norm_sqr())
        .sum::<f64>()
        * dx
        / n as f64;
    (kin, pot)
}

/// `<psi| -1/2 d^2/dx^2 + V |psi>` with a spectral kinetic term.
/// Assumes `wave` is normalized.
pub fn single_particle_energy(wave: &Wavefunction1D, potential: &PotentialGrid) -> Result<f64> {
    if potential.grid != wave.grid {
        return Err(Error::Shape(
            "potential and wavefunction live on different grids".into(),
        ));
    }
    let mut scratch = Vec::new();
    let mut work = Vec::new();
    let (kin, pot) = energy_parts_slice(
        &wave.grid,
        wave.amps(),
        &potential.values,
        &mut scratch,
        &mut work,
    );
    Ok(kin + pot)
}

/// Probability mass within `margin` of either grid edge; used to monitor
/// wraparound on the periodic grid.
pub fn edge_probability(grid: &Grid1D, density: &[f64], margin: f64) -> f64 {
    grid.positions()
        .iter()
        .zip(density)
        .filter(|(&x, _)| x < grid.x_min() + margin || x > grid.x_max() - margin)
        .map(|(_, &d)| d)
        .sum::<f64>()
        * grid.dx()
}
