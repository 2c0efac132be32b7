//! Numerically exact two-electron reference solver on an n x n grid:
//! imaginary-time ground-state relaxation, real-time split-step evolution,
//! reduced density matrices, marginal densities, and exact Bohmian
//! configuration-space trajectories. Every Monte Carlo result in this crate
//! is judged against this module.

use ndarray::Array2;
use num_complex::Complex64;

use crate::analysis::DensityMatrixCoord;
use crate::error::{Error, Result};
use crate::grid::{self, Grid1D, PotentialGrid, StepMode, Wavefunction1D};
use crate::potentials::{v_ee, v_en, NuclearFrame};

/// Two-electron wavefunction `psi[[i, j]] = Psi(x1_i, x2_j)` on a shared
/// per-axis grid.
#[derive(Clone, Debug)]
pub struct ExactState2D {
    pub grid: Grid1D,
    pub psi: Array2<Complex64>,
    pub time: f64,
}

impl ExactState2D {
    pub fn norm_sq(&self) -> f64 {
        let dx = self.grid.dx();
        self.psi.iter().map(|v| v.norm_sqr()).sum::<f64>() * dx * dx
    }

    pub fn normalize(&mut self) -> Result<()> {
        let norm = self.norm_sq().sqrt();
        if !norm.is_finite() {
            return Err(Error::Blowup("two-body norm is not finite".into()));
        }
        if norm < 1e-150 {
            return Err(Error::Degenerate("cannot normalize a zero two-body state".into()));
        }
        let inv = 1.0 / norm;
        self.psi.mapv_inplace(|v| v * inv);
        Ok(())
    }

    /// Largest elementwise deviation from exchange symmetry `x1 <-> x2`.
    pub fn exchange_error(&self) -> f64 {
        let n = self.grid.n_points();
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                worst = worst.max((self.psi[[i, j]] - self.psi[[j, i]]).norm());
            }
        }
        worst
    }
}

/// Which electron's single-particle quantity to extract.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Electron {
    First,
    Second,
}

/// Total two-body potential on the grid, including the soft-core
/// electron-electron term at strength `b`.
pub fn pair_potential(grid: &Grid1D, frame: &NuclearFrame, b: f64) -> Array2<f64> {
    let n = grid.n_points();
    let en: Vec<f64> = grid.positions().iter().map(|&x| v_en(x, frame)).collect();
    // x1_i - x2_j = (i - j) dx: one lookup row instead of n^2 sqrt calls.
    let dx = grid.dx();
    let vee: Vec<f64> = (0..2 * n - 1)
        .map(|d| v_ee((d as isize - (n as isize - 1)) as f64 * dx, b))
        .collect();
    let mut v = Array2::zeros((n, n));
    for i in 0..n {
        let row = v.row_mut(i);
        let row = row.into_slice().unwrap();
        for (j, r) in row.iter_mut().enumerate() {
            *r = en[i] + en[j] + vee[(i + n - 1) - j];
        }
    }
    v
}

/// In-place blocked transpose of a square matrix.
fn transpose_square(a: &mut Array2<Complex64>) {
    let n = a.nrows();
    const BLOCK: usize = 32;
    for bi in (0..n).step_by(BLOCK) {
        for bj in (bi..n).step_by(BLOCK) {
            for i in bi..(bi + BLOCK).min(n) {
                let j0 = if bi == bj { i + 1 } else { bj };
                for j in j0..(bj + BLOCK).min(n) {
                    a.swap([i, j], [j, i]);
                }
            }
        }
    }
}

/// Half-step potential factors for one propagation mode.
enum HalfPotential {
    Phase(Array2<Complex64>),
    Decay(Array2<f64>),
}

impl HalfPotential {
    fn new(v: &Array2<f64>, dt: f64, mode: StepMode) -> Self {
        let half = 0.5 * dt;
        match mode {
            StepMode::RealTime => {
                HalfPotential::Phase(v.mapv(|val| Complex64::from_polar(1.0, -val * half)))
            }
            StepMode::ImaginaryTime => HalfPotential::Decay(v.mapv(|val| (-val * half).exp())),
        }
    }

    fn apply(&self, psi: &mut Array2<Complex64>) {
        match self {
            HalfPotential::Phase(p) => {
                ndarray::Zip::from(psi).and(p).for_each(|a, &f| *a *= f);
            }
            HalfPotential::Decay(p) => {
                ndarray::Zip::from(psi).and(p).for_each(|a, &f| *a *= f);
            }
        }
    }
}

/// Reusable workspace for two-dimensional split steps.
struct Stepper2D {
    grid: Grid1D,
    half_v: HalfPotential,
    kinetic: Vec<Complex64>,
    mode: StepMode,
    scratch: Vec<Complex64>,
}

impl Stepper2D {
    fn new(grid: &Grid1D, v: &Array2<f64>, dt: f64, mode: StepMode) -> Self {
        Self {
            grid: grid.clone(),
            half_v: HalfPotential::new(v, dt, mode),
            kinetic: grid::kinetic_factors(grid, dt, mode),
            mode,
            scratch: Vec::new(),
        }
    }

    fn fft_rows_forward(&mut self, psi: &mut Array2<Complex64>) {
        for mut row in psi.rows_mut() {
            self.grid
                .fft_forward(row.as_slice_mut().unwrap(), &mut self.scratch);
        }
    }

    fn fft_rows_inverse(&mut self, psi: &mut Array2<Complex64>) {
        for mut row in psi.rows_mut() {
            self.grid
                .fft_inverse(row.as_slice_mut().unwrap(), &mut self.scratch);
        }
    }

    /// One Strang step; renormalizes in imaginary mode and returns the norm
    /// the state had just before renormalization (1.0 in real mode).
    fn step(&mut self, psi: &mut Array2<Complex64>) -> Result<f64> {
        self.half_v.apply(psi);
        self.fft_rows_forward(psi);
        transpose_square(psi);
        self.fft_rows_forward(psi);
        // The kinetic factor f[p] f[q] is symmetric, so the transposed
        // orientation does not matter here.
        for (q, mut row) in psi.rows_mut().into_iter().enumerate() {
            let fq = self.kinetic[q];
            let row = row.as_slice_mut().unwrap();
            for (p, a) in row.iter_mut().enumerate() {
                *a *= fq * self.kinetic[p];
            }
        }
        self.fft_rows_inverse(psi);
        transpose_square(psi);
        self.fft_rows_inverse(psi);
        self.half_v.apply(psi);
        if self.mode == StepMode::ImaginaryTime {
            let dx = self.grid.dx();
            let norm = (psi.iter().map(|v| v.norm_sqr()).sum::<f64>() * dx * dx).sqrt();
            if !norm.is_finite() || norm < 1e-150 {
                return Err(Error::Blowup(format!(
                    "imaginary-time norm degenerated to {norm}"
                )));
            }
            let inv = 1.0 / norm;
            psi.mapv_inplace(|v| v * inv);
            Ok(norm)
        } else {
            Ok(1.0)
        }
    }
}

/// `<Psi|T + V|Psi>` with a spectral kinetic term; assumes unit norm.
pub fn total_energy_with_potential(state: &ExactState2D, v: &Array2<f64>) -> f64 {
    let grid = &state.grid;
    let n = grid.n_points();
    let dx = grid.dx();
    let pot: f64 = state
        .psi
        .iter()
        .zip(v.iter())
        .map(|(a, &val)| val * a.norm_sqr())
        .sum::<f64>()
        * dx
        * dx;
    let mut spec = state.psi.clone();
    let mut scratch = Vec::new();
    for mut row in spec.rows_mut() {
        grid.fft_forward(row.as_slice_mut().unwrap(), &mut scratch);
    }
    transpose_square(&mut spec);
    for mut row in spec.rows_mut() {
        grid.fft_forward(row.as_slice_mut().unwrap(), &mut scratch);
    }
    let ks = grid.k_values();
    let mut kin = 0.0;
    for (q, row) in spec.rows().into_iter().enumerate() {
        let kq2 = ks[q] * ks[q];
        for (p, a) in row.iter().enumerate() {
            kin += 0.5 * (ks[p] * ks[p] + kq2) * a.norm_sqr();
        }
    }
    kin * dx * dx / (n * n) as f64 + pot
}

/// Total energy for the physical potential `V_en(x1) + V_en(x2) + V_ee`.
pub fn total_energy(state: &ExactState2D, frame: &NuclearFrame, b: f64) -> f64 {
    total_energy_with_potential(state, &pair_potential(&state.grid, frame, b))
}

/// Converged ground state with its variational energy.
pub struct ExactGroundState {
    pub state: ExactState2D,
    pub energy: f64,
    pub steps: usize,
}

/// Imaginary-time relaxation under an arbitrary static two-body potential.
///
/// Convergence is judged on the per-step energy estimate
/// `E = -ln(norm)/dtau` from the norm decay; iteration stops when the
/// estimate changes by less than `tol` per step.
pub fn exact_ground_state_with_potential(
    grid: &Grid1D,
    v: &Array2<f64>,
    dtau: f64,
    tol: f64,
    max_steps: usize,
) -> Result<ExactGroundState> {
    if !(tol > 0.0) {
        return Err(Error::Parameter(format!("tolerance must be positive, got {tol}")));
    }
    if !(dtau > 0.0) {
        return Err(Error::Parameter(format!("dtau must be positive, got {dtau}")));
    }
    let n = grid.n_points();
    // Symmetric Gaussian blob wide enough to overlap any preset's ground
    // state; exchange-symmetric by construction.
    let width = 0.15 * (grid.x_max() - grid.x_min());
    let mut state = ExactState2D {
        grid: grid.clone(),
        psi: Array2::from_shape_fn((n, n), |(i, j)| {
            let x1 = grid.position(i);
            let x2 = grid.position(j);
            Complex64::new((-(x1 * x1 + x2 * x2) / (2.0 * width * width)).exp(), 0.0)
        }),
        time: 0.0,
    };
    state.normalize()?;
    let mut stepper = Stepper2D::new(grid, v, dtau, StepMode::ImaginaryTime);
    let mut last_energy = f64::INFINITY;
    for step in 1..=max_steps {
        let norm = stepper.step(&mut state.psi)?;
        let energy = -norm.ln() / dtau;
        if !energy.is_finite() {
            return Err(Error::Blowup(format!(
                "energy estimate became non-finite at step {step}"
            )));
        }
        let delta = (energy - last_energy).abs();
        if delta < tol {
            return Ok(ExactGroundState {
                energy: total_energy_with_potential(&state, v),
                state,
                steps: step,
            });
        }
        last_energy = energy;
    }
    Err(Error::Convergence {
        steps: max_steps,
        last_energy,
        last_delta: f64::NAN,
    })
}

/// Two-electron ground state of the physical Hamiltonian.
pub fn exact_ground_state(
    frame: &NuclearFrame,
    b: f64,
    grid: &Grid1D,
    dtau: f64,
    tol: f64,
    max_steps: usize,
) -> Result<ExactGroundState> {
    if !frame.active {
        return Err(Error::State(
            "ground-state preparation needs an active nuclear frame".into(),
        ));
    }
    exact_ground_state_with_potential(grid, &pair_potential(grid, frame, b), dtau, tol, max_steps)
}

/// Single-particle ground state by the same imaginary-time relaxer; the
/// separability oracle for b = 0 and the reference for released free flight.
pub fn ground_state_1d(
    grid: &Grid1D,
    potential: &PotentialGrid,
    dtau: f64,
    tol: f64,
    max_steps: usize,
) -> Result<(Wavefunction1D, f64)> {
    let width = 0.15 * (grid.x_max() - grid.x_min());
    let mut wave = grid::normalize(&Wavefunction1D::gaussian(grid, 0.0, width, 0.0))?;
    let kinetic = grid::kinetic_factors(grid, dtau, StepMode::ImaginaryTime);
    let mut scratch = Vec::new();
    let mut last_energy = f64::INFINITY;
    for _ in 1..=max_steps {
        let amps = wave.amplitudes.as_slice_mut().unwrap();
        // Replicate the split step but capture the pre-renormalization norm.
        let half = 0.5 * dtau;
        for (a, &v) in amps.iter_mut().zip(&potential.values) {
            *a *= (-v * half).exp();
        }
        grid.fft_forward(amps, &mut scratch);
        for (a, f) in amps.iter_mut().zip(&kinetic) {
            *a *= f;
        }
        grid.fft_inverse(amps, &mut scratch);
        for (a, &v) in amps.iter_mut().zip(&potential.values) {
            *a *= (-v * half).exp();
        }
        let norm = grid::normalize_slice(grid, amps)?;
        let energy = -norm.ln() / dtau;
        if (energy - last_energy).abs() < tol {
            let e = grid::single_particle_energy(&wave, potential)?;
            return Ok((wave, e));
        }
        last_energy = energy;
    }
    Err(Error::Convergence {
        steps: max_steps,
        last_energy,
        last_delta: f64::NAN,
    })
}

/// Options for [`exact_evolve`].
#[derive(Clone, Copy, Debug)]
pub struct EvolveOptions {
    pub t_final: f64,
    pub dt: f64,
    /// Time between stored snapshots; the initial state is always included.
    pub snapshot_stride: f64,
    /// Width of the edge band monitored for wraparound leakage.
    pub boundary_margin: f64,
    /// Probability mass in the edge band that triggers the leak check.
    pub leak_threshold: f64,
    /// Escalate a boundary leak from a warning to an error.
    pub strict_boundary: bool,
}

impl Default for EvolveOptions {
    fn default() -> Self {
        Self {
            t_final: 10.0,
            dt: 0.01,
            snapshot_stride: 0.5,
            boundary_margin: 5.0,
            leak_threshold: 1e-6,
            strict_boundary: false,
        }
    }
}

/// Probability mass within `margin` of any edge of the 2D box.
fn boundary_mass(state: &ExactState2D, margin: f64) -> f64 {
    let grid = &state.grid;
    let dx = grid.dx();
    let lo = grid.x_min() + margin;
    let hi = grid.x_max() - margin;
    let mut mass = 0.0;
    for (i, row) in state.psi.rows().into_iter().enumerate() {
        let x1 = grid.position(i);
        let row_edge = x1 < lo || x1 > hi;
        for (j, a) in row.iter().enumerate() {
            let x2 = grid.position(j);
            if row_edge || x2 < lo || x2 > hi {
                mass += a.norm_sqr();
            }
        }
    }
    mass * dx * dx
}

/// Real-time split-step evolution under the (possibly released) frame and
/// electron-electron strength `b`. Returns snapshots every
/// `snapshot_stride`, starting with the initial state.
pub fn exact_evolve(
    state: &ExactState2D,
    frame: &NuclearFrame,
    b: f64,
    opts: &EvolveOptions,
) -> Result<Vec<ExactState2D>> {
    if !(opts.dt > 0.0) || !(opts.t_final > 0.0) {
        return Err(Error::Parameter(format!(
            "t_final and dt must be positive, got {} and {}",
            opts.t_final, opts.dt
        )));
    }
    let n_steps = (opts.t_final / opts.dt).round() as usize;
    let stride_steps = (opts.snapshot_stride / opts.dt).round().max(1.0) as usize;
    let v = pair_potential(&state.grid, frame, b);
    let mut stepper = Stepper2D::new(&state.grid, &v, opts.dt, StepMode::RealTime);
    let mut current = state.clone();
    let mut snapshots = vec![current.clone()];
    for step in 1..=n_steps {
        stepper.step(&mut current.psi)?;
        current.time = state.time + step as f64 * opts.dt;
        if step % stride_steps == 0 || step == n_steps {
            let leak = boundary_mass(&current, opts.boundary_margin);
            if leak > opts.leak_threshold {
                if opts.strict_boundary {
                    return Err(Error::BoundaryLeak {
                        leak,
                        threshold: opts.leak_threshold,
                        time: current.time,
                    });
                }
                eprintln!(
                    "warning: boundary mass {leak:.3e} exceeds {:.1e} at t = {:.2} (grid too small?)",
                    opts.leak_threshold, current.time
                );
            }
            if !current.psi.iter().all(|a| a.re.is_finite() && a.im.is_finite()) {
                return Err(Error::Blowup(format!(
                    "two-body state became non-finite at t = {:.3}",
                    current.time
                )));
            }
            if step % stride_steps == 0 {
                snapshots.push(current.clone());
            }
        }
    }
    Ok(snapshots)
}

/// Reduced single-particle density matrix of electron 1 (Eq.: integrate the
/// partner coordinate out), normalized to unit trace.
pub fn reduced_density_matrix(state: &ExactState2D) -> Result<DensityMatrixCoord> {
    let grid = &state.grid;
    let dx = grid.dx();
    // rho = Psi Psi^H dx via four real products (Psi = A + iB).
    let a = state.psi.mapv(|v| v.re);
    let b = state.psi.mapv(|v| v.im);
    let at = a.t();
    let bt = b.t();
    let re = a.dot(&at) + b.dot(&bt);
    let im = b.dot(&at) - a.dot(&bt);
    let mut rho = ndarray::Zip::from(&re)
        .and(&im)
        .map_collect(|&r, &i| Complex64::new(r * dx, i * dx));
    let trace: f64 = rho.diag().iter().map(|v| v.re).sum::<f64>() * dx;
    if !(trace > 0.0) {
        return Err(Error::Degenerate("reduced density matrix has zero trace".into()));
    }
    let inv = 1.0 / trace;
    rho.mapv_inplace(|v| v * inv);
    DensityMatrixCoord::new(grid.clone(), rho, state.time)
}

/// Position density of one electron: `|Psi|^2` integrated over the partner.
pub fn marginal_density(state: &ExactState2D, electron: Electron) -> Vec<f64> {
    let grid = &state.grid;
    let n = grid.n_points();
    let dx = grid.dx();
    let mut out = vec![0.0; n];
    match electron {
        Electron::First => {
            for (i, row) in state.psi.rows().into_iter().enumerate() {
                out[i] = row.iter().map(|a| a.norm_sqr()).sum::<f64>() * dx;
            }
        }
        Electron::Second => {
            for row in state.psi.rows() {
                for (j, a) in row.iter().enumerate() {
                    out[j] += a.norm_sqr() * dx;
                }
            }
        }
    }
    out
}

/// An exact Bohmian trajectory in the two-electron configuration space.
#[derive(Clone, Debug)]
pub struct ConfigTrajectory {
    pub times: Vec<f64>,
    pub points: Vec<(f64, f64)>,
    /// Number of velocity evaluations that hit a node (or the speed cap)
    /// and were clamped.
    pub clamped_events: usize,
}

/// Bilinear interpolation on the 2D grid, clamped to the edge cells.
fn interp_bilinear(grid: &Grid1D, a: &Array2<Complex64>, x1: f64, x2: f64) -> Complex64 {
    let n = grid.n_points();
    let clamp = |x: f64| -> (usize, f64) {
        let t = (x - grid.x_min()) / grid.dx();
        if t <= 0.0 {
            (0, 0.0)
        } else if t >= (n - 1) as f64 {
            (n - 2, 1.0)
        } else {
            let j = t.floor() as usize;
            (j, t - j as f64)
        }
    };
    let (i, fi) = clamp(x1);
    let (j, fj) = clamp(x2);
    a[[i, j]] * ((1.0 - fi) * (1.0 - fj))
        + a[[i + 1, j]] * (fi * (1.0 - fj))
        + a[[i, j + 1]] * ((1.0 - fi) * fj)
        + a[[i + 1, j + 1]] * (fi * fj)
}

/// Velocity field of one snapshot: spectral gradients plus the peak density
/// used for node detection.
struct VelocityField {
    grid: Grid1D,
    psi: Array2<Complex64>,
    d1: Array2<Complex64>,
    d2: Array2<Complex64>,
    max_density: f64,
}

impl VelocityField {
    fn new(state: &ExactState2D) -> Self {
        let grid = state.grid.clone();
        let mut scratch = Vec::new();
        let ik = grid.ik_factors();

        // d/dx2: transform the contiguous rows.
        let mut d2 = state.psi.clone();
        for mut row in d2.rows_mut() {
            let row = row.as_slice_mut().unwrap();
            grid.fft_forward(row, &mut scratch);
            for (a, f) in row.iter_mut().zip(&ik) {
                *a *= f;
            }
            grid.fft_inverse(row, &mut scratch);
        }
        // d/dx1: same thing in the transposed orientation.
        let mut d1 = state.psi.clone();
        transpose_square(&mut d1);
        for mut row in d1.rows_mut() {
            let row = row.as_slice_mut().unwrap();
            grid.fft_forward(row, &mut scratch);
            for (a, f) in row.iter_mut().zip(&ik) {
                *a *= f;
            }
            grid.fft_inverse(row, &mut scratch);
        }
        transpose_square(&mut d1);

        let max_density = state.psi.iter().map(|a| a.norm_sqr()).fold(0.0, f64::max);
        Self {
            grid,
            psi: state.psi.clone(),
            d1,
            d2,
            max_density,
        }
    }

    /// `(v1, v2, clamped)` at a configuration point.
    fn velocity(&self, x1: f64, x2: f64, speed_cap: f64) -> (f64, f64, bool) {
        let psi = interp_bilinear(&self.grid, &self.psi, x1, x2);
        let density = psi.norm_sqr();
        if density < grid::NODE_DENSITY_THRESHOLD * self.max_density || density == 0.0 {
            return (0.0, 0.0, true);
        }
        let v1 = (interp_bilinear(&self.grid, &self.d1, x1, x2) / psi).im;
        let v2 = (interp_bilinear(&self.grid, &self.d2, x1, x2) / psi).im;
        let clamped = v1.abs() > speed_cap || v2.abs() > speed_cap;
        (
            v1.clamp(-speed_cap, speed_cap),
            v2.clamp(-speed_cap, speed_cap),
            clamped,
        )
    }
}

/// Integrate exact Bohmian trajectories through a snapshot series.
///
/// The velocity field is held at each snapshot over the following interval;
/// within an interval the points advance by midpoint (RK2) substeps. Node
/// encounters clamp the speed and are counted per trajectory.
pub fn exact_trajectories(
    series: &[ExactState2D],
    starts: &[(f64, f64)],
    substeps: usize,
    speed_cap: f64,
) -> Result<Vec<ConfigTrajectory>> {
    if series.len() < 2 {
        return Err(Error::Parameter(
            "trajectory integration needs at least two snapshots".into(),
        ));
    }
    let grid = &series[0].grid;
    let interior = |x: f64| x > grid.x_min() && x < grid.x_max() - grid.dx();
    for &(x1, x2) in starts {
        if !interior(x1) || !interior(x2) {
            return Err(Error::Parameter(format!(
                "trajectory start ({x1}, {x2}) lies outside the grid interior"
            )));
        }
    }
    let substeps = substeps.max(1);
    let mut trajectories: Vec<ConfigTrajectory> = starts
        .iter()
        .map(|&p| ConfigTrajectory {
            times: vec![series[0].time],
            points: vec![p],
            clamped_events: 0,
        })
        .collect();

    for w in series.windows(2) {
        let field = VelocityField::new(&w[0]);
        let dt_total = w[1].time - w[0].time;
        let h = dt_total / substeps as f64;
        for traj in &mut trajectories {
            let (mut x1, mut x2) = *traj.points.last().unwrap();
            for _ in 0..substeps {
                let (v1, v2, c1) = field.velocity(x1, x2, speed_cap);
                let (m1, m2, c2) =
                    field.velocity(x1 + 0.5 * h * v1, x2 + 0.5 * h * v2, speed_cap);
                x1 += h * m1;
                x2 += h * m2;
                traj.clamped_events += (c1 as usize) + (c2 as usize);
            }
            traj.times.push(w[1].time);
            traj.points.push((x1, x2));
        }
    }
    Ok(trajectories)
}
