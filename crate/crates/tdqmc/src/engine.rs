//! The Monte Carlo engine: ensembles of walkers, each guided by its own
//! single-particle wave.
//!
//! Every electron carries `M` walkers and `M` guide waves in 1:1
//! correspondence. Imaginary-time propagation relaxes the ensemble to the
//! interacting ground state; after a sudden release of the nuclear potential,
//! real-time propagation moves each walker with the de Broglie-Bohm velocity
//! of its own wave. All stochastic draws come from counter-based streams, so
//! runs with the same seed are reproducible bit for bit regardless of thread
//! count.

use ndarray::{Array2, ArrayView2};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::analysis::mean_density_from_rows;
use crate::config::ExperimentConfig;
use crate::error::{Error, Result};
use crate::grid::{
    self, bohm_velocity_precomputed, density_slice, energy_parts_slice,
    interp_density_with_slope, kinetic_factors, norm_sq_slice, sample_inverse_cdf,
    spectral_derivative_with_table, split_step_with_tables, Grid1D, StepMode, Wavefunction1D,
};
use crate::potentials::{
    effective_potential_batch, sigma_update, v_ee, v_en_grid, BatchPotentials, CouplingParams,
    NuclearFrame,
};
use crate::rng::{walker_stream, StreamPhase};

/// A two-electron walker/guide-wave ensemble.
///
/// Guide waves are stored per electron as an `M x n` matrix whose row `k`
/// is the wave of walker `k`. Rows are contiguous, so walker-level work
/// parallelizes over row chunks.
#[derive(Clone, Debug)]
pub struct EnsembleState {
    grid: Grid1D,
    m_walkers: usize,
    waves: Vec<Array2<Complex64>>,
    walkers: Vec<Vec<f64>>,
    sigmas: Vec<f64>,
    time: f64,
    coupling: CouplingParams,
    frame: NuclearFrame,
    seed: u64,
    d_tau: f64,
    relax_steps_done: u64,
    static_override: Option<Vec<f64>>,
}

impl EnsembleState {
    pub fn grid(&self) -> &Grid1D {
        &self.grid
    }

    pub fn n_electrons(&self) -> usize {
        self.waves.len()
    }

    pub fn m_walkers(&self) -> usize {
        self.m_walkers
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn coupling(&self) -> &CouplingParams {
        &self.coupling
    }

    pub fn frame(&self) -> &NuclearFrame {
        &self.frame
    }

    pub fn walkers(&self, electron: usize) -> &[f64] {
        &self.walkers[electron]
    }

    pub fn sigma(&self, electron: usize) -> f64 {
        self.sigmas[electron]
    }

    /// Imaginary-time steps taken so far.
    pub fn relax_steps_done(&self) -> u64 {
        self.relax_steps_done
    }

    /// All guide waves of one electron as an `M x n` view.
    pub fn wave_rows(&self, electron: usize) -> ArrayView2<'_, Complex64> {
        self.waves[electron].view()
    }

    /// A copy of one guide wave.
    pub fn wave(&self, electron: usize, walker: usize) -> Wavefunction1D {
        let row = self.waves[electron].row(walker).to_owned();
        Wavefunction1D::new(self.grid.clone(), row).expect("rows match the grid")
    }

    /// Replace the static one-body potential (normally the nuclear
    /// attraction) with explicit grid values. Intended for validation
    /// against solvable references such as the harmonic oscillator.
    pub fn override_static_potential(&mut self, values: Vec<f64>) -> Result<()> {
        if values.len() != self.grid.n_points() {
            return Err(Error::Shape(format!(
                "override length {} does not match grid size {}",
                values.len(),
                self.grid.n_points()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Blowup("override potential must be finite".into()));
        }
        self.static_override = Some(values);
        Ok(())
    }

    /// Static one-body potential sampled on the grid.
    fn static_potential_row(&self) -> Vec<f64> {
        match &self.static_override {
            Some(values) => values.clone(),
            None => v_en_grid(&self.frame, &self.grid).values,
        }
    }
}

/// Turn off the nuclear attraction and restart the clock: the sudden
/// release that begins every diffraction experiment. Walkers, waves, and
/// kernel widths are untouched.
pub fn release(state: &mut EnsembleState) -> Result<()> {
    if !state.frame.active {
        return Err(Error::State("the nuclear potential is already released".into()));
    }
    state.frame.active = false;
    state.time = 0.0;
    Ok(())
}

/// Build the initial ensemble: identical Gaussian guide waves and walkers
/// drawn from the shared single-particle density.
pub fn init_ensemble(config: &ExperimentConfig) -> Result<EnsembleState> {
    config.validate()?;
    let grid = config.make_grid()?;
    let coupling = config.coupling();
    let frame = config.frame();
    let m = config.m_walkers;
    let n = grid.n_points();
    let base = grid::normalize(&Wavefunction1D::gaussian(
        &grid,
        0.0,
        config.resolved_initial_width(),
        0.0,
    ))?;
    let base_density = grid::density(&base);
    let n_electrons = 2;
    let mut waves = Vec::with_capacity(n_electrons);
    let mut walkers = Vec::with_capacity(n_electrons);
    let mut sigmas = Vec::with_capacity(n_electrons);
    for electron in 0..n_electrons {
        let mut rows = Array2::<Complex64>::default((m, n));
        for mut row in rows.rows_mut() {
            row.assign(&base.amplitudes);
        }
        let mut positions = Vec::with_capacity(m);
        for k in 0..m {
            let u: f64 =
                walker_stream(config.seed, StreamPhase::Init, 0, electron, k).gen();
            positions.push(sample_inverse_cdf(&base_density, &grid, u)?);
        }
        sigmas.push(sigma_update(
            &positions,
            coupling.alpha,
            coupling.sigma_floor,
        )?);
        waves.push(rows);
        walkers.push(positions);
    }
    Ok(EnsembleState {
        grid,
        m_walkers: m,
        waves,
        walkers,
        sigmas,
        time: 0.0,
        coupling,
        frame,
        seed: config.seed,
        d_tau: config.d_tau,
        relax_steps_done: 0,
        static_override: None,
    })
}

/// Ensemble-averaged energy of the current state.
#[derive(Clone, Copy, Debug)]
pub struct EnergyEstimate {
    /// Mean total energy per two-electron configuration.
    pub total: f64,
    /// Guide-wave expectation of kinetic energy plus the static potential,
    /// summed over electrons and averaged over walkers.
    pub one_body: f64,
    /// Electron-electron repulsion evaluated at the walker pairs.
    pub interaction: f64,
    /// Standard error of `total` over the walker population.
    pub std_error: f64,
}

/// Energy estimator: one-body terms from each walker's guide wave, the
/// interaction from the walker positions themselves.
pub fn estimate_energy(state: &EnsembleState) -> Result<EnergyEstimate> {
    let grid = &state.grid;
    let n = grid.n_points();
    let m = state.m_walkers;
    let en_row = state.static_potential_row();
    let mut one_body = vec![0.0; m];
    for waves in &state.waves {
        let rows = waves.as_slice().expect("waves are contiguous");
        let per_walker: Vec<f64> = rows
            .par_chunks(n)
            .map_init(
                || (Vec::new(), Vec::new()),
                |(scratch, work), amps| {
                    let (kin, pot) = energy_parts_slice(grid, amps, &en_row, scratch, work);
                    kin + pot
                },
            )
            .collect();
        for (acc, e) in one_body.iter_mut().zip(&per_walker) {
            *acc += e;
        }
    }
    let mut totals = one_body.clone();
    let mut interaction = 0.0;
    for (k, total) in totals.iter_mut().enumerate() {
        let mut pair = 0.0;
        for i in 0..state.n_electrons() {
            for j in (i + 1)..state.n_electrons() {
                pair += v_ee(state.walkers[i][k] - state.walkers[j][k], state.coupling.b);
            }
        }
        interaction += pair;
        *total += pair;
    }
    let mf = m as f64;
    let total = totals.iter().sum::<f64>() / mf;
    if !total.is_finite() {
        return Err(Error::Blowup(format!("energy estimate is {total}")));
    }
    let variance = totals.iter().map(|&t| (t - total).powi(2)).sum::<f64>() / mf;
    Ok(EnergyEstimate {
        total,
        one_body: one_body.iter().sum::<f64>() / mf,
        interaction: interaction / mf,
        std_error: (variance / mf).sqrt(),
    })
}

/// Per-thread buffers reused across walkers within a propagation step.
struct StepBuffers {
    potential: Vec<f64>,
    density: Vec<f64>,
    derivative: Vec<Complex64>,
    scratch: Vec<Complex64>,
}

impl StepBuffers {
    fn new(n: usize) -> Self {
        Self {
            potential: vec![0.0; n],
            density: vec![0.0; n],
            derivative: vec![Complex64::default(); n],
            scratch: Vec::new(),
        }
    }
}

/// Effective potentials exerted on electron `i` by every other electron,
/// computed from walker positions frozen at the start of the step.
fn partner_batches(
    state: &EnsembleState,
    frozen: &[Vec<f64>],
    sigmas: &[f64],
    i: usize,
) -> Result<Vec<BatchPotentials>> {
    (0..state.n_electrons())
        .filter(|&j| j != i)
        .map(|j| {
            effective_potential_batch(
                &state.grid,
                &frozen[j],
                sigmas[j],
                state.coupling.b,
                state.coupling.mode,
                state.coupling.weight_cutoff,
            )
        })
        .collect()
}

fn fill_potential_row(out: &mut [f64], en_row: &[f64], batches: &[BatchPotentials], k: usize) {
    out.copy_from_slice(en_row);
    for batch in batches {
        for (o, &v) in out.iter_mut().zip(batch.row(k)) {
            *o += v;
        }
    }
}

/// One drift-diffusion move of a walker in its own wave's density.
///
/// The proposal is the imaginary-time Langevin step: a quantum drift
/// `d_tau * Re[psi'/psi] = d_tau * rho'/(2 rho)` (displacement capped at
/// three diffusion lengths so density tails cannot fling walkers) plus a
/// Gaussian kick of variance `d_tau`. A Metropolis-Hastings correction
/// against the piecewise-linear interpolant of `rho` makes that interpolant
/// the walker's exact stationary law, so equilibrated walkers sample
/// `|psi|^2` regardless of step-size bias. Proposals outside the grid or
/// onto zero density are rejected; the walker then keeps its position.
fn drift_diffusion_move(
    grid: &Grid1D,
    density: &[f64],
    x0: f64,
    d_tau: f64,
    rng: &mut impl Rng,
) -> f64 {
    let sigma = d_tau.sqrt();
    let cap = 3.0 * sigma;
    let displacement = |rho: f64, slope: f64| {
        if rho > 0.0 {
            (d_tau * slope / (2.0 * rho)).clamp(-cap, cap)
        } else {
            0.0
        }
    };
    let (rho0, slope0) = interp_density_with_slope(grid, density, x0);
    let d0 = displacement(rho0, slope0);
    let xi: f64 = rng.sample(StandardNormal);
    let u: f64 = rng.gen();
    let x1 = x0 + d0 + sigma * xi;
    let (rho1, slope1) = interp_density_with_slope(grid, density, x1);
    if rho1 <= 0.0 {
        return x0;
    }
    if rho0 <= 0.0 {
        // The wave moved out from under the walker; take any live proposal.
        return x1;
    }
    let d1 = displacement(rho1, slope1);
    let forward = (x1 - x0 - d0).powi(2);
    let reverse = (x0 - x1 - d1).powi(2);
    let log_accept = rho1.ln() - rho0.ln() + (forward - reverse) / (2.0 * d_tau);
    if u.ln() < log_accept {
        x1
    } else {
        x0
    }
}

/// Imaginary-time relaxation toward the interacting ground state.
///
/// Each step freezes the walker positions, propagates every guide wave one
/// step in its own effective potential, moves each walker by one
/// drift-diffusion step in its wave's updated density, and finally updates
/// the kernel widths. Walkers are persistent Markov chains rather than
/// fresh draws: their positions carry over between steps, which is what
/// lets each guide wave keep reacting to a slowly-moving partner
/// configuration instead of its time average. Returns the energy trace,
/// sampled every ten steps and at the final step.
pub fn relax_ground_state(
    state: &mut EnsembleState,
    n_steps: usize,
) -> Result<Vec<(u64, EnergyEstimate)>> {
    if !state.frame.active {
        return Err(Error::State(
            "cannot relax a released ensemble; the ground state needs the nuclear potential".into(),
        ));
    }
    let grid = state.grid.clone();
    let n = grid.n_points();
    let kinetic = kinetic_factors(&grid, state.d_tau, StepMode::ImaginaryTime);
    let en_row = state.static_potential_row();
    let seed = state.seed;
    let d_tau = state.d_tau;
    let mut trace = Vec::new();
    for remaining in (1..=n_steps).rev() {
        let step_index = state.relax_steps_done + 1;
        let frozen = state.walkers.clone();
        let sigmas = state.sigmas.clone();
        for i in 0..state.n_electrons() {
            let batches = partner_batches(state, &frozen, &sigmas, i)?;
            let rows = state.waves[i].as_slice_mut().expect("waves are contiguous");
            let moved: Vec<f64> = rows
                .par_chunks_mut(n)
                .zip(frozen[i].par_iter())
                .enumerate()
                .map_init(
                    || StepBuffers::new(n),
                    |buf, (k, (amps, &x0))| -> Result<f64> {
                        fill_potential_row(&mut buf.potential, &en_row, &batches, k);
                        split_step_with_tables(
                            &grid,
                            amps,
                            &buf.potential,
                            d_tau,
                            StepMode::ImaginaryTime,
                            &kinetic,
                            &mut buf.scratch,
                        )?;
                        density_slice(amps, &mut buf.density);
                        let mut rng =
                            walker_stream(seed, StreamPhase::Relax, step_index, i, k);
                        let x1 = drift_diffusion_move(&grid, &buf.density, x0, d_tau, &mut rng);
                        if !x1.is_finite() {
                            return Err(Error::Blowup(format!(
                                "walker {k} of electron {i} moved to {x1}"
                            )));
                        }
                        Ok(x1)
                    },
                )
                .collect::<Result<_>>()?;
            state.walkers[i] = moved;
        }
        for i in 0..state.n_electrons() {
            state.sigmas[i] = sigma_update(
                &state.walkers[i],
                state.coupling.alpha,
                state.coupling.sigma_floor,
            )?;
        }
        state.relax_steps_done = step_index;
        if step_index.is_multiple_of(10) || remaining == 1 {
            trace.push((step_index, estimate_energy(state)?));
        }
    }
    Ok(trace)
}

/// Ground-state energy as a function of the kernel width multiplier.
///
/// Each alpha value gets a fresh ensemble built from the same seed, relaxed
/// for `config.relax_steps` imaginary-time steps. The reported energy
/// averages the second half of the energy trace, which shrinks walker noise
/// enough to resolve the shallow minimum of the curve; `std_error` is the
/// standard error of that tail mean (correlated entries, so read it as a
/// scale, not a rigorous bar).
pub fn scan_alpha(
    config: &ExperimentConfig,
    alphas: &[f64],
) -> Result<Vec<(f64, EnergyEstimate)>> {
    if alphas.is_empty() {
        return Err(Error::Parameter("alpha scan needs at least one value".into()));
    }
    let mut results = Vec::with_capacity(alphas.len());
    for &alpha in alphas {
        let mut scan_config = config.clone();
        scan_config.alpha = alpha;
        let mut state = init_ensemble(&scan_config)?;
        let trace = relax_ground_state(&mut state, scan_config.relax_steps)?;
        let half = scan_config.relax_steps as u64 / 2;
        let tail: Vec<&EnergyEstimate> = trace
            .iter()
            .filter(|(step, _)| *step > half)
            .map(|(_, e)| e)
            .collect();
        let count = tail.len().max(1) as f64;
        let total = tail.iter().map(|e| e.total).sum::<f64>() / count;
        let variance =
            tail.iter().map(|e| (e.total - total).powi(2)).sum::<f64>() / count;
        results.push((
            alpha,
            EnergyEstimate {
                total,
                one_body: tail.iter().map(|e| e.one_body).sum::<f64>() / count,
                interaction: tail.iter().map(|e| e.interaction).sum::<f64>() / count,
                std_error: (variance / count).sqrt(),
            },
        ));
    }
    Ok(results)
}

/// Real-time propagation parameters.
#[derive(Clone, Copy, Debug)]
pub struct EvolveEnsembleOptions {
    pub t_final: f64,
    pub dt: f64,
    /// Time between snapshots; the initial state is always included and the
    /// final step always produces one.
    pub snapshot_stride: f64,
    /// Keep a copy of every guide wave in each snapshot. Costly at large
    /// `M`; prefer the observer callback for streaming analyses.
    pub store_waves: bool,
}

impl Default for EvolveEnsembleOptions {
    fn default() -> Self {
        Self {
            t_final: 10.0,
            dt: 0.01,
            snapshot_stride: 0.5,
            store_waves: false,
        }
    }
}

impl EvolveEnsembleOptions {
    /// Standard options for a configured experiment.
    pub fn from_config(config: &ExperimentConfig) -> Self {
        Self {
            t_final: config.t_final,
            dt: config.dt_real,
            snapshot_stride: config.snapshot_stride,
            store_waves: false,
        }
    }
}

/// State summary captured during real-time propagation.
#[derive(Clone, Debug)]
pub struct EnsembleSnapshot {
    pub time: f64,
    pub step: u64,
    pub walkers: Vec<Vec<f64>>,
    pub sigmas: Vec<f64>,
    /// Ensemble-mean single-particle density per electron.
    pub densities: Vec<Vec<f64>>,
    /// Largest `|norm - 1|` over all guide waves.
    pub max_norm_error: f64,
    /// Velocity evaluations clamped so far (nodes, speed cap, or the grid
    /// boundary).
    pub clamped_events: u64,
    pub waves: Option<Vec<Array2<Complex64>>>,
}

fn take_snapshot(
    state: &EnsembleState,
    step: u64,
    clamped_events: u64,
    store_waves: bool,
) -> Result<EnsembleSnapshot> {
    let n = state.grid.n_points();
    let mut densities = Vec::with_capacity(state.n_electrons());
    let mut max_norm_error: f64 = 0.0;
    for waves in &state.waves {
        densities.push(mean_density_from_rows(&state.grid, waves.view()));
        let rows = waves.as_slice().expect("waves are contiguous");
        for amps in rows.chunks(n) {
            let err = (norm_sq_slice(&state.grid, amps).sqrt() - 1.0).abs();
            max_norm_error = max_norm_error.max(err);
        }
    }
    if !max_norm_error.is_finite() || max_norm_error > 1e-2 {
        return Err(Error::Blowup(format!(
            "guide-wave norm drifted by {max_norm_error:e} at t = {}",
            state.time
        )));
    }
    Ok(EnsembleSnapshot {
        time: state.time,
        step,
        walkers: state.walkers.clone(),
        sigmas: state.sigmas.clone(),
        densities,
        max_norm_error,
        clamped_events,
        waves: store_waves.then(|| state.waves.clone()),
    })
}

/// Real-time propagation with snapshots only.
pub fn evolve_real_time(
    state: &mut EnsembleState,
    options: &EvolveEnsembleOptions,
) -> Result<Vec<EnsembleSnapshot>> {
    evolve_observed(state, options, |_, _| Ok(()))
}

/// Real-time propagation of waves and walkers.
///
/// Each step freezes walker positions, advances every guide wave one
/// split-operator step in its effective potential, then advects its walker
/// with a midpoint (RK2) step of the de Broglie-Bohm velocity evaluated in
/// the end-of-step wave. Speeds are capped at one grid cell per step. The
/// observer runs at every snapshot, so analyses can stream without storing
/// waves.
pub fn evolve_observed(
    state: &mut EnsembleState,
    options: &EvolveEnsembleOptions,
    mut observe: impl FnMut(&EnsembleState, &EnsembleSnapshot) -> Result<()>,
) -> Result<Vec<EnsembleSnapshot>> {
    let dt = options.dt;
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::Parameter(format!("dt must be positive, got {dt}")));
    }
    if !(options.t_final > 0.0) || !(options.snapshot_stride > 0.0) {
        return Err(Error::Parameter(format!(
            "t_final and snapshot_stride must be positive, got {} and {}",
            options.t_final, options.snapshot_stride
        )));
    }
    let n_steps = (options.t_final / dt).round().max(1.0) as u64;
    let stride_steps = ((options.snapshot_stride / dt).round() as u64).max(1);
    let grid = state.grid.clone();
    let n = grid.n_points();
    let kinetic = kinetic_factors(&grid, dt, StepMode::RealTime);
    let ik = grid.ik_factors();
    let en_row = state.static_potential_row();
    let speed_cap = grid.dx() / dt;
    let t_start = state.time;
    let mut clamped_events: u64 = 0;
    let mut snapshots = Vec::with_capacity(n_steps as usize / stride_steps as usize + 2);
    let first = take_snapshot(state, 0, 0, options.store_waves)?;
    observe(state, &first)?;
    snapshots.push(first);
    for step in 1..=n_steps {
        let frozen = state.walkers.clone();
        let sigmas = state.sigmas.clone();
        for i in 0..state.n_electrons() {
            let batches = partner_batches(state, &frozen, &sigmas, i)?;
            let rows = state.waves[i].as_slice_mut().expect("waves are contiguous");
            let moved: Vec<(f64, u64)> = rows
                .par_chunks_mut(n)
                .zip(frozen[i].par_iter())
                .enumerate()
                .map_init(
                    || StepBuffers::new(n),
                    |buf, (k, (amps, &x0))| -> Result<(f64, u64)> {
                        fill_potential_row(&mut buf.potential, &en_row, &batches, k);
                        split_step_with_tables(
                            &grid,
                            amps,
                            &buf.potential,
                            dt,
                            StepMode::RealTime,
                            &kinetic,
                            &mut buf.scratch,
                        )?;
                        spectral_derivative_with_table(
                            &grid,
                            amps,
                            &mut buf.derivative,
                            &ik,
                            &mut buf.scratch,
                        );
                        let max_density =
                            amps.iter().map(|a| a.norm_sqr()).fold(0.0, f64::max);
                        let v1 = bohm_velocity_precomputed(
                            &grid,
                            amps,
                            &buf.derivative,
                            max_density,
                            x0,
                            speed_cap,
                        );
                        let mid = x0 + 0.5 * dt * v1.velocity;
                        let v2 = bohm_velocity_precomputed(
                            &grid,
                            amps,
                            &buf.derivative,
                            max_density,
                            mid,
                            speed_cap,
                        );
                        let raw = x0 + dt * v2.velocity;
                        if !raw.is_finite() {
                            return Err(Error::Blowup(format!(
                                "walker {k} of electron {i} moved to {raw}"
                            )));
                        }
                        let x1 = raw.clamp(grid.x_min(), grid.x_max() - grid.dx());
                        let clamps =
                            v1.clamped as u64 + v2.clamped as u64 + (x1 != raw) as u64;
                        Ok((x1, clamps))
                    },
                )
                .collect::<Result<_>>()?;
            let mut positions = Vec::with_capacity(state.m_walkers);
            for (x, c) in moved {
                positions.push(x);
                clamped_events += c;
            }
            state.walkers[i] = positions;
        }
        for i in 0..state.n_electrons() {
            state.sigmas[i] = sigma_update(
                &state.walkers[i],
                state.coupling.alpha,
                state.coupling.sigma_floor,
            )?;
        }
        state.time = t_start + step as f64 * dt;
        if step % stride_steps == 0 || step == n_steps {
            let snap = take_snapshot(state, step, clamped_events, options.store_waves)?;
            observe(state, &snap)?;
            snapshots.push(snap);
        }
    }
    let evaluations = 2 * state.n_electrons() as u64 * state.m_walkers as u64 * n_steps;
    if clamped_events * 100 > evaluations {
        eprintln!(
            "warning: {clamped_events} of {evaluations} velocity evaluations were clamped; \
             walker trajectories near nodes may be inaccurate"
        );
    }
    Ok(snapshots)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{parse_config, ExperimentConfig};
    use crate::exact::ground_state_1d;
    use crate::potentials::CouplingMode;

    /// Small, fast baseline configuration for engine tests.
    fn test_config() -> ExperimentConfig {
        parse_config(
            r#"{
                "preset": "fig1-atom",
                "m_walkers": 16,
                "grid": {"x_min": -30.0, "x_max": 30.0, "n": 256},
                "relax_steps": 30,
                "run_exact": false
            }"#,
        )
        .unwrap()
    }

    fn max_wave_difference(a: &EnsembleState, b: &EnsembleState) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..a.n_electrons() {
            for (x, y) in a.waves[i].iter().zip(b.waves[i].iter()) {
                worst = worst.max((x - y).norm());
            }
        }
        worst
    }

    #[test]
    fn init_is_deterministic_and_normalized() {
        let config = test_config();
        let a = init_ensemble(&config).unwrap();
        let b = init_ensemble(&config).unwrap();
        assert_eq!(a.walkers, b.walkers);
        assert_eq!(a.sigmas, b.sigmas);
        assert_eq!(max_wave_difference(&a, &b), 0.0);
        let n = a.grid.n_points();
        for i in 0..2 {
            for amps in a.waves[i].as_slice().unwrap().chunks(n) {
                assert!((norm_sq_slice(&a.grid, amps) - 1.0).abs() < 1e-12);
            }
            assert!(a.sigma(i) > 0.0);
        }
        let mut other_seed = config;
        other_seed.seed = 43;
        let c = init_ensemble(&other_seed).unwrap();
        assert_ne!(a.walkers, c.walkers);
    }

    #[test]
    fn init_walkers_sample_the_initial_density() {
        let mut config = test_config();
        config.m_walkers = 1000;
        let state = init_ensemble(&config).unwrap();
        // Width-1 Gaussian density: compare against the normal CDF.
        let normal_cdf = |x: f64| 0.5 * libm::erfc(-x / std::f64::consts::SQRT_2);
        for i in 0..2 {
            let mut xs = state.walkers(i).to_vec();
            xs.sort_by(f64::total_cmp);
            let m = xs.len() as f64;
            let mut ks: f64 = 0.0;
            for (idx, &x) in xs.iter().enumerate() {
                let f = normal_cdf(x);
                ks = ks
                    .max((f - idx as f64 / m).abs())
                    .max(((idx + 1) as f64 / m - f).abs());
            }
            assert!(ks < 1.63 / m.sqrt(), "electron {i}: KS = {ks}");
        }
    }

    #[test]
    fn uncoupled_relaxation_matches_the_single_particle_ground_state() {
        let mut config = test_config();
        config.b = 0.0;
        config.m_walkers = 8;
        config.relax_steps = 600;
        let mut state = init_ensemble(&config).unwrap();
        let trace = relax_ground_state(&mut state, config.relax_steps).unwrap();
        assert_eq!(trace.last().unwrap().0, 600);

        let grid = state.grid().clone();
        let v = v_en_grid(state.frame(), &grid);
        let (reference, e1) = ground_state_1d(&grid, &v, config.d_tau, 1e-12, 20_000).unwrap();

        // With b = 0 every wave sees the same potential, so rows never split.
        let n = grid.n_points();
        let rows = state.waves[0].as_slice().unwrap();
        let first = &rows[..n];
        for amps in rows.chunks(n).skip(1) {
            let worst = first
                .iter()
                .zip(amps)
                .map(|(a, b)| (a - b).norm())
                .fold(0.0, f64::max);
            assert!(worst < 1e-12, "rows split by {worst}");
        }

        let wave = state.wave(0, 0);
        let mine = grid::density(&wave);
        let theirs = grid::density(&reference);
        let l1 = crate::analysis::l1_deviation(&mine, &theirs, &grid).unwrap();
        assert!(l1 < 1e-3, "L1 deviation from 1D ground state: {l1}");

        let energy = estimate_energy(&state).unwrap();
        assert!(
            (energy.total - 2.0 * e1).abs() < 1e-6,
            "total {} vs doubled one-body reference {}",
            energy.total,
            2.0 * e1
        );
        assert_eq!(energy.interaction, 0.0);
    }

    #[test]
    fn harmonic_override_relaxes_to_unit_total_energy() {
        let mut config = test_config();
        config.b = 0.0;
        config.m_walkers = 4;
        let mut state = init_ensemble(&config).unwrap();
        let half_x_sq: Vec<f64> = state.grid().positions().iter().map(|&x| 0.5 * x * x).collect();
        state.override_static_potential(half_x_sq).unwrap();
        relax_ground_state(&mut state, 600).unwrap();
        let energy = estimate_energy(&state).unwrap();
        // Two uncoupled oscillators at hbar*omega/2 each.
        assert!(
            (energy.total - 1.0).abs() < 1e-4,
            "total = {}",
            energy.total
        );
        assert!(energy.std_error < 1e-10);
    }

    #[test]
    fn coupled_relaxation_is_deterministic() {
        let config = test_config();
        let mut a = init_ensemble(&config).unwrap();
        let mut b = init_ensemble(&config).unwrap();
        let trace_a = relax_ground_state(&mut a, 30).unwrap();
        let trace_b = relax_ground_state(&mut b, 30).unwrap();
        assert_eq!(a.walkers, b.walkers);
        assert_eq!(a.sigmas, b.sigmas);
        assert_eq!(max_wave_difference(&a, &b), 0.0);
        assert_eq!(trace_a.last().unwrap().1.total, trace_b.last().unwrap().1.total);
    }

    #[test]
    fn mean_field_waves_never_split() {
        let mut config = test_config();
        config.mode = CouplingMode::MeanField;
        let mut state = init_ensemble(&config).unwrap();
        relax_ground_state(&mut state, 50).unwrap();
        let n = state.grid().n_points();
        for i in 0..2 {
            let rows = state.waves[i].as_slice().unwrap();
            let first = &rows[..n];
            for amps in rows.chunks(n).skip(1) {
                let worst = first
                    .iter()
                    .zip(amps)
                    .map(|(a, b)| (a - b).norm())
                    .fold(0.0, f64::max);
                assert!(worst < 1e-10, "mean-field rows split by {worst}");
            }
        }
        // The walkers themselves still differ: only the waves collapse.
        let w = state.walkers(0);
        assert!(w.iter().any(|&x| (x - w[0]).abs() > 1e-6));
    }

    #[test]
    fn optimized_relaxation_splits_the_waves() {
        let config = test_config();
        let mut state = init_ensemble(&config).unwrap();
        relax_ground_state(&mut state, 50).unwrap();
        let n = state.grid().n_points();
        let rows = state.waves[0].as_slice().unwrap();
        let first = &rows[..n];
        let worst = rows
            .chunks(n)
            .skip(1)
            .flat_map(|amps| first.iter().zip(amps).map(|(a, b)| (a - b).norm()))
            .fold(0.0, f64::max);
        assert!(worst > 1e-6, "finite-kernel waves stayed identical");
    }

    fn permute_state(state: &EnsembleState, perm: &[usize]) -> EnsembleState {
        let mut out = state.clone();
        for i in 0..state.n_electrons() {
            for (dst, &src) in perm.iter().enumerate() {
                out.walkers[i][dst] = state.walkers[i][src];
                out.waves[i].row_mut(dst).assign(&state.waves[i].row(src));
            }
        }
        out
    }

    #[test]
    fn real_time_step_commutes_with_walker_relabeling() {
        for mode in [
            CouplingMode::Optimized,
            CouplingMode::UltraCorrelated,
            CouplingMode::MeanField,
        ] {
            let mut config = test_config();
            config.mode = mode;
            config.m_walkers = 12;
            let mut state = init_ensemble(&config).unwrap();
            relax_ground_state(&mut state, 20).unwrap();
            release(&mut state).unwrap();

            // Permuting walker labels (waves and positions together, both
            // electrons alike) must commute with a deterministic step.
            let perm: Vec<usize> = (0..12).map(|k| (k * 7 + 3) % 12).collect();
            let mut inverse = vec![0usize; 12];
            for (dst, &src) in perm.iter().enumerate() {
                inverse[src] = dst;
            }
            let mut permuted = permute_state(&state, &perm);

            let options = EvolveEnsembleOptions {
                t_final: 0.01,
                dt: 0.01,
                snapshot_stride: 0.01,
                store_waves: false,
            };
            evolve_real_time(&mut state, &options).unwrap();
            evolve_real_time(&mut permuted, &options).unwrap();
            let restored = permute_state(&permuted, &inverse);

            let wave_diff = max_wave_difference(&state, &restored);
            assert!(wave_diff < 1e-12, "{mode:?}: waves differ by {wave_diff}");
            for i in 0..2 {
                for (a, b) in state.walkers[i].iter().zip(&restored.walkers[i]) {
                    assert!((a - b).abs() < 1e-12, "{mode:?}: walkers differ");
                }
            }
        }
    }

    #[test]
    fn release_resets_the_clock_and_refuses_repeats() {
        let config = test_config();
        let mut state = init_ensemble(&config).unwrap();
        relax_ground_state(&mut state, 20).unwrap();
        let waves_before = state.waves.clone();
        let walkers_before = state.walkers.clone();

        release(&mut state).unwrap();
        assert_eq!(state.time(), 0.0);
        assert!(!state.frame().active);
        assert_eq!(state.walkers, walkers_before);
        for (wave, before) in state.waves.iter().zip(&waves_before) {
            assert_eq!(wave, before);
        }
        assert!(matches!(release(&mut state), Err(Error::State(_))));
        assert!(matches!(
            relax_ground_state(&mut state, 1),
            Err(Error::State(_))
        ));
    }

    #[test]
    fn released_packet_spreads() {
        let mut config = test_config();
        config.b = 0.0;
        config.m_walkers = 8;
        let mut state = init_ensemble(&config).unwrap();
        relax_ground_state(&mut state, 300).unwrap();
        release(&mut state).unwrap();
        let options = EvolveEnsembleOptions {
            t_final: 2.0,
            dt: 0.01,
            snapshot_stride: 1.0,
            store_waves: false,
        };
        let snaps = evolve_real_time(&mut state, &options).unwrap();
        assert_eq!(snaps.len(), 3);
        let width = |density: &[f64]| {
            let grid = state.grid();
            let mean: f64 = density
                .iter()
                .zip(grid.positions())
                .map(|(&p, &x)| p * x)
                .sum::<f64>()
                * grid.dx();
            let var: f64 = density
                .iter()
                .zip(grid.positions())
                .map(|(&p, &x)| p * (x - mean).powi(2))
                .sum::<f64>()
                * grid.dx();
            var.sqrt()
        };
        let w0 = width(&snaps[0].densities[0]);
        let w2 = width(&snaps[2].densities[0]);
        assert!(
            w2 > 1.5 * w0,
            "released density did not spread: {w0} -> {w2}"
        );
        assert!(snaps[2].max_norm_error < 1e-9);
        assert!((state.time() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn evolution_is_deterministic_and_observer_sees_every_snapshot() {
        let config = test_config();
        let mut a = init_ensemble(&config).unwrap();
        relax_ground_state(&mut a, 20).unwrap();
        release(&mut a).unwrap();
        let mut b = a.clone();

        let options = EvolveEnsembleOptions {
            t_final: 0.5,
            dt: 0.01,
            snapshot_stride: 0.1,
            store_waves: false,
        };
        let mut seen = Vec::new();
        let snaps_a = evolve_observed(&mut a, &options, |_, snap| {
            seen.push(snap.time);
            Ok(())
        })
        .unwrap();
        let snaps_b = evolve_real_time(&mut b, &options).unwrap();

        assert_eq!(snaps_a.len(), 6);
        assert_eq!(seen.len(), snaps_a.len());
        for (s, t) in snaps_a.iter().zip(&seen) {
            assert_eq!(s.time, *t);
        }
        assert_eq!(a.walkers, b.walkers);
        assert_eq!(max_wave_difference(&a, &b), 0.0);
        for (sa, sb) in snaps_a.iter().zip(&snaps_b) {
            assert_eq!(sa.walkers, sb.walkers);
            assert_eq!(sa.clamped_events, sb.clamped_events);
        }
    }

    #[test]
    fn persistent_walkers_sample_their_wave_density() {
        // With b = 0 every wave relaxes to the same single-particle ground
        // state and the walkers are independent drift-diffusion chains
        // targeting it, so a one-sample KS test against the wave's own
        // density is exact. Equilibration (~40 steps) is long past.
        let mut config = test_config();
        config.b = 0.0;
        config.m_walkers = 200;
        let mut state = init_ensemble(&config).unwrap();
        relax_ground_state(&mut state, 600).unwrap();

        let grid = state.grid().clone();
        let rho = grid::density(&state.wave(0, 0));
        // CDF of the piecewise-linear density the walkers target.
        let mut cdf = vec![0.0; rho.len()];
        for j in 1..rho.len() {
            cdf[j] = cdf[j - 1] + 0.5 * (rho[j - 1] + rho[j]) * grid.dx();
        }
        let total = *cdf.last().unwrap();
        let cdf_at = |x: f64| {
            let t = ((x - grid.x_min()) / grid.dx()).clamp(0.0, (rho.len() - 1) as f64);
            let j = (t.floor() as usize).min(rho.len() - 2);
            let frac = t - j as f64;
            (cdf[j] * (1.0 - frac) + cdf[j + 1] * frac) / total
        };
        for i in 0..2 {
            let mut xs = state.walkers(i).to_vec();
            xs.sort_by(f64::total_cmp);
            let m = xs.len() as f64;
            let mut ks: f64 = 0.0;
            for (idx, &x) in xs.iter().enumerate() {
                let f = cdf_at(x);
                ks = ks
                    .max((f - idx as f64 / m).abs())
                    .max(((idx + 1) as f64 / m - f).abs());
            }
            assert!(ks < 1.63 / m.sqrt(), "electron {i}: KS = {ks}");
        }
    }

    #[test]
    fn relaxed_electrons_share_one_density() {
        // The electrons must be statistically exchangeable: their walker
        // densities agree within Monte Carlo error, L1 < 3/sqrt(M). A
        // single-snapshot kernel density estimate has sampling noise of the
        // same order as that bound, and persistent walkers decorrelate only
        // over tens of steps, so the comparison pools walkers from eight
        // snapshots spaced 25 steps apart.
        let mut config = test_config();
        config.m_walkers = 200;
        let mut state = init_ensemble(&config).unwrap();
        relax_ground_state(&mut state, 100).unwrap();
        let mut pooled: [Vec<f64>; 2] = [Vec::new(), Vec::new()];
        for _ in 0..8 {
            relax_ground_state(&mut state, 25).unwrap();
            for (i, pool) in pooled.iter_mut().enumerate() {
                pool.extend_from_slice(state.walkers(i));
            }
        }
        let grid = state.grid();
        let p0 = crate::analysis::kde_density(&pooled[0], grid).unwrap();
        let p1 = crate::analysis::kde_density(&pooled[1], grid).unwrap();
        let l1 = crate::analysis::l1_deviation(&p0, &p1, grid).unwrap();
        let bound = 3.0 / (config.m_walkers as f64).sqrt();
        assert!(l1 < bound, "exchange asymmetry {l1} exceeds {bound}");
    }

    #[test]
    fn scan_alpha_returns_one_energy_per_value() {
        let mut config = test_config();
        config.m_walkers = 8;
        config.relax_steps = 40;
        let results = scan_alpha(&config, &[0.4, 0.8]).unwrap();
        assert_eq!(results.len(), 2);
        assert_eq!(results[0].0, 0.4);
        assert_eq!(results[1].0, 0.8);
        for (_, e) in &results {
            assert!(e.total.is_finite());
            assert!(e.total < 0.0, "bound state should have negative energy");
        }
        assert!(scan_alpha(&config, &[]).is_err());
    }

    #[test]
    fn override_rejects_bad_shapes_and_values() {
        let config = test_config();
        let mut state = init_ensemble(&config).unwrap();
        assert!(state.override_static_potential(vec![0.0; 7]).is_err());
        assert!(state
            .override_static_potential(vec![f64::NAN; state.grid().n_points()])
            .is_err());
    }
}
