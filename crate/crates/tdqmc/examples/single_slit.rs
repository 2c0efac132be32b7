//! Single-slit release: the atom's electrons diffract from one nucleus.
//!
//! Prepares the interacting ground state, switches the nuclear potential
//! off, and follows the free spreading of the ensemble alongside the exact
//! two-body solution. The printed trace shows how far the TDQMC marginal
//! drifts from the exact marginal over time -- the single-slit case is the
//! hard one, with no outer nuclei to pin the density.
//!
//! About half a minute at the reduced scale used here.

use anyhow::Result;
use tdqmc::analysis::{l1_deviation, mean_density_from_rows, stride_sample};
use tdqmc::config::parse_config;
use tdqmc::engine::{
    estimate_energy, evolve_real_time, init_ensemble, relax_ground_state, release,
    EvolveEnsembleOptions,
};
use tdqmc::exact::{exact_evolve, exact_ground_state, marginal_density, Electron, EvolveOptions};
use tdqmc::potentials::NuclearFrame;

fn main() -> Result<()> {
    let config = parse_config(
        r#"{
            "preset": "fig2-atom-single-slit",
            "m_walkers": 250,
            "grid": {"x_min": -60.0, "x_max": 60.0, "n": 512},
            "exact_n_points": 256,
            "relax_steps": 400
        }"#,
    )?;

    // TDQMC side: relax, release, evolve.
    let mut state = init_ensemble(&config)?;
    relax_ground_state(&mut state, config.relax_steps)?;
    let ground = estimate_energy(&state)?;
    println!("ground state at alpha = {}: E = {:+.6}", config.alpha, ground.total);

    release(&mut state)?;
    let snapshots = evolve_real_time(&mut state, &EvolveEnsembleOptions::from_config(&config))?;

    // Exact side: same preparation and release on the coarse two-body grid.
    let exact_grid = config.make_exact_grid()?;
    let gs = exact_ground_state(
        &config.frame(),
        config.b,
        &exact_grid,
        config.d_tau,
        config.exact_tol,
        20_000,
    )?;
    let mut released = gs.state.clone();
    released.time = 0.0;
    let free = NuclearFrame {
        active: false,
        ..config.frame()
    };
    let series = exact_evolve(
        &released,
        &free,
        config.b,
        &EvolveOptions {
            t_final: config.t_final,
            dt: config.dt_real,
            snapshot_stride: config.snapshot_stride,
            ..EvolveOptions::default()
        },
    )?;

    println!("\n   t      L1(TDQMC, exact)   max density");
    let stride = config.grid.n / config.exact_n_points;
    for (snap, exact) in snapshots.iter().zip(&series) {
        let marginal = marginal_density(exact, Electron::First);
        let l1 = l1_deviation(&stride_sample(&snap.densities[0], stride), &marginal, &exact_grid)?;
        let peak = snap.densities[0].iter().cloned().fold(0.0, f64::max);
        println!("  {:>5.2}  {l1:>16.4}  {peak:>12.4}", snap.time);
    }

    let final_density = mean_density_from_rows(state.grid(), state.wave_rows(0));
    let spread = width(state.grid().positions(), &final_density);
    println!("\nreleased packet width at t = {}: {spread:.2} (started near 1)", config.t_final);
    Ok(())
}

/// Root-mean-square spread of a density about its mean position.
fn width(xs: &[f64], density: &[f64]) -> f64 {
    let dx = xs[1] - xs[0];
    let norm: f64 = density.iter().sum::<f64>() * dx;
    let mean: f64 = xs.iter().zip(density).map(|(x, d)| x * d).sum::<f64>() * dx / norm;
    let var: f64 =
        xs.iter().zip(density).map(|(x, d)| (x - mean).powi(2) * d).sum::<f64>() * dx / norm;
    var.sqrt()
}
