//! Ground-state preparation for the two-electron soft-core atom.
//!
//! Relaxes a walker ensemble in imaginary time at kernel width alpha = 0.6,
//! prints the energy trace, and compares the converged energy and density
//! against the exact two-body solver on the same physics.
//!
//! Runs at a reduced ensemble size (M = 250, 512-point grid) in roughly
//! fifteen seconds; bump `m_walkers` toward 1000 for production accuracy.

use anyhow::Result;
use tdqmc::analysis::{l1_deviation, stride_sample};
use tdqmc::config::parse_config;
use tdqmc::engine::{estimate_energy, init_ensemble, relax_ground_state};
use tdqmc::exact::{exact_ground_state, marginal_density, Electron};

fn main() -> Result<()> {
    let config = parse_config(
        r#"{
            "preset": "fig1-atom",
            "m_walkers": 250,
            "grid": {"x_min": -60.0, "x_max": 60.0, "n": 512},
            "exact_n_points": 256,
            "relax_steps": 400
        }"#,
    )?;

    let mut state = init_ensemble(&config)?;
    println!("relaxing {} walkers per electron, d_tau = {}", config.m_walkers, config.d_tau);
    let trace = relax_ground_state(&mut state, config.relax_steps)?;
    for (step, energy) in trace.iter().filter(|(s, _)| s % 50 == 0 || *s == 1) {
        println!(
            "  step {step:>4}  E = {:+.6}  (one-body {:+.6}, interaction {:+.6})",
            energy.total, energy.one_body, energy.interaction
        );
    }

    let tdqmc = estimate_energy(&state)?;
    println!("\nTDQMC ground state: E = {:+.6} +- {:.6}", tdqmc.total, tdqmc.std_error);
    println!("kernel widths: sigma_1 = {:.4}, sigma_2 = {:.4}", state.sigma(0), state.sigma(1));

    // Exact reference on a coarser two-body grid.
    let exact_grid = config.make_exact_grid()?;
    let gs = exact_ground_state(
        &config.frame(),
        config.b,
        &exact_grid,
        config.d_tau,
        config.exact_tol,
        20_000,
    )?;
    println!("exact ground state:  E = {:+.6}  ({} imaginary-time steps)", gs.energy, gs.steps);
    println!(
        "relative energy error: {:.2e}",
        ((tdqmc.total - gs.energy) / gs.energy).abs()
    );

    // Density comparison: stride the fine ensemble density down to the
    // exact solver's grid.
    let stride = config.grid.n / config.exact_n_points;
    let density = tdqmc::analysis::mean_density_from_rows(state.grid(), state.wave_rows(0));
    let l1 = l1_deviation(
        &stride_sample(&density, stride),
        &marginal_density(&gs.state, Electron::First),
        &exact_grid,
    )?;
    println!("L1 deviation of the electron-1 density: {l1:.4}");
    Ok(())
}
