//! The exact two-body solver on its own: ground states, conservation laws,
//! and configuration-space Bohmian trajectories.
//!
//! This is the reference every TDQMC run is judged against, so it carries
//! its own audit: energy drift and exchange symmetry through a full release,
//! plus a bundle of trajectories integrated through the exact wavefunction
//! (non-crossing in configuration space, by construction).
//!
//! Runs in well under a minute.

use anyhow::Result;
use tdqmc::analysis::fringe_visibility;
use tdqmc::exact::{
    exact_evolve, exact_ground_state, exact_trajectories, marginal_density, total_energy,
    Electron, EvolveOptions,
};
use tdqmc::grid::make_grid;
use tdqmc::potentials::NuclearFrame;

fn main() -> Result<()> {
    let grid = make_grid(-60.0, 60.0, 256)?;

    // Ground states of the two standard geometries.
    let atom = NuclearFrame::atom();
    let molecule = NuclearFrame::molecule();
    let gs_atom = exact_ground_state(&atom, 1.0, &grid, 0.02, 1e-8, 20_000)?;
    let gs_molecule = exact_ground_state(&molecule, 1.0, &grid, 0.02, 1e-8, 20_000)?;
    println!("ground-state energies (b = 1):");
    println!("  atom      E = {:+.9}  ({} steps)", gs_atom.energy, gs_atom.steps);
    println!("  molecule  E = {:+.9}  ({} steps)", gs_molecule.energy, gs_molecule.steps);

    // Release the molecule and audit the conserved quantities.
    let mut released = gs_molecule.state.clone();
    released.time = 0.0;
    let free = NuclearFrame {
        active: false,
        ..molecule
    };
    let series = exact_evolve(
        &released,
        &free,
        1.0,
        &EvolveOptions {
            t_final: 10.0,
            dt: 0.01,
            snapshot_stride: 2.5,
            ..EvolveOptions::default()
        },
    )?;

    println!("\nrelease audit (free flight, b = 1):");
    println!("     t        energy      |norm-1|   exchange error");
    let e0 = total_energy(&series[0], &free, 1.0);
    let mut drift: f64 = 0.0;
    for state in &series {
        let e = total_energy(state, &free, 1.0);
        drift = drift.max(((e - e0) / e0).abs());
        println!(
            "  {:>5.2}  {e:>12.8}  {:>10.2e}  {:>13.2e}",
            state.time,
            (state.norm_sq() - 1.0).abs(),
            state.exchange_error()
        );
    }
    println!("relative energy drift over the run: {drift:.2e}");

    let last = series.last().expect("series has snapshots");
    let v = fringe_visibility(&marginal_density(last, Electron::First), &grid, 0.5)?;
    println!("final fringe visibility of the marginal: {v:.3}");

    // A few Bohmian trajectories through the exact wave. Starting points
    // straddle the two slits; the speed cap matches the grid resolution.
    let starts: Vec<(f64, f64)> = (0..5).map(|i| (-4.5 + 2.0 * i as f64, 4.0)).collect();
    let speed_cap = grid.dx() / 0.01;
    let trajectories = exact_trajectories(&series, &starts, 25, speed_cap)?;
    println!("\ntrajectories (x1 start -> x1 end over t = 10):");
    for (start, tr) in starts.iter().zip(&trajectories) {
        let end = tr.points.last().expect("trajectory has points");
        println!(
            "  {:>6.2} -> {:>7.2}   (clamped {} of {} velocity evaluations)",
            start.0,
            end.0,
            tr.clamped_events,
            (series.len() - 1) * 25 * 2,
        );
    }
    Ok(())
}
