//! Double-slit release: interference fringes and how interaction erases them.
//!
//! Three molecule runs at electron-electron strengths b = 0.02, 0.1 and 1
//! are released from the two-nucleus ground state. The weakly interacting
//! pair diffracts almost like independent particles and shows fringes; as b
//! grows each electron increasingly "measures" the other and the contrast
//! collapses. Both the TDQMC ensemble and the exact two-body solution are
//! scored with the same fringe-contrast metric.
//!
//! The exact side is stricter than it may look: already at b = 0.1 the true
//! two-electron ground state is strongly left/right correlated (the
//! correlation energy dwarfs the tiny inter-well tunneling), so the exact
//! release carries near-complete which-path information and its fringes
//! vanish outright, while at b = 1 a central Coulomb dip scores a small
//! spurious contrast. The TDQMC kernel coupling smooths that ground-state
//! correlation away at intermediate b, so its visibilities decay more
//! gently - a genuine approximation gap, reproduced here on purpose.
//!
//! A couple of minutes at the reduced scale used here (the b = 0.02 exact
//! ground state relaxes slowly; its gap is tiny).

use anyhow::Result;
use tdqmc::analysis::fringe_visibility;
use tdqmc::config::parse_config;
use tdqmc::engine::{
    evolve_real_time, init_ensemble, relax_ground_state, release, EvolveEnsembleOptions,
};
use tdqmc::exact::{exact_evolve, exact_ground_state, marginal_density, Electron, EvolveOptions};
use tdqmc::pipeline::VISIBILITY_WINDOW;
use tdqmc::potentials::NuclearFrame;

fn main() -> Result<()> {
    println!("      b    V(TDQMC)    V(exact)");
    for b in [0.02, 0.1, 1.0] {
        let config = parse_config(&format!(
            r#"{{
                "preset": "fig3-molecule",
                "b": {b},
                "m_walkers": 200,
                "grid": {{"x_min": -60.0, "x_max": 60.0, "n": 512}},
                "exact_n_points": 256,
                "relax_steps": 400
            }}"#
        ))?;

        // TDQMC: final-time ensemble density -> fringe contrast.
        let mut state = init_ensemble(&config)?;
        relax_ground_state(&mut state, config.relax_steps)?;
        release(&mut state)?;
        let snapshots = evolve_real_time(&mut state, &EvolveEnsembleOptions::from_config(&config))?;
        let last = snapshots.last().expect("evolution produces snapshots");
        let v_tdqmc = fringe_visibility(&last.densities[0], state.grid(), VISIBILITY_WINDOW)?;

        // Exact reference: same release on the coarse two-body grid.
        let exact_grid = config.make_exact_grid()?;
        let gs = exact_ground_state(
            &config.frame(),
            config.b,
            &exact_grid,
            config.d_tau,
            config.exact_tol,
            30_000,
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
                snapshot_stride: config.t_final,
                ..EvolveOptions::default()
            },
        )?;
        let marginal = marginal_density(series.last().expect("final snapshot"), Electron::First);
        let v_exact = fringe_visibility(&marginal, &exact_grid, VISIBILITY_WINDOW)?;

        println!("  {b:>5.2}  {v_tdqmc:>9.3}  {v_exact:>9.3}");
    }
    println!("\nTDQMC fringe visibility falls as the interaction strengthens;");
    println!("the exact reference already loses its fringes at b = 0.1, where");
    println!("the correlated ground state marks which slit each electron took.");
    Ok(())
}
