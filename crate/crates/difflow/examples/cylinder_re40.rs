//! Steady flow around a cylinder at Re = 40.
//!
//! Free stream of unit velocity over a unit-diameter cylinder in a domain of
//! 20 x 12 diameters. The run ramps the time step once the impulsive start
//! has settled and stops when the drag coefficient is steady. Expected drag
//! coefficient at these settings: about 1.8 (reference values range from
//! 1.5 to 1.8 depending on method and resolution).
//!
//! ```bash
//! cargo run --release --example cylinder_re40 [cells_per_diameter]
//! ```

use std::time::Instant;

use difflow::bodies::CylinderBody;
use difflow::fsi::{simulate, Schedule};
use difflow::grid::{FluidState, GridSpec};
use difflow::ib::net_force_nondim;
use difflow::navier_stokes::FluidConfig;
use difflow::operators::build_operators;
use difflow::DomainBoundaryConditions;

fn main() {
    let cpd: usize = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(12);
    let (width, height) = (20.0, 12.0);
    let grid = GridSpec::from_extent(
        (width * cpd as f64) as usize,
        (height * cpd as f64) as usize,
        width,
        height,
    )
    .unwrap();
    let bc = DomainBoundaryConditions::free_stream((1.0, 0.0));
    let ops = build_operators(&grid, &bc).unwrap();
    let body = CylinderBody::new((0.35 * width, 0.5 * height), 1.0, grid.min_spacing());
    let cfg = FluidConfig::nondimensional(40.0, 0.1);

    println!(
        "Re = 40 cylinder: {}x{} grid, {} velocity unknowns",
        grid.nx,
        grid.ny,
        ops.n_u()
    );

    let t0 = Instant::now();
    let mut state = FluidState::uniform(&ops.layout, ops.n_f(), (1.0, 0.0));
    let mut cd_prev = f64::NAN;
    // impulsive-start phase at small dt, then larger steps toward steady state
    for (phase, (dt, max_steps)) in [(0.1, 50), (0.4, 110)].into_iter().enumerate() {
        let mut cfg_phase = cfg.clone();
        cfg_phase.dt = dt;
        let mut remaining = max_steps;
        while remaining > 0 {
            let chunk = remaining.min((1.0 / dt).ceil() as usize);
            let traj = simulate(
                &state,
                &body,
                &[],
                Schedule { dt, n_steps: chunk },
                &ops,
                &cfg_phase,
            )
            .expect("step failed");
            state = traj.final_state.clone();
            let f = net_force_nondim(&traj.records.last().unwrap().f_tilde, &grid);
            let cd = 2.0 * f.0;
            // steady when drag drifts less than 1e-5 over one time unit
            if phase == 1 && (cd - cd_prev).abs() / cd.abs() < 1e-5 {
                println!("steady at t = {:.1}", state.t);
                remaining = 0;
            } else {
                remaining -= chunk;
            }
            cd_prev = cd;
        }
    }

    // final force measurement
    let traj = simulate(
        &state,
        &body,
        &[],
        Schedule {
            dt: 0.1,
            n_steps: 5,
        },
        &ops,
        &cfg,
    )
    .unwrap();
    let f = net_force_nondim(&traj.records.last().unwrap().f_tilde, &grid);
    println!(
        "t = {:.1}: Cd = {:.4}, Cl = {:.5}  ({:.0} s)",
        traj.final_state.t,
        2.0 * f.0,
        2.0 * f.1,
        t0.elapsed().as_secs_f64()
    );
}
