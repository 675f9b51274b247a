//! Taylor-Green vortex convergence study.
//!
//! The decaying vortex is a closed-form solution of the incompressible
//! Navier-Stokes equations; marching it with the exact solution prescribed on
//! the boundary measures the spatial accuracy of the scheme. Expect roughly
//! fourfold error reduction per grid refinement (second order).
//!
//! ```bash
//! cargo run --release --example taylor_green
//! ```

use difflow::grid::{BoundaryProfiles, EdgeProfile, FluidState, GridSpec};
use difflow::navier_stokes::{ns_step_unsteady_bc, FluidConfig};
use difflow::operators::{build_operators_profiled, FluidOperators};

const RE: f64 = 100.0;
const K: f64 = std::f64::consts::TAU;

fn velocity(x: f64, y: f64, t: f64) -> (f64, f64) {
    let f = (-2.0 * K * K * t / RE).exp();
    (
        (K * x).sin() * (K * y).cos() * f,
        -(K * x).cos() * (K * y).sin() * f,
    )
}

fn operators(grid: &GridSpec, t: f64) -> FluidOperators {
    let (w, h) = grid.extent();
    let (x0, y0) = grid.origin;
    let profiles = BoundaryProfiles {
        west: EdgeProfile::dirichlet(move |y| velocity(x0, y, t)),
        east: EdgeProfile::dirichlet(move |y| velocity(x0 + w, y, t)),
        south: EdgeProfile::dirichlet(move |x| velocity(x, y0, t)),
        north: EdgeProfile::dirichlet(move |x| velocity(x, y0 + h, t)),
    }
    .mass_balanced(grid);
    build_operators_profiled(grid, profiles).unwrap()
}

fn run(n: usize, dt: f64, steps: usize) -> f64 {
    let grid = GridSpec::from_extent(n, n, 1.0, 1.0).unwrap();
    let mut ops_old = operators(&grid, 0.0);
    let mut state =
        FluidState::from_field(&grid, &ops_old.layout, ops_old.n_f(), |x, y| velocity(x, y, 0.0));
    let cfg = FluidConfig::nondimensional(RE, dt);
    for k in 0..steps {
        let ops_new = operators(&grid, (k + 1) as f64 * dt);
        let (next, _) = ns_step_unsteady_bc(&state, &ops_old, &ops_new, &cfg).unwrap();
        state = next;
        ops_old = ops_new;
    }
    // relative L2 velocity error against the closed form
    let (mut err2, mut ref2) = (0.0, 0.0);
    for (k, is_x, _, _) in ops_old.layout.iter() {
        let (x, y) = ops_old.layout.position(&grid, k);
        let (vx, vy) = velocity(x, y, state.t);
        let exact = if is_x { vx } else { vy };
        err2 += (state.u[k] - exact).powi(2);
        ref2 += exact * exact;
    }
    (err2 / ref2).sqrt()
}

fn main() {
    println!("Taylor-Green vortex, Re = {RE}, 50 steps at dt = 0.005");
    let mut previous: Option<f64> = None;
    for n in [32, 64, 128] {
        let err = run(n, 0.005, 50);
        match previous {
            Some(p) => println!(
                "{n:>4} x {n:<4} relative L2 error {err:.3e}  (ratio {:.2})",
                p / err
            ),
            None => println!("{n:>4} x {n:<4} relative L2 error {err:.3e}"),
        }
        previous = Some(err);
    }
}
