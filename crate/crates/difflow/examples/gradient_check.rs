//! Analytic trajectory gradients versus central finite differences.
//!
//! Verifies every shipped parametrization (cylinder diameter, the four
//! half-width cubic coefficients, gait frequency) of the thrust objective on
//! a short coarse-grid rollout.
//!
//! ```bash
//! cargo run --release --example gradient_check
//! ```

use difflow::bodies::{reference_tail, CylinderBody, ParametricBody, TailParams};
use difflow::fsi::Schedule;
use difflow::grid::{FluidState, GridSpec};
use difflow::navier_stokes::FluidConfig;
use difflow::operators::build_operators;
use difflow::sensitivity::{finite_difference_check, ObjectiveSpec};
use difflow::DomainBoundaryConditions;

fn check(label: &str, body: &dyn ParametricBody, theta: &[f64], re: f64) {
    let grid = GridSpec::from_extent(32, 32, 2.0, 2.0).unwrap();
    let ops = build_operators(&grid, &DomainBoundaryConditions::free_stream((1.0, 0.0))).unwrap();
    let mut cfg = FluidConfig::nondimensional(re, 0.04);
    cfg.newton_tol = 1e-11;
    cfg.newton_max_iters = 25;
    let schedule = Schedule {
        dt: cfg.dt,
        n_steps: 10,
    };
    let spec = ObjectiveSpec::thrust_x(10, cfg.dt);
    let initial = FluidState::uniform(&ops.layout, ops.n_f(), (1.0, 0.0));
    let report =
        finite_difference_check(&initial, body, theta, schedule, &ops, &cfg, &spec, 1e-5)
            .expect("check ran");
    println!("{label}:");
    for m in 0..theta.len() {
        println!(
            "  theta[{m}] analytic {:+.6e}  fd {:+.6e}  rel err {:.2e}",
            report.analytic[m], report.finite_difference[m], report.rel_errors[m]
        );
    }
    println!("  max relative error {:.2e}", report.max_rel_error);
}

fn main() {
    let grid_h = 2.0 / 32.0;
    let cylinder = CylinderBody::new((0.7, 1.0), 0.4, grid_h).with_diameter_parameter();
    check("cylinder diameter", &cylinder, &[0.4], 40.0);

    let shape = reference_tail((0.4, 1.0), 1.0, grid_h, 1.5, TailParams::ShapeOnly).unwrap();
    let theta = shape.default_theta();
    check("tail half-width cubic", &shape, &theta, 60.0);

    let freq = reference_tail((0.4, 1.0), 1.0, grid_h, 1.5, TailParams::FrequencyOnly).unwrap();
    let theta = freq.default_theta();
    check("gait frequency", &freq, &theta, 60.0);
}
