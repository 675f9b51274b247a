//! Integration tests of the implicit fluid stepper (no body).

mod common;

use common::{kinetic_energy, TaylorGreen};
use difflow::grid::{FluidState, GridSpec};
use difflow::navier_stokes::{ns_step, FluidConfig};
use difflow::operators::build_operators;
use difflow::DomainBoundaryConditions;

#[test]
fn uniform_free_stream_is_a_fixed_point() {
    let grid = GridSpec::from_extent(24, 16, 3.0, 2.0).unwrap();
    let bc = DomainBoundaryConditions::uniform(difflow::EdgeCondition::FarField {
        velocity: (1.0, 0.0),
    });
    let ops = build_operators(&grid, &bc).unwrap();
    let cfg = FluidConfig::nondimensional(50.0, 0.1);
    let mut state = FluidState::uniform(&ops.layout, ops.n_f(), (1.0, 0.0));
    for _ in 0..5 {
        let (next, diag) = ns_step(&state, &ops, &cfg).unwrap();
        assert!(diag.converged);
        for (a, b) in next.u.iter().zip(&state.u) {
            assert!((a - b).abs() < 1e-9, "uniform flow must persist");
        }
        let div = ops.divergence(&next.u);
        assert!(div.iter().all(|v| v.abs() < 1e-8));
        state = next;
    }
}

#[test]
fn rest_stays_at_rest_in_a_cavity() {
    let grid = GridSpec::from_extent(16, 16, 1.0, 1.0).unwrap();
    let ops = build_operators(&grid, &DomainBoundaryConditions::cavity()).unwrap();
    let cfg = FluidConfig::nondimensional(100.0, 0.05);
    let state = FluidState::zeros(ops.n_u(), ops.n_f());
    let (next, diag) = ns_step(&state, &ops, &cfg).unwrap();
    assert!(diag.converged);
    assert!(next.u.iter().all(|v| v.abs() < 1e-12));
    // pressure is pinned: constant zero solves the rest state
    assert!(next.p.iter().all(|v| v.abs() < 1e-10));
}

#[test]
fn taylor_green_velocity_tracks_the_closed_form() {
    let tg = TaylorGreen::new(1.0, 100.0);
    let grid = GridSpec::from_extent(64, 64, 1.0, 1.0).unwrap();
    let cfg = FluidConfig::nondimensional(100.0, 0.005);
    let (state, ops) = tg.run(&grid, &cfg, 50);
    let err = tg.velocity_error(&state, &grid, &ops);
    assert!(err < 0.02, "relative L2 error {err:.4}");
}

#[test]
fn taylor_green_energy_decays_at_the_analytic_rate() {
    let tg = TaylorGreen::new(1.0, 100.0);
    let grid = GridSpec::from_extent(64, 64, 1.0, 1.0).unwrap();
    let cfg = FluidConfig::nondimensional(100.0, 0.005);
    let ops0 = tg.operators(&grid, 0.0);
    let e0 = kinetic_energy(&tg.initial_state(&grid, &ops0), &grid);
    let (state, _) = tg.run(&grid, &cfg, 50);
    let ratio = kinetic_energy(&state, &grid) / e0;
    let exact = tg.energy_ratio(state.t);
    assert!(
        (ratio - exact).abs() / exact < 0.02,
        "energy ratio {ratio:.5} vs analytic {exact:.5}"
    );
}

#[test]
fn stokes_step_is_time_reversible() {
    // linear limit: convection off; forward dt then backward -dt returns the
    // initial state
    let grid = GridSpec::from_extent(24, 24, 1.0, 1.0).unwrap();
    let ops = build_operators(&grid, &DomainBoundaryConditions::cavity()).unwrap();
    let mut cfg = FluidConfig::nondimensional(10.0, 0.02);
    cfg.include_convection = false;
    cfg.newton_tol = 1e-13;
    let initial = FluidState::from_field(&grid, &ops.layout, ops.n_f(), |x, y| {
        let s = (std::f64::consts::PI * x).sin() * (std::f64::consts::PI * y).sin();
        (s * (1.0 - y), -s * (1.0 - x))
    });
    // project to a divergence-free start so both directions see the same state
    let (projected, _) = ns_step(&initial, &ops, &cfg).unwrap();

    let (forward, _) = ns_step(&projected, &ops, &cfg).unwrap();
    let mut back_cfg = cfg.clone();
    back_cfg.dt = -cfg.dt;
    let (returned, _) = ns_step(&forward, &ops, &back_cfg).unwrap();
    for (a, b) in returned.u.iter().zip(&projected.u) {
        assert!((a - b).abs() < 1e-10, "reversibility violated: {a} vs {b}");
    }
}

#[test]
fn taylor_green_converges_second_order_in_time() {
    // same grid for every run, so the spatial error cancels and the
    // dt-refinement ratio isolates the temporal order:
    // |u_dt - u_dt/2| / |u_dt/2 - u_dt/4| -> 4 for a second-order scheme
    let tg = TaylorGreen::new(1.0, 40.0);
    let grid = GridSpec::from_extent(48, 48, 1.0, 1.0).unwrap();
    let t_final = 0.4;
    let mut fields = Vec::new();
    for dt in [0.08, 0.04, 0.02] {
        let mut cfg = FluidConfig::nondimensional(40.0, dt);
        cfg.newton_tol = 1e-11;
        let steps = (t_final / dt).round() as usize;
        let (state, _) = tg.run(&grid, &cfg, steps);
        fields.push(state.u);
    }
    let diff = |a: &[f64], b: &[f64]| -> f64 {
        a.iter()
            .zip(b)
            .map(|(x, y)| (x - y) * (x - y))
            .sum::<f64>()
            .sqrt()
    };
    let ratio = diff(&fields[0], &fields[1]) / diff(&fields[1], &fields[2]);
    assert!(
        (3.0..5.0).contains(&ratio),
        "temporal convergence ratio {ratio:.2}"
    );
}

#[test]
fn newton_residuals_do_not_increase() {
    // a deliberately rough start at moderate Re exercises the line search
    let grid = GridSpec::from_extent(24, 24, 1.0, 1.0).unwrap();
    let bc = DomainBoundaryConditions::free_stream((1.0, 0.0));
    let ops = build_operators(&grid, &bc).unwrap();
    let mut cfg = FluidConfig::nondimensional(500.0, 0.1);
    cfg.newton_max_iters = 25;
    let state = FluidState::from_field(&grid, &ops.layout, ops.n_f(), |x, y| {
        (1.0 + 0.5 * (7.0 * y).sin(), 0.4 * (5.0 * x).cos())
    });
    let (next, diag) = ns_step(&state, &ops, &cfg).unwrap();
    assert!(diag.converged);
    assert!(diag.final_residual_norm <= cfg.newton_tol);
    let div = ops.divergence(&next.u);
    assert!(div.iter().all(|v| v.abs() < 1e-8));
}
