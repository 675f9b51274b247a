//! Shared fixtures for the integration suites: the Taylor-Green closed-form
//! solution (the convergence oracle) and benchmark problem builders.

#![allow(dead_code)]

use difflow::grid::{BoundaryProfiles, EdgeProfile, FluidState, GridSpec};
use difflow::operators::{build_operators_profiled, FluidOperators};
use difflow::{DomainBoundaryConditions, FluidConfig};

/// Decaying Taylor-Green vortex on the unit square with wavenumber `2 pi n`:
/// a closed-form solution of the incompressible Navier-Stokes equations.
pub struct TaylorGreen {
    pub k: f64,
    pub re: f64,
}

impl TaylorGreen {
    pub fn new(cells: f64, re: f64) -> Self {
        Self {
            k: std::f64::consts::TAU * cells,
            re,
        }
    }

    pub fn decay(&self, t: f64) -> f64 {
        (-2.0 * self.k * self.k * t / self.re).exp()
    }

    pub fn velocity(&self, x: f64, y: f64, t: f64) -> (f64, f64) {
        let f = self.decay(t);
        (
            (self.k * x).sin() * (self.k * y).cos() * f,
            -(self.k * x).cos() * (self.k * y).sin() * f,
        )
    }

    /// Kinetic energy relative to its initial value.
    pub fn energy_ratio(&self, t: f64) -> f64 {
        self.decay(t).powi(2)
    }

    /// Boundary profiles sampling the exact solution at time `t`, corrected
    /// to be discretely mass balanced.
    pub fn profiles(&self, grid: &GridSpec, t: f64) -> BoundaryProfiles {
        let (w, h) = grid.extent();
        let (x0, y0) = grid.origin;
        let tg = TaylorGreen { k: self.k, re: self.re };
        let mk = move |fixed: (Option<f64>, Option<f64>)| {
            let k = tg.k;
            let re = tg.re;
            move |c: f64| {
                let this = TaylorGreen { k, re };
                match fixed {
                    (Some(x), None) => this.velocity(x, c, t),
                    (None, Some(y)) => this.velocity(c, y, t),
                    _ => unreachable!(),
                }
            }
        };
        let profiles = BoundaryProfiles {
            west: EdgeProfile::dirichlet(mk((Some(x0), None))),
            east: EdgeProfile::dirichlet(mk((Some(x0 + w), None))),
            south: EdgeProfile::dirichlet(mk((None, Some(y0)))),
            north: EdgeProfile::dirichlet(mk((None, Some(y0 + h)))),
        };
        profiles.mass_balanced(grid)
    }

    pub fn operators(&self, grid: &GridSpec, t: f64) -> FluidOperators {
        build_operators_profiled(grid, self.profiles(grid, t)).unwrap()
    }

    pub fn initial_state(&self, grid: &GridSpec, ops: &FluidOperators) -> FluidState {
        FluidState::from_field(grid, &ops.layout, ops.n_f(), |x, y| self.velocity(x, y, 0.0))
    }

    /// Relative L2 error of the computed velocity against the exact solution
    /// at time `t`.
    pub fn velocity_error(&self, state: &FluidState, grid: &GridSpec, ops: &FluidOperators) -> f64 {
        let mut err2 = 0.0;
        let mut ref2 = 0.0;
        for (kdx, is_x, _, _) in ops.layout.iter() {
            let (x, y) = ops.layout.position(grid, kdx);
            let (vx, vy) = self.velocity(x, y, state.t);
            let exact = if is_x { vx } else { vy };
            err2 += (state.u[kdx] - exact).powi(2);
            ref2 += exact * exact;
        }
        (err2 / ref2).sqrt()
    }

    /// March the solver `n_steps` with the exact solution on the boundary.
    pub fn run(&self, grid: &GridSpec, cfg: &FluidConfig, n_steps: usize) -> (FluidState, FluidOperators) {
        let ops0 = self.operators(grid, 0.0);
        let mut state = self.initial_state(grid, &ops0);
        let mut ops_old = ops0;
        for k in 0..n_steps {
            // Crank-Nicolson wants the Laplacian boundary data averaged over
            // the step; supplying each level's own profile achieves that.
            let ops_new = self.operators(grid, (k + 1) as f64 * cfg.dt);
            let (next, diag) =
                difflow::navier_stokes::ns_step_unsteady_bc(&state, &ops_old, &ops_new, cfg)
                    .expect("Taylor-Green step must converge");
            assert!(diag.converged);
            state = next;
            ops_old = ops_new;
        }
        (state, ops_old)
    }
}

/// Kinetic energy of the discrete velocity field (uniform cell volumes).
pub fn kinetic_energy(state: &FluidState, grid: &GridSpec) -> f64 {
    0.5 * grid.hx * grid.hy * state.u.iter().map(|v| v * v).sum::<f64>()
}

/// Cylinder benchmark setup: free stream of unit velocity, unit diameter.
pub struct CylinderBench {
    pub grid: GridSpec,
    pub ops: FluidOperators,
    pub cfg: FluidConfig,
    pub body: difflow::bodies::CylinderBody,
}

impl CylinderBench {
    /// Domain `width x height` diameters, cylinder centered laterally at
    /// `center_x` diameters from the inlet, `cells_per_diameter` resolution.
    pub fn new(
        re: f64,
        dt: f64,
        width: f64,
        height: f64,
        center_x: f64,
        cells_per_diameter: usize,
        center_y_offset: f64,
    ) -> Self {
        let nx = (width * cells_per_diameter as f64).round() as usize;
        let ny = (height * cells_per_diameter as f64).round() as usize;
        let grid = GridSpec::from_extent(nx, ny, width, height).unwrap();
        let bc = DomainBoundaryConditions::free_stream((1.0, 0.0));
        let ops = build_operators_profiled(&grid, bc.resolve()).unwrap();
        let cfg = FluidConfig::nondimensional(re, dt);
        let body = difflow::bodies::CylinderBody::new(
            (center_x, height / 2.0 + center_y_offset),
            1.0,
            grid.min_spacing(),
        );
        Self {
            grid,
            ops,
            cfg,
            body,
        }
    }

    pub fn free_stream_state(&self) -> FluidState {
        FluidState::uniform(&self.ops.layout, self.ops.n_f(), (1.0, 0.0))
    }
}
