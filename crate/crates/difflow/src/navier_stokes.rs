//! Fully implicit Crank-Nicolson time stepping of the discrete
//! Navier-Stokes equations, solved per step by Newton iteration on the
//! velocity/pressure saddle-point system.

use sprs::{CsMat, TriMat};

use crate::error::Result;
use crate::fsi;
use crate::grid::FluidState;
use crate::operators::FluidOperators;

/// Fluid and solver configuration. All solver quantities are nondimensional;
/// `rho`, `u_ref` and `l_ref` are only used to convert forces and times back
/// to physical units.
#[derive(Debug, Clone)]
pub struct FluidConfig {
    /// Reynolds number.
    pub re: f64,
    /// Time step (nondimensional).
    pub dt: f64,
    /// External acceleration per velocity unknown; empty means none.
    pub a_ext: Vec<f64>,
    /// Newton residual tolerance (infinity norm).
    pub newton_tol: f64,
    /// Newton iteration cap.
    pub newton_max_iters: usize,
    /// Physical fluid density in kg/m^3, for force redimensionalization.
    pub rho: f64,
    /// Reference velocity in m/s.
    pub u_ref: f64,
    /// Reference length in m.
    pub l_ref: f64,
    /// Disable to run the linear Stokes limit (no convection term).
    pub include_convection: bool,
}

impl FluidConfig {
    /// Purely nondimensional setup: unit density and references.
    pub fn nondimensional(re: f64, dt: f64) -> Self {
        assert!(re > 0.0, "Reynolds number must be positive");
        Self {
            re,
            dt,
            a_ext: Vec::new(),
            newton_tol: 1e-8,
            newton_max_iters: 10,
            rho: 1.0,
            u_ref: 1.0,
            l_ref: 1.0,
            include_convection: true,
        }
    }

    /// Construct from physical fluid properties; `Re = rho u_ref l_ref / mu`
    /// and the time step is given in seconds.
    pub fn from_physical(rho: f64, mu: f64, u_ref: f64, l_ref: f64, dt_seconds: f64) -> Self {
        assert!(rho > 0.0 && mu > 0.0 && u_ref > 0.0 && l_ref > 0.0);
        let mut cfg = Self::nondimensional(rho * u_ref * l_ref / mu, dt_seconds * u_ref / l_ref);
        cfg.rho = rho;
        cfg.u_ref = u_ref;
        cfg.l_ref = l_ref;
        cfg
    }

    /// Convert a nondimensional simulation time to seconds.
    pub fn time_seconds(&self, t: f64) -> f64 {
        t * self.l_ref / self.u_ref
    }

    /// Convert seconds to nondimensional time.
    pub fn time_nondim(&self, seconds: f64) -> f64 {
        seconds * self.u_ref / self.l_ref
    }

    /// Scale factor from nondimensional net force to N/m (2D, per unit span).
    pub fn force_scale(&self) -> f64 {
        self.rho * self.u_ref * self.u_ref * self.l_ref
    }
}

/// Outcome of one Newton solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepDiagnostics {
    pub iterations: usize,
    pub final_residual_norm: f64,
    pub converged: bool,
}

/// Implicit system matrix `A = (1/dt) I - (1/(2 Re)) L`.
pub fn assemble_a(ops: &FluidOperators, cfg: &FluidConfig) -> CsMat<f64> {
    let n = ops.n_u();
    let mut tri = TriMat::new((n, n));
    for k in 0..n {
        tri.add_triplet(k, k, 1.0 / cfg.dt);
    }
    let visc = -1.0 / (2.0 * cfg.re);
    for (v, (r, c)) in ops.l.iter() {
        tri.add_triplet(r, c, visc * v);
    }
    tri.to_csr()
}

/// Explicit side of the Crank-Nicolson step,
/// `r(u_k) = [(1/dt) I + (1/(2 Re)) L] u_k - N(u_k)/2 + bc_L/Re + a_ext`.
pub fn explicit_rhs(u_k: &[f64], ops: &FluidOperators, cfg: &FluidConfig) -> Vec<f64> {
    explicit_rhs_pair(u_k, ops, ops, cfg)
}

/// Same as [`explicit_rhs`] but with distinct boundary data for the old and
/// new time levels (time-varying Dirichlet data enters the Laplacian term as
/// the Crank-Nicolson average and convection with its own level's closure).
pub(crate) fn explicit_rhs_pair(
    u_k: &[f64],
    ops_old: &FluidOperators,
    ops_new: &FluidOperators,
    cfg: &FluidConfig,
) -> Vec<f64> {
    let n = ops_old.n_u();
    assert_eq!(u_k.len(), n, "explicit_rhs: velocity length mismatch");
    let lu = ops_old.l_mul(u_k);
    let conv = if cfg.include_convection {
        crate::operators::convect(u_k, ops_old)
    } else {
        vec![0.0; n]
    };
    let mut r = vec![0.0; n];
    let visc = 1.0 / (2.0 * cfg.re);
    for k in 0..n {
        r[k] = u_k[k] / cfg.dt + visc * lu[k] - 0.5 * conv[k]
            + visc * (ops_old.bc_l[k] + ops_new.bc_l[k]);
        if !cfg.a_ext.is_empty() {
            r[k] += cfg.a_ext[k];
        }
    }
    r
}

/// Advance the fluid by one implicit Crank-Nicolson step without a body.
///
/// Solves the coupled momentum/continuity system with Newton iteration; the
/// accepted state satisfies both residuals to `cfg.newton_tol`.
pub fn ns_step(
    state: &FluidState,
    ops: &FluidOperators,
    cfg: &FluidConfig,
) -> Result<(FluidState, StepDiagnostics)> {
    let out = fsi::step_core(state, ops, ops, None, cfg, &mut None, true)?;
    Ok((out.state, out.diagnostics))
}

/// [`ns_step`] with distinct boundary data at the two time levels, for
/// time-varying prescribed boundaries (validation studies, moving frames).
pub fn ns_step_unsteady_bc(
    state: &FluidState,
    ops_old: &FluidOperators,
    ops_new: &FluidOperators,
    cfg: &FluidConfig,
) -> Result<(FluidState, StepDiagnostics)> {
    let out = fsi::step_core(state, ops_old, ops_new, None, cfg, &mut None, true)?;
    Ok((out.state, out.diagnostics))
}
