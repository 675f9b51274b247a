//! The coupled fluid-structure step.
//!
//! Each implicit time step solves momentum, continuity and the no-slip
//! constraint simultaneously by Newton iteration on the saddle-point system
//!
//! ```text
//!   [ A + dN/du / 2   G    E^T ] [ du ]   [ -R  ]
//!   [ G^T             0    0   ] [ dp ] = [ -c1 ]
//!   [ E               0    0   ] [ df ]   [ -c2 ]
//! ```
//!
//! where the dual of the no-slip rows is the boundary force density. The
//! factorization of this matrix at the converged state is kept on the step
//! result so sensitivity solves can reuse it.

use faer::Mat;
use sprs::CsMat;

use crate::bodies::ParametricBody;
use crate::error::{Error, Result};
use crate::grid::FluidState;
use crate::ib::{interpolation_matrix, BoundaryMesh, DeltaKernel};
use crate::linsolve::{self, inf_norm, two_norm, SparseLu, SymbolicCache, Trip};
use crate::navier_stokes::{explicit_rhs_pair, FluidConfig, StepDiagnostics};
use crate::operators::{convect, convect_jacobian, mat_vec, FluidOperators};

/// Regularization added to the dual block when a factorization reports
/// singularity (e.g. nearly coincident boundary nodes), then retried once.
const DUAL_REGULARIZATION: f64 = 1e-10;

/// Smallest line-search step before the raw Newton step is accepted anyway.
const MIN_LINE_SEARCH_STEP: f64 = 1.0 / 1024.0;

/// Rollout schedule: time step and number of steps.
#[derive(Debug, Clone, Copy)]
pub struct Schedule {
    pub dt: f64,
    pub n_steps: usize,
}

/// Opaque handle to the factorized saddle-point matrix, evaluated at the
/// converged state of a step. Valid for sensitivity solves until the state
/// changes.
pub struct KktFactorization {
    lu: SparseLu,
    n_u: usize,
    n_f: usize,
    n_b: usize,
    pinned: Option<usize>,
    state_tag: u64,
}

impl KktFactorization {
    pub fn n_u(&self) -> usize {
        self.n_u
    }

    pub fn n_f(&self) -> usize {
        self.n_f
    }

    pub fn n_b(&self) -> usize {
        self.n_b
    }

    pub fn dim(&self) -> usize {
        self.lu.dim()
    }

    /// Solve the KKT system for several right-hand-side columns; pinned rows
    /// are zeroed to keep the pressure gauge fixed.
    pub(crate) fn solve_columns(&self, rhs: &mut Mat<f64>) -> Mat<f64> {
        if let Some(pin) = self.pinned {
            for c in 0..rhs.ncols() {
                rhs[(pin, c)] = 0.0;
            }
        }
        self.lu.solve_mat(rhs)
    }

    /// Check that `state`/`f_tilde` are the ones this factorization was
    /// computed at.
    pub fn matches(&self, state: &FluidState, f_tilde: &[f64]) -> bool {
        linsolve::fingerprint(&[&state.u, &state.p, f_tilde]) == self.state_tag
    }
}

impl std::fmt::Debug for KktFactorization {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("KktFactorization")
            .field("dim", &self.dim())
            .field("n_u", &self.n_u)
            .field("n_f", &self.n_f)
            .field("n_b", &self.n_b)
            .field("pinned", &self.pinned)
            .finish()
    }
}

/// Converged output of one coupled step.
#[derive(Debug)]
pub struct FsiStepResult {
    pub state: FluidState,
    /// Dual of the no-slip constraint (nondimensional boundary acceleration),
    /// `[x-block; y-block]`.
    pub f_tilde: Vec<f64>,
    pub diagnostics: StepDiagnostics,
    /// Factorization of the KKT matrix at the converged state.
    pub factorization: KktFactorization,
    /// Whether the dual block needed regularization this step.
    pub dual_regularized: bool,
    /// Infinity norms of the converged continuity and no-slip residuals.
    pub continuity_residual: f64,
    pub noslip_residual: f64,
}

/// The assembled KKT matrix with its block dimensions.
pub struct KktMatrix {
    pub mat: faer::sparse::SparseColMat<usize, f64>,
    pub n_u: usize,
    pub n_f: usize,
    pub n_b: usize,
    /// Pressure unknown pinned to zero (closed domains only).
    pub pinned: Option<usize>,
}

impl KktMatrix {
    pub fn dim(&self) -> usize {
        self.n_u + self.n_f + self.n_b
    }

    /// Dense copy, for inspection in tests at small sizes.
    pub fn dense(&self) -> Mat<f64> {
        self.mat.to_dense()
    }
}

/// Assemble the saddle-point matrix of the coupled step, linearized at `u`.
///
/// With no interpolation matrix this is the plain fluid system. On closed
/// domains (no outflow edge) one pressure unknown is pinned: its row and
/// column are cleared and replaced by an identity entry.
pub fn assemble_kkt(
    u: &[f64],
    ops: &FluidOperators,
    cfg: &FluidConfig,
    e: Option<&CsMat<f64>>,
) -> KktMatrix {
    let (trips, dim, pinned) = kkt_triplets(u, ops, cfg, e, 0.0);
    let mat = faer::sparse::SparseColMat::<usize, f64>::try_new_from_triplets(dim, dim, &trips)
        .expect("KKT triplets are in range");
    let n_b = e.map_or(0, |e| e.rows());
    KktMatrix {
        mat,
        n_u: ops.n_u(),
        n_f: ops.n_f(),
        n_b,
        pinned,
    }
}

fn kkt_triplets(
    u: &[f64],
    ops: &FluidOperators,
    cfg: &FluidConfig,
    e: Option<&CsMat<f64>>,
    dual_reg: f64,
) -> (Vec<Trip>, usize, Option<usize>) {
    let n_u = ops.n_u();
    let n_f = ops.n_f();
    let n_b = e.map_or(0, |e| e.rows());
    let dim = n_u + n_f + n_b;
    let pinned = ops.needs_pressure_pin().then_some(n_u);

    let keep = |r: usize, c: usize| pinned != Some(r) && pinned != Some(c);
    let mut trips: Vec<Trip> = Vec::with_capacity(24 * n_u + 18 * n_b + n_f);

    // (1,1): A + dN/du / 2, with A = I/dt - L/(2 Re)
    for k in 0..n_u {
        trips.push(Trip::new(k, k, 1.0 / cfg.dt));
    }
    let visc = -1.0 / (2.0 * cfg.re);
    for (v, (r, c)) in ops.l.iter() {
        trips.push(Trip::new(r, c, visc * v));
    }
    if cfg.include_convection {
        let jn = convect_jacobian(u, ops);
        for (v, (r, c)) in jn.iter() {
            trips.push(Trip::new(r, c, 0.5 * v));
        }
    }

    // (1,2) G and (2,1) G^T
    for (v, (r, c)) in ops.g.iter() {
        if keep(r, n_u + c) {
            trips.push(Trip::new(r, n_u + c, *v));
            trips.push(Trip::new(n_u + c, r, *v));
        }
    }

    // (1,3) E^T and (3,1) E
    if let Some(e) = e {
        for (v, (r, c)) in e.iter() {
            trips.push(Trip::new(n_u + n_f + r, c, *v));
            trips.push(Trip::new(c, n_u + n_f + r, *v));
        }
        if dual_reg != 0.0 {
            for r in 0..n_b {
                let k = n_u + n_f + r;
                trips.push(Trip::new(k, k, -dual_reg));
            }
        }
    }

    if let Some(pin) = pinned {
        trips.push(Trip::new(pin, pin, 1.0));
    }
    (trips, dim, pinned)
}

/// The prescribed body constraint for one step: interpolation matrix and
/// boundary velocities at the new time level, plus a warm-started dual.
pub(crate) struct BodyConstraint<'a> {
    pub e: &'a CsMat<f64>,
    pub u_b: &'a [f64],
    pub f_warm: &'a [f64],
}

pub(crate) struct CoreOutput {
    pub state: FluidState,
    pub f_tilde: Vec<f64>,
    pub diagnostics: StepDiagnostics,
    pub factorization: Option<KktFactorization>,
    pub dual_regularized: bool,
    pub continuity_residual: f64,
    pub noslip_residual: f64,
}

/// Full residual of the coupled step at iterate (u, p, f). The continuity
/// block carries the sign of the G^T row so the assembled matrix is the exact
/// Jacobian.
fn residual(
    u: &[f64],
    p: &[f64],
    f_tilde: &[f64],
    r_k: &[f64],
    ops: &FluidOperators,
    cfg: &FluidConfig,
    body: Option<&BodyConstraint>,
) -> Vec<f64> {
    let n_u = ops.n_u();
    let n_f = ops.n_f();
    let n_b = body.map_or(0, |b| b.e.rows());
    let mut out = vec![0.0; n_u + n_f + n_b];

    // momentum: u/dt - L u/(2 Re) + N(u)/2 + G p + E^T f - r_k
    let lu = ops.l_mul(u);
    let gp = ops.g_mul(p);
    let conv = if cfg.include_convection {
        convect(u, ops)
    } else {
        vec![0.0; n_u]
    };
    for k in 0..n_u {
        out[k] = u[k] / cfg.dt - lu[k] / (2.0 * cfg.re) + 0.5 * conv[k] + gp[k] - r_k[k];
    }
    if let Some(b) = body {
        // E^T f accumulated entrywise
        for (v, (r, c)) in b.e.iter() {
            out[c] += v * f_tilde[r];
        }
    }

    // continuity, with the G^T row sign: -(D u + bc_D)
    let div = ops.divergence(u);
    for (c, dv) in div.iter().enumerate() {
        out[n_u + c] = -dv;
    }

    // no-slip: E u - u_b
    if let Some(b) = body {
        let eu = mat_vec(b.e, u);
        for r in 0..n_b {
            out[n_u + n_f + r] = eu[r] - b.u_b[r];
        }
    }
    out
}

/// One implicit step of the (possibly body-coupled) system. `ops_old` and
/// `ops_new` carry the boundary data at the two time levels; they must share
/// the grid and layout. The returned state satisfies all residuals to
/// `cfg.newton_tol` in the infinity norm.
#[allow(clippy::too_many_arguments)]
pub(crate) fn step_core(
    state: &FluidState,
    ops_old: &FluidOperators,
    ops_new: &FluidOperators,
    body: Option<BodyConstraint>,
    cfg: &FluidConfig,
    symbolic_cache: &mut Option<SymbolicCache>,
    want_factorization: bool,
) -> Result<CoreOutput> {
    let n_u = ops_new.n_u();
    let n_f = ops_new.n_f();
    if state.u.len() != n_u {
        return Err(Error::DimensionMismatch {
            what: "velocity state",
            expected: n_u,
            got: state.u.len(),
        });
    }
    let n_b = body.as_ref().map_or(0, |b| b.e.rows());
    let pinned = ops_new.needs_pressure_pin().then_some(n_u);

    let r_k = explicit_rhs_pair(&state.u, ops_old, ops_new, cfg);

    let mut u = state.u.clone();
    let mut p = state.p.clone();
    // The Newton system carries the raw multiplier of `E u = u_b` (momentum
    // sees +E^T f). The reported dual flips its sign so that the boundary
    // force rescaling yields the force on the body, with drag positive.
    let mut f_tilde = body
        .as_ref()
        .map_or_else(Vec::new, |b| b.f_warm.iter().map(|v| -v).collect());

    let mut dual_regularized = false;
    let mut f_res = residual(&u, &p, &f_tilde, &r_k, ops_new, cfg, body.as_ref());
    let mut norm = inf_norm(&f_res);
    let mut iterations = 0;

    while norm > cfg.newton_tol && iterations < cfg.newton_max_iters {
        iterations += 1;
        let lu = factorize_kkt(
            &u,
            ops_new,
            cfg,
            body.as_ref(),
            symbolic_cache,
            &mut dual_regularized,
        )?;

        let mut delta: Vec<f64> = f_res.iter().map(|v| -v).collect();
        if let Some(pin) = pinned {
            delta[pin] = 0.0;
        }
        lu.solve_in_place(&mut delta);
        if delta.iter().any(|v| !v.is_finite()) {
            return Err(Error::SingularSystem(
                "Newton update contains non-finite entries".into(),
            ));
        }

        // backtracking line search on the residual 2-norm
        let norm2 = two_norm(&f_res);
        let mut alpha = 1.0;
        loop {
            let u_try: Vec<f64> = u.iter().zip(&delta).map(|(a, d)| a + alpha * d).collect();
            let p_try: Vec<f64> = p
                .iter()
                .zip(&delta[n_u..n_u + n_f])
                .map(|(a, d)| a + alpha * d)
                .collect();
            let f_try: Vec<f64> = f_tilde
                .iter()
                .zip(&delta[n_u + n_f..])
                .map(|(a, d)| a + alpha * d)
                .collect();
            let res_try = residual(&u_try, &p_try, &f_try, &r_k, ops_new, cfg, body.as_ref());
            let norm2_try = two_norm(&res_try);
            if norm2_try <= norm2 * (1.0 + 1e-12) || alpha <= MIN_LINE_SEARCH_STEP {
                u = u_try;
                p = p_try;
                f_tilde = f_try;
                f_res = res_try;
                norm = inf_norm(&f_res);
                break;
            }
            alpha *= 0.5;
        }
    }

    let converged = norm <= cfg.newton_tol;
    let diagnostics = StepDiagnostics {
        iterations,
        final_residual_norm: norm,
        converged,
    };
    if !converged {
        return Err(Error::NonConvergence {
            residual: norm,
            diagnostics,
        });
    }

    let continuity_residual = inf_norm(&f_res[n_u..n_u + n_f]);
    let noslip_residual = inf_norm(&f_res[n_u + n_f..]);

    // back to the reported sign convention
    for f in f_tilde.iter_mut() {
        *f = -*f;
    }

    // Factorization at the converged state, for exact sensitivity reuse.
    let factorization = if want_factorization {
        let lu = factorize_kkt(
            &u,
            ops_new,
            cfg,
            body.as_ref(),
            symbolic_cache,
            &mut dual_regularized,
        )?;
        Some(KktFactorization {
            lu,
            n_u,
            n_f,
            n_b,
            pinned,
            state_tag: linsolve::fingerprint(&[&u, &p, &f_tilde]),
        })
    } else {
        None
    };

    Ok(CoreOutput {
        state: FluidState {
            u,
            p,
            t: state.t + cfg.dt,
        },
        f_tilde,
        diagnostics,
        factorization,
        dual_regularized,
        continuity_residual,
        noslip_residual,
    })
}

fn factorize_kkt(
    u: &[f64],
    ops: &FluidOperators,
    cfg: &FluidConfig,
    body: Option<&BodyConstraint>,
    symbolic_cache: &mut Option<SymbolicCache>,
    dual_regularized: &mut bool,
) -> Result<SparseLu> {
    let e = body.map(|b| b.e);
    let reg = if *dual_regularized {
        DUAL_REGULARIZATION
    } else {
        0.0
    };
    let (trips, dim, _) = kkt_triplets(u, ops, cfg, e, reg);
    match linsolve::factorize(dim, &trips, symbolic_cache) {
        Ok(lu) => Ok(lu),
        Err(Error::SingularSystem(msg)) if body.is_some() && !*dual_regularized => {
            // retry once with a small negative shift on the dual block
            *dual_regularized = true;
            let (trips, dim, _) = kkt_triplets(u, ops, cfg, e, DUAL_REGULARIZATION);
            linsolve::factorize(dim, &trips, symbolic_cache).map_err(|_| {
                Error::SingularSystem(format!("{msg} (also after dual regularization)"))
            })
        }
        Err(e) => Err(e),
    }
}

/// Advance the coupled fluid-body system by one step. The boundary mesh is
/// the body state at the new time level; its dual is cold-started at zero.
/// Use [`fsi_step_warm`] inside rollouts.
pub fn fsi_step(
    state: &FluidState,
    mesh: &BoundaryMesh,
    ops: &FluidOperators,
    cfg: &FluidConfig,
) -> Result<FsiStepResult> {
    fsi_step_warm(state, mesh, ops, cfg, &vec![0.0; mesh.n_b()])
}

/// [`fsi_step`] warm-started from the previous step's dual.
pub fn fsi_step_warm(
    state: &FluidState,
    mesh: &BoundaryMesh,
    ops: &FluidOperators,
    cfg: &FluidConfig,
    f_warm: &[f64],
) -> Result<FsiStepResult> {
    let mut cache = None;
    fsi_step_cached(state, mesh, ops, cfg, f_warm, &mut cache, true)
}

pub(crate) fn fsi_step_cached(
    state: &FluidState,
    mesh: &BoundaryMesh,
    ops: &FluidOperators,
    cfg: &FluidConfig,
    f_warm: &[f64],
    symbolic_cache: &mut Option<SymbolicCache>,
    want_factorization: bool,
) -> Result<FsiStepResult> {
    let kernel = DeltaKernel::default();
    let (e, u_b);
    let body = if mesh.n_nodes() == 0 {
        None
    } else {
        e = interpolation_matrix(mesh, ops, &kernel)?;
        u_b = mesh.velocity_vector();
        Some(BodyConstraint {
            e: &e,
            u_b: &u_b,
            f_warm,
        })
    };
    let out = step_core(state, ops, ops, body, cfg, symbolic_cache, want_factorization)?;
    Ok(FsiStepResult {
        state: out.state,
        f_tilde: out.f_tilde,
        diagnostics: out.diagnostics,
        factorization: out.factorization.expect("factorization requested"),
        dual_regularized: out.dual_regularized,
        continuity_residual: out.continuity_residual,
        noslip_residual: out.noslip_residual,
    })
}

/// Per-step record kept by [`simulate`].
#[derive(Debug, Clone)]
pub struct StepRecord {
    /// Time at the end of the step (nondimensional).
    pub t: f64,
    /// Converged no-slip dual.
    pub f_tilde: Vec<f64>,
    /// Boundary node spacing of the mesh used this step.
    pub spacing: f64,
    pub n_nodes: usize,
    /// Net nondimensional force on the body.
    pub net_force_nd: (f64, f64),
    pub diagnostics: StepDiagnostics,
    pub continuity_residual: f64,
    pub noslip_residual: f64,
}

/// A completed rollout.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub records: Vec<StepRecord>,
    pub final_state: FluidState,
    pub dt: f64,
}

impl Trajectory {
    pub fn n_steps(&self) -> usize {
        self.records.len()
    }
}

/// Roll the coupled system forward `schedule.n_steps` steps, rebuilding the
/// body mesh from its kinematics at each new time level and warm-starting
/// every solve from the previous converged triple.
pub fn simulate(
    initial: &FluidState,
    body: &dyn ParametricBody,
    theta: &[f64],
    schedule: Schedule,
    ops: &FluidOperators,
    cfg: &FluidConfig,
) -> Result<Trajectory> {
    simulate_observed(initial, body, theta, schedule, ops, cfg, false, &mut |_, _, _| Ok(()))
}

/// [`simulate`] with an observer called after every converged step. When
/// `with_factorizations` is set each step's KKT factorization is computed at
/// the converged state and handed to the observer (for sensitivity chaining).
#[allow(clippy::too_many_arguments)]
pub(crate) fn simulate_observed(
    initial: &FluidState,
    body: &dyn ParametricBody,
    theta: &[f64],
    schedule: Schedule,
    ops: &FluidOperators,
    cfg: &FluidConfig,
    with_factorizations: bool,
    observer: &mut dyn FnMut(usize, &CoreOutput, &BoundaryMesh) -> Result<()>,
) -> Result<Trajectory> {
    let kernel = DeltaKernel::default();
    let mut cfg = cfg.clone();
    cfg.dt = schedule.dt;

    let mut state = initial.clone();
    let mut f_warm: Vec<f64> = Vec::new();
    let mut cache = None;
    let mut records = Vec::with_capacity(schedule.n_steps);

    for step in 0..schedule.n_steps {
        let t_next = state.t + cfg.dt;
        let mesh = body
            .mesh_at(theta, t_next)
            .map_err(|e| e.at_step(step))?;

        let (e_mat, u_b);
        let constraint = if mesh.n_nodes() == 0 {
            None
        } else {
            e_mat = interpolation_matrix(&mesh, ops, &kernel).map_err(|e| e.at_step(step))?;
            u_b = mesh.velocity_vector();
            if f_warm.len() != mesh.n_b() {
                f_warm = vec![0.0; mesh.n_b()];
            }
            Some(BodyConstraint {
                e: &e_mat,
                u_b: &u_b,
                f_warm: &f_warm,
            })
        };

        let out = step_core(
            &state,
            ops,
            ops,
            constraint,
            &cfg,
            &mut cache,
            with_factorizations,
        )
        .map_err(|e| e.at_step(step))?;

        observer(step, &out, &mesh).map_err(|e| e.at_step(step))?;

        let area = ops.grid.hx * ops.grid.hy;
        let n_nodes = mesh.n_nodes();
        let (mut fx, mut fy) = (0.0, 0.0);
        for i in 0..n_nodes {
            fx -= area * out.f_tilde[i];
            fy -= area * out.f_tilde[n_nodes + i];
        }
        records.push(StepRecord {
            t: out.state.t,
            f_tilde: out.f_tilde.clone(),
            spacing: mesh.spacing,
            n_nodes,
            net_force_nd: (fx, fy),
            diagnostics: out.diagnostics,
            continuity_residual: out.continuity_residual,
            noslip_residual: out.noslip_residual,
        });
        f_warm = out.f_tilde;
        state = out.state;
    }

    Ok(Trajectory {
        records,
        final_state: state,
        dt: cfg.dt,
    })
}
