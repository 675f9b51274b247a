//! Sparse discrete operators of the second-order finite-volume scheme.
//!
//! `build_operators` assembles the Laplacian `L`, pressure gradient `G` and
//! divergence `D` together with the boundary-condition vectors `bc_L` and
//! `bc_D`, so that on the velocity unknowns
//!
//! ```text
//!   laplacian(u)  = L u + bc_L
//!   grad(p)       = G p
//!   div(u)        = D u + bc_D
//! ```
//!
//! `G` and `D` are assembled independently from their own stencils; the
//! adjointness `D = -G^T` is a property of the scheme (asserted exactly in
//! tests), not something the assembly enforces by construction.
//!
//! Boundary closures use ghost values expressed as affine functions of the
//! unknowns: Dirichlet edges reflect tangential ghosts (`g = 2a - u`) and fix
//! normal boundary faces at the prescribed value, outflow edges copy the
//! nearest unknown (zero normal gradient). The same affine-sample machinery
//! feeds the nonlinear convection term and its analytic Jacobian, so the two
//! stay consistent with the linear operators.

use sprs::{CsMat, TriMat};

use crate::error::{Error, Result};
use crate::grid::{
    BoundaryProfiles, DomainBoundaryConditions, EdgeKind, GridSpec, VelocityLayout,
};

/// A velocity sample expressed as `w * u[dof] + c`. Pure boundary values have
/// `dof = None`.
#[derive(Debug, Clone, Copy)]
pub(crate) struct AffineSample {
    pub dof: Option<usize>,
    pub w: f64,
    pub c: f64,
}

impl AffineSample {
    fn dof(k: usize) -> Self {
        Self {
            dof: Some(k),
            w: 1.0,
            c: 0.0,
        }
    }

    fn constant(c: f64) -> Self {
        Self { dof: None, w: 0.0, c }
    }

    /// Reflection about a Dirichlet boundary with value `a`: `g = 2a - inner`.
    fn reflect(self, a: f64) -> Self {
        Self {
            dof: self.dof,
            w: -self.w,
            c: 2.0 * a - self.c,
        }
    }

    #[inline]
    pub fn eval(&self, u: &[f64]) -> f64 {
        match self.dof {
            Some(k) => self.w * u[k] + self.c,
            None => self.c,
        }
    }
}

/// The assembled spatial operators for one grid / boundary-condition pair.
#[derive(Debug, Clone)]
pub struct FluidOperators {
    pub grid: GridSpec,
    pub layout: VelocityLayout,
    pub profiles: BoundaryProfiles,
    /// Velocity Laplacian, `n_u x n_u`.
    pub l: CsMat<f64>,
    /// Pressure gradient, `n_u x n_f`.
    pub g: CsMat<f64>,
    /// Velocity divergence, `n_f x n_u`.
    pub d: CsMat<f64>,
    /// Boundary term of the Laplacian, length `n_u`.
    pub bc_l: Vec<f64>,
    /// Boundary term of the divergence, length `n_f`.
    pub bc_d: Vec<f64>,
}

impl FluidOperators {
    pub fn n_u(&self) -> usize {
        self.layout.n_u()
    }

    pub fn n_f(&self) -> usize {
        self.grid.n_cells()
    }

    /// True when the pressure level must be pinned (no outflow edge).
    pub fn needs_pressure_pin(&self) -> bool {
        !self.profiles.has_outflow()
    }

    pub fn l_mul(&self, u: &[f64]) -> Vec<f64> {
        mat_vec(&self.l, u)
    }

    pub fn g_mul(&self, p: &[f64]) -> Vec<f64> {
        mat_vec(&self.g, p)
    }

    /// Divergence residual `D u + bc_D`.
    pub fn divergence(&self, u: &[f64]) -> Vec<f64> {
        let mut out = mat_vec(&self.d, u);
        for (o, b) in out.iter_mut().zip(&self.bc_d) {
            *o += b;
        }
        out
    }
}

pub(crate) fn mat_vec(m: &CsMat<f64>, x: &[f64]) -> Vec<f64> {
    assert_eq!(m.cols(), x.len(), "matvec dimension mismatch");
    let mut y = vec![0.0; m.rows()];
    sprs::prod::mul_acc_mat_vec_csr(m.view(), x, &mut y);
    y
}

/// Resolves face lattice indices (including one layer of ghosts) into affine
/// samples of the velocity unknowns.
pub(crate) struct FaceSampler<'a> {
    grid: &'a GridSpec,
    layout: &'a VelocityLayout,
    profiles: &'a BoundaryProfiles,
}

impl<'a> FaceSampler<'a> {
    pub fn new(
        grid: &'a GridSpec,
        layout: &'a VelocityLayout,
        profiles: &'a BoundaryProfiles,
    ) -> Self {
        Self {
            grid,
            layout,
            profiles,
        }
    }

    fn clamp_y(&self, y: f64) -> f64 {
        let (y0, h) = (self.grid.origin.1, self.grid.extent().1);
        y.clamp(y0, y0 + h)
    }

    fn clamp_x(&self, x: f64) -> f64 {
        let (x0, w) = (self.grid.origin.0, self.grid.extent().0);
        x.clamp(x0, x0 + w)
    }

    /// x-velocity at x-face lattice position (i, j); i in -1..=nx+1,
    /// j in -1..=ny.
    pub fn x_face(&self, i: isize, j: isize) -> AffineSample {
        let nx = self.grid.nx as isize;
        let ny = self.grid.ny as isize;
        debug_assert!((-1..=nx + 1).contains(&i) && (-1..=ny).contains(&j));

        // Ghost columns beyond the lattice exist only next to outflow edges;
        // zero normal gradient copies the boundary unknown.
        if i < 0 {
            debug_assert_eq!(self.profiles.west.kind(), EdgeKind::Outflow);
            return self.x_face(0, j);
        }
        if i > nx {
            debug_assert_eq!(self.profiles.east.kind(), EdgeKind::Outflow);
            return self.x_face(nx, j);
        }
        // Dirichlet boundary columns carry the prescribed normal velocity.
        // Corner ghosts clamp the along-edge coordinate to the edge extent.
        if i == 0 && self.profiles.west.kind() == EdgeKind::Dirichlet {
            let y = self.clamp_y(self.grid.origin.1 + (j as f64 + 0.5) * self.grid.hy);
            return AffineSample::constant(self.profiles.west.velocity_at(y).0);
        }
        if i == nx && self.profiles.east.kind() == EdgeKind::Dirichlet {
            let y = self.clamp_y(self.grid.origin.1 + (j as f64 + 0.5) * self.grid.hy);
            return AffineSample::constant(self.profiles.east.velocity_at(y).0);
        }
        // Ghost rows below/above the lattice: reflect (Dirichlet) or copy
        // (outflow) about the horizontal edge.
        if j < 0 {
            let inner = self.x_face(i, 0);
            return match self.profiles.south.kind() {
                EdgeKind::Dirichlet => {
                    let x = self.clamp_x(self.grid.origin.0 + i as f64 * self.grid.hx);
                    inner.reflect(self.profiles.south.velocity_at(x).0)
                }
                EdgeKind::Outflow => inner,
            };
        }
        if j >= ny {
            let inner = self.x_face(i, ny - 1);
            return match self.profiles.north.kind() {
                EdgeKind::Dirichlet => {
                    let x = self.clamp_x(self.grid.origin.0 + i as f64 * self.grid.hx);
                    inner.reflect(self.profiles.north.velocity_at(x).0)
                }
                EdgeKind::Outflow => inner,
            };
        }
        let k = self
            .layout
            .x_unknown(i as usize, j as usize)
            .expect("in-lattice x-face must be an unknown here");
        AffineSample::dof(k)
    }

    /// y-velocity at y-face lattice position (i, j); i in -1..=nx,
    /// j in -1..=ny+1.
    pub fn y_face(&self, i: isize, j: isize) -> AffineSample {
        let nx = self.grid.nx as isize;
        let ny = self.grid.ny as isize;
        debug_assert!((-1..=nx).contains(&i) && (-1..=ny + 1).contains(&j));

        if j < 0 {
            debug_assert_eq!(self.profiles.south.kind(), EdgeKind::Outflow);
            return self.y_face(i, 0);
        }
        if j > ny {
            debug_assert_eq!(self.profiles.north.kind(), EdgeKind::Outflow);
            return self.y_face(i, ny);
        }
        if j == 0 && self.profiles.south.kind() == EdgeKind::Dirichlet {
            let x = self.clamp_x(self.grid.origin.0 + (i as f64 + 0.5) * self.grid.hx);
            return AffineSample::constant(self.profiles.south.velocity_at(x).1);
        }
        if j == ny && self.profiles.north.kind() == EdgeKind::Dirichlet {
            let x = self.clamp_x(self.grid.origin.0 + (i as f64 + 0.5) * self.grid.hx);
            return AffineSample::constant(self.profiles.north.velocity_at(x).1);
        }
        if i < 0 {
            let inner = self.y_face(0, j);
            return match self.profiles.west.kind() {
                EdgeKind::Dirichlet => {
                    let y = self.clamp_y(self.grid.origin.1 + j as f64 * self.grid.hy);
                    inner.reflect(self.profiles.west.velocity_at(y).1)
                }
                EdgeKind::Outflow => inner,
            };
        }
        if i >= nx {
            let inner = self.y_face(nx - 1, j);
            return match self.profiles.east.kind() {
                EdgeKind::Dirichlet => {
                    let y = self.clamp_y(self.grid.origin.1 + j as f64 * self.grid.hy);
                    inner.reflect(self.profiles.east.velocity_at(y).1)
                }
                EdgeKind::Outflow => inner,
            };
        }
        let k = self
            .layout
            .y_unknown(i as usize, j as usize)
            .expect("in-lattice y-face must be an unknown here");
        AffineSample::dof(k)
    }
}

/// Assemble the discrete operators for a grid and uniform per-edge boundary
/// conditions.
pub fn build_operators(
    grid: &GridSpec,
    bc: &DomainBoundaryConditions,
) -> Result<FluidOperators> {
    build_operators_profiled(grid, bc.resolve())
}

/// Assemble operators from fully resolved (possibly spatially varying)
/// boundary profiles.
pub fn build_operators_profiled(
    grid: &GridSpec,
    profiles: BoundaryProfiles,
) -> Result<FluidOperators> {
    if grid.nx < 3 || grid.ny < 3 {
        return Err(Error::GridTooSmall {
            nx: grid.nx,
            ny: grid.ny,
        });
    }
    let layout = VelocityLayout::new(grid, &profiles);
    let n_u = layout.n_u();
    let n_f = grid.n_cells();
    let sampler = FaceSampler::new(grid, &layout, &profiles);

    let inv_hx2 = 1.0 / (grid.hx * grid.hx);
    let inv_hy2 = 1.0 / (grid.hy * grid.hy);

    // Laplacian + bc_L
    let mut l = TriMat::new((n_u, n_u));
    let mut bc_l = vec![0.0; n_u];
    let push = |tri: &mut TriMat<f64>, bc: &mut [f64], row: usize, s: AffineSample, coef: f64| {
        if let Some(k) = s.dof {
            tri.add_triplet(row, k, coef * s.w);
        }
        bc[row] += coef * s.c;
    };
    for (k, is_x, i, j) in layout.iter() {
        let (i, j) = (i as isize, j as isize);
        if is_x {
            push(&mut l, &mut bc_l, k, sampler.x_face(i - 1, j), inv_hx2);
            push(&mut l, &mut bc_l, k, sampler.x_face(i + 1, j), inv_hx2);
            push(&mut l, &mut bc_l, k, sampler.x_face(i, j - 1), inv_hy2);
            push(&mut l, &mut bc_l, k, sampler.x_face(i, j + 1), inv_hy2);
        } else {
            push(&mut l, &mut bc_l, k, sampler.y_face(i - 1, j), inv_hx2);
            push(&mut l, &mut bc_l, k, sampler.y_face(i + 1, j), inv_hx2);
            push(&mut l, &mut bc_l, k, sampler.y_face(i, j - 1), inv_hy2);
            push(&mut l, &mut bc_l, k, sampler.y_face(i, j + 1), inv_hy2);
        }
        l.add_triplet(k, k, -2.0 * (inv_hx2 + inv_hy2));
    }

    // Pressure gradient. Ghost pressure beyond an outflow edge is zero, so
    // boundary-face rows keep only their interior cell.
    let mut g = TriMat::new((n_u, n_f));
    for (k, is_x, i, j) in layout.iter() {
        if is_x {
            if i >= 1 {
                g.add_triplet(k, grid.cell_index(i - 1, j), -1.0 / grid.hx);
            }
            if i <= grid.nx - 1 {
                g.add_triplet(k, grid.cell_index(i, j), 1.0 / grid.hx);
            }
        } else {
            if j >= 1 {
                g.add_triplet(k, grid.cell_index(i, j - 1), -1.0 / grid.hy);
            }
            if j <= grid.ny - 1 {
                g.add_triplet(k, grid.cell_index(i, j), 1.0 / grid.hy);
            }
        }
    }

    // Divergence + bc_D, assembled from per-cell flux balances.
    let mut d = TriMat::new((n_f, n_u));
    let mut bc_d = vec![0.0; n_f];
    for j in 0..grid.ny {
        for i in 0..grid.nx {
            let row = grid.cell_index(i, j);
            let (i, j) = (i as isize, j as isize);
            push(&mut d, &mut bc_d, row, sampler.x_face(i + 1, j), 1.0 / grid.hx);
            push(&mut d, &mut bc_d, row, sampler.x_face(i, j), -1.0 / grid.hx);
            push(&mut d, &mut bc_d, row, sampler.y_face(i, j + 1), 1.0 / grid.hy);
            push(&mut d, &mut bc_d, row, sampler.y_face(i, j), -1.0 / grid.hy);
        }
    }

    Ok(FluidOperators {
        grid: *grid,
        layout,
        profiles,
        l: l.to_csr(),
        g: g.to_csr(),
        d: d.to_csr(),
        bc_l,
        bc_d,
    })
}

/// Average of two samples, for face-centered interpolation.
#[derive(Debug, Clone, Copy)]
struct FacePair(AffineSample, AffineSample);

impl FacePair {
    #[inline]
    fn eval(&self, u: &[f64]) -> f64 {
        0.5 * (self.0.eval(u) + self.1.eval(u))
    }

    /// Push `outer * d(self)/du` into the Jacobian row.
    fn push_grad(&self, tri: &mut TriMat<f64>, row: usize, outer: f64) {
        for s in [self.0, self.1] {
            if let Some(k) = s.dof {
                tri.add_triplet(row, k, outer * 0.5 * s.w);
            }
        }
    }
}

/// Gather the interpolated face pairs entering the convection stencil of one
/// velocity unknown.
struct ConvectionStencil {
    // d/dx term: squared (x-rows) or u*v product (y-rows)
    a_east: FacePair,
    b_east: FacePair,
    a_west: FacePair,
    b_west: FacePair,
    // d/dy term
    a_north: FacePair,
    b_north: FacePair,
    a_south: FacePair,
    b_south: FacePair,
}

fn convection_stencil(s: &FaceSampler, is_x: bool, i: isize, j: isize) -> ConvectionStencil {
    if is_x {
        // N_x = d(u u)/dx + d(u v)/dy at x-face (i, j)
        let u_east = FacePair(s.x_face(i, j), s.x_face(i + 1, j));
        let u_west = FacePair(s.x_face(i - 1, j), s.x_face(i, j));
        let u_north = FacePair(s.x_face(i, j), s.x_face(i, j + 1));
        let u_south = FacePair(s.x_face(i, j - 1), s.x_face(i, j));
        let v_north = FacePair(s.y_face(i - 1, j + 1), s.y_face(i, j + 1));
        let v_south = FacePair(s.y_face(i - 1, j), s.y_face(i, j));
        ConvectionStencil {
            a_east: u_east,
            b_east: u_east,
            a_west: u_west,
            b_west: u_west,
            a_north: u_north,
            b_north: v_north,
            a_south: u_south,
            b_south: v_south,
        }
    } else {
        // N_y = d(u v)/dx + d(v v)/dy at y-face (i, j)
        let u_east = FacePair(s.x_face(i + 1, j - 1), s.x_face(i + 1, j));
        let u_west = FacePair(s.x_face(i, j - 1), s.x_face(i, j));
        let v_east = FacePair(s.y_face(i, j), s.y_face(i + 1, j));
        let v_west = FacePair(s.y_face(i - 1, j), s.y_face(i, j));
        let v_north = FacePair(s.y_face(i, j), s.y_face(i, j + 1));
        let v_south = FacePair(s.y_face(i, j - 1), s.y_face(i, j));
        ConvectionStencil {
            a_east: u_east,
            b_east: v_east,
            a_west: u_west,
            b_west: v_west,
            a_north: v_north,
            b_north: v_north,
            a_south: v_south,
            b_south: v_south,
        }
    }
}

/// Discrete nonlinear convection `N(u)` in divergence form, second-order
/// central, including boundary closures. Quadratic in `u`.
pub fn convect(u: &[f64], ops: &FluidOperators) -> Vec<f64> {
    let layout = &ops.layout;
    assert_eq!(u.len(), layout.n_u(), "convect: velocity length mismatch");
    let sampler = FaceSampler::new(&ops.grid, layout, &ops.profiles);
    let (hx, hy) = (ops.grid.hx, ops.grid.hy);

    let mut n = vec![0.0; layout.n_u()];
    for (k, is_x, i, j) in layout.iter() {
        let st = convection_stencil(&sampler, is_x, i as isize, j as isize);
        let flux_x = st.a_east.eval(u) * st.b_east.eval(u) - st.a_west.eval(u) * st.b_west.eval(u);
        let flux_y =
            st.a_north.eval(u) * st.b_north.eval(u) - st.a_south.eval(u) * st.b_south.eval(u);
        n[k] = flux_x / hx + flux_y / hy;
    }
    n
}

/// Analytic Jacobian `dN/du` at `u`; linear in `u`. The sparsity pattern is
/// fixed by the layout (structural zeros are kept), so repeated assemblies
/// share their pattern.
pub fn convect_jacobian(u: &[f64], ops: &FluidOperators) -> CsMat<f64> {
    let layout = &ops.layout;
    assert_eq!(u.len(), layout.n_u(), "convect_jacobian: length mismatch");
    let sampler = FaceSampler::new(&ops.grid, layout, &ops.profiles);
    let (hx, hy) = (ops.grid.hx, ops.grid.hy);

    let mut tri = TriMat::new((layout.n_u(), layout.n_u()));
    for (k, is_x, i, j) in layout.iter() {
        let st = convection_stencil(&sampler, is_x, i as isize, j as isize);
        // d(a b) = a db + b da for each of the four flux products
        let pairs = [
            (st.a_east, st.b_east, 1.0 / hx),
            (st.a_west, st.b_west, -1.0 / hx),
            (st.a_north, st.b_north, 1.0 / hy),
            (st.a_south, st.b_south, -1.0 / hy),
        ];
        for (a, b, coef) in pairs {
            a.push_grad(&mut tri, k, coef * b.eval(u));
            b.push_grad(&mut tri, k, coef * a.eval(u));
        }
    }
    tri.to_csr()
}

/// Discrete vorticity at all grid corners, including boundary corners closed
/// with the same ghost rules as the operators. Corner (i, j) sits at
/// `origin + (i * hx, j * hy)` for `i in 0..=nx`, `j in 0..=ny`.
#[derive(Debug, Clone)]
pub struct VorticityField {
    pub nx: usize,
    pub ny: usize,
    pub omega: Vec<f64>,
}

impl VorticityField {
    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.omega[j * (self.nx + 1) + i]
    }
}

/// Discrete curl `omega = dv/dx - du/dy` at cell corners.
pub fn vorticity_field(u: &[f64], ops: &FluidOperators) -> VorticityField {
    let grid = &ops.grid;
    let sampler = FaceSampler::new(grid, &ops.layout, &ops.profiles);
    let (nx, ny) = (grid.nx, grid.ny);
    let mut omega = vec![0.0; (nx + 1) * (ny + 1)];
    for j in 0..=ny {
        for i in 0..=nx {
            let (ii, jj) = (i as isize, j as isize);
            let dv_dx =
                (sampler.y_face(ii, jj).eval(u) - sampler.y_face(ii - 1, jj).eval(u)) / grid.hx;
            let du_dy =
                (sampler.x_face(ii, jj).eval(u) - sampler.x_face(ii, jj - 1).eval(u)) / grid.hy;
            omega[j * (nx + 1) + i] = dv_dx - du_dy;
        }
    }
    VorticityField { nx, ny, omega }
}

/// Velocity and pressure collocated at cell centers (for export), with
/// vorticity averaged from the surrounding corners.
pub fn collocate_cell_centered(
    u: &[f64],
    p: &[f64],
    ops: &FluidOperators,
) -> Vec<(usize, usize, f64, f64, f64, f64)> {
    let grid = &ops.grid;
    let sampler = FaceSampler::new(grid, &ops.layout, &ops.profiles);
    let vort = vorticity_field(u, ops);
    let mut rows = Vec::with_capacity(grid.n_cells());
    for j in 0..grid.ny {
        for i in 0..grid.nx {
            let (ii, jj) = (i as isize, j as isize);
            let ux = 0.5 * (sampler.x_face(ii, jj).eval(u) + sampler.x_face(ii + 1, jj).eval(u));
            let uy = 0.5 * (sampler.y_face(ii, jj).eval(u) + sampler.y_face(ii, jj + 1).eval(u));
            let om = 0.25
                * (vort.at(i, j) + vort.at(i + 1, j) + vort.at(i, j + 1) + vort.at(i + 1, j + 1));
            rows.push((i, j, ux, uy, p[grid.cell_index(i, j)], om));
        }
    }
    rows
}
