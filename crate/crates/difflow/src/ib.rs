//! Immersed boundary coupling: Lagrangian boundary meshes, the regularized
//! delta interpolation matrix `E`, and boundary force extraction.
//!
//! `E` maps staggered fluid velocities to boundary-node velocities through a
//! tensor product of the 3-point smoothed delta of Roma et al., the standard
//! kernel for staggered finite-volume immersed boundaries. Rows come in an
//! x-block followed by a y-block; each row is a partition of unity over the
//! faces inside the 1.5-cell support.

use sprs::{CsMat, TriMat};

use crate::error::{Error, Result};
use crate::grid::GridSpec;
use crate::navier_stokes::FluidConfig;
use crate::operators::FluidOperators;

/// The 3-point smoothed discrete delta (support 1.5 cells).
#[derive(Debug, Clone, Copy, Default)]
pub struct DeltaKernel;

impl DeltaKernel {
    /// Support radius in cells.
    pub fn support(&self) -> f64 {
        1.5
    }

    /// Kernel weight at normalized offset `r`.
    pub fn value(&self, r: f64) -> f64 {
        let s = r.abs();
        if s <= 0.5 {
            (1.0 + (1.0 - 3.0 * s * s).sqrt()) / 3.0
        } else if s < 1.5 {
            let q = 1.0 - s;
            (5.0 - 3.0 * s - (1.0 - 3.0 * q * q).sqrt()) / 6.0
        } else {
            0.0
        }
    }

    /// Analytic derivative d'(r); continuous across the breakpoints.
    pub fn derivative(&self, r: f64) -> f64 {
        let s = r.abs();
        let sign = if r < 0.0 { -1.0 } else { 1.0 };
        if s <= 0.5 {
            -r / (1.0 - 3.0 * s * s).sqrt()
        } else if s < 1.5 {
            let q = 1.0 - s;
            sign * (-3.0 - 3.0 * q / (1.0 - 3.0 * q * q).sqrt()) / 6.0
        } else {
            0.0
        }
    }
}

/// Lagrangian body boundary: node positions and velocities plus the mean
/// arc-length spacing between adjacent nodes. All nondimensional.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryMesh {
    pub positions: Vec<(f64, f64)>,
    pub velocities: Vec<(f64, f64)>,
    /// Arc-length spacing `s` between adjacent nodes.
    pub spacing: f64,
}

impl BoundaryMesh {
    pub fn new(positions: Vec<(f64, f64)>, velocities: Vec<(f64, f64)>, spacing: f64) -> Self {
        assert_eq!(positions.len(), velocities.len());
        assert!(positions.is_empty() || spacing > 0.0, "spacing must be positive");
        Self {
            positions,
            velocities,
            spacing,
        }
    }

    /// Mesh with no nodes: the coupled step reduces to the plain fluid step.
    pub fn empty() -> Self {
        Self {
            positions: Vec::new(),
            velocities: Vec::new(),
            spacing: 1.0,
        }
    }

    pub fn n_nodes(&self) -> usize {
        self.positions.len()
    }

    /// Number of constraint rows: one per node and velocity component.
    pub fn n_b(&self) -> usize {
        2 * self.positions.len()
    }

    /// Boundary velocities as the constraint right-hand side
    /// `[x-block; y-block]`.
    pub fn velocity_vector(&self) -> Vec<f64> {
        let n = self.n_nodes();
        let mut v = Vec::with_capacity(2 * n);
        v.extend(self.velocities.iter().map(|v| v.0));
        v.extend(self.velocities.iter().map(|v| v.1));
        v
    }
}

/// Visit the interpolation weights (and their position derivatives) of one
/// node against one velocity component's sample lattice.
///
/// `is_x` selects the component; the callback receives
/// `(dof, w, dw_dx, dw_dy)` for every nonzero-weight sample. Returns an error
/// if a nonzero weight falls on a face that is not an unknown.
fn for_each_weight(
    ops: &FluidOperators,
    kernel: &DeltaKernel,
    node: (f64, f64),
    is_x: bool,
    mut visit: impl FnMut(usize, f64, f64, f64),
) -> Result<()> {
    let grid = &ops.grid;
    let (x0, y0) = grid.origin;
    // fractional lattice coordinates of the node in this component's grid
    let (rx, ry) = if is_x {
        ((node.0 - x0) / grid.hx, (node.1 - y0) / grid.hy - 0.5)
    } else {
        ((node.0 - x0) / grid.hx - 0.5, (node.1 - y0) / grid.hy)
    };
    let i0 = rx.floor() as isize;
    let j0 = ry.floor() as isize;
    for j in (j0 - 1)..=(j0 + 2) {
        let wy = kernel.value(j as f64 - ry);
        if wy == 0.0 {
            continue;
        }
        for i in (i0 - 1)..=(i0 + 2) {
            let wx = kernel.value(i as f64 - rx);
            if wx == 0.0 {
                continue;
            }
            let dof = if i >= 0 && j >= 0 {
                if is_x {
                    if i as usize <= grid.nx && (j as usize) < grid.ny {
                        ops.layout.x_unknown(i as usize, j as usize)
                    } else {
                        None
                    }
                } else if (i as usize) < grid.nx && j as usize <= grid.ny {
                    ops.layout.y_unknown(i as usize, j as usize)
                } else {
                    None
                }
            } else {
                None
            };
            let Some(dof) = dof else {
                return Err(Error::NodeOutsideDomain {
                    x: node.0,
                    y: node.1,
                });
            };
            let dwx = kernel.derivative(i as f64 - rx) * (-1.0 / grid.hx);
            let dwy = kernel.derivative(j as f64 - ry) * (-1.0 / grid.hy);
            visit(dof, wx * wy, dwx * wy, wx * dwy);
        }
    }
    Ok(())
}

/// Assemble the interpolation matrix `E` (`n_b x n_u`): block row `n` maps
/// fluid x-velocities to node `n`'s x-velocity, block row `n_nodes + n` the
/// y-component. Each row sums to one.
pub fn interpolation_matrix(
    mesh: &BoundaryMesh,
    ops: &FluidOperators,
    kernel: &DeltaKernel,
) -> Result<CsMat<f64>> {
    let n = mesh.n_nodes();
    let mut tri = TriMat::new((2 * n, ops.n_u()));
    for (row, &pos) in mesh.positions.iter().enumerate() {
        for_each_weight(ops, kernel, pos, true, |dof, w, _, _| {
            tri.add_triplet(row, dof, w);
        })?;
        for_each_weight(ops, kernel, pos, false, |dof, w, _, _| {
            tri.add_triplet(n + row, dof, w);
        })?;
    }
    Ok(tri.to_csr())
}

/// Directional derivative of `E u` with respect to node positions:
/// entry `r` is `d(E u)_r / d theta` for node motion `dpos[node] = d(x, y)/d theta`.
pub(crate) fn interp_position_derivative(
    mesh: &BoundaryMesh,
    ops: &FluidOperators,
    kernel: &DeltaKernel,
    u: &[f64],
    dpos: &[(f64, f64)],
) -> Result<Vec<f64>> {
    let n = mesh.n_nodes();
    let mut out = vec![0.0; 2 * n];
    for (row, &pos) in mesh.positions.iter().enumerate() {
        let (dx, dy) = dpos[row];
        let mut acc_x = 0.0;
        for_each_weight(ops, kernel, pos, true, |dof, _, dwx, dwy| {
            acc_x += (dwx * dx + dwy * dy) * u[dof];
        })?;
        out[row] = acc_x;
        let mut acc_y = 0.0;
        for_each_weight(ops, kernel, pos, false, |dof, _, dwx, dwy| {
            acc_y += (dwx * dx + dwy * dy) * u[dof];
        })?;
        out[n + row] = acc_y;
    }
    Ok(out)
}

/// Directional derivative of `E^T f` with respect to node positions,
/// materialized as a dense velocity-space vector.
pub(crate) fn spread_position_derivative(
    mesh: &BoundaryMesh,
    ops: &FluidOperators,
    kernel: &DeltaKernel,
    f_tilde: &[f64],
    dpos: &[(f64, f64)],
) -> Result<Vec<f64>> {
    let n = mesh.n_nodes();
    let mut out = vec![0.0; ops.n_u()];
    for (row, &pos) in mesh.positions.iter().enumerate() {
        let (dx, dy) = dpos[row];
        let fx = f_tilde[row];
        for_each_weight(ops, kernel, pos, true, |dof, _, dwx, dwy| {
            out[dof] += fx * (dwx * dx + dwy * dy);
        })?;
        let fy = f_tilde[n + row];
        for_each_weight(ops, kernel, pos, false, |dof, _, dwx, dwy| {
            out[dof] += fy * (dwx * dx + dwy * dy);
        })?;
    }
    Ok(out)
}

/// Physical per-node boundary force (per unit span) from the converged
/// no-slip dual: `f_b = -rho_phys u_ref^2 l_ref (hx hy / s) f_tilde`, returned
/// as `(x, y)` pairs. Integrating with [`net_force`] gives N/m.
pub fn boundary_forces(
    f_tilde: &[f64],
    cfg: &FluidConfig,
    grid: &GridSpec,
    mesh: &BoundaryMesh,
) -> Vec<(f64, f64)> {
    let n = mesh.n_nodes();
    assert_eq!(f_tilde.len(), 2 * n, "dual length mismatch");
    let scale = -cfg.force_scale() * grid.hx * grid.hy / mesh.spacing;
    (0..n)
        .map(|i| (scale * f_tilde[i], scale * f_tilde[n + i]))
        .collect()
}

/// Net force on the body: midpoint quadrature of per-node forces over the
/// boundary, `F = sum_i f_i s`.
pub fn net_force(forces: &[(f64, f64)], mesh: &BoundaryMesh) -> (f64, f64) {
    let mut f = (0.0, 0.0);
    for fi in forces {
        f.0 += fi.0 * mesh.spacing;
        f.1 += fi.1 * mesh.spacing;
    }
    f
}

/// Net nondimensional force `F = -hx hy sum(f_tilde)` per component; multiply
/// by `cfg.force_scale()` for N/m. The boundary spacing cancels between the
/// force density and the quadrature.
pub fn net_force_nondim(f_tilde: &[f64], grid: &GridSpec) -> (f64, f64) {
    let n = f_tilde.len() / 2;
    let area = grid.hx * grid.hy;
    let fx: f64 = f_tilde[..n].iter().sum();
    let fy: f64 = f_tilde[n..].iter().sum();
    (-area * fx, -area * fy)
}
