//! Rigid cylinder boundary.

use super::{check_param_len, BoundaryJacobian, ParametricBody, ShapeParams};
use crate::error::{Error, Result};
use crate::grid::GridSpec;
use crate::ib::BoundaryMesh;

/// Uniformly spaced boundary nodes on a circle, zero velocities. The node
/// count is `round(pi d / target_spacing)` and the stored spacing is the
/// exact circumference division.
pub fn cylinder_boundary(
    params: &ShapeParams,
    grid: &GridSpec,
    target_spacing: f64,
) -> Result<BoundaryMesh> {
    let ShapeParams::Cylinder { center, diameter } = params else {
        return Err(Error::InvalidConfig(
            "cylinder_boundary needs cylinder shape parameters".into(),
        ));
    };
    params.validate()?;
    let margin = 2.0 * grid.max_spacing();
    let r = 0.5 * diameter;
    let (w, h) = grid.extent();
    let (x0, y0) = grid.origin;
    if center.0 - r < x0 + margin
        || center.0 + r > x0 + w - margin
        || center.1 - r < y0 + margin
        || center.1 + r > y0 + h - margin
    {
        return Err(Error::BodyTooLargeForDomain);
    }
    Ok(circle_mesh(*center, *diameter, node_count(*diameter, target_spacing)))
}

fn node_count(diameter: f64, target_spacing: f64) -> usize {
    (std::f64::consts::PI * diameter / target_spacing).round().max(4.0) as usize
}

fn circle_mesh(center: (f64, f64), diameter: f64, n: usize) -> BoundaryMesh {
    let r = 0.5 * diameter;
    let positions = (0..n)
        .map(|k| {
            let phi = std::f64::consts::TAU * k as f64 / n as f64;
            (center.0 + r * phi.cos(), center.1 + r * phi.sin())
        })
        .collect();
    BoundaryMesh::new(
        positions,
        vec![(0.0, 0.0); n],
        std::f64::consts::PI * diameter / n as f64,
    )
}

/// A stationary cylinder with an optional diameter parameter. The node count
/// is frozen at construction so the mesh varies smoothly with the parameter.
#[derive(Debug, Clone)]
pub struct CylinderBody {
    pub center: (f64, f64),
    pub diameter: f64,
    n_nodes: usize,
    /// When set, `theta = [diameter]`; otherwise `theta` is empty.
    diameter_is_parameter: bool,
}

impl CylinderBody {
    pub fn new(center: (f64, f64), diameter: f64, target_spacing: f64) -> Self {
        Self {
            center,
            diameter,
            n_nodes: node_count(diameter, target_spacing),
            diameter_is_parameter: false,
        }
    }

    /// Treat the diameter as the single optimization parameter.
    pub fn with_diameter_parameter(mut self) -> Self {
        self.diameter_is_parameter = true;
        self
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    fn diameter_from(&self, theta: &[f64]) -> f64 {
        if self.diameter_is_parameter {
            theta[0]
        } else {
            self.diameter
        }
    }
}

impl ParametricBody for CylinderBody {
    fn n_params(&self) -> usize {
        usize::from(self.diameter_is_parameter)
    }

    fn mesh_at(&self, theta: &[f64], _t: f64) -> Result<BoundaryMesh> {
        check_param_len(self.n_params(), theta)?;
        let d = self.diameter_from(theta);
        if d <= 0.0 {
            return Err(Error::InvalidConfig(format!(
                "cylinder diameter must stay positive, got {d}"
            )));
        }
        Ok(circle_mesh(self.center, d, self.n_nodes))
    }

    fn boundary_jacobian(&self, theta: &[f64], _t: f64) -> Result<BoundaryJacobian> {
        check_param_len(self.n_params(), theta)?;
        let mut jac = BoundaryJacobian::zeros(self.n_params(), self.n_nodes);
        if self.diameter_is_parameter {
            for k in 0..self.n_nodes {
                let phi = std::f64::consts::TAU * k as f64 / self.n_nodes as f64;
                // node = center + (d/2)(cos, sin): derivative is the radial
                // unit vector halved
                jac.dpos[0][k] = (0.5 * phi.cos(), 0.5 * phi.sin());
            }
            jac.dspacing[0] = std::f64::consts::PI / self.n_nodes as f64;
        }
        Ok(jac)
    }
}
