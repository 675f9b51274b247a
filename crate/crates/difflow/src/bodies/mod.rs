//! Parametric body geometries and kinematics.
//!
//! A [`ParametricBody`] produces a boundary mesh (positions, velocities,
//! spacing) for any parameter vector and time, plus the analytic Jacobians of
//! all three with respect to the parameters. Shipped bodies: a cylinder with
//! an optional diameter parameter, and a ten-link serial-chain tail whose
//! half-width profile is a cubic polynomial and whose gait is sinusoidal
//! (with an optional frequency parameter) or read from a joint-angle
//! trajectory file.

mod angle_file;
mod cylinder;
pub(crate) mod dual;
mod tail;

pub use angle_file::AngleTrajectory;
pub use cylinder::{cylinder_boundary, CylinderBody};
pub use tail::{
    chain_joints, default_taper_coefficients, gait_angles, reference_tail,
    tail_forward_kinematics, LinkChain, TailBody, TailParams,
};

use crate::error::{Error, Result};
use crate::ib::BoundaryMesh;

/// Shape parameter sets of the shipped bodies.
#[derive(Debug, Clone, PartialEq)]
pub enum ShapeParams {
    Cylinder {
        center: (f64, f64),
        diameter: f64,
    },
    /// Half-width profile `w(l) = c0 + c1 l + c2 l^2 + c3 l^3` over the
    /// normalized arc coordinate `l` in [0, 1].
    CubicProfile {
        coefficients: [f64; 4],
        /// Resolvability floor: `w(l) >= min_half_width` must hold on [0, 1].
        min_half_width: f64,
    },
}

impl ShapeParams {
    pub fn validate(&self) -> Result<()> {
        match self {
            ShapeParams::Cylinder { diameter, .. } => {
                if *diameter <= 0.0 {
                    return Err(Error::InvalidConfig(format!(
                        "cylinder diameter must be positive, got {diameter}"
                    )));
                }
            }
            ShapeParams::CubicProfile {
                coefficients,
                min_half_width,
            } => {
                if *min_half_width <= 0.0 {
                    return Err(Error::InvalidConfig(
                        "min_half_width must be positive".into(),
                    ));
                }
                if let Some(l) = cubic_floor_violation(coefficients, *min_half_width) {
                    return Err(Error::InvalidConfig(format!(
                        "half-width profile drops below the floor near l = {l:.3}"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// First sample point in [0, 1] where the cubic drops below `floor`, if any.
pub(crate) fn cubic_floor_violation(c: &[f64; 4], floor: f64) -> Option<f64> {
    const SAMPLES: usize = 200;
    (0..=SAMPLES).find_map(|k| {
        let l = k as f64 / SAMPLES as f64;
        let w = c[0] + l * (c[1] + l * (c[2] + l * c[3]));
        (w < floor).then_some(l)
    })
}

/// Sinusoidal gait: per-joint angle `a_j sin(2 pi f t + phi_j)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaitParams {
    pub frequency: f64,
    pub amplitudes: Vec<f64>,
    pub phases: Vec<f64>,
}

impl GaitParams {
    pub fn validate(&self) -> Result<()> {
        if self.frequency <= 0.0 {
            return Err(Error::InvalidConfig(format!(
                "gait frequency must be positive, got {}",
                self.frequency
            )));
        }
        if self.amplitudes.len() != self.phases.len() {
            return Err(Error::InvalidConfig(
                "gait amplitudes and phases must have equal length".into(),
            ));
        }
        if let Some(a) = self
            .amplitudes
            .iter()
            .find(|a| a.abs() >= std::f64::consts::FRAC_PI_2)
        {
            return Err(Error::InvalidConfig(format!(
                "joint amplitude {a} exceeds pi/2"
            )));
        }
        Ok(())
    }
}

/// Parameter Jacobians of a boundary mesh: per parameter, per node.
#[derive(Debug, Clone)]
pub struct BoundaryJacobian {
    /// d(position)/d(theta_m) as `dpos[m][node] = (dx, dy)`.
    pub dpos: Vec<Vec<(f64, f64)>>,
    /// d(velocity)/d(theta_m).
    pub dvel: Vec<Vec<(f64, f64)>>,
    /// d(spacing)/d(theta_m).
    pub dspacing: Vec<f64>,
}

impl BoundaryJacobian {
    pub fn zeros(n_params: usize, n_nodes: usize) -> Self {
        Self {
            dpos: vec![vec![(0.0, 0.0); n_nodes]; n_params],
            dvel: vec![vec![(0.0, 0.0); n_nodes]; n_params],
            dspacing: vec![0.0; n_params],
        }
    }
}

/// A body whose boundary state is a smooth function of a parameter vector
/// and time.
pub trait ParametricBody {
    fn n_params(&self) -> usize;

    /// Boundary mesh at parameter vector `theta` and time `t`. The node count
    /// is fixed by the body's construction, never by `theta` or `t`.
    fn mesh_at(&self, theta: &[f64], t: f64) -> Result<BoundaryMesh>;

    /// Analytic Jacobians of node positions, node velocities and spacing with
    /// respect to every entry of `theta`.
    fn boundary_jacobian(&self, theta: &[f64], t: f64) -> Result<BoundaryJacobian>;
}

pub(crate) fn check_param_len(expected: usize, theta: &[f64]) -> Result<()> {
    if theta.len() != expected {
        return Err(Error::DimensionMismatch {
            what: "body parameter vector",
            expected,
            got: theta.len(),
        });
    }
    Ok(())
}
