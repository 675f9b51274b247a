//! Ten-link serial-chain tail: forward kinematics, closed boundary outline,
//! sinusoidal gait, and parameter Jacobians.
//!
//! The chain hangs off a fixed base. Link half-widths are given at the
//! joints and interpolated linearly along each link; the terminal link (the
//! fin) tapers its joint width to a sharp tip. The outline walks the left
//! side base to tip, returns along the right side and closes across the
//! base. Segment sample counts are frozen at construction so node positions
//! are smooth functions of the parameters and of time.

use super::angle_file::AngleTrajectory;
use super::dual::{Dual, Jet, Jet2};
use super::{check_param_len, cubic_floor_violation, BoundaryJacobian, GaitParams, ParametricBody};
use crate::error::{Error, Result};
use crate::ib::BoundaryMesh;

/// Serial chain geometry: link lengths, per-joint half-widths, sampling
/// density of the boundary outline.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkChain {
    /// Base joint position (fixed in space).
    pub base: (f64, f64),
    /// Orientation of the undeflected chain.
    pub base_angle: f64,
    /// Link lengths, base to tip. The last link is the fin.
    pub lengths: Vec<f64>,
    /// Half-widths at joints `0..n_links`; the fin tapers its joint width to
    /// zero at the tip.
    pub joint_half_widths: Vec<f64>,
    /// Target arc-length spacing of boundary nodes.
    pub target_spacing: f64,
}

impl LinkChain {
    pub fn n_links(&self) -> usize {
        self.lengths.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.lengths.is_empty() {
            return Err(Error::InvalidConfig("chain needs at least one link".into()));
        }
        if self.lengths.iter().any(|l| *l <= 0.0) {
            return Err(Error::InvalidConfig("link lengths must be positive".into()));
        }
        if self.joint_half_widths.len() != self.lengths.len() {
            return Err(Error::InvalidConfig(format!(
                "need one half-width per joint: {} links, {} widths",
                self.lengths.len(),
                self.joint_half_widths.len()
            )));
        }
        if self.target_spacing <= 0.0 {
            return Err(Error::InvalidConfig("target spacing must be positive".into()));
        }
        Ok(())
    }

    /// Normalized arc coordinate of each joint over the body (fin excluded):
    /// joint 0 at 0, the fin joint at 1.
    pub(crate) fn body_arc_coordinates(&self) -> Vec<f64> {
        let n = self.n_links();
        let body_len: f64 = self.lengths[..n - 1].iter().sum();
        let mut acc = 0.0;
        (0..n)
            .map(|j| {
                let l = acc / body_len;
                if j < n - 1 {
                    acc += self.lengths[j];
                }
                l
            })
            .collect()
    }
}

/// Joint angles and rates of the sinusoidal gait at time `t`:
/// `theta_j = a_j sin(2 pi f t + phi_j)` with exact analytic rates.
pub fn gait_angles(gait: &GaitParams, t: f64) -> (Vec<f64>, Vec<f64>) {
    let omega = std::f64::consts::TAU * gait.frequency;
    let angles = gait
        .amplitudes
        .iter()
        .zip(&gait.phases)
        .map(|(a, phi)| a * (omega * t + phi).sin())
        .collect();
    let rates = gait
        .amplitudes
        .iter()
        .zip(&gait.phases)
        .map(|(a, phi)| a * omega * (omega * t + phi).cos())
        .collect();
    (angles, rates)
}

/// Positions of the chain joints (base through tip) for given joint angles.
pub fn chain_joints(chain: &LinkChain, joint_angles: &[f64]) -> Vec<(f64, f64)> {
    let mut joints = Vec::with_capacity(chain.n_links() + 1);
    let mut p = chain.base;
    let mut theta = chain.base_angle;
    joints.push(p);
    for (l, a) in chain.lengths.iter().zip(joint_angles) {
        theta += a;
        p = (p.0 + l * theta.cos(), p.1 + l * theta.sin());
        joints.push(p);
    }
    joints
}

/// Boundary mesh of the chain for prescribed joint angles and rates. Node
/// velocities come from the kinematic Jacobian applied to the rates. The
/// outline sampling is fixed by the chain's straight reference configuration,
/// so repeated calls at nearby times yield consistent node sets.
pub fn tail_forward_kinematics(
    chain: &LinkChain,
    joint_angles: &[f64],
    joint_rates: &[f64],
) -> Result<BoundaryMesh> {
    chain.validate()?;
    let n = chain.n_links();
    if joint_angles.len() != n {
        return Err(Error::DimensionMismatch {
            what: "joint angles",
            expected: n,
            got: joint_angles.len(),
        });
    }
    if joint_rates.len() != n {
        return Err(Error::DimensionMismatch {
            what: "joint rates",
            expected: n,
            got: joint_rates.len(),
        });
    }
    let widths: Vec<Dual> = chain
        .joint_half_widths
        .iter()
        .map(|w| Dual::constant(*w))
        .collect();
    let jets: Vec<Jet> = joint_angles
        .iter()
        .zip(joint_rates)
        .map(|(a, r)| Jet {
            x: Dual::constant(*a),
            v: Dual::constant(*r),
        })
        .collect();
    let tip = 0.5 * chain.target_spacing;
    let sampling = outline_sampling(chain, &chain.joint_half_widths, tip);
    Ok(outline_mesh(chain, &widths, tip, &jets, &sampling, 0).mesh)
}

/// Which entries of the optimization vector the tail exposes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TailParams {
    /// No parameters (prescribed shape and motion).
    None,
    /// `theta = [c0, c1, c2, c3]`, the half-width cubic.
    ShapeOnly,
    /// `theta = [f]`, the gait frequency.
    FrequencyOnly,
    /// `theta = [c0, c1, c2, c3, f]`.
    ShapeAndFrequency,
}

impl TailParams {
    fn count(self) -> usize {
        match self {
            TailParams::None => 0,
            TailParams::ShapeOnly => 4,
            TailParams::FrequencyOnly => 1,
            TailParams::ShapeAndFrequency => 5,
        }
    }

    fn has_shape(self) -> bool {
        matches!(self, TailParams::ShapeOnly | TailParams::ShapeAndFrequency)
    }

    fn frequency_slot(self) -> Option<usize> {
        match self {
            TailParams::FrequencyOnly => Some(0),
            TailParams::ShapeAndFrequency => Some(4),
            _ => None,
        }
    }
}

#[derive(Debug, Clone)]
enum AngleSource {
    Gait(GaitParams),
    File(AngleTrajectory),
}

/// The parametric fish tail: cubic half-width profile over a ten-link chain,
/// driven by a sinusoidal gait or a recorded joint-angle trajectory.
#[derive(Debug, Clone)]
pub struct TailBody {
    chain: LinkChain,
    angles: AngleSource,
    params: TailParams,
    /// Default cubic coefficients, used for parameter slots not in `theta`.
    coefficients: [f64; 4],
    min_half_width: f64,
    sampling: OutlineSampling,
    body_arc: Vec<f64>,
}

impl TailBody {
    /// Gait-driven tail. `coefficients` define the half-width cubic over the
    /// body; the chain's stored widths are derived from it.
    pub fn new(
        mut chain: LinkChain,
        gait: GaitParams,
        coefficients: [f64; 4],
        min_half_width: f64,
        params: TailParams,
    ) -> Result<Self> {
        gait.validate()?;
        if gait.amplitudes.len() != chain.n_links() {
            return Err(Error::DimensionMismatch {
                what: "gait joints",
                expected: chain.n_links(),
                got: gait.amplitudes.len(),
            });
        }
        let body_arc = {
            chain.joint_half_widths = vec![0.0; chain.n_links()];
            let arc = chain.body_arc_coordinates();
            chain.joint_half_widths = arc
                .iter()
                .map(|l| eval_cubic(&coefficients, *l))
                .collect();
            arc
        };
        chain.validate()?;
        if let Some(l) = cubic_floor_violation(&coefficients, min_half_width) {
            return Err(Error::InvalidConfig(format!(
                "default half-width cubic violates the floor near l = {l:.3}"
            )));
        }
        let sampling = outline_sampling(&chain, &chain.joint_half_widths, min_half_width);
        Ok(Self {
            chain,
            angles: AngleSource::Gait(gait),
            params,
            coefficients,
            min_half_width,
            sampling,
            body_arc,
        })
    }

    /// Tail driven by a recorded joint-angle trajectory (no parameters).
    pub fn from_trajectory(
        chain: LinkChain,
        trajectory: AngleTrajectory,
        coefficients: [f64; 4],
        min_half_width: f64,
    ) -> Result<Self> {
        if trajectory.n_joints() != chain.n_links() {
            return Err(Error::DimensionMismatch {
                what: "trajectory joints",
                expected: chain.n_links(),
                got: trajectory.n_joints(),
            });
        }
        let mut body = Self::new(
            chain,
            GaitParams {
                frequency: 1.0,
                amplitudes: vec![0.0; trajectory.n_joints()],
                phases: vec![0.0; trajectory.n_joints()],
            },
            coefficients,
            min_half_width,
            TailParams::None,
        )?;
        body.angles = AngleSource::File(trajectory);
        Ok(body)
    }

    pub fn chain(&self) -> &LinkChain {
        &self.chain
    }

    pub fn params_mode(&self) -> TailParams {
        self.params
    }

    pub fn min_half_width(&self) -> f64 {
        self.min_half_width
    }

    /// Default parameter vector for this body's mode.
    pub fn default_theta(&self) -> Vec<f64> {
        let freq = match &self.angles {
            AngleSource::Gait(g) => g.frequency,
            AngleSource::File(_) => 1.0,
        };
        match self.params {
            TailParams::None => Vec::new(),
            TailParams::ShapeOnly => self.coefficients.to_vec(),
            TailParams::FrequencyOnly => vec![freq],
            TailParams::ShapeAndFrequency => {
                let mut t = self.coefficients.to_vec();
                t.push(freq);
                t
            }
        }
    }

    fn resolve(&self, theta: &[f64]) -> Result<([Dual; 4], Dual)> {
        check_param_len(self.params.count(), theta)?;
        let n = self.params.count();
        let coeffs: [Dual; 4] = if self.params.has_shape() {
            std::array::from_fn(|i| Dual::var(theta[i], n, i))
        } else {
            std::array::from_fn(|i| Dual::constant(self.coefficients[i]))
        };
        let base_freq = match &self.angles {
            AngleSource::Gait(g) => g.frequency,
            AngleSource::File(_) => 1.0,
        };
        let freq = match self.params.frequency_slot() {
            Some(slot) => Dual::var(theta[slot], n, slot),
            None => Dual::constant(base_freq),
        };
        if self.params.has_shape() {
            let c = [theta[0], theta[1], theta[2], theta[3]];
            if let Some(l) = cubic_floor_violation(&c, self.min_half_width) {
                return Err(Error::InvalidConfig(format!(
                    "half-width profile drops below the floor near l = {l:.3}"
                )));
            }
        }
        if self.params.frequency_slot().is_some() {
            let f = theta[self.params.frequency_slot().unwrap()];
            if f <= 0.0 {
                return Err(Error::InvalidConfig(format!(
                    "gait frequency must stay positive, got {f}"
                )));
            }
        }
        Ok((coeffs, freq))
    }

    fn joint_jets(&self, freq: &Dual, t: f64) -> Vec<Jet> {
        match &self.angles {
            AngleSource::Gait(g) => {
                let omega = freq.scale(std::f64::consts::TAU);
                g.amplitudes
                    .iter()
                    .zip(&g.phases)
                    .map(|(a, phi)| {
                        // phase = omega t + phi as a time jet with parameter grads
                        let phase = Jet {
                            x: Dual {
                                v: omega.v * t + phi,
                                d: omega.d.iter().map(|g| g * t).collect(),
                            },
                            v: omega.clone(),
                        };
                        phase.sin().scale(*a)
                    })
                    .collect()
            }
            AngleSource::File(traj) => {
                let (angles, rates) = traj.sample(t);
                angles
                    .iter()
                    .zip(&rates)
                    .map(|(a, r)| Jet {
                        x: Dual::constant(*a),
                        v: Dual::constant(*r),
                    })
                    .collect()
            }
        }
    }

    fn build(&self, theta: &[f64], t: f64) -> Result<OutlineResult> {
        let (coeffs, freq) = self.resolve(theta)?;
        let widths: Vec<Dual> = self
            .body_arc
            .iter()
            .map(|l| eval_cubic_dual(&coeffs, *l))
            .collect();
        let jets = self.joint_jets(&freq, t);
        Ok(outline_mesh(
            &self.chain,
            &widths,
            self.min_half_width,
            &jets,
            &self.sampling,
            self.params.count(),
        ))
    }
}

impl ParametricBody for TailBody {
    fn n_params(&self) -> usize {
        self.params.count()
    }

    fn mesh_at(&self, theta: &[f64], t: f64) -> Result<BoundaryMesh> {
        Ok(self.build(theta, t)?.mesh)
    }

    fn boundary_jacobian(&self, theta: &[f64], t: f64) -> Result<BoundaryJacobian> {
        let out = self.build(theta, t)?;
        Ok(out.jacobian)
    }
}

fn eval_cubic(c: &[f64; 4], l: f64) -> f64 {
    c[0] + l * (c[1] + l * (c[2] + l * c[3]))
}

fn eval_cubic_dual(c: &[Dual; 4], l: f64) -> Dual {
    let mut acc = c[3].clone();
    for k in (0..3).rev() {
        acc = &c[k] + &acc.scale(l);
    }
    acc
}

/// Offset corner points of the outline: per joint, the left and right
/// offsets along the bisector normal, plus a blunt tip of half-width
/// `tip_half_width` (a sub-cell sharp tip would put opposite-side nodes
/// inside one kernel support and degrade the constraint conditioning).
struct Corners {
    left: Vec<Jet2>,
    right: Vec<Jet2>,
    tip_left: Jet2,
    tip_right: Jet2,
}

fn chain_corners(
    chain: &LinkChain,
    widths: &[Dual],
    tip_half_width: f64,
    angles: &[Jet],
) -> Corners {
    let n = chain.n_links();
    // absolute link angles and joint positions
    let mut theta = Jet::constant(chain.base_angle);
    let mut tangents = Vec::with_capacity(n);
    for a in angles {
        theta = &theta + a;
        tangents.push(Jet2::new(theta.cos(), theta.sin()));
    }
    let mut joints = Vec::with_capacity(n + 1);
    joints.push(Jet2::constant(chain.base.0, chain.base.1));
    for (i, t) in tangents.iter().enumerate() {
        let prev = joints[i].clone();
        joints.push(prev.add(&t.scale(chain.lengths[i])));
    }
    // bisector normals at the joints
    let normals: Vec<Jet2> = tangents.iter().map(Jet2::perp).collect();
    let mut joint_normals = Vec::with_capacity(n);
    joint_normals.push(normals[0].clone());
    for i in 1..n {
        let sum = normals[i - 1].add(&normals[i]);
        let inv = sum.norm().recip();
        joint_normals.push(sum.scale_jet(&inv));
    }

    let mut left = Vec::with_capacity(n);
    let mut right = Vec::with_capacity(n);
    for i in 0..n {
        let w = Jet::steady(widths[i].clone());
        let offset = joint_normals[i].scale_jet(&w);
        left.push(joints[i].add(&offset));
        right.push(joints[i].sub(&offset));
    }
    let tip_offset = normals[n - 1].scale(tip_half_width);
    Corners {
        tip_left: joints[n].add(&tip_offset),
        tip_right: joints[n].sub(&tip_offset),
        left,
        right,
    }
}

/// Ordered outline segments: left side to the tip, across the blunt tip,
/// back along the right side, then the base cap.
fn outline_segments(c: &Corners) -> Vec<(Jet2, Jet2)> {
    let n = c.left.len();
    let mut segs = Vec::with_capacity(2 * n + 2);
    for i in 0..n - 1 {
        segs.push((c.left[i].clone(), c.left[i + 1].clone()));
    }
    segs.push((c.left[n - 1].clone(), c.tip_left.clone()));
    segs.push((c.tip_left.clone(), c.tip_right.clone()));
    segs.push((c.tip_right.clone(), c.right[n - 1].clone()));
    for i in (0..n - 1).rev() {
        segs.push((c.right[i + 1].clone(), c.right[i].clone()));
    }
    segs.push((c.right[0].clone(), c.left[0].clone()));
    segs
}

/// Frozen node placement: each node lives at a fixed fraction of a fixed
/// segment, computed by arc-length marching over the reference (straight)
/// outline. Node positions then vary smoothly with the parameters and time.
type OutlineSampling = Vec<(usize, f64)>;

fn outline_sampling(chain: &LinkChain, widths: &[f64], tip_half_width: f64) -> OutlineSampling {
    let duals: Vec<Dual> = widths.iter().map(|w| Dual::constant(*w)).collect();
    let zero = vec![
        Jet {
            x: Dual::constant(0.0),
            v: Dual::constant(0.0),
        };
        chain.n_links()
    ];
    let corners = chain_corners(chain, &duals, tip_half_width, &zero);
    let lengths: Vec<f64> = outline_segments(&corners)
        .iter()
        .map(|(a, b)| b.sub(a).norm().x.v)
        .collect();
    let perimeter: f64 = lengths.iter().sum();
    let count = ((perimeter / chain.target_spacing).round() as usize).max(8);

    // anchor one node at the base-cap midpoint: it lies on the chain's
    // symmetry axis, so the whole node set inherits the mirror symmetry of
    // symmetric configurations
    let step = perimeter / count as f64;
    let cap_mid = perimeter - 0.5 * lengths[lengths.len() - 1];
    let offset = cap_mid % step;

    let mut nodes = Vec::with_capacity(count);
    let mut seg = 0;
    let mut seg_start = 0.0;
    for i in 0..count {
        let s = offset + step * i as f64;
        while seg + 1 < lengths.len() && s >= seg_start + lengths[seg] {
            seg_start += lengths[seg];
            seg += 1;
        }
        let frac = ((s - seg_start) / lengths[seg]).clamp(0.0, 1.0);
        nodes.push((seg, frac));
    }
    nodes
}

struct OutlineResult {
    mesh: BoundaryMesh,
    jacobian: BoundaryJacobian,
}

/// Emit the sampled closed outline at the frozen node fractions. The stored
/// spacing is the mean over the perimeter.
fn outline_mesh(
    chain: &LinkChain,
    widths: &[Dual],
    tip_half_width: f64,
    angles: &[Jet],
    sampling: &OutlineSampling,
    n_params: usize,
) -> OutlineResult {
    let corners = chain_corners(chain, widths, tip_half_width, angles);
    let segs = outline_segments(&corners);

    let total = sampling.len();
    let mut positions = Vec::with_capacity(total);
    let mut velocities = Vec::with_capacity(total);
    let mut dpos = vec![Vec::with_capacity(total); n_params];
    let mut dvel = vec![Vec::with_capacity(total); n_params];

    let mut perimeter = Jet::constant(0.0);
    for (a, b) in &segs {
        perimeter = &perimeter + &b.sub(a).norm();
    }

    for &(seg, frac) in sampling {
        let (a, b) = &segs[seg];
        let p = a.lerp(b, frac);
        positions.push((p.x.x.v, p.y.x.v));
        velocities.push((p.x.v.v, p.y.v.v));
        for slot in 0..n_params {
            dpos[slot].push((
                p.x.x.d.get(slot).copied().unwrap_or(0.0),
                p.y.x.d.get(slot).copied().unwrap_or(0.0),
            ));
            dvel[slot].push((
                p.x.v.d.get(slot).copied().unwrap_or(0.0),
                p.y.v.d.get(slot).copied().unwrap_or(0.0),
            ));
        }
    }

    let spacing = perimeter.x.v / total as f64;
    let dspacing = (0..n_params)
        .map(|slot| perimeter.x.d.get(slot).copied().unwrap_or(0.0) / total as f64)
        .collect();

    OutlineResult {
        mesh: BoundaryMesh::new(positions, velocities, spacing),
        jacobian: BoundaryJacobian {
            dpos,
            dvel,
            dspacing,
        },
    }
}

/// Reference tail used by the experiments: ten equal links over `length`,
/// the default taper cubic, and a traveling-wave gait.
pub fn reference_tail(
    base: (f64, f64),
    length: f64,
    target_spacing: f64,
    frequency: f64,
    params: TailParams,
) -> Result<TailBody> {
    let n = 10;
    let chain = LinkChain {
        base,
        base_angle: 0.0,
        lengths: vec![length / n as f64; n],
        joint_half_widths: vec![0.0; n],
        target_spacing,
    };
    let gait = GaitParams {
        frequency,
        amplitudes: (0..n).map(|j| 0.05 + 0.20 * j as f64 / (n - 1) as f64).collect(),
        phases: (0..n).map(|j| -0.5 * j as f64).collect(),
    };
    // resolvability floor: thick enough that opposite sides stay one cell
    // apart, assuming the node spacing tracks the grid spacing
    let floor = (0.01 * length).max(0.6 * target_spacing);
    TailBody::new(chain, gait, default_taper_coefficients(length), floor, params)
}

/// Default half-width cubic: gentle taper from 8% of the body length at the
/// base to 4% at the fin joint.
pub fn default_taper_coefficients(length: f64) -> [f64; 4] {
    [
        0.08 * length,
        -0.01 * length,
        -0.01 * length,
        -0.02 * length,
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn test_chain() -> LinkChain {
        LinkChain {
            base: (0.0, 0.0),
            base_angle: 0.0,
            lengths: vec![0.1; 10],
            joint_half_widths: (0..10).map(|j| 0.05 - 0.004 * j as f64).collect(),
            target_spacing: 0.02,
        }
    }

    #[test]
    fn gait_angles_at_origin_and_peak() {
        let gait = GaitParams {
            frequency: 2.0,
            amplitudes: vec![0.3, 0.2],
            phases: vec![0.0, 0.0],
        };
        let (a0, r0) = gait_angles(&gait, 0.0);
        assert!(a0.iter().all(|a| a.abs() < 1e-15));
        assert!((r0[0] - 0.3 * std::f64::consts::TAU * 2.0).abs() < 1e-12);
        let (a1, r1) = gait_angles(&gait, 1.0 / (4.0 * 2.0));
        assert!((a1[0] - 0.3).abs() < 1e-12);
        assert!((a1[1] - 0.2).abs() < 1e-12);
        assert!(r1.iter().all(|r| r.abs() < 1e-12));
    }

    #[test]
    fn gait_rates_match_finite_differences() {
        let gait = GaitParams {
            frequency: 3.0,
            amplitudes: (0..10).map(|j| 0.02 * (j + 1) as f64).collect(),
            phases: (0..10).map(|j| -0.4 * j as f64).collect(),
        };
        let t = 0.37;
        let dt = 1e-5;
        let (_, rates) = gait_angles(&gait, t);
        let (ap, _) = gait_angles(&gait, t + dt);
        let (am, _) = gait_angles(&gait, t - dt);
        for j in 0..10 {
            let fd = (ap[j] - am[j]) / (2.0 * dt);
            assert!((fd - rates[j]).abs() < 1e-6 * (1.0 + rates[j].abs()));
        }
    }

    #[test]
    fn straight_tail_is_symmetric_and_still() {
        let chain = test_chain();
        let mesh = tail_forward_kinematics(&chain, &[0.0; 10], &[0.0; 10]).unwrap();
        assert!(mesh.n_nodes() > 50);
        assert!(mesh.velocities.iter().all(|v| v.0 == 0.0 && v.1 == 0.0));
        // symmetric about y = 0: reflected node set equals the node set
        for &(x, y) in &mesh.positions {
            let mirrored = mesh
                .positions
                .iter()
                .any(|&(mx, my)| (mx - x).abs() < 1e-9 && (my + y).abs() < 1e-9);
            assert!(mirrored, "node ({x}, {y}) has no mirror");
        }
    }

    #[test]
    fn forward_kinematics_preserves_link_lengths() {
        let chain = test_chain();
        let angles: Vec<f64> = (0..10).map(|j| 0.3 * ((j * 37) as f64).sin()).collect();
        let joints = chain_joints(&chain, &angles);
        for (i, w) in joints.windows(2).enumerate() {
            let d = ((w[1].0 - w[0].0).powi(2) + (w[1].1 - w[0].1).powi(2)).sqrt();
            assert!(
                (d - chain.lengths[i]).abs() < 1e-12,
                "link {i} length {d} vs {}",
                chain.lengths[i]
            );
        }
    }

    #[test]
    fn rigid_rotation_gives_omega_cross_r() {
        let chain = test_chain();
        let omega = 1.7;
        let mut angles = vec![0.0; 10];
        let mut rates = vec![0.0; 10];
        angles[0] = 0.4;
        rates[0] = omega;
        let mesh = tail_forward_kinematics(&chain, &angles, &rates).unwrap();
        for (p, v) in mesh.positions.iter().zip(&mesh.velocities) {
            let r = (p.0 - chain.base.0, p.1 - chain.base.1);
            let expect = (-omega * r.1, omega * r.0);
            assert!((v.0 - expect.0).abs() < 1e-10);
            assert!((v.1 - expect.1).abs() < 1e-10);
        }
    }

    #[test]
    fn node_velocities_are_time_derivatives_of_positions() {
        let body = reference_tail((0.1, 0.5), 1.0, 0.02, 3.0, TailParams::None).unwrap();
        let t = 0.123;
        let dt = 1e-5;
        let m0 = body.mesh_at(&[], t).unwrap();
        let mp = body.mesh_at(&[], t + dt).unwrap();
        let mm = body.mesh_at(&[], t - dt).unwrap();
        for k in 0..m0.n_nodes() {
            let fdx = (mp.positions[k].0 - mm.positions[k].0) / (2.0 * dt);
            let fdy = (mp.positions[k].1 - mm.positions[k].1) / (2.0 * dt);
            assert!(
                (fdx - m0.velocities[k].0).abs() < 1e-7 * (1.0 + fdx.abs()),
                "node {k} x-velocity"
            );
            assert!(
                (fdy - m0.velocities[k].1).abs() < 1e-7 * (1.0 + fdy.abs()),
                "node {k} y-velocity"
            );
        }
    }

    #[test]
    fn boundary_jacobian_matches_finite_differences() {
        let body =
            reference_tail((0.1, 0.5), 1.0, 0.05, 2.0, TailParams::ShapeAndFrequency).unwrap();
        let theta = body.default_theta();
        let t = 0.21;
        let jac = body.boundary_jacobian(&theta, t).unwrap();
        let mesh = body.mesh_at(&theta, t).unwrap();
        for m in 0..theta.len() {
            let eps = 1e-6 * theta[m].abs().max(0.05);
            let mut tp = theta.clone();
            tp[m] += eps;
            let mut tm = theta.clone();
            tm[m] -= eps;
            let meshp = body.mesh_at(&tp, t).unwrap();
            let meshm = body.mesh_at(&tm, t).unwrap();
            for k in 0..mesh.n_nodes() {
                let fd = (
                    (meshp.positions[k].0 - meshm.positions[k].0) / (2.0 * eps),
                    (meshp.positions[k].1 - meshm.positions[k].1) / (2.0 * eps),
                );
                let an = jac.dpos[m][k];
                assert!(
                    (fd.0 - an.0).abs() <= 1e-6 * (1.0 + an.0.abs()),
                    "param {m} node {k} x: {} vs {}",
                    fd.0,
                    an.0
                );
                assert!((fd.1 - an.1).abs() <= 1e-6 * (1.0 + an.1.abs()));
                let fdv = (
                    (meshp.velocities[k].0 - meshm.velocities[k].0) / (2.0 * eps),
                    (meshp.velocities[k].1 - meshm.velocities[k].1) / (2.0 * eps),
                );
                let anv = jac.dvel[m][k];
                assert!(
                    (fdv.0 - anv.0).abs() <= 1e-5 * (1.0 + anv.0.abs()),
                    "param {m} node {k} x-vel: {} vs {}",
                    fdv.0,
                    anv.0
                );
                assert!((fdv.1 - anv.1).abs() <= 1e-5 * (1.0 + anv.1.abs()));
            }
            let fds = (meshp.spacing - meshm.spacing) / (2.0 * eps);
            assert!((fds - jac.dspacing[m]).abs() <= 1e-6 * (1.0 + jac.dspacing[m].abs()));
        }
    }

    #[test]
    fn outline_closes_within_one_spacing() {
        let body = reference_tail((0.2, 0.4), 0.8, 0.03, 2.0, TailParams::None).unwrap();
        let mesh = body.mesh_at(&[], 0.08).unwrap();
        let first = mesh.positions[0];
        let last = *mesh.positions.last().unwrap();
        let gap = ((first.0 - last.0).powi(2) + (first.1 - last.1).powi(2)).sqrt();
        assert!(gap <= 1.5 * mesh.spacing, "closure gap {gap} vs spacing {}", mesh.spacing);
        // constant offset derivative for c0 on a tail that stays straight
        let chain = LinkChain {
            base: (0.2, 0.4),
            base_angle: 0.0,
            lengths: vec![0.08; 10],
            joint_half_widths: vec![0.0; 10],
            target_spacing: 0.03,
        };
        let still = GaitParams {
            frequency: 1.0,
            amplitudes: vec![0.0; 10],
            phases: vec![0.0; 10],
        };
        let body = TailBody::new(
            chain,
            still,
            default_taper_coefficients(0.8),
            0.008,
            TailParams::ShapeOnly,
        )
        .unwrap();
        let theta = body.default_theta();
        let jac = body.boundary_jacobian(&theta, 0.0).unwrap();
        // dw/dc0 = 1: straight-tail nodes on the body sides move along the
        // outward normal (0, +-1)
        let mesh = body.mesh_at(&theta, 0.0).unwrap();
        let mut checked = 0;
        for (k, &(x, y)) in mesh.positions.iter().enumerate() {
            // skip base cap, fin and joint neighbourhoods; the straight tail
            // runs along y = 0.4
            let yy = y - 0.4;
            if !(0.25..0.6).contains(&x) || yy.abs() < 0.01 {
                continue;
            }
            let d = jac.dpos[0][k];
            let expect = if yy > 0.0 { 1.0 } else { -1.0 };
            assert!(
                (d.1 - expect).abs() < 1e-6 && d.0.abs() < 1e-6,
                "node {k}: dpos/dc0 = {d:?}"
            );
            checked += 1;
        }
        assert!(checked > 10);
    }
}
