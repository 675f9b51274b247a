//! Experiment configuration files (TOML; unknown keys rejected).

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::bodies::{
    reference_tail, AngleTrajectory, CylinderBody, GaitParams, LinkChain, TailBody, TailParams,
};
use crate::error::{Error, Result};
use crate::grid::{DomainBoundaryConditions, EdgeCondition, GridSpec};
use crate::navier_stokes::FluidConfig;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfigFile {
    pub grid: GridSection,
    pub fluid: FluidSection,
    pub boundary_conditions: BcSection,
    #[serde(default)]
    pub body: BodySection,
    #[serde(default)]
    pub gait: Option<GaitSection>,
    #[serde(default)]
    pub output: OutputSection,
    #[serde(default)]
    pub optimize: Option<OptimizeSection>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub nx: usize,
    pub ny: usize,
    /// Domain size (nondimensional width, height).
    pub extent: [f64; 2],
    #[serde(default)]
    pub origin: [f64; 2],
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FluidSection {
    /// Reynolds number; exactly one of `re` or the physical property block.
    pub re: Option<f64>,
    pub rho: Option<f64>,
    pub mu: Option<f64>,
    pub u_ref: Option<f64>,
    pub l_ref: Option<f64>,
    /// Time step: nondimensional with `re`, seconds with physical properties.
    pub dt: f64,
    pub n_steps: usize,
    #[serde(default)]
    pub newton_tol: Option<f64>,
    #[serde(default)]
    pub newton_max_iters: Option<usize>,
    /// Uniform external acceleration (gx, gy).
    #[serde(default)]
    pub a_ext: Option<[f64; 2]>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BcSection {
    pub west: EdgeSpec,
    pub east: EdgeSpec,
    pub south: EdgeSpec,
    pub north: EdgeSpec,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "snake_case", tag = "type")]
pub enum EdgeSpec {
    Inflow { velocity: [f64; 2] },
    FarField { velocity: [f64; 2] },
    Wall,
    Outflow,
}

impl EdgeSpec {
    fn to_condition(&self) -> EdgeCondition {
        match self {
            EdgeSpec::Inflow { velocity } => EdgeCondition::Inflow {
                velocity: (velocity[0], velocity[1]),
            },
            EdgeSpec::FarField { velocity } => EdgeCondition::FarField {
                velocity: (velocity[0], velocity[1]),
            },
            EdgeSpec::Wall => EdgeCondition::Wall,
            EdgeSpec::Outflow => EdgeCondition::Outflow,
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "snake_case", tag = "variant")]
pub enum BodySection {
    #[default]
    None,
    Cylinder {
        center: [f64; 2],
        diameter: f64,
        /// Boundary node spacing; defaults to the grid cell size.
        node_spacing: Option<f64>,
    },
    Tail {
        base: [f64; 2],
        length: f64,
        node_spacing: Option<f64>,
        /// Half-width cubic coefficients; defaults to the reference taper.
        coefficients: Option<[f64; 4]>,
        /// Joint-angle trajectory file (overrides the gait section).
        angle_file: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaitSection {
    pub frequency: f64,
    pub amplitudes: Vec<f64>,
    pub phases: Vec<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    /// Output directory; overridable on the command line.
    #[serde(default)]
    pub directory: Option<PathBuf>,
    /// Write field snapshots every this many steps (0 = never).
    #[serde(default)]
    pub snapshot_stride: usize,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            directory: None,
            snapshot_stride: 0,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizeSection {
    /// "shape", "frequency" or "shape_and_gait".
    pub mode: String,
    #[serde(default = "default_max_iters")]
    pub max_iters: usize,
    /// Steps per objective rollout; defaults to one flap period.
    #[serde(default)]
    pub horizon: Option<usize>,
}

fn default_max_iters() -> usize {
    5
}

impl SimConfigFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            Error::InvalidConfig(format!("cannot read {}: {e}", path.display()))
        })?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let cfg: SimConfigFile = toml::from_str(text)
            .map_err(|e| Error::InvalidConfig(format!("config parse error: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.grid.nx < 3 || self.grid.ny < 3 {
            return Err(Error::InvalidConfig(format!(
                "grid.nx/grid.ny must be at least 3, got {}x{}",
                self.grid.nx, self.grid.ny
            )));
        }
        if self.grid.extent[0] <= 0.0 || self.grid.extent[1] <= 0.0 {
            return Err(Error::InvalidConfig("grid.extent must be positive".into()));
        }
        let f = &self.fluid;
        let physical = [f.rho, f.mu, f.u_ref, f.l_ref];
        let n_phys = physical.iter().filter(|v| v.is_some()).count();
        match (f.re, n_phys) {
            (Some(_), 0) => {}
            (None, 4) => {}
            (Some(_), _) => {
                return Err(Error::InvalidConfig(
                    "fluid: give either re or the full physical set (rho, mu, u_ref, l_ref), \
                     not both"
                        .into(),
                ))
            }
            (None, _) => {
                return Err(Error::InvalidConfig(
                    "fluid: missing re (or the full physical set rho, mu, u_ref, l_ref)".into(),
                ))
            }
        }
        if f.dt <= 0.0 {
            return Err(Error::InvalidConfig("fluid.dt must be positive".into()));
        }
        if let Some(g) = &self.gait {
            if g.amplitudes.len() != g.phases.len() {
                return Err(Error::InvalidConfig(
                    "gait.amplitudes and gait.phases must have equal length".into(),
                ));
            }
        }
        if let Some(o) = &self.optimize {
            if !["shape", "frequency", "shape_and_gait"].contains(&o.mode.as_str()) {
                return Err(Error::InvalidConfig(format!(
                    "optimize.mode must be shape, frequency or shape_and_gait, got '{}'",
                    o.mode
                )));
            }
        }
        Ok(())
    }

    pub fn grid_spec(&self) -> Result<GridSpec> {
        GridSpec::new(
            self.grid.nx,
            self.grid.ny,
            self.grid.extent[0] / self.grid.nx as f64,
            self.grid.extent[1] / self.grid.ny as f64,
            (self.grid.origin[0], self.grid.origin[1]),
        )
    }

    pub fn boundary_conditions(&self) -> DomainBoundaryConditions {
        DomainBoundaryConditions {
            west: self.boundary_conditions.west.to_condition(),
            east: self.boundary_conditions.east.to_condition(),
            south: self.boundary_conditions.south.to_condition(),
            north: self.boundary_conditions.north.to_condition(),
        }
    }

    pub fn fluid_config(&self) -> FluidConfig {
        let f = &self.fluid;
        let mut cfg = match f.re {
            Some(re) => FluidConfig::nondimensional(re, f.dt),
            None => FluidConfig::from_physical(
                f.rho.unwrap(),
                f.mu.unwrap(),
                f.u_ref.unwrap(),
                f.l_ref.unwrap(),
                f.dt,
            ),
        };
        if let Some(tol) = f.newton_tol {
            cfg.newton_tol = tol;
        }
        if let Some(iters) = f.newton_max_iters {
            cfg.newton_max_iters = iters;
        }
        cfg
    }

    /// Uniform external acceleration expanded over the velocity unknowns.
    pub fn a_ext_vector(&self, ops: &crate::operators::FluidOperators) -> Vec<f64> {
        match self.fluid.a_ext {
            None => Vec::new(),
            Some([gx, gy]) => ops
                .layout
                .iter()
                .map(|(_, is_x, _, _)| if is_x { gx } else { gy })
                .collect(),
        }
    }

    /// The configured parametric body, if any.
    pub fn build_body(&self, grid: &GridSpec, mode: TailParams) -> Result<ConfiguredBody> {
        match &self.body {
            BodySection::None => Ok(ConfiguredBody::None),
            BodySection::Cylinder {
                center,
                diameter,
                node_spacing,
            } => {
                let spacing = node_spacing.unwrap_or_else(|| grid.min_spacing());
                let body = CylinderBody::new((center[0], center[1]), *diameter, spacing);
                Ok(ConfiguredBody::Cylinder(body))
            }
            BodySection::Tail {
                base,
                length,
                node_spacing,
                coefficients,
                angle_file,
            } => {
                let spacing = node_spacing.unwrap_or_else(|| grid.min_spacing());
                let coeffs = coefficients
                    .unwrap_or_else(|| crate::bodies::default_taper_coefficients(*length));
                let min_w = 0.5 * grid.min_spacing();
                let body = if let Some(path) = angle_file {
                    // recorded trajectories are in seconds when the fluid is
                    // given physically; nondimensional runs use them as-is
                    let time_scale = match (self.fluid.u_ref, self.fluid.l_ref) {
                        (Some(u), Some(l)) if self.fluid.re.is_none() => u / l,
                        _ => 1.0,
                    };
                    let traj = AngleTrajectory::load(path)?.rescale_time(time_scale);
                    let chain = tail_chain((base[0], base[1]), *length, spacing);
                    TailBody::from_trajectory(chain, traj, coeffs, min_w)?
                } else {
                    let gait = self.gait.as_ref().ok_or_else(|| {
                        Error::InvalidConfig(
                            "tail body needs a [gait] section or an angle_file".into(),
                        )
                    })?;
                    let chain = tail_chain((base[0], base[1]), *length, spacing);
                    TailBody::new(
                        chain,
                        GaitParams {
                            frequency: gait.frequency,
                            amplitudes: gait.amplitudes.clone(),
                            phases: gait.phases.clone(),
                        },
                        coeffs,
                        min_w,
                        mode,
                    )?
                };
                Ok(ConfiguredBody::Tail(Box::new(body)))
            }
        }
    }
}

fn tail_chain(base: (f64, f64), length: f64, spacing: f64) -> LinkChain {
    LinkChain {
        base,
        base_angle: 0.0,
        lengths: vec![length / 10.0; 10],
        joint_half_widths: vec![0.0; 10],
        target_spacing: spacing,
    }
}

/// Body instance produced from a config file.
pub enum ConfiguredBody {
    None,
    Cylinder(CylinderBody),
    Tail(Box<TailBody>),
}

/// Convenience: the reference tail driven purely from code (used by examples
/// and tests).
pub fn reference_tail_body(
    base: (f64, f64),
    length: f64,
    spacing: f64,
    frequency: f64,
    mode: TailParams,
) -> Result<TailBody> {
    reference_tail(base, length, spacing, frequency, mode)
}
