//! Staggered (MAC) grid geometry, boundary conditions and velocity layout.
//!
//! Pressure lives at cell centers, x-velocity on vertical cell faces and
//! y-velocity on horizontal cell faces. Velocity unknowns are the interior
//! faces plus the boundary-normal faces of outflow edges; Dirichlet boundary
//! faces carry prescribed values that are folded into boundary-condition
//! vectors during operator assembly. Pressure ghost cells beyond an outflow
//! edge are held at zero, which pins the pressure level whenever an outflow
//! edge exists.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

/// Staggered-grid geometry: cell counts, cell sizes and the lower-left corner.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub nx: usize,
    pub ny: usize,
    pub hx: f64,
    pub hy: f64,
    pub origin: (f64, f64),
}

impl GridSpec {
    pub fn new(nx: usize, ny: usize, hx: f64, hy: f64, origin: (f64, f64)) -> Result<Self> {
        if nx < 3 || ny < 3 {
            return Err(Error::GridTooSmall { nx, ny });
        }
        assert!(hx > 0.0 && hy > 0.0, "cell sizes must be positive");
        Ok(Self {
            nx,
            ny,
            hx,
            hy,
            origin,
        })
    }

    /// Uniform grid covering `[0, width] x [0, height]`.
    pub fn from_extent(nx: usize, ny: usize, width: f64, height: f64) -> Result<Self> {
        Self::new(nx, ny, width / nx as f64, height / ny as f64, (0.0, 0.0))
    }

    pub fn n_cells(&self) -> usize {
        self.nx * self.ny
    }

    /// Flat pressure index of cell (i, j), x-fastest.
    #[inline]
    pub fn cell_index(&self, i: usize, j: usize) -> usize {
        debug_assert!(i < self.nx && j < self.ny);
        j * self.nx + i
    }

    #[inline]
    pub fn cell_center(&self, i: usize, j: usize) -> (f64, f64) {
        (
            self.origin.0 + (i as f64 + 0.5) * self.hx,
            self.origin.1 + (j as f64 + 0.5) * self.hy,
        )
    }

    /// Position of x-velocity face (i, j): i in 0..=nx, j in 0..ny.
    #[inline]
    pub fn x_face_pos(&self, i: usize, j: usize) -> (f64, f64) {
        (
            self.origin.0 + i as f64 * self.hx,
            self.origin.1 + (j as f64 + 0.5) * self.hy,
        )
    }

    /// Position of y-velocity face (i, j): i in 0..nx, j in 0..=ny.
    #[inline]
    pub fn y_face_pos(&self, i: usize, j: usize) -> (f64, f64) {
        (
            self.origin.0 + (i as f64 + 0.5) * self.hx,
            self.origin.1 + j as f64 * self.hy,
        )
    }

    pub fn extent(&self) -> (f64, f64) {
        (self.nx as f64 * self.hx, self.ny as f64 * self.hy)
    }

    pub fn max_spacing(&self) -> f64 {
        self.hx.max(self.hy)
    }

    pub fn min_spacing(&self) -> f64 {
        self.hx.min(self.hy)
    }
}

/// Domain edges, named from the fluid's point of view.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Edge {
    West,
    East,
    South,
    North,
}

impl Edge {
    pub const ALL: [Edge; 4] = [Edge::West, Edge::East, Edge::South, Edge::North];
}

/// Condition applied on one domain edge.
///
/// `Inflow` and `FarField` prescribe both velocity components; `Wall` is a
/// far-field edge with zero velocity. `Outflow` prescribes nothing: the
/// boundary-normal velocity there is an unknown with a zero-normal-gradient
/// closure, and the pressure ghost beyond the edge is held at zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EdgeCondition {
    Inflow { velocity: (f64, f64) },
    FarField { velocity: (f64, f64) },
    Wall,
    Outflow,
}

impl EdgeCondition {
    pub fn is_dirichlet(&self) -> bool {
        !matches!(self, EdgeCondition::Outflow)
    }

    fn velocity(&self) -> Option<(f64, f64)> {
        match self {
            EdgeCondition::Inflow { velocity } | EdgeCondition::FarField { velocity } => {
                Some(*velocity)
            }
            EdgeCondition::Wall => Some((0.0, 0.0)),
            EdgeCondition::Outflow => None,
        }
    }
}

/// Per-edge conditions for the rectangular fluid domain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DomainBoundaryConditions {
    pub west: EdgeCondition,
    pub east: EdgeCondition,
    pub south: EdgeCondition,
    pub north: EdgeCondition,
}

impl DomainBoundaryConditions {
    /// Same condition on all four edges.
    pub fn uniform(cond: EdgeCondition) -> Self {
        Self {
            west: cond,
            east: cond,
            south: cond,
            north: cond,
        }
    }

    /// Closed cavity: walls everywhere.
    pub fn cavity() -> Self {
        Self::uniform(EdgeCondition::Wall)
    }

    /// Uniform free stream `velocity` entering from the west: inflow west,
    /// outflow east, far-field top and bottom.
    pub fn free_stream(velocity: (f64, f64)) -> Self {
        Self {
            west: EdgeCondition::Inflow { velocity },
            east: EdgeCondition::Outflow,
            south: EdgeCondition::FarField { velocity },
            north: EdgeCondition::FarField { velocity },
        }
    }

    pub fn edge(&self, edge: Edge) -> EdgeCondition {
        match edge {
            Edge::West => self.west,
            Edge::East => self.east,
            Edge::South => self.south,
            Edge::North => self.north,
        }
    }

    pub fn has_outflow(&self) -> bool {
        Edge::ALL
            .iter()
            .any(|&e| matches!(self.edge(e), EdgeCondition::Outflow))
    }

    /// Resolve into the per-edge sampled form used by operator assembly.
    pub fn resolve(&self) -> BoundaryProfiles {
        let edge_profile = |cond: EdgeCondition| match cond.velocity() {
            Some(v) => EdgeProfile::dirichlet(move |_| v),
            None => EdgeProfile::outflow(),
        };
        BoundaryProfiles {
            west: edge_profile(self.west),
            east: edge_profile(self.east),
            south: edge_profile(self.south),
            north: edge_profile(self.north),
        }
    }
}

/// Kind of closure applied on one edge, after resolution.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EdgeKind {
    /// Both velocity components prescribed along the edge.
    Dirichlet,
    /// Zero-normal-gradient velocity, zero ghost pressure.
    Outflow,
}

type EdgeFn = Arc<dyn Fn(f64) -> (f64, f64) + Send + Sync>;

/// One edge's resolved condition: a kind plus (for Dirichlet edges) the
/// prescribed velocity as a function of the along-edge coordinate.
#[derive(Clone)]
pub struct EdgeProfile {
    kind: EdgeKind,
    value: EdgeFn,
}

impl EdgeProfile {
    pub fn dirichlet(value: impl Fn(f64) -> (f64, f64) + Send + Sync + 'static) -> Self {
        Self {
            kind: EdgeKind::Dirichlet,
            value: Arc::new(value),
        }
    }

    pub fn outflow() -> Self {
        Self {
            kind: EdgeKind::Outflow,
            value: Arc::new(|_| (0.0, 0.0)),
        }
    }

    pub fn kind(&self) -> EdgeKind {
        self.kind
    }

    /// Prescribed velocity at along-edge coordinate `coord` (x for horizontal
    /// edges, y for vertical ones). Zero for outflow edges.
    pub fn velocity_at(&self, coord: f64) -> (f64, f64) {
        (self.value)(coord)
    }

    /// Add a constant to the boundary-normal component (used to balance the
    /// net prescribed flux on closed domains).
    fn with_normal_offset(&self, edge: Edge, offset: f64) -> Self {
        let inner = self.value.clone();
        let value: EdgeFn = match edge {
            Edge::West | Edge::East => Arc::new(move |c| {
                let (vx, vy) = inner(c);
                (vx + offset, vy)
            }),
            Edge::South | Edge::North => Arc::new(move |c| {
                let (vx, vy) = inner(c);
                (vx, vy + offset)
            }),
        };
        Self {
            kind: self.kind,
            value,
        }
    }
}

impl fmt::Debug for EdgeProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("EdgeProfile")
            .field("kind", &self.kind)
            .finish_non_exhaustive()
    }
}

/// Fully resolved boundary data: one profile per edge. This is what operator
/// assembly consumes. Spatially varying Dirichlet data (e.g. an analytic
/// solution sampled on the boundary for validation studies) is expressed by
/// constructing the profiles directly.
#[derive(Debug, Clone)]
pub struct BoundaryProfiles {
    pub west: EdgeProfile,
    pub east: EdgeProfile,
    pub south: EdgeProfile,
    pub north: EdgeProfile,
}

impl BoundaryProfiles {
    pub fn edge(&self, edge: Edge) -> &EdgeProfile {
        match edge {
            Edge::West => &self.west,
            Edge::East => &self.east,
            Edge::South => &self.south,
            Edge::North => &self.north,
        }
    }

    pub fn has_outflow(&self) -> bool {
        Edge::ALL
            .iter()
            .any(|&e| self.edge(e).kind() == EdgeKind::Outflow)
    }

    /// Correct the boundary-normal components with a uniform offset so the
    /// net prescribed volume flux vanishes discretely. Required for closed
    /// (all-Dirichlet) domains whose sampled boundary data is only
    /// analytically, not discretely, divergence free.
    pub fn mass_balanced(&self, grid: &GridSpec) -> BoundaryProfiles {
        let mut net_flux = 0.0; // outward volume flux
        let mut area = 0.0;
        for j in 0..grid.ny {
            let y = grid.x_face_pos(0, j).1;
            if self.west.kind() == EdgeKind::Dirichlet {
                net_flux -= self.west.velocity_at(y).0 * grid.hy;
                area += grid.hy;
            }
            if self.east.kind() == EdgeKind::Dirichlet {
                net_flux += self.east.velocity_at(y).0 * grid.hy;
                area += grid.hy;
            }
        }
        for i in 0..grid.nx {
            let x = grid.y_face_pos(i, 0).0;
            if self.south.kind() == EdgeKind::Dirichlet {
                net_flux -= self.south.velocity_at(x).1 * grid.hx;
                area += grid.hx;
            }
            if self.north.kind() == EdgeKind::Dirichlet {
                net_flux += self.north.velocity_at(x).1 * grid.hx;
                area += grid.hx;
            }
        }
        if area == 0.0 {
            return self.clone();
        }
        // Outward correction per unit length; sign per edge orientation.
        let q = net_flux / area;
        BoundaryProfiles {
            west: self.west.with_normal_offset(Edge::West, q),
            east: self.east.with_normal_offset(Edge::East, -q),
            south: self.south.with_normal_offset(Edge::South, q),
            north: self.north.with_normal_offset(Edge::North, -q),
        }
    }
}

/// Map between (component, face index) pairs and the flat velocity vector.
///
/// x-faces form a `(nx+1) x ny` lattice, y-faces a `nx x (ny+1)` lattice.
/// Interior faces are always unknowns; boundary faces are unknowns only on
/// outflow edges. The flat ordering is all x-unknowns (x-fastest) followed by
/// all y-unknowns.
#[derive(Debug, Clone)]
pub struct VelocityLayout {
    nx: usize,
    ny: usize,
    x_dof: Vec<Option<usize>>,
    y_dof: Vec<Option<usize>>,
    /// (is_x, i, j) of each unknown, in flat order.
    faces: Vec<(bool, usize, usize)>,
    n_ux: usize,
}

impl VelocityLayout {
    pub fn new(grid: &GridSpec, profiles: &BoundaryProfiles) -> Self {
        let (nx, ny) = (grid.nx, grid.ny);
        let mut x_dof = vec![None; (nx + 1) * ny];
        let mut y_dof = vec![None; nx * (ny + 1)];
        let mut faces = Vec::new();

        let west_open = profiles.west.kind() == EdgeKind::Outflow;
        let east_open = profiles.east.kind() == EdgeKind::Outflow;
        let south_open = profiles.south.kind() == EdgeKind::Outflow;
        let north_open = profiles.north.kind() == EdgeKind::Outflow;

        let mut next = 0;
        for j in 0..ny {
            for i in 0..=nx {
                let keep = (i >= 1 && i <= nx - 1)
                    || (i == 0 && west_open)
                    || (i == nx && east_open);
                if keep {
                    x_dof[j * (nx + 1) + i] = Some(next);
                    faces.push((true, i, j));
                    next += 1;
                }
            }
        }
        let n_ux = next;
        for j in 0..=ny {
            for i in 0..nx {
                let keep = (j >= 1 && j <= ny - 1)
                    || (j == 0 && south_open)
                    || (j == ny && north_open);
                if keep {
                    y_dof[j * nx + i] = Some(next);
                    faces.push((false, i, j));
                    next += 1;
                }
            }
        }

        Self {
            nx,
            ny,
            x_dof,
            y_dof,
            faces,
            n_ux,
        }
    }

    /// Total number of velocity unknowns.
    pub fn n_u(&self) -> usize {
        self.faces.len()
    }

    /// Number of x-velocity unknowns (they come first in the flat ordering).
    pub fn n_ux(&self) -> usize {
        self.n_ux
    }

    /// Unknown index of x-face (i, j), if it is an unknown.
    #[inline]
    pub fn x_unknown(&self, i: usize, j: usize) -> Option<usize> {
        debug_assert!(i <= self.nx && j < self.ny);
        self.x_dof[j * (self.nx + 1) + i]
    }

    /// Unknown index of y-face (i, j), if it is an unknown.
    #[inline]
    pub fn y_unknown(&self, i: usize, j: usize) -> Option<usize> {
        debug_assert!(i < self.nx && j <= self.ny);
        self.y_dof[j * self.nx + i]
    }

    /// (is_x_component, i, j) of unknown `k`.
    #[inline]
    pub fn face_of(&self, k: usize) -> (bool, usize, usize) {
        self.faces[k]
    }

    /// Iterate over all unknowns as `(k, is_x, i, j)`.
    pub fn iter(&self) -> impl Iterator<Item = (usize, bool, usize, usize)> + '_ {
        self.faces
            .iter()
            .enumerate()
            .map(|(k, &(is_x, i, j))| (k, is_x, i, j))
    }

    /// Physical position of unknown `k`.
    pub fn position(&self, grid: &GridSpec, k: usize) -> (f64, f64) {
        let (is_x, i, j) = self.faces[k];
        if is_x {
            grid.x_face_pos(i, j)
        } else {
            grid.y_face_pos(i, j)
        }
    }
}

/// Fluid state: staggered velocity unknowns, cell pressures, simulation time.
/// All quantities are nondimensional.
#[derive(Debug, Clone, PartialEq)]
pub struct FluidState {
    pub u: Vec<f64>,
    pub p: Vec<f64>,
    pub t: f64,
}

impl FluidState {
    pub fn zeros(n_u: usize, n_f: usize) -> Self {
        Self {
            u: vec![0.0; n_u],
            p: vec![0.0; n_f],
            t: 0.0,
        }
    }

    /// State with every velocity unknown set to the matching component of a
    /// uniform velocity.
    pub fn uniform(layout: &VelocityLayout, n_f: usize, velocity: (f64, f64)) -> Self {
        let u = layout
            .iter()
            .map(|(_, is_x, _, _)| if is_x { velocity.0 } else { velocity.1 })
            .collect();
        Self {
            u,
            p: vec![0.0; n_f],
            t: 0.0,
        }
    }

    /// Sample an analytic velocity field at every unknown's face position.
    pub fn from_field(
        grid: &GridSpec,
        layout: &VelocityLayout,
        n_f: usize,
        field: impl Fn(f64, f64) -> (f64, f64),
    ) -> Self {
        let u = layout
            .iter()
            .map(|(k, is_x, _, _)| {
                let (x, y) = layout.position(grid, k);
                let (vx, vy) = field(x, y);
                if is_x {
                    vx
                } else {
                    vy
                }
            })
            .collect();
        Self {
            u,
            p: vec![0.0; n_f],
            t: 0.0,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.u.iter().chain(self.p.iter()).all(|v| v.is_finite())
    }
}
