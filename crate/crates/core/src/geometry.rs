//! Assembly footprint and the Cartesian proxy of the vessel: downcomer annulus,
//! flat-bottom lower plenum, porous core columns and four cold-leg inlet patches.

use alloc::collections::{BTreeMap, VecDeque};
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

/// Side length of the assembly grid.
pub const MAP_SIZE: usize = 15;
/// Number of fuel assemblies in the standard four-loop core.
pub const ASSEMBLY_COUNT: usize = 193;
/// Valid cells per row, top to bottom, centered in each row.
pub const ROW_WIDTHS: [usize; MAP_SIZE] = [7, 11, 13, 13, 15, 15, 15, 15, 15, 15, 15, 13, 13, 11, 7];

pub const DEFAULT_PITCH: f64 = 0.215;
pub const VESSEL_INNER_RADIUS: f64 = 2.1971;
pub const BARREL_INNER_RADIUS: f64 = 1.8796;
pub const CORE_HEIGHT: f64 = 4.059;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GeometryError {
    #[error("pitch must be positive, got {0}")]
    BadPitch(f64),
    #[error("resolution too coarse: assembly ({row}, {col}) receives no whole cells")]
    ResolutionTooCoarse { row: usize, col: usize },
    #[error("invalid domain configuration: {0}")]
    InvalidConfig(&'static str),
    #[error("flow path from inlet to outlet bypasses plenum and core")]
    Bypass,
}

/// A 15×15 grid of values indexed `[row][col]`.
///
/// Columns run along +x and rows along +y, so `(row, col) = (0, 0)` is the
/// assembly with the most negative x and y.
pub type Grid15<T> = [[T; MAP_SIZE]; MAP_SIZE];

/// Rotates a 15×15 grid by 90° counter-clockwise about the core axis.
pub fn rot90<T: Copy>(grid: &Grid15<T>) -> Grid15<T> {
    let mut out = *grid;
    for (r, row) in grid.iter().enumerate() {
        for (c, v) in row.iter().enumerate() {
            out[c][MAP_SIZE - 1 - r] = *v;
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssemblyMap {
    pub valid: Grid15<bool>,
    pub count: usize,
    pub pitch: f64,
}

pub fn build_assembly_map(pitch: f64) -> Result<AssemblyMap, GeometryError> {
    if !(pitch > 0.0) || !pitch.is_finite() {
        return Err(GeometryError::BadPitch(pitch));
    }
    let mut valid = [[false; MAP_SIZE]; MAP_SIZE];
    for (r, width) in ROW_WIDTHS.iter().enumerate() {
        let start = (MAP_SIZE - width) / 2;
        for c in start..start + width {
            valid[r][c] = true;
        }
    }
    let count = valid.iter().flatten().filter(|v| **v).count();
    Ok(AssemblyMap { valid, count, pitch })
}

impl AssemblyMap {
    pub fn standard() -> Self {
        build_assembly_map(DEFAULT_PITCH).expect("default pitch is positive")
    }

    pub fn is_valid(&self, row: usize, col: usize) -> bool {
        row < MAP_SIZE && col < MAP_SIZE && self.valid[row][col]
    }

    /// Valid cells in row-major order. This order defines the flattened
    /// 193-vector used by the dense forecasters.
    pub fn valid_cells(&self) -> Vec<(usize, usize)> {
        let mut cells = Vec::with_capacity(self.count);
        for r in 0..MAP_SIZE {
            for c in 0..MAP_SIZE {
                if self.valid[r][c] {
                    cells.push((r, c));
                }
            }
        }
        cells
    }

    /// Assembly center relative to the core axis (m).
    pub fn center(&self, row: usize, col: usize) -> (f64, f64) {
        let half = (MAP_SIZE as f64 - 1.0) / 2.0;
        ((col as f64 - half) * self.pitch, (row as f64 - half) * self.pitch)
    }

    /// Assembly whose footprint contains the point `(x, y)`, if any.
    pub fn locate(&self, x: f64, y: f64) -> Option<(usize, usize)> {
        let half = MAP_SIZE as f64 / 2.0;
        let c = libm::floor(x / self.pitch + half);
        let r = libm::floor(y / self.pitch + half);
        if c < 0.0 || r < 0.0 || c >= MAP_SIZE as f64 || r >= MAP_SIZE as f64 {
            return None;
        }
        let (r, c) = (r as usize, c as usize);
        self.valid[r][c].then_some((r, c))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Layout {
    /// Downcomer, plenum and core columns inside a square box around the vessel.
    Vessel,
    /// The 15×15 footprint only: inlet below every valid column, outlet above.
    CoreBox,
    /// A box with no solid cells, centered on the middle assembly. With
    /// `nx = ny = 1` this is the one-dimensional porous column.
    OpenBox,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SideBoundary {
    Wall,
    Symmetry,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DomainConfig {
    pub layout: Layout,
    pub nx: usize,
    pub ny: usize,
    pub nz: usize,
    pub pitch: f64,
    pub vessel_radius: f64,
    pub barrel_radius: f64,
    pub core_height: f64,
    pub plenum_height: f64,
    /// Area of each square cold-leg patch (m²).
    pub inlet_patch_area: f64,
    /// Depth of the patch centers below the top of the downcomer (m).
    pub inlet_depth: f64,
    pub porous_core: bool,
    /// In-plane width of an `OpenBox` (m).
    pub box_width: f64,
    /// Side treatment for `OpenBox`; the other layouts always use walls.
    pub sides: SideBoundary,
    /// Plant data carried for provenance only.
    pub metadata: BTreeMap<String, f64>,
}

impl Default for DomainConfig {
    fn default() -> Self {
        let mut metadata = BTreeMap::new();
        for (k, v) in [
            ("inlet_temperature_c", 292.0),
            ("system_pressure_pa", 1.55e7),
            ("support_plate_thickness_m", 0.5385),
            ("lower_core_plate_thickness_m", 0.0626),
            ("tie_plate_thickness_m", 0.0907),
            ("secondary_core_support_thickness_m", 0.109),
            ("rod_pitch_m", 0.0126),
            ("baffle_width_m", 0.022225),
            ("barrel_outer_radius_m", 1.93675),
            ("vessel_outer_radius_m", 2.413),
            ("total_mass_flow_kg_s", 17790.0),
        ] {
            metadata.insert(String::from(k), v);
        }
        Self {
            layout: Layout::Vessel,
            nx: 48,
            ny: 48,
            nz: 96,
            pitch: DEFAULT_PITCH,
            vessel_radius: VESSEL_INNER_RADIUS,
            barrel_radius: BARREL_INNER_RADIUS,
            core_height: CORE_HEIGHT,
            plenum_height: 1.5,
            inlet_patch_area: 0.49,
            inlet_depth: 0.5,
            porous_core: true,
            box_width: DEFAULT_PITCH,
            sides: SideBoundary::Wall,
            metadata,
        }
    }
}

impl DomainConfig {
    /// Scales the cell counts by `1 / ratio`, keeping the physical extent.
    pub fn coarsened(&self, ratio: f64) -> Self {
        let scale = |n: usize| (libm::round(n as f64 / ratio) as usize).max(1);
        Self { nx: scale(self.nx), ny: scale(self.ny), nz: scale(self.nz), ..self.clone() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CellClass {
    Fluid,
    Solid,
    Porous,
    /// Boundary cell carrying the Dirichlet inlet state of one patch.
    Inlet { patch: u8 },
    /// Boundary cell above the core where outflow leaves the domain.
    Outlet,
}

impl CellClass {
    /// Cells whose state is solved for.
    pub fn is_flow(self) -> bool {
        matches!(self, CellClass::Fluid | CellClass::Porous)
    }
}

/// Axis-aligned direction of a cell face.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Dir {
    XMinus,
    XPlus,
    YMinus,
    YPlus,
    ZMinus,
    ZPlus,
}

impl Dir {
    pub const ALL: [Dir; 6] = [Dir::XMinus, Dir::XPlus, Dir::YMinus, Dir::YPlus, Dir::ZMinus, Dir::ZPlus];

    pub fn axis(self) -> usize {
        self as usize / 2
    }

    pub fn sign(self) -> f64 {
        if self as usize % 2 == 0 {
            -1.0
        } else {
            1.0
        }
    }

    pub fn opposite(self) -> Dir {
        Dir::ALL[self as usize ^ 1]
    }

    pub fn unit(self) -> [f64; 3] {
        let mut v = [0.0; 3];
        v[self.axis()] = self.sign();
        v
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InletPatch {
    pub center: [f64; 3],
    /// Direction from the boundary cell into the domain; the patch normal.
    pub inward: Dir,
    /// In-patch axes: `e1 × e2 = inward`.
    pub e1: [f64; 3],
    pub e2: [f64; 3],
    pub half_width: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Domain {
    pub nx: usize,
    pub ny: usize,
    pub nz: usize,
    pub dx: f64,
    pub dy: f64,
    pub dz: f64,
    /// Coordinates of the lower corner of cell (0, 0, 0).
    pub origin: [f64; 3],
    pub cell_class: Vec<CellClass>,
    /// Assembly of each `(i, j)` column, independent of height.
    pub column_assembly: Vec<Option<(u8, u8)>>,
    pub z_core_inlet: f64,
    /// Index of the first core cell layer; the sensor face layer 0.
    pub k_core_inlet: usize,
    pub inlets: Vec<InletPatch>,
    pub assembly_map: AssemblyMap,
    pub sides: SideBoundary,
    pub config: DomainConfig,
}

impl Domain {
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.nx * (j + self.ny * k)
    }

    pub fn ijk(&self, idx: usize) -> (usize, usize, usize) {
        (idx % self.nx, (idx / self.nx) % self.ny, idx / (self.nx * self.ny))
    }

    pub fn len(&self) -> usize {
        self.cell_class.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cell_class.is_empty()
    }

    pub fn class(&self, i: usize, j: usize, k: usize) -> CellClass {
        self.cell_class[self.index(i, j, k)]
    }

    pub fn center(&self, i: usize, j: usize, k: usize) -> [f64; 3] {
        [
            self.origin[0] + (i as f64 + 0.5) * self.dx,
            self.origin[1] + (j as f64 + 0.5) * self.dy,
            self.origin[2] + (k as f64 + 0.5) * self.dz,
        ]
    }

    pub fn cell_volume(&self) -> f64 {
        self.dx * self.dy * self.dz
    }

    /// Face area normal to `axis`.
    pub fn face_area(&self, axis: usize) -> f64 {
        match axis {
            0 => self.dy * self.dz,
            1 => self.dx * self.dz,
            _ => self.dx * self.dy,
        }
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        [self.dx, self.dy, self.dz][axis]
    }

    /// Neighbor index in direction `dir`, if inside the box.
    pub fn neighbor(&self, idx: usize, dir: Dir) -> Option<usize> {
        let (i, j, k) = self.ijk(idx);
        let (i, j, k) = (i as isize, j as isize, k as isize);
        let (i, j, k) = match dir {
            Dir::XMinus => (i - 1, j, k),
            Dir::XPlus => (i + 1, j, k),
            Dir::YMinus => (i, j - 1, k),
            Dir::YPlus => (i, j + 1, k),
            Dir::ZMinus => (i, j, k - 1),
            Dir::ZPlus => (i, j, k + 1),
        };
        if i < 0 || j < 0 || k < 0 || i >= self.nx as isize || j >= self.ny as isize || k >= self.nz as isize {
            return None;
        }
        Some(self.index(i as usize, j as usize, k as usize))
    }

    pub fn assembly_of_cell(&self, i: usize, j: usize, k: usize) -> Option<(usize, usize)> {
        if self.class(i, j, k) != CellClass::Porous {
            return None;
        }
        self.column_assembly[i + self.nx * j].map(|(r, c)| (r as usize, c as usize))
    }

    pub fn count(&self, class: CellClass) -> usize {
        self.cell_class.iter().filter(|c| **c == class).count()
    }

    pub fn inlet_cell_count(&self) -> usize {
        self.cell_class.iter().filter(|c| matches!(c, CellClass::Inlet { .. })).count()
    }

    /// Number of `(i, j)` columns assigned to each assembly.
    pub fn columns_per_assembly(&self) -> Grid15<usize> {
        let mut counts = [[0; MAP_SIZE]; MAP_SIZE];
        for (r, c) in self.column_assembly.iter().flatten() {
            counts[*r as usize][*c as usize] += 1;
        }
        counts
    }

    /// True when every inlet-to-outlet path through fluid cells passes
    /// through the plenum or the porous core.
    pub fn bypass_free(&self) -> bool {
        let mut seen = vec![false; self.len()];
        let mut queue: VecDeque<usize> = VecDeque::new();
        for (idx, class) in self.cell_class.iter().enumerate() {
            if matches!(class, CellClass::Inlet { .. }) {
                seen[idx] = true;
                queue.push_back(idx);
            }
        }
        while let Some(idx) = queue.pop_front() {
            for dir in Dir::ALL {
                let Some(n) = self.neighbor(idx, dir) else { continue };
                if seen[n] {
                    continue;
                }
                let (i, j, k) = self.ijk(n);
                let in_core = self.column_assembly[i + self.nx * j].is_some();
                match self.cell_class[n] {
                    CellClass::Outlet => return false,
                    CellClass::Fluid if k >= self.k_core_inlet && !in_core => {
                        seen[n] = true;
                        queue.push_back(n);
                    }
                    _ => {}
                }
            }
        }
        true
    }
}

pub fn build_domain(config: &DomainConfig) -> Result<Domain, GeometryError> {
    let map = build_assembly_map(config.pitch)?;
    if config.nx == 0 || config.ny == 0 || config.nz < 3 {
        return Err(GeometryError::InvalidConfig("grid needs nx, ny >= 1 and nz >= 3"));
    }
    if !(config.core_height > 0.0) || config.plenum_height < 0.0 {
        return Err(GeometryError::InvalidConfig("core height must be positive and plenum height non-negative"));
    }
    let domain = match config.layout {
        Layout::Vessel => build_vessel(config, map)?,
        Layout::CoreBox => build_core_box(config, map)?,
        Layout::OpenBox => build_open_box(config, map)?,
    };
    if config.layout != Layout::OpenBox {
        let counts = domain.columns_per_assembly();
        for (r, c) in domain.assembly_map.valid_cells() {
            if counts[r][c] == 0 {
                return Err(GeometryError::ResolutionTooCoarse { row: r, col: c });
            }
        }
    }
    if config.layout == Layout::Vessel && !domain.bypass_free() {
        return Err(GeometryError::Bypass);
    }
    Ok(domain)
}

/// Cell-center coordinate along one axis, symmetric about zero for a
/// centered box.
fn centered(i: usize, n: usize, h: f64) -> f64 {
    (2.0 * i as f64 + 1.0 - n as f64) * 0.5 * h
}

fn build_vessel(config: &DomainConfig, map: AssemblyMap) -> Result<Domain, GeometryError> {
    let rv = config.vessel_radius;
    let rb = config.barrel_radius;
    if !(rb > 0.0 && rv > rb) {
        return Err(GeometryError::InvalidConfig("vessel radius must exceed barrel radius"));
    }
    let (nx, ny, nz) = (config.nx, config.ny, config.nz);
    let dx = 2.0 * rv / nx as f64;
    let dy = 2.0 * rv / ny as f64;
    // nz - 1 layers span plenum + core; the last layer is the outlet cap.
    let dz = (config.plenum_height + config.core_height) / (nz - 1) as f64;
    let k_core = libm::round(config.plenum_height / dz) as usize;
    if k_core >= nz - 1 {
        return Err(GeometryError::InvalidConfig("plenum leaves no room for the core"));
    }
    let column_assembly = footprint_columns(&map, nx, ny, dx, dy);
    let mut cells = vec![CellClass::Solid; nx * ny * nz];
    for k in 0..nz {
        for j in 0..ny {
            for i in 0..nx {
                let (x, y) = (centered(i, nx, dx), centered(j, ny, dy));
                let r = libm::sqrt(x * x + y * y);
                let in_core = column_assembly[i + nx * j].is_some();
                let class = if k == nz - 1 {
                    if in_core {
                        CellClass::Outlet
                    } else {
                        CellClass::Solid
                    }
                } else if k < k_core {
                    if r <= rv {
                        CellClass::Fluid
                    } else {
                        CellClass::Solid
                    }
                } else if in_core {
                    if config.porous_core {
                        CellClass::Porous
                    } else {
                        CellClass::Fluid
                    }
                } else if r > rb && r <= rv {
                    CellClass::Fluid
                } else {
                    CellClass::Solid
                };
                cells[i + nx * (j + ny * k)] = class;
            }
        }
    }
    // Downcomer cells sharing a face with a core column become barrel wall.
    for j in 0..ny {
        for i in 0..nx {
            if column_assembly[i + nx * j].is_some() {
                continue;
            }
            let touches_core = [(0, 1), (2, 1), (1, 0), (1, 2)].iter().any(|&(a, b)| {
                let (ni, nj) = ((i + a).wrapping_sub(1), (j + b).wrapping_sub(1));
                ni < nx && nj < ny && column_assembly[ni + nx * nj].is_some()
            });
            if touches_core {
                for k in k_core..nz - 1 {
                    cells[i + nx * (j + ny * k)] = CellClass::Solid;
                }
            }
        }
    }

    let top = (nz - 1) as f64 * dz;
    let half_width = libm::sqrt(config.inlet_patch_area) / 2.0;
    let zc = top - config.inlet_depth;
    if zc - half_width < k_core as f64 * dz || zc + half_width > top {
        return Err(GeometryError::InvalidConfig("inlet patches must fit in the downcomer"));
    }
    let origin = [-rv, -rv, 0.0];
    let mut inlets = Vec::with_capacity(4);
    // Patches at 0°, 90°, 180°, 270°; in-patch axes rotate with the patch.
    let frames = [
        (Dir::XMinus, [rv, 0.0], [0.0, 1.0]),
        (Dir::YMinus, [0.0, rv], [-1.0, 0.0]),
        (Dir::XPlus, [-rv, 0.0], [0.0, -1.0]),
        (Dir::YPlus, [0.0, -rv], [1.0, 0.0]),
    ];
    for (p, (inward, c, t)) in frames.iter().enumerate() {
        inlets.push(InletPatch {
            center: [c[0], c[1], zc],
            inward: *inward,
            e1: [t[0], t[1], 0.0],
            e2: [0.0, 0.0, -1.0],
            half_width,
        });
        for k in k_core..nz - 1 {
            let z = (k as f64 + 0.5) * dz;
            if (z - zc).abs() > half_width {
                continue;
            }
            for idx in boundary_column(*inward, nx, ny) {
                let (i, j) = idx;
                let (x, y) = (centered(i, nx, dx), centered(j, ny, dy));
                let tangential = x * t[0] + y * t[1];
                let cell = i + nx * (j + ny * k);
                if tangential.abs() <= half_width && cells[cell] == CellClass::Fluid {
                    cells[cell] = CellClass::Inlet { patch: p as u8 };
                }
            }
        }
    }

    Ok(Domain {
        nx,
        ny,
        nz,
        dx,
        dy,
        dz,
        origin,
        cell_class: cells,
        column_assembly,
        z_core_inlet: k_core as f64 * dz,
        k_core_inlet: k_core,
        inlets,
        assembly_map: map,
        sides: SideBoundary::Wall,
        config: config.clone(),
    })
}

/// `(i, j)` columns on the box face opposite to `inward`.
fn boundary_column(inward: Dir, nx: usize, ny: usize) -> Vec<(usize, usize)> {
    match inward {
        Dir::XMinus => (0..ny).map(|j| (nx - 1, j)).collect(),
        Dir::XPlus => (0..ny).map(|j| (0, j)).collect(),
        Dir::YMinus => (0..nx).map(|i| (i, ny - 1)).collect(),
        Dir::YPlus => (0..nx).map(|i| (i, 0)).collect(),
        Dir::ZMinus | Dir::ZPlus => Vec::new(),
    }
}

fn footprint_columns(map: &AssemblyMap, nx: usize, ny: usize, dx: f64, dy: f64) -> Vec<Option<(u8, u8)>> {
    let mut cols = vec![None; nx * ny];
    for j in 0..ny {
        for i in 0..nx {
            cols[i + nx * j] = map
                .locate(centered(i, nx, dx), centered(j, ny, dy))
                .map(|(r, c)| (r as u8, c as u8));
        }
    }
    cols
}

fn build_core_box(config: &DomainConfig, map: AssemblyMap) -> Result<Domain, GeometryError> {
    let (nx, ny, nz) = (config.nx, config.ny, config.nz);
    let width = MAP_SIZE as f64 * config.pitch;
    let dx = width / nx as f64;
    let dy = width / ny as f64;
    // Layer 0 holds inlet cells, layer nz-1 outlet cells.
    let dz = config.core_height / (nz - 2) as f64;
    let column_assembly = footprint_columns(&map, nx, ny, dx, dy);
    let mut cells = vec![CellClass::Solid; nx * ny * nz];
    for k in 0..nz {
        for j in 0..ny {
            for i in 0..nx {
                if column_assembly[i + nx * j].is_none() {
                    continue;
                }
                cells[i + nx * (j + ny * k)] = if k == 0 {
                    CellClass::Inlet { patch: 0 }
                } else if k == nz - 1 {
                    CellClass::Outlet
                } else if config.porous_core {
                    CellClass::Porous
                } else {
                    CellClass::Fluid
                };
            }
        }
    }
    Ok(Domain {
        nx,
        ny,
        nz,
        dx,
        dy,
        dz,
        origin: [-width / 2.0, -width / 2.0, -dz],
        cell_class: cells,
        column_assembly,
        z_core_inlet: 0.0,
        k_core_inlet: 1,
        inlets: vec![bottom_patch(width / 2.0)],
        assembly_map: map,
        sides: SideBoundary::Wall,
        config: config.clone(),
    })
}

fn bottom_patch(half_width: f64) -> InletPatch {
    InletPatch {
        center: [0.0, 0.0, 0.0],
        inward: Dir::ZPlus,
        e1: [1.0, 0.0, 0.0],
        e2: [0.0, 1.0, 0.0],
        half_width,
    }
}

fn build_open_box(config: &DomainConfig, map: AssemblyMap) -> Result<Domain, GeometryError> {
    let (nx, ny, nz) = (config.nx, config.ny, config.nz);
    if !(config.box_width > 0.0) {
        return Err(GeometryError::InvalidConfig("box width must be positive"));
    }
    let dx = config.box_width / nx as f64;
    let dy = config.box_width / ny as f64;
    let dz = config.core_height / (nz - 2) as f64;
    let middle = ((MAP_SIZE / 2) as u8, (MAP_SIZE / 2) as u8);
    let mut cells = vec![CellClass::Fluid; nx * ny * nz];
    for (idx, cell) in cells.iter_mut().enumerate() {
        let k = idx / (nx * ny);
        *cell = if k == 0 {
            CellClass::Inlet { patch: 0 }
        } else if k == nz - 1 {
            CellClass::Outlet
        } else if config.porous_core {
            CellClass::Porous
        } else {
            CellClass::Fluid
        };
    }
    let column_assembly = if config.porous_core { vec![Some(middle); nx * ny] } else { vec![None; nx * ny] };
    Ok(Domain {
        nx,
        ny,
        nz,
        dx,
        dy,
        dz,
        origin: [-config.box_width / 2.0, -config.box_width / 2.0, -dz],
        cell_class: cells,
        column_assembly,
        z_core_inlet: 0.0,
        k_core_inlet: 1,
        inlets: vec![bottom_patch(config.box_width / 2.0)],
        assembly_map: map,
        sides: config.sides,
        config: config.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn assembly_map_counts_and_symmetry() {
        let map = build_assembly_map(0.215).unwrap();
        assert_eq!(map.count, 193);
        assert!(!map.valid[0][0]);
        assert!(map.valid[7].iter().all(|v| *v));
        assert_eq!(rot90(&map.valid), map.valid);
        let mut mirrored = map.valid;
        mirrored.reverse();
        assert_eq!(mirrored, map.valid);
        for row in map.valid {
            let mut m = row;
            m.reverse();
            assert_eq!(m, row);
        }
        let widths: Vec<usize> = map.valid.iter().map(|r| r.iter().filter(|v| **v).count()).collect();
        assert_eq!(widths, ROW_WIDTHS.to_vec());
    }

    #[test]
    fn bad_pitch_rejected() {
        assert!(matches!(build_assembly_map(0.0), Err(GeometryError::BadPitch(_))));
        assert!(matches!(build_assembly_map(-1.0), Err(GeometryError::BadPitch(_))));
    }

    #[test]
    fn rot90_moves_corner_counterclockwise() {
        let mut g = [[0u8; MAP_SIZE]; MAP_SIZE];
        // (row 7, col 14) is on +x; a CCW quarter turn puts it on +y (row 14, col 7).
        g[7][14] = 1;
        let r = rot90(&g);
        assert_eq!(r[14][7], 1);
        assert_eq!(rot90(&rot90(&rot90(&rot90(&g)))), g);
    }

    #[test]
    fn locate_matches_center() {
        let map = AssemblyMap::standard();
        for (r, c) in map.valid_cells() {
            let (x, y) = map.center(r, c);
            assert_eq!(map.locate(x, y), Some((r, c)));
        }
        assert_eq!(map.locate(-1.6, -1.6), None);
    }

    #[test]
    fn core_box_porous_count_is_analytic() {
        let config = DomainConfig { layout: Layout::CoreBox, nx: 30, ny: 30, nz: 12, ..DomainConfig::default() };
        let d = build_domain(&config).unwrap();
        // Two cells per pitch in-plane, 10 porous layers.
        assert_eq!(d.count(CellClass::Porous), 193 * 4 * 10);
        assert_eq!(d.count(CellClass::Outlet), 193 * 4);
        assert_eq!(d.inlet_cell_count(), 193 * 4);
    }

    #[test]
    fn open_box_without_porous_is_all_fluid() {
        let config = DomainConfig {
            layout: Layout::OpenBox,
            nx: 4,
            ny: 3,
            nz: 6,
            porous_core: false,
            ..DomainConfig::default()
        };
        let d = build_domain(&config).unwrap();
        for k in 1..5 {
            for j in 0..3 {
                for i in 0..4 {
                    assert_eq!(d.class(i, j, k), CellClass::Fluid);
                }
            }
        }
        assert_eq!(d.count(CellClass::Solid), 0);
    }

    #[test]
    fn coarse_core_box_rejected() {
        let config = DomainConfig { layout: Layout::CoreBox, nx: 7, ny: 7, nz: 5, ..DomainConfig::default() };
        assert!(matches!(build_domain(&config), Err(GeometryError::ResolutionTooCoarse { .. })));
    }

    #[test]
    fn barrel_separates_downcomer_from_core() {
        for n in [34, 40, 41, 43, 48] {
            let d = build_domain(&DomainConfig { nx: n, ny: n, nz: 40, ..DomainConfig::default() }).unwrap();
            for k in d.k_core_inlet..d.nz - 1 {
                for j in 0..n {
                    for i in 0..n {
                        if d.cell_class[d.index(i, j, k)] != CellClass::Fluid {
                            continue;
                        }
                        for dir in [Dir::XMinus, Dir::XPlus, Dir::YMinus, Dir::YPlus] {
                            if let Some(m) = d.neighbor(d.index(i, j, k), dir) {
                                assert_ne!(d.cell_class[m], CellClass::Porous, "n={n} cell ({i}, {j}, {k})");
                            }
                        }
                    }
                }
            }
        }
    }
}
