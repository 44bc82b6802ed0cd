//! Assembly sensor planes and the recorded mass-flow dataset.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::geometry::{CellClass, Domain, Grid15, MAP_SIZE};
use crate::solver::{FlowMesh, FlowState, Link};

/// Number of axial sensor layers.
pub const LAYERS: usize = 9;
/// Axial spacing of the sensor layers (m).
pub const LAYER_SPACING: f64 = 0.5;
/// Values per snapshot.
pub const SNAPSHOT_LEN: usize = LAYERS * MAP_SIZE * MAP_SIZE;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ProbeError {
    #[error("sensor layer {layer} lies above the top of the core")]
    CoreTooShort { layer: usize },
    #[error("assembly ({row}, {col}) has no faces in layer {layer}")]
    EmptyPlane { layer: usize, row: usize, col: usize },
    #[error("dataset dimensions do not match: {0}")]
    DimensionMismatch(&'static str),
}

/// One assembly-wise mass-flow sensor per (layer, row, col).
#[derive(Debug, Clone, PartialEq)]
pub struct SensorPlanes {
    /// Nominal elevations (m).
    pub layer_elevations: [f64; LAYERS],
    /// Elevation of the face layer each sensor layer snapped to (m).
    pub snapped_elevations: [f64; LAYERS],
    /// Face-layer index `kf`: the face between cell layers `kf - 1` and `kf`.
    pub face_layer: [usize; LAYERS],
    /// Domain columns `i + nx j` of each valid assembly, row-major over the
    /// map.
    pub columns: Vec<((usize, usize), Vec<usize>)>,
    pub geom_mask: Grid15<bool>,
    pub face_area: f64,
}

impl SensorPlanes {
    pub fn plane_count(&self) -> usize {
        LAYERS * self.columns.len()
    }
}

pub fn build_sensor_planes(domain: &Domain) -> Result<SensorPlanes, ProbeError> {
    let top_face = domain.nz; // face above the last cell layer
    let mut layer_elevations = [0.0; LAYERS];
    let mut snapped = [0.0; LAYERS];
    let mut face_layer = [0usize; LAYERS];
    // The core ends below the outlet cap; the highest usable face is the
    // bottom face of the outlet layer.
    let core_top = domain.origin[2] + (domain.nz - 1) as f64 * domain.dz;
    for j in 0..LAYERS {
        let z = domain.z_core_inlet + j as f64 * LAYER_SPACING;
        let kf = libm::round((z - domain.origin[2]) / domain.dz) as i64;
        if z > core_top + 0.5 * domain.dz || kf < 1 || kf as usize >= top_face {
            return Err(ProbeError::CoreTooShort { layer: j });
        }
        layer_elevations[j] = z;
        face_layer[j] = kf as usize;
        snapped[j] = domain.origin[2] + kf as f64 * domain.dz;
    }
    let mut columns = Vec::with_capacity(crate::geometry::ASSEMBLY_COUNT);
    let mut per_assembly: Vec<Vec<usize>> = vec![Vec::new(); MAP_SIZE * MAP_SIZE];
    for (col_idx, a) in domain.column_assembly.iter().enumerate() {
        if let Some((r, c)) = a {
            per_assembly[*r as usize * MAP_SIZE + *c as usize].push(col_idx);
        }
    }
    for (r, c) in domain.assembly_map.valid_cells() {
        let cols = core::mem::take(&mut per_assembly[r * MAP_SIZE + c]);
        if cols.is_empty() {
            return Err(ProbeError::EmptyPlane { layer: 0, row: r, col: c });
        }
        for (j, &kf) in face_layer.iter().enumerate() {
            let k = kf - 1;
            let any_flow = cols.iter().any(|&ci| {
                let lower = domain.cell_class[ci + domain.nx * domain.ny * k];
                let upper = domain.cell_class[ci + domain.nx * domain.ny * (k + 1)];
                lower != CellClass::Solid || upper != CellClass::Solid
            });
            if !any_flow {
                return Err(ProbeError::EmptyPlane { layer: j, row: r, col: c });
            }
        }
        columns.push(((r, c), cols));
    }
    Ok(SensorPlanes {
        layer_elevations,
        snapped_elevations: snapped,
        face_layer,
        columns,
        geom_mask: domain.assembly_map.valid,
        face_area: domain.face_area(2),
    })
}

/// Upward mass flux (kg/s) through the horizontal face above domain cell
/// `lower`.
fn upward_flux(state: &FlowState, mesh: &FlowMesh, lower: usize, plane_cells: usize) -> f64 {
    let a = mesh.active_of[lower];
    if a != crate::solver::NO_CELL {
        return match mesh.links[a as usize][5] {
            Link::Cell(_) => state.flux[a as usize][2],
            Link::Outlet(f) => state.outlet_flux[f as usize],
            _ => 0.0,
        };
    }
    let upper = lower + plane_cells;
    let b = mesh.active_of.get(upper).copied().unwrap_or(crate::solver::NO_CELL);
    if b != crate::solver::NO_CELL {
        if let Link::Inlet(f) = mesh.links[b as usize][4] {
            return state.inlet_flux[f as usize];
        }
    }
    0.0
}

/// Mass flow through every sensor plane, `[layer][row][col]`, as the sum of
/// face mass fluxes over the assembly footprint. Invalid cells are 0.
pub fn record_snapshot(state: &FlowState, planes: &SensorPlanes, mesh: &FlowMesh, domain: &Domain) -> Vec<f64> {
    let mut out = vec![0.0; SNAPSHOT_LEN];
    let plane_cells = domain.nx * domain.ny;
    for ((r, c), cols) in &planes.columns {
        for (j, &kf) in planes.face_layer.iter().enumerate() {
            let base = (kf - 1) * plane_cells;
            let m: f64 = cols.iter().map(|&ci| upward_flux(state, mesh, base + ci, plane_cells)).sum();
            out[(j * MAP_SIZE + r) * MAP_SIZE + c] = m;
        }
    }
    out
}

/// Recorded assembly mass flows, `values[t][layer][row][col]` in kg/s.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowDataset {
    pub t_len: usize,
    pub values: Vec<f32>,
    pub geom_mask: Grid15<bool>,
    /// Time of the first snapshot (s).
    pub t0: f64,
    pub dt_record: f64,
    pub fidelity: String,
    /// Digest of the configuration that produced the data.
    pub provenance: String,
}

impl FlowDataset {
    pub fn empty(geom_mask: Grid15<bool>, t0: f64, dt_record: f64) -> Self {
        Self {
            t_len: 0,
            values: Vec::new(),
            geom_mask,
            t0,
            dt_record,
            fidelity: String::new(),
            provenance: String::new(),
        }
    }

    pub fn from_values(values: Vec<f32>, geom_mask: Grid15<bool>, t0: f64, dt_record: f64) -> Result<Self, ProbeError> {
        if values.len() % SNAPSHOT_LEN != 0 {
            return Err(ProbeError::DimensionMismatch("value count is not a multiple of 9 x 15 x 15"));
        }
        let mut d = Self::empty(geom_mask, t0, dt_record);
        d.t_len = values.len() / SNAPSHOT_LEN;
        d.values = values;
        Ok(d)
    }

    /// Appends one snapshot, zeroing invalid cells.
    pub fn push(&mut self, snapshot: &[f64]) -> Result<(), ProbeError> {
        if snapshot.len() != SNAPSHOT_LEN {
            return Err(ProbeError::DimensionMismatch("snapshot must hold 9 x 15 x 15 values"));
        }
        for l in 0..LAYERS {
            for r in 0..MAP_SIZE {
                for c in 0..MAP_SIZE {
                    let v = if self.geom_mask[r][c] { snapshot[(l * MAP_SIZE + r) * MAP_SIZE + c] as f32 } else { 0.0 };
                    self.values.push(v);
                }
            }
        }
        self.t_len += 1;
        Ok(())
    }

    #[inline]
    pub fn get(&self, t: usize, layer: usize, row: usize, col: usize) -> f32 {
        self.values[((t * LAYERS + layer) * MAP_SIZE + row) * MAP_SIZE + col]
    }

    pub fn snapshot(&self, t: usize) -> &[f32] {
        &self.values[t * SNAPSHOT_LEN..(t + 1) * SNAPSHOT_LEN]
    }

    /// Time of snapshot `t`.
    pub fn time(&self, t: usize) -> f64 {
        self.t0 + t as f64 * self.dt_record
    }

    /// Summed mass flow of one layer at one time.
    pub fn layer_sum(&self, t: usize, layer: usize) -> f64 {
        let s = &self.snapshot(t)[layer * MAP_SIZE * MAP_SIZE..(layer + 1) * MAP_SIZE * MAP_SIZE];
        s.iter().map(|v| *v as f64).sum()
    }

    /// Values are finite and zero outside the geometry mask.
    pub fn is_consistent(&self) -> bool {
        if self.values.len() != self.t_len * SNAPSHOT_LEN {
            return false;
        }
        self.values.chunks(MAP_SIZE * MAP_SIZE).all(|plane| {
            plane.iter().enumerate().all(|(i, v)| {
                let (r, c) = (i / MAP_SIZE, i % MAP_SIZE);
                if self.geom_mask[r][c] {
                    v.is_finite()
                } else {
                    v.to_bits() == 0
                }
            })
        })
    }
}
