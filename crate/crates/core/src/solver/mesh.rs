use alloc::vec;
use alloc::vec::Vec;

use crate::geometry::{CellClass, Dir, Domain, Layout, SideBoundary};

/// Marker in [`FlowMesh::nbr`] for a face without a neighboring flow cell.
pub const NO_CELL: u32 = u32::MAX;

/// What lies across one face of a flow cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Link {
    Cell(u32),
    Wall,
    Symmetry,
    Inlet(u32),
    Outlet(u32),
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryFace {
    /// Flow cell owning the face.
    pub cell: u32,
    /// Direction from the owner cell towards the face.
    pub dir: Dir,
    /// Inlet patch index (0 for outlet faces).
    pub patch: usize,
    pub center: [f64; 3],
    pub area: f64,
}

/// Flow-cell topology derived from a [`Domain`]. Flow cells are numbered in
/// domain index order (x fastest, then y, then z).
#[derive(Debug, Clone)]
pub struct FlowMesh {
    pub cells: Vec<usize>,
    /// Grid coordinates `(i, j, k)` of each flow cell.
    pub coords: Vec<[u32; 3]>,
    pub active_of: Vec<u32>,
    pub nbr: Vec<[u32; 6]>,
    /// `nbr` with missing neighbors pointing at the cell itself, the
    /// encoding expected by the linear solvers.
    pub stencil: Vec<[u32; 6]>,
    pub links: Vec<[Link; 6]>,
    pub porous: Vec<bool>,
    pub inlet_faces: Vec<BoundaryFace>,
    pub outlet_faces: Vec<BoundaryFace>,
    pub volume: f64,
    pub area: [f64; 3],
    pub spacing: [f64; 3],
}

impl FlowMesh {
    pub fn new(domain: &Domain) -> Self {
        let mut cells = Vec::new();
        let mut active_of = vec![NO_CELL; domain.len()];
        for (idx, class) in domain.cell_class.iter().enumerate() {
            if class.is_flow() {
                active_of[idx] = cells.len() as u32;
                cells.push(idx);
            }
        }
        let exterior_side = match (domain.config.layout, domain.sides) {
            (Layout::OpenBox, SideBoundary::Symmetry) => Link::Symmetry,
            _ => Link::Wall,
        };
        let mut nbr = Vec::with_capacity(cells.len());
        let mut links = Vec::with_capacity(cells.len());
        let mut porous = Vec::with_capacity(cells.len());
        let mut inlet_faces = Vec::new();
        let mut outlet_faces = Vec::new();
        for (a, &idx) in cells.iter().enumerate() {
            let mut n6 = [NO_CELL; 6];
            let mut l6 = [Link::Wall; 6];
            let (i, j, k) = domain.ijk(idx);
            let c = domain.center(i, j, k);
            for dir in Dir::ALL {
                let d = dir as usize;
                let Some(n) = domain.neighbor(idx, dir) else {
                    l6[d] = if dir.axis() < 2 { exterior_side } else { Link::Wall };
                    continue;
                };
                let half = 0.5 * domain.spacing(dir.axis());
                let unit = dir.unit();
                let face_center = [c[0] + unit[0] * half, c[1] + unit[1] * half, c[2] + unit[2] * half];
                l6[d] = match domain.cell_class[n] {
                    CellClass::Fluid | CellClass::Porous => {
                        n6[d] = active_of[n];
                        Link::Cell(active_of[n])
                    }
                    CellClass::Solid => Link::Wall,
                    CellClass::Inlet { patch } => {
                        let patch = patch as usize;
                        if domain.inlets[patch].inward == dir.opposite() {
                            inlet_faces.push(BoundaryFace {
                                cell: a as u32,
                                dir,
                                patch,
                                center: face_center,
                                area: domain.face_area(dir.axis()),
                            });
                            Link::Inlet(inlet_faces.len() as u32 - 1)
                        } else {
                            Link::Wall
                        }
                    }
                    CellClass::Outlet => {
                        if dir == Dir::ZPlus {
                            outlet_faces.push(BoundaryFace {
                                cell: a as u32,
                                dir,
                                patch: 0,
                                center: face_center,
                                area: domain.face_area(2),
                            });
                            Link::Outlet(outlet_faces.len() as u32 - 1)
                        } else {
                            Link::Wall
                        }
                    }
                };
            }
            nbr.push(n6);
            links.push(l6);
            porous.push(domain.cell_class[idx] == CellClass::Porous);
        }
        let coords = cells
            .iter()
            .map(|&idx| {
                let (i, j, k) = domain.ijk(idx);
                [i as u32, j as u32, k as u32]
            })
            .collect();
        let stencil = nbr
            .iter()
            .enumerate()
            .map(|(p, row): (usize, &[u32; 6])| row.map(|q| if q == NO_CELL { p as u32 } else { q }))
            .collect();
        Self {
            cells,
            coords,
            stencil,
            active_of,
            nbr,
            links,
            porous,
            inlet_faces,
            outlet_faces,
            volume: domain.cell_volume(),
            area: [domain.face_area(0), domain.face_area(1), domain.face_area(2)],
            spacing: [domain.dx, domain.dy, domain.dz],
        }
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    /// Mass flux (kg/s) leaving cell `p` through its face in direction `dir`,
    /// for internal faces. `flux[c][axis]` stores the flux through the plus
    /// face of `c`.
    #[inline]
    pub fn internal_outflow(&self, flux: &[[f64; 3]], p: usize, dir: usize) -> f64 {
        let axis = dir / 2;
        if dir % 2 == 1 {
            flux[p][axis]
        } else {
            -flux[self.nbr[p][dir] as usize][axis]
        }
    }

    pub fn has_wall(&self, p: usize) -> bool {
        self.links[p].iter().any(|l| *l == Link::Wall)
    }
}
