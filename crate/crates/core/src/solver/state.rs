use alloc::vec;
use alloc::vec::Vec;

use crate::geometry::Domain;

use super::mesh::FlowMesh;
use super::swirl::{SwirlBC, SwirlSettings};
use super::turbulence::TurbConstants;
use super::{FluidProps, SolverError, SolverSettings};

/// Collocated flow fields on the flow cells of a [`FlowMesh`], with the two
/// previous time levels needed by BDF2.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowState {
    pub u: [Vec<f64>; 3],
    pub u_old: [Vec<f64>; 3],
    pub u_old2: [Vec<f64>; 3],
    pub p: Vec<f64>,
    pub k: Vec<f64>,
    pub k_old: Vec<f64>,
    pub k_old2: Vec<f64>,
    pub eps: Vec<f64>,
    pub eps_old: Vec<f64>,
    pub eps_old2: Vec<f64>,
    pub nu_t: Vec<f64>,
    /// Mass flux (kg/s) through the plus face of each cell along each axis;
    /// zero where that face is not shared with another flow cell.
    pub flux: Vec<[f64; 3]>,
    /// Mass flux entering through each inlet face.
    pub inlet_flux: Vec<f64>,
    /// Mass flux leaving through each outlet face.
    pub outlet_flux: Vec<f64>,
    pub t: f64,
    /// Completed time steps.
    pub step: u64,
}

impl FlowState {
    /// Quiescent field with uniform `k0`, `eps0`.
    pub fn quiescent(mesh: &FlowMesh, k0: f64, eps0: f64, c_mu: f64) -> Self {
        let n = mesh.len();
        let zeros = vec![0.0; n];
        let z3 = [zeros.clone(), zeros.clone(), zeros.clone()];
        Self {
            u: z3.clone(),
            u_old: z3.clone(),
            u_old2: z3,
            p: zeros.clone(),
            k: vec![k0; n],
            k_old: vec![k0; n],
            k_old2: vec![k0; n],
            eps: vec![eps0; n],
            eps_old: vec![eps0; n],
            eps_old2: vec![eps0; n],
            nu_t: vec![c_mu * k0 * k0 / eps0; n],
            flux: vec![[0.0; 3]; n],
            inlet_flux: vec![0.0; mesh.inlet_faces.len()],
            outlet_flux: vec![0.0; mesh.outlet_faces.len()],
            t: 0.0,
            step: 0,
        }
    }

    pub fn is_finite(&self) -> bool {
        let all = |v: &[f64]| v.iter().all(|x| x.is_finite());
        self.u.iter().all(|c| all(c)) && all(&self.p) && all(&self.k) && all(&self.eps) && all(&self.nu_t)
    }
}

/// Fixed boundary values on every inlet face.
#[derive(Debug, Clone, PartialEq)]
pub struct InletState {
    pub velocity: Vec<[f64; 3]>,
    pub mass_flux: Vec<f64>,
    pub k: f64,
    pub eps: f64,
    /// Resolved per-patch swirl profiles.
    pub patches: Vec<SwirlBC>,
}

impl InletState {
    pub fn total_mass_flux(&self) -> f64 {
        self.mass_flux.iter().sum()
    }

    /// Resolves swirl settings against the rasterized inlet faces.
    pub fn new(
        domain: &Domain,
        mesh: &FlowMesh,
        swirl: &SwirlSettings,
        props: &FluidProps,
        settings: &SolverSettings,
        constants: &TurbConstants,
    ) -> Result<Self, SolverError> {
        let n_patches = domain.inlets.len();
        let alphas: Vec<f64> = match swirl.alpha_s.len() {
            1 => vec![swirl.alpha_s[0]; n_patches],
            n if n == n_patches => swirl.alpha_s.clone(),
            _ => return Err(SolverError::InvalidConfig("alpha_s needs one value or one per inlet patch")),
        };
        if alphas.iter().any(|a| !a.is_finite()) {
            return Err(SolverError::InvalidConfig("alpha_s must be finite"));
        }
        let area: f64 = mesh.inlet_faces.iter().map(|f| f.area).sum();
        let u_axial = match swirl.u_axial {
            Some(u) => u,
            None if area > 0.0 => swirl.mass_flow / (props.rho * area),
            None => 0.0,
        };
        if !(u_axial >= 0.0 && u_axial.is_finite()) {
            return Err(SolverError::InvalidConfig("inlet speed must be non-negative"));
        }
        let mut patches = Vec::with_capacity(n_patches);
        for (i, patch) in domain.inlets.iter().enumerate() {
            let eps_reg = swirl.eps_reg.unwrap_or_else(|| {
                let h = 0.01 * patch.half_width;
                h * h
            });
            if !(eps_reg > 0.0) {
                return Err(SolverError::InvalidConfig("eps_reg must be positive"));
            }
            patches.push(SwirlBC { alpha_s: alphas[i], u_axial, eps_reg });
        }
        let mut velocity = Vec::with_capacity(mesh.inlet_faces.len());
        let mut mass_flux = Vec::with_capacity(mesh.inlet_faces.len());
        for face in &mesh.inlet_faces {
            let patch = &domain.inlets[face.patch];
            let v = patches[face.patch].velocity_at(patch, face.center);
            let normal = patch.inward.unit();
            mass_flux.push(props.rho * face.area * super::swirl::dot(v, normal));
            velocity.push(v);
        }
        let width = domain.inlets.first().map(|p| 2.0 * p.half_width).unwrap_or(1.0);
        let (k, eps) = inlet_turbulence(u_axial, settings.intensity, settings.length_fraction * width, constants.c_mu);
        Ok(Self {
            velocity,
            mass_flux,
            k: k.max(settings.k_floor),
            eps: eps.max(settings.eps_floor),
            patches,
        })
    }
}

/// `k = 1.5 (I U)²`, `eps = C_mu^(3/4) k^(3/2) / l`.
pub fn inlet_turbulence(speed: f64, intensity: f64, length: f64, c_mu: f64) -> (f64, f64) {
    let ui = intensity * speed;
    let k = 1.5 * ui * ui;
    let eps = libm::pow(c_mu, 0.75) * libm::pow(k, 1.5) / length;
    (k, eps)
}
