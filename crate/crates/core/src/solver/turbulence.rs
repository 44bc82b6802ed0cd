use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::mesh::{FlowMesh, NO_CELL};
use super::SolverError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TurbConstants {
    pub c_mu: f64,
    pub sigma_k: f64,
    pub sigma_eps: f64,
    pub c_eps1: f64,
    pub c_eps2: f64,
    /// Weight of the `k |Π|` dissipation source; 0 recovers standard k-ε.
    pub c_eps3: f64,
}

impl Default for TurbConstants {
    fn default() -> Self {
        Self { c_mu: 0.09, sigma_k: 1.0, sigma_eps: 1.3, c_eps1: 1.44, c_eps2: 1.92, c_eps3: 0.8 }
    }
}

impl TurbConstants {
    pub fn validate(&self) -> Result<(), SolverError> {
        let positive = [self.c_mu, self.sigma_k, self.sigma_eps, self.c_eps1, self.c_eps2];
        if !positive.iter().all(|c| *c > 0.0 && c.is_finite()) || !(self.c_eps3 >= 0.0 && self.c_eps3.is_finite()) {
            return Err(SolverError::InvalidConfig("turbulence constants must be positive (c_eps3 >= 0)"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TurbulenceMode {
    KEpsilon,
    StructEpsilon,
}

/// Log-law wall function parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WallLaw {
    pub kappa: f64,
    pub e: f64,
    /// `y*` below which the wall cell is treated as laminar.
    pub y_star_laminar: f64,
}

impl Default for WallLaw {
    fn default() -> Self {
        Self { kappa: 0.41, e: 9.8, y_star_laminar: 11.225 }
    }
}

/// Wall-shear treatment of one wall-adjacent cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WallShear {
    /// Implicit coefficient on the tangential velocity, `tau_w = coeff * u_t / A` (kg/s).
    pub coeff: f64,
    /// Turbulence production in the cell (m²/s³); `None` in the laminar sublayer.
    pub production: Option<f64>,
    /// Dissipation fixed at the cell (m²/s³).
    pub eps: f64,
}

impl WallLaw {
    /// `y` is the wall distance of the cell center, `u_t` the tangential
    /// speed, `area` the wall face area.
    pub fn shear(&self, k: f64, u_t: f64, y: f64, nu: f64, rho: f64, area: f64, c_mu: f64) -> WallShear {
        let cmu14 = libm::pow(c_mu, 0.25);
        let sqrt_k = libm::sqrt(k);
        let y_star = cmu14 * sqrt_k * y / nu;
        let eps = cmu14 * cmu14 * cmu14 * k * sqrt_k / (self.kappa * y);
        if y_star > self.y_star_laminar {
            let tau_per_u = rho * self.kappa * cmu14 * sqrt_k / libm::log(self.e * y_star);
            let tau_over_rho = tau_per_u * u_t / rho;
            WallShear {
                coeff: tau_per_u * area,
                production: Some(tau_over_rho * cmu14 * sqrt_k / (self.kappa * y)),
                eps,
            }
        } else {
            WallShear { coeff: rho * nu * area / y, production: None, eps }
        }
    }
}

/// Cell gradients of a flow-cell field: central differences where both
/// neighbors along an axis are flow cells, one-sided where only one is,
/// zero where neither is.
pub fn gradients(mesh: &FlowMesh, field: &[f64]) -> Vec<[f64; 3]> {
    let mut out = vec![[0.0; 3]; mesh.len()];
    gradients_into(mesh, field, &mut out);
    out
}

pub fn gradients_into(mesh: &FlowMesh, field: &[f64], out: &mut [[f64; 3]]) {
    for p in 0..mesh.len() {
        let n = &mesh.nbr[p];
        for axis in 0..3 {
            let h = mesh.spacing[axis];
            let (lo, hi) = (n[2 * axis], n[2 * axis + 1]);
            out[p][axis] = match (lo != NO_CELL, hi != NO_CELL) {
                (true, true) => (field[hi as usize] - field[lo as usize]) / (2.0 * h),
                (false, true) => (field[hi as usize] - field[p]) / h,
                (true, false) => (field[p] - field[lo as usize]) / h,
                (false, false) => 0.0,
            };
        }
    }
}

/// `grad[i][j] = ∂u_i/∂x_j`.
pub type VelocityGradient = [[f64; 3]; 3];

/// `Q = -½ A_ij A_ji`.
pub fn q_invariant(a: &VelocityGradient) -> f64 {
    let mut s = 0.0;
    for i in 0..3 {
        for j in 0..3 {
            s += a[i][j] * a[j][i];
        }
    }
    -0.5 * s
}

/// `2 S_ij S_ij` with `S` the symmetric part of `a`.
pub fn strain_rate_squared(a: &VelocityGradient) -> f64 {
    let mut s = 0.0;
    for i in 0..3 {
        for j in 0..3 {
            let sij = 0.5 * (a[i][j] + a[j][i]);
            s += sij * sij;
        }
    }
    2.0 * s
}

pub fn velocity_gradient_at(grads: &[Vec<[f64; 3]>; 3], p: usize) -> VelocityGradient {
    [grads[0][p], grads[1][p], grads[2][p]]
}

/// Per-cell STRUCT diagnostics. Where `Q = 0` the resolved time scale is
/// unbounded and stored as `f64::INFINITY`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct StructDiagnostics {
    pub q: Vec<f64>,
    pub pi_mag: Vec<f64>,
    pub tau_r: Vec<f64>,
    pub tau_m: Vec<f64>,
    pub alpha_ratio: Vec<f64>,
}

pub fn velocity_gradient_invariants(
    mesh: &FlowMesh,
    u: &[Vec<f64>; 3],
    k: &[f64],
    eps: &[f64],
    eps_floor: f64,
) -> StructDiagnostics {
    let grads = [gradients(mesh, &u[0]), gradients(mesh, &u[1]), gradients(mesh, &u[2])];
    let n = mesh.len();
    let mut d = StructDiagnostics {
        q: Vec::with_capacity(n),
        pi_mag: Vec::with_capacity(n),
        tau_r: Vec::with_capacity(n),
        tau_m: Vec::with_capacity(n),
        alpha_ratio: Vec::with_capacity(n),
    };
    for p in 0..n {
        let q = q_invariant(&velocity_gradient_at(&grads, p));
        let tau_r = if q != 0.0 { 1.0 / libm::sqrt(q.abs()) } else { f64::INFINITY };
        let tau_m = k[p] / eps[p].max(eps_floor);
        d.q.push(q);
        d.pi_mag.push(q.abs());
        d.tau_r.push(tau_r);
        d.tau_m.push(tau_m);
        d.alpha_ratio.push(tau_r / tau_m);
    }
    d
}

/// Source terms of the k and ε equations at one cell (per unit mass).
#[inline]
pub fn source_terms(
    production: f64,
    k: f64,
    eps: f64,
    pi_mag: f64,
    c: &TurbConstants,
    mode: TurbulenceMode,
) -> (f64, f64) {
    let k_src = production - eps;
    let mut eps_src = c.c_eps1 * (eps / k) * production - c.c_eps2 * eps * eps / k;
    if mode == TurbulenceMode::StructEpsilon {
        eps_src += c.c_eps3 * k * pi_mag;
    }
    (k_src, eps_src)
}

/// Field version of [`source_terms`]; `k` and `eps` are floored before
/// division.
#[allow(clippy::too_many_arguments)]
pub fn turbulence_sources(
    production: &[f64],
    k: &[f64],
    eps: &[f64],
    diagnostics: &StructDiagnostics,
    constants: &TurbConstants,
    mode: TurbulenceMode,
    k_floor: f64,
    eps_floor: f64,
) -> (Vec<f64>, Vec<f64>) {
    let n = k.len();
    let mut ks = Vec::with_capacity(n);
    let mut es = Vec::with_capacity(n);
    for p in 0..n {
        let (a, b) = source_terms(
            production[p],
            k[p].max(k_floor),
            eps[p].max(eps_floor),
            diagnostics.pi_mag[p],
            constants,
            mode,
        );
        ks.push(a);
        es.push(b);
    }
    (ks, es)
}
