use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::geometry::InletPatch;

/// Swirling inlet profile of one cold-leg patch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SwirlBC {
    /// Tangential-to-axial velocity ratio.
    pub alpha_s: f64,
    /// Axial (patch-normal) inlet speed (m/s).
    pub u_axial: f64,
    /// Regularizer added to r² in the denominator (m²).
    pub eps_reg: f64,
}

/// Swirl parameters as configured; resolved into one [`SwirlBC`] per patch
/// once the inlet area is known.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SwirlSettings {
    /// One value for all patches, or one per patch.
    pub alpha_s: Vec<f64>,
    /// Total inflow (kg/s); converted to an axial speed over the
    /// rasterized inlet area.
    pub mass_flow: f64,
    /// Fixed axial speed (m/s); overrides `mass_flow` when set.
    pub u_axial: Option<f64>,
    /// Regularizer (m²); defaults to `(0.01 * patch half-width)²`.
    pub eps_reg: Option<f64>,
}

impl Default for SwirlSettings {
    fn default() -> Self {
        Self { alpha_s: alloc::vec![0.3], mass_flow: 17790.0, u_axial: None, eps_reg: None }
    }
}

/// Velocity `[Ux, Uy, Uz]` in patch-local axes at `(x, y)` measured from the
/// patch center; `Uz` is along the inward normal.
pub fn swirl_inlet_velocity(x: f64, y: f64, bc: &SwirlBC) -> [f64; 3] {
    let denom = libm::sqrt(x * x + y * y + bc.eps_reg);
    let tangential = bc.alpha_s * bc.u_axial / denom;
    [-tangential * y, tangential * x, bc.u_axial]
}

impl SwirlBC {
    /// Global-frame velocity at a point on `patch`.
    pub fn velocity_at(&self, patch: &InletPatch, point: [f64; 3]) -> [f64; 3] {
        let rel = [point[0] - patch.center[0], point[1] - patch.center[1], point[2] - patch.center[2]];
        let x = dot(rel, patch.e1);
        let y = dot(rel, patch.e2);
        let [ux, uy, uz] = swirl_inlet_velocity(x, y, self);
        let n = patch.inward.unit();
        let mut out = [0.0; 3];
        for a in 0..3 {
            out[a] = ux * patch.e1[a] + uy * patch.e2[a] + uz * n[a];
        }
        out
    }
}

pub(crate) fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn no_swirl_is_pure_axial() {
        let bc = SwirlBC { alpha_s: 0.0, u_axial: 15.0, eps_reg: 1e-6 };
        for (x, y) in [(0.0, 0.0), (0.1, -0.2), (-0.3, 0.3)] {
            assert_eq!(swirl_inlet_velocity(x, y, &bc), [0.0, 0.0, 15.0]);
        }
    }

    #[test]
    fn center_has_no_tangential_component() {
        let bc = SwirlBC { alpha_s: 0.5, u_axial: 10.0, eps_reg: 1e-6 };
        let u = swirl_inlet_velocity(0.0, 0.0, &bc);
        assert_eq!(u[0].abs(), 0.0);
        assert_eq!(u[1].abs(), 0.0);
        assert_eq!(u[2], 10.0);
    }

    #[test]
    fn off_center_point_on_x_axis() {
        let bc = SwirlBC { alpha_s: 0.3, u_axial: 10.0, eps_reg: 1e-12 };
        let r = 0.2;
        let u = swirl_inlet_velocity(r, 0.0, &bc);
        let expected = 0.3 * 10.0 * r / libm::sqrt(r * r + 1e-12);
        assert_eq!(u[0].abs(), 0.0);
        assert!((u[1] - expected).abs() < 1e-12);
        assert!((u[1] - 3.0).abs() < 1e-9);
        assert_eq!(u[2], 10.0);
    }
}
