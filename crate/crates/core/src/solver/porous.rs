use serde::{Deserialize, Serialize};

/// Forchheimer coefficients of the fuel-assembly porous medium.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PorousCoeffs {
    /// Inertial resistance (kg/m⁴).
    pub alpha_axial: f64,
    pub alpha_lateral: f64,
    /// Viscous resistance (kg/(m³·s)).
    pub beta_axial: f64,
    pub beta_lateral: f64,
}

impl Default for PorousCoeffs {
    fn default() -> Self {
        Self { alpha_axial: 5949.0, alpha_lateral: 30061.4, beta_axial: 2428.0, beta_lateral: 0.0 }
    }
}

impl PorousCoeffs {
    pub fn is_valid(&self) -> bool {
        [self.alpha_axial, self.alpha_lateral, self.beta_axial, self.beta_lateral]
            .iter()
            .all(|c| *c >= 0.0 && c.is_finite())
    }

    /// `(alpha, beta)` for flow along `direction`.
    pub fn along(&self, direction: FlowDirection) -> (f64, f64) {
        match direction {
            FlowDirection::Axial => (self.alpha_axial, self.beta_axial),
            FlowDirection::Lateral => (self.alpha_lateral, self.beta_lateral),
        }
    }

    /// Implicit sink coefficient `alpha |v| + beta` (kg/(m³·s)).
    #[inline]
    pub fn drag_coefficient(&self, v: f64, direction: FlowDirection) -> f64 {
        let (alpha, beta) = self.along(direction);
        alpha * v.abs() + beta
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FlowDirection {
    Axial,
    Lateral,
}

impl FlowDirection {
    /// The core axis is z.
    pub fn of_component(component: usize) -> Self {
        if component == 2 {
            FlowDirection::Axial
        } else {
            FlowDirection::Lateral
        }
    }
}

/// Pressure-gradient magnitude (Pa/m) opposing superficial velocity `v`.
pub fn forchheimer_resistance(v: f64, direction: FlowDirection, coeffs: &PorousCoeffs) -> f64 {
    coeffs.drag_coefficient(v, direction) * v
}
