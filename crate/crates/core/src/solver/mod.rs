//! Transient incompressible finite-volume solver on the masked Cartesian
//! proxy: SIMPLE inner iterations on a collocated grid with Rhie–Chow face
//! fluxes, BDF2 time stepping, k-ε / STRUCT-ε turbulence with log-law wall
//! functions, Forchheimer porous sinks and swirling inlet patches.

mod linear;
mod mesh;
mod multigrid;
mod porous;
mod state;
pub mod step;
mod swirl;
mod transient;
mod turbulence;

pub use linear::{pcg, pcg_with, Preconditioner, SolveStats, StencilSystem};
pub use multigrid::Multigrid;
pub use mesh::{BoundaryFace, FlowMesh, Link, NO_CELL};
pub use porous::{forchheimer_resistance, FlowDirection, PorousCoeffs};
pub use state::{inlet_turbulence, FlowState, InletState};
pub use step::{advance_timestep, FlowProblem, Residuals, StepReport, Workspace};
pub use swirl::{swirl_inlet_velocity, SwirlBC, SwirlSettings};
pub use transient::{run_transient, PartialRun, RunPlan, TransientConfig, TransientOutcome};
pub use turbulence::{
    gradients, q_invariant, source_terms, strain_rate_squared, turbulence_sources, velocity_gradient_invariants,
    StructDiagnostics, TurbConstants, TurbulenceMode, VelocityGradient, WallLaw, WallShear,
};

use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SolverError {
    #[error("solver diverged at step {step}: {reason}")]
    Diverged { step: u64, reason: &'static str, history: Vec<StepReport> },
    #[error("invalid solver configuration: {0}")]
    InvalidConfig(&'static str),
    #[error(transparent)]
    Geometry(#[from] crate::geometry::GeometryError),
    #[error(transparent)]
    Probe(#[from] crate::probes::ProbeError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FluidProps {
    /// Density (kg/m³).
    pub rho: f64,
    /// Molecular kinematic viscosity (m²/s).
    pub nu: f64,
}

impl Default for FluidProps {
    /// Water at 292 °C and 15.5 MPa (IAPWS-97).
    fn default() -> Self {
        Self { rho: 742.4, nu: 1.235e-7 }
    }
}

impl FluidProps {
    pub fn validate(&self) -> Result<(), SolverError> {
        if !(self.rho > 0.0) || !(self.nu > 0.0) {
            return Err(SolverError::InvalidConfig("rho and nu must be positive"));
        }
        Ok(())
    }
}

/// Which σ divides ν_t in the ε diffusion coefficient.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EpsDiffusion {
    SigmaEps,
    SigmaK,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSettings {
    pub dt: f64,
    pub n_inner: usize,
    pub relax_velocity: f64,
    pub relax_pressure: f64,
    pub relax_turbulence: f64,
    pub pressure_tol: f64,
    pub pressure_max_iter: usize,
    pub preconditioner: Preconditioner,
    pub sweep_tol: f64,
    pub max_sweeps: usize,
    pub second_order_convection: bool,
    pub turbulence: TurbulenceMode,
    pub eps_diffusion: EpsDiffusion,
    pub k_floor: f64,
    pub eps_floor: f64,
    /// Inlet turbulence intensity, also used for the initial field.
    pub intensity: f64,
    /// Mixing length as a fraction of the inlet patch width.
    pub length_fraction: f64,
    /// Residual above which a step is declared diverged.
    pub blowup: f64,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            dt: 0.002,
            n_inner: 5,
            relax_velocity: 0.7,
            relax_pressure: 0.3,
            relax_turbulence: 0.7,
            pressure_tol: 1e-6,
            pressure_max_iter: 2000,
            preconditioner: Preconditioner::Multigrid,
            sweep_tol: 1e-5,
            max_sweeps: 40,
            second_order_convection: true,
            turbulence: TurbulenceMode::StructEpsilon,
            eps_diffusion: EpsDiffusion::SigmaEps,
            k_floor: 1e-10,
            eps_floor: 1e-12,
            intensity: 0.05,
            length_fraction: 0.07,
            blowup: 1e8,
        }
    }
}

impl SolverSettings {
    pub fn validate(&self) -> Result<(), SolverError> {
        if !(self.dt > 0.0) {
            return Err(SolverError::InvalidConfig("dt must be positive"));
        }
        if self.n_inner == 0 {
            return Err(SolverError::InvalidConfig("n_inner must be at least 1"));
        }
        for r in [self.relax_velocity, self.relax_pressure, self.relax_turbulence] {
            if !(r > 0.0 && r <= 1.0) {
                return Err(SolverError::InvalidConfig("relaxation factors must lie in (0, 1]"));
            }
        }
        if !(self.k_floor > 0.0 && self.eps_floor > 0.0) {
            return Err(SolverError::InvalidConfig("k and eps floors must be positive"));
        }
        Ok(())
    }
}
