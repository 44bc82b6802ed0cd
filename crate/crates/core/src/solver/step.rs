use alloc::vec;
use alloc::vec::Vec;

use crate::geometry::Domain;

use super::linear::{pcg, pcg_with, Preconditioner, StencilSystem};
use super::multigrid::Multigrid;
use super::mesh::{FlowMesh, Link, NO_CELL};
use super::porous::{FlowDirection, PorousCoeffs};
use super::state::{FlowState, InletState};
use super::swirl::SwirlSettings;
use super::turbulence::{gradients_into, q_invariant, strain_rate_squared, TurbConstants, TurbulenceMode, WallLaw};
use super::{EpsDiffusion, FluidProps, SolverError, SolverSettings};

/// Residuals of the last inner iteration of a step.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Residuals {
    /// Scaled L1 residual of each momentum component before its solve.
    pub momentum: [f64; 3],
    /// Summed absolute cell mass imbalance before pressure correction,
    /// relative to the inlet mass flux.
    pub continuity: f64,
    pub k: f64,
    pub eps: f64,
}

impl Residuals {
    pub fn max(&self) -> f64 {
        [self.momentum[0], self.momentum[1], self.momentum[2], self.continuity, self.k, self.eps]
            .into_iter()
            .fold(0.0, f64::max)
    }

    fn is_finite(&self) -> bool {
        self.momentum.iter().all(|r| r.is_finite()) && self.continuity.is_finite() && self.k.is_finite() && self.eps.is_finite()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepReport {
    pub step: u64,
    pub time: f64,
    pub residuals: Residuals,
    pub pressure_iterations: usize,
    /// Summed inlet mass flux (kg/s).
    pub inflow: f64,
    /// Summed outlet mass flux (kg/s).
    pub outflow: f64,
    /// Cell mass imbalance left after the final pressure correction,
    /// relative to the inlet mass flux.
    pub continuity_after: f64,
}

impl StepReport {
    /// `|inflow - outflow| / inflow` (0 when nothing flows).
    pub fn global_imbalance(&self) -> f64 {
        if self.inflow > 0.0 {
            (self.inflow - self.outflow).abs() / self.inflow
        } else {
            (self.inflow - self.outflow).abs()
        }
    }
}

/// Everything a step needs besides the evolving state.
#[derive(Debug, Clone)]
pub struct FlowProblem {
    pub mesh: FlowMesh,
    pub props: FluidProps,
    pub constants: TurbConstants,
    pub wall_law: WallLaw,
    pub porous: PorousCoeffs,
    pub inlet: InletState,
    pub settings: SolverSettings,
    /// `(cell, dir)` for every wall face of a flow cell.
    wall_faces: Vec<(u32, u8)>,
    /// Per wall-adjacent cell, the wall face nearest to its center.
    wall_cells: Vec<(u32, u8)>,
}

impl FlowProblem {
    pub fn new(
        domain: &Domain,
        props: FluidProps,
        constants: TurbConstants,
        porous: PorousCoeffs,
        swirl: &SwirlSettings,
        settings: SolverSettings,
    ) -> Result<Self, SolverError> {
        props.validate()?;
        constants.validate()?;
        settings.validate()?;
        if !porous.is_valid() {
            return Err(SolverError::InvalidConfig("porous coefficients must be non-negative"));
        }
        let mesh = FlowMesh::new(domain);
        let inlet = InletState::new(domain, &mesh, swirl, &props, &settings, &constants)?;
        let mut wall_faces = Vec::new();
        let mut wall_cells = Vec::new();
        for p in 0..mesh.len() {
            let mut best: Option<(u8, f64)> = None;
            for d in 0..6 {
                if mesh.links[p][d] == Link::Wall {
                    wall_faces.push((p as u32, d as u8));
                    let y = mesh.spacing[d / 2];
                    if best.map_or(true, |(_, b)| y < b) {
                        best = Some((d as u8, y));
                    }
                }
            }
            if let Some((d, _)) = best {
                wall_cells.push((p as u32, d));
            }
        }
        Ok(Self { mesh, props, constants, wall_law: WallLaw::default(), porous, inlet, settings, wall_faces, wall_cells })
    }

    pub fn initial_state(&self) -> FlowState {
        FlowState::quiescent(&self.mesh, self.inlet.k, self.inlet.eps, self.constants.c_mu)
    }

    pub fn workspace(&self) -> Workspace {
        Workspace::new(self)
    }
}

/// Scratch buffers reused across steps.
#[derive(Debug, Clone)]
pub struct Workspace {
    sys: StencilSystem,
    base_diag: Vec<f64>,
    a_p: [Vec<f64>; 3],
    m_rhs: [Vec<f64>; 3],
    grad_p: Vec<[f64; 3]>,
    grad_u: [Vec<[f64; 3]>; 3],
    pcoef: Vec<[f64; 3]>,
    pprime: Vec<f64>,
    production: Vec<f64>,
    pi_mag: Vec<f64>,
    wall_coeff: Vec<f64>,
    wall_eps: Vec<f64>,
    /// Pressure preconditioner, rebuilt at the first inner iteration of a step.
    mg: Option<Multigrid>,
    /// Optional wall clock (s) used to fill `timings`.
    pub clock: Option<fn() -> f64>,
    /// Accumulated seconds in momentum, pressure correction, turbulence.
    pub timings: [f64; 3],
}

impl Workspace {
    pub fn new(problem: &FlowProblem) -> Self {
        let n = problem.mesh.len();
        let z = vec![0.0; n];
        let g = vec![[0.0; 3]; n];
        Self {
            sys: StencilSystem::zeros(n),
            base_diag: z.clone(),
            a_p: [z.clone(), z.clone(), z.clone()],
            m_rhs: [z.clone(), z.clone(), z.clone()],
            grad_p: g.clone(),
            grad_u: [g.clone(), g.clone(), g.clone()],
            pcoef: g,
            pprime: z.clone(),
            production: z.clone(),
            pi_mag: z,
            wall_coeff: vec![0.0; problem.wall_faces.len()],
            wall_eps: vec![0.0; problem.wall_cells.len()],
            mg: None,
            clock: None,
            timings: [0.0; 3],
        }
    }
}

/// Time-derivative weights `(a0, a1, a2)` with `du/dt ≈ (a0 u + a1 u_old + a2 u_old2) / dt`.
fn bdf_weights(second_order: bool) -> (f64, f64, f64) {
    if second_order {
        (1.5, -2.0, 0.5)
    } else {
        (1.0, -1.0, 0.0)
    }
}

/// Advances `state` by one time step of `problem.settings.dt` using
/// `n_inner` SIMPLE iterations.
pub fn advance_timestep(state: &mut FlowState, problem: &FlowProblem, work: &mut Workspace) -> Result<StepReport, SolverError> {
    let s = &problem.settings;
    if state.step == 0 {
        for c in 0..3 {
            state.u_old[c].copy_from_slice(&state.u[c]);
            state.u_old2[c].copy_from_slice(&state.u[c]);
        }
        state.k_old.copy_from_slice(&state.k);
        state.k_old2.copy_from_slice(&state.k);
        state.eps_old.copy_from_slice(&state.eps);
        state.eps_old2.copy_from_slice(&state.eps);
    } else {
        for c in 0..3 {
            core::mem::swap(&mut state.u_old2[c], &mut state.u_old[c]);
            state.u_old[c].copy_from_slice(&state.u[c]);
        }
        core::mem::swap(&mut state.k_old2, &mut state.k_old);
        state.k_old.copy_from_slice(&state.k);
        core::mem::swap(&mut state.eps_old2, &mut state.eps_old);
        state.eps_old.copy_from_slice(&state.eps);
    }
    state.inlet_flux.copy_from_slice(&problem.inlet.mass_flux);
    let bdf = bdf_weights(state.step >= 2);

    let mut residuals = Residuals::default();
    let mut pressure_iterations = 0;
    let mut continuity_after = 0.0;
    for inner in 0..s.n_inner {
        compute_wall_shear(state, problem, work);
        gradients_into(&problem.mesh, &state.p, &mut work.grad_p);
        let t0 = work.clock.map(|c| c());
        residuals.momentum = solve_momentum(state, problem, work, bdf);
        let t1 = work.clock.map(|c| c());
        let (cont, after, iters) = correct_pressure(state, problem, work, inner == 0);
        let t2 = work.clock.map(|c| c());
        residuals.continuity = cont;
        continuity_after = after;
        pressure_iterations += iters;
        let (rk, re) = solve_turbulence(state, problem, work, bdf);
        residuals.k = rk;
        residuals.eps = re;
        if let (Some(c), Some(t0), Some(t1), Some(t2)) = (work.clock, t0, t1, t2) {
            let t3 = c();
            work.timings[0] += t1 - t0;
            work.timings[1] += t2 - t1;
            work.timings[2] += t3 - t2;
        }
    }
    state.t = (state.step + 1) as f64 * s.dt;
    state.step += 1;

    let report = StepReport {
        step: state.step,
        time: state.t,
        residuals,
        pressure_iterations,
        inflow: state.inlet_flux.iter().sum(),
        outflow: state.outlet_flux.iter().sum(),
        continuity_after,
    };
    if !state.is_finite() || !residuals.is_finite() {
        return Err(SolverError::Diverged { step: state.step, reason: "non-finite field", history: vec![report] });
    }
    if residuals.max() > s.blowup {
        return Err(SolverError::Diverged { step: state.step, reason: "residual above blow-up threshold", history: vec![report] });
    }
    Ok(report)
}

fn compute_wall_shear(state: &FlowState, problem: &FlowProblem, work: &mut Workspace) {
    let mesh = &problem.mesh;
    let (rho, nu, c_mu) = (problem.props.rho, problem.props.nu, problem.constants.c_mu);
    for (i, &(p, d)) in problem.wall_faces.iter().enumerate() {
        let (p, axis) = (p as usize, d as usize / 2);
        let y = 0.5 * mesh.spacing[axis];
        let ws = problem.wall_law.shear(state.k[p], 0.0, y, nu, rho, mesh.area[axis], c_mu);
        work.wall_coeff[i] = ws.coeff;
    }
}

/// Effective dynamic viscosity on the face between `p` and `n`.
#[inline]
fn face_mu(rho: f64, nu: f64, nu_t: &[f64], p: usize, n: usize, sigma: f64) -> f64 {
    rho * (nu + 0.5 * (nu_t[p] + nu_t[n]) / sigma)
}

/// Convection–diffusion coefficients shared by the three velocity
/// components (or by k / ε with the matching `sigma`): fills `sys.off` and
/// `base_diag`, including the transient term and outlet outflow.
fn assemble_transport(state: &FlowState, problem: &FlowProblem, sys: &mut StencilSystem, base_diag: &mut [f64], sigma: f64, bdf: (f64, f64, f64)) {
    let mesh = &problem.mesh;
    let (rho, nu, dt) = (problem.props.rho, problem.props.nu, problem.settings.dt);
    let transient = rho * mesh.volume * bdf.0 / dt;
    for p in 0..mesh.len() {
        let mut diag = transient;
        let mut off = [0.0; 6];
        for d in 0..6 {
            let axis = d / 2;
            match mesh.links[p][d] {
                Link::Cell(n) => {
                    let n = n as usize;
                    let f = mesh.internal_outflow(&state.flux, p, d);
                    let g = face_mu(rho, nu, &state.nu_t, p, n, sigma) * mesh.area[axis] / mesh.spacing[axis];
                    off[d] = g + (-f).max(0.0);
                    diag += g + f.max(0.0);
                }
                Link::Inlet(_) => {
                    let g = rho * (nu + state.nu_t[p] / sigma) * mesh.area[axis] / (0.5 * mesh.spacing[axis]);
                    diag += g;
                }
                Link::Outlet(f) => {
                    diag += state.outlet_flux[f as usize].max(0.0);
                }
                Link::Wall | Link::Symmetry => {}
            }
        }
        sys.off[p] = off;
        base_diag[p] = diag;
    }
}

/// Assembles and solves the three momentum components; returns their
/// scaled initial residuals.
fn solve_momentum(state: &mut FlowState, problem: &FlowProblem, work: &mut Workspace, bdf: (f64, f64, f64)) -> [f64; 3] {
    assemble_transport(state, problem, &mut work.sys, &mut work.base_diag, 1.0, bdf);
    for c in 0..3 {
        assemble_momentum(state, problem, work, c, bdf);
    }
    let s = &problem.settings;
    let [u, v, w] = &mut state.u;
    let stats = super::linear::gauss_seidel_shared(
        &work.sys.off,
        &problem.mesh.stencil,
        [&work.a_p[0], &work.a_p[1], &work.a_p[2]],
        [&work.m_rhs[0], &work.m_rhs[1], &work.m_rhs[2]],
        [u, v, w],
        s.sweep_tol,
        s.max_sweeps,
    );
    stats.map(|st| st.initial_residual)
}

/// Fills `a_p[c]` and `m_rhs[c]` for velocity component `c`, relaxed.
fn assemble_momentum(state: &FlowState, problem: &FlowProblem, work: &mut Workspace, c: usize, bdf: (f64, f64, f64)) {
    let mesh = &problem.mesh;
    let s = &problem.settings;
    let (rho, nu, dt) = (problem.props.rho, problem.props.nu, s.dt);
    let vol = mesh.volume;
    let (diag_out, rhs_out) = (&mut work.a_p[c], &mut work.m_rhs[c]);
    let u = &state.u[c];
    let u1 = &state.u_old[c];
    let u2 = &state.u_old2[c];
    let direction = FlowDirection::of_component(c);
    for p in 0..mesh.len() {
        let mut diag = work.base_diag[p];
        let mut rhs = -rho * vol * (bdf.1 * u1[p] + bdf.2 * u2[p]) / dt - vol * work.grad_p[p][c];
        if mesh.porous[p] {
            diag += problem.porous.drag_coefficient(u[p], direction) * vol;
        }
        for d in 0..6 {
            let axis = d / 2;
            match mesh.links[p][d] {
                Link::Cell(n) if s.second_order_convection => {
                    let n = n as usize;
                    let f = mesh.internal_outflow(&state.flux, p, d);
                    if f > 0.0 {
                        let far = mesh.nbr[p][d ^ 1];
                        if far != NO_CELL {
                            rhs -= f * 0.5 * (u[p] - u[far as usize]);
                        }
                    } else if f < 0.0 {
                        let far = mesh.nbr[n][d];
                        if far != NO_CELL {
                            rhs -= f * 0.5 * (u[n] - u[far as usize]);
                        }
                    }
                }
                Link::Symmetry if axis == c => {
                    diag += rho * (nu + state.nu_t[p]) * mesh.area[axis] / (0.5 * mesh.spacing[axis]);
                }
                _ => {}
            }
        }
        diag_out[p] = diag;
        rhs_out[p] = rhs;
    }
    for (i, &(p, d)) in problem.wall_faces.iter().enumerate() {
        if d as usize / 2 != c {
            diag_out[p as usize] += work.wall_coeff[i];
        }
    }
    for (f, face) in mesh.inlet_faces.iter().enumerate() {
        let p = face.cell as usize;
        let axis = face.dir.axis();
        let g = rho * (nu + state.nu_t[p]) * mesh.area[axis] / (0.5 * mesh.spacing[axis]);
        rhs_out[p] += (problem.inlet.mass_flux[f] + g) * problem.inlet.velocity[f][c];
    }
    let omega = s.relax_velocity;
    for p in 0..mesh.len() {
        let d = diag_out[p] / omega;
        rhs_out[p] += (1.0 - omega) * d * u[p];
        diag_out[p] = d;
    }
}

/// Rhie–Chow face fluxes, outlet flux correction, pressure-correction solve
/// and flux/velocity/pressure update. Returns the relative mass imbalance
/// before and after the correction and the linear iterations used.
fn correct_pressure(state: &mut FlowState, problem: &FlowProblem, work: &mut Workspace, rebuild: bool) -> (f64, f64, usize) {
    let mesh = &problem.mesh;
    let s = &problem.settings;
    let rho = problem.props.rho;
    let vol = mesh.volume;
    let n_cells = mesh.len();
    for p in 0..n_cells {
        for a in 0..3 {
            let n = mesh.nbr[p][2 * a + 1];
            if n == NO_CELL {
                state.flux[p][a] = 0.0;
                work.pcoef[p][a] = 0.0;
                continue;
            }
            let n = n as usize;
            let df = 0.5 * (vol / work.a_p[a][p] + vol / work.a_p[a][n]);
            let h = mesh.spacing[a];
            let u_avg = 0.5 * (state.u[a][p] + state.u[a][n]);
            let g_avg = 0.5 * (work.grad_p[p][a] + work.grad_p[n][a]);
            let uf = u_avg - df * ((state.p[n] - state.p[p]) / h - g_avg);
            state.flux[p][a] = rho * mesh.area[a] * uf;
            work.pcoef[p][a] = rho * mesh.area[a] * df / h;
        }
    }

    let inflow: f64 = state.inlet_flux.iter().sum();
    let mut raw = 0.0;
    for (f, face) in mesh.outlet_faces.iter().enumerate() {
        let w = state.u[2][face.cell as usize].max(0.0);
        state.outlet_flux[f] = rho * face.area * w;
        raw += state.outlet_flux[f];
    }
    if raw > 0.0 {
        let scale = inflow / raw;
        state.outlet_flux.iter_mut().for_each(|f| *f *= scale);
    } else {
        let total_area: f64 = mesh.outlet_faces.iter().map(|f| f.area).sum();
        for (f, face) in mesh.outlet_faces.iter().enumerate() {
            state.outlet_flux[f] = if total_area > 0.0 { inflow * face.area / total_area } else { 0.0 };
        }
    }

    let scale = inflow.max(1e-30);
    let sys = &mut work.sys;
    let mut mean = 0.0;
    for p in 0..n_cells {
        let mut diag = 0.0;
        let mut off = [0.0; 6];
        let mut net_out = 0.0;
        for d in 0..6 {
            match mesh.links[p][d] {
                Link::Cell(n) => {
                    let a = d / 2;
                    let coef = if d % 2 == 1 { work.pcoef[p][a] } else { work.pcoef[n as usize][a] };
                    off[d] = coef;
                    diag += coef;
                    net_out += mesh.internal_outflow(&state.flux, p, d);
                }
                Link::Inlet(f) => net_out -= state.inlet_flux[f as usize],
                Link::Outlet(f) => net_out += state.outlet_flux[f as usize],
                Link::Wall | Link::Symmetry => {}
            }
        }
        sys.off[p] = off;
        sys.diag[p] = if diag > 0.0 { diag } else { 1.0 };
        sys.rhs[p] = -net_out;
        mean += -net_out;
    }
    let continuity = sys.rhs.iter().map(|b| b.abs()).sum::<f64>() / scale;
    mean /= n_cells.max(1) as f64;
    sys.rhs.iter_mut().for_each(|b| *b -= mean);
    work.pprime.iter_mut().for_each(|v| *v = 0.0);
    let stats = if s.preconditioner == Preconditioner::Multigrid {
        if rebuild || work.mg.is_none() {
            work.mg = Some(Multigrid::new(sys, &mesh.stencil, &mesh.coords));
        }
        let mg = work.mg.as_mut().unwrap();
        pcg_with(sys, &mesh.stencil, &mut work.pprime, s.pressure_tol, s.pressure_max_iter, &mut |r, z| mg.apply(r, z))
    } else {
        pcg(sys, &mesh.stencil, None, &mut work.pprime, s.pressure_tol, s.pressure_max_iter, s.preconditioner)
    };
    let pmean = work.pprime.iter().sum::<f64>() / n_cells.max(1) as f64;
    work.pprime.iter_mut().for_each(|v| *v -= pmean);

    for p in 0..n_cells {
        for a in 0..3 {
            let n = mesh.nbr[p][2 * a + 1];
            if n != NO_CELL {
                state.flux[p][a] -= work.pcoef[p][a] * (work.pprime[n as usize] - work.pprime[p]);
            }
        }
    }
    // Reuse grad_u[0] as scratch for the correction gradient.
    gradients_into(mesh, &work.pprime, &mut work.grad_u[0]);
    for p in 0..n_cells {
        for c in 0..3 {
            state.u[c][p] -= vol / work.a_p[c][p] * work.grad_u[0][p][c];
        }
        state.p[p] += s.relax_pressure * work.pprime[p];
    }

    let mut after = 0.0;
    for p in 0..n_cells {
        let mut net_out = 0.0;
        for d in 0..6 {
            match mesh.links[p][d] {
                Link::Cell(_) => net_out += mesh.internal_outflow(&state.flux, p, d),
                Link::Inlet(f) => net_out -= state.inlet_flux[f as usize],
                Link::Outlet(f) => net_out += state.outlet_flux[f as usize],
                Link::Wall | Link::Symmetry => {}
            }
        }
        after += net_out.abs();
    }
    (continuity, after / scale, stats.iterations)
}

fn solve_turbulence(state: &mut FlowState, problem: &FlowProblem, work: &mut Workspace, bdf: (f64, f64, f64)) -> (f64, f64) {
    let mesh = &problem.mesh;
    let s = &problem.settings;
    let c = &problem.constants;
    let (rho, nu, dt) = (problem.props.rho, problem.props.nu, s.dt);
    let vol = mesh.volume;
    let n_cells = mesh.len();
    for comp in 0..3 {
        gradients_into(mesh, &state.u[comp], &mut work.grad_u[comp]);
    }
    for p in 0..n_cells {
        let g = [work.grad_u[0][p], work.grad_u[1][p], work.grad_u[2][p]];
        work.production[p] = state.nu_t[p] * strain_rate_squared(&g);
        work.pi_mag[p] = q_invariant(&g).abs();
    }
    for (i, &(p, d)) in problem.wall_cells.iter().enumerate() {
        let (p, axis) = (p as usize, d as usize / 2);
        let mut ut2 = 0.0;
        for comp in 0..3 {
            if comp != axis {
                ut2 += state.u[comp][p] * state.u[comp][p];
            }
        }
        let ws = problem.wall_law.shear(state.k[p], libm::sqrt(ut2), 0.5 * mesh.spacing[axis], nu, rho, mesh.area[axis], c.c_mu);
        if let Some(prod) = ws.production {
            work.production[p] = prod;
        }
        work.wall_eps[i] = ws.eps.max(s.eps_floor);
    }

    let omega = s.relax_turbulence;
    let inlet_g = |p: usize, axis: usize, sigma: f64| -> f64 {
        rho * (nu + state.nu_t[p] / sigma) * mesh.area[axis] / (0.5 * mesh.spacing[axis])
    };

    // k
    assemble_transport(state, problem, &mut work.sys, &mut work.base_diag, c.sigma_k, bdf);
    {
        let sys = &mut work.sys;
        for p in 0..n_cells {
            let k = state.k[p].max(s.k_floor);
            let eps = state.eps[p].max(s.eps_floor);
            sys.diag[p] = work.base_diag[p] + rho * vol * eps / k;
            sys.rhs[p] = -rho * vol * (bdf.1 * state.k_old[p] + bdf.2 * state.k_old2[p]) / dt + rho * vol * work.production[p];
        }
        for (f, face) in mesh.inlet_faces.iter().enumerate() {
            let p = face.cell as usize;
            sys.rhs[p] += (problem.inlet.mass_flux[f] + inlet_g(p, face.dir.axis(), c.sigma_k)) * problem.inlet.k;
        }
        for p in 0..n_cells {
            let d = sys.diag[p] / omega;
            sys.rhs[p] += (1.0 - omega) * d * state.k[p];
            sys.diag[p] = d;
        }
    }
    let k_prev = core::mem::take(&mut work.pprime);
    let mut k_new = k_prev;
    k_new.copy_from_slice(&state.k);
    let rk = work.sys.gauss_seidel(&mesh.stencil, &mut k_new, s.sweep_tol, s.max_sweeps).initial_residual;

    // ε, with the old k in the source terms.
    let sigma_e = match s.eps_diffusion {
        EpsDiffusion::SigmaEps => c.sigma_eps,
        EpsDiffusion::SigmaK => c.sigma_k,
    };
    assemble_transport(state, problem, &mut work.sys, &mut work.base_diag, sigma_e, bdf);
    {
        let sys = &mut work.sys;
        let structured = s.turbulence == TurbulenceMode::StructEpsilon;
        for p in 0..n_cells {
            let k = state.k[p].max(s.k_floor);
            let eps = state.eps[p].max(s.eps_floor);
            sys.diag[p] = work.base_diag[p] + rho * vol * c.c_eps2 * eps / k;
            let mut src = c.c_eps1 * (eps / k) * work.production[p];
            if structured {
                src += c.c_eps3 * k * work.pi_mag[p];
            }
            sys.rhs[p] = -rho * vol * (bdf.1 * state.eps_old[p] + bdf.2 * state.eps_old2[p]) / dt + rho * vol * src;
        }
        for (f, face) in mesh.inlet_faces.iter().enumerate() {
            let p = face.cell as usize;
            sys.rhs[p] += (problem.inlet.mass_flux[f] + inlet_g(p, face.dir.axis(), sigma_e)) * problem.inlet.eps;
        }
        for p in 0..n_cells {
            let d = sys.diag[p] / omega;
            sys.rhs[p] += (1.0 - omega) * d * state.eps[p];
            sys.diag[p] = d;
        }
        for (i, &(p, _)) in problem.wall_cells.iter().enumerate() {
            let p = p as usize;
            sys.diag[p] = 1.0;
            sys.off[p] = [0.0; 6];
            sys.rhs[p] = work.wall_eps[i];
        }
    }
    let re = work.sys.gauss_seidel(&mesh.stencil, &mut state.eps, s.sweep_tol, s.max_sweeps).initial_residual;

    state.k.copy_from_slice(&k_new);
    work.pprime = k_new;
    for p in 0..n_cells {
        state.k[p] = state.k[p].max(s.k_floor);
        state.eps[p] = state.eps[p].max(s.eps_floor);
        state.nu_t[p] = c.c_mu * state.k[p] * state.k[p] / state.eps[p];
    }
    (rk, re)
}
