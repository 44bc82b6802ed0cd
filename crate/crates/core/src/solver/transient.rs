use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::geometry::Domain;
use crate::probes::{build_sensor_planes, record_snapshot, FlowDataset};

use super::state::FlowState;
use super::step::{advance_timestep, FlowProblem, StepReport};
use super::SolverError;

/// Simulated and recorded time windows (s).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TransientConfig {
    pub t_end: f64,
    pub record_start: f64,
    pub record_end: f64,
}

impl Default for TransientConfig {
    fn default() -> Self {
        Self { t_end: 4.0, record_start: 2.0, record_end: 4.0 }
    }
}

/// Step arithmetic of a run: step `n` ends at `t = n dt`, and snapshots are
/// taken after steps `start_step < n <= end_step`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunPlan {
    pub total_steps: u64,
    pub start_step: u64,
    pub end_step: u64,
}

impl RunPlan {
    pub fn new(dt: f64, window: &TransientConfig) -> Result<Self, SolverError> {
        if !(dt > 0.0) {
            return Err(SolverError::InvalidConfig("dt must be positive"));
        }
        let w = window;
        if !(w.t_end >= 0.0 && w.record_start >= 0.0 && w.record_start <= w.record_end && w.record_end <= w.t_end) {
            return Err(SolverError::InvalidConfig("recording window must lie inside [0, t_end]"));
        }
        let steps = |t: f64| libm::round(t / dt) as u64;
        Ok(Self { total_steps: steps(w.t_end), start_step: steps(w.record_start), end_step: steps(w.record_end) })
    }

    pub fn snapshots(&self) -> u64 {
        self.end_step - self.start_step
    }

    pub fn records(&self, step: u64) -> bool {
        step > self.start_step && step <= self.end_step
    }
}

#[derive(Debug, Clone)]
pub struct TransientOutcome {
    pub state: FlowState,
    pub dataset: FlowDataset,
    pub history: Vec<StepReport>,
}

/// A run that stopped early; `dataset` holds the snapshots recorded so far.
#[derive(Debug, Clone)]
pub struct PartialRun {
    pub error: SolverError,
    pub dataset: FlowDataset,
}

/// Runs from the quiescent initial state to `window.t_end`, recording the
/// sensor planes after every step inside the recording window.
/// `on_step` sees every step report as it is produced.
pub fn run_transient(
    domain: &Domain,
    problem: &FlowProblem,
    window: &TransientConfig,
    on_step: &mut dyn FnMut(&StepReport, &FlowState),
) -> Result<TransientOutcome, PartialRun> {
    let dt = problem.settings.dt;
    let empty = || FlowDataset::empty(domain.assembly_map.valid, 0.0, dt);
    let plan = RunPlan::new(dt, window).map_err(|error| PartialRun { error, dataset: empty() })?;
    let planes = build_sensor_planes(domain).map_err(|e| PartialRun { error: e.into(), dataset: empty() })?;
    let mut dataset = FlowDataset::empty(domain.assembly_map.valid, (plan.start_step + 1) as f64 * dt, dt);
    dataset.values.reserve(plan.snapshots() as usize * crate::probes::SNAPSHOT_LEN);
    let mut state = problem.initial_state();
    let mut work = problem.workspace();
    let mut history = Vec::with_capacity(plan.total_steps as usize);
    for _ in 0..plan.total_steps {
        match advance_timestep(&mut state, problem, &mut work) {
            Ok(report) => {
                on_step(&report, &state);
                history.push(report);
            }
            Err(SolverError::Diverged { step, reason, history: last }) => {
                history.extend(last);
                return Err(PartialRun { error: SolverError::Diverged { step, reason, history }, dataset });
            }
            Err(error) => return Err(PartialRun { error, dataset }),
        }
        if plan.records(state.step) {
            let snap = record_snapshot(&state, &planes, &problem.mesh, domain);
            dataset.push(&snap).map_err(|e| PartialRun { error: e.into(), dataset: empty() })?;
        }
    }
    Ok(TransientOutcome { state, dataset, history })
}
