//! The absorbed-process simulation contract and the batch driver.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::measure::EmpiricalMeasure;
use crate::rng::{RngStream, SimRng};
use crate::state::State;

/// How a call to [`AbsorbedProcess::advance`] ended.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Advance {
    /// The target time was reached alive.
    Reached,
    /// The state entered the absorbing set at the given time.
    Absorbed(f64),
    /// The stop predicate fired at the given time.
    Stopped(f64),
    /// The event or step budget ran out at the given time.
    GuardTripped(f64),
}

/// Event/step counter shared across the `advance` calls of one trajectory.
#[derive(Clone, Copy, Debug)]
pub struct StepBudget {
    pub used: u64,
    pub max: u64,
}

impl StepBudget {
    pub fn new(max: u64) -> Self {
        StepBudget { used: 0, max }
    }

    /// Records one event; false once the budget is spent.
    #[inline]
    pub fn tick(&mut self) -> bool {
        self.used += 1;
        self.used <= self.max
    }
}

pub type StopFn<'a, S> = &'a (dyn Fn(&S) -> bool + Sync);

/// A simulatable Markov process absorbed when a coordinate hits zero.
pub trait AbsorbedProcess: Sync {
    type State: State;

    fn dim(&self) -> usize;

    /// Evolves `state` from time `t` to `t_end`.
    ///
    /// Ends early on absorption, when `stop` holds for the current state, or
    /// when `budget` runs out. An absorbed `state` is left as found.
    fn advance(
        &self,
        state: &mut Self::State,
        t: f64,
        t_end: f64,
        stop: Option<StopFn<'_, Self::State>>,
        rng: &mut SimRng,
        budget: &mut StepBudget,
    ) -> Advance;
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimBatchConfig {
    pub n_trajectories: usize,
    pub horizon: f64,
    /// Explosion guard per trajectory.
    pub max_events_or_steps: u64,
    pub record_grid: TimeGrid,
}

impl SimBatchConfig {
    pub fn new(n_trajectories: usize, horizon: f64, max_events_or_steps: u64, record_grid: TimeGrid) -> Result<Self> {
        let cfg = SimBatchConfig { n_trajectories, horizon, max_events_or_steps, record_grid };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_trajectories == 0 {
            return Err(Error::InvalidParameter("n_trajectories must be positive".into()));
        }
        if self.max_events_or_steps == 0 {
            return Err(Error::InvalidParameter("event guard must be positive".into()));
        }
        if !(self.horizon > 0.0) || self.horizon < self.record_grid.last() {
            return Err(Error::InvalidParameter(format!(
                "horizon {} must be positive and cover the last grid instant {}",
                self.horizon,
                self.record_grid.last()
            )));
        }
        Ok(())
    }
}

/// Outcome of one simulated path beyond its recorded states.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PathOutcome {
    /// `None` means censored at the horizon (or guard-tripped).
    pub absorption_time: Option<f64>,
    pub guard_tripped: bool,
}

#[derive(Clone, Debug)]
pub struct Trajectory<S> {
    pub id: usize,
    /// State at each record-grid instant; shorter than the grid only when
    /// the guard tripped.
    pub states: Vec<S>,
    pub outcome: PathOutcome,
}

#[derive(Clone, Debug)]
pub struct TrajectoryBatch<S> {
    pub config: SimBatchConfig,
    pub rng: RngStream,
    pub trajectories: Vec<Trajectory<S>>,
}

/// Runs one path from `start`, calling `visit(i, state)` at every record
/// instant reached, then continuing to the horizon to time absorption.
pub fn run_path<P: AbsorbedProcess>(
    model: &P,
    start: P::State,
    cfg: &SimBatchConfig,
    rng: &mut SimRng,
    mut visit: impl FnMut(usize, &P::State),
) -> PathOutcome {
    let mut state = start;
    let mut budget = StepBudget::new(cfg.max_events_or_steps);
    let mut t = 0.0;
    let mut absorbed_at: Option<f64> = if state.is_absorbed() { Some(0.0) } else { None };
    for (i, ti) in cfg.record_grid.instants().enumerate() {
        if absorbed_at.is_none() && ti > t {
            match model.advance(&mut state, t, ti, None, rng, &mut budget) {
                Advance::Reached | Advance::Stopped(_) => t = ti,
                Advance::Absorbed(tau) => absorbed_at = Some(tau),
                Advance::GuardTripped(_) => {
                    return PathOutcome { absorption_time: None, guard_tripped: true };
                }
            }
        }
        visit(i, &state);
    }
    if absorbed_at.is_none() && cfg.horizon > t {
        match model.advance(&mut state, t, cfg.horizon, None, rng, &mut budget) {
            Advance::Absorbed(tau) => absorbed_at = Some(tau),
            Advance::GuardTripped(_) => {
                return PathOutcome { absorption_time: None, guard_tripped: true };
            }
            _ => {}
        }
    }
    PathOutcome { absorption_time: absorbed_at, guard_tripped: false }
}

/// Checks that `init` charges only non-absorbed states.
pub fn check_initial_law<S: State>(init: &EmpiricalMeasure<S>) -> Result<()> {
    if init.is_empty() || !(init.total_mass() > 0.0) {
        return Err(Error::Precondition("initial law has no mass".into()));
    }
    if let Some((s, _)) = init.atoms().iter().find(|(s, w)| *w > 0.0 && s.is_absorbed()) {
        return Err(Error::Absorbed(format!("{:?}", s.coords_f64())));
    }
    Ok(())
}

/// Simulates `cfg.n_trajectories` independent paths started from `init`.
///
/// Path `i` consumes only the child stream `rng.child(i)`, for its initial
/// draw and its dynamics, so the batch is a pure function of its inputs.
pub fn simulate_batch<P: AbsorbedProcess>(
    model: &P,
    init: &EmpiricalMeasure<P::State>,
    cfg: &SimBatchConfig,
    rng: RngStream,
) -> Result<TrajectoryBatch<P::State>> {
    cfg.validate()?;
    check_initial_law(init)?;
    let trajectories = (0..cfg.n_trajectories)
        .into_par_iter()
        .map(|id| {
            let mut r = rng.child(id as u64).rng();
            let start = init.sample(&mut r).clone();
            let mut states = Vec::with_capacity(cfg.record_grid.len());
            let outcome = run_path(model, start, cfg, &mut r, |_, s| states.push(s.clone()));
            Trajectory { id, states, outcome }
        })
        .collect();
    Ok(TrajectoryBatch { config: cfg.clone(), rng, trajectories })
}

impl<S: State> TrajectoryBatch<S> {
    /// Columnar CSV: `trajectory_id,grid_index,time,coord_0..,absorbed_flag`.
    pub fn to_csv(&self) -> String {
        let d = self
            .trajectories
            .iter()
            .find_map(|t| t.states.first().map(|s| s.dim()))
            .unwrap_or(0);
        let mut out = String::from("trajectory_id,grid_index,time");
        for k in 0..d {
            let _ = write!(out, ",coord_{k}");
        }
        out.push_str(",absorbed_flag\n");
        for traj in &self.trajectories {
            for (i, s) in traj.states.iter().enumerate() {
                let _ = write!(out, "{},{},{}", traj.id, i, self.config.record_grid.at(i));
                for c in s.coords_f64() {
                    let _ = write!(out, ",{c}");
                }
                let _ = writeln!(out, ",{}", u8::from(s.is_absorbed()));
            }
        }
        out
    }

    /// JSON sidecar with the configuration, the seed and per-path outcomes.
    pub fn sidecar(&self) -> serde_json::Value {
        let guard: Vec<usize> =
            self.trajectories.iter().filter(|t| t.outcome.guard_tripped).map(|t| t.id).collect();
        let tau: Vec<Option<f64>> = self.trajectories.iter().map(|t| t.outcome.absorption_time).collect();
        serde_json::json!({
            "config": self.config,
            "seed": self.rng.seed,
            "stream_id": self.rng.stream_id,
            "guard_tripped": guard,
            "absorption_times": tau,
        })
    }

    pub fn guard_tripped_fraction(&self) -> f64 {
        let n = self.trajectories.iter().filter(|t| t.outcome.guard_tripped).count();
        n as f64 / self.trajectories.len().max(1) as f64
    }
}
