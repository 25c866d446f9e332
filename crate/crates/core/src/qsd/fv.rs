use std::collections::BTreeMap;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measure::EmpiricalMeasure;
use crate::rng::RngStream;
use crate::sim::{check_initial_law, Advance, AbsorbedProcess, StepBudget};
use crate::state::State;

use super::{QSDEstimate, QsdMethod};

/// Fleming-Viot settings.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FvConfig {
    pub n_particles: usize,
    pub horizon: f64,
    /// Epoch length; resampling targets come from the epoch-start snapshot.
    pub dt_sync: f64,
    /// Spacing of the recorded snapshots over the second half.
    pub record_every: f64,
    /// Event or step guard per particle and epoch.
    pub max_steps_per_epoch: u64,
}

impl FvConfig {
    pub fn new(n_particles: usize, horizon: f64, dt_sync: f64) -> Self {
        FvConfig { n_particles, horizon, dt_sync, record_every: dt_sync, max_steps_per_epoch: 10_000_000 }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_particles < 100 {
            return Err(Error::Precondition(format!("Fleming-Viot needs at least 100 particles, got {}", self.n_particles)));
        }
        if !(self.horizon > 0.0 && self.dt_sync > 0.0 && self.dt_sync <= self.horizon && self.record_every > 0.0) {
            return Err(Error::InvalidParameter("need 0 < dt_sync <= horizon and record_every > 0".into()));
        }
        Ok(())
    }

    pub fn epochs(&self) -> usize {
        (self.horizon / self.dt_sync - 1e-9).ceil() as usize
    }
}

/// Raw output of a Fleming-Viot run.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FvRun<S> {
    pub config: FvConfig,
    /// Particle snapshots recorded over the averaging window.
    pub samples: Vec<S>,
    pub snapshots: usize,
    /// Resampling events over the averaging window.
    pub events: u64,
    pub window: f64,
    pub lambda0: f64,
    /// Poisson 95% interval of `lambda0`.
    pub lambda0_ci: (f64, f64),
    pub guard_tripped: u64,
}

/// Runs `n_particles` copies of `model`; an absorbed particle jumps to the
/// epoch-start position of a uniformly chosen other particle and continues.
///
/// Particle `i` in epoch `e` uses the stream `rng.child(e + 1).child(i)`, and
/// its initial draw `rng.child(0).child(i)`.
pub fn fleming_viot<P: AbsorbedProcess>(model: &P, init: &EmpiricalMeasure<P::State>, cfg: &FvConfig, rng: RngStream) -> Result<FvRun<P::State>> {
    cfg.validate()?;
    check_initial_law(init)?;
    let n = cfg.n_particles;
    let init_stream = rng.child(0);
    let mut particles: Vec<P::State> = (0..n).map(|i| init.sample(&mut init_stream.child(i as u64).rng()).clone()).collect();
    let epochs = cfg.epochs();
    let burn = cfg.horizon / 2.0;
    let record_stride = ((cfg.record_every / cfg.dt_sync).round() as usize).max(1);
    let mut samples = Vec::new();
    let mut snapshots = 0usize;
    let mut events = 0u64;
    let mut guard = 0u64;
    let mut window_start = None;
    for e in 0..epochs {
        let t0 = e as f64 * cfg.dt_sync;
        let t1 = ((e + 1) as f64 * cfg.dt_sync).min(cfg.horizon);
        if particles.iter().all(|p| p.is_absorbed()) {
            return Err(Error::TotalAbsorption(t0));
        }
        let snapshot = particles.clone();
        let alive: Vec<usize> = (0..n).filter(|&i| !snapshot[i].is_absorbed()).collect();
        let stream = rng.child(e as u64 + 1);
        let results: Vec<(P::State, u64, bool)> = snapshot
            .par_iter()
            .enumerate()
            .map(|(i, s)| {
                let mut r = stream.child(i as u64).rng();
                let mut state = s.clone();
                let mut t = t0;
                let mut jumps = 0u64;
                let mut budget = StepBudget::new(cfg.max_steps_per_epoch);
                loop {
                    if state.is_absorbed() {
                        let j = if alive.len() == 1 {
                            alive[0]
                        } else {
                            loop {
                                let j = alive[r.random_range(0..alive.len())];
                                if j != i {
                                    break j;
                                }
                            }
                        };
                        state = snapshot[j].clone();
                        jumps += 1;
                    }
                    match model.advance(&mut state, t, t1, None, &mut r, &mut budget) {
                        Advance::Reached | Advance::Stopped(_) => break,
                        Advance::Absorbed(tau) => t = tau,
                        Advance::GuardTripped(_) => return (state, jumps, true),
                    }
                }
                (state, jumps, false)
            })
            .collect();
        let in_window = t0 >= burn - 1e-12;
        if in_window && window_start.is_none() {
            window_start = Some(t0);
        }
        for (i, (s, j, g)) in results.into_iter().enumerate() {
            particles[i] = s;
            if in_window {
                events += j;
            }
            guard += g as u64;
        }
        if in_window && (epochs - 1 - e).is_multiple_of(record_stride) {
            samples.extend(particles.iter().filter(|p| !p.is_absorbed()).cloned());
            snapshots += 1;
        }
    }
    let window = cfg.horizon - window_start.unwrap_or(cfg.horizon);
    let exposure = n as f64 * window;
    let lambda0 = if exposure > 0.0 { events as f64 / exposure } else { 0.0 };
    let ev = events as f64;
    let half = 1.96 * ev.sqrt();
    let lambda0_ci = if exposure > 0.0 { (((ev - half).max(0.0)) / exposure, (ev + half) / exposure) } else { (0.0, 0.0) };
    Ok(FvRun { config: *cfg, samples, snapshots, events, window, lambda0, lambda0_ci, guard_tripped: guard })
}

/// [`fleming_viot`] with snapshots pooled into a QSD estimate.
pub fn fleming_viot_qsd<P>(model: &P, init: &EmpiricalMeasure<P::State>, cfg: &FvConfig, rng: RngStream) -> Result<QSDEstimate<P::State>>
where
    P: AbsorbedProcess,
    P::State: Ord,
{
    let run = fleming_viot(model, init, cfg, rng)?;
    let mut counts: BTreeMap<P::State, f64> = BTreeMap::new();
    for s in &run.samples {
        *counts.entry(s.clone()).or_insert(0.0) += 1.0;
    }
    let total = run.samples.len() as f64;
    counts.values_mut().for_each(|c| *c /= total);
    let measure = EmpiricalMeasure::from_counts(counts)?;
    let mut diagnostics = BTreeMap::new();
    diagnostics.insert("particles".into(), cfg.n_particles as f64);
    diagnostics.insert("horizon".into(), cfg.horizon);
    diagnostics.insert("burn_in".into(), cfg.horizon - run.window);
    diagnostics.insert("dt_sync".into(), cfg.dt_sync);
    diagnostics.insert("snapshots".into(), run.snapshots as f64);
    diagnostics.insert("events".into(), run.events as f64);
    diagnostics.insert("guard_tripped".into(), run.guard_tripped as f64);
    Ok(QSDEstimate { measure, method: QsdMethod::FlemingViot, lambda0: run.lambda0, lambda0_ci: run.lambda0_ci, diagnostics })
}
