//! Monte Carlo probes of the minorization, exponential-moment and Harnack
//! hypotheses. Their certificates are empirical evidence only.

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::rng::RngStream;
use crate::sim::{run_path, AbsorbedProcess, Advance, SimBatchConfig, StepBudget};
use crate::state::State;
use crate::stats::{mean_se, ols, wilson, Z95};

use super::certificate::{CheckCertificate, Counterexample, Qualifier, Verdict};

/// Endpoint law of `n_samples` paths from `x` at each time of `times`.
struct Kernels<K> {
    /// `counts[s]` maps keys of surviving endpoints to counts.
    counts: Vec<BTreeMap<K, usize>>,
    survivors: Vec<usize>,
}

fn endpoint_kernels<P, K>(
    model: &P,
    x: &P::State,
    times: &[f64],
    n_samples: usize,
    max_events: u64,
    key: &(dyn Fn(&P::State) -> K + Sync),
    rng: RngStream,
) -> Kernels<K>
where
    P: AbsorbedProcess,
    K: Ord + Clone + Send,
{
    let paths: Vec<Vec<Option<K>>> = (0..n_samples)
        .into_par_iter()
        .map(|j| {
            let mut r = rng.child(j as u64).rng();
            let mut state = x.clone();
            let mut budget = StepBudget::new(max_events);
            let mut t = 0.0;
            let mut alive = !state.is_absorbed();
            let mut out = Vec::with_capacity(times.len());
            for &s in times {
                if alive && s > t {
                    match model.advance(&mut state, t, s, None, &mut r, &mut budget) {
                        Advance::Reached | Advance::Stopped(_) => t = s,
                        Advance::Absorbed(_) | Advance::GuardTripped(_) => alive = false,
                    }
                }
                out.push(alive.then(|| key(&state)));
            }
            out
        })
        .collect();
    let mut counts = vec![BTreeMap::new(); times.len()];
    let mut survivors = vec![0; times.len()];
    for path in paths {
        for (i, k) in path.into_iter().enumerate() {
            if let Some(k) = k {
                *counts[i].entry(k).or_insert(0) += 1;
                survivors[i] += 1;
            }
        }
    }
    Kernels { counts, survivors }
}

/// Common component of the kernels `P_x(X_s in .)` (or of their conditioned
/// versions) for `x` in a small set.
///
/// For each `s` the pointwise minimum over `x` of the estimated kernels has
/// mass `a1`; the same minimum of Wilson lower bounds gives `a1_lower`. The
/// verdict holds when `a1_lower > 0` at some `s`. Also reports
/// `d_n = min_x P_x(X_s in O_small)` at the chosen `s`.
#[allow(clippy::too_many_arguments)]
pub fn doeblin_probe<P, K>(
    model: &P,
    o_small: &[P::State],
    s_window: &[f64],
    n_samples: usize,
    conditioned: bool,
    key: &(dyn Fn(&P::State) -> K + Sync),
    max_events: u64,
    rng: RngStream,
) -> Result<CheckCertificate>
where
    P: AbsorbedProcess,
    K: Ord + Clone + Send + Sync,
{
    if o_small.is_empty() || s_window.is_empty() || n_samples == 0 {
        return Err(Error::InvalidParameter("doeblin probe needs states, times and samples".into()));
    }
    if s_window.windows(2).any(|w| w[1] <= w[0]) || s_window[0] <= 0.0 {
        return Err(Error::InvalidParameter("time window must be positive and increasing".into()));
    }
    let mut cert = CheckCertificate::new(
        if conditioned { "doeblin_conditioned" } else { "doeblin" },
        format!("{} start states, s in [{}, {}]", o_small.len(), s_window[0], s_window[s_window.len() - 1]),
        Qualifier::Empirical,
    )
    .with_seed(rng.seed);
    let inside: BTreeSet<K> = o_small.iter().map(key).collect();
    let kernels: Vec<Kernels<K>> = o_small
        .iter()
        .enumerate()
        .map(|(i, x)| endpoint_kernels(model, x, s_window, n_samples, max_events, key, rng.child(i as u64)))
        .collect();
    let mut best: Option<(usize, f64, f64, f64)> = None;
    let mut best_point = 0.0f64;
    for si in 0..s_window.len() {
        let denom: Vec<usize> =
            kernels.iter().map(|k| if conditioned { k.survivors[si] } else { n_samples }).collect();
        if denom.contains(&0) {
            continue;
        }
        let mut keys: BTreeSet<&K> = BTreeSet::new();
        for k in &kernels {
            keys.extend(k.counts[si].keys());
        }
        let (mut a1, mut a1_lo) = (0.0, 0.0);
        for y in keys {
            let mut m = f64::INFINITY;
            let mut m_lo = f64::INFINITY;
            for (k, &n) in kernels.iter().zip(&denom) {
                let c = k.counts[si].get(y).copied().unwrap_or(0);
                m = m.min(c as f64 / n as f64);
                m_lo = m_lo.min(wilson(c, n, Z95).0);
            }
            a1 += m;
            a1_lo += m_lo;
        }
        let d_n = kernels
            .iter()
            .map(|k| inside.iter().map(|y| k.counts[si].get(y).copied().unwrap_or(0)).sum::<usize>() as f64 / n_samples as f64)
            .fold(f64::INFINITY, f64::min);
        best_point = best_point.max(a1);
        if best.is_none_or(|b| a1_lo > b.2) {
            best = Some((si, a1, a1_lo, d_n));
        }
    }
    let Some((si, a1, a1_lo, d_n)) = best else {
        cert.note("no survivors at any time of the window");
        return Ok(cert.conclude(Verdict::Inconclusive));
    };
    if a1_lo > 0.0 {
        cert.set_witness("a1", a1);
        cert.set_witness("a1_lower", a1_lo);
        cert.set_witness("s", s_window[si]);
        cert.set_witness("d_n", d_n);
        return Ok(cert.conclude(Verdict::Holds));
    }
    if best_point == 0.0 {
        cert.push_counterexample(Counterexample::new(
            o_small[0].coords_f64(),
            "estimated kernels have disjoint supports at every s",
        ));
        return Ok(cert.conclude(Verdict::Violated));
    }
    cert.note(format!("point estimate a1 = {best_point} but its lower confidence bound is 0"));
    Ok(cert.conclude(Verdict::Inconclusive))
}

/// Survival fractions `P_x(t < tau)` on a grid, one row per start state.
pub fn survival_counts<P: AbsorbedProcess>(
    model: &P,
    starts: &[P::State],
    grid: &TimeGrid,
    n_paths: usize,
    max_events: u64,
    rng: RngStream,
) -> Result<Vec<Vec<usize>>> {
    let cfg = SimBatchConfig::new(n_paths, grid.last(), max_events, *grid)?;
    Ok(starts
        .iter()
        .enumerate()
        .map(|(i, x)| {
            let stream = rng.child(i as u64);
            let rows: Vec<Vec<bool>> = (0..n_paths)
                .into_par_iter()
                .map(|j| {
                    let mut r = stream.child(j as u64).rng();
                    let mut alive = vec![false; grid.len()];
                    let outcome = run_path(model, x.clone(), &cfg, &mut r, |k, s| alive[k] = !s.is_absorbed());
                    if outcome.guard_tripped {
                        alive.iter_mut().for_each(|a| *a = false);
                    }
                    alive
                })
                .collect();
            (0..grid.len()).map(|k| rows.iter().filter(|r| r[k]).count()).collect()
        })
        .collect())
}

/// Minimum survivor count for a survival estimate to enter the ratio curve.
pub const MIN_SURVIVORS: usize = 50;

/// Ratio `sup_x P_x(t < tau) / inf_x P_x(t < tau)` over a grid of `O_m`.
///
/// The curve is truncated where fewer than [`MIN_SURVIVORS`] paths survive
/// from some start. It holds when the log-ratio over the last half of the
/// retained times has no significantly positive slope; `C_m` is the largest
/// ratio of Wilson bounds on the retained times.
pub fn harnack_ratio_probe<P: AbsorbedProcess>(
    model: &P,
    o_m: &[P::State],
    t_grid: &TimeGrid,
    mc_budget: usize,
    max_events: u64,
    rng: RngStream,
) -> Result<CheckCertificate> {
    if o_m.is_empty() || mc_budget == 0 {
        return Err(Error::InvalidParameter("harnack probe needs states and a budget".into()));
    }
    let mut cert = CheckCertificate::new(
        "harnack_ratio",
        format!("{} states, t in [{}, {}]", o_m.len(), t_grid.t0, t_grid.last()),
        Qualifier::Empirical,
    )
    .with_seed(rng.seed);
    let counts = survival_counts(model, o_m, t_grid, mc_budget, max_events, rng)?;
    let mut ts = Vec::new();
    let mut log_ratio = Vec::new();
    let mut c_m = 1.0f64;
    for k in 0..t_grid.len() {
        let t = t_grid.at(k);
        if t <= 0.0 {
            continue;
        }
        let col: Vec<usize> = counts.iter().map(|row| row[k]).collect();
        if col.iter().any(|&c| c < MIN_SURVIVORS) {
            cert.note(format!("curve truncated at t = {t}: fewer than {MIN_SURVIVORS} survivors"));
            break;
        }
        let ps: Vec<f64> = col.iter().map(|&c| c as f64 / mc_budget as f64).collect();
        let hi = col.iter().map(|&c| wilson(c, mc_budget, Z95).1).fold(0.0, f64::max);
        let lo = col.iter().map(|&c| wilson(c, mc_budget, Z95).0).fold(f64::INFINITY, f64::min);
        c_m = c_m.max(hi / lo);
        let max = ps.iter().copied().fold(0.0, f64::max);
        let min = ps.iter().copied().fold(f64::INFINITY, f64::min);
        ts.push(t);
        log_ratio.push((max / min).ln());
    }
    if ts.len() < 4 {
        cert.note("fewer than four resolved times");
        return Ok(cert.conclude(Verdict::Inconclusive));
    }
    let half = ts.len() / 2;
    let fit = ols(&ts[half..], &log_ratio[half..]);
    cert.set_witness("C_m", c_m);
    cert.set_witness("t_max_resolved", *ts.last().unwrap());
    match fit {
        Some(f) if f.slope_ci.0 > 0.0 => {
            cert.set_witness("log_ratio_slope", f.slope);
            let worst = counts
                .iter()
                .enumerate()
                .min_by_key(|(_, row)| row[half])
                .map(|(i, _)| o_m[i].coords_f64())
                .unwrap_or_default();
            cert.push_counterexample(Counterexample::new(
                worst,
                format!("log ratio grows at {:.4} per unit time (95% CI {:?})", f.slope, f.slope_ci),
            ));
            Ok(cert.conclude(Verdict::Violated))
        }
        Some(f) => {
            cert.set_witness("log_ratio_slope", f.slope);
            Ok(cert.conclude(Verdict::Holds))
        }
        None => {
            // a single state gives a flat zero curve
            cert.set_witness("log_ratio_slope", 0.0);
            Ok(cert.conclude(Verdict::Holds))
        }
    }
}

/// Estimate of `E_x[exp(lambda (tau_U ^ tau))]` from one start.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MomentEstimate {
    pub mean: f64,
    pub se: f64,
    pub censored: usize,
    pub max_exponent: f64,
}

pub fn expo_moment_estimate<P: AbsorbedProcess>(
    model: &P,
    x: &P::State,
    in_u: &(dyn Fn(&P::State) -> bool + Sync),
    lambda: f64,
    n_paths: usize,
    horizon: f64,
    max_events: u64,
    rng: RngStream,
) -> MomentEstimate {
    let samples: Vec<(f64, bool)> = (0..n_paths)
        .into_par_iter()
        .map(|j| {
            if in_u(x) || x.is_absorbed() {
                return (0.0, false);
            }
            let mut r = rng.child(j as u64).rng();
            let mut state = x.clone();
            let mut budget = StepBudget::new(max_events);
            match model.advance(&mut state, 0.0, horizon, Some(in_u), &mut r, &mut budget) {
                Advance::Absorbed(t) | Advance::Stopped(t) => (t, false),
                Advance::Reached | Advance::GuardTripped(_) => (horizon, true),
            }
        })
        .collect();
    let values: Vec<f64> = samples.iter().map(|(t, _)| (lambda * t).exp()).collect();
    let (mean, se) = mean_se(&values);
    MomentEstimate {
        mean,
        se,
        censored: samples.iter().filter(|s| s.1).count(),
        max_exponent: samples.iter().map(|s| lambda * s.0).fold(0.0, f64::max),
    }
}

/// Exponential moments of the hitting time of `U` from increasingly distant
/// start groups.
///
/// Holds when the largest estimate of the farthest group does not exceed
/// 1.25 times the largest estimate of the nearer groups by more than three
/// standard errors. Censored paths or a relative standard error above 0.25
/// make the probe inconclusive.
#[allow(clippy::too_many_arguments)]
pub fn expo_moment_probe<P: AbsorbedProcess>(
    model: &P,
    in_u: &(dyn Fn(&P::State) -> bool + Sync),
    groups: &[Vec<P::State>],
    lambda: f64,
    mc_budget: usize,
    horizon: f64,
    max_events: u64,
    rng: RngStream,
) -> Result<CheckCertificate> {
    if !(lambda > 0.0) {
        return Err(Error::InvalidParameter(format!("lambda must be positive, got {lambda}")));
    }
    if groups.len() < 2 || groups.iter().any(Vec::is_empty) || mc_budget < 2 {
        return Err(Error::InvalidParameter("need at least two nonempty start groups and a budget".into()));
    }
    let mut cert = CheckCertificate::new(
        "exponential_moments",
        format!("{} start groups, lambda = {lambda}", groups.len()),
        Qualifier::Empirical,
    )
    .with_seed(rng.seed);
    let mut level_max = Vec::new();
    let mut worst_state = Vec::new();
    let mut max_exponent = 0.0f64;
    let mut inconclusive = false;
    for (g, group) in groups.iter().enumerate() {
        let mut best = (0.0f64, 0.0f64);
        for (i, x) in group.iter().enumerate() {
            let est = expo_moment_estimate(model, x, in_u, lambda, mc_budget, horizon, max_events, rng.child(g as u64).child(i as u64));
            max_exponent = max_exponent.max(est.max_exponent);
            if est.censored > 0 || est.se > 0.25 * est.mean {
                inconclusive = true;
            }
            if est.mean > best.0 {
                best = (est.mean, est.se);
                if g + 1 == groups.len() {
                    worst_state = x.coords_f64();
                }
            }
        }
        cert.set_witness(&format!("moment_group_{g}"), best.0);
        level_max.push(best);
    }
    cert.set_witness("max_exponent", max_exponent);
    if inconclusive {
        cert.note("censored paths or heavy-tailed samples; estimates unreliable");
        return Ok(cert.conclude(Verdict::Inconclusive));
    }
    let (last, last_se) = *level_max.last().unwrap();
    let (prior, prior_se) = level_max[..level_max.len() - 1]
        .iter()
        .copied()
        .fold((0.0, 0.0), |a, b| if b.0 > a.0 { b } else { a });
    if last <= 1.25 * prior + 3.0 * (last_se.powi(2) + prior_se.powi(2)).sqrt() {
        cert.set_witness("sup_moment", level_max.iter().map(|l| l.0).fold(0.0, f64::max));
        Ok(cert.conclude(Verdict::Holds))
    } else {
        cert.push_counterexample(Counterexample::new(
            worst_state,
            format!("moment {last} keeps growing past the nearer groups' {prior}"),
        ));
        Ok(cert.conclude(Verdict::Violated))
    }
}
