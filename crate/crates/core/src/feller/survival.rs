use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::lyapunov::{CheckCertificate, Counterexample, Qualifier, Verdict};
use crate::rng::RngStream;
use crate::sim::{Advance, AbsorbedProcess, StepBudget};
use crate::state::{ContinuousState, State};
use crate::stats::{wilson, Z95};

use super::gfun::GFunction;
use super::pair::feller_lyapunov_v;
use super::scheme::{FellerProcess, FellerScheme};
use super::model::FellerModel;

/// Monte Carlo check of `P_x(r0 < tau) <= p0 V(x)` on near-boundary states.
///
/// States are in original units; `V` is evaluated in normalized units, and
/// each state needs a normalized coordinate below 1. Reports the smallest
/// `p0` dominating every upper Wilson bound. Inconclusive when some
/// interval is wider than `max_half_width`.
pub fn survival_bound_check(
    model: &FellerModel,
    g: &GFunction,
    r0: f64,
    states: &[ContinuousState],
    mc_budget: usize,
    scheme: FellerScheme,
    max_half_width: f64,
    rng: RngStream,
) -> Result<CheckCertificate> {
    if !(r0 > 0.0) || mc_budget == 0 || states.is_empty() {
        return Err(Error::InvalidParameter("need r0 > 0, a positive budget and states".into()));
    }
    for s in states {
        model.check_dim(s.dim())?;
        let y = model.to_rescaled(s.coords());
        if !(y.iter().fold(f64::INFINITY, |m, v| m.min(*v)) < 1.0) {
            return Err(Error::Precondition(format!("state {s} is not near the boundary")));
        }
    }
    let proc = FellerProcess::new(model.clone(), scheme)?;
    let mut cert = CheckCertificate::new(
        "survival_bound",
        format!("{} near-boundary states, r0 = {r0}, {mc_budget} paths each", states.len()),
        Qualifier::Empirical,
    )
    .with_seed(rng.seed);
    let rows: Vec<(usize, f64, (f64, f64), f64)> = states
        .par_iter()
        .enumerate()
        .map(|(k, s)| {
            let base = rng.child(k as u64);
            let alive = (0..mc_budget)
                .filter(|&p| {
                    let mut x = s.clone();
                    if x.is_absorbed() {
                        return false;
                    }
                    let mut r = base.child(p as u64).rng();
                    let mut b = StepBudget::new(u64::MAX);
                    matches!(proc.advance(&mut x, 0.0, r0, None, &mut r, &mut b), Advance::Reached)
                })
                .count();
            let v = feller_lyapunov_v(g, &model.to_rescaled(s.coords()));
            (alive, alive as f64 / mc_budget as f64, wilson(alive, mc_budget, Z95), v)
        })
        .collect();
    let mut p0: f64 = 0.0;
    let mut widest: f64 = 0.0;
    for (k, ((alive, p, (lo, hi), v), s)) in rows.iter().zip(states).enumerate() {
        widest = widest.max(0.5 * (hi - lo));
        if *v > 0.0 {
            p0 = p0.max(hi / v);
        } else if *alive > 0 {
            cert.push_counterexample(Counterexample::new(s.coords().to_vec(), format!("state {k}: survival {p} with V = 0")));
        }
    }
    cert.set_witness("p0", p0);
    cert.set_witness("r0", r0);
    cert.set_witness("max_half_width", widest);
    for (k, (alive, p, (lo, hi), v)) in rows.iter().enumerate() {
        cert.note(format!("state {k}: survivors {alive}, p = {p:.5}, ci = [{lo:.5}, {hi:.5}], V = {v:.5e}"));
    }
    let verdict = if !cert.counterexamples.is_empty() {
        Verdict::Violated
    } else if widest > max_half_width {
        cert.note(format!("confidence half-width {widest} above target {max_half_width}"));
        Verdict::Inconclusive
    } else {
        Verdict::Holds
    };
    Ok(cert.conclude(verdict))
}
