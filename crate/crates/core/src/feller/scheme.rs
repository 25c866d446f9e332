use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{RngStream, SimRng};
use crate::sim::{Advance, AbsorbedProcess, StepBudget, StopFn};
use crate::state::{ContinuousState, State};

use super::model::FellerModel;

/// Full-truncation Euler-Maruyama settings.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FellerScheme {
    pub dt: f64,
    /// Coordinates at or below this floor are set to 0.
    pub eps_abs: f64,
}

impl Default for FellerScheme {
    fn default() -> Self {
        FellerScheme { dt: 1e-3, eps_abs: 1e-10 }
    }
}

impl FellerScheme {
    pub fn with_dt(dt: f64) -> Self {
        FellerScheme { dt, ..Default::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) || !self.dt.is_finite() || !(self.eps_abs >= 0.0) {
            return Err(Error::InvalidParameter(format!("bad scheme dt = {}, eps_abs = {}", self.dt, self.eps_abs)));
        }
        Ok(())
    }

    /// Step size used from a state whose smallest live coordinate is `min_x`:
    /// `dt`, halved when `min_x < 10 dt`.
    #[inline]
    pub fn step_for(&self, min_x: f64) -> f64 {
        if min_x < 10.0 * self.dt {
            0.5 * self.dt
        } else {
            self.dt
        }
    }
}

#[inline]
fn em_coord(x: f64, drift_rate: f64, gamma: f64, dt: f64, xi: f64, eps_abs: f64) -> f64 {
    let y = x + x * drift_rate * dt + (gamma * x.max(0.0) * dt).sqrt() * xi;
    if y <= eps_abs {
        0.0
    } else {
        y
    }
}

fn em_step_in_place(model: &FellerModel, x: &mut [f64], dt: f64, eps_abs: f64, r: &mut [f64], xi: &[f64]) {
    model.growth_into(x, r);
    for i in 0..x.len() {
        x[i] = em_coord(x[i], r[i], model.gamma()[i], dt, xi[i], eps_abs);
    }
}

/// One full-truncation Euler-Maruyama step of size `dt` with the default
/// absorption floor.
pub fn simulate_feller_step(model: &FellerModel, x: &ContinuousState, dt: f64, rng: &mut SimRng) -> ContinuousState {
    let d = model.dim();
    let xi: Vec<f64> = (0..d).map(|_| StandardNormal.sample(rng)).collect();
    let mut y = x.coords().to_vec();
    let mut r = vec![0.0; d];
    em_step_in_place(model, &mut y, dt, FellerScheme::default().eps_abs, &mut r, &xi);
    ContinuousState::new(y)
}

/// A Feller model paired with its discretization.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FellerProcess {
    pub model: FellerModel,
    pub scheme: FellerScheme,
}

impl FellerProcess {
    pub fn new(model: FellerModel, scheme: FellerScheme) -> Result<Self> {
        scheme.validate()?;
        Ok(FellerProcess { model, scheme })
    }
}

impl AbsorbedProcess for FellerProcess {
    type State = ContinuousState;

    fn dim(&self) -> usize {
        self.model.dim()
    }

    fn advance(
        &self,
        state: &mut ContinuousState,
        mut t: f64,
        t_end: f64,
        stop: Option<StopFn<'_, ContinuousState>>,
        rng: &mut SimRng,
        budget: &mut StepBudget,
    ) -> Advance {
        if state.is_absorbed() {
            return Advance::Absorbed(t);
        }
        let d = self.model.dim();
        let mut r = vec![0.0; d];
        let mut xi = vec![0.0; d];
        let tol = 1e-12 * t_end.abs().max(1.0);
        while t_end - t > tol {
            if !budget.tick() {
                return Advance::GuardTripped(t);
            }
            let h = self.scheme.step_for(state.min_coord()).min(t_end - t);
            for v in xi.iter_mut() {
                *v = StandardNormal.sample(rng);
            }
            em_step_in_place(&self.model, state.coords_mut(), h, self.scheme.eps_abs, &mut r, &xi);
            t += h;
            if state.is_absorbed() {
                return Advance::Absorbed(t);
            }
            if let Some(stop) = stop {
                if stop(state) {
                    return Advance::Stopped(t);
                }
            }
        }
        Advance::Reached
    }
}

/// Outcome of the shared-noise comparison of `X` with the upper processes
/// `dXh = sqrt(gamma Xh) dB + a^eta Xh dt` and
/// `dXb = sqrt(gamma Xb) dB + Xb (a^eta - Xb^eta) dt`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub n_paths: usize,
    pub steps_checked: u64,
    pub hat_violations: u64,
    pub bar_violations: u64,
    /// Largest `X_i - Xh_i` and `X_i - Xb_i` seen (nonpositive when no violation).
    pub max_hat_excess: f64,
    pub max_bar_excess: f64,
}

impl ComparisonReport {
    pub fn clean(&self) -> bool {
        self.hat_violations == 0 && self.bar_violations == 0
    }
}

/// Runs `n_paths` coupled triples `(X, Xh, Xb)` from `x0` to `horizon`.
///
/// `X` keeps evolving after a coordinate is absorbed; absorbed coordinates
/// stay at 0. All three processes use the same Gaussian increments and the
/// same step sizes, chosen from `X`.
pub fn coupled_comparison(
    model: &FellerModel,
    a_eta: f64,
    eta: f64,
    x0: &ContinuousState,
    horizon: f64,
    scheme: FellerScheme,
    n_paths: usize,
    rng: RngStream,
) -> Result<ComparisonReport> {
    scheme.validate()?;
    model.check_dim(x0.dim())?;
    if x0.is_absorbed() {
        return Err(Error::Absorbed(x0.to_string()));
    }
    let d = model.dim();
    let per_path: Vec<(u64, u64, u64, f64, f64)> = (0..n_paths)
        .into_par_iter()
        .map(|p| {
            let mut g = rng.child(p as u64).rng();
            let mut x = x0.coords().to_vec();
            let mut xh = x.clone();
            let mut xb = x.clone();
            let mut r = vec![0.0; d];
            let mut xi = vec![0.0; d];
            let (mut steps, mut hv, mut bv) = (0u64, 0u64, 0u64);
            let (mut he, mut be) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
            let mut t = 0.0;
            while horizon - t > 1e-12 * horizon.max(1.0) {
                let min_live = x.iter().copied().filter(|v| *v > 0.0).fold(f64::INFINITY, f64::min);
                let h = scheme.step_for(min_live).min(horizon - t);
                for v in xi.iter_mut() {
                    *v = StandardNormal.sample(&mut g);
                }
                em_step_in_place(model, &mut x, h, scheme.eps_abs, &mut r, &xi);
                for i in 0..d {
                    let gi = model.gamma()[i];
                    xh[i] = em_coord(xh[i], a_eta, gi, h, xi[i], scheme.eps_abs);
                    let rb = a_eta - xb[i].max(0.0).powf(eta);
                    xb[i] = em_coord(xb[i], rb, gi, h, xi[i], scheme.eps_abs);
                    if x[i] > xh[i] {
                        hv += 1;
                    }
                    if x[i] > xb[i] {
                        bv += 1;
                    }
                    he = he.max(x[i] - xh[i]);
                    be = be.max(x[i] - xb[i]);
                }
                steps += 1;
                t += h;
            }
            (steps, hv, bv, he, be)
        })
        .collect();
    let mut rep = ComparisonReport {
        n_paths,
        steps_checked: 0,
        hat_violations: 0,
        bar_violations: 0,
        max_hat_excess: f64::NEG_INFINITY,
        max_bar_excess: f64::NEG_INFINITY,
    };
    for (s, hv, bv, he, be) in per_path {
        rep.steps_checked += s;
        rep.hat_violations += hv;
        rep.bar_violations += bv;
        rep.max_hat_excess = rep.max_hat_excess.max(he);
        rep.max_bar_excess = rep.max_bar_excess.max(be);
    }
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lv() -> FellerModel {
        FellerModel::lv(vec![2.0, 2.0], vec![1.0, 1.0], vec![vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap()
    }

    #[test]
    fn frozen_dynamics() {
        let m = FellerModel::lv(vec![1e-300, 1e-300], vec![0.0, 0.0], vec![vec![0.0; 2]; 2]).unwrap();
        let mut g = RngStream::root(1).rng();
        let x = ContinuousState::new([0.3, 2.0]);
        let y = simulate_feller_step(&m, &x, 1e-3, &mut g);
        assert!((y.coords()[0] - 0.3).abs() < 1e-140 && (y.coords()[1] - 2.0).abs() < 1e-140);
    }

    #[test]
    fn floor_absorbs() {
        let m = lv();
        let mut g = RngStream::root(2).rng();
        let mut hits = 0;
        for _ in 0..2000 {
            let y = simulate_feller_step(&m, &ContinuousState::new([1e-6, 1.0]), 1e-3, &mut g);
            assert!(y.coords()[0] == 0.0 || y.coords()[0] > 1e-10);
            if y.is_absorbed() {
                hits += 1;
            }
        }
        assert!(hits > 500);
    }

    #[test]
    fn step_halving_rule() {
        let s = FellerScheme::default();
        assert_eq!(s.step_for(1.0), 1e-3);
        assert_eq!(s.step_for(5e-3), 5e-4);
    }

    #[test]
    fn advance_reaches_target_time() {
        let p = FellerProcess::new(lv(), FellerScheme::default()).unwrap();
        let mut g = RngStream::root(3).rng();
        let mut x = ContinuousState::new([1.0, 1.0]);
        let mut b = StepBudget::new(u64::MAX);
        let out = p.advance(&mut x, 0.0, 0.0105, None, &mut g, &mut b);
        assert_eq!(out, Advance::Reached);
        assert_eq!(b.used, 11);
    }

    #[test]
    fn coupling_holds_on_short_runs() {
        let rep = coupled_comparison(&lv(), 1.25, 0.5, &ContinuousState::new([0.5, 2.0]), 1.0, FellerScheme::default(), 50, RngStream::root(4))
            .unwrap();
        assert!(rep.clean(), "{rep:?}");
        assert!(rep.steps_checked >= 50 * 1000);
    }
}
