use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lyapunov::{CheckCertificate, Counterexample, Qualifier, Verdict};

use super::model::{FellerGrowth, FellerModel};

/// Constants of the growth-rate assumption:
/// `r_i(x) <= a^eta - x_i^eta` and
/// `sum_{x_i >= B_a} r_i(x) <= C_a (sum_{x_i <= a} r_i(x) + D_a)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FellerAssumptionParams {
    pub a: f64,
    pub eta: f64,
    pub b_a: f64,
    pub c_a: f64,
    pub d_a: f64,
}

impl FellerAssumptionParams {
    pub fn new(a: f64, eta: f64, b_a: f64, c_a: f64, d_a: f64) -> Result<Self> {
        let p = FellerAssumptionParams { a, eta, b_a, c_a, d_a };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.a > 0.0
            && self.eta > 0.0
            && self.eta < 1.0
            && self.b_a > self.a
            && self.c_a > 0.0
            && self.d_a > 0.0
            && [self.a, self.b_a, self.c_a, self.d_a].iter().all(|v| v.is_finite());
        if !ok {
            return Err(Error::InvalidParameter(format!("inadmissible assumption constants {self:?}")));
        }
        Ok(())
    }

    pub fn a_eta(&self) -> f64 {
        self.a.powf(self.eta)
    }
}

/// `sup_{s >= 0} (s^eta - c s)` for `c > 0`.
fn sup_power_minus_linear(eta: f64, c: f64) -> f64 {
    let s = (eta / c).powf(1.0 / (1.0 - eta));
    s.powf(eta) - c * s
}

/// Assumption constants for a Lotka-Volterra growth (plain or thresholded)
/// with positive self-competition.
///
/// `a^eta = max_i (r_i + sup_s (s^eta - c_ii s))` (plus `c_ii k_i` for the
/// threshold form), `C_a = min_j c_jj / sum_i c_ij`,
/// `D_a = sum r^+ / C_a + sum r^- + B_a sum_ij c_ij` (+ threshold terms),
/// and `B_a = b_factor * a`.
pub fn lv_assumption_params(model: &FellerModel, eta: f64, b_factor: f64) -> Result<FellerAssumptionParams> {
    if !(eta > 0.0 && eta < 1.0) {
        return Err(Error::InvalidParameter(format!("eta = {eta} not in (0, 1)")));
    }
    if !(b_factor > 1.0) {
        return Err(Error::InvalidParameter(format!("B_a / a = {b_factor} must exceed 1")));
    }
    let (r, c, k) = match model.growth() {
        FellerGrowth::Lv { r, c } => (r, c, None),
        FellerGrowth::ThresholdLv { r, c, k } => (r, c, Some(k)),
    };
    let d = model.dim();
    if (0..d).any(|i| !(c[i][i] > 0.0)) {
        return Err(Error::InvalidParameter("self-competition c_ii must be positive".into()));
    }
    let shift = |i: usize| k.map_or(0.0, |k| c[i][i] * k[i]);
    let a_eta = (0..d).map(|i| r[i] + shift(i) + sup_power_minus_linear(eta, c[i][i])).fold(f64::NEG_INFINITY, f64::max);
    let a_eta = a_eta.max(1e-3);
    let a = a_eta.powf(1.0 / eta);
    let b_a = b_factor * a;
    let colsum: Vec<f64> = (0..d).map(|j| (0..d).map(|i| c[i][j]).sum()).collect();
    let c_a = (0..d).map(|j| c[j][j] / colsum[j]).fold(f64::INFINITY, f64::min);
    let rp: f64 = r.iter().map(|v| v.max(0.0)).sum();
    let rm: f64 = r.iter().map(|v| (-v).max(0.0)).sum();
    let total_c: f64 = colsum.iter().sum();
    let thr: f64 = k.map_or(0.0, |k| (0..d).map(|j| colsum[j] * k[j]).sum::<f64>());
    let d_a = (rp + thr) / c_a + rm + b_a * total_c + 1.0;
    FellerAssumptionParams::new(a, eta, b_a, c_a, d_a)
}

/// Checks both inequalities of the assumption on a log grid per axis.
pub fn check_feller_assumption(model: &FellerModel, params: &FellerAssumptionParams, lo: f64, hi: f64, points: usize) -> Result<CheckCertificate> {
    params.validate()?;
    if !(lo > 0.0 && hi > lo) || points < 2 {
        return Err(Error::InvalidParameter("bad assumption grid".into()));
    }
    let d = model.dim();
    let axis: Vec<f64> = (0..points).map(|j| lo * (hi / lo).powf(j as f64 / (points - 1) as f64)).collect();
    let total = points.checked_pow(d as u32).filter(|n| *n <= 50_000_000).ok_or_else(|| Error::InvalidParameter("assumption grid too large".into()))?;
    let mut cert = CheckCertificate::new("feller_assumption", format!("log grid [{lo:e}, {hi:e}]^{d}, {points} points per axis"), Qualifier::Exact)
        .witness("a", params.a)
        .witness("eta", params.eta)
        .witness("B_a", params.b_a)
        .witness("C_a", params.c_a)
        .witness("D_a", params.d_a);
    let a_eta = params.a_eta();
    let mut x = vec![0.0; d];
    let mut rates = vec![0.0; d];
    let mut bad = 0usize;
    let mut min_slack1 = f64::INFINITY;
    let mut min_slack2 = f64::INFINITY;
    for flat in 0..total {
        let mut q = flat;
        for xi in x.iter_mut() {
            *xi = axis[q % points];
            q /= points;
        }
        model.growth_into(&x, &mut rates);
        let mut worst1 = f64::INFINITY;
        for i in 0..d {
            worst1 = worst1.min(a_eta - x[i].powf(params.eta) - rates[i]);
        }
        let hi_sum: f64 = (0..d).filter(|&i| x[i] >= params.b_a).map(|i| rates[i]).sum();
        let lo_sum: f64 = (0..d).filter(|&i| x[i] <= params.a).map(|i| rates[i]).sum();
        let slack2 = params.c_a * (lo_sum + params.d_a) - hi_sum;
        min_slack1 = min_slack1.min(worst1);
        min_slack2 = min_slack2.min(slack2);
        let tol = 1e-12 * (1.0 + a_eta + x.iter().fold(0.0, |m: f64, v| m.max(*v)));
        if worst1 < -tol || slack2 < -tol * (1.0 + params.d_a) {
            bad += 1;
            if cert.counterexamples.len() < 20 {
                cert.push_counterexample(Counterexample::new(x.clone(), format!("slacks {worst1:e}, {slack2:e}")));
            }
        }
    }
    cert.set_witness("min_slack_growth", min_slack1);
    cert.set_witness("min_slack_balance", min_slack2);
    cert.set_witness("violations", bad as f64);
    Ok(cert.conclude(if bad == 0 { Verdict::Holds } else { Verdict::Violated }))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lv() -> FellerModel {
        FellerModel::lv(vec![2.0, 2.0], vec![1.0, 1.0], vec![vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap()
    }

    #[test]
    fn identity_competition_constants() {
        let p = lv_assumption_params(&lv(), 0.5, 2.0).unwrap();
        // sup_s (1 - s + sqrt s) = 5/4 at s = 1/4
        assert!((p.a_eta() - 1.25).abs() < 1e-14);
        assert!((p.a - 1.5625).abs() < 1e-14);
        assert_eq!(p.b_a, 3.125);
        assert_eq!(p.c_a, 1.0);
        assert!((p.d_a - (2.0 + 3.125 * 2.0 + 1.0)).abs() < 1e-12);
    }

    #[test]
    fn derived_constants_pass_the_grid() {
        for m in [
            lv(),
            FellerModel::lv(vec![1.0, 3.0], vec![1.0, -0.2], vec![vec![1.0, 0.4], vec![0.7, 2.0]]).unwrap(),
            FellerModel::new(
                vec![2.0, 2.0],
                FellerGrowth::ThresholdLv { r: vec![1.0, 0.5], c: vec![vec![1.0, 0.5], vec![0.5, 1.0]], k: vec![1.0, 2.0] },
            )
            .unwrap(),
        ] {
            for eta in [0.25, 0.5, 0.9] {
                let p = lv_assumption_params(&m, eta, 2.0).unwrap();
                let c = check_feller_assumption(&m, &p, 1e-4, 1e3, 120).unwrap();
                assert!(c.holds(), "{m:?} {eta} {:?}", c.counterexamples);
            }
        }
    }

    #[test]
    fn too_small_a_is_caught() {
        let m = lv();
        let mut p = lv_assumption_params(&m, 0.5, 2.0).unwrap();
        p.a *= 0.5;
        p.b_a = 2.0 * p.a;
        let c = check_feller_assumption(&m, &p, 1e-4, 1e3, 80).unwrap();
        assert_eq!(c.verdict, Verdict::Violated);
    }

    #[test]
    fn validation() {
        assert!(FellerAssumptionParams::new(1.0, 1.0, 2.0, 1.0, 1.0).is_err());
        assert!(FellerAssumptionParams::new(1.0, 0.5, 0.5, 1.0, 1.0).is_err());
        assert!(FellerAssumptionParams::new(1.0, 0.5, 2.0, 1.0, 1.0).is_ok());
    }
}
