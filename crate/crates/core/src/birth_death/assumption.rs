//! The slice inequality `dunder >= eta dbar` with super-linear growth of
//! `dunder`, and the choice of `(alpha, beta, epsilon)` it enables.

use std::ops::RangeInclusive;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lyapunov::{CheckCertificate, Counterexample, Qualifier, Verdict};

use super::model::BDModel;
use super::series::BDLyapunovParams;
use super::slices::{slice_table, SliceStats};

/// Log grid searched by [`auto_eta`], largest first.
pub fn eta_grid() -> impl Iterator<Item = f64> {
    (1..=12).map(|j| 0.5f64.powi(j))
}

/// Checks the slice inequality on `k_range`, reusing precomputed slices.
///
/// The inequality is required for large `k` only, so it must hold on a tail
/// `[k0, k_max]` with `k0` no later than the midpoint of the range, and the
/// log-log slope of `dunder` over the upper half of that tail must exceed
/// `1 + eta`.
pub fn check_assumption_on_table(table: &[SliceStats], eta: f64) -> CheckCertificate {
    let (k_lo, k_hi) = (table.first().map_or(0, |s| s.k), table.last().map_or(0, |s| s.k));
    let mut cert = CheckCertificate::new(
        "assumption_slice_inequality",
        format!("|n| in [{k_lo}, {k_hi}], eta = {eta}"),
        Qualifier::Exact,
    );
    if table.is_empty() || !(eta > 0.0) {
        cert.note("empty range or nonpositive eta");
        return cert.conclude(Verdict::Inconclusive);
    }
    if table.iter().any(|s| !s.exact) {
        cert.note("some slices use closed-form bounds instead of enumeration");
    }
    let ok = |s: &SliceStats| s.dunder >= eta * s.dbar && s.dunder > 0.0;
    let first_tail = table.iter().rposition(|s| !ok(s)).map_or(0, |i| i + 1);
    let mid = table.len() / 2;
    let record_violations = |cert: &mut CheckCertificate, from: usize| {
        for s in table[from..].iter().filter(|s| !ok(s)).take(20) {
            cert.push_counterexample(Counterexample::new(
                vec![s.k as f64],
                format!("k = {}: dunder = {}, eta * dbar = {}", s.k, s.dunder, eta * s.dbar),
            ));
        }
    };
    if first_tail > mid || first_tail >= table.len() {
        record_violations(&mut cert, mid.min(first_tail.saturating_sub(1)));
        if cert.counterexamples.is_empty() {
            record_violations(&mut cert, 0);
        }
        return cert.conclude(Verdict::Violated);
    }
    let tail = &table[first_tail..];
    let slack = tail.iter().map(|s| s.dunder - eta * s.dbar).fold(f64::INFINITY, f64::min);
    let upper = &tail[tail.len() / 2..];
    let slope = loglog_slope(upper);
    let trend: Vec<f64> = upper.iter().map(|s| s.dunder / (s.k as f64).powf(1.0 + eta)).collect();
    cert.set_witness("eta", eta);
    cert.set_witness("k0", tail[0].k as f64);
    cert.set_witness("min_slack", slack);
    cert.set_witness("dunder_loglog_slope", slope);
    cert.set_witness("trend_statistic_last", *trend.last().unwrap());
    if upper.len() < 2 || !(slope > 1.0 + eta) {
        let s = upper.last().unwrap();
        cert.push_counterexample(Counterexample::new(
            vec![s.k as f64],
            format!("dunder grows like k^{slope:.3}, not faster than k^(1 + eta)"),
        ));
        return cert.conclude(Verdict::Violated);
    }
    cert.conclude(Verdict::Holds)
}

fn loglog_slope(stats: &[SliceStats]) -> f64 {
    let pts: Vec<(f64, f64)> =
        stats.iter().filter(|s| s.dunder > 0.0).map(|s| ((s.k as f64).ln(), s.dunder.ln())).collect();
    if pts.len() < 2 || pts.len() < stats.len() {
        return f64::NAN;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

#[allow(non_snake_case)]
pub fn check_assumption_PNM(model: &BDModel, eta: f64, k_range: RangeInclusive<u64>) -> Result<CheckCertificate> {
    check_assumption_pnm(model, eta, k_range)
}

pub fn check_assumption_pnm(model: &BDModel, eta: f64, k_range: RangeInclusive<u64>) -> Result<CheckCertificate> {
    if !(eta > 0.0) {
        return Err(Error::InvalidParameter(format!("eta must be positive, got {eta}")));
    }
    let table = slice_table(model, clamp_range(model, k_range))?;
    Ok(check_assumption_on_table(&table, eta))
}

fn clamp_range(model: &BDModel, r: RangeInclusive<u64>) -> RangeInclusive<u64> {
    (*r.start()).max(model.dim() as u64)..=*r.end()
}

/// Largest `eta` in `{2^-1, ..., 2^-12}` passing the check, with its
/// certificate; `None` when none passes (the certificate is then the one for
/// the smallest `eta`).
pub fn auto_eta_on_table(table: &[SliceStats]) -> (Option<f64>, CheckCertificate) {
    let mut last = None;
    for eta in eta_grid() {
        let cert = check_assumption_on_table(table, eta);
        if cert.holds() {
            return (Some(eta), cert);
        }
        last = Some(cert);
    }
    (None, last.expect("grid is nonempty"))
}

pub fn auto_eta(model: &BDModel, k_range: RangeInclusive<u64>) -> Result<(Option<f64>, CheckCertificate)> {
    let table = slice_table(model, clamp_range(model, k_range))?;
    Ok(auto_eta_on_table(&table))
}

/// Outcome of [`select_bd_params`].
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BdSelection {
    pub params: BDLyapunovParams,
    /// Threshold past which `dunder - dbar/(beta - 1) >= 0` on the checked range.
    pub k_star: u64,
    pub certificate: CheckCertificate,
}

/// Step of the `beta` search grid `1 + j/20`.
pub const BETA_STEP: f64 = 0.05;

/// Smallest `beta = 1 + j/20 <= 1 + 4/eta` such that
/// `dunder(k) - dbar(k)/(beta - 1) >= 0` on `[k*, k_check]` with
/// `k* <= k_check / 2`.
pub fn select_bd_params_on_table(table: &[SliceStats], eta: f64) -> Result<BdSelection> {
    let k_check = table.last().map_or(0, |s| s.k);
    let beta_max = 1.0 + 4.0 / eta;
    let mut binding = k_check;
    let mut j = 1u32;
    loop {
        let beta = 1.0 + j as f64 * BETA_STEP;
        if beta > beta_max {
            return Err(Error::NoAdmissibleBeta { beta_max, binding_k: binding });
        }
        let bad = table.iter().rposition(|s| s.dunder - s.dbar / (beta - 1.0) < 0.0);
        let k_star = match bad {
            None => table.first().map_or(0, |s| s.k),
            Some(i) if i + 1 < table.len() => table[i + 1].k,
            Some(i) => table[i].k + 1,
        };
        if let Some(i) = bad {
            binding = table[i].k;
        }
        if k_star <= k_check / 2 {
            let params = BDLyapunovParams::from_eta_beta(eta, beta)?;
            let cert = CheckCertificate::new(
                "beta_selection",
                format!("|n| in [{}, {k_check}]", table.first().map_or(0, |s| s.k)),
                Qualifier::Exact,
            )
            .witness("beta", beta)
            .witness("k_star", k_star as f64)
            .witness("alpha", params.alpha)
            .witness("epsilon", params.epsilon)
            .witness("eta", eta)
            .conclude(Verdict::Holds);
            return Ok(BdSelection { params, k_star, certificate: cert });
        }
        j += 1;
    }
}

/// Auto-selects `eta` on `[d, k_check]` and then `beta`.
pub fn select_bd_params(model: &BDModel, k_check: u64) -> Result<BdSelection> {
    let table = slice_table(model, model.dim() as u64..=k_check)?;
    let (eta, cert) = auto_eta_on_table(&table);
    let eta = eta.ok_or_else(|| {
        Error::Precondition(format!(
            "slice inequality fails for every eta in the grid; first counterexample: {}",
            cert.counterexamples.first().map_or("none", |c| c.note.as_str())
        ))
    })?;
    select_bd_params_on_table(&table, eta)
}

/// As [`select_bd_params`] with `eta` given.
pub fn select_bd_params_with_eta(model: &BDModel, eta: f64, k_check: u64) -> Result<BdSelection> {
    let table = slice_table(model, model.dim() as u64..=k_check)?;
    let cert = check_assumption_on_table(&table, eta);
    if !cert.holds() {
        return Err(Error::Precondition(format!("slice inequality fails for eta = {eta}")));
    }
    select_bd_params_on_table(&table, eta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::birth_death::model::LvParams;

    fn reference() -> BDModel {
        BDModel::lv(LvParams {
            lambda: vec![1.0, 1.0],
            mu: vec![1.0, 1.0],
            gamma: vec![vec![0.0; 2]; 2],
            c: vec![vec![1.0, 0.2], vec![0.2, 1.0]],
        })
        .unwrap()
    }

    #[test]
    fn competitive_chain_passes_for_small_eta() {
        let cert = check_assumption_pnm(&reference(), 0.125, 2..=60).unwrap();
        assert!(cert.holds(), "{cert:?}");
    }

    #[test]
    fn critical_chain_without_competition_fails() {
        let m = BDModel::constant(vec![1.0, 1.0], vec![1.0, 1.0]).unwrap();
        let cert = check_assumption_pnm(&m, 0.01, 2..=60).unwrap();
        assert_eq!(cert.verdict, Verdict::Violated);
        assert!(!cert.counterexamples.is_empty());
    }

    #[test]
    fn huge_eta_fails_immediately() {
        let cert = check_assumption_pnm(&reference(), 1e6, 2..=60).unwrap();
        assert_eq!(cert.verdict, Verdict::Violated);
    }

    #[test]
    fn selection_gives_finite_beta() {
        let sel = select_bd_params(&reference(), 200).unwrap();
        let p = sel.params;
        assert!(p.beta > 1.0 && p.beta <= 1.0 + 4.0 / p.eta);
        assert_eq!(p.alpha, 1.0 + p.eta / 2.0);
        assert!((p.epsilon * (p.beta - 1.0) - p.eta / 2.0).abs() < 1e-15);
        assert!(sel.k_star <= 100);
    }

    #[test]
    fn selection_fails_without_the_inequality() {
        let m = BDModel::constant(vec![1.0, 1.0], vec![1.0, 1.0]).unwrap();
        assert!(select_bd_params(&m, 60).is_err());
    }
}
