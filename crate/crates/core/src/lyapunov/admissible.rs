use crate::error::{Error, Result};
use crate::state::State;

use super::certificate::{CheckCertificate, Counterexample, Qualifier, Verdict};
use super::pair::LyapunovPair;

/// Checks the admissible-couple axioms on a sample ordered by escape.
///
/// `sample` must be sorted so that later states are further out of the
/// exhaustion; `absorbed` are boundary states on which both functions must
/// vanish. Verified: positivity off the boundary, `inf V/phi > 0`,
/// boundedness, and `V/phi` increasing along the sample with a final value
/// at least ten times the first.
pub fn check_admissible<P: LyapunovPair>(
    pair: &P,
    sample: &[P::State],
    absorbed: &[P::State],
) -> Result<CheckCertificate> {
    if sample.len() < 3 {
        return Err(Error::NotEscaping("need at least three sample states".into()));
    }
    let levels: Vec<f64> = sample.iter().map(|s| pair.exhaustion_level(s)).collect();
    if levels.windows(2).any(|w| w[1] < w[0]) || levels.last() <= levels.first() {
        return Err(Error::NotEscaping("exhaustion levels must increase along the sample".into()));
    }
    let mut cert = CheckCertificate::new(
        "admissible_couple",
        format!("{} escaping states, levels {} to {}", sample.len(), levels[0], levels[levels.len() - 1]),
        Qualifier::Exact,
    );
    for s in absorbed {
        if !s.is_absorbed() {
            return Err(Error::InvalidParameter("boundary sample contains an interior state".into()));
        }
        let (v, phi) = (pair.v(s), pair.phi(s));
        if v != 0.0 || phi != 0.0 {
            cert.push_counterexample(Counterexample::new(s.coords_f64(), format!("V = {v}, phi = {phi} on the boundary")));
        }
    }
    let mut ratios = Vec::with_capacity(sample.len());
    let (mut sup_v, mut sup_phi) = (0.0f64, 0.0f64);
    let (mut sup_lv, mut inf_lphi) = (f64::NEG_INFINITY, f64::INFINITY);
    for s in sample {
        let (v, phi) = (pair.v(s), pair.phi(s));
        if !(v > 0.0 && phi > 0.0) || !v.is_finite() || !phi.is_finite() {
            cert.push_counterexample(Counterexample::new(s.coords_f64(), format!("V = {v}, phi = {phi} off the boundary")));
            continue;
        }
        sup_v = sup_v.max(v);
        sup_phi = sup_phi.max(phi);
        sup_lv = sup_lv.max(pair.lv(s));
        inf_lphi = inf_lphi.min(pair.lphi(s));
        ratios.push(v / phi);
    }
    if !cert.counterexamples.is_empty() {
        return Ok(cert.conclude(Verdict::Violated));
    }
    let inf_ratio = ratios.iter().copied().fold(f64::INFINITY, f64::min);
    let increasing = ratios.windows(2).filter(|w| w[1] >= w[0]).count() as f64 / (ratios.len() - 1) as f64;
    let growth = ratios[ratios.len() - 1] / ratios[0];
    cert.set_witness("inf_V_over_phi", inf_ratio);
    cert.set_witness("sup_V", sup_v);
    cert.set_witness("sup_phi", sup_phi);
    cert.set_witness("sup_LV", sup_lv);
    cert.set_witness("inf_Lphi", inf_lphi);
    cert.set_witness("ratio_growth", growth);
    cert.set_witness("increasing_fraction", increasing);
    if !(inf_ratio > 0.0) {
        cert.push_counterexample(Counterexample::new(sample[0].coords_f64(), "inf V/phi is not positive"));
    }
    if increasing < 0.9 || !(growth >= 10.0) {
        let last = &sample[sample.len() - 1];
        cert.push_counterexample(Counterexample::new(
            last.coords_f64(),
            format!("V/phi does not diverge along the sample (growth {growth:.3}, increasing fraction {increasing:.2})"),
        ));
    }
    let verdict = if cert.counterexamples.is_empty() { Verdict::Holds } else { Verdict::Violated };
    Ok(cert.conclude(verdict))
}
