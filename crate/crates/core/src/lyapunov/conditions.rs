//! Conditions (a) and (b) on a finite shell domain.
//!
//! A condition holds on the domain when its violations stay clear of the
//! outer shells (the outer half unless the domain says otherwise); the first
//! shell past the last violation gives the witness threshold.

use rayon::prelude::*;

use crate::state::State;

use super::certificate::{CheckCertificate, Counterexample, Qualifier, Verdict};
use super::pair::{Domain, LyapunovPair};

/// Log grid of the free constant `C'` in condition (b), largest first.
pub fn c_prime_grid() -> Vec<f64> {
    (0..=24).rev().map(|j| 10f64.powf(-3.0 + j as f64 * 0.25)).collect()
}

struct ShellScan {
    /// Index of the last shell containing a violation.
    last_bad: Option<usize>,
    /// `(shell, state, value)` for the worst violation per violating shell.
    worst: Vec<(usize, Vec<f64>, f64)>,
}

fn scan<S: State>(domain: &Domain<S>, value: impl Fn(&S) -> f64 + Sync) -> ShellScan {
    let per_shell: Vec<Option<(Vec<f64>, f64)>> = domain
        .shells
        .par_iter()
        .map(|shell| {
            let mut worst: Option<(Vec<f64>, f64)> = None;
            for s in shell {
                let v = value(s);
                if v > 0.0 && worst.as_ref().is_none_or(|w| v > w.1) {
                    worst = Some((s.coords_f64(), v));
                }
            }
            worst
        })
        .collect();
    let last_bad = per_shell.iter().rposition(Option::is_some);
    let worst = per_shell.into_iter().enumerate().filter_map(|(k, w)| w.map(|(s, v)| (k, s, v))).collect();
    ShellScan { last_bad, worst }
}

fn threshold_level<P: LyapunovPair>(pair: &P, domain: &Domain<P::State>, shell: usize) -> f64 {
    domain.shells[shell].first().map_or(f64::NAN, |s| pair.exhaustion_level(s))
}

fn push_violations(cert: &mut CheckCertificate, scan: &ShellScan, from_shell: usize, what: &str) {
    for (k, s, v) in scan.worst.iter().filter(|w| w.0 >= from_shell).rev().take(20) {
        cert.push_counterexample(Counterexample::new(s.clone(), format!("shell {k}: {what} = {v:e} > 0")));
    }
}

/// Condition (a): `-L phi <= C 1_{O_n}`.
///
/// Reports the smallest exhaustion level `n` outside which `-L phi <= 0` and
/// `C = sup_{O_n} (-L phi)^+`.
pub fn check_condition_a<P: LyapunovPair>(pair: &P, domain: &Domain<P::State>) -> CheckCertificate {
    let mut cert = CheckCertificate::new("condition_a", domain.description.clone(), Qualifier::Exact);
    let n_shells = domain.shells.len();
    if n_shells == 0 {
        cert.note("empty domain");
        return cert.conclude(Verdict::Inconclusive);
    }
    let sc = scan(domain, |s| -pair.lphi(s));
    let first_ok = sc.last_bad.map_or(0, |k| k + 1);
    let max_ok = domain.max_threshold_shell();
    if first_ok > max_ok {
        push_violations(&mut cert, &sc, max_ok, "-L phi");
        return cert.conclude(Verdict::Violated);
    }
    let c = sc.worst.iter().map(|w| w.2).fold(0.0, f64::max);
    cert.set_witness("C", c);
    cert.set_witness("n", threshold_level(pair, domain, first_ok));
    cert.set_witness("shell", first_ok as f64);
    cert.conclude(Verdict::Holds)
}

/// Condition (b): `LV + C' V^(1+eps)/phi^eps <= C'' phi`.
///
/// `C'` is the largest value of [`c_prime_grid`] for which
/// `LV + C' V^(1+eps)/phi^eps <= 0` outside some `O_m` within the admissible
/// inner shells of the domain; `C''` is then the smallest constant making the inequality
/// hold on the whole domain.
pub fn check_condition_b<P: LyapunovPair>(pair: &P, epsilon: f64, domain: &Domain<P::State>) -> CheckCertificate {
    let mut cert = CheckCertificate::new("condition_b", domain.description.clone(), Qualifier::Exact);
    let n_shells = domain.shells.len();
    if n_shells == 0 || !(epsilon > 0.0) {
        cert.note("empty domain or nonpositive epsilon");
        return cert.conclude(Verdict::Inconclusive);
    }
    let values: Vec<Vec<(f64, f64, f64)>> = domain
        .shells
        .par_iter()
        .map(|shell| {
            shell
                .iter()
                .map(|s| {
                    let v = pair.v(s);
                    let phi = pair.phi(s);
                    (pair.lv(s), v.powf(1.0 + epsilon) / phi.powf(epsilon), phi)
                })
                .collect()
        })
        .collect();
    let max_ok = domain.max_threshold_shell();
    let mut chosen = None;
    let mut fallback = None;
    for cp in c_prime_grid() {
        let last_bad = values.iter().rposition(|shell| shell.iter().any(|&(lv, w, _)| lv + cp * w > 0.0));
        let first_ok = last_bad.map_or(0, |k| k + 1);
        if first_ok <= max_ok {
            chosen = Some((cp, first_ok));
            break;
        }
        fallback = Some(cp);
    }
    let Some((cp, first_ok)) = chosen else {
        let cp = fallback.unwrap_or(1e-3);
        let sc = scan(domain, |s| {
            let v = pair.v(s);
            let phi = pair.phi(s);
            pair.lv(s) + cp * v.powf(1.0 + epsilon) / phi.powf(epsilon)
        });
        push_violations(&mut cert, &sc, max_ok, &format!("LV + {cp:e} V^(1+eps)/phi^eps"));
        return cert.conclude(Verdict::Violated);
    };
    let c2 = values
        .iter()
        .flatten()
        .map(|&(lv, w, phi)| if phi > 0.0 { (lv + cp * w).max(0.0) / phi } else { 0.0 })
        .fold(0.0, f64::max);
    cert.set_witness("C_prime", cp);
    cert.set_witness("C_double_prime", c2);
    cert.set_witness("m", threshold_level(pair, domain, first_ok));
    cert.set_witness("shell", first_ok as f64);
    cert.set_witness("epsilon", epsilon);
    cert.conclude(Verdict::Holds)
}
