use rand::Rng;
use rand_distr::Exp1;
use rayon::prelude::*;

use crate::error::Result;
use crate::measure::EmpiricalMeasure;
use crate::rng::RngStream;
use crate::state::State;

use super::certificate::{CheckCertificate, Counterexample, Qualifier, Verdict};
use super::pair::LyapunovPair;

/// Support sizes cycled through by [`sample_mixtures`].
pub const MIXTURE_SIZES: [usize; 4] = [1, 2, 5, 20];

/// `n_draws` Dirichlet(1)-weighted mixtures over uniformly drawn supports.
pub fn sample_mixtures<S: Clone>(states: &[S], n_draws: usize, rng: RngStream) -> Result<Vec<EmpiricalMeasure<S>>> {
    (0..n_draws)
        .map(|i| {
            let mut r = rng.child(i as u64).rng();
            let size = MIXTURE_SIZES[i % MIXTURE_SIZES.len()];
            let atoms: Vec<(S, f64)> = (0..size)
                .map(|_| (states[r.random_range(0..states.len())].clone(), r.sample::<f64, _>(Exp1)))
                .collect();
            EmpiricalMeasure::from_atoms(atoms)?.normalized()
        })
        .collect()
}

/// Per-measure quantities of the nonlinear inequality.
#[derive(Clone, Copy, Debug)]
pub struct MeasureTerms {
    /// `mu(LV) - mu(V) mu(L phi) / mu(phi)`
    pub lhs: f64,
    /// `mu(phi)`
    pub phi: f64,
    /// `mu(V)^(1+eps) / mu(phi)^eps`
    pub feature: f64,
    /// `mu(V^(1+eps)/phi^eps) mu(phi)^eps - mu(V)^(1+eps)`, nonnegative by Hoelder
    pub holder_gap: f64,
}

pub fn measure_terms<P: LyapunovPair>(pair: &P, mu: &EmpiricalMeasure<P::State>, epsilon: f64) -> MeasureTerms {
    let v = mu.integrate(|s| pair.v(s));
    let phi = mu.integrate(|s| pair.phi(s));
    let lv = mu.integrate(|s| pair.lv(s));
    let lphi = mu.integrate(|s| pair.lphi(s));
    let w = mu.integrate(|s| {
        let p = pair.phi(s);
        if p > 0.0 {
            pair.v(s).powf(1.0 + epsilon) / p.powf(epsilon)
        } else {
            0.0
        }
    });
    let feature = v.powf(1.0 + epsilon) / phi.powf(epsilon);
    MeasureTerms {
        lhs: lv - v * lphi / phi,
        phi,
        feature,
        holder_gap: w * phi.powf(epsilon) - v.powf(1.0 + epsilon),
    }
}

/// Log grid `[1e-3, 1e3]` for the constants `A` and `B`.
pub fn constant_grid() -> Vec<f64> {
    (0..=24).map(|j| 10f64.powf(-3.0 + j as f64 * 0.25)).collect()
}

/// Checks `mu(LV) - mu(V) mu(L phi)/mu(phi) <= A mu(phi) - B mu(V)^(1+eps)/mu(phi)^eps`.
///
/// For each `B` on the grid the minimal `A` is fitted and rounded up to the
/// grid; the Pareto set of admissible `(A, B)` pairs is reported in the notes.
/// The verdict holds iff some grid pair dominates every sampled measure.
pub fn check_nonlinear_inequality<P: LyapunovPair>(
    pair: &P,
    measures: &[EmpiricalMeasure<P::State>],
    epsilon: f64,
) -> CheckCertificate {
    let mut cert = CheckCertificate::new(
        "nonlinear_inequality",
        format!("{} sampled measures, epsilon = {epsilon}", measures.len()),
        Qualifier::Empirical,
    );
    let terms: Vec<Option<MeasureTerms>> = measures
        .par_iter()
        .map(|mu| {
            let t = measure_terms(pair, mu, epsilon);
            (t.phi > 0.0 && t.lhs.is_finite() && t.feature.is_finite()).then_some(t)
        })
        .collect();
    let skipped = terms.iter().filter(|t| t.is_none()).count();
    if skipped > 0 {
        cert.note(format!("skipped {skipped} measures with degenerate mu(phi)"));
    }
    let valid: Vec<(usize, MeasureTerms)> = terms.iter().enumerate().filter_map(|(i, t)| t.map(|t| (i, t))).collect();
    if valid.is_empty() {
        return cert.conclude(Verdict::Inconclusive);
    }
    let holder_bad = valid.iter().filter(|(_, t)| t.holder_gap < -1e-12 * (t.feature * t.phi.powf(epsilon)).max(1.0)).count();
    cert.set_witness("holder_violations", holder_bad as f64);
    let grid = constant_grid();
    let mut pareto = Vec::new();
    for &b in &grid {
        let need = valid.iter().map(|(_, t)| (t.lhs + b * t.feature) / t.phi).fold(f64::NEG_INFINITY, f64::max);
        if let Some(&a) = grid.iter().find(|&&a| a >= need) {
            pareto.push((a, b));
        }
    }
    if let Some(&(a, b)) = pareto.last() {
        cert.set_witness("A", a);
        cert.set_witness("B", b);
        cert.set_witness("measures", valid.len() as f64);
        cert.note(format!(
            "pareto set (A, B): {}",
            pareto.iter().map(|(a, b)| format!("({a:.4e}, {b:.4e})")).collect::<Vec<_>>().join(" ")
        ));
        cert.conclude(Verdict::Holds)
    } else {
        let b = grid[0];
        let (i, t) = valid
            .iter()
            .max_by(|x, y| {
                let fx = (x.1.lhs + b * x.1.feature) / x.1.phi;
                let fy = (y.1.lhs + b * y.1.feature) / y.1.phi;
                fx.total_cmp(&fy)
            })
            .copied()
            .unwrap();
        let s = measures[i].atoms().first().map(|a| a.0.coords_f64()).unwrap_or_default();
        cert.push_counterexample(Counterexample::new(
            s,
            format!("measure #{i}: lhs = {:e} needs A > {:e} even at B = {b:e}", t.lhs, (t.lhs + b * t.feature) / t.phi),
        ));
        cert.conclude(Verdict::Violated)
    }
}
