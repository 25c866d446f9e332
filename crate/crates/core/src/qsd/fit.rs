use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::ols;

/// Fewest points a decay fit accepts.
pub const MIN_FIT_POINTS: usize = 5;

/// Log-linear fit `value ~ C e^{-rate t}` over an automatic window.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub rate: f64,
    pub rate_ci: (f64, f64),
    pub c: f64,
    pub r_squared: f64,
    pub window: (f64, f64),
    pub n_points: usize,
}

impl DecayFit {
    /// Whether the two 95% intervals intersect.
    pub fn overlaps(&self, other: &DecayFit) -> bool {
        self.rate_ci.0 <= other.rate_ci.1 && other.rate_ci.0 <= self.rate_ci.1
    }
}

/// Fits `ln value` against `t` from the first point at or below 80% of the
/// maximum to the last point at or above ten times its noise floor.
pub fn fit_decay_rate(t: &[f64], values: &[f64], noise: &[f64]) -> Result<DecayFit> {
    if t.len() != values.len() || t.len() != noise.len() {
        return Err(Error::Dimension { expected: t.len(), got: values.len().min(noise.len()) });
    }
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let Some(i0) = values.iter().position(|&v| v <= 0.8 * max) else {
        return Err(Error::InsufficientDecay(0));
    };
    let Some(i1) = (0..values.len()).rev().find(|&i| values[i] > 0.0 && values[i] >= 10.0 * noise[i]) else {
        return Err(Error::InsufficientDecay(0));
    };
    if i1 < i0 {
        return Err(Error::InsufficientDecay(0));
    }
    let end = (i0..=i1).find(|&i| !(values[i] > 0.0)).map_or(i1, |i| i - 1);
    let n = (end + 1).saturating_sub(i0);
    if end < i0 || n < MIN_FIT_POINTS {
        return Err(Error::InsufficientDecay(n));
    }
    let x = &t[i0..=end];
    let y: Vec<f64> = values[i0..=end].iter().map(|v| v.ln()).collect();
    let f = ols(x, &y).ok_or(Error::InsufficientDecay(n))?;
    Ok(DecayFit {
        rate: -f.slope,
        rate_ci: (-f.slope_ci.1, -f.slope_ci.0),
        c: f.intercept.exp(),
        r_squared: f.r_squared,
        window: (t[i0], t[end]),
        n_points: n,
    })
}

/// Binomial standard deviations `sqrt(p(1-p)/n)` of survival fractions.
pub fn survival_noise(fractions: &[f64], n: usize) -> Vec<f64> {
    fractions.iter().map(|p| (p * (1.0 - p) / n.max(1) as f64).sqrt()).collect()
}

/// A TV-decay curve with its fit and the survival decay rate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub label: String,
    pub t_grid: Vec<f64>,
    pub tv_curve: Vec<f64>,
    pub survivors: Vec<usize>,
    pub noise_floor: Vec<f64>,
    pub fit: Option<DecayFit>,
    pub fit_error: Option<String>,
    pub lambda0: Option<DecayFit>,
}

impl ConvergenceReport {
    pub fn new(label: impl Into<String>, t_grid: Vec<f64>, tv_curve: Vec<f64>, survivors: Vec<usize>, noise_floor: Vec<f64>) -> Self {
        let (fit, fit_error) = match fit_decay_rate(&t_grid, &tv_curve, &noise_floor) {
            Ok(f) => (Some(f), None),
            Err(e) => (None, Some(e.to_string())),
        };
        ConvergenceReport { label: label.into(), t_grid, tv_curve, survivors, noise_floor, fit, fit_error, lambda0: None }
    }

    /// Columns `t, tv, tv_half, survivors, ci_lo, ci_hi`: `tv` is `sum |p - q|`,
    /// `tv_half` its half; the band is `tv` plus or minus its noise floor.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,tv,tv_half,survivors,ci_lo,ci_hi\n");
        for i in 0..self.t_grid.len() {
            let tv = self.tv_curve[i];
            let nf = self.noise_floor[i];
            let _ = writeln!(
                out,
                "{},{:.12e},{:.12e},{},{:.12e},{:.12e}",
                self.t_grid[i],
                tv,
                0.5 * tv,
                self.survivors[i],
                (tv - nf).max(0.0),
                (tv + nf).min(2.0)
            );
        }
        out
    }

    pub fn summary_json(&self) -> serde_json::Value {
        let fit = |f: &Option<DecayFit>| {
            f.map(|f| {
                serde_json::json!({
                    "rate": f.rate, "rate_ci": [f.rate_ci.0, f.rate_ci.1], "C": f.c, "r2": f.r_squared,
                    "window": [f.window.0, f.window.1], "points": f.n_points,
                })
            })
        };
        serde_json::json!({
            "label": self.label,
            "fit": fit(&self.fit),
            "fit_error": self.fit_error,
            "lambda0": fit(&self.lambda0),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_exponential() {
        let t: Vec<f64> = (0..50).map(|i| i as f64 * 0.1).collect();
        let v: Vec<f64> = t.iter().map(|t| 3.0 * (-0.7 * t).exp()).collect();
        let f = fit_decay_rate(&t, &v, &vec![0.0; 50]).unwrap();
        assert!((f.rate - 0.7).abs() < 1e-12);
        assert!((f.c - 3.0).abs() < 1e-11);
        assert!((f.r_squared - 1.0).abs() < 1e-12);
        assert!(f.window.0 > 0.0);
    }

    #[test]
    fn window_stops_at_noise() {
        let t: Vec<f64> = (0..50).map(|i| i as f64 * 0.1).collect();
        let v: Vec<f64> = t.iter().map(|t| (-t).exp()).collect();
        let f = fit_decay_rate(&t, &v, &vec![0.01; 50]).unwrap();
        // e^{-t} >= 0.1 until t = ln 10
        assert!((f.window.1 - 2.3).abs() < 1e-9);
    }

    #[test]
    fn short_window_errors() {
        let t = [0.0, 1.0, 2.0, 3.0];
        let v = [1.0, 0.5, 0.25, 0.125];
        assert!(matches!(fit_decay_rate(&t, &v, &[0.0; 4]), Err(Error::InsufficientDecay(3))));
    }

    #[test]
    fn overlap() {
        let a = DecayFit { rate: 1.0, rate_ci: (0.9, 1.1), c: 1.0, r_squared: 1.0, window: (0.0, 1.0), n_points: 5 };
        let mut b = a;
        b.rate_ci = (1.05, 1.3);
        assert!(a.overlaps(&b));
        b.rate_ci = (1.15, 1.3);
        assert!(!a.overlaps(&b));
    }
}
