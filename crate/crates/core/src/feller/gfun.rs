use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Increasing concave `g`: `x^gamma` on `[0, 1]`, a quintic on `[1, 2]`,
/// `delta - x^(-eta/2)` on `[2, inf)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GFunction {
    pub gamma_exp: f64,
    pub delta: f64,
    pub eta: f64,
    /// Quintic coefficients in `u = x - 1`.
    pub quintic: [f64; 6],
}

/// Grid size for the shape checks of [`build_g`].
pub const G_GRID: usize = 10_000;

impl GFunction {
    fn from_delta(gamma: f64, delta: f64, eta: f64) -> GFunction {
        let e = eta / 2.0;
        let (y0, d0, s0) = (1.0, gamma, gamma * (gamma - 1.0));
        let p = 2f64.powf(-e);
        let (y1, d1, s1) = (delta - p, e * p / 2.0, -e * (e + 1.0) * p / 4.0);
        let c0 = y0;
        let c1 = d0;
        let c2 = s0 / 2.0;
        let r0 = y1 - (c0 + c1 + c2);
        let r1 = d1 - (c1 + 2.0 * c2);
        let r2 = s1 - 2.0 * c2;
        let c3 = 10.0 * r0 - 4.0 * r1 + 0.5 * r2;
        let c4 = -15.0 * r0 + 7.0 * r1 - r2;
        let c5 = 6.0 * r0 - 3.0 * r1 + 0.5 * r2;
        GFunction { gamma_exp: gamma, delta, eta, quintic: [c0, c1, c2, c3, c4, c5] }
    }

    /// `(g, g', g'')` at `x >= 0`.
    #[inline]
    pub fn eval(&self, x: f64) -> (f64, f64, f64) {
        if x <= 0.0 {
            return (0.0, f64::INFINITY, f64::NEG_INFINITY);
        }
        if x <= 1.0 {
            let g = self.gamma_exp;
            let v = x.powf(g);
            (v, g * v / x, g * (g - 1.0) * v / (x * x))
        } else if x < 2.0 {
            let u = x - 1.0;
            let c = &self.quintic;
            let v = c[0] + u * (c[1] + u * (c[2] + u * (c[3] + u * (c[4] + u * c[5]))));
            let d1 = c[1] + u * (2.0 * c[2] + u * (3.0 * c[3] + u * (4.0 * c[4] + u * 5.0 * c[5])));
            let d2 = 2.0 * c[2] + u * (6.0 * c[3] + u * (12.0 * c[4] + u * 20.0 * c[5]));
            (v, d1, d2)
        } else {
            let e = self.eta / 2.0;
            let p = x.powf(-e);
            (self.delta - p, e * p / x, -e * (e + 1.0) * p / (x * x))
        }
    }

    pub fn value(&self, x: f64) -> f64 {
        if x <= 0.0 {
            0.0
        } else {
            self.eval(x).0
        }
    }

    /// Grid points of `[1, 2]` where `g' <= 0` or `g'' > 0`.
    pub fn shape_violations(&self, points: usize) -> usize {
        (0..points)
            .filter(|&j| {
                let x = 1.0 + j as f64 / (points - 1) as f64;
                let (_, d1, d2) = self.eval(x);
                !(d1 > 0.0) || d2 > 1e-12 * d1.abs().max(1.0)
            })
            .count()
    }

    /// Largest relative mismatch of `(g, g', g'')` at 1 and 2.
    pub fn junction_mismatch(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for x in [1.0f64, 2.0] {
            let inner = {
                let u = x - 1.0;
                let c = &self.quintic;
                (
                    c[0] + u * (c[1] + u * (c[2] + u * (c[3] + u * (c[4] + u * c[5])))),
                    c[1] + u * (2.0 * c[2] + u * (3.0 * c[3] + u * (4.0 * c[4] + u * 5.0 * c[5]))),
                    2.0 * c[2] + u * (6.0 * c[3] + u * (12.0 * c[4] + u * 20.0 * c[5])),
                )
            };
            let outer = if x == 1.0 {
                let g = self.gamma_exp;
                (1.0, g, g * (g - 1.0))
            } else {
                let e = self.eta / 2.0;
                let p = 2f64.powf(-e);
                (self.delta - p, e * p / 2.0, -e * (e + 1.0) * p / 4.0)
            };
            for (u, v) in [(inner.0, outer.0), (inner.1, outer.1), (inner.2, outer.2)] {
                let s = u.abs().max(v.abs()).max(1e-300);
                worst = worst.max((u - v).abs() / s);
            }
        }
        worst
    }
}

/// Lower end of the admissible `gamma` interval, `eta 2^(-2-eta/2)`.
pub fn gamma_lower(eta: f64) -> f64 {
    eta * 2f64.powf(-2.0 - eta / 2.0)
}

/// Builds `g` for exponent `gamma_exp`, with `delta` given or by the
/// chord-midpoint rule `delta = 1 + 2^(-eta/2) + (g'(1) + g'(2))/2`.
///
/// A failing `delta` is moved halfway toward the midpoint rule, then chord
/// slopes elsewhere in `(g'(2), g'(1))` are tried.
pub fn build_g(eta: f64, gamma_exp: f64, delta: Option<f64>) -> Result<GFunction> {
    if !(eta > 0.0 && eta < 1.0) {
        return Err(Error::InvalidParameter(format!("eta = {eta} not in (0, 1)")));
    }
    let lo = gamma_lower(eta);
    if !(gamma_exp > lo && gamma_exp < 1.0) {
        return Err(Error::NoAdmissibleG(format!("gamma = {gamma_exp} outside ({lo}, 1)")));
    }
    let base = 1.0 + 2f64.powf(-eta / 2.0);
    let chord_delta = |theta: f64| base + lo + theta * (gamma_exp - lo);
    let mut candidates = Vec::new();
    if let Some(d0) = delta {
        let mid = chord_delta(0.5);
        let mut d = d0;
        for _ in 0..8 {
            candidates.push(d);
            d = 0.5 * (d + mid);
        }
    }
    for theta in [0.5, 0.45, 0.55, 0.4, 0.6, 0.3, 0.7, 0.2, 0.8, 0.1, 0.9] {
        candidates.push(chord_delta(theta));
    }
    let mut last = String::new();
    for d in candidates {
        let slope = d - base;
        if !(slope > lo && slope < gamma_exp) {
            last = format!("chord slope {slope} outside ({lo}, {gamma_exp})");
            continue;
        }
        let g = GFunction::from_delta(gamma_exp, d, eta);
        let bad = g.shape_violations(G_GRID);
        if bad == 0 {
            return Ok(g);
        }
        last = format!("delta = {d}: {bad} grid points with g' <= 0 or g'' > 0 on [1, 2]");
    }
    Err(Error::NoAdmissibleG(last))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn endpoint_data() {
        let eta = 0.5;
        let gam = 0.5 * (gamma_lower(eta) + 1.0);
        let g = build_g(eta, gam, None).unwrap();
        let p = 2f64.powf(-0.25);
        assert!((g.eval(1.0).0 - 1.0).abs() < 1e-15);
        assert!((g.eval(1.0).1 - gam).abs() < 1e-15);
        assert!((g.eval(2.0).0 - (g.delta - p)).abs() < 1e-15);
        assert!((g.eval(2.0).1 - gamma_lower(eta)).abs() < 1e-15);
        assert!((g.delta - (1.0 + p + (gam + gamma_lower(eta)) / 2.0)).abs() < 1e-15);
        assert!(g.junction_mismatch() < 1e-9);
        assert_eq!(g.shape_violations(G_GRID), 0);
    }

    #[test]
    fn increasing_concave_on_log_grid() {
        for eta in [0.1, 0.5, 0.9] {
            for t in [0.1, 0.5, 0.9] {
                let gam = gamma_lower(eta) + t * (1.0 - gamma_lower(eta));
                let Ok(g) = build_g(eta, gam, None) else { continue };
                let mut prev = 0.0;
                for j in 0..=2000 {
                    let x = 10f64.powf(-6.0 + 12.0 * j as f64 / 2000.0);
                    let (v, d1, d2) = g.eval(x);
                    assert!(v > prev && d1 > 0.0 && d2 <= 1e-12, "eta {eta} gamma {gam} x {x}");
                    prev = v;
                }
            }
        }
    }

    #[test]
    fn rejects_gamma_out_of_range() {
        assert!(build_g(0.5, 0.05, None).is_err());
        assert!(build_g(0.5, 1.0, None).is_err());
    }

    #[test]
    fn nudges_a_bad_delta() {
        let g = build_g(0.5, 0.6, Some(100.0)).unwrap();
        assert!(g.delta < 100.0);
        assert_eq!(g.shape_violations(G_GRID), 0);
    }
}
