use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::assumption::FellerAssumptionParams;

/// Quintic smoothstep `6t^5 - 15t^4 + 10t^3` with its first two derivatives.
#[inline]
fn smoothstep(t: f64) -> (f64, f64, f64) {
    let t2 = t * t;
    let t3 = t2 * t;
    (t3 * (10.0 + t * (-15.0 + 6.0 * t)), 30.0 * t2 * (1.0 - t) * (1.0 - t), 60.0 * t * (1.0 - t) * (1.0 - 2.0 * t))
}

/// `N(beta) = (a - B_a)^4 C_beta`.
fn c_beta_numerator(rho: f64, beta: f64) -> f64 {
    let w = rho - 1.0;
    let p = 2f64.powf(-beta);
    -p + beta * p * w - beta * (beta + 1.0) * 0.5 * p * w * w + 1.0
}

/// The coefficient `C_beta` of the quartic term of `P_2`.
pub fn c_beta(a: f64, b_a: f64, beta: f64) -> f64 {
    c_beta_numerator(a / b_a, beta) / (a - b_a).powi(4)
}

/// The four-piece function `h_beta`:
/// `4x^2/a^2` on `[0, a/2]`, a smoothstep blend into `P_2` on `[a/2, a]`,
/// the quartic `P_2` on `[a, B_a]`, and `B_a^beta (2x)^-beta` beyond.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HBetaFunction {
    pub a: f64,
    pub b_a: f64,
    pub beta: f64,
    /// `P_2(x) = p[0] + p[1] u + p[2] u^2 + p[3] u^4` with `u = x - B_a`.
    pub p2: [f64; 4],
    pub c_beta: f64,
}

/// Which formula applies at a point.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HPiece {
    Quadratic,
    Blend,
    Quartic,
    Tail,
}

impl HBetaFunction {
    #[inline]
    fn quad(&self, x: f64) -> (f64, f64, f64) {
        let s = 4.0 / (self.a * self.a);
        (s * x * x, 2.0 * s * x, 2.0 * s)
    }

    #[inline]
    fn quartic(&self, x: f64) -> (f64, f64, f64) {
        let u = x - self.b_a;
        let [p0, p1, p2, p4] = self.p2;
        let u2 = u * u;
        (p0 + p1 * u + p2 * u2 + p4 * u2 * u2, p1 + 2.0 * p2 * u + 4.0 * p4 * u2 * u, 2.0 * p2 + 12.0 * p4 * u2)
    }

    #[inline]
    fn blend(&self, x: f64) -> (f64, f64, f64) {
        let (q, q1, q2) = self.quad(x);
        let (p, p1, p2) = self.quartic(x);
        let k = 2.0 / self.a;
        let (s, s1, s2) = smoothstep(k * x - 1.0);
        let (s1, s2) = (s1 * k, s2 * k * k);
        (
            q * (1.0 - s) + s * p,
            q1 * (1.0 - s) - q * s1 + s1 * p + s * p1,
            q2 * (1.0 - s) - 2.0 * q1 * s1 - q * s2 + s2 * p + 2.0 * s1 * p1 + s * p2,
        )
    }

    #[inline]
    fn tail(&self, x: f64) -> (f64, f64, f64) {
        let v = (self.b_a / (2.0 * x)).powf(self.beta);
        (v, -self.beta * v / x, self.beta * (self.beta + 1.0) * v / (x * x))
    }

    /// Value and derivatives of a named piece, evaluated anywhere.
    pub fn piece(&self, piece: HPiece, x: f64) -> (f64, f64, f64) {
        match piece {
            HPiece::Quadratic => self.quad(x),
            HPiece::Blend => self.blend(x),
            HPiece::Quartic => self.quartic(x),
            HPiece::Tail => self.tail(x),
        }
    }

    pub fn piece_at(&self, x: f64) -> HPiece {
        if x <= 0.5 * self.a {
            HPiece::Quadratic
        } else if x <= self.a {
            HPiece::Blend
        } else if x <= self.b_a {
            HPiece::Quartic
        } else {
            HPiece::Tail
        }
    }

    /// `(h, h', h'')` at `x >= 0`.
    #[inline]
    pub fn eval(&self, x: f64) -> (f64, f64, f64) {
        if x <= 0.0 {
            return (0.0, 0.0, 0.0);
        }
        self.piece(self.piece_at(x), x)
    }

    pub fn value(&self, x: f64) -> f64 {
        self.eval(x).0
    }

    /// Largest relative mismatch of value, first and second derivative across
    /// the junctions `a/2`, `a`, `B_a`.
    pub fn junction_mismatch(&self) -> f64 {
        let pairs = [
            (0.5 * self.a, HPiece::Quadratic, HPiece::Blend),
            (self.a, HPiece::Blend, HPiece::Quartic),
            (self.b_a, HPiece::Quartic, HPiece::Tail),
        ];
        let mut worst: f64 = 0.0;
        for (x, l, r) in pairs {
            let lv = self.piece(l, x);
            let rv = self.piece(r, x);
            for (u, v) in [(lv.0, rv.0), (lv.1, rv.1), (lv.2, rv.2)] {
                let scale = u.abs().max(v.abs());
                if scale > 0.0 {
                    worst = worst.max((u - v).abs() / scale);
                }
            }
        }
        worst
    }

    /// Counts grid points of `[a, upper]` where `h' > 0` or `h'' < 0`.
    pub fn shape_violations(&self, upper: f64, points: usize) -> usize {
        (0..points)
            .filter(|&j| {
                let x = self.a + (upper - self.a) * j as f64 / (points - 1) as f64;
                let (_, d1, d2) = self.eval(x);
                d1 > 0.0 || d2 < 0.0
            })
            .count()
    }

    /// Minimum of `h` over a grid of `[a/2, a]`.
    pub fn min_on_blend(&self, points: usize) -> f64 {
        (0..points)
            .map(|j| self.value(0.5 * self.a + 0.5 * self.a * j as f64 / (points - 1) as f64))
            .fold(f64::INFINITY, f64::min)
    }
}

/// Sign certificate for `P_2' <= 0` and `P_2'' >= 0` on `(-inf, B_a]`:
/// `P_2''` is minimal at `u = 0` and `P_2'` is maximal at `B_a` or at a root
/// of `P_2''`.
fn p2_shape_certified(h: &HBetaFunction) -> bool {
    let [_, p1, p2, p4] = h.p2;
    if !(p4 > 0.0) {
        return false;
    }
    if 2.0 * p2 < 0.0 {
        return false;
    }
    let mut crit = vec![0.0];
    let disc = -2.0 * p2 / (12.0 * p4);
    if disc >= 0.0 {
        crit.push(-disc.sqrt());
    }
    crit.into_iter().all(|u| p1 + 2.0 * p2 * u + 4.0 * p4 * u * u * u <= 0.0)
}

/// `h_beta` for the given assumption constants.
pub fn build_h_beta(params: &FellerAssumptionParams, beta: f64) -> Result<HBetaFunction> {
    params.validate()?;
    let (a, b) = (params.a, params.b_a);
    if !(beta > 0.0) || !beta.is_finite() {
        return Err(Error::InvalidParameter(format!("beta = {beta} must be positive")));
    }
    let p = 2f64.powf(-beta);
    let cb = c_beta(a, b, beta);
    let h = HBetaFunction { a, b_a: b, beta, p2: [p, -beta * p / b, beta * (beta + 1.0) * p * 0.5 / (b * b), cb], c_beta: cb };
    if !(cb > 0.0) || !p2_shape_certified(&h) {
        return Err(Error::InvalidParameter(format!("beta = {beta} below M: C_beta = {cb:e}")));
    }
    Ok(h)
}

/// `M` with the suprema `M'`, `M''` of `|h_beta'|`, `|h_beta''|` over
/// `[a/2, a]` and `beta` in `[M, beta_max]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MConstants {
    pub m: f64,
    pub m_prime: f64,
    pub m_second: f64,
    pub beta_max: f64,
    /// Bisection resolution: `C_{m - step} <= 0` unless `m == step`.
    pub step: f64,
}

/// Width of the `beta` range scanned for `M'` and `M''`.
pub const BETA_SPAN: f64 = 100.0;
const BISECTION_STEP: f64 = 1e-10;

/// Smallest `beta` (to bisection resolution) such that `C_b > 0` for every
/// `b >= beta`.
///
/// `2^-b Q(b)`, with `Q` the quadratic factor of the numerator of `C_b`, is
/// decreasing past the larger root of `Q' - ln2 Q`; below that root the
/// numerator is scanned densely.
#[allow(non_snake_case)]
pub fn compute_M(params: &FellerAssumptionParams) -> MConstants {
    let rho = params.a / params.b_a;
    let n = |b: f64| c_beta_numerator(rho, b);
    let w = 1.0 - rho;
    let ln2 = std::f64::consts::LN_2;
    // Q(b) = 1 + b w + b(b+1) w^2/2 ; Q' - ln2 Q = A b^2 + B b + C
    let qa = -ln2 * w * w / 2.0;
    let qb = w * w - ln2 * (w + w * w / 2.0);
    let qc = w + w * w / 2.0 - ln2;
    let disc = qb * qb - 4.0 * qa * qc;
    let b_dec = if disc <= 0.0 { 0.0 } else { ((-qb - disc.sqrt()) / (2.0 * qa)).max((-qb + disc.sqrt()) / (2.0 * qa)).max(0.0) };
    let m = if n(b_dec) <= 0.0 {
        let mut lo = b_dec;
        let mut hi = b_dec.max(1.0) * 2.0;
        while n(hi) <= 0.0 {
            lo = hi;
            hi *= 2.0;
        }
        while hi - lo > BISECTION_STEP * hi.max(1.0) {
            let mid = 0.5 * (lo + hi);
            if n(mid) > 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        hi
    } else {
        // positive on [b_dec, inf); look for the last nonpositive point below
        let steps = ((b_dec / 1e-3).ceil() as usize).max(1);
        let last_bad = (0..=steps).rev().map(|j| b_dec * j as f64 / steps as f64).find(|&b| b > 0.0 && n(b) <= 0.0);
        match last_bad {
            None => BISECTION_STEP,
            Some(mut lo) => {
                let mut hi = lo + b_dec / steps as f64;
                while hi - lo > BISECTION_STEP * hi.max(1.0) {
                    let mid = 0.5 * (lo + hi);
                    if n(mid) > 0.0 {
                        hi = mid;
                    } else {
                        lo = mid;
                    }
                }
                hi
            }
        }
    };
    let beta_max = m + BETA_SPAN;
    let (mut m1, mut m2) = (0.0f64, 0.0f64);
    let nb = 201;
    let nx = 401;
    for jb in 0..nb {
        let beta = m + (beta_max - m) * jb as f64 / (nb - 1) as f64;
        let Ok(h) = build_h_beta(params, beta) else { continue };
        for jx in 0..nx {
            let x = 0.5 * params.a * (1.0 + jx as f64 / (nx - 1) as f64);
            let (_, d1, d2) = h.eval(x);
            m1 = m1.max(d1.abs());
            m2 = m2.max(d2.abs());
        }
    }
    MConstants { m, m_prime: m1, m_second: m2, beta_max, step: BISECTION_STEP }
}

/// `beta = M + max(2, a M') / C_a + 1`.
pub fn select_feller_beta(params: &FellerAssumptionParams, m: &MConstants) -> f64 {
    m.m + (2f64).max(params.a * m.m_prime) / params.c_a + 1.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn params(a: f64, b: f64) -> FellerAssumptionParams {
        FellerAssumptionParams::new(a, 0.5, b, 1.0, 1.0).unwrap()
    }

    #[test]
    fn matches_tail_at_b() {
        let h = build_h_beta(&params(1.0, 2.0), 3.0).unwrap();
        let p = 2f64.powf(-3.0);
        let (v, d1, d2) = h.piece(HPiece::Quartic, 2.0);
        assert!((v - p).abs() < 1e-16);
        assert!((d1 + 3.0 * p / 2.0).abs() < 1e-16);
        assert!((d2 - 12.0 * p / 4.0).abs() < 1e-15);
        assert!((h.value(3.0) - (2.0f64 / 6.0).powi(3)).abs() < 1e-16);
    }

    #[test]
    fn unit_at_a_and_quadratic_below() {
        let h = build_h_beta(&params(1.0, 2.0), 2.5).unwrap();
        assert!((h.piece(HPiece::Quartic, 1.0).0 - 1.0).abs() < 4.0 * f64::EPSILON);
        assert_eq!(h.value(0.25), 0.25);
        assert_eq!(h.value(0.0), 0.0);
    }

    #[test]
    fn c_beta_limit() {
        let (a, b) = (1.0f64, 2.0);
        let lim = 1.0 / (a - b).powi(4);
        assert!((c_beta(a, b, 80.0) - lim).abs() < 1e-18);
        assert!(c_beta(a, b, 40.0) < c_beta(a, b, 60.0) + 1e-12);
    }

    #[test]
    fn m_is_tight() {
        for (a, b) in [(1.0, 2.0), (1.0, 1.2), (0.3, 5.0), (2.0, 20.0)] {
            let p = params(a, b);
            let m = compute_M(&p);
            assert!(c_beta(a, b, m.m) > 0.0);
            if m.m > m.step {
                assert!(c_beta(a, b, m.m - 2.0 * m.step * m.m.max(1.0)) <= 0.0);
            }
            let h = build_h_beta(&p, m.m).unwrap();
            assert!(h.junction_mismatch() < 1e-9);
            assert!(m.m_prime > 0.0 && m.m_second > 0.0);
        }
    }

    #[test]
    fn wide_ratio_forces_a_large_m() {
        // rho = 0.05 makes C_beta negative for moderate beta
        let m = compute_M(&params(0.1, 2.0));
        assert!(m.m > 1.0);
        assert!(build_h_beta(&params(0.1, 2.0), 0.5 * m.m).is_err());
    }

    #[test]
    fn selection_formula() {
        let m = MConstants { m: 0.5, m_prime: 3.0, m_second: 0.0, beta_max: 100.5, step: 1e-10 };
        let p = FellerAssumptionParams::new(2.0, 0.5, 4.0, 0.5, 1.0).unwrap();
        assert_eq!(select_feller_beta(&p, &m), 0.5 + 6.0 / 0.5 + 1.0);
        let p = FellerAssumptionParams::new(0.1, 0.5, 4.0, 0.5, 1.0).unwrap();
        assert_eq!(select_feller_beta(&p, &m), 0.5 + 2.0 / 0.5 + 1.0);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn construction_invariants(a in 0.1f64..5.0, ratio in 1.05f64..6.0, extra in 0.0f64..20.0) {
            let p = params(a, a * ratio);
            let m = compute_M(&p);
            let h = build_h_beta(&p, m.m + extra).unwrap();
            prop_assert!(h.junction_mismatch() < 1e-9);
            prop_assert_eq!(h.shape_violations(10.0 * p.b_a, 2000), 0);
            prop_assert!(h.min_on_blend(500) >= 1.0 - 1e-12);
        }
    }
}
