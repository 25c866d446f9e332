use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::state::{ContinuousState, State};

/// Per-individual growth rates `r_i(x)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FellerGrowth {
    /// `r_i(x) = r_i - sum_j c_ij x_j`.
    Lv { r: Vec<f64>, c: Vec<Vec<f64>> },
    /// Competition starting above a level: `r_i(x) = r_i - sum_j c_ij (x_j - k_j)^+`.
    ThresholdLv { r: Vec<f64>, c: Vec<Vec<f64>>, k: Vec<f64> },
}

impl FellerGrowth {
    fn parts(&self) -> (&[f64], &[Vec<f64>]) {
        match self {
            FellerGrowth::Lv { r, c } | FellerGrowth::ThresholdLv { r, c, .. } => (r, c),
        }
    }
}

/// `dX_i = sqrt(gamma_i X_i) dB_i + X_i r_i(X) dt`, absorbed when a
/// coordinate hits zero.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FellerModel {
    gamma: Vec<f64>,
    growth: FellerGrowth,
}

impl FellerModel {
    pub fn new(gamma: Vec<f64>, growth: FellerGrowth) -> Result<Self> {
        let d = gamma.len();
        if d < 2 {
            return Err(Error::InvalidParameter("dimension must be at least 2".into()));
        }
        if gamma.iter().any(|g| !(*g > 0.0) || !g.is_finite()) {
            return Err(Error::InvalidParameter("diffusion coefficients must be positive".into()));
        }
        let (r, c) = growth.parts();
        if r.len() != d {
            return Err(Error::Dimension { expected: d, got: r.len() });
        }
        if c.len() != d {
            return Err(Error::Dimension { expected: d, got: c.len() });
        }
        if let Some(row) = c.iter().find(|row| row.len() != d) {
            return Err(Error::Dimension { expected: d, got: row.len() });
        }
        if r.iter().any(|v| !v.is_finite()) || c.iter().flatten().any(|v| !(*v >= 0.0) || !v.is_finite()) {
            return Err(Error::InvalidParameter("growth rates must be finite with c_ij >= 0".into()));
        }
        if let FellerGrowth::ThresholdLv { k, .. } = &growth {
            if k.len() != d {
                return Err(Error::Dimension { expected: d, got: k.len() });
            }
            if k.iter().any(|v| !(*v >= 0.0)) {
                return Err(Error::InvalidParameter("competition thresholds must be nonnegative".into()));
            }
        }
        Ok(FellerModel { gamma, growth })
    }

    /// Lotka-Volterra growth `r_i - sum_j c_ij x_j`.
    pub fn lv(gamma: Vec<f64>, r: Vec<f64>, c: Vec<Vec<f64>>) -> Result<Self> {
        FellerModel::new(gamma, FellerGrowth::Lv { r, c })
    }

    pub fn dim(&self) -> usize {
        self.gamma.len()
    }

    pub fn gamma(&self) -> &[f64] {
        &self.gamma
    }

    pub fn growth(&self) -> &FellerGrowth {
        &self.growth
    }

    /// Writes `r_i(x)` into `out`.
    #[inline]
    pub fn growth_into(&self, x: &[f64], out: &mut [f64]) {
        let (r, c) = self.growth.parts();
        let k = match &self.growth {
            FellerGrowth::ThresholdLv { k, .. } => Some(k.as_slice()),
            FellerGrowth::Lv { .. } => None,
        };
        for i in 0..x.len() {
            let mut v = r[i];
            for j in 0..x.len() {
                let xj = match k {
                    Some(k) => (x[j] - k[j]).max(0.0),
                    None => x[j],
                };
                v -= c[i][j] * xj;
            }
            out[i] = v;
        }
    }

    pub fn growth_rates(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; x.len()];
        self.growth_into(x, &mut out);
        out
    }

    /// The same process in coordinates `y_i = 2 x_i / gamma_i`, where every
    /// diffusion coefficient equals 2.
    pub fn rescaled(&self) -> FellerModel {
        let d = self.dim();
        let g = &self.gamma;
        let (r, c) = self.growth.parts();
        let c2: Vec<Vec<f64>> = (0..d).map(|i| (0..d).map(|j| c[i][j] * g[j] / 2.0).collect()).collect();
        let growth = match &self.growth {
            FellerGrowth::Lv { .. } => FellerGrowth::Lv { r: r.to_vec(), c: c2 },
            FellerGrowth::ThresholdLv { k, .. } => FellerGrowth::ThresholdLv {
                r: r.to_vec(),
                c: c2,
                k: (0..d).map(|j| 2.0 * k[j] / g[j]).collect(),
            },
        };
        FellerModel { gamma: vec![2.0; d], growth }
    }

    /// `x -> 2x/gamma`.
    pub fn to_rescaled(&self, x: &[f64]) -> Vec<f64> {
        x.iter().zip(&self.gamma).map(|(v, g)| 2.0 * v / g).collect()
    }

    /// `y -> gamma y / 2`.
    pub fn from_rescaled(&self, y: &[f64]) -> Vec<f64> {
        y.iter().zip(&self.gamma).map(|(v, g)| g * v / 2.0).collect()
    }

    pub(crate) fn check_dim(&self, n: usize) -> Result<()> {
        if n != self.dim() {
            return Err(Error::Dimension { expected: self.dim(), got: n });
        }
        Ok(())
    }
}

/// A function with its first and pure second partial derivatives.
pub trait SmoothFn {
    fn value(&self, x: &[f64]) -> f64;

    /// `(df/dx_i, d2f/dx_i^2)` at `x`.
    fn partials(&self, x: &[f64], i: usize) -> (f64, f64);
}

/// A [`SmoothFn`] assembled from closures.
pub struct ClosureFn<F, G> {
    pub f: F,
    pub partials: G,
}

impl<F, G> SmoothFn for ClosureFn<F, G>
where
    F: Fn(&[f64]) -> f64,
    G: Fn(&[f64], usize) -> (f64, f64),
{
    fn value(&self, x: &[f64]) -> f64 {
        (self.f)(x)
    }

    fn partials(&self, x: &[f64], i: usize) -> (f64, f64) {
        (self.partials)(x, i)
    }
}

/// `Lf(x) = sum_i x_i r_i(x) df/dx_i + sum_i (gamma_i x_i / 2) d2f/dx_i^2`.
pub fn feller_generator_apply(model: &FellerModel, f: &dyn SmoothFn, x: &ContinuousState) -> Result<f64> {
    model.check_dim(x.dim())?;
    if x.is_absorbed() {
        return Err(Error::Absorbed(x.to_string()));
    }
    let xs = x.coords();
    let r = model.growth_rates(xs);
    let mut acc = 0.0;
    for i in 0..xs.len() {
        let (d1, d2) = f.partials(xs, i);
        acc += xs[i] * r[i] * d1 + 0.5 * model.gamma[i] * xs[i] * d2;
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model() -> FellerModel {
        FellerModel::lv(vec![1.0, 3.0], vec![1.0, 0.5], vec![vec![1.0, 0.3], vec![0.2, 2.0]]).unwrap()
    }

    #[test]
    fn constants_are_killed() {
        let f = ClosureFn { f: |_: &[f64]| 1.0, partials: |_: &[f64], _| (0.0, 0.0) };
        let v = feller_generator_apply(&model(), &f, &ContinuousState::new([0.4, 2.0])).unwrap();
        assert_eq!(v, 0.0);
    }

    #[test]
    fn coordinate_gives_the_drift() {
        let m = model();
        let f = ClosureFn { f: |x: &[f64]| x[0], partials: |_: &[f64], i| (if i == 0 { 1.0 } else { 0.0 }, 0.0) };
        let x = ContinuousState::new([0.4, 2.0]);
        let v = feller_generator_apply(&m, &f, &x).unwrap();
        assert!((v - 0.4 * (1.0 - 0.4 - 0.3 * 2.0)).abs() < 1e-15);
    }

    #[test]
    fn second_order_term_carries_half_gamma() {
        let m = model();
        let f = ClosureFn { f: |x: &[f64]| x[1] * x[1], partials: |x: &[f64], i| if i == 1 { (2.0 * x[1], 2.0) } else { (0.0, 0.0) } };
        let x = ContinuousState::new([0.4, 2.0]);
        let r1 = 0.5 - 0.2 * 0.4 - 2.0 * 2.0;
        let want = 2.0 * r1 * 4.0 + 0.5 * 3.0 * 2.0 * 2.0;
        assert!((feller_generator_apply(&m, &f, &x).unwrap() - want).abs() < 1e-12);
    }

    #[test]
    fn boundary_is_rejected() {
        let f = ClosureFn { f: |_: &[f64]| 1.0, partials: |_: &[f64], _| (0.0, 0.0) };
        assert!(feller_generator_apply(&model(), &f, &ContinuousState::new([0.0, 2.0])).is_err());
    }

    #[test]
    fn rescaling_preserves_the_generator() {
        // Lf(x) for f(x) = F(2x/gamma) equals (L~F)(2x/gamma)
        let m = model();
        let m2 = m.rescaled();
        assert_eq!(m2.gamma(), &[2.0, 2.0]);
        let big_f = |y: &[f64]| y[0] * y[0] * y[1];
        let big_partials = |y: &[f64], i: usize| if i == 0 { (2.0 * y[0] * y[1], 2.0 * y[1]) } else { (y[0] * y[0], 0.0) };
        let g = m.gamma().to_vec();
        let f = ClosureFn {
            f: |x: &[f64]| big_f(&[2.0 * x[0] / g[0], 2.0 * x[1] / g[1]]),
            partials: |x: &[f64], i| {
                let y = [2.0 * x[0] / g[0], 2.0 * x[1] / g[1]];
                let (d1, d2) = big_partials(&y, i);
                let s = 2.0 / g[i];
                (d1 * s, d2 * s * s)
            },
        };
        let ff = ClosureFn { f: big_f, partials: big_partials };
        let x = ContinuousState::new([0.7, 1.3]);
        let y = ContinuousState::new(m.to_rescaled(x.coords()));
        let a = feller_generator_apply(&m, &f, &x).unwrap();
        let b = feller_generator_apply(&m2, &ff, &y).unwrap();
        assert!((a - b).abs() < 1e-12 * a.abs().max(1.0));
        assert_eq!(m.from_rescaled(y.coords()), x.coords().to_vec());
    }

    #[test]
    fn threshold_growth() {
        let m = FellerModel::new(
            vec![2.0, 2.0],
            FellerGrowth::ThresholdLv { r: vec![1.0, 1.0], c: vec![vec![1.0, 0.5], vec![0.5, 1.0]], k: vec![2.0, 2.0] },
        )
        .unwrap();
        assert_eq!(m.growth_rates(&[1.0, 1.5]), vec![1.0, 1.0]);
        assert_eq!(m.growth_rates(&[3.0, 1.5]), vec![0.0, 0.5]);
    }
}
