//! Slice statistics `dbar(k)` and `dunder(k)` over `{n in N^d : |n| = k}`.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::state::DiscreteState;

use super::model::{BDModel, LvParams};

/// Default cap on the number of states enumerated in one slice.
pub const ENUMERATION_BUDGET: u64 = 10_000_000;

/// Number of states with `|n| = k` and all `n_i >= 1`, as a float.
pub fn slice_size(d: usize, k: u64) -> f64 {
    if (k as usize) < d {
        return 0.0;
    }
    // C(k-1, d-1)
    let (n, r) = (k - 1, (d - 1) as u64);
    let mut c = 1.0f64;
    for i in 0..r {
        c = c * (n - i) as f64 / (i + 1) as f64;
    }
    c.round()
}

/// Calls `f` on every `n in N^d` with `|n| = k`, in lexicographic order.
pub fn for_each_in_slice(d: usize, k: u64, mut f: impl FnMut(&DiscreteState)) {
    if (k as usize) < d {
        return;
    }
    let mut n = DiscreteState::ones(d);
    n.coords_mut()[d - 1] = (k - d as u64 + 1) as u32;
    loop {
        f(&n);
        let c = n.coords_mut();
        // rightmost i whose suffix has a unit to spare
        let mut suffix = 0u32;
        let mut i = d - 1;
        loop {
            suffix += c[i];
            if i == 0 {
                return;
            }
            i -= 1;
            if suffix > (d - 1 - i) as u32 {
                break;
            }
        }
        c[i] += 1;
        for x in c[i + 1..d - 1].iter_mut() {
            *x = 1;
        }
        c[d - 1] = suffix - 1 - (d - 2 - i) as u32;
    }
}

/// All states of the slice `|n| = k`.
pub fn slice_states(d: usize, k: u64) -> Vec<DiscreteState> {
    let mut out = Vec::new();
    for_each_in_slice(d, k, |n| out.push(n.clone()));
    out
}

/// The two slice statistics at one `k`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SliceStats {
    pub k: u64,
    pub dbar: f64,
    pub dunder: f64,
    /// False when the values are closed-form bounds rather than exact.
    pub exact: bool,
}

/// `(dbar(k), dunder(k))` by exhaustive enumeration.
pub fn dbar_dunder(model: &BDModel, k: u64) -> Result<(f64, f64)> {
    dbar_dunder_with_budget(model, k, ENUMERATION_BUDGET)
}

pub fn dbar_dunder_with_budget(model: &BDModel, k: u64, budget: u64) -> Result<(f64, f64)> {
    let d = model.dim();
    if (k as usize) < d {
        return Err(Error::InvalidParameter(format!("slice |n| = {k} is empty in dimension {d}")));
    }
    let size = slice_size(d, k);
    if size > budget as f64 {
        return Err(Error::EnumerationBudget { k, size, budget });
    }
    let mut b = vec![0.0; d];
    let mut dd = vec![0.0; d];
    let mut dbar = f64::NEG_INFINITY;
    let mut dunder = f64::INFINITY;
    for_each_in_slice(d, k, |n| {
        model.per_capita(n.coords(), &mut b, &mut dd);
        let mut ones = 0.0;
        let mut low = 0.0;
        for i in 0..d {
            let ni = n.coords()[i];
            if ni == 1 {
                ones += dd[i];
            } else {
                low += ni as f64 * dd[i];
            }
            low -= ni as f64 * b[i];
        }
        dbar = dbar.max(k as f64 * ones);
        dunder = dunder.min(low);
    });
    Ok((dbar, dunder))
}

/// Closed-form bounds for LV rates: an upper bound on `dbar(k)` and a lower
/// bound on `dunder(k)`, valid for any slice size.
///
/// `dunder` is bounded by the minimum of `x.(mu - lambda) + x'(C - Gamma)x`
/// over the continuous simplex `{x >= 1, sum x = k}` minus a bound on the
/// indicator term `sum_{n_i = 1} d_i(n) <= sum mu + k max_j colsum_j(c)`.
pub fn lv_slice_bounds(p: &LvParams, k: u64) -> (f64, f64) {
    let d = p.dim();
    let kf = k as f64;
    let colsum = (0..d).map(|j| (0..d).map(|i| p.c[i][j]).sum::<f64>()).fold(0.0, f64::max);
    let mu_sum: f64 = p.mu.iter().sum();
    let indicator = mu_sum + kf * colsum;
    let g: Vec<f64> = (0..d).map(|i| p.mu[i] - p.lambda[i]).collect();
    let h = DMatrix::from_fn(d, d, |i, j| {
        0.5 * ((p.c[i][j] - p.gamma[i][j]) + (p.c[j][i] - p.gamma[j][i]))
    });
    (kf * indicator, simplex_quadratic_min(&g, &h, kf) - indicator)
}

/// Minimum of `g.x + x'Hx` over `{x >= 1, sum x = k}` by enumerating the
/// stationary points of every face.
pub fn simplex_quadratic_min(g: &[f64], h: &DMatrix<f64>, k: f64) -> f64 {
    let d = g.len();
    let value = |x: &[f64]| -> f64 {
        let mut v = 0.0;
        for i in 0..d {
            v += g[i] * x[i];
            for j in 0..d {
                v += x[i] * h[(i, j)] * x[j];
            }
        }
        v
    };
    let mut best = f64::INFINITY;
    // bit i set: coordinate i pinned at 1
    for mask in 0u32..(1 << d) {
        let free: Vec<usize> = (0..d).filter(|i| mask & (1 << i) == 0).collect();
        if free.is_empty() {
            continue;
        }
        let m = free.len();
        let budget = k - (d - m) as f64;
        if budget < m as f64 {
            continue;
        }
        let mut a = DMatrix::zeros(m + 1, m + 1);
        let mut rhs = DVector::zeros(m + 1);
        for (r, &i) in free.iter().enumerate() {
            for (s, &j) in free.iter().enumerate() {
                a[(r, s)] = 2.0 * h[(i, j)];
            }
            a[(r, m)] = 1.0;
            a[(m, r)] = 1.0;
            let pinned: f64 = (0..d).filter(|j| mask & (1 << j) != 0).map(|j| h[(i, j)]).sum();
            rhs[r] = -(g[i] + 2.0 * pinned);
        }
        rhs[m] = budget;
        let Some(sol) = a.lu().solve(&rhs) else { continue };
        let mut x = vec![1.0; d];
        let mut feasible = true;
        for (r, &i) in free.iter().enumerate() {
            if !(sol[r] >= 1.0 - 1e-9) {
                feasible = false;
            }
            x[i] = sol[r].max(1.0);
        }
        if feasible {
            best = best.min(value(&x));
        }
    }
    best
}

/// Slice statistics for every `k` in `ks`, enumerating where the budget
/// allows and falling back to LV bounds otherwise.
pub fn slice_table(model: &BDModel, ks: std::ops::RangeInclusive<u64>) -> Result<Vec<SliceStats>> {
    let ks: Vec<u64> = ks.collect();
    ks.par_iter()
        .map(|&k| match dbar_dunder(model, k) {
            Ok((dbar, dunder)) => Ok(SliceStats { k, dbar, dunder, exact: true }),
            Err(Error::EnumerationBudget { .. }) if model.lv_params().is_some() => {
                let (dbar, dunder) = lv_slice_bounds(model.lv_params().unwrap(), k);
                Ok(SliceStats { k, dbar, dunder, exact: false })
            }
            Err(e) => Err(e),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn reference() -> BDModel {
        BDModel::lv(LvParams {
            lambda: vec![1.0, 1.0],
            mu: vec![1.0, 1.0],
            gamma: vec![vec![0.0; 2]; 2],
            c: vec![vec![1.0, 0.2], vec![0.2, 1.0]],
        })
        .unwrap()
    }

    fn brute_slice(d: usize, k: u64) -> Vec<Vec<u32>> {
        let mut out = Vec::new();
        let mut n = vec![1u32; d];
        fn rec(i: usize, left: u64, n: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
            let d = n.len();
            if i == d - 1 {
                if left >= 1 {
                    n[i] = left as u32;
                    out.push(n.clone());
                }
                return;
            }
            for v in 1..left {
                n[i] = v as u32;
                rec(i + 1, left - v, n, out);
            }
        }
        rec(0, k, &mut n, &mut out);
        out.sort();
        out
    }

    proptest! {
        #[test]
        fn enumeration_visits_each_composition_once(d in 2usize..5, extra in 0u64..9) {
            let k = d as u64 + extra;
            let mut got: Vec<Vec<u32>> = slice_states(d, k).into_iter().map(|n| n.coords().to_vec()).collect();
            got.sort();
            let want = brute_slice(d, k);
            prop_assert_eq!(got.len() as f64, slice_size(d, k));
            prop_assert_eq!(got, want);
        }
    }

    #[test]
    fn single_state_slice() {
        let m = reference();
        let (dbar, dunder) = dbar_dunder(&m, 2).unwrap();
        // n = (1,1): d_i = 1 + 1 + 0.2, b_i = 1
        assert!((dunder + 2.0).abs() < 1e-12);
        assert!((dbar - 2.0 * 4.4).abs() < 1e-12);
    }

    #[test]
    fn four_state_slice_by_hand() {
        // lambda = mu = 1, c = I: b = 1, d_i(n) = 1 + n_i
        let m = BDModel::lv(LvParams {
            lambda: vec![1.0, 1.0],
            mu: vec![1.0, 1.0],
            gamma: vec![vec![0.0; 2]; 2],
            c: vec![vec![1.0, 0.0], vec![0.0, 1.0]],
        })
        .unwrap();
        let term = |n: [u32; 2]| -> (f64, f64) {
            let mut ones = 0.0;
            let mut low = 0.0;
            for &ni in &n {
                let di = 1.0 + ni as f64;
                if ni == 1 {
                    ones += di;
                } else {
                    low += ni as f64 * di;
                }
                low -= ni as f64;
            }
            (4.0 * ones, low)
        };
        let states = [[1, 3], [2, 2], [3, 1]];
        let dbar = states.iter().map(|&n| term(n).0).fold(f64::MIN, f64::max);
        let dunder = states.iter().map(|&n| term(n).1).fold(f64::MAX, f64::min);
        let (got_bar, got_under) = dbar_dunder(&m, 4).unwrap();
        assert_eq!(got_bar, dbar);
        assert_eq!(got_under, dunder);
        assert_eq!((dbar, dunder), (8.0, 8.0));
    }

    #[test]
    fn competitive_growth_is_quadratic() {
        let m = reference();
        let ratios: Vec<f64> = [50u64, 100, 200, 400]
            .iter()
            .map(|&k| dbar_dunder(&m, k).unwrap().1 / (k * k) as f64)
            .collect();
        assert!(ratios.iter().all(|&r| r > 0.3), "{ratios:?}");
    }

    #[test]
    fn budget_is_enforced() {
        let m = BDModel::constant(vec![1.0; 4], vec![1.0; 4]).unwrap();
        let err = dbar_dunder_with_budget(&m, 100, 1000).unwrap_err();
        assert!(matches!(err, Error::EnumerationBudget { k: 100, .. }));
    }

    #[test]
    fn closed_form_bounds_bracket_enumeration() {
        let m = BDModel::lv(LvParams {
            lambda: vec![1.0, 2.0, 0.5],
            mu: vec![0.5, 1.0, 1.0],
            gamma: vec![vec![0.1, 0.0, 0.2], vec![0.0, 0.1, 0.0], vec![0.3, 0.0, 0.1]],
            c: vec![vec![1.0, 0.5, 0.2], vec![0.1, 1.5, 0.4], vec![0.3, 0.2, 0.8]],
        })
        .unwrap();
        for k in [3u64, 5, 10, 40, 90] {
            let (dbar, dunder) = dbar_dunder(&m, k).unwrap();
            let (ub, lb) = lv_slice_bounds(m.lv_params().unwrap(), k);
            assert!(dbar <= ub + 1e-9, "k={k}: {dbar} > {ub}");
            assert!(dunder >= lb - 1e-9, "k={k}: {dunder} < {lb}");
        }
    }

    #[test]
    fn quadratic_minimum_matches_a_fine_scan() {
        let h = DMatrix::from_row_slice(2, 2, &[1.0, -0.8, -0.8, 0.5]);
        let g = [0.3, -1.0];
        let k = 12.0;
        let got = simplex_quadratic_min(&g, &h, k);
        let mut scan = f64::INFINITY;
        for i in 0..=100_000 {
            let x0 = 1.0 + (k - 2.0) * i as f64 / 100_000.0;
            let x = [x0, k - x0];
            let v = g[0] * x[0] + g[1] * x[1] + h[(0, 0)] * x[0] * x[0] + 2.0 * h[(0, 1)] * x[0] * x[1] + h[(1, 1)] * x[1] * x[1];
            scan = scan.min(v);
        }
        assert!((got - scan).abs() < 1e-6, "{got} vs {scan}");
    }
}
