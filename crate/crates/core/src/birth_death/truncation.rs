//! The chain restricted to a finite box and killed on leaving it.

use std::collections::VecDeque;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::state::DiscreteState;

use super::model::BDModel;

/// Cap on `Lambda * tau` within one uniformization substep.
const MAX_POISSON_MEAN: f64 = 32.0;

/// Sub-generator `Q~` of the chain on `{1 <= n_i <= max_i}`, stored in
/// compressed rows. Mass leaving the box or hitting the boundary is killed.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TruncatedChain {
    max: Vec<u32>,
    states: Vec<DiscreteState>,
    row_start: Vec<usize>,
    col: Vec<usize>,
    rate: Vec<f64>,
    /// Total outflow `q_n`, including killing.
    out: Vec<f64>,
    kill: Vec<f64>,
}

impl TruncatedChain {
    pub fn new(model: &BDModel, max: Vec<u32>) -> Result<Self> {
        let d = model.dim();
        if max.len() != d {
            return Err(Error::Dimension { expected: d, got: max.len() });
        }
        if max.contains(&0) {
            return Err(Error::InvalidParameter("box sides must be at least 1".into()));
        }
        let n_states: usize = max.iter().map(|&m| m as usize).product();
        let mut states = Vec::with_capacity(n_states);
        let mut cur = vec![1u32; d];
        for _ in 0..n_states {
            states.push(DiscreteState::new(cur.clone()));
            for k in (0..d).rev() {
                if cur[k] < max[k] {
                    cur[k] += 1;
                    break;
                }
                cur[k] = 1;
            }
        }
        let mut chain = TruncatedChain {
            max,
            states: Vec::new(),
            row_start: vec![0],
            col: Vec::new(),
            rate: Vec::new(),
            out: Vec::with_capacity(n_states),
            kill: Vec::with_capacity(n_states),
        };
        let mut b = vec![0.0; d];
        let mut dd = vec![0.0; d];
        for n in &states {
            model.per_capita(n.coords(), &mut b, &mut dd);
            let mut out = 0.0;
            let mut kill = 0.0;
            for j in 0..d {
                let nj = n.coords()[j] as f64;
                for (r, target) in [(nj * b[j], n.plus(j)), (nj * dd[j], n.minus(j))] {
                    if r <= 0.0 {
                        continue;
                    }
                    out += r;
                    match chain.index_of(&target) {
                        Some(idx) => {
                            chain.col.push(idx);
                            chain.rate.push(r);
                        }
                        None => kill += r,
                    }
                }
            }
            chain.out.push(out);
            chain.kill.push(kill);
            chain.row_start.push(chain.col.len());
        }
        chain.states = states;
        Ok(chain)
    }

    /// Square box `{1..=side}^d`.
    pub fn square(model: &BDModel, side: u32) -> Result<Self> {
        TruncatedChain::new(model, vec![side; model.dim()])
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn max(&self) -> &[u32] {
        &self.max
    }

    pub fn states(&self) -> &[DiscreteState] {
        &self.states
    }

    pub fn index_of(&self, n: &DiscreteState) -> Option<usize> {
        let c = n.coords();
        if c.len() != self.max.len() {
            return None;
        }
        let mut idx = 0usize;
        for (k, &m) in self.max.iter().enumerate() {
            if c[k] == 0 || c[k] > m {
                return None;
            }
            idx = idx * m as usize + (c[k] - 1) as usize;
        }
        Some(idx)
    }

    pub fn outflow(&self) -> &[f64] {
        &self.out
    }

    pub fn kill_rates(&self) -> &[f64] {
        &self.kill
    }

    /// `max_n q_n`.
    pub fn max_rate(&self) -> f64 {
        self.out.iter().copied().fold(0.0, f64::max)
    }

    fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        (self.row_start[i]..self.row_start[i + 1]).map(move |e| (self.col[e], self.rate[e]))
    }

    /// `(Q~ f)(n)` for a function given by its values on the box.
    pub fn apply_generator(&self, f: &[f64]) -> Vec<f64> {
        (0..self.len())
            .map(|i| self.row(i).map(|(j, r)| r * f[j]).sum::<f64>() - self.out[i] * f[i])
            .collect()
    }

    /// `(nu Q~)` for a row vector `nu`.
    pub fn left_generator(&self, nu: &[f64]) -> Vec<f64> {
        let mut out: Vec<f64> = nu.iter().zip(&self.out).map(|(x, q)| -x * q).collect();
        for i in 0..self.len() {
            if nu[i] != 0.0 {
                for (j, r) in self.row(i) {
                    out[j] += nu[i] * r;
                }
            }
        }
        out
    }

    /// `x + (x Q~)/lam` (left) or `x + (Q~ x)/lam` (right).
    fn kernel_step(&self, x: &[f64], lam: f64, left: bool, out: &mut [f64]) {
        let q = if left { self.left_generator(x) } else { self.apply_generator(x) };
        for i in 0..x.len() {
            out[i] = x[i] + q[i] / lam;
        }
    }

    fn propagate(&self, x: &[f64], t: f64, left: bool) -> Vec<f64> {
        assert_eq!(x.len(), self.len());
        if t <= 0.0 {
            return x.to_vec();
        }
        let lam = self.max_rate().max(1e-300);
        let substeps = (lam * t / MAX_POISSON_MEAN).ceil().max(1.0) as usize;
        let tau = t / substeps as f64;
        let mean = lam * tau;
        let mut cur = x.to_vec();
        let mut term = vec![0.0; x.len()];
        let mut next = vec![0.0; x.len()];
        for _ in 0..substeps {
            // sum_k Poisson(mean; k) P^k cur
            let mut weight = (-mean).exp();
            let mut acc: Vec<f64> = cur.iter().map(|v| v * weight).collect();
            term.copy_from_slice(&cur);
            let mut cum = weight;
            let mut k = 0usize;
            while 1.0 - cum > 1e-17 && k < 10_000 {
                k += 1;
                self.kernel_step(&term, lam, left, &mut next);
                std::mem::swap(&mut term, &mut next);
                weight *= mean / k as f64;
                cum += weight;
                for i in 0..acc.len() {
                    acc[i] += weight * term[i];
                }
                if k as f64 > mean && weight < 1e-300 {
                    break;
                }
            }
            cur = acc;
        }
        cur
    }

    /// `nu e^{t Q~}` by uniformization.
    pub fn propagate_left(&self, nu: &[f64], t: f64) -> Vec<f64> {
        self.propagate(nu, t, true)
    }

    /// `e^{t Q~} f` by uniformization.
    pub fn propagate_right(&self, f: &[f64], t: f64) -> Vec<f64> {
        self.propagate(f, t, false)
    }

    /// As [`Self::propagate_left`], refusing chains whose rate exceeds `bound`.
    pub fn propagate_left_bounded(&self, nu: &[f64], t: f64, bound: f64) -> Result<Vec<f64>> {
        let rate = self.max_rate();
        if rate > bound {
            return Err(Error::UniformizationRate { rate, bound });
        }
        Ok(self.propagate_left(nu, t))
    }

    /// Point mass on a box state.
    pub fn dirac(&self, n: &DiscreteState) -> Result<Vec<f64>> {
        let i = self.index_of(n).ok_or_else(|| Error::InvalidParameter(format!("{n} is outside the box")))?;
        let mut v = vec![0.0; self.len()];
        v[i] = 1.0;
        Ok(v)
    }

    /// `P_x(t < tau)` for the killed chain.
    pub fn survival(&self, x: &DiscreteState, t: f64) -> Result<f64> {
        Ok(self.propagate_left(&self.dirac(x)?, t).iter().sum())
    }

    /// Expected killing time from every box state: `(-Q~)^{-1} 1`.
    pub fn mean_absorption_times(&self) -> Result<Vec<f64>> {
        let n = self.len();
        let mut a = DMatrix::<f64>::zeros(n, n);
        for i in 0..n {
            a[(i, i)] = self.out[i];
            for (j, r) in self.row(i) {
                a[(i, j)] -= r;
            }
        }
        let sol = a
            .lu()
            .solve(&DVector::from_element(n, 1.0))
            .ok_or_else(|| Error::Reducible("sub-generator is singular".into()))?;
        Ok(sol.iter().copied().collect())
    }

    /// Errors unless every box state reaches every other inside the box.
    pub fn check_irreducible(&self) -> Result<()> {
        let n = self.len();
        let mut rev: Vec<Vec<usize>> = vec![Vec::new(); n];
        for i in 0..n {
            for (j, _) in self.row(i) {
                rev[j].push(i);
            }
        }
        let reach = |adj: &dyn Fn(usize) -> Vec<usize>| -> Vec<bool> {
            let mut seen = vec![false; n];
            let mut queue = VecDeque::from([0usize]);
            seen[0] = true;
            while let Some(i) = queue.pop_front() {
                for j in adj(i) {
                    if !seen[j] {
                        seen[j] = true;
                        queue.push_back(j);
                    }
                }
            }
            seen
        };
        let fwd = reach(&|i| self.row(i).map(|(j, _)| j).collect());
        let bwd = reach(&|i| rev[i].clone());
        for (label, seen) in [("unreachable from", &fwd), ("cannot return to", &bwd)] {
            if let Some(bad) = seen.iter().position(|&s| !s) {
                let block: Vec<String> =
                    (0..n).filter(|&i| !seen[i]).take(5).map(|i| self.states[i].to_string()).collect();
                return Err(Error::Reducible(format!(
                    "states {} ... {label} {} (first: {})",
                    block.join(" "),
                    self.states[0],
                    self.states[bad]
                )));
            }
        }
        Ok(())
    }
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

    fn dense(chain: &TruncatedChain) -> DMatrix<f64> {
        let n = chain.len();
        let mut q = DMatrix::zeros(n, n);
        for i in 0..n {
            q[(i, i)] = -chain.out[i];
            for (j, r) in chain.row(i) {
                q[(i, j)] += r;
            }
        }
        q
    }

    fn expm_taylor(q: &DMatrix<f64>, t: f64) -> DMatrix<f64> {
        // scaling and squaring with a long Taylor series
        let norm = q.iter().map(|v| v.abs()).fold(0.0, f64::max) * q.nrows() as f64 * t;
        let s = (norm.max(1.0).log2().ceil() as i32 + 2).max(0);
        let a = q * (t / 2f64.powi(s));
        let mut term = DMatrix::identity(q.nrows(), q.ncols());
        let mut sum = term.clone();
        for k in 1..30 {
            term = &term * &a / k as f64;
            sum += &term;
        }
        for _ in 0..s {
            sum = &sum * &sum;
        }
        sum
    }

    #[test]
    fn indexing_round_trips() {
        let chain = TruncatedChain::new(&reference(), vec![4, 3]).unwrap();
        assert_eq!(chain.len(), 12);
        for (i, s) in chain.states().iter().enumerate() {
            assert_eq!(chain.index_of(s), Some(i));
        }
        assert_eq!(chain.index_of(&DiscreteState::new([5, 1])), None);
        assert_eq!(chain.index_of(&DiscreteState::new([0, 1])), None);
    }

    #[test]
    fn rows_conserve_rate() {
        let chain = TruncatedChain::square(&reference(), 6).unwrap();
        let ones = vec![1.0; chain.len()];
        let q1 = chain.apply_generator(&ones);
        for (i, v) in q1.iter().enumerate() {
            assert!((v + chain.kill_rates()[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn uniformization_matches_matrix_exponential() {
        let chain = TruncatedChain::square(&reference(), 5).unwrap();
        let q = dense(&chain);
        for &t in &[0.05, 0.7, 3.0] {
            let e = expm_taylor(&q, t);
            let x = chain.dirac(&DiscreteState::new([2, 3])).unwrap();
            let got = chain.propagate_left(&x, t);
            let i = chain.index_of(&DiscreteState::new([2, 3])).unwrap();
            for j in 0..chain.len() {
                assert!((got[j] - e[(i, j)]).abs() < 1e-12, "t={t} j={j}");
            }
            let f: Vec<f64> = (0..chain.len()).map(|k| (k as f64).sin()).collect();
            let right = chain.propagate_right(&f, t);
            let want = &e * DVector::from_vec(f.clone());
            for j in 0..chain.len() {
                assert!((right[j] - want[j]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn single_state_box_decays_at_its_outflow() {
        let m = reference();
        let chain = TruncatedChain::square(&m, 1).unwrap();
        let q = m.total_rate(&DiscreteState::ones(2));
        assert_eq!(chain.max_rate(), q);
        let s = chain.survival(&DiscreteState::ones(2), 0.3).unwrap();
        assert!((s - (-q * 0.3).exp()).abs() < 1e-14);
        assert!((chain.mean_absorption_times().unwrap()[0] - 1.0 / q).abs() < 1e-14);
    }

    #[test]
    fn reference_box_is_irreducible() {
        TruncatedChain::square(&reference(), 8).unwrap().check_irreducible().unwrap();
    }

    #[test]
    fn pure_death_box_is_reducible() {
        let m = BDModel::constant(vec![0.0, 0.0], vec![1.0, 1.0]).unwrap();
        let err = TruncatedChain::square(&m, 3).unwrap().check_irreducible().unwrap_err();
        assert!(matches!(err, Error::Reducible(_)));
    }

    #[test]
    fn rate_bound_is_enforced() {
        let chain = TruncatedChain::square(&reference(), 10).unwrap();
        let x = chain.dirac(&DiscreteState::ones(2)).unwrap();
        assert!(chain.propagate_left_bounded(&x, 1.0, 10.0).is_err());
    }
}
