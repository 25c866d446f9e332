use rand::Rng;
use rand_distr::Exp1;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::SimRng;
use crate::sim::{AbsorbedProcess, Advance, StepBudget, StopFn};
use crate::state::{DiscreteState, State};

/// Lotka-Volterra rates: `b_j(n) = lambda_j + sum_i gamma_ji n_i` and
/// `d_j(n) = mu_j + sum_i c_ji n_i`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LvParams {
    pub lambda: Vec<f64>,
    pub mu: Vec<f64>,
    pub gamma: Vec<Vec<f64>>,
    pub c: Vec<Vec<f64>>,
}

impl LvParams {
    pub fn dim(&self) -> usize {
        self.lambda.len()
    }

    fn validate(&self) -> Result<()> {
        let d = self.lambda.len();
        if d < 2 {
            return Err(Error::InvalidParameter("dimension must be at least 2".into()));
        }
        if self.mu.len() != d {
            return Err(Error::Dimension { expected: d, got: self.mu.len() });
        }
        for m in [&self.gamma, &self.c] {
            if m.len() != d {
                return Err(Error::Dimension { expected: d, got: m.len() });
            }
            if let Some(row) = m.iter().find(|r| r.len() != d) {
                return Err(Error::Dimension { expected: d, got: row.len() });
            }
        }
        let all = self
            .lambda
            .iter()
            .chain(&self.mu)
            .chain(self.gamma.iter().flatten())
            .chain(self.c.iter().flatten());
        for &x in all {
            if !(x >= 0.0) || !x.is_finite() {
                return Err(Error::InvalidParameter(format!("LV coefficient {x} must be finite and nonnegative")));
            }
        }
        Ok(())
    }
}

/// What tabulated rates do outside their box.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutOfBox {
    /// Use the rates of the nearest in-box state.
    Clamp,
    /// All rates vanish.
    Zero,
}

/// Per-capita rates on the box `0 <= n_i <= max_i`, row-major in `n`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TabulatedRates {
    pub max: Vec<u32>,
    /// `birth[idx * d + j]` is `b_j` at the state with flat index `idx`.
    pub birth: Vec<f64>,
    pub death: Vec<f64>,
    pub out_of_box: OutOfBox,
}

impl TabulatedRates {
    fn cells(&self) -> usize {
        self.max.iter().map(|&m| m as usize + 1).product()
    }

    fn flat_index(&self, n: &[u32]) -> Option<usize> {
        let mut idx = 0usize;
        let mut inside = true;
        for (k, &m) in self.max.iter().enumerate() {
            let v = match self.out_of_box {
                OutOfBox::Clamp => n[k].min(m),
                OutOfBox::Zero => {
                    if n[k] > m {
                        inside = false;
                    }
                    n[k].min(m)
                }
            };
            idx = idx * (m as usize + 1) + v as usize;
        }
        inside.then_some(idx)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rates {
    Lv(LvParams),
    Tabulated(TabulatedRates),
}

/// Multitype birth-death chain on `Z_+^d`: `n -> n + e_j` at rate
/// `n_j b_j(n)` and `n -> n - e_j` at rate `n_j d_j(n)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BDModel {
    d: usize,
    rates: Rates,
}

impl BDModel {
    pub fn lv(params: LvParams) -> Result<Self> {
        params.validate()?;
        Ok(BDModel { d: params.dim(), rates: Rates::Lv(params) })
    }

    pub fn tabulated(rates: TabulatedRates) -> Result<Self> {
        let d = rates.max.len();
        if d < 2 {
            return Err(Error::InvalidParameter("dimension must be at least 2".into()));
        }
        let want = rates.cells() * d;
        for table in [&rates.birth, &rates.death] {
            if table.len() != want {
                return Err(Error::Dimension { expected: want, got: table.len() });
            }
            if table.iter().any(|x| !(*x >= 0.0) || !x.is_finite()) {
                return Err(Error::InvalidParameter("tabulated rates must be finite and nonnegative".into()));
            }
        }
        Ok(BDModel { d, rates: Rates::Tabulated(rates) })
    }

    /// Constant per-capita rates `b_j = birth[j]`, `d_j = death[j]`.
    pub fn constant(birth: Vec<f64>, death: Vec<f64>) -> Result<Self> {
        let d = birth.len();
        BDModel::lv(LvParams {
            lambda: birth,
            mu: death,
            gamma: vec![vec![0.0; d]; d],
            c: vec![vec![0.0; d]; d],
        })
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn rates(&self) -> &Rates {
        &self.rates
    }

    pub fn lv_params(&self) -> Option<&LvParams> {
        match &self.rates {
            Rates::Lv(p) => Some(p),
            Rates::Tabulated(_) => None,
        }
    }

    /// Writes `b_j(n)` into `b` and `d_j(n)` into `dd`.
    #[inline]
    pub fn per_capita(&self, n: &[u32], b: &mut [f64], dd: &mut [f64]) {
        match &self.rates {
            Rates::Lv(p) => {
                for j in 0..self.d {
                    let mut bj = p.lambda[j];
                    let mut dj = p.mu[j];
                    for i in 0..self.d {
                        let ni = n[i] as f64;
                        bj += p.gamma[j][i] * ni;
                        dj += p.c[j][i] * ni;
                    }
                    b[j] = bj;
                    dd[j] = dj;
                }
            }
            Rates::Tabulated(t) => match t.flat_index(n) {
                Some(idx) => {
                    b.copy_from_slice(&t.birth[idx * self.d..(idx + 1) * self.d]);
                    dd.copy_from_slice(&t.death[idx * self.d..(idx + 1) * self.d]);
                }
                None => {
                    b.fill(0.0);
                    dd.fill(0.0);
                }
            },
        }
    }

    /// `(b(n), d(n))` as vectors.
    pub fn per_capita_rates(&self, n: &DiscreteState) -> (Vec<f64>, Vec<f64>) {
        let mut b = vec![0.0; self.d];
        let mut dd = vec![0.0; self.d];
        self.per_capita(n.coords(), &mut b, &mut dd);
        (b, dd)
    }

    /// `q_n = sum_j n_j (b_j(n) + d_j(n))`.
    pub fn total_rate(&self, n: &DiscreteState) -> f64 {
        let (b, dd) = self.per_capita_rates(n);
        n.coords().iter().zip(b.iter().zip(&dd)).map(|(&c, (bj, dj))| c as f64 * (bj + dj)).sum()
    }

    pub(crate) fn check_dim(&self, n: &DiscreteState) -> Result<()> {
        if n.dim() != self.d {
            return Err(Error::Dimension { expected: self.d, got: n.dim() });
        }
        Ok(())
    }
}

/// One Gillespie jump from `state`: `(holding time, next state)`.
///
/// Returns `(inf, state)` when every rate vanishes.
pub fn gillespie_step(model: &BDModel, state: &DiscreteState, rng: &mut SimRng) -> Result<(f64, DiscreteState)> {
    model.check_dim(state)?;
    if state.is_absorbed() {
        return Err(Error::Absorbed(state.to_string()));
    }
    let mut scratch = Scratch::new(model.dim());
    let q = scratch.load(model, state.coords());
    if q <= 0.0 {
        return Ok((f64::INFINITY, state.clone()));
    }
    let hold: f64 = rng.sample::<f64, _>(Exp1) / q;
    let mut next = state.clone();
    scratch.jump(next.coords_mut(), q, rng);
    Ok((hold, next))
}

/// Reusable per-path buffers for the jump rates.
struct Scratch {
    b: Vec<f64>,
    dd: Vec<f64>,
    up: Vec<f64>,
    down: Vec<f64>,
}

impl Scratch {
    fn new(d: usize) -> Self {
        Scratch { b: vec![0.0; d], dd: vec![0.0; d], up: vec![0.0; d], down: vec![0.0; d] }
    }

    /// Loads jump rates at `n` and returns their total.
    #[inline]
    fn load(&mut self, model: &BDModel, n: &[u32]) -> f64 {
        model.per_capita(n, &mut self.b, &mut self.dd);
        let mut q = 0.0;
        for j in 0..n.len() {
            let nj = n[j] as f64;
            self.up[j] = nj * self.b[j];
            self.down[j] = nj * self.dd[j];
            q += self.up[j] + self.down[j];
        }
        q
    }

    /// Applies a jump drawn proportionally to the loaded rates.
    #[inline]
    fn jump(&self, n: &mut [u32], q: f64, rng: &mut SimRng) {
        let target = rng.random::<f64>() * q;
        let mut acc = 0.0;
        let d = n.len();
        for j in 0..d {
            acc += self.up[j];
            if target < acc {
                n[j] += 1;
                return;
            }
            acc += self.down[j];
            if target < acc {
                n[j] -= 1;
                return;
            }
        }
        // rounding left `target` past the last cumulative rate
        for j in (0..d).rev() {
            if self.down[j] > 0.0 {
                n[j] -= 1;
                return;
            }
            if self.up[j] > 0.0 {
                n[j] += 1;
                return;
            }
        }
    }
}

impl AbsorbedProcess for BDModel {
    type State = DiscreteState;

    fn dim(&self) -> usize {
        self.d
    }

    fn advance(
        &self,
        state: &mut DiscreteState,
        mut t: f64,
        t_end: f64,
        stop: Option<StopFn<'_, DiscreteState>>,
        rng: &mut SimRng,
        budget: &mut StepBudget,
    ) -> Advance {
        if state.is_absorbed() {
            return Advance::Absorbed(t);
        }
        let mut scratch = Scratch::new(self.d);
        loop {
            let q = scratch.load(self, state.coords());
            if q <= 0.0 {
                return Advance::Reached;
            }
            let hold: f64 = rng.sample::<f64, _>(Exp1) / q;
            if t + hold > t_end {
                // memoryless: the residual holding time is redrawn on the next call
                return Advance::Reached;
            }
            t += hold;
            if !budget.tick() {
                return Advance::GuardTripped(t);
            }
            scratch.jump(state.coords_mut(), q, rng);
            if state.is_absorbed() {
                return Advance::Absorbed(t);
            }
            if let Some(f) = stop {
                if f(state) {
                    return Advance::Stopped(t);
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStream;

    pub(crate) fn reference_chain() -> BDModel {
        BDModel::lv(LvParams {
            lambda: vec![1.0, 1.0],
            mu: vec![1.0, 1.0],
            gamma: vec![vec![0.0; 2]; 2],
            c: vec![vec![1.0, 0.2], vec![0.2, 1.0]],
        })
        .unwrap()
    }

    #[test]
    fn lv_rates_match_the_formula() {
        let m = BDModel::lv(LvParams {
            lambda: vec![1.0, 2.0],
            mu: vec![0.5, 0.25],
            gamma: vec![vec![0.1, 0.2], vec![0.0, 0.3]],
            c: vec![vec![1.0, 0.5], vec![0.25, 2.0]],
        })
        .unwrap();
        let (b, dd) = m.per_capita_rates(&DiscreteState::new([3, 2]));
        assert!((b[0] - (1.0 + 0.1 * 3.0 + 0.2 * 2.0)).abs() < 1e-15);
        assert!((b[1] - (2.0 + 0.3 * 2.0)).abs() < 1e-15);
        assert!((dd[0] - (0.5 + 3.0 + 1.0)).abs() < 1e-15);
        assert!((dd[1] - (0.25 + 0.75 + 4.0)).abs() < 1e-15);
    }

    #[test]
    fn no_death_from_an_empty_coordinate() {
        let m = reference_chain();
        let n = DiscreteState::new([0, 4]);
        let (_, dd) = m.per_capita_rates(&n);
        // the jump rate n_0 d_0(n) vanishes even though d_0(n) > 0
        assert!(dd[0] > 0.0);
        assert_eq!(n.coords()[0] as f64 * dd[0], 0.0);
    }

    #[test]
    fn absorbed_input_is_rejected() {
        let m = reference_chain();
        let mut rng = RngStream::root(1).rng();
        assert!(matches!(gillespie_step(&m, &DiscreteState::new([0, 3]), &mut rng), Err(Error::Absorbed(_))));
    }

    #[test]
    fn frozen_dynamics_never_jump() {
        let m = BDModel::constant(vec![0.0, 0.0], vec![0.0, 0.0]).unwrap();
        let mut rng = RngStream::root(1).rng();
        let (h, next) = gillespie_step(&m, &DiscreteState::new([2, 3]), &mut rng).unwrap();
        assert!(h.is_infinite());
        assert_eq!(next, DiscreteState::new([2, 3]));
    }

    #[test]
    fn symmetric_pure_death_splits_evenly() {
        // q = 2 at (1,1) with b = 0, d = (1,1); each coordinate dies w.p. 1/2
        let m = BDModel::constant(vec![0.0, 0.0], vec![1.0, 1.0]).unwrap();
        let n = DiscreteState::new([1, 1]);
        assert_eq!(m.total_rate(&n), 2.0);
        let mut rng = RngStream::root(2).rng();
        let trials = 20_000;
        let mut first = 0;
        let mut hold_sum = 0.0;
        for _ in 0..trials {
            let (h, next) = gillespie_step(&m, &n, &mut rng).unwrap();
            hold_sum += h;
            if next == DiscreteState::new([0, 1]) {
                first += 1;
            } else {
                assert_eq!(next, DiscreteState::new([1, 0]));
            }
        }
        let p = first as f64 / trials as f64;
        assert!((p - 0.5).abs() < 3.0 * (0.25 / trials as f64).sqrt());
        // Exp(2) mean 1/2 with sd 1/2
        let mean = hold_sum / trials as f64;
        assert!((mean - 0.5).abs() < 3.0 * 0.5 / (trials as f64).sqrt());
    }

    #[test]
    fn jump_frequencies_match_rate_proportions() {
        let m = reference_chain();
        let n = DiscreteState::new([3, 2]);
        let (b, dd) = m.per_capita_rates(&n);
        let rates = [3.0 * b[0], 3.0 * dd[0], 2.0 * b[1], 2.0 * dd[1]];
        let q: f64 = rates.iter().sum();
        let outcomes = [n.plus(0), n.minus(0), n.plus(1), n.minus(1)];
        let trials = 100_000;
        let mut counts = [0usize; 4];
        let mut rng = RngStream::root(3).rng();
        for _ in 0..trials {
            let (_, next) = gillespie_step(&m, &n, &mut rng).unwrap();
            let k = outcomes.iter().position(|o| *o == next).unwrap();
            counts[k] += 1;
        }
        for k in 0..4 {
            let p = rates[k] / q;
            let sigma = (p * (1.0 - p) / trials as f64).sqrt();
            let f = counts[k] as f64 / trials as f64;
            assert!((f - p).abs() < 3.0 * sigma, "jump {k}: {f} vs {p}");
        }
    }

    #[test]
    fn tabulated_out_of_box_rules() {
        let cells = 3 * 3;
        let birth: Vec<f64> = (0..cells * 2).map(|i| i as f64).collect();
        let death = vec![1.0; cells * 2];
        let mut t = TabulatedRates { max: vec![2, 2], birth, death, out_of_box: OutOfBox::Clamp };
        let m = BDModel::tabulated(t.clone()).unwrap();
        let (inside, _) = m.per_capita_rates(&DiscreteState::new([2, 1]));
        let (outside, _) = m.per_capita_rates(&DiscreteState::new([7, 1]));
        assert_eq!(inside, outside);
        t.out_of_box = OutOfBox::Zero;
        let m = BDModel::tabulated(t).unwrap();
        let (b, dd) = m.per_capita_rates(&DiscreteState::new([7, 1]));
        assert_eq!(b, vec![0.0, 0.0]);
        assert_eq!(dd, vec![0.0, 0.0]);
    }

    #[test]
    fn malformed_parameters_are_rejected() {
        let bad = LvParams {
            lambda: vec![1.0, 1.0],
            mu: vec![1.0],
            gamma: vec![vec![0.0; 2]; 2],
            c: vec![vec![0.0; 2]; 2],
        };
        assert!(BDModel::lv(bad).is_err());
        assert!(BDModel::constant(vec![-1.0, 0.0], vec![0.0, 0.0]).is_err());
    }
}
