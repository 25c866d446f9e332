use crate::lyapunov::{Domain, LyapunovPair};
use crate::state::{DiscreteState, State};

use super::model::BDModel;
use super::series::{phi_of_size, v_of_size, BDLyapunovParams};
use super::slices::slice_states;

/// The series pair of a birth-death model, with closed-form `LV`, `L phi`.
#[derive(Clone, Debug)]
pub struct BdPair {
    pub model: BDModel,
    pub params: BDLyapunovParams,
}

impl BdPair {
    pub fn new(model: BDModel, params: BDLyapunovParams) -> Self {
        BdPair { model, params }
    }

    /// Generator image of a function of `|n|` vanishing on the boundary,
    /// given its increments: `up = f(k+1) - f(k)`, `down = f(k-1) - f(k)`.
    fn size_generator(&self, n: &DiscreteState, value: f64, up: f64, down: f64) -> f64 {
        let (b, dd) = self.model.per_capita_rates(n);
        let mut acc = 0.0;
        for j in 0..n.dim() {
            let nj = n.coords()[j] as f64;
            acc += nj * b[j] * up;
            if n.coords()[j] == 1 {
                acc -= dd[j] * value;
            } else {
                acc += nj * dd[j] * down;
            }
        }
        acc
    }

    /// `|n|^-beta [dunder(|n|) - dbar(|n|)/(beta - 1)]` given the slice stats.
    pub fn lphi_lower_bound(&self, k: u64, dbar: f64, dunder: f64) -> f64 {
        (k as f64).powf(-self.params.beta) * (dunder - dbar / (self.params.beta - 1.0))
    }
}

impl LyapunovPair for BdPair {
    type State = DiscreteState;

    fn v(&self, n: &DiscreteState) -> f64 {
        if n.is_absorbed() {
            0.0
        } else {
            v_of_size(self.params.alpha, n.size())
        }
    }

    fn phi(&self, n: &DiscreteState) -> f64 {
        if n.is_absorbed() {
            0.0
        } else {
            phi_of_size(self.params.beta, n.size())
        }
    }

    fn lv(&self, n: &DiscreteState) -> f64 {
        if n.is_absorbed() {
            return 0.0;
        }
        let k = n.size() as f64;
        let a = self.params.alpha;
        self.size_generator(n, self.v(n), (k + 1.0).powf(-a), -k.powf(-a))
    }

    fn lphi(&self, n: &DiscreteState) -> f64 {
        if n.is_absorbed() {
            return 0.0;
        }
        let k = n.size() as f64;
        let b = self.params.beta;
        self.size_generator(n, self.phi(n), -(k + 1.0).powf(-b), k.powf(-b))
    }

    fn exhaustion_level(&self, n: &DiscreteState) -> f64 {
        n.size() as f64
    }
}

/// Slices `|n| = k` for `k` in `d..=k_max` as a checked domain.
pub fn slice_domain(d: usize, k_max: u64) -> Domain<DiscreteState> {
    let shells = (d as u64..=k_max).map(|k| slice_states(d, k)).collect();
    Domain::new(shells, format!("slices |n| = k for k in [{d}, {k_max}]"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::birth_death::generator::bd_generator_apply;
    use crate::birth_death::model::LvParams;
    use crate::birth_death::slices::dbar_dunder;

    fn pair() -> BdPair {
        let m = BDModel::lv(LvParams {
            lambda: vec![1.0, 1.0],
            mu: vec![1.0, 1.0],
            gamma: vec![vec![0.0; 2]; 2],
            c: vec![vec![1.0, 0.2], vec![0.2, 1.0]],
        })
        .unwrap();
        BdPair::new(m, BDLyapunovParams::from_eta_beta(0.5, 1.5).unwrap())
    }

    #[test]
    fn closed_forms_match_the_generic_generator() {
        let p = pair();
        for n in [[1u32, 1], [1, 2], [3, 2], [1, 40], [17, 23]] {
            let n = DiscreteState::new(n);
            let lv = bd_generator_apply(&p.model, |s| p.v(s), &n).unwrap();
            let lphi = bd_generator_apply(&p.model, |s| p.phi(s), &n).unwrap();
            assert!((p.lv(&n) - lv).abs() < 1e-12 * (1.0 + lv.abs()), "{n}");
            assert!((p.lphi(&n) - lphi).abs() < 1e-12 * (1.0 + lphi.abs()), "{n}");
        }
    }

    #[test]
    fn v_at_three_two_by_four_jumps() {
        let p = pair();
        let n = DiscreteState::new([3, 2]);
        let a = p.params.alpha;
        let v = |k: u32| (1..=k).map(|j| (j as f64).powf(-a)).sum::<f64>();
        // b = 1, d_1 = 1 + 3 + 0.4, d_2 = 1 + 0.6 + 2
        let want = 3.0 * (v(6) - v(5)) + 2.0 * (v(6) - v(5)) + 3.0 * 4.4 * (v(4) - v(5)) + 2.0 * 3.6 * (v(4) - v(5));
        let got = bd_generator_apply(&p.model, |s| p.v(s), &n).unwrap();
        assert!((got - want).abs() < 1e-13);
    }

    #[test]
    fn lphi_lower_bound_holds_on_slices() {
        let p = pair();
        for k in 2..=80u64 {
            let (dbar, dunder) = dbar_dunder(&p.model, k).unwrap();
            let bound = p.lphi_lower_bound(k, dbar, dunder);
            for n in slice_states(2, k) {
                assert!(p.lphi(&n) >= bound - 1e-12 * bound.abs(), "{n}");
            }
        }
    }
}
