use crate::error::{Error, Result};
use crate::state::{DiscreteState, State};

use super::model::BDModel;

/// `Lf(n) = sum_j [f(n+e_j) - f(n)] n_j b_j(n) + [f(n-e_j) - f(n)] n_j d_j(n)`.
pub fn bd_generator_apply(model: &BDModel, f: impl Fn(&DiscreteState) -> f64, n: &DiscreteState) -> Result<f64> {
    model.check_dim(n)?;
    if n.is_absorbed() {
        return Err(Error::Absorbed(n.to_string()));
    }
    let (b, dd) = model.per_capita_rates(n);
    let f0 = f(n);
    let mut acc = 0.0;
    for j in 0..model.dim() {
        let nj = n.coords()[j] as f64;
        if b[j] > 0.0 {
            acc += (f(&n.plus(j)) - f0) * nj * b[j];
        }
        if dd[j] > 0.0 {
            acc += (f(&n.minus(j)) - f0) * nj * dd[j];
        }
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::birth_death::model::LvParams;

    fn model() -> BDModel {
        BDModel::lv(LvParams {
            lambda: vec![1.0, 0.5],
            mu: vec![0.2, 0.3],
            gamma: vec![vec![0.1, 0.0], vec![0.05, 0.1]],
            c: vec![vec![1.0, 0.2], vec![0.4, 0.8]],
        })
        .unwrap()
    }

    #[test]
    fn constants_are_killed() {
        let m = model();
        for n in [[1, 1], [3, 2], [7, 1]] {
            let v = bd_generator_apply(&m, |_| 1.0, &DiscreteState::new(n)).unwrap();
            assert_eq!(v, 0.0);
        }
    }

    #[test]
    fn size_function_gives_net_growth() {
        let m = model();
        let n = DiscreteState::new([4, 3]);
        let v = bd_generator_apply(&m, |s| s.size() as f64, &n).unwrap();
        let (b, dd) = m.per_capita_rates(&n);
        let want: f64 = (0..2).map(|j| n.coords()[j] as f64 * (b[j] - dd[j])).sum();
        assert!((v - want).abs() < 1e-12);
    }

    #[test]
    fn absorbed_states_are_rejected() {
        assert!(bd_generator_apply(&model(), |_| 0.0, &DiscreteState::new([0, 2])).is_err());
    }
}
