use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::measure::{tv_distance, BinGrid, BinIndex, EmpiricalMeasure};
use crate::rng::RngStream;
use crate::sim::{check_initial_law, run_path, AbsorbedProcess, SimBatchConfig};
use crate::state::State;

use super::fit::ConvergenceReport;

/// Survivor count below which a conditional law is flagged unreliable.
pub const UNRELIABLE_BELOW: usize = 50;

/// Conditional laws of survivors on a time grid, keyed by `K`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConditionedLaws<K> {
    pub times: Vec<f64>,
    /// `None` once no path survives.
    pub laws: Vec<Option<EmpiricalMeasure<K>>>,
    pub survivors: Vec<usize>,
    pub n_traj: usize,
    pub guard_tripped: usize,
    /// First grid index without survivors.
    pub truncated_at: Option<usize>,
}

impl ConditionedLaws<BinIndex> {
    /// Tags every law with the grid used as key.
    pub fn with_binning(mut self, grid: &BinGrid) -> Self {
        self.laws = self.laws.into_iter().map(|l| l.map(|m| m.with_binning(grid))).collect();
        self
    }
}

impl<K> ConditionedLaws<K> {
    pub fn unreliable(&self, i: usize) -> bool {
        self.survivors[i] < UNRELIABLE_BELOW
    }

    pub fn survival_fractions(&self) -> Vec<f64> {
        self.survivors.iter().map(|&s| s as f64 / self.n_traj as f64).collect()
    }

    /// Last index with a reliable law.
    pub fn last_reliable(&self) -> Option<usize> {
        (0..self.times.len()).rev().find(|&i| !self.unreliable(i) && self.laws[i].is_some())
    }
}

type Counts<K> = (Vec<BTreeMap<K, u64>>, usize);

/// Conditional laws `P_init(X_t in . | t < tau)` from `n_traj` paths.
///
/// Path `i` uses the stream `rng.child(i)`; counts are merged exactly, so the
/// result does not depend on thread scheduling.
pub fn conditioned_mc<P, K>(
    model: &P,
    init: &EmpiricalMeasure<P::State>,
    t_grid: &TimeGrid,
    n_traj: usize,
    max_events: u64,
    key: &(dyn Fn(&P::State) -> K + Sync),
    rng: RngStream,
) -> Result<ConditionedLaws<K>>
where
    P: AbsorbedProcess,
    K: Ord + Clone + Send,
{
    if n_traj < 1000 {
        return Err(Error::Precondition(format!("conditioned Monte Carlo needs at least 1000 paths, got {n_traj}")));
    }
    check_initial_law(init)?;
    let cfg = SimBatchConfig::new(n_traj, t_grid.last(), max_events, *t_grid)?;
    let len = t_grid.len();
    let empty = || -> Counts<K> { (vec![BTreeMap::new(); len], 0) };
    let (counts, guard) = (0..n_traj)
        .into_par_iter()
        .fold(empty, |mut acc, i| {
            let mut r = rng.child(i as u64).rng();
            let start = init.sample(&mut r).clone();
            let mut hits: Vec<(usize, K)> = Vec::with_capacity(len);
            let out = run_path(model, start, &cfg, &mut r, |k, s| {
                if !s.is_absorbed() {
                    hits.push((k, key(s)));
                }
            });
            if out.guard_tripped {
                acc.1 += 1;
            }
            for (k, x) in hits {
                *acc.0[k].entry(x).or_insert(0) += 1;
            }
            acc
        })
        .reduce(empty, |mut a, b| {
            for (ma, mb) in a.0.iter_mut().zip(b.0) {
                for (k, c) in mb {
                    *ma.entry(k).or_insert(0) += c;
                }
            }
            a.1 += b.1;
            a
        });
    let survivors: Vec<usize> = counts.iter().map(|m| m.values().sum::<u64>() as usize).collect();
    let truncated_at = survivors.iter().position(|&s| s == 0);
    let laws = counts
        .into_iter()
        .enumerate()
        .map(|(i, m)| {
            if truncated_at.is_some_and(|k| i >= k) {
                return None;
            }
            let total = survivors[i] as f64;
            EmpiricalMeasure::from_atoms(m.into_iter().map(|(k, c)| (k, c as f64 / total)).collect()).ok()
        })
        .collect();
    Ok(ConditionedLaws { times: t_grid.instants().collect(), laws, survivors, n_traj, guard_tripped: guard, truncated_at })
}

/// Expected TV of an empirical law of `n1` draws against one of `n2` draws
/// (`None`: exact), both from `reference`:
/// `sum_s sqrt(2 p_s (1 - p_s) (1/n1 + 1/n2) / pi)`.
pub fn tv_noise_floor<K>(reference: &EmpiricalMeasure<K>, n1: usize, n2: Option<usize>) -> f64 {
    let inv = 1.0 / n1.max(1) as f64 + n2.map_or(0.0, |n| 1.0 / n.max(1) as f64);
    let total = reference.total_mass();
    reference
        .atoms()
        .iter()
        .map(|(_, w)| {
            let p = w / total;
            (2.0 * p * (1.0 - p) * inv / std::f64::consts::PI).sqrt()
        })
        .sum::<f64>()
        .min(2.0)
}

/// TV from each reliable conditional law to `reference` (a law built from
/// `reference_samples` draws, or exact when `None`).
pub fn tv_curve<K: Ord + Clone>(
    label: &str,
    laws: &ConditionedLaws<K>,
    reference: &EmpiricalMeasure<K>,
    reference_samples: Option<usize>,
    other: Option<&ConditionedLaws<K>>,
) -> Result<ConvergenceReport> {
    let mut t = Vec::new();
    let mut tv = Vec::new();
    let mut surv = Vec::new();
    let mut noise = Vec::new();
    for i in 0..laws.times.len() {
        let Some(mu) = laws.laws[i].as_ref().filter(|_| !laws.unreliable(i)) else { break };
        let (nu, n2) = match other {
            Some(o) => match o.laws.get(i).and_then(|l| l.as_ref()).filter(|_| !o.unreliable(i)) {
                Some(l) => (l, Some(o.survivors[i])),
                None => break,
            },
            None => (reference, reference_samples),
        };
        t.push(laws.times[i]);
        tv.push(tv_distance(mu, nu)?);
        surv.push(laws.survivors[i]);
        noise.push(tv_noise_floor(nu, laws.survivors[i], n2));
    }
    Ok(ConvergenceReport::new(label, t, tv, surv, noise))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::birth_death::{BDModel, LvParams, TruncatedChain};
    use crate::state::DiscreteState;

    fn reference() -> BDModel {
        BDModel::lv(LvParams {
            lambda: vec![1.0, 1.0],
            mu: vec![1.0, 1.0],
            gamma: vec![vec![0.0; 2]; 2],
            c: vec![vec![1.0, 0.2], vec![0.2, 1.0]],
        })
        .unwrap()
    }

    #[test]
    fn survival_matches_uniformization() {
        let m = reference();
        let x = DiscreteState::new([2, 3]);
        let grid = TimeGrid::span(1.0, 4).unwrap();
        let laws = conditioned_mc(&m, &EmpiricalMeasure::dirac(x.clone()), &grid, 20_000, u64::MAX, &|s: &DiscreteState| s.clone(), RngStream::root(5))
            .unwrap();
        assert_eq!(laws.survivors[0], 20_000);
        assert_eq!(laws.laws[0].as_ref().unwrap().atoms(), &[(x.clone(), 1.0)]);
        let chain = TruncatedChain::square(&m, 40).unwrap();
        for (i, t) in grid.instants().enumerate().skip(1) {
            let p = chain.survival(&x, t).unwrap();
            let sd = (p * (1.0 - p) / 20_000.0).sqrt();
            let got = laws.survivors[i] as f64 / 20_000.0;
            assert!((got - p).abs() < 3.0 * sd, "t {t}: {got} vs {p}");
        }
    }

    #[test]
    fn deterministic_given_seed() {
        let m = reference();
        let grid = TimeGrid::span(0.5, 5).unwrap();
        let init = EmpiricalMeasure::dirac(DiscreteState::new([3, 3]));
        let run = || conditioned_mc(&m, &init, &grid, 2000, u64::MAX, &|s: &DiscreteState| s.clone(), RngStream::root(9)).unwrap();
        let (a, b) = (run(), run());
        assert_eq!(a.survivors, b.survivors);
        for (x, y) in a.laws.iter().zip(&b.laws) {
            assert_eq!(x.as_ref().map(|m| m.atoms().to_vec()), y.as_ref().map(|m| m.atoms().to_vec()));
        }
    }

    #[test]
    fn too_few_paths() {
        let grid = TimeGrid::span(0.5, 5).unwrap();
        let init = EmpiricalMeasure::dirac(DiscreteState::new([3, 3]));
        assert!(conditioned_mc(&reference(), &init, &grid, 10, 10, &|s: &DiscreteState| s.clone(), RngStream::root(9)).is_err());
    }

    #[test]
    fn noise_floor_of_a_fair_coin() {
        let m = EmpiricalMeasure::from_atoms(vec![(0u8, 0.5), (1u8, 0.5)]).unwrap();
        let f = tv_noise_floor(&m, 100, None);
        assert!((f - 2.0 * (0.5f64 / (100.0 * std::f64::consts::PI)).sqrt()).abs() < 1e-15);
    }
}
