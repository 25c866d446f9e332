//! Weighted point masses and the total-variation distance between them.
//!
//! Total variation follows the `sup_{|f| <= 1} |mu(f) - nu(f)|` convention,
//! so it equals `sum_s |mu({s}) - nu({s})|` and ranges over `[0, 2]`.
//! [`tv_half_l1`] gives the probabilists' half-L1 value for comparison.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::state::ContinuousState;

const MASS_TOL: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalMeasure<S> {
    atoms: Vec<(S, f64)>,
    total_mass: f64,
    binning: Option<BinGrid>,
}

impl<S> EmpiricalMeasure<S> {
    pub fn from_atoms(atoms: Vec<(S, f64)>) -> Result<Self> {
        let mut total = 0.0;
        for (_, w) in &atoms {
            if !(*w >= 0.0) || !w.is_finite() {
                return Err(Error::InvalidParameter(format!("atom weight {w} is not a finite nonnegative number")));
            }
            total += w;
        }
        Ok(EmpiricalMeasure { atoms, total_mass: total, binning: None })
    }

    pub fn dirac(state: S) -> Self {
        EmpiricalMeasure { atoms: vec![(state, 1.0)], total_mass: 1.0, binning: None }
    }

    /// Equal weights on `states`.
    pub fn uniform(states: Vec<S>) -> Result<Self> {
        if states.is_empty() {
            return Err(Error::InvalidParameter("uniform measure over no states".into()));
        }
        let w = 1.0 / states.len() as f64;
        EmpiricalMeasure::from_atoms(states.into_iter().map(|s| (s, w)).collect())
    }

    pub fn atoms(&self) -> &[(S, f64)] {
        &self.atoms
    }

    pub fn into_atoms(self) -> Vec<(S, f64)> {
        self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn total_mass(&self) -> f64 {
        self.total_mass
    }

    pub fn binning(&self) -> Option<&BinGrid> {
        self.binning.as_ref()
    }

    pub fn is_normalized(&self) -> bool {
        (self.total_mass - 1.0).abs() <= MASS_TOL
    }

    pub fn normalized(mut self) -> Result<Self> {
        if !(self.total_mass > 0.0) {
            return Err(Error::NotNormalized(self.total_mass));
        }
        let z = self.total_mass;
        for (_, w) in &mut self.atoms {
            *w /= z;
        }
        self.total_mass = self.atoms.iter().map(|(_, w)| w).sum();
        Ok(self)
    }

    /// `mu(f)`.
    pub fn integrate(&self, mut f: impl FnMut(&S) -> f64) -> f64 {
        self.atoms.iter().map(|(s, w)| w * f(s)).sum()
    }

    pub fn map<T>(&self, mut f: impl FnMut(&S) -> T) -> EmpiricalMeasure<T> {
        EmpiricalMeasure {
            atoms: self.atoms.iter().map(|(s, w)| (f(s), *w)).collect(),
            total_mass: self.total_mass,
            binning: self.binning.clone(),
        }
    }

    /// Draws one atom with probability proportional to its weight.
    pub fn sample<'a, R: Rng + ?Sized>(&'a self, rng: &mut R) -> &'a S {
        let target = rng.random::<f64>() * self.total_mass;
        let mut acc = 0.0;
        for (s, w) in &self.atoms {
            acc += w;
            if target < acc {
                return s;
            }
        }
        &self.atoms.last().expect("sampling from an empty measure").0
    }
}

impl<S: Ord + Clone> EmpiricalMeasure<S> {
    /// Merges duplicate atoms and sorts them by state.
    pub fn consolidated(&self) -> Self {
        let mut map: BTreeMap<S, f64> = BTreeMap::new();
        for (s, w) in &self.atoms {
            *map.entry(s.clone()).or_insert(0.0) += w;
        }
        EmpiricalMeasure {
            atoms: map.into_iter().collect(),
            total_mass: self.total_mass,
            binning: self.binning.clone(),
        }
    }

    /// Normalized empirical law of `samples`.
    pub fn from_samples<I: IntoIterator<Item = S>>(samples: I) -> Result<Self> {
        let mut map: BTreeMap<S, f64> = BTreeMap::new();
        for s in samples {
            *map.entry(s).or_insert(0.0) += 1.0;
        }
        EmpiricalMeasure::from_counts(map)
    }

    /// Normalized measure from occurrence counts or occupation weights.
    pub fn from_counts(counts: BTreeMap<S, f64>) -> Result<Self> {
        EmpiricalMeasure::from_atoms(counts.into_iter().collect())?.normalized()
    }

    pub fn mass_of(&self, state: &S) -> f64 {
        self.atoms.iter().filter(|(s, _)| s == state).map(|(_, w)| w).sum()
    }
}

impl EmpiricalMeasure<BinIndex> {
    /// Tags a histogram built elsewhere with the grid its cells refer to.
    pub fn with_binning(mut self, grid: &BinGrid) -> Self {
        self.binning = Some(grid.clone());
        self
    }
}

impl EmpiricalMeasure<ContinuousState> {
    /// Histogram of the measure on `grid`.
    pub fn bin(&self, grid: &BinGrid) -> EmpiricalMeasure<BinIndex> {
        let mut map: BTreeMap<BinIndex, f64> = BTreeMap::new();
        for (s, w) in &self.atoms {
            *map.entry(grid.bin_of(s.coords())).or_insert(0.0) += w;
        }
        EmpiricalMeasure {
            atoms: map.into_iter().collect(),
            total_mass: self.total_mass,
            binning: Some(grid.clone()),
        }
    }
}

/// Total variation in the sup convention, `sum_s |mu({s}) - nu({s})|`.
pub fn tv_distance<S: Ord + Clone>(mu: &EmpiricalMeasure<S>, nu: &EmpiricalMeasure<S>) -> Result<f64> {
    if mu.binning != nu.binning {
        return Err(Error::BinningMismatch);
    }
    for m in [mu, nu] {
        if !m.is_normalized() {
            return Err(Error::NotNormalized(m.total_mass));
        }
    }
    let a = mu.consolidated();
    let b = nu.consolidated();
    let (mut i, mut j) = (0, 0);
    let mut tv = 0.0;
    while i < a.atoms.len() || j < b.atoms.len() {
        let ord = match (a.atoms.get(i), b.atoms.get(j)) {
            (Some((s, _)), Some((t, _))) => s.cmp(t),
            (Some(_), None) => Ordering::Less,
            (None, Some(_)) => Ordering::Greater,
            (None, None) => unreachable!(),
        };
        match ord {
            Ordering::Less => {
                tv += a.atoms[i].1;
                i += 1;
            }
            Ordering::Greater => {
                tv += b.atoms[j].1;
                j += 1;
            }
            Ordering::Equal => {
                tv += (a.atoms[i].1 - b.atoms[j].1).abs();
                i += 1;
                j += 1;
            }
        }
    }
    Ok(tv.min(2.0))
}

/// `tv_distance / 2`, the `sup_A |mu(A) - nu(A)|` convention.
pub fn tv_half_l1<S: Ord + Clone>(mu: &EmpiricalMeasure<S>, nu: &EmpiricalMeasure<S>) -> Result<f64> {
    Ok(0.5 * tv_distance(mu, nu)?)
}

/// Multi-index of a histogram cell.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct BinIndex(pub Vec<u32>);

/// Rectangular histogram grid, `bins[k]` cells per axis over `[lo[k], hi[k]]`.
///
/// Points outside the box land in the edge cells.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BinGrid {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub bins: Vec<u32>,
}

impl BinGrid {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>, bins: Vec<u32>) -> Result<Self> {
        if lo.len() != hi.len() || lo.len() != bins.len() {
            return Err(Error::Dimension { expected: lo.len(), got: hi.len().max(bins.len()) });
        }
        for k in 0..lo.len() {
            if !(hi[k] > lo[k]) || bins[k] == 0 {
                return Err(Error::InvalidParameter(format!("degenerate bin axis {k}")));
            }
        }
        Ok(BinGrid { lo, hi, bins })
    }

    /// Box spanning the `[q_lo, q_hi]` per-axis quantiles of the pooled
    /// samples, `bins` cells per axis.
    pub fn from_quantiles<'a, I>(samples: I, q_lo: f64, q_hi: f64, bins: u32) -> Result<Self>
    where
        I: IntoIterator<Item = &'a ContinuousState>,
    {
        let mut axes: Vec<Vec<f64>> = Vec::new();
        for s in samples {
            if axes.is_empty() {
                axes = vec![Vec::new(); s.coords().len()];
            }
            for (k, &x) in s.coords().iter().enumerate() {
                axes[k].push(x);
            }
        }
        if axes.is_empty() || axes[0].is_empty() {
            return Err(Error::InvalidParameter("cannot bin an empty sample".into()));
        }
        let mut lo = Vec::with_capacity(axes.len());
        let mut hi = Vec::with_capacity(axes.len());
        for axis in &mut axes {
            axis.sort_by(f64::total_cmp);
            let mut l = quantile_sorted(axis, q_lo);
            let mut h = quantile_sorted(axis, q_hi);
            if !(h > l) {
                let pad = 1e-9_f64.max(l.abs() * 1e-6);
                l -= pad;
                h += pad;
            }
            lo.push(l);
            hi.push(h);
        }
        let d = lo.len();
        BinGrid::new(lo, hi, vec![bins; d])
    }

    pub fn bin_of(&self, x: &[f64]) -> BinIndex {
        BinIndex(
            x.iter()
                .enumerate()
                .map(|(k, &v)| {
                    let width = (self.hi[k] - self.lo[k]) / self.bins[k] as f64;
                    let cell = ((v - self.lo[k]) / width).floor();
                    cell.clamp(0.0, (self.bins[k] - 1) as f64) as u32
                })
                .collect(),
        )
    }
}

/// Linear-interpolated quantile of sorted data.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let pos = q.clamp(0.0, 1.0) * (n - 1) as f64;
    let i = pos.floor() as usize;
    let frac = pos - i as f64;
    if i + 1 >= n {
        sorted[n - 1]
    } else {
        sorted[i] * (1.0 - frac) + sorted[i + 1] * frac
    }
}
