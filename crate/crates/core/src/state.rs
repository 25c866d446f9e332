//! State representations for processes absorbed when a coordinate vanishes.

use std::fmt;

use serde::{Deserialize, Serialize};

/// Common surface of the discrete and continuous state types.
pub trait State: Clone + fmt::Debug + Send + Sync {
    fn dim(&self) -> usize;

    /// True iff some coordinate is zero.
    fn is_absorbed(&self) -> bool;

    fn coords_f64(&self) -> Vec<f64>;
}

/// Population counts per type, a point of `Z_+^d`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DiscreteState(Vec<u32>);

impl DiscreteState {
    /// Panics if fewer than two coordinates are given.
    pub fn new(coords: impl Into<Vec<u32>>) -> Self {
        let coords = coords.into();
        assert!(coords.len() >= 2, "state dimension must be at least 2");
        DiscreteState(coords)
    }

    /// The all-ones state `(1, ..., 1)`.
    pub fn ones(d: usize) -> Self {
        DiscreteState::new(vec![1; d])
    }

    pub fn coords(&self) -> &[u32] {
        &self.0
    }

    pub fn coords_mut(&mut self) -> &mut [u32] {
        &mut self.0
    }

    /// `|n| = n_1 + ... + n_d`.
    pub fn size(&self) -> u64 {
        self.0.iter().map(|&c| c as u64).sum()
    }

    /// `n + e_j`.
    pub fn plus(&self, j: usize) -> Self {
        let mut next = self.clone();
        next.0[j] += 1;
        next
    }

    /// `n - e_j`; saturates at zero.
    pub fn minus(&self, j: usize) -> Self {
        let mut next = self.clone();
        next.0[j] = next.0[j].saturating_sub(1);
        next
    }
}

impl State for DiscreteState {
    fn dim(&self) -> usize {
        self.0.len()
    }

    fn is_absorbed(&self) -> bool {
        self.0.contains(&0)
    }

    fn coords_f64(&self) -> Vec<f64> {
        self.0.iter().map(|&c| c as f64).collect()
    }
}

impl fmt::Display for DiscreteState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, c) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, ")")
    }
}

/// Population densities per type, a point of `R_+^d`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ContinuousState(Vec<f64>);

impl ContinuousState {
    /// Panics if fewer than two coordinates are given.
    pub fn new(coords: impl Into<Vec<f64>>) -> Self {
        let coords = coords.into();
        assert!(coords.len() >= 2, "state dimension must be at least 2");
        ContinuousState(coords)
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn coords_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }

    pub fn min_coord(&self) -> f64 {
        self.0.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_coord(&self) -> f64 {
        self.0.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

impl State for ContinuousState {
    fn dim(&self) -> usize {
        self.0.len()
    }

    fn is_absorbed(&self) -> bool {
        self.0.iter().any(|&c| c <= 0.0)
    }

    fn coords_f64(&self) -> Vec<f64> {
        self.0.clone()
    }
}

impl fmt::Display for ContinuousState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, c) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, ")")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn absorption_is_any_zero_coordinate() {
        assert!(DiscreteState::new([0, 5]).is_absorbed());
        assert!(!DiscreteState::new([1, 5]).is_absorbed());
        assert!(ContinuousState::new([0.3, 0.0]).is_absorbed());
        assert!(!ContinuousState::new([0.3, 1e-300]).is_absorbed());
    }

    #[test]
    fn neighbours() {
        let n = DiscreteState::new([3, 2]);
        assert_eq!(n.plus(0), DiscreteState::new([4, 2]));
        assert_eq!(n.minus(1), DiscreteState::new([3, 1]));
        assert_eq!(n.size(), 5);
        assert_eq!(n.to_string(), "(3,2)");
    }

    #[test]
    #[should_panic]
    fn one_dimensional_states_are_rejected() {
        DiscreteState::new([1]);
    }
}
