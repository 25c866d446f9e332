use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Equally spaced instants `t0, t0 + dt, ..., t0 + n_steps * dt`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub t0: f64,
    pub dt: f64,
    pub n_steps: usize,
}

impl TimeGrid {
    pub fn new(t0: f64, dt: f64, n_steps: usize) -> Result<Self> {
        if !(t0 >= 0.0) || !(dt > 0.0) || n_steps == 0 {
            return Err(Error::InvalidParameter(format!(
                "time grid needs t0 >= 0, dt > 0, n_steps > 0 (got {t0}, {dt}, {n_steps})"
            )));
        }
        Ok(TimeGrid { t0, dt, n_steps })
    }

    /// Grid on `[0, horizon]` with `n_steps` intervals.
    pub fn span(horizon: f64, n_steps: usize) -> Result<Self> {
        TimeGrid::new(0.0, horizon / n_steps as f64, n_steps)
    }

    pub fn len(&self) -> usize {
        self.n_steps + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn at(&self, i: usize) -> f64 {
        self.t0 + i as f64 * self.dt
    }

    pub fn last(&self) -> f64 {
        self.at(self.n_steps)
    }

    pub fn instants(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.len()).map(|i| self.at(i))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn instants_are_strictly_increasing() {
        let g = TimeGrid::new(0.5, 0.1, 30).unwrap();
        let v: Vec<f64> = g.instants().collect();
        assert_eq!(v.len(), 31);
        assert!(v.windows(2).all(|w| w[1] > w[0]));
        assert!((g.last() - 3.5).abs() < 1e-12);
    }

    #[test]
    fn rejects_degenerate_grids() {
        assert!(TimeGrid::new(0.0, 0.0, 3).is_err());
        assert!(TimeGrid::new(-1.0, 0.1, 3).is_err());
        assert!(TimeGrid::new(0.0, 0.1, 0).is_err());
    }
}
