use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::birth_death::{BDModel, TruncatedChain};
use crate::error::{Error, Result};
use crate::measure::EmpiricalMeasure;
use crate::state::DiscreteState;

use super::{QSDEstimate, QsdMethod};

/// Residual target `||nu Q~ + lambda0 nu||_1` of the power iteration.
pub const ORACLE_TOL: f64 = 1e-12;
pub const ORACLE_MAX_ITER: usize = 100_000;

/// Leading left and right eigenvectors of a truncated sub-generator.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EigenOracle {
    pub chain: TruncatedChain,
    /// Left eigenvector, probability-normalized.
    pub nu: Vec<f64>,
    /// Right eigenvector with `nu . eta = 1`.
    pub eta: Vec<f64>,
    pub lambda0: f64,
    pub residual: f64,
    pub iterations: usize,
}

impl EigenOracle {
    pub fn estimate(&self) -> QSDEstimate<DiscreteState> {
        let atoms = self.chain.states().iter().cloned().zip(self.nu.iter().copied()).filter(|(_, w)| *w > 0.0).collect();
        let measure = EmpiricalMeasure::from_atoms(atoms).expect("oracle vector has mass");
        let mut diagnostics = BTreeMap::new();
        for (i, m) in self.chain.max().iter().enumerate() {
            diagnostics.insert(format!("box_max_{}", i + 1), *m as f64);
        }
        diagnostics.insert("states".into(), self.chain.len() as f64);
        diagnostics.insert("residual".into(), self.residual);
        diagnostics.insert("iterations".into(), self.iterations as f64);
        diagnostics.insert("outer_shell_mass".into(), outer_shell_mass(&self.chain, &self.nu));
        QSDEstimate { measure, method: QsdMethod::EigenOracle, lambda0: self.lambda0, lambda0_ci: (self.lambda0, self.lambda0), diagnostics }
    }

    /// `eta` at a box state, 0 outside.
    pub fn eta_at(&self, n: &DiscreteState) -> f64 {
        self.chain.index_of(n).map_or(0.0, |i| self.eta[i])
    }
}

/// Mass on states with some coordinate above 90% of the box side.
fn outer_shell_mass(chain: &TruncatedChain, nu: &[f64]) -> f64 {
    let max = chain.max();
    chain
        .states()
        .iter()
        .zip(nu)
        .filter(|(s, _)| s.coords().iter().zip(max).any(|(&c, &m)| c as f64 > 0.9 * m as f64))
        .map(|(_, w)| *w)
        .sum()
}

fn l1(v: &[f64]) -> f64 {
    v.iter().map(|x| x.abs()).sum()
}

/// Power iteration on `I + Q~/Lambda` from the left (`left = true`) or right.
fn power(chain: &TruncatedChain, left: bool) -> Result<(Vec<f64>, f64, f64, usize)> {
    let n = chain.len();
    let lam = 1.05 * chain.max_rate().max(1e-300);
    let kill = chain.kill_rates();
    let mut v = vec![1.0 / n as f64; n];
    for it in 0..ORACLE_MAX_ITER {
        let q = if left { chain.left_generator(&v) } else { chain.apply_generator(&v) };
        // lambda0 from the Rayleigh-type quotient on the current iterate
        let lambda0 = if left {
            v.iter().zip(kill).map(|(a, k)| a * k).sum::<f64>() / v.iter().sum::<f64>()
        } else {
            -q.iter().sum::<f64>() / v.iter().sum::<f64>()
        };
        let norm = l1(&v);
        let resid = q.iter().zip(&v).map(|(a, b)| (a + lambda0 * b).abs()).sum::<f64>() / norm;
        if resid <= ORACLE_TOL {
            return Ok((v, lambda0, resid, it));
        }
        let mut next: Vec<f64> = v.iter().zip(&q).map(|(a, b)| a + b / lam).collect();
        let s = l1(&next);
        next.iter_mut().for_each(|x| *x /= s);
        v = next;
    }
    Err(Error::NoConvergence(ORACLE_MAX_ITER))
}

/// QSD of the chain killed outside `{1 <= n_i <= max_i}`.
pub fn qsd_eigen_oracle(model: &BDModel, max: Vec<u32>) -> Result<EigenOracle> {
    let chain = TruncatedChain::new(model, max)?;
    chain.check_irreducible()?;
    let (nu, lambda0, residual, iterations) = power(&chain, true)?;
    let (mut eta, _, _, _) = power(&chain, false)?;
    let s: f64 = nu.iter().zip(&eta).map(|(a, b)| a * b).sum();
    eta.iter_mut().for_each(|x| *x /= s);
    Ok(EigenOracle { chain, nu, eta, lambda0, residual, iterations })
}

/// Grows a square box from `start` by `step` until the QSD mass on the outer
/// 10% shell is below `tol`.
pub fn auto_box(model: &BDModel, start: u32, step: u32, tol: f64, max_side: u32) -> Result<EigenOracle> {
    let d = model.dim();
    let mut side = start.max(2);
    loop {
        let o = qsd_eigen_oracle(model, vec![side; d])?;
        let m = outer_shell_mass(&o.chain, &o.nu);
        if m < tol {
            return Ok(o);
        }
        if side >= max_side {
            return Err(Error::InvalidParameter(format!("outer-shell mass {m:e} at side {side}, the largest allowed")));
        }
        side = (side + step).min(max_side);
    }
}
