//! The series pair `V(n) = sum_{k<=|n|} k^-alpha`, `phi(n) = sum_{k>|n|} k^-beta`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::state::{DiscreteState, State};

/// Relative accuracy of [`hurwitz_tail`].
pub const TAIL_RTOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BDLyapunovParams {
    pub alpha: f64,
    pub beta: f64,
    pub epsilon: f64,
    pub eta: f64,
}

impl BDLyapunovParams {
    pub fn new(alpha: f64, beta: f64, epsilon: f64, eta: f64) -> Result<Self> {
        if !(alpha > 1.0) || !(beta > 1.0) {
            return Err(Error::InvalidParameter(format!(
                "series diverge unless alpha > 1 and beta > 1 (got {alpha}, {beta})"
            )));
        }
        if !(epsilon > 0.0) || !(eta > 0.0) {
            return Err(Error::InvalidParameter("epsilon and eta must be positive".into()));
        }
        Ok(BDLyapunovParams { alpha, beta, epsilon, eta })
    }

    /// `alpha = 1 + eta/2`, `epsilon = eta / (2 (beta - 1))`.
    pub fn from_eta_beta(eta: f64, beta: f64) -> Result<Self> {
        BDLyapunovParams::new(1.0 + eta / 2.0, beta, eta / (2.0 * (beta - 1.0)), eta)
    }
}

/// `sum_{k >= n} k^-s` for `s > 1`, `n >= 1`, to relative accuracy 1e-12.
///
/// Terms are summed directly up to a cutoff `m`, then Euler-Maclaurin with
/// two correction terms; the remainder is at most
/// `s(s+1)(s+2)(s+3)(s+4) m^(-s-5) / 30240`.
pub fn hurwitz_tail(s: f64, n: u64) -> f64 {
    assert!(s > 1.0 && n >= 1);
    let (head_end, _) = tail_cutoff(s, n);
    let mut head = 0.0;
    // sum small terms first
    for k in (n..head_end).rev() {
        head += (k as f64).powf(-s);
    }
    head + em_tail(s, head_end as f64)
}

/// Cutoff `m >= n` and the remainder bound at `m`.
fn tail_cutoff(s: f64, n: u64) -> (u64, f64) {
    let p = s * (s + 1.0) * (s + 2.0) * (s + 3.0) * (s + 4.0) / 30240.0;
    // relative to the leading term m^(1-s)/(s-1): p (s-1) m^-6 <= rtol / 1000
    let need = (p * (s - 1.0) / (TAIL_RTOL * 1e-3)).powf(1.0 / 6.0).ceil() as u64;
    let m = need.max(n).max(2);
    (m, p * (m as f64).powf(-s - 5.0))
}

/// Remainder bound of [`hurwitz_tail`] at `(s, n)`.
pub fn hurwitz_tail_error_bound(s: f64, n: u64) -> f64 {
    tail_cutoff(s, n).1
}

fn em_tail(s: f64, m: f64) -> f64 {
    let ms = m.powf(-s);
    m * ms / (s - 1.0) + 0.5 * ms + s * ms / (12.0 * m)
        - s * (s + 1.0) * (s + 2.0) * ms / (720.0 * m * m * m)
}

/// `V` as a function of `k = |n|`.
pub fn v_of_size(alpha: f64, k: u64) -> f64 {
    if k == 0 {
        return 0.0;
    }
    if k <= 4096 {
        let mut acc = 0.0;
        for j in (1..=k).rev() {
            acc += (j as f64).powf(-alpha);
        }
        acc
    } else {
        hurwitz_tail(alpha, 1) - hurwitz_tail(alpha, k + 1)
    }
}

/// `phi` as a function of `k = |n|`.
pub fn phi_of_size(beta: f64, k: u64) -> f64 {
    hurwitz_tail(beta, k + 1)
}

pub fn lyapunov_v(params: &BDLyapunovParams, n: &DiscreteState) -> f64 {
    if n.is_absorbed() {
        0.0
    } else {
        v_of_size(params.alpha, n.size())
    }
}

pub fn lyapunov_phi(params: &BDLyapunovParams, n: &DiscreteState) -> f64 {
    if n.is_absorbed() {
        0.0
    } else {
        phi_of_size(params.beta, n.size())
    }
}
