use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::grid::TimeGrid;
use crate::lyapunov::survival_counts;
use crate::rng::RngStream;
use crate::sim::AbsorbedProcess;
use crate::state::State;
use crate::stats::ols;

/// Rescaled survival curve `e^{lambda0 t} P_x(t < tau)` of one start state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EtaRow {
    pub state: Vec<f64>,
    pub curve: Vec<f64>,
    /// Mean over the last third of the grid.
    pub plateau: f64,
    /// Fitted change over the last third relative to the plateau.
    pub drift: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EtaProfile {
    pub times: Vec<f64>,
    pub lambda0: f64,
    pub rows: Vec<EtaRow>,
    pub notes: Vec<String>,
}

/// Estimates `x -> e^{lambda0 t} P_x(t < tau)` by Monte Carlo.
///
/// `lambda0_ci` is propagated as a note on the multiplicative uncertainty
/// `e^{(hi - lo) t_max / 2}` of the last rescaled value.
pub fn eta_profile<P: AbsorbedProcess>(
    model: &P,
    states: &[P::State],
    t_grid: &TimeGrid,
    mc_budget: usize,
    lambda0: f64,
    lambda0_ci: (f64, f64),
    max_events: u64,
    rng: RngStream,
) -> Result<EtaProfile> {
    let counts = survival_counts(model, states, t_grid, mc_budget, max_events, rng)?;
    let times: Vec<f64> = t_grid.instants().collect();
    let from = times.len() - (times.len() / 3).max(2).min(times.len());
    let rows = states
        .iter()
        .zip(counts)
        .map(|(s, c)| {
            let curve: Vec<f64> =
                times.iter().zip(&c).map(|(t, &k)| (lambda0 * t).exp() * k as f64 / mc_budget as f64).collect();
            let tail = &curve[from..];
            let plateau = tail.iter().sum::<f64>() / tail.len() as f64;
            let drift = match ols(&times[from..], tail) {
                Some(f) if plateau > 0.0 => f.slope * (times[times.len() - 1] - times[from]) / plateau,
                _ => 0.0,
            };
            EtaRow { state: s.coords_f64(), curve, plateau, drift }
        })
        .collect();
    let mut notes = Vec::new();
    let spread = lambda0_ci.1 - lambda0_ci.0;
    if spread > 0.0 {
        let t_max = times[times.len() - 1];
        notes.push(format!("lambda0 interval width {spread:e} scales the last value by up to e^{:.3e}", spread * t_max / 2.0));
    }
    Ok(EtaProfile { times, lambda0, rows, notes })
}
