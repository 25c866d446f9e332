//! Competitive Feller diffusions: simulation, comparison processes, the
//! `(prod g, prod h_beta)` Lyapunov couple and its grid checks.

mod assumption;
mod gfun;
mod hbeta;
mod model;
mod pair;
mod scheme;
mod survival;

use serde::{Deserialize, Serialize};

use crate::error::Result;

pub use assumption::{check_feller_assumption, lv_assumption_params, FellerAssumptionParams};
pub use gfun::{build_g, gamma_lower, GFunction, G_GRID};
pub use hbeta::{build_h_beta, c_beta, compute_M, select_feller_beta, HBetaFunction, HPiece, MConstants, BETA_SPAN};
pub use model::{feller_generator_apply, ClosureFn, FellerGrowth, FellerModel, SmoothFn};
pub use pair::{
    check_feller_conditions, default_feller_epsilon, feller_level, feller_lyapunov_phi, feller_lyapunov_v, FellerConditions,
    FellerPair, LogBoxGrid,
};
pub use scheme::{coupled_comparison, simulate_feller_step, ComparisonReport, FellerProcess, FellerScheme};
pub use survival::survival_bound_check;

/// Every constructed object of the Lyapunov couple for one model.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FellerSetup {
    pub params: FellerAssumptionParams,
    pub m: MConstants,
    pub beta: f64,
    pub epsilon: f64,
    pub h: HBetaFunction,
    pub g: GFunction,
}

impl FellerSetup {
    /// Constants for the normalized LV model with `B_a = 2a`, `beta` by the
    /// selection rule, `g` with `gamma` at the middle of its range and
    /// `epsilon = eta / (4 beta d)`.
    pub fn auto(model: &FellerModel, eta: f64) -> Result<Self> {
        let params = lv_assumption_params(&model.rescaled(), eta, 2.0)?;
        let m = compute_M(&params);
        let beta = select_feller_beta(&params, &m);
        let h = build_h_beta(&params, beta)?;
        let gamma = 0.5 * (gamma_lower(eta) + 1.0);
        let g = build_g(eta, gamma, None)?;
        let epsilon = default_feller_epsilon(&params, beta, model.dim());
        Ok(FellerSetup { params, m, beta, epsilon, h, g })
    }

    pub fn pair(&self, model: &FellerModel) -> FellerPair {
        FellerPair::new(model, self.h.clone(), self.g.clone())
    }
}
