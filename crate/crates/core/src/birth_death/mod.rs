//! Multitype birth-death chains with Lotka-Volterra or tabulated rates.

mod assumption;
mod generator;
mod model;
mod pair;
mod series;
mod slices;
mod truncation;

pub use assumption::{
    auto_eta, auto_eta_on_table, check_assumption_PNM, check_assumption_on_table, check_assumption_pnm, eta_grid,
    select_bd_params, select_bd_params_on_table, select_bd_params_with_eta, BdSelection, BETA_STEP,
};
pub use generator::bd_generator_apply;
pub use model::{gillespie_step, BDModel, LvParams, OutOfBox, Rates, TabulatedRates};
pub use pair::{slice_domain, BdPair};
pub use series::{
    hurwitz_tail, hurwitz_tail_error_bound, lyapunov_phi, lyapunov_v, phi_of_size, v_of_size, BDLyapunovParams,
    TAIL_RTOL,
};
pub use slices::{
    dbar_dunder, dbar_dunder_with_budget, for_each_in_slice, lv_slice_bounds, simplex_quadratic_min, slice_size,
    slice_states, slice_table, SliceStats, ENUMERATION_BUDGET,
};
pub use truncation::TruncatedChain;
