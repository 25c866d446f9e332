//! Model-agnostic checks of Lyapunov-type criteria.

mod admissible;
mod certificate;
mod conditions;
mod dynkin;
mod nonlinear;
mod pair;
mod probes;

pub use admissible::check_admissible;
pub use certificate::{CheckCertificate, Counterexample, Qualifier, Verdict};
pub use conditions::{c_prime_grid, check_condition_a, check_condition_b};
pub use dynkin::{verify_dynkin_identity, DynkinReport};
pub use nonlinear::{
    check_nonlinear_inequality, constant_grid, measure_terms, sample_mixtures, MeasureTerms, MIXTURE_SIZES,
};
pub use pair::{Domain, LyapunovPair};
pub use probes::{
    doeblin_probe, expo_moment_estimate, expo_moment_probe, harnack_ratio_probe, survival_counts, MomentEstimate,
    MIN_SURVIVORS,
};
