//! Quasi-stationary distribution estimators and convergence diagnostics.

mod eta;
mod fit;
mod fv;
mod mc;
mod oracle;

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::measure::EmpiricalMeasure;

pub use eta::{eta_profile, EtaProfile, EtaRow};
pub use fit::{fit_decay_rate, survival_noise, ConvergenceReport, DecayFit, MIN_FIT_POINTS};
pub use fv::{fleming_viot, fleming_viot_qsd, FvConfig, FvRun};
pub use mc::{conditioned_mc, tv_curve, tv_noise_floor, ConditionedLaws, UNRELIABLE_BELOW};
pub use oracle::{auto_box, qsd_eigen_oracle, EigenOracle, ORACLE_MAX_ITER, ORACLE_TOL};

/// Which estimator produced a [`QSDEstimate`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QsdMethod {
    EigenOracle,
    ConditionedMc,
    FlemingViot,
}

/// A normalized QSD estimate with its absorption rate.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct QSDEstimate<S> {
    pub measure: EmpiricalMeasure<S>,
    pub method: QsdMethod,
    pub lambda0: f64,
    pub lambda0_ci: (f64, f64),
    pub diagnostics: BTreeMap<String, f64>,
}

impl<S> QSDEstimate<S> {
    /// One CSV row per atom: coordinates then mass.
    pub fn to_csv(&self, coords: impl Fn(&S) -> Vec<f64>) -> String {
        let mut out = String::new();
        let d = self.measure.atoms().first().map_or(0, |(s, _)| coords(s).len());
        let header: Vec<String> = (0..d).map(|i| format!("x{}", i + 1)).chain(["mass".to_string()]).collect();
        let _ = writeln!(out, "{}", header.join(","));
        for (s, w) in self.measure.atoms() {
            let cols: Vec<String> = coords(s).iter().map(|v| format!("{v}")).collect();
            let _ = writeln!(out, "{},{w:.17e}", cols.join(","));
        }
        out
    }

    pub fn diagnostics_json(&self) -> serde_json::Value {
        serde_json::json!({
            "method": self.method,
            "lambda0": self.lambda0,
            "lambda0_ci": [self.lambda0_ci.0, self.lambda0_ci.1],
            "atoms": self.measure.len(),
            "diagnostics": self.diagnostics,
        })
    }
}
