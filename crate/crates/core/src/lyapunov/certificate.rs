use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Holds,
    Violated,
    Inconclusive,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Holds => "holds",
            Verdict::Violated => "violated",
            Verdict::Inconclusive => "inconclusive",
        })
    }
}

/// Whether a certificate comes from exhaustive evaluation or from sampling.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Qualifier {
    /// Exhaustive evaluation of an inequality on the stated domain.
    Exact,
    /// Monte Carlo or grid evidence; corroborating only.
    Empirical,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Counterexample {
    pub state: Vec<f64>,
    pub note: String,
}

impl Counterexample {
    pub fn new(state: Vec<f64>, note: impl Into<String>) -> Self {
        Counterexample { state, note: note.into() }
    }
}

/// Outcome of a hypothesis check: witness constants or counterexamples.
///
/// A violated certificate always carries a counterexample and a holding one
/// always carries a witness.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckCertificate {
    pub check: String,
    pub verdict: Verdict,
    pub witnesses: BTreeMap<String, f64>,
    pub counterexamples: Vec<Counterexample>,
    pub domain: String,
    pub seed: Option<u64>,
    pub qualifier: Qualifier,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl CheckCertificate {
    pub fn new(check: impl Into<String>, domain: impl Into<String>, qualifier: Qualifier) -> Self {
        CheckCertificate {
            check: check.into(),
            verdict: Verdict::Inconclusive,
            witnesses: BTreeMap::new(),
            counterexamples: Vec::new(),
            domain: domain.into(),
            seed: None,
            qualifier,
            notes: Vec::new(),
        }
    }

    pub fn witness(mut self, name: &str, value: f64) -> Self {
        self.witnesses.insert(name.to_string(), value);
        self
    }

    pub fn set_witness(&mut self, name: &str, value: f64) {
        self.witnesses.insert(name.to_string(), value);
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }

    pub fn note(&mut self, text: impl Into<String>) {
        self.notes.push(text.into());
    }

    pub fn push_counterexample(&mut self, c: Counterexample) {
        self.counterexamples.push(c);
    }

    /// Sets the verdict, downgrading to inconclusive when the invariant on
    /// witnesses/counterexamples would not hold.
    pub fn conclude(mut self, verdict: Verdict) -> Self {
        self.verdict = match verdict {
            Verdict::Holds if self.witnesses.is_empty() => Verdict::Inconclusive,
            Verdict::Violated if self.counterexamples.is_empty() => Verdict::Inconclusive,
            v => v,
        };
        self
    }

    pub fn holds(&self) -> bool {
        self.verdict == Verdict::Holds
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.witnesses.get(name).copied()
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("certificate serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn verdict_invariants_are_enforced() {
        let c = CheckCertificate::new("x", "d", Qualifier::Exact).conclude(Verdict::Holds);
        assert_eq!(c.verdict, Verdict::Inconclusive);
        let c = CheckCertificate::new("x", "d", Qualifier::Exact).conclude(Verdict::Violated);
        assert_eq!(c.verdict, Verdict::Inconclusive);
        let c = CheckCertificate::new("x", "d", Qualifier::Exact).witness("C", 1.0).conclude(Verdict::Holds);
        assert!(c.holds());
    }

    #[test]
    fn serializes_with_the_documented_keys() {
        let c = CheckCertificate::new("condition_a", "|n| in [2, 200]", Qualifier::Empirical)
            .witness("C", 0.5)
            .with_seed(3)
            .conclude(Verdict::Holds);
        let v = c.to_json();
        for key in ["check", "verdict", "witnesses", "counterexamples", "domain", "seed", "qualifier"] {
            assert!(v.get(key).is_some(), "missing {key}");
        }
        assert_eq!(v["verdict"], "holds");
        assert_eq!(v["qualifier"], "empirical");
    }
}
