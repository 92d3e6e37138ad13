//! Per-check verdicts.
//!
//! Every check in the crate produces a [`DefectReport`]: the largest violation
//! it saw, where it saw it, and the tolerance it was held to. Exact-tier checks
//! carry a verdict; asymptotic-tier checks only carry the defect, which is later
//! fed into refinement studies.

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tier {
    /// Holds for any Markov lifting, up to rounding and reported truncation.
    Exact,
    /// Needs the chain rule; only approached under mesh refinement.
    Asymptotic,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Expectation {
    Holds,
    /// Negative control: the inequality must fail by at least `margin`.
    Violated { margin: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Pass,
    Fail,
    DefectOnly,
    Refused,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DefectReport {
    pub check_id: String,
    pub fixture: String,
    pub tier: Tier,
    #[serde(with = "ext_float")]
    pub max_defect: f64,
    pub witness: String,
    #[serde(with = "ext_float")]
    pub tolerance: f64,
    #[serde(with = "ext_float")]
    pub tail_bound: f64,
    pub pass: Option<bool>,
    pub seed: u64,
    pub expectation: Expectation,
    pub refused: Option<String>,
}

impl DefectReport {
    pub fn exact(check_id: impl Into<String>, max_defect: f64, tolerance: f64, tail_bound: f64) -> Self {
        let pass = max_defect <= tolerance + tail_bound;
        Self {
            check_id: check_id.into(),
            fixture: String::new(),
            tier: Tier::Exact,
            max_defect,
            witness: String::new(),
            tolerance,
            tail_bound,
            pass: Some(pass),
            seed: 0,
            expectation: Expectation::Holds,
            refused: None,
        }
    }

    pub fn asymptotic(check_id: impl Into<String>, max_defect: f64) -> Self {
        Self {
            check_id: check_id.into(),
            fixture: String::new(),
            tier: Tier::Asymptotic,
            max_defect,
            witness: String::new(),
            tolerance: 0.0,
            tail_bound: 0.0,
            pass: None,
            seed: 0,
            expectation: Expectation::Holds,
            refused: None,
        }
    }

    pub fn refused(check_id: impl Into<String>, reason: impl Into<String>) -> Self {
        Self {
            check_id: check_id.into(),
            fixture: String::new(),
            tier: Tier::Exact,
            max_defect: f64::NAN,
            witness: String::new(),
            tolerance: 0.0,
            tail_bound: 0.0,
            pass: None,
            seed: 0,
            expectation: Expectation::Holds,
            refused: Some(reason.into()),
        }
    }

    pub fn with_witness(mut self, witness: impl Into<String>) -> Self {
        self.witness = witness.into();
        self
    }

    pub fn with_fixture(mut self, fixture: impl Into<String>) -> Self {
        self.fixture = fixture.into();
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_check_id(mut self, check_id: impl Into<String>) -> Self {
        self.check_id = check_id.into();
        self
    }

    /// Replaces the tolerance of an exact-tier report and recomputes its verdict.
    pub fn with_tolerance(mut self, tolerance: f64) -> Self {
        if self.tier == Tier::Exact && self.refused.is_none() {
            self.tolerance = tolerance;
            self.pass = Some(self.max_defect <= tolerance + self.tail_bound);
        }
        self
    }

    /// Marks the report as a negative control that must fail by `margin`.
    pub fn expect_violation(mut self, margin: f64) -> Self {
        self.expectation = Expectation::Violated { margin };
        self
    }

    pub fn outcome(&self) -> Outcome {
        if self.refused.is_some() {
            return Outcome::Refused;
        }
        match (self.pass, self.expectation) {
            (None, _) => Outcome::DefectOnly,
            (Some(true), Expectation::Holds) => Outcome::Pass,
            (Some(false), Expectation::Holds) => Outcome::Fail,
            (Some(held), Expectation::Violated { margin }) => {
                if !held && self.max_defect >= margin {
                    Outcome::Pass
                } else {
                    Outcome::Fail
                }
            }
        }
    }

    pub fn is_failure(&self) -> bool {
        self.outcome() == Outcome::Fail
    }
}

/// JSON has no infinities or NaN; those are written as the strings
/// `"inf"`, `"-inf"` and `"nan"`.
pub mod ext_float {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else if v.is_nan() {
            s.serialize_str("nan")
        } else if *v > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_str("-inf")
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Text(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(v),
            Repr::Text(t) => match t.as_str() {
                "inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                "nan" => Ok(f64::NAN),
                other => Err(serde::de::Error::custom(format!("not a number: {other}"))),
            },
        }
    }
}

/// Running maximum with the location that produced it.
#[derive(Clone, Debug)]
pub(crate) struct MaxTracker {
    pub value: f64,
    pub witness: String,
}

impl MaxTracker {
    pub fn new() -> Self {
        Self {
            value: f64::NEG_INFINITY,
            witness: String::new(),
        }
    }

    pub fn offer(&mut self, value: f64, witness: impl FnOnce() -> String) {
        if value > self.value || (value.is_nan() && !self.value.is_nan()) {
            self.value = value;
            self.witness = witness();
        }
    }

    /// Defect value, with an empty search reported as zero.
    pub fn defect(&self) -> f64 {
        if self.value == f64::NEG_INFINITY {
            0.0
        } else {
            self.value
        }
    }
}
