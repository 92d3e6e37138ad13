//! Verification suites over a fixture, plus refinement studies.
//!
//! Suites are independent jobs run on a bounded rayon pool. Every job is
//! deterministic in the seed, and the merged report is sorted by check id, so
//! the output does not depend on the thread count.

mod fixture;
mod structure;
mod studies;
mod suites;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::base_space::{best_be_constant, default_base_samples, BEResult, BaseFunction};
use crate::config_space::{enumerate, poisson_weights, ConfigMeasure, ConfigSpace, LevyMixture};
use crate::error::{Error, Result};
use crate::report::{DefectReport, Outcome, Tier};
use crate::transport::DESK_SCALE_LIMIT;

pub use fixture::Fixture;
pub use structure::suite_irreducibility;
pub use studies::{
    default_levels, fitted_order, run_convergence_study, ConvergenceStudy, StudyCriterion, STUDY_IDS,
    STUDY_TRANSPORT_LIMIT,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Suite {
    Identities,
    Measures,
    Be,
    Mixed,
    Transport,
    Kwc,
    Entropy,
    Structure,
    LogHarnack,
}

impl Suite {
    pub const ALL: [Suite; 9] = [
        Suite::Identities,
        Suite::Measures,
        Suite::Be,
        Suite::Mixed,
        Suite::Transport,
        Suite::Kwc,
        Suite::Entropy,
        Suite::Structure,
        Suite::LogHarnack,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Identities => "identities",
            Suite::Measures => "measures",
            Suite::Be => "be",
            Suite::Mixed => "mixed",
            Suite::Transport => "transport",
            Suite::Kwc => "kwc",
            Suite::Entropy => "entropy",
            Suite::Structure => "structure",
            Suite::LogHarnack => "log_harnack",
        }
    }

    /// Parses a list of suite names; `all` expands to every suite. The result
    /// is sorted and free of duplicates.
    pub fn parse_list<S: AsRef<str>>(names: &[S]) -> Result<Vec<Suite>> {
        let mut out = Vec::new();
        for name in names {
            match name.as_ref() {
                "all" => out.extend(Suite::ALL),
                other => out.push(other.parse()?),
            }
        }
        if out.is_empty() {
            return Err(Error::InvalidArgument("no suites requested".into()));
        }
        out.sort();
        out.dedup();
        Ok(out)
    }
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Suite::ALL
            .into_iter()
            .find(|x| x.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown suite '{s}'")))
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuiteOptions {
    pub n_max: usize,
    /// Poisson intensity scaling `s` for `π_{s·m}`.
    pub s: f64,
    /// `(s_j, w_j)` atoms of the intensity mixture.
    pub mixture: Vec<(f64, f64)>,
    pub t_grid: Vec<f64>,
    /// Sampled functions per family.
    pub samples: usize,
    pub mc_samples: usize,
    pub seed: u64,
    /// Constant `c` in the gradient estimate.
    pub c: f64,
    pub desk_limit: usize,
    /// Tolerance overrides by check id, exact tier only.
    pub tolerances: BTreeMap<String, f64>,
}

impl Default for SuiteOptions {
    fn default() -> Self {
        Self {
            n_max: 2,
            s: 1.0,
            mixture: vec![(1.0, 0.5), (2.0, 0.5)],
            t_grid: vec![0.1, 0.5, 1.0, 2.0],
            samples: 32,
            mc_samples: 1_000_000,
            seed: 7,
            c: 1.0,
            desk_limit: DESK_SCALE_LIMIT,
            tolerances: BTreeMap::new(),
        }
    }
}

impl SuiteOptions {
    pub fn validate(&self) -> Result<()> {
        if self.t_grid.is_empty() {
            return Err(Error::InvalidArgument("t_grid is empty".into()));
        }
        if self.t_grid.iter().any(|t| !(*t > 0.0) || !t.is_finite()) {
            return Err(Error::InvalidArgument("t_grid must be positive and finite".into()));
        }
        if self.t_grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidArgument("t_grid must be strictly ascending".into()));
        }
        if !(self.s > 0.0) || !self.s.is_finite() {
            return Err(Error::InvalidArgument(format!("intensity s must be positive, got {}", self.s)));
        }
        if self.samples == 0 {
            return Err(Error::InvalidArgument("samples must be at least 1".into()));
        }
        if !(self.c >= 1.0) || !self.c.is_finite() {
            return Err(Error::InvalidArgument(format!("c must be >= 1, got {}", self.c)));
        }
        if let Some((id, t)) = self.tolerances.iter().find(|(_, t)| !(**t >= 0.0)) {
            return Err(Error::InvalidArgument(format!("tolerance for {id} must be >= 0, got {t}")));
        }
        LevyMixture::new(self.mixture.clone())?;
        Ok(())
    }
}

/// Shared, read-only inputs of every suite.
pub(crate) struct Context<'a> {
    pub fixture: &'a Fixture,
    pub opts: &'a SuiteOptions,
    pub space: ConfigSpace<f64>,
    pub pi: ConfigMeasure<f64>,
    pub base_samples: Vec<BaseFunction<f64>>,
    pub be: BEResult,
    /// Curvature used by the gradient-estimate, log-Harnack and EVI checks:
    /// declared, else analytic, else the bisection estimate.
    pub k_check: f64,
}

impl<'a> Context<'a> {
    fn new(fixture: &'a Fixture, opts: &'a SuiteOptions) -> Result<Self> {
        let base = fixture.base();
        let space = enumerate(base, opts.n_max)?;
        let pi = poisson_weights(&space, opts.s)?;
        let base_samples = default_base_samples(base.n(), opts.samples, opts.seed);
        let be = best_be_constant(base, opts.c, &opts.t_grid, &base_samples)?;
        let k_check = fixture
            .declared_curvature()
            .or(fixture.analytic_curvature())
            .unwrap_or(be.k_best);
        Ok(Self {
            fixture,
            opts,
            space,
            pi,
            base_samples,
            be,
            k_check,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    #[serde(flatten)]
    pub report: DefectReport,
    pub outcome: Outcome,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub version: String,
    pub fixture: String,
    pub seed: u64,
    /// Echo of the configuration that produced the report.
    pub config: serde_json::Value,
    pub suites: Vec<Suite>,
    pub checks: Vec<CheckResult>,
    pub studies: Vec<ConvergenceStudy>,
    /// Only present when timing was requested, so that reports stay reproducible.
    pub wall_clock_seconds: Option<f64>,
}

impl SuiteReport {
    pub fn count(&self, outcome: Outcome) -> usize {
        self.checks.iter().filter(|c| c.outcome == outcome).count()
    }

    /// Exact-tier passes, counting negative controls that failed as required.
    pub fn exact_passes(&self) -> usize {
        self.checks
            .iter()
            .filter(|c| c.report.tier == Tier::Exact && c.outcome == Outcome::Pass)
            .count()
    }

    pub fn has_failure(&self) -> bool {
        self.count(Outcome::Fail) > 0 || self.studies.iter().any(|s| !s.pass)
    }

    /// 0 when every verdict passes, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        i32::from(self.has_failure())
    }

    /// Pretty JSON with keys sorted and shortest round-trip floats.
    pub fn to_canonical_json(&self) -> Result<String> {
        canonical_json(self)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// Serializes through `serde_json::Value`, whose maps are ordered by key.
pub fn canonical_json<S: Serialize>(value: &S) -> Result<String> {
    let v = serde_json::to_value(value)?;
    let mut s = serde_json::to_string_pretty(&v)?;
    s.push('\n');
    Ok(s)
}

fn run_suite(suite: Suite, cx: &Context) -> Result<Vec<DefectReport>> {
    match suite {
        Suite::Identities => suites::identities(cx),
        Suite::Measures => suites::measures(cx),
        Suite::Be => suites::be(cx),
        Suite::Mixed => suites::mixed(cx),
        Suite::Transport => suites::transport(cx),
        Suite::Kwc => suites::kwc(cx),
        Suite::Entropy => suites::entropy(cx),
        Suite::Structure => suites::structure(cx),
        Suite::LogHarnack => suites::log_harnack(cx),
    }
}

/// Runs `suites` on `fixture` with a pool of `threads` workers and merges the
/// reports by check id. Refusals that make a whole run meaningless, such as a
/// transport problem beyond desk scale, surface as errors.
pub fn run_suites(fixture: &Fixture, suites: &[Suite], opts: &SuiteOptions, threads: usize) -> Result<SuiteReport> {
    opts.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .map_err(|e| Error::Numerical(format!("cannot start worker pool: {e}")))?;
    let mut reports = pool.install(|| -> Result<Vec<DefectReport>> {
        let cx = Context::new(fixture, opts)?;
        let parts = suites
            .par_iter()
            .map(|&s| run_suite(s, &cx))
            .collect::<Result<Vec<_>>>()?;
        Ok(parts.into_iter().flatten().collect())
    })?;
    reports.sort_by(|a, b| a.check_id.cmp(&b.check_id));
    if let Some(w) = reports.windows(2).find(|w| w[0].check_id == w[1].check_id) {
        return Err(Error::Numerical(format!("check id {} reported twice", w[0].check_id)));
    }
    let checks = reports
        .into_iter()
        .map(|r| {
            let mut r = r.with_fixture(fixture.name());
            if r.seed == 0 {
                r = r.with_seed(opts.seed);
            }
            if let Some(&tol) = opts.tolerances.get(&r.check_id) {
                r = r.with_tolerance(tol);
            }
            CheckResult {
                outcome: r.outcome(),
                report: r,
            }
        })
        .collect();
    let mut sorted = suites.to_vec();
    sorted.sort();
    sorted.dedup();
    Ok(SuiteReport {
        version: env!("CARGO_PKG_VERSION").to_string(),
        fixture: fixture.name().to_string(),
        seed: opts.seed,
        config: serde_json::to_value(opts)?,
        suites: sorted,
        checks,
        studies: Vec::new(),
        wall_clock_seconds: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_names_round_trip() {
        for s in Suite::ALL {
            assert_eq!(s.name().parse::<Suite>().unwrap(), s);
        }
        assert_eq!(Suite::parse_list(&["all"]).unwrap().len(), 9);
        assert_eq!(Suite::parse_list(&["kwc", "be", "kwc"]).unwrap(), vec![Suite::Be, Suite::Kwc]);
        assert!(Suite::parse_list(&["nope"]).is_err());
        assert!(Suite::parse_list::<&str>(&[]).is_err());
    }

    #[test]
    fn options_validation() {
        assert!(SuiteOptions::default().validate().is_ok());
        let bad = SuiteOptions {
            t_grid: vec![1.0, 0.5],
            ..SuiteOptions::default()
        };
        assert!(bad.validate().is_err());
        let bad = SuiteOptions {
            mixture: vec![(1.0, 0.3)],
            ..SuiteOptions::default()
        };
        assert!(bad.validate().is_err());
    }
}
