//! Experiment configuration: the JSON document behind `--config`, and the
//! flags that override it.

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use configlab::verify::{STUDY_IDS, SuiteOptions};
use configlab::{Fixture, Suite};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FixtureSpec {
    TwoState {
        #[serde(default = "one")]
        rate: f64,
    },
    Circle {
        n: usize,
        #[serde(default = "one")]
        rate: f64,
    },
    Custom {
        path: PathBuf,
    },
}

fn one() -> f64 {
    1.0
}

impl FixtureSpec {
    pub fn build(&self) -> Result<Fixture> {
        Ok(match self {
            FixtureSpec::TwoState { rate } => Fixture::two_state(*rate)?,
            FixtureSpec::Circle { n, rate } => Fixture::circle(*n, *rate)?,
            FixtureSpec::Custom { path } => Fixture::parse(&format!("custom:{}", path.display()))?,
        })
    }
}

/// Accepts the same shorthand as the core fixture parser:
/// `two_state[:rate=R]`, `circle:n=N[,rate=R]`, `custom:PATH`.
impl FromStr for FixtureSpec {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self> {
        let (kind, rest) = s.split_once(':').unwrap_or((s, ""));
        if kind == "custom" {
            if rest.is_empty() {
                return Err(CliError::Config("custom fixture needs a path".into()));
            }
            return Ok(FixtureSpec::Custom { path: rest.into() });
        }
        let mut rate = 1.0;
        let mut n = None;
        for part in rest.split(',').filter(|p| !p.is_empty()) {
            let (key, value) = part
                .split_once('=')
                .ok_or_else(|| CliError::Config(format!("fixture parameter '{part}' is not key=value")))?;
            match key {
                "rate" => rate = parse_num(value, "rate")?,
                "n" if kind == "circle" => n = Some(parse_num(value, "n")?),
                _ => return Err(CliError::Config(format!("unknown {kind} parameter '{key}'"))),
            }
        }
        match kind {
            "two_state" => Ok(FixtureSpec::TwoState { rate }),
            "circle" => Ok(FixtureSpec::Circle {
                n: n.ok_or_else(|| CliError::Config("circle fixture needs n".into()))?,
                rate,
            }),
            other => Err(CliError::Config(format!("unknown fixture '{other}'"))),
        }
    }
}

impl fmt::Display for FixtureSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FixtureSpec::TwoState { rate } => write!(f, "two_state:rate={rate}"),
            FixtureSpec::Circle { n, rate } => write!(f, "circle:n={n},rate={rate}"),
            FixtureSpec::Custom { path } => write!(f, "custom:{}", path.display()),
        }
    }
}

fn parse_num<N: FromStr>(value: &str, what: &str) -> Result<N> {
    value
        .trim()
        .parse()
        .map_err(|_| CliError::Config(format!("bad {what} '{value}'")))
}

/// One atom `weight · δ_s` of the intensity mixture.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LevyAtom {
    pub s: f64,
    pub weight: f64,
}

impl FromStr for LevyAtom {
    type Err = CliError;

    /// `S:W`, e.g. `2:0.5`.
    fn from_str(text: &str) -> Result<Self> {
        let (s, w) = text
            .split_once(':')
            .ok_or_else(|| CliError::Config(format!("levy atom '{text}' is not s:weight")))?;
        Ok(LevyAtom {
            s: parse_num(s, "levy intensity")?,
            weight: parse_num(w, "levy weight")?,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub fixture: FixtureSpec,
    pub n_max: usize,
    /// Poisson intensity scaling of the reference measure.
    pub s: f64,
    /// Intensity mixture for the mixed-Poisson checks.
    pub levy: Vec<LevyAtom>,
    pub t_grid: Vec<f64>,
    /// Suite names, or `all`.
    pub suites: Vec<String>,
    /// Refinement studies to attach to the report.
    #[serde(default)]
    pub studies: Vec<String>,
    /// Exact-tier tolerance overrides by check id.
    #[serde(default)]
    pub tolerances: BTreeMap<String, f64>,
    pub seed: u64,
    pub threads: usize,
    /// Sampled functions per family.
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default = "default_mc_samples")]
    pub mc_samples: usize,
    #[serde(default)]
    pub output: Option<PathBuf>,
}

fn default_samples() -> usize {
    SuiteOptions::default().samples
}

fn default_mc_samples() -> usize {
    SuiteOptions::default().mc_samples
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let o = SuiteOptions::default();
        Self {
            fixture: FixtureSpec::TwoState { rate: 1.0 },
            n_max: o.n_max,
            s: o.s,
            levy: o.mixture.iter().map(|&(s, weight)| LevyAtom { s, weight }).collect(),
            t_grid: o.t_grid,
            suites: vec!["all".into()],
            studies: Vec::new(),
            tolerances: BTreeMap::new(),
            seed: o.seed,
            threads: 1,
            samples: o.samples,
            mc_samples: o.mc_samples,
            output: None,
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| CliError::Config(format!("invalid experiment config: {e}")))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(configlab::verify::canonical_json(self)?)
    }

    pub fn suite_list(&self) -> Result<Vec<Suite>> {
        Ok(Suite::parse_list(&self.suites)?)
    }

    pub fn study_list(&self) -> Result<Vec<&'static str>> {
        let mut out = Vec::new();
        for name in &self.studies {
            match name.as_str() {
                "all" => out.extend(STUDY_IDS),
                other => out.push(
                    STUDY_IDS
                        .into_iter()
                        .find(|id| *id == other)
                        .ok_or_else(|| CliError::Config(format!("unknown study '{other}'")))?,
                ),
            }
        }
        out.sort_unstable();
        out.dedup();
        Ok(out)
    }

    pub fn suite_options(&self) -> SuiteOptions {
        SuiteOptions {
            n_max: self.n_max,
            s: self.s,
            mixture: self.levy.iter().map(|a| (a.s, a.weight)).collect(),
            t_grid: self.t_grid.clone(),
            samples: self.samples,
            mc_samples: self.mc_samples,
            seed: self.seed,
            tolerances: self.tolerances.clone(),
            ..SuiteOptions::default()
        }
    }

    /// Everything that can be checked without building the fixture.
    pub fn validate(&self) -> Result<()> {
        if self.threads == 0 {
            return Err(CliError::Config("threads must be at least 1".into()));
        }
        self.suite_list()?;
        self.study_list()?;
        self.suite_options().validate()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixture_shorthand_round_trips() {
        for s in ["two_state:rate=1", "circle:n=8,rate=0.5", "custom:/tmp/base.json"] {
            assert_eq!(s.parse::<FixtureSpec>().unwrap().to_string(), s);
        }
        assert_eq!(
            "circle:n=8".parse::<FixtureSpec>().unwrap(),
            FixtureSpec::Circle { n: 8, rate: 1.0 }
        );
        assert!("circle".parse::<FixtureSpec>().is_err());
        assert!("torus:n=3".parse::<FixtureSpec>().is_err());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let mut v = serde_json::to_value(ExperimentConfig::default()).unwrap();
        v["colour"] = serde_json::json!("red");
        assert!(ExperimentConfig::from_json(&v.to_string()).is_err());
    }

    #[test]
    fn t_grid_must_ascend() {
        let c = ExperimentConfig {
            t_grid: vec![1.0, 0.5],
            ..ExperimentConfig::default()
        };
        assert!(c.validate().is_err());
    }

    #[test]
    fn levy_atoms_parse() {
        assert_eq!("2:0.5".parse::<LevyAtom>().unwrap(), LevyAtom { s: 2.0, weight: 0.5 });
        assert!("2".parse::<LevyAtom>().is_err());
    }
}
