use std::path::PathBuf;

use crate::base_space::{build_circle, build_two_state, FiniteBaseSpace};
use crate::error::{Error, Result};

/// A named base space plus what is known about it analytically.
#[derive(Clone, Debug)]
pub struct Fixture {
    name: String,
    base: FiniteBaseSpace<f64>,
    /// Curvature used for the gradient-estimate checks; `None` means "use the
    /// bisection estimate".
    declared_curvature: Option<f64>,
    /// Closed-form best gradient-estimate constant (c = 1), when known.
    analytic_curvature: Option<f64>,
    /// Whether the fixture carries a transitive symmetry, so that kernel
    /// contraction with `c ≡ 1` is exact.
    translation_invariant: bool,
}

impl Fixture {
    pub fn two_state(rate: f64) -> Result<Self> {
        Ok(Self {
            name: format!("two_state:rate={rate}"),
            base: build_two_state(rate)?,
            declared_curvature: None,
            analytic_curvature: Some(2.0 * rate),
            translation_invariant: true,
        })
    }

    pub fn circle(n: usize, rate: f64) -> Result<Self> {
        Ok(Self {
            name: format!("circle:n={n},rate={rate}"),
            base: build_circle(n, rate)?,
            declared_curvature: Some(0.0),
            analytic_curvature: None,
            translation_invariant: true,
        })
    }

    pub fn custom(name: impl Into<String>, base: FiniteBaseSpace<f64>) -> Self {
        Self {
            name: name.into(),
            base,
            declared_curvature: None,
            analytic_curvature: None,
            translation_invariant: false,
        }
    }

    /// Parses `two_state[:rate=R]`, `circle:n=N[,rate=R]` or `custom:PATH`.
    pub fn parse(spec: &str) -> Result<Self> {
        let (kind, rest) = spec.split_once(':').unwrap_or((spec, ""));
        match kind {
            "custom" => {
                if rest.is_empty() {
                    return Err(Error::InvalidArgument("custom fixture needs a path".into()));
                }
                let path = PathBuf::from(rest);
                let text = std::fs::read_to_string(&path).map_err(|source| Error::Io {
                    path: path.display().to_string(),
                    source,
                })?;
                Ok(Self::custom(format!("custom:{rest}"), FiniteBaseSpace::from_json(&text)?))
            }
            "two_state" | "circle" => {
                let mut rate = 1.0;
                let mut n = None;
                for part in rest.split(',').filter(|p| !p.is_empty()) {
                    let (key, value) = part
                        .split_once('=')
                        .ok_or_else(|| Error::InvalidArgument(format!("fixture parameter '{part}' is not key=value")))?;
                    match key {
                        "rate" => {
                            rate = value
                                .parse()
                                .map_err(|_| Error::InvalidArgument(format!("bad rate '{value}'")))?
                        }
                        "n" if kind == "circle" => {
                            n = Some(value.parse().map_err(|_| Error::InvalidArgument(format!("bad n '{value}'")))?)
                        }
                        _ => return Err(Error::InvalidArgument(format!("unknown {kind} parameter '{key}'"))),
                    }
                }
                if kind == "two_state" {
                    Self::two_state(rate)
                } else {
                    let n = n.ok_or_else(|| Error::InvalidArgument("circle fixture needs n".into()))?;
                    Self::circle(n, rate)
                }
            }
            other => Err(Error::InvalidArgument(format!("unknown fixture '{other}'"))),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn base(&self) -> &FiniteBaseSpace<f64> {
        &self.base
    }

    pub fn declared_curvature(&self) -> Option<f64> {
        self.declared_curvature
    }

    pub fn analytic_curvature(&self) -> Option<f64> {
        self.analytic_curvature
    }

    pub fn translation_invariant(&self) -> bool {
        self.translation_invariant
    }
}
