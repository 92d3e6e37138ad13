use serde::{Deserialize, Serialize};

use super::tail;
use super::{ConfigSpace, Configuration};
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Where a configuration measure came from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum MeasureKind {
    Poisson { s: f64 },
    Mixed { atoms: Vec<(f64, f64)> },
    KernelRow { config: Vec<u32>, t: f64 },
    Custom,
}

/// Nonnegative weights over an enumerated configuration space plus an upper
/// bound on the mass the enumeration cannot see.
#[derive(Clone, Debug, PartialEq)]
pub struct ConfigMeasure<T> {
    pub weights: Vec<T>,
    pub tail: T,
    pub kind: MeasureKind,
}

impl<T: Real> ConfigMeasure<T> {
    pub fn custom(weights: Vec<T>) -> Result<Self> {
        if let Some(i) = weights.iter().position(|&w| !(w >= T::zero()) || !w.is_finite()) {
            return Err(Error::InvalidArgument(format!("measure weight {i} must be finite and >= 0")));
        }
        Ok(Self {
            weights,
            tail: T::zero(),
            kind: MeasureKind::Custom,
        })
    }

    pub fn dirac(space: &ConfigSpace<T>, i: usize) -> Self {
        let mut weights = vec![T::zero(); space.len()];
        weights[i] = T::one();
        Self {
            weights,
            tail: T::zero(),
            kind: MeasureKind::Custom,
        }
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn total_mass(&self) -> T {
        self.weights.iter().copied().sum()
    }

    pub fn sector_masses(&self, space: &ConfigSpace<T>) -> Vec<T> {
        space
            .sector_ranges()
            .iter()
            .map(|r| self.weights[r.clone()].iter().copied().sum())
            .collect()
    }

    /// Intensity scaling of a Poisson measure, if that is what this is.
    pub fn poisson_intensity(&self) -> Option<T> {
        match self.kind {
            MeasureKind::Poisson { s } => Some(T::lit(s)),
            _ => None,
        }
    }

    /// The measure conditioned on sector `k` and renormalized.
    pub fn conditioned_on_sector(&self, space: &ConfigSpace<T>, k: usize) -> Result<Self> {
        let range = space.sector(k);
        let mass: T = self.weights[range.clone()].iter().copied().sum();
        if !(mass > T::zero()) {
            return Err(Error::InvalidArgument(format!("sector {k} carries no mass")));
        }
        let mut weights = vec![T::zero(); self.len()];
        for i in range {
            weights[i] = self.weights[i] / mass;
        }
        Ok(Self {
            weights,
            tail: T::zero(),
            kind: MeasureKind::Custom,
        })
    }

    /// CSV with one column per state (occupation counts) and a final weight column.
    pub fn to_csv(&self, space: &ConfigSpace<T>) -> String {
        let mut out = String::new();
        for s in space.base().states() {
            out.push_str(&format!("n_{s},"));
        }
        out.push_str("weight\n");
        for (c, w) in space.configs().iter().zip(&self.weights) {
            for &k in c.occupation() {
                out.push_str(&format!("{k},"));
            }
            out.push_str(&format!("{}\n", w.as_f64()));
        }
        out
    }
}

/// Finite atomic intensity mixture `Σ_j w_j δ_{s_j}`.
#[derive(Clone, Debug, PartialEq)]
pub struct LevyMixture<T> {
    atoms: Vec<(T, T)>,
}

impl<T: Real> LevyMixture<T> {
    pub fn new(atoms: Vec<(T, T)>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::InvalidArgument("empty intensity mixture".into()));
        }
        for (j, &(s, w)) in atoms.iter().enumerate() {
            if !(s > T::zero()) || !(w > T::zero()) || !s.is_finite() || !w.is_finite() {
                return Err(Error::InvalidArgument(format!("mixture atom {j} needs s > 0 and w > 0")));
            }
            if atoms[..j].iter().any(|&(other, _)| other == s) {
                return Err(Error::InvalidArgument(format!("repeated mixture intensity {s}")));
            }
        }
        let total: T = atoms.iter().map(|&(_, w)| w).sum();
        if (total - T::one()).abs() > T::tol(1e-12) {
            return Err(Error::InvalidArgument(format!("mixture weights sum to {total}, not 1")));
        }
        Ok(Self { atoms })
    }

    pub fn dirac(s: T) -> Result<Self> {
        Self::new(vec![(s, T::one())])
    }

    pub fn atoms(&self) -> &[(T, T)] {
        &self.atoms
    }

    /// `Σ_j w_j s_j`.
    pub fn mean_intensity(&self) -> T {
        self.atoms.iter().map(|&(s, w)| s * w).sum()
    }

    /// `Σ_j w_j s_j² - (Σ_j w_j s_j)²`.
    pub fn intensity_variance(&self) -> T {
        let m = self.mean_intensity();
        self.atoms.iter().map(|&(s, w)| w * (s - m) * (s - m)).sum()
    }
}

/// `e^{-s m(X)} Π_x (s m_x)^{γ_x} / γ_x!` for a single configuration.
pub fn poisson_config_mass<T: Real>(m: &[T], s: T, c: &Configuration) -> T {
    let total: T = m.iter().copied().sum();
    let mut mass = (-(s * total)).exp();
    for (&mx, &k) in m.iter().zip(c.occupation()) {
        let lambda = s * mx;
        for j in 1..=k {
            mass *= lambda / T::of_usize(j as usize);
        }
    }
    mass
}

/// Poisson measure `π_{s·m}` on the enumeration with its upper-tail bound.
pub fn poisson_weights<T: Real>(space: &ConfigSpace<T>, s: T) -> Result<ConfigMeasure<T>> {
    if !(s > T::zero()) || !s.is_finite() {
        return Err(Error::InvalidArgument(format!("Poisson intensity scaling must be positive, got {s}")));
    }
    let m = space.base().m();
    let weights = space.configs().iter().map(|c| poisson_config_mass(m, s, c)).collect();
    let mean = (s * space.base().total_mass()).as_f64();
    Ok(ConfigMeasure {
        weights,
        tail: T::lit(tail::upper_tail(mean, space.n_max())),
        kind: MeasureKind::Poisson { s: s.as_f64() },
    })
}

/// Mixed Poisson measure `Σ_j w_j π_{s_j·m}`.
pub fn mixed_poisson_weights<T: Real>(space: &ConfigSpace<T>, mixture: &LevyMixture<T>) -> Result<ConfigMeasure<T>> {
    let mut weights = vec![T::zero(); space.len()];
    let mut tail = T::zero();
    for &(s, w) in mixture.atoms() {
        let p = poisson_weights(space, s)?;
        for (acc, &v) in weights.iter_mut().zip(&p.weights) {
            *acc += w * v;
        }
        tail += w * p.tail;
    }
    Ok(ConfigMeasure {
        weights,
        tail,
        kind: MeasureKind::Mixed {
            atoms: mixture.atoms().iter().map(|&(s, w)| (s.as_f64(), w.as_f64())).collect(),
        },
    })
}
