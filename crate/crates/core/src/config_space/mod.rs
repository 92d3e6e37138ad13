//! Finite configuration spaces: multisets of base states up to a particle cap.
//!
//! Configurations are stored as occupation vectors, which makes the
//! representation canonical. A [`ConfigSpace`] enumerates every configuration
//! with at most `n_max` particles in graded-lexicographic order, so that
//! sector `k` (exactly `k` particles) is a contiguous index range.

mod identities;
mod measure;
mod sample;
pub mod tail;

use std::collections::HashMap;
use std::fmt;
use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::base_space::FiniteBaseSpace;
use crate::error::{Error, Result};
use crate::scalar::Real;

pub use identities::{
    check_laplace, check_mecke, check_star_isometry, mecke_defect_mixture, mixture_second_moment_gap, star,
    GrowthBound, MeckeMode, LAPLACE_MAX_RELATIVE_TAIL, LAPLACE_SUP_GUARD,
};
pub use measure::{mixed_poisson_weights, poisson_config_mass, poisson_weights, ConfigMeasure, LevyMixture, MeasureKind};
pub use sample::{sample_poisson, PoissonSampler};

/// Hard limit on the number of enumerated configurations.
pub const MAX_CONFIGS: usize = 10_000_000;

const NONE: usize = usize::MAX;

/// A finite multiset of base states, as an occupation vector.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Configuration {
    occupation: Vec<u32>,
    total: usize,
}

impl Configuration {
    pub fn empty(n_states: usize) -> Self {
        Self {
            occupation: vec![0; n_states],
            total: 0,
        }
    }

    pub fn from_occupation(occupation: Vec<u32>) -> Self {
        let total = occupation.iter().map(|&c| c as usize).sum();
        Self { occupation, total }
    }

    /// Builds a configuration from a list of particle positions (repeats allowed).
    pub fn from_particles(n_states: usize, particles: &[usize]) -> Result<Self> {
        let mut occupation = vec![0u32; n_states];
        for &x in particles {
            if x >= n_states {
                return Err(Error::Dimension(format!("particle at state {x} of {n_states}")));
            }
            occupation[x] += 1;
        }
        Ok(Self {
            occupation,
            total: particles.len(),
        })
    }

    #[inline]
    pub fn occupation(&self) -> &[u32] {
        &self.occupation
    }

    #[inline]
    pub fn count(&self, x: usize) -> u32 {
        self.occupation[x]
    }

    /// Particle count `γX`.
    #[inline]
    pub fn total(&self) -> usize {
        self.total
    }

    #[inline]
    pub fn n_states(&self) -> usize {
        self.occupation.len()
    }

    /// Particle positions in nondecreasing order, repeated by multiplicity.
    pub fn particles(&self) -> Vec<usize> {
        self.occupation
            .iter()
            .enumerate()
            .flat_map(|(x, &c)| std::iter::repeat_n(x, c as usize))
            .collect()
    }

    /// `γ + δ_x`.
    pub fn plus(&self, x: usize) -> Self {
        let mut next = self.clone();
        next.occupation[x] += 1;
        next.total += 1;
        next
    }

    /// `γ - δ_x`, if `x` is occupied.
    pub fn minus(&self, x: usize) -> Option<Self> {
        if self.occupation[x] == 0 {
            return None;
        }
        let mut next = self.clone();
        next.occupation[x] -= 1;
        next.total -= 1;
        Some(next)
    }

    /// Renders the multiset with the given state labels, e.g. `{a,a,b}`.
    pub fn label(&self, states: &[String]) -> String {
        let parts: Vec<&str> = self.particles().into_iter().map(|x| states[x].as_str()).collect();
        format!("{{{}}}", parts.join(","))
    }
}

impl fmt::Display for Configuration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.occupation)
    }
}

/// `C(n + k - 1, k)` in 128-bit arithmetic, saturating.
pub fn multiset_count(n: usize, k: usize) -> u128 {
    if n == 0 {
        return u128::from(k == 0);
    }
    let mut acc: u128 = 1;
    for i in 1..=k as u128 {
        acc = match acc.checked_mul(n as u128 - 1 + i) {
            Some(v) => v / i,
            None => return u128::MAX,
        };
    }
    acc
}

/// Every configuration over a base space with at most `n_max` particles.
#[derive(Clone, Debug)]
pub struct ConfigSpace<T> {
    base: FiniteBaseSpace<T>,
    n_max: usize,
    configs: Vec<Configuration>,
    index: HashMap<Vec<u32>, usize>,
    sector_ranges: Vec<Range<usize>>,
    add_table: Vec<usize>,
    remove_table: Vec<usize>,
}

/// Enumerates configurations in graded-lexicographic order.
pub fn enumerate<T: Real>(base: &FiniteBaseSpace<T>, n_max: usize) -> Result<ConfigSpace<T>> {
    ConfigSpace::new(base, n_max)
}

impl<T: Real> ConfigSpace<T> {
    pub fn new(base: &FiniteBaseSpace<T>, n_max: usize) -> Result<Self> {
        let n = base.n();
        let mut size: u128 = 0;
        for k in 0..=n_max {
            size = size.saturating_add(multiset_count(n, k));
        }
        if size > MAX_CONFIGS as u128 {
            return Err(Error::TooLarge(size, MAX_CONFIGS));
        }
        let mut configs = Vec::with_capacity(size as usize);
        let mut sector_ranges = Vec::with_capacity(n_max + 1);
        for k in 0..=n_max {
            let start = configs.len();
            push_sector(n, k, &mut configs);
            sector_ranges.push(start..configs.len());
        }
        let index: HashMap<Vec<u32>, usize> =
            configs.iter().enumerate().map(|(i, c)| (c.occupation.clone(), i)).collect();
        let mut add_table = vec![NONE; configs.len() * n];
        let mut remove_table = vec![NONE; configs.len() * n];
        for (i, c) in configs.iter().enumerate() {
            for x in 0..n {
                if c.total < n_max {
                    add_table[i * n + x] = index[&c.plus(x).occupation];
                }
                if let Some(prev) = c.minus(x) {
                    remove_table[i * n + x] = index[&prev.occupation];
                }
            }
        }
        Ok(Self {
            base: base.clone(),
            n_max,
            configs,
            index,
            sector_ranges,
            add_table,
            remove_table,
        })
    }

    pub fn base(&self) -> &FiniteBaseSpace<T> {
        &self.base
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    pub fn n_states(&self) -> usize {
        self.base.n()
    }

    pub fn len(&self) -> usize {
        self.configs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.configs.is_empty()
    }

    pub fn configs(&self) -> &[Configuration] {
        &self.configs
    }

    pub fn config(&self, i: usize) -> &Configuration {
        &self.configs[i]
    }

    pub fn index_of(&self, c: &Configuration) -> Option<usize> {
        self.index.get(&c.occupation).copied()
    }

    pub fn require_index(&self, c: &Configuration) -> Result<usize> {
        if c.n_states() != self.n_states() {
            return Err(Error::Dimension(format!("configuration over {} states", c.n_states())));
        }
        self.index_of(c).ok_or(Error::ExceedsCap {
            total: c.total(),
            n_max: self.n_max,
        })
    }

    pub fn sector_ranges(&self) -> &[Range<usize>] {
        &self.sector_ranges
    }

    pub fn sector(&self, k: usize) -> Range<usize> {
        self.sector_ranges.get(k).cloned().unwrap_or(0..0)
    }

    pub fn sector_of(&self, i: usize) -> usize {
        self.configs[i].total
    }

    /// Index of `γ_i + δ_x`, if it is within the cap.
    #[inline]
    pub fn add_index(&self, i: usize, x: usize) -> Option<usize> {
        let j = self.add_table[i * self.n_states() + x];
        (j != NONE).then_some(j)
    }

    /// Index of `γ_i - δ_x`, if `x` is occupied.
    #[inline]
    pub fn remove_index(&self, i: usize, x: usize) -> Option<usize> {
        let j = self.remove_table[i * self.n_states() + x];
        (j != NONE).then_some(j)
    }

    /// Index of `γ_i - δ_x + δ_y`; always inside the space when `x` is occupied.
    #[inline]
    pub fn move_index(&self, i: usize, x: usize, y: usize) -> Option<usize> {
        let r = self.remove_index(i, x)?;
        if x == y {
            return Some(i);
        }
        self.add_index(r, y)
    }

    /// Values of `f*` on every configuration.
    pub fn star_table(&self, f: &crate::base_space::BaseFunction<T>) -> Vec<T> {
        self.configs.iter().map(|c| star(f, c)).collect()
    }
}

fn push_sector(n: usize, k: usize, out: &mut Vec<Configuration>) {
    // Nondecreasing sequences of length k over 0..n, in lexicographic order.
    let mut seq = vec![0usize; k];
    loop {
        let mut occupation = vec![0u32; n];
        for &x in &seq {
            occupation[x] += 1;
        }
        out.push(Configuration { occupation, total: k });
        let Some(pos) = (0..k).rev().find(|&p| seq[p] + 1 < n) else {
            break;
        };
        let next = seq[pos] + 1;
        for slot in &mut seq[pos..] {
            *slot = next;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::base_space::{build_circle, build_two_state};

    #[test]
    fn two_state_order() {
        let base = build_two_state(1.0_f64).unwrap();
        let cs = enumerate(&base, 2).unwrap();
        let labels: Vec<String> = cs.configs().iter().map(|c| c.label(base.states())).collect();
        assert_eq!(labels, ["{}", "{a}", "{b}", "{a,a}", "{a,b}", "{b,b}"]);
        assert_eq!(cs.sector(2), 3..6);
    }

    #[test]
    fn empty_cap() {
        let base = build_circle(5, 1.0_f64).unwrap();
        let cs = enumerate(&base, 0).unwrap();
        assert_eq!(cs.len(), 1);
        assert_eq!(cs.config(0).total(), 0);
    }

    #[test]
    fn stars_and_bars_count() {
        let base = build_circle(8, 1.0_f64).unwrap();
        let cs = enumerate(&base, 3).unwrap();
        assert_eq!(cs.len(), 165);
        let sizes: Vec<usize> = cs.sector_ranges().iter().map(|r| r.len()).collect();
        assert_eq!(sizes, [1, 8, 36, 120]);
    }

    #[test]
    fn index_is_bijection_and_tables_consistent() {
        let base = build_circle(4, 1.0_f64).unwrap();
        let cs = enumerate(&base, 3).unwrap();
        for (i, c) in cs.configs().iter().enumerate() {
            assert_eq!(cs.index_of(c), Some(i));
            for x in 0..4 {
                match cs.add_index(i, x) {
                    Some(j) => assert_eq!(cs.config(j), &c.plus(x)),
                    None => assert_eq!(c.total(), 3),
                }
                match cs.remove_index(i, x) {
                    Some(j) => assert_eq!(Some(cs.config(j).clone()), c.minus(x)),
                    None => assert_eq!(c.count(x), 0),
                }
            }
        }
    }

    #[test]
    fn size_guard() {
        let base = build_circle(60, 1.0_f64).unwrap();
        assert!(matches!(enumerate(&base, 8), Err(Error::TooLarge(..))));
    }

    #[test]
    fn multiset_count_values() {
        assert_eq!(multiset_count(2, 2), 3);
        assert_eq!(multiset_count(8, 3), 120);
        assert_eq!(multiset_count(0, 0), 1);
        assert_eq!(multiset_count(0, 2), 0);
    }
}
