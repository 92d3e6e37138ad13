use std::fmt;

use super::assignment::solve_assignment;
use crate::base_space::FiniteBaseSpace;
use crate::config_space::{ConfigSpace, Configuration};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::report::{DefectReport, MaxTracker};
use crate::scalar::Real;

/// A distance that may be `+∞`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ExtendedDistance<T> {
    Finite(T),
    Infinite,
}

impl<T: Real> ExtendedDistance<T> {
    pub fn is_finite(&self) -> bool {
        matches!(self, ExtendedDistance::Finite(_))
    }

    /// The value, with `+∞` for the infinite case.
    pub fn value(&self) -> T {
        match *self {
            ExtendedDistance::Finite(v) => v,
            ExtendedDistance::Infinite => T::infinity(),
        }
    }

    pub fn finite(&self) -> Option<T> {
        match *self {
            ExtendedDistance::Finite(v) => Some(v),
            ExtendedDistance::Infinite => None,
        }
    }
}

impl<T: Real> fmt::Display for ExtendedDistance<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExtendedDistance::Finite(v) => write!(f, "{v}"),
            ExtendedDistance::Infinite => write!(f, "inf"),
        }
    }
}

/// Optimal particle matching between two configurations of equal size.
#[derive(Clone, Debug, PartialEq)]
pub struct Matching<T> {
    pub squared_cost: T,
    /// `(x, y)` base-state pairs, one per particle.
    pub pairs: Vec<(usize, usize)>,
}

/// Optimal matching under squared base distance, or `None` across sectors.
pub fn config_matching<T: Real>(
    base: &FiniteBaseSpace<T>,
    a: &Configuration,
    b: &Configuration,
) -> Result<Option<Matching<T>>> {
    let d = base.require_metric()?;
    if a.n_states() != base.n() || b.n_states() != base.n() {
        return Err(Error::Dimension("configuration does not match the base space".into()));
    }
    if a.total() != b.total() {
        return Ok(None);
    }
    // Solve in a canonical orientation so that the cost is bitwise symmetric.
    if b.occupation() < a.occupation() {
        return Ok(config_matching(base, b, a)?.map(|m| Matching {
            squared_cost: m.squared_cost,
            pairs: m.pairs.into_iter().map(|(x, y)| (y, x)).collect(),
        }));
    }
    let xs = a.particles();
    let ys = b.particles();
    let k = xs.len();
    let mut cost = Matrix::zeros(k, k);
    for (i, &x) in xs.iter().enumerate() {
        for (j, &y) in ys.iter().enumerate() {
            cost[(i, j)] = d[(x, y)] * d[(x, y)];
        }
    }
    let (squared_cost, m) = solve_assignment(&cost)?;
    Ok(Some(Matching {
        squared_cost,
        pairs: xs.iter().zip(&m).map(|(&x, &j)| (x, ys[j])).collect(),
    }))
}

/// `d_Υ(γ, η)`: `+∞` across sectors, otherwise the root of the optimal
/// assignment cost over squared base distances.
pub fn config_distance<T: Real>(
    base: &FiniteBaseSpace<T>,
    a: &Configuration,
    b: &Configuration,
) -> Result<ExtendedDistance<T>> {
    Ok(match config_matching(base, a, b)? {
        Some(m) => ExtendedDistance::Finite(m.squared_cost.max(T::zero()).sqrt()),
        None => ExtendedDistance::Infinite,
    })
}

/// Squared distances between all configurations of one sector.
pub fn sector_squared_distances<T: Real>(space: &ConfigSpace<T>, k: usize) -> Result<Matrix<T>> {
    let range = space.sector(k);
    let mut out = Matrix::zeros(range.len(), range.len());
    for (a, i) in range.clone().enumerate() {
        for (b, j) in range.clone().enumerate().skip(a) {
            let m = config_matching(space.base(), space.config(i), space.config(j))?
                .expect("same sector");
            out[(a, b)] = m.squared_cost;
            out[(b, a)] = m.squared_cost;
        }
    }
    Ok(out)
}

/// Extended-metric axioms of `d_Υ` over configurations with at most
/// `max_total` particles: identity, symmetry, the triangle inequality on
/// same-sector triples and `+∞` across sectors.
pub fn check_config_metric<T: Real>(space: &ConfigSpace<T>, max_total: usize) -> Result<DefectReport> {
    let base = space.base();
    let top = max_total.min(space.n_max());
    let mut worst = MaxTracker::new();
    let mut triples = 0usize;
    for k in 0..=top {
        let range = space.sector(k);
        let mut d = Matrix::zeros(range.len(), range.len());
        for (a, i) in range.clone().enumerate() {
            for (b, j) in range.clone().enumerate() {
                let dij = config_distance(base, space.config(i), space.config(j))?;
                let Some(v) = dij.finite() else {
                    worst.offer(f64::INFINITY, || format!("same-sector pair at infinite distance in sector {k}"));
                    continue;
                };
                d[(a, b)] = v;
            }
        }
        for a in 0..range.len() {
            worst.offer(d[(a, a)].abs().as_f64(), || format!("identity {}", space.config(range.start + a)));
            for b in 0..range.len() {
                worst.offer((d[(a, b)] - d[(b, a)]).abs().as_f64(), || {
                    format!("symmetry {} {}", space.config(range.start + a), space.config(range.start + b))
                });
                for c in 0..range.len() {
                    triples += 1;
                    let excess = (d[(a, c)] - d[(a, b)] - d[(b, c)]).max(T::zero());
                    worst.offer(excess.as_f64(), || {
                        format!(
                            "triangle {} {} {}",
                            space.config(range.start + a),
                            space.config(range.start + b),
                            space.config(range.start + c)
                        )
                    });
                }
            }
        }
    }
    // Cross-sector pairs: one representative per ordered pair of sectors.
    for k in 0..=top {
        for l in 0..=top {
            if k == l {
                continue;
            }
            let (i, j) = (space.sector(k).start, space.sector(l).start);
            if config_distance(base, space.config(i), space.config(j))?.is_finite() {
                worst.offer(f64::INFINITY, || format!("finite cross-sector distance {k} {l}"));
            }
        }
    }
    Ok(DefectReport::exact("transport.config_metric", worst.defect(), 1e-10, 0.0)
        .with_witness(format!("triples={triples} {}", worst.witness)))
}

/// `d_Υ({x},{y}) = d(x,y)` for every pair of states.
pub fn check_dirac_isometry<T: Real>(base: &FiniteBaseSpace<T>) -> Result<DefectReport> {
    let d = base.require_metric()?;
    let n = base.n();
    let mut worst = MaxTracker::new();
    for x in 0..n {
        for y in 0..n {
            let a = Configuration::from_particles(n, &[x])?;
            let b = Configuration::from_particles(n, &[y])?;
            let dv = config_distance(base, &a, &b)?.value();
            worst.offer((dv - d[(x, y)]).abs().as_f64(), || format!("({x},{y})"));
        }
    }
    Ok(DefectReport::exact("transport.dirac_isometry", worst.defect(), 0.0, 0.0).with_witness(worst.witness))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::base_space::{build_circle, build_two_state};
    use crate::config_space::enumerate;

    fn permutation_oracle(base: &FiniteBaseSpace<f64>, a: &Configuration, b: &Configuration) -> f64 {
        let d = base.metric().unwrap();
        let xs = a.particles();
        let ys = b.particles();
        let mut idx: Vec<usize> = (0..ys.len()).collect();
        let mut best = f64::INFINITY;
        fn rec(k: usize, idx: &mut Vec<usize>, f: &mut dyn FnMut(&[usize])) {
            if k == idx.len() {
                f(idx);
                return;
            }
            for i in k..idx.len() {
                idx.swap(k, i);
                rec(k + 1, idx, f);
                idx.swap(k, i);
            }
        }
        rec(0, &mut idx, &mut |p| {
            let c: f64 = xs.iter().zip(p).map(|(&x, &j)| d[(x, ys[j])].powi(2)).sum();
            best = best.min(c);
        });
        best.sqrt()
    }

    #[test]
    fn examples() {
        let base = build_two_state(1.0_f64).unwrap();
        let e = Configuration::empty(2);
        let a = Configuration::from_particles(2, &[0]).unwrap();
        assert_eq!(config_distance(&base, &e, &a).unwrap(), ExtendedDistance::Infinite);
        let aa = Configuration::from_particles(2, &[0, 0]).unwrap();
        let ab = Configuration::from_particles(2, &[0, 1]).unwrap();
        assert_eq!(config_distance(&base, &aa, &ab).unwrap(), ExtendedDistance::Finite(1.0));
        assert_eq!(config_distance(&base, &e, &e).unwrap(), ExtendedDistance::Finite(0.0));
    }

    #[test]
    fn symmetric_to_the_bit() {
        let base = build_circle(7, 1.0_f64).unwrap();
        let cs = enumerate(&base, 3).unwrap();
        for i in cs.sector(3) {
            for j in cs.sector(3) {
                let a = config_distance(&base, cs.config(i), cs.config(j)).unwrap().value();
                let b = config_distance(&base, cs.config(j), cs.config(i)).unwrap().value();
                assert_eq!(a.to_bits(), b.to_bits());
            }
        }
    }

    #[test]
    fn matches_permutation_oracle() {
        let base = build_circle(8, 1.0_f64).unwrap();
        let cs = enumerate(&base, 3).unwrap();
        let sector = cs.sector(3);
        for i in sector.clone().step_by(7) {
            for j in sector.clone().step_by(5) {
                let got = config_distance(&base, cs.config(i), cs.config(j)).unwrap().value();
                let want = permutation_oracle(&base, cs.config(i), cs.config(j));
                assert!((got - want).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn matching_pairs_realize_cost() {
        let base = build_circle(6, 1.0_f64).unwrap();
        let a = Configuration::from_particles(6, &[0, 1, 3]).unwrap();
        let b = Configuration::from_particles(6, &[2, 4, 5]).unwrap();
        let m = config_matching(&base, &a, &b).unwrap().unwrap();
        let d = base.metric().unwrap();
        let c: f64 = m.pairs.iter().map(|&(x, y)| d[(x, y)].powi(2)).sum();
        assert!((c - m.squared_cost).abs() < 1e-14);
    }

    #[test]
    fn metric_axioms_on_fixtures() {
        for base in [build_two_state(1.0_f64).unwrap(), build_circle(8, 1.0).unwrap()] {
            let cs = enumerate(&base, 3).unwrap();
            let r = check_config_metric(&cs, 3).unwrap();
            assert_eq!(r.pass, Some(true), "{r:?}");
            assert_eq!(check_dirac_isometry(&base).unwrap().max_defect, 0.0);
        }
    }

    #[test]
    fn missing_metric() {
        let b = build_two_state(1.0_f64).unwrap();
        let nometric = FiniteBaseSpace::new(b.states().to_vec(), b.m().to_vec(), b.q().clone(), None).unwrap();
        let a = Configuration::from_particles(2, &[0]).unwrap();
        assert!(matches!(config_distance(&nometric, &a, &a), Err(Error::MissingMetric)));
    }
}
