use rayon::prelude::*;
use serde::Serialize;

use super::distance::{config_matching, ExtendedDistance};
use super::simplex::solve_transport;
use crate::base_space::FiniteBaseSpace;
use crate::config_space::ConfigSpace;
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::scalar::Real;

/// Largest per-sector transport problem solved by default.
pub const DESK_SCALE_LIMIT: usize = 500;

/// Mismatch in sector masses beyond which two configuration measures are at infinite distance.
pub const SECTOR_MASS_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PlanStatus {
    Optimal,
    Infinite,
}

/// Sparse coupling with its squared-distance cost.
#[derive(Clone, Debug, PartialEq)]
pub struct TransportPlan<T> {
    /// `(from, to, mass)` in global indices, sorted.
    pub entries: Vec<(usize, usize, T)>,
    pub cost: T,
    pub status: PlanStatus,
}

impl<T: Real> TransportPlan<T> {
    fn infinite() -> Self {
        Self {
            entries: Vec::new(),
            cost: T::infinity(),
            status: PlanStatus::Infinite,
        }
    }

    /// `W₂`, i.e. the square root of the cost.
    pub fn distance(&self) -> ExtendedDistance<T> {
        match self.status {
            PlanStatus::Optimal => ExtendedDistance::Finite(self.cost.max(T::zero()).sqrt()),
            PlanStatus::Infinite => ExtendedDistance::Infinite,
        }
    }

    pub fn marginals(&self, rows: usize, cols: usize) -> (Vec<T>, Vec<T>) {
        let mut a = vec![T::zero(); rows];
        let mut b = vec![T::zero(); cols];
        for &(i, j, x) in &self.entries {
            a[i] += x;
            b[j] += x;
        }
        (a, b)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("from,to,mass\n");
        for &(i, j, x) in &self.entries {
            s.push_str(&format!("{i},{j},{}\n", x.as_f64()));
        }
        s
    }
}

fn validate_probability<T: Real>(w: &[T], n: usize, what: &str) -> Result<T> {
    if w.len() != n {
        return Err(Error::Dimension(format!("{what} has {} entries, expected {n}", w.len())));
    }
    if let Some(i) = w.iter().position(|&x| !(x >= T::zero()) || !x.is_finite()) {
        return Err(Error::InvalidArgument(format!("{what} entry {i} must be finite and >= 0")));
    }
    Ok(w.iter().copied().sum())
}

fn support<T: Real>(w: &[T]) -> Vec<usize> {
    (0..w.len()).filter(|&i| w[i] > T::zero()).collect()
}

/// Cost and `(i, j, mass)` entries of one sector's coupling.
type SectorCoupling<T> = (T, Vec<(usize, usize, T)>);

/// Solves one transport problem between the supports of `mu` and `nu`
/// (already balanced), mapping indices back through `rows`/`cols`.
fn solve_on_support<T: Real>(
    mu: &[T],
    nu: &[T],
    rows: &[usize],
    cols: &[usize],
    squared_cost: impl Fn(usize, usize) -> Result<T>,
) -> Result<SectorCoupling<T>> {
    // A point mass on either side admits exactly one coupling.
    if rows.len() == 1 || cols.len() == 1 {
        let mut cost = T::zero();
        let mut entries = Vec::new();
        for &i in rows {
            for &j in cols {
                let x = if rows.len() == 1 { nu[j] } else { mu[i] };
                cost += x * squared_cost(i, j)?;
                entries.push((i, j, x));
            }
        }
        return Ok((cost, entries));
    }
    let mut c = Matrix::zeros(rows.len(), cols.len());
    for (a, &i) in rows.iter().enumerate() {
        for (b, &j) in cols.iter().enumerate() {
            c[(a, b)] = squared_cost(i, j)?;
        }
    }
    let supply: Vec<T> = rows.iter().map(|&i| mu[i]).collect();
    let demand: Vec<T> = cols.iter().map(|&j| nu[j]).collect();
    let sol = solve_transport(&supply, &demand, &c)?;
    Ok((sol.cost, sol.flows.into_iter().map(|(a, b, x)| (rows[a], cols[b], x)).collect()))
}

/// Exact `W₂` between probability vectors on the base states.
pub fn wasserstein_base<T: Real>(base: &FiniteBaseSpace<T>, mu: &[T], nu: &[T]) -> Result<TransportPlan<T>> {
    let d = base.require_metric()?;
    let a = validate_probability(mu, base.n(), "source measure")?;
    let b = validate_probability(nu, base.n(), "target measure")?;
    if (a - b).abs() > T::tol(1e-10) {
        return Err(Error::InvalidArgument(format!("unbalanced masses {a} and {b}")));
    }
    let (rows, cols) = (support(mu), support(nu));
    if rows.is_empty() || cols.is_empty() {
        return Ok(TransportPlan {
            entries: Vec::new(),
            cost: T::zero(),
            status: PlanStatus::Optimal,
        });
    }
    let (cost, entries) = solve_on_support(mu, nu, &rows, &cols, |i, j| Ok(d[(i, j)] * d[(i, j)]))?;
    Ok(TransportPlan {
        entries,
        cost,
        status: PlanStatus::Optimal,
    })
}

/// Exact `W₂` between configuration measures, decomposed over sectors.
///
/// Infinite when any sector carries different mass under the two measures.
/// Sectors where both supports exceed `limit` points are refused rather than
/// approximated; a point mass on either side is always solved in closed form.
pub fn wasserstein_config<T: Real>(
    space: &ConfigSpace<T>,
    mu: &[T],
    nu: &[T],
    limit: usize,
) -> Result<TransportPlan<T>> {
    space.base().require_metric()?;
    validate_probability(mu, space.len(), "source measure")?;
    validate_probability(nu, space.len(), "target measure")?;
    let ranges = space.sector_ranges();
    let mut jobs = Vec::new();
    for (k, r) in ranges.iter().enumerate() {
        let a: T = mu[r.clone()].iter().copied().sum();
        let b: T = nu[r.clone()].iter().copied().sum();
        if (a - b).abs().as_f64() > SECTOR_MASS_TOL {
            return Ok(TransportPlan::infinite());
        }
        let rows: Vec<usize> = r.clone().filter(|&i| mu[i] > T::zero()).collect();
        let cols: Vec<usize> = r.clone().filter(|&j| nu[j] > T::zero()).collect();
        if rows.is_empty() || cols.is_empty() {
            continue;
        }
        let size = rows.len().min(cols.len());
        if size > 1 && rows.len().max(cols.len()) > limit {
            return Err(Error::DeskScale {
                size: rows.len().max(cols.len()),
                limit,
            });
        }
        jobs.push((k, a, b, rows, cols));
    }
    let solved: Vec<Result<SectorCoupling<T>>> = jobs
        .par_iter()
        .map(|(_, a, b, rows, cols)| {
            // Balance the target exactly against the source within the sector.
            let ratio = *a / *b;
            let nu_scaled: Vec<T> = nu.iter().map(|&x| x * ratio).collect();
            solve_on_support(mu, &nu_scaled, rows, cols, |i, j| {
                Ok(config_matching(space.base(), space.config(i), space.config(j))?
                    .expect("same sector")
                    .squared_cost)
            })
        })
        .collect();
    let mut cost = T::zero();
    let mut entries = Vec::new();
    for r in solved {
        let (c, e) = r?;
        cost += c;
        entries.extend(e);
    }
    entries.sort_by_key(|e| (e.0, e.1));
    Ok(TransportPlan {
        entries,
        cost,
        status: PlanStatus::Optimal,
    })
}

/// Largest per-sector transport problem `wasserstein_config` would face for
/// measures with full support on sectors `0..=max_total`.
pub fn largest_sector<T: Real>(space: &ConfigSpace<T>, max_total: usize) -> usize {
    space.sector_ranges()[..=max_total.min(space.n_max())]
        .iter()
        .map(|r| r.len())
        .max()
        .unwrap_or(0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::base_space::{build_circle, build_two_state};
    use crate::config_space::{enumerate, poisson_weights, Configuration};
    use crate::transport::distance::config_distance;

    #[test]
    fn base_examples() {
        let two = build_two_state(1.0_f64).unwrap();
        assert_eq!(wasserstein_base(&two, &[1.0, 0.0], &[0.0, 1.0]).unwrap().distance().value(), 1.0);
        assert_eq!(wasserstein_base(&two, &[0.3, 0.7], &[0.3, 0.7]).unwrap().cost, 0.0);
        assert!(wasserstein_base(&two, &[1.0, 0.0], &[0.0, 0.5]).is_err());
        let c = build_circle(8, 1.0_f64).unwrap();
        let mut dirac = vec![0.0; 8];
        dirac[0] = 1.0;
        let plan = wasserstein_base(&c, &dirac, &[0.125; 8]).unwrap();
        let d = c.metric().unwrap();
        let expect: f64 = (0..8).map(|j| d[(0, j)].powi(2)).sum::<f64>() / 8.0;
        assert!((plan.cost - expect).abs() < 1e-14);
    }

    #[test]
    fn config_diracs_match_distance() {
        let base = build_circle(8, 1.0_f64).unwrap();
        let cs = enumerate(&base, 2).unwrap();
        let a = Configuration::from_particles(8, &[0, 2]).unwrap();
        let b = Configuration::from_particles(8, &[1, 3]).unwrap();
        let (i, j) = (cs.index_of(&a).unwrap(), cs.index_of(&b).unwrap());
        let mut mu = vec![0.0; cs.len()];
        let mut nu = vec![0.0; cs.len()];
        mu[i] = 1.0;
        nu[j] = 1.0;
        let w = wasserstein_config(&cs, &mu, &nu, DESK_SCALE_LIMIT).unwrap();
        let d = config_distance(&base, &a, &b).unwrap().value();
        assert!((w.distance().value() - d).abs() < 1e-12);
    }

    #[test]
    fn poisson_intensities_differ_infinitely() {
        let cs = enumerate(&build_two_state(1.0_f64).unwrap(), 6).unwrap();
        let p1 = poisson_weights(&cs, 1.0).unwrap().weights;
        let p2 = poisson_weights(&cs, 2.0).unwrap().weights;
        let w = wasserstein_config(&cs, &p1, &p2, DESK_SCALE_LIMIT).unwrap();
        assert_eq!(w.status, PlanStatus::Infinite);
        let same = wasserstein_config(&cs, &p1, &p1, DESK_SCALE_LIMIT).unwrap();
        assert!(same.cost.abs() < 1e-15);
    }

    #[test]
    fn refuses_above_limit() {
        let cs = enumerate(&build_circle(8, 1.0_f64).unwrap(), 2).unwrap();
        let u = vec![1.0 / cs.len() as f64; cs.len()];
        assert!(matches!(
            wasserstein_config(&cs, &u, &u, 10),
            Err(Error::DeskScale { size: 36, limit: 10 })
        ));
    }

    #[test]
    fn plan_marginals_and_csv() {
        let cs = enumerate(&build_circle(5, 1.0_f64).unwrap(), 2).unwrap();
        let r = cs.sector(2);
        let mut mu = vec![0.0; cs.len()];
        let mut nu = vec![0.0; cs.len()];
        for (k, i) in r.clone().enumerate() {
            mu[i] = (1 + k) as f64;
            nu[i] = (1 + (k * 7) % 5) as f64;
        }
        let sa: f64 = mu.iter().sum();
        let sb: f64 = nu.iter().sum();
        mu.iter_mut().for_each(|x| *x /= sa);
        nu.iter_mut().for_each(|x| *x /= sb);
        let plan = wasserstein_config(&cs, &mu, &nu, DESK_SCALE_LIMIT).unwrap();
        let (a, b) = plan.marginals(cs.len(), cs.len());
        for i in 0..cs.len() {
            assert!((a[i] - mu[i]).abs() < 1e-12);
            assert!((b[i] - nu[i]).abs() < 1e-12);
        }
        assert!(plan.to_csv().starts_with("from,to,mass\n"));
    }
}
