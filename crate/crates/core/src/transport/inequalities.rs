use super::distance::config_distance;
use super::entropy::relative_entropy;
use super::wasserstein::wasserstein_config;
use crate::config_space::{ConfigSpace, Configuration};
use crate::error::{Error, Result};
use crate::lift::LiftedKernel;
use crate::report::{DefectReport, MaxTracker};
use crate::scalar::{i_k, Real};

/// Forward-difference steps, as fractions of `t`, for upper-right derivatives.
pub const EVI_STEP_FRACTIONS: [f64; 3] = [1e-2, 5e-3, 2.5e-3];

/// Kernel Wasserstein contraction `W₂(h_t(γ,·), h_t(η,·)) <= c(t) d_Υ(γ,η)` over
/// same-sector pairs and the time grid.
pub fn check_kwc<T: Real>(
    space: &ConfigSpace<T>,
    c_fn: &dyn Fn(T) -> T,
    t_grid: &[T],
    pairs: &[(Configuration, Configuration)],
    limit: usize,
) -> Result<DefectReport> {
    let base = space.base();
    let mut idx = Vec::with_capacity(pairs.len());
    for (a, b) in pairs {
        if a.total() != b.total() {
            return Err(Error::InvalidArgument(format!("pair {a} / {b} crosses sectors")));
        }
        idx.push((space.require_index(a)?, space.require_index(b)?));
    }
    let mut worst = MaxTracker::new();
    for &t in t_grid {
        let kernel = LiftedKernel::new(space, t)?;
        for (&(i, j), (a, b)) in idx.iter().zip(pairs) {
            let d = config_distance(base, a, b)?.value();
            let w = wasserstein_config(space, &kernel.row(space, i), &kernel.row(space, j), limit)?
                .distance()
                .value();
            let defect = (w - c_fn(t) * d).max(T::zero());
            worst.offer(defect.as_f64(), || format!("t={} {a} {b} W={} d={}", t.as_f64(), w.as_f64(), d.as_f64()));
        }
    }
    Ok(DefectReport::exact("transport.kwc", worst.defect(), 1e-8, 0.0).with_witness(worst.witness))
}

/// Entropy-cost inequality
/// `Ent(μ T_t | π) <= Ent(ν | π) + W₂(μ,ν)² / (4 I_{2K}(t))` on the time grid.
/// Reported without a verdict: the inequality relies on the chain rule.
pub fn check_entropy_cost<T: Real>(
    space: &ConfigSpace<T>,
    mu: &[T],
    nu: &[T],
    pi: &[T],
    k: T,
    t_grid: &[T],
    limit: usize,
) -> Result<DefectReport> {
    let w = wasserstein_config(space, mu, nu, limit)?;
    let Some(w) = w.distance().finite() else {
        return Err(Error::InvalidArgument("entropy-cost needs a finite transport distance".into()));
    };
    let ent_nu = relative_entropy(nu, pi)?;
    let mut worst = MaxTracker::new();
    for &t in t_grid {
        let mu_t = LiftedKernel::new(space, t)?.apply_measure(mu);
        let lhs = relative_entropy(&mu_t, pi)?;
        let rhs = ent_nu + w * w / (T::lit(4.0) * i_k(T::lit(2.0) * k, t));
        let d = (lhs - rhs).max(T::zero());
        worst.offer(d.as_f64(), || format!("t={} lhs={} rhs={}", t.as_f64(), lhs.as_f64(), rhs.as_f64()));
    }
    Ok(DefectReport::asymptotic("transport.entropy_cost", worst.defect())
        .with_witness(format!("W2={} {}", w.as_f64(), worst.witness)))
}

/// Per-step defects of the EVI with forward differences.
#[derive(Clone, Debug)]
pub struct EviDefects {
    /// `(step fraction, max positive defect over the grid)`.
    pub per_step: Vec<(f64, f64)>,
}

/// `d⁺/dt ½W₂(μ_t,ν)² + (K/2) W₂(μ_t,ν)² <= Ent(ν|π) - Ent(μ_t|π)` along
/// `μ_t = μ₀ T_t`, with the derivative replaced by forward differences at each
/// step in [`EVI_STEP_FRACTIONS`]. The reported defect is the largest over steps.
pub fn check_evi<T: Real>(
    space: &ConfigSpace<T>,
    mu0: &[T],
    nu: &[T],
    pi: &[T],
    k: T,
    t_grid: &[T],
    limit: usize,
) -> Result<(DefectReport, EviDefects)> {
    let half_w2 = |t: T| -> Result<T> {
        let mu_t = LiftedKernel::new(space, t)?.apply_measure(mu0);
        let w = wasserstein_config(space, &mu_t, nu, limit)?;
        match w.distance().finite() {
            Some(d) => Ok(T::lit(0.5) * d * d),
            None => Err(Error::InvalidArgument("EVI needs finite transport distances".into())),
        }
    };
    let ent_nu = relative_entropy(nu, pi)?;
    // (t, ½W₂(μ_t,ν)², Ent(ν) - Ent(μ_t))
    let base_points: Vec<(T, T, T)> = t_grid
        .iter()
        .map(|&t| {
            let mu_t = LiftedKernel::new(space, t)?.apply_measure(mu0);
            Ok((t, half_w2(t)?, ent_nu - relative_entropy(&mu_t, pi)?))
        })
        .collect::<Result<_>>()?;
    let mut per_step = Vec::new();
    let mut overall = MaxTracker::new();
    for &frac in &EVI_STEP_FRACTIONS {
        let mut worst = MaxTracker::new();
        for &(t, now, rhs) in &base_points {
            let h = T::lit(frac) * t;
            let slope = (half_w2(t + h)? - now) / h;
            let lhs = slope + k * now;
            let d = (lhs - rhs).max(T::zero());
            worst.offer(d.as_f64(), || format!("t={} lhs={} rhs={}", t.as_f64(), lhs.as_f64(), rhs.as_f64()));
        }
        per_step.push((frac, worst.defect()));
        let w = worst.witness.clone();
        overall.offer(worst.defect(), || format!("step={frac} {w}"));
    }
    let steps: Vec<String> = per_step.iter().map(|(f, d)| format!("{f}:{d}")).collect();
    Ok((
        DefectReport::asymptotic("transport.evi", overall.defect())
            .with_witness(format!("{} steps=[{}]", overall.witness, steps.join(","))),
        EviDefects { per_step },
    ))
}
