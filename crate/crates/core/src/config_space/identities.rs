//! Measure-level identities of Poisson configuration measures, checked by
//! summing over the enumeration with explicit truncation bounds.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::measure::{ConfigMeasure, LevyMixture, MeasureKind};
use super::sample::PoissonSampler;
use super::tail;
use super::{ConfigSpace, Configuration};
use crate::base_space::BaseFunction;
use crate::error::{Error, Result};
use crate::report::DefectReport;
use crate::scalar::Real;

/// Absolute tolerance for enumerated measure identities.
pub const MEASURE_TOL: f64 = 1e-10;
/// Largest `‖f‖∞` accepted by the Laplace-transform check.
pub const LAPLACE_SUP_GUARD: f64 = 5.0;
/// The Laplace check refuses when its tail bound exceeds this fraction of the exact value.
pub const LAPLACE_MAX_RELATIVE_TAIL: f64 = 1e-3;

/// `f*γ = Σ_x γ_x f(x)`.
pub fn star<T: Real>(f: &BaseFunction<T>, c: &Configuration) -> T {
    f.values
        .iter()
        .zip(c.occupation())
        .filter(|(_, &k)| k > 0)
        .map(|(&v, &k)| v * T::of_usize(k as usize))
        .sum()
}

/// `|u(γ, x)| ≤ constant + per_particle · γX`, used to bound truncation error.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GrowthBound {
    pub constant: f64,
    pub per_particle: f64,
}

impl GrowthBound {
    pub fn bounded(sup: f64) -> Self {
        Self {
            constant: sup,
            per_particle: 0.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum MeckeMode {
    Exact,
    MonteCarlo { samples: usize, seed: u64 },
}

/// Truncation bound for the Mecke sums under `Poisson(mean)` particle counts
/// with right-hand intensity factor `rhs_mass`.
fn mecke_tail(mean: f64, rhs_mass: f64, n_max: usize, bound: GrowthBound) -> f64 {
    let GrowthBound { constant: a, per_particle: b } = bound;
    let lhs = a * tail::tail_moment(mean, n_max, 1) + b * tail::tail_moment(mean, n_max, 2);
    let at_least = tail::tail_at_least(mean, n_max);
    let rhs = rhs_mass * (a * at_least + b * (tail::moment_at_least(mean, n_max, 1) + at_least));
    lhs + rhs
}

fn mecke_sums<T: Real>(
    space: &ConfigSpace<T>,
    weights: &[T],
    intensity: T,
    u: &dyn Fn(&Configuration, usize) -> T,
) -> (T, T) {
    let n = space.n_states();
    let m = space.base().m();
    let mut lhs = T::zero();
    let mut rhs = T::zero();
    for (i, c) in space.configs().iter().enumerate() {
        let w = weights[i];
        if w == T::zero() {
            continue;
        }
        for x in 0..n {
            let k = c.count(x);
            if k > 0 {
                lhs += w * T::of_usize(k as usize) * u(c, x);
            }
            if c.total() < space.n_max() {
                rhs += w * intensity * m[x] * u(&c.plus(x), x);
            }
        }
    }
    (lhs, rhs)
}

/// Mecke identity `∬ u(γ,x) dγ(x) dπ = ∬ u(γ+δ_x, x) d(s·m)(x) dπ` for a Poisson measure.
pub fn check_mecke<T: Real>(
    space: &ConfigSpace<T>,
    measure: &ConfigMeasure<T>,
    u: &dyn Fn(&Configuration, usize) -> T,
    bound: GrowthBound,
    mode: MeckeMode,
) -> Result<DefectReport> {
    let s = match measure.kind {
        MeasureKind::Poisson { s } => s,
        ref other => return Err(Error::WrongMeasure(format!("{other:?}; the Mecke identity characterizes Poisson"))),
    };
    match mode {
        MeckeMode::Exact => {
            let (lhs, rhs) = mecke_sums(space, &measure.weights, T::lit(s), u);
            let mass = s * space.base().total_mass().as_f64();
            let tail_bound = mecke_tail(mass, mass, space.n_max(), bound);
            Ok(DefectReport::exact("config.mecke", (lhs - rhs).abs().as_f64(), MEASURE_TOL, tail_bound)
                .with_witness(format!("lhs={} rhs={}", lhs, rhs)))
        }
        MeckeMode::MonteCarlo { samples, seed } => {
            if samples < 2 {
                return Err(Error::InvalidArgument("Monte Carlo Mecke needs at least 2 samples".into()));
            }
            let sampler = PoissonSampler::new(space.base(), T::lit(s))?;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let m: Vec<f64> = space.base().m().iter().map(|w| w.as_f64()).collect();
            let (mut mean, mut m2) = (0.0_f64, 0.0_f64);
            for i in 0..samples {
                let c = sampler.draw(&mut rng);
                let mut diff = 0.0;
                for (x, &mx) in m.iter().enumerate() {
                    let k = c.count(x);
                    if k > 0 {
                        diff += k as f64 * u(&c, x).as_f64();
                    }
                    diff -= s * mx * u(&c.plus(x), x).as_f64();
                }
                // Welford
                let delta = diff - mean;
                mean += delta / (i + 1) as f64;
                m2 += delta * (diff - mean);
            }
            let se = (m2 / (samples - 1) as f64 / samples as f64).sqrt();
            Ok(DefectReport::exact("config.mecke_mc", mean.abs(), 3.0 * se, 0.0)
                .with_seed(seed)
                .with_witness(format!("mean_diff={mean} se={se} samples={samples}")))
        }
    }
}

/// Mecke defect under a mixed Poisson measure, with the mean intensity on the
/// right-hand side. Non-degenerate mixtures violate the identity.
pub fn mecke_defect_mixture<T: Real>(
    space: &ConfigSpace<T>,
    measure: &ConfigMeasure<T>,
    mixture: &LevyMixture<T>,
    u: &dyn Fn(&Configuration, usize) -> T,
    bound: GrowthBound,
) -> Result<DefectReport> {
    if !matches!(measure.kind, MeasureKind::Mixed { .. } | MeasureKind::Poisson { .. }) {
        return Err(Error::WrongMeasure(format!("{:?}", measure.kind)));
    }
    let s_bar = mixture.mean_intensity();
    let (lhs, rhs) = mecke_sums(space, &measure.weights, s_bar, u);
    let total = space.base().total_mass().as_f64();
    let tail_bound: f64 = mixture
        .atoms()
        .iter()
        .map(|&(s, w)| w.as_f64() * mecke_tail(s.as_f64() * total, s_bar.as_f64() * total, space.n_max(), bound))
        .sum();
    Ok(DefectReport::exact("config.mecke_mixture", (lhs - rhs).abs().as_f64(), MEASURE_TOL, tail_bound)
        .with_witness(format!("lhs={} rhs={}", lhs, rhs)))
}

/// Second-moment gap `Var_λ(s) · m(X)²`: the exact Mecke defect of `u(γ,x) = γX`
/// under a mixed Poisson measure.
pub fn mixture_second_moment_gap<T: Real>(mixture: &LevyMixture<T>, total_mass: T) -> T {
    mixture.intensity_variance() * total_mass * total_mass
}

/// Laplace transform `∫ e^{f*γ} dπ_{s·m} = exp(s ∫ (e^f - 1) dm)`.
pub fn check_laplace<T: Real>(space: &ConfigSpace<T>, s: T, f: &BaseFunction<T>) -> Result<DefectReport> {
    if f.len() != space.n_states() {
        return Err(Error::Dimension(format!("function of length {} on {} states", f.len(), space.n_states())));
    }
    if !(s > T::zero()) {
        return Err(Error::InvalidArgument(format!("Poisson intensity scaling must be positive, got {s}")));
    }
    if f.sup_norm() > T::lit(LAPLACE_SUP_GUARD) || !f.is_finite() {
        return Err(Error::InvalidArgument(format!("|f| exceeds the Laplace guard {LAPLACE_SUP_GUARD}")));
    }
    let m = space.base().m();
    let exponent: T = m.iter().zip(&f.values).map(|(&w, &v)| s * w * v.exp_m1()).sum();
    let rhs = exponent.exp();
    let pi = super::poisson_weights(space, s)?;
    let lhs: T = space
        .configs()
        .iter()
        .zip(&pi.weights)
        .map(|(c, &w)| w * star(f, c).exp())
        .sum();
    // Σ_{k > n_max} P(N = k) e^{k·max f} = e^{λ(e^M - 1)} P(Poisson(λ e^M) > n_max)
    let top = f.values.iter().fold(T::neg_infinity(), |a, &b| a.max(b)).as_f64();
    let lambda = (s * space.base().total_mass()).as_f64();
    let tilted = lambda * top.exp();
    let tail_bound = (lambda * top.exp_m1()).exp() * tail::upper_tail(tilted, space.n_max());
    if tail_bound > LAPLACE_MAX_RELATIVE_TAIL * rhs.as_f64() {
        return Err(Error::InvalidArgument(format!(
            "f too large for the cap n_max = {}: tail bound {tail_bound:e}",
            space.n_max()
        )));
    }
    Ok(DefectReport::exact("config.laplace", (lhs - rhs).abs().as_f64(), MEASURE_TOL, tail_bound)
        .with_witness(format!("lhs={} rhs={}", lhs, rhs)))
}

/// `‖f*‖_{L¹(π)} = s ‖f‖_{L¹(m)}`.
pub fn check_star_isometry<T: Real>(
    space: &ConfigSpace<T>,
    measure: &ConfigMeasure<T>,
    f: &BaseFunction<T>,
) -> Result<DefectReport> {
    let s = measure
        .poisson_intensity()
        .ok_or_else(|| Error::WrongMeasure(format!("{:?}", measure.kind)))?;
    let abs_f = f.map(|v| v.abs());
    let lhs: T = space
        .configs()
        .iter()
        .zip(&measure.weights)
        .map(|(c, &w)| w * star(&abs_f, c))
        .sum();
    let rhs: T = s * space.base().m().iter().zip(&abs_f.values).map(|(&w, &v)| w * v).sum::<T>();
    let mean = (s * space.base().total_mass()).as_f64();
    let tail_bound = abs_f.sup_norm().as_f64() * tail::tail_moment(mean, space.n_max(), 1);
    Ok(DefectReport::exact("config.star_isometry", (lhs - rhs).abs().as_f64(), MEASURE_TOL, tail_bound)
        .with_witness(format!("lhs={} rhs={}", lhs, rhs)))
}
