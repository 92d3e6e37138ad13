use crate::config_space::ConfigSpace;
use crate::error::{Error, Result};
use crate::lift::{gamma_section, ConfigFunction, LiftedGenerator, LiftedKernel};
use crate::report::{DefectReport, MaxTracker};
use crate::scalar::Real;

/// `Σ μ log(μ/ref)`, `+∞` when `μ` charges a point where `ref` vanishes.
pub fn relative_entropy<T: Real>(mu: &[T], reference: &[T]) -> Result<T> {
    if mu.len() != reference.len() {
        return Err(Error::Dimension("measure lengths differ".into()));
    }
    let mut acc = T::zero();
    for (&p, &q) in mu.iter().zip(reference) {
        if p < T::zero() || q < T::zero() {
            return Err(Error::InvalidArgument("entropy of a signed measure".into()));
        }
        if p == T::zero() {
            continue;
        }
        if q == T::zero() {
            return Ok(T::infinity());
        }
        acc += p * (p / q).ln();
    }
    Ok(acc)
}

/// Density `μ/π`, zero where both vanish.
pub fn density<T: Real>(mu: &[T], pi: &[T]) -> Result<ConfigFunction<T>> {
    let values = mu
        .iter()
        .zip(pi)
        .map(|(&p, &q)| {
            if q > T::zero() {
                Ok(p / q)
            } else if p == T::zero() {
                Ok(T::zero())
            } else {
                Err(Error::InvalidArgument("measure is not absolutely continuous".into()))
            }
        })
        .collect::<Result<_>>()?;
    Ok(ConfigFunction::new(values))
}

/// Fisher information of `ρπ` in two forms.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FisherInformation<T> {
    /// `4 Σ π Γ^Υ(√ρ)`.
    pub sqrt_form: T,
    /// `E^Υ(ρ, log ρ)`, the entropy-dissipation form.
    pub log_form: T,
}

/// `E^Υ(ρ, log ρ) = Σ_γ π(γ) ½ Σ_η L^Υ(γ,η) (ρ(η)-ρ(γ))(log ρ(η) - log ρ(γ))`.
/// Pairs where both densities vanish contribute nothing; a jump between zero
/// and positive density makes the form infinite.
pub fn dissipation_form<T: Real>(space: &ConfigSpace<T>, pi: &[T], rho: &ConfigFunction<T>) -> Result<T> {
    let gen = LiftedGenerator::new(space);
    let half = T::lit(0.5);
    let mut acc = T::zero();
    for i in 0..space.len() {
        let ri = rho.values[i];
        for (j, rate) in gen.row(i) {
            let rj = rho.values[j];
            if ri == T::zero() && rj == T::zero() {
                continue;
            }
            if ri == T::zero() || rj == T::zero() {
                return Ok(T::infinity());
            }
            acc += pi[i] * half * rate * (rj - ri) * (rj.ln() - ri.ln());
        }
    }
    Ok(acc)
}

pub fn fisher_information<T: Real>(space: &ConfigSpace<T>, pi: &[T], rho: &ConfigFunction<T>) -> Result<FisherInformation<T>> {
    if rho.len() != space.len() || pi.len() != space.len() {
        return Err(Error::Dimension("density or reference does not match the configuration space".into()));
    }
    if let Some(i) = rho.values.iter().position(|&r| r < -T::tol(1e-14)) {
        return Err(Error::InvalidArgument(format!("negative density at configuration {i}")));
    }
    let rho = rho.map(|r| r.max(T::zero()));
    let g = gamma_section(space, &rho.map(|r| r.sqrt()))?;
    let sqrt_form = T::lit(4.0) * pi.iter().zip(&g.values).map(|(&p, &v)| p * v).sum::<T>();
    Ok(FisherInformation {
        sqrt_form,
        log_form: dissipation_form(space, pi, &rho)?,
    })
}

/// Entropy along the lifted flow `μ_t = μ₀ T^Υ_t` relative to a reversible
/// probability `π` on the enumeration.
#[derive(Clone, Debug)]
pub struct EntropyFlowPoint<T> {
    pub t: T,
    pub entropy: T,
    /// `⟨L^Υ ρ_t, 1 + log ρ_t⟩_π`.
    pub derivative: T,
    pub dissipation: T,
}

pub fn entropy_flow<T: Real>(space: &ConfigSpace<T>, mu0: &[T], pi: &[T], times: &[T]) -> Result<Vec<EntropyFlowPoint<T>>> {
    if let Some(i) = pi.iter().position(|&p| !(p > T::zero())) {
        return Err(Error::InvalidArgument(format!("reference vanishes at configuration {i}")));
    }
    let gen = LiftedGenerator::new(space);
    times
        .iter()
        .map(|&t| {
            let mu_t = LiftedKernel::new(space, t)?.apply_measure(mu0);
            let rho = density(&mu_t, pi)?;
            let entropy = relative_entropy(&mu_t, pi)?;
            let l_rho = gen.apply(&rho.values);
            let mut derivative = T::zero();
            for i in 0..space.len() {
                if rho.values[i] > T::zero() {
                    derivative += pi[i] * l_rho[i] * (T::one() + rho.values[i].ln());
                } else if l_rho[i] != T::zero() {
                    derivative = -T::infinity();
                }
            }
            Ok(EntropyFlowPoint {
                t,
                entropy,
                derivative,
                dissipation: dissipation_form(space, pi, &rho)?,
            })
        })
        .collect()
}

/// Entropy battery along the flow from `μ₀`: monotonicity on `t_grid`, the
/// dissipation identity `d/dt Ent = -E^Υ(ρ_t, log ρ_t)`, a finite-difference
/// confirmation of the derivative, and `∫₀^T E^Υ(ρ_t, log ρ_t) dt <= 2 Ent(μ₀)`
/// by Simpson quadrature.
pub fn check_entropy_dissipation<T: Real>(
    space: &ConfigSpace<T>,
    mu0: &[T],
    pi: &[T],
    t_grid: &[T],
) -> Result<Vec<DefectReport>> {
    let flow = entropy_flow(space, mu0, pi, t_grid)?;
    let e0 = relative_entropy(mu0, pi)?;

    let mut mono = MaxTracker::new();
    let mut prev = e0;
    let mut prev_t = T::zero();
    for p in &flow {
        mono.offer((p.entropy - prev).max(T::zero()).as_f64(), || {
            format!("t={}->{}", prev_t.as_f64(), p.t.as_f64())
        });
        prev = p.entropy;
        prev_t = p.t;
    }

    let mut ident = MaxTracker::new();
    for p in &flow {
        ident.offer((p.derivative + p.dissipation).abs().as_f64(), || format!("t={}", p.t.as_f64()));
    }

    // Central differences of the entropy at each grid time.
    let mut fd = MaxTracker::new();
    for p in &flow {
        let h = T::lit(1e-4) * p.t;
        let pts = entropy_flow(space, mu0, pi, &[p.t - h, p.t + h])?;
        let slope = (pts[1].entropy - pts[0].entropy) / (T::lit(2.0) * h);
        fd.offer((slope - p.derivative).abs().as_f64(), || format!("t={}", p.t.as_f64()));
    }

    let horizon = t_grid.iter().copied().fold(T::zero(), T::max);
    let panels = 200usize;
    let nodes: Vec<T> = (0..=panels)
        .map(|k| horizon * T::of_usize(k) / T::of_usize(panels))
        .collect();
    let along = entropy_flow(space, mu0, pi, &nodes)?;
    let h = horizon / T::of_usize(panels);
    let mut integral = T::zero();
    for (k, p) in along.iter().enumerate() {
        let w = if k == 0 || k == panels {
            T::one()
        } else if k % 2 == 1 {
            T::lit(4.0)
        } else {
            T::lit(2.0)
        };
        integral += w * p.dissipation;
    }
    integral *= h / T::lit(3.0);
    let excess = (integral - T::lit(2.0) * e0).max(T::zero());

    Ok(vec![
        DefectReport::exact("transport.entropy_monotone", mono.defect(), 1e-12, 0.0).with_witness(mono.witness),
        DefectReport::exact("transport.entropy_dissipation", ident.defect(), 1e-8, 0.0).with_witness(ident.witness),
        DefectReport::asymptotic("transport.entropy_derivative_fd", fd.defect()).with_witness(fd.witness),
        DefectReport::exact("transport.fisher_integral", excess.as_f64(), 1e-8, 0.0).with_witness(format!(
            "integral={} ent0={} horizon={}",
            integral.as_f64(),
            e0.as_f64(),
            horizon.as_f64()
        )),
    ])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::base_space::{build_circle, build_two_state};
    use crate::config_space::{enumerate, poisson_weights};

    #[test]
    fn entropy_examples() {
        let cs = enumerate(&build_two_state(1.0_f64).unwrap(), 4).unwrap();
        let pi = poisson_weights(&cs, 1.0).unwrap().weights;
        let mut dirac = vec![0.0; cs.len()];
        dirac[0] = 1.0;
        assert!((relative_entropy(&dirac, &pi).unwrap() - 2.0).abs() < 1e-14);
        assert_eq!(relative_entropy(&pi, &pi).unwrap(), 0.0);
        let mut q = pi.clone();
        q[0] = 0.0;
        assert_eq!(relative_entropy(&dirac, &q).unwrap(), f64::INFINITY);
    }

    #[test]
    fn fisher_of_constant_density() {
        let cs = enumerate(&build_circle(4, 1.0_f64).unwrap(), 2).unwrap();
        let pi = poisson_weights(&cs, 1.0).unwrap().weights;
        let f = fisher_information(&cs, &pi, &ConfigFunction::constant(cs.len(), 1.0)).unwrap();
        assert_eq!(f.sqrt_form, 0.0);
        assert_eq!(f.log_form, 0.0);
        assert!(fisher_information(&cs, &pi, &ConfigFunction::constant(cs.len(), -1.0)).is_err());
    }

    #[test]
    fn log_form_dominates_sqrt_form() {
        // (a-b)(log a - log b) >= 4(√a-√b)² pointwise.
        let cs = enumerate(&build_circle(5, 1.0_f64).unwrap(), 2).unwrap();
        let pi = poisson_weights(&cs, 1.0).unwrap().weights;
        let rho = ConfigFunction::<f64>::random(cs.len(), 4).map(|z| z.exp());
        let f = fisher_information(&cs, &pi, &rho).unwrap();
        assert!(f.log_form >= f.sqrt_form);
        assert!(f.sqrt_form > 0.0);
    }

    #[test]
    fn dissipation_battery_on_two_state() {
        let cs = enumerate(&build_two_state(1.0_f64).unwrap(), 3).unwrap();
        let p = poisson_weights(&cs, 1.0).unwrap().weights;
        let z: f64 = p.iter().sum();
        let pi: Vec<f64> = p.iter().map(|x| x / z).collect();
        let rho = ConfigFunction::<f64>::random(cs.len(), 2).map(|v| v.exp());
        let mass: f64 = rho.values.iter().zip(&pi).map(|(r, q)| r * q).sum();
        let mu0: Vec<f64> = rho.values.iter().zip(&pi).map(|(r, q)| r * q / mass).collect();
        let reports = check_entropy_dissipation(&cs, &mu0, &pi, &[0.1, 0.5, 1.0, 2.0]).unwrap();
        for r in &reports {
            assert_ne!(r.pass, Some(false), "{r:?}");
        }
        assert!(reports[2].max_defect < 1e-6);
    }

    #[test]
    fn dirac_start_has_infinite_initial_dissipation() {
        let cs = enumerate(&build_two_state(1.0_f64).unwrap(), 2).unwrap();
        let p = poisson_weights(&cs, 1.0).unwrap().weights;
        let mut dirac = vec![0.0; cs.len()];
        dirac[1] = 1.0;
        let rho = density(&dirac, &p).unwrap();
        assert_eq!(dissipation_form(&cs, &p, &rho).unwrap(), f64::INFINITY);
    }
}
