use super::kernel::LiftedKernel;
use super::{check_len, gamma_section, gamma_section_bilinear, ConfigFunction, ExpCylinder, LiftedGenerator};
use crate::base_space::BaseFunction;
use crate::config_space::ConfigSpace;
use crate::error::{Error, Result};
use crate::linalg::expm;
use crate::report::{DefectReport, MaxTracker};
use crate::scalar::Real;

/// Tolerance for identities that hold exactly on the enumeration.
pub const IDENTITY_TOL: f64 = 1e-10;

fn compare<T: Real>(space: &ConfigSpace<T>, a: &[T], b: &[T]) -> MaxTracker {
    let mut worst = MaxTracker::new();
    for (i, (&x, &y)) in a.iter().zip(b).enumerate() {
        worst.offer((x - y).abs().as_f64(), || space.config(i).label(space.base().states()));
    }
    worst
}

/// `T^Υ_t Π(1+f)^{γ} = Π(1+T_t f)^{γ}`, with the left side from the matrix
/// exponential of the dense lifted generator.
pub fn check_semigroup_representation<T: Real>(
    space: &ConfigSpace<T>,
    samples: &[ExpCylinder<T>],
    t: T,
) -> Result<DefectReport> {
    if !(t >= T::zero()) {
        return Err(Error::InvalidArgument(format!("semigroup time must be >= 0, got {t}")));
    }
    let e = expm(&LiftedGenerator::new(space).to_dense().scale(t))?;
    let mut worst = MaxTracker::new();
    for (k, sample) in samples.iter().enumerate() {
        let lhs = e.mul_vec(&sample.tabulate(space).values);
        let tf = space.base().semigroup_apply(sample.f(), t)?;
        let rhs = ExpCylinder::new(tf)?.tabulate(space);
        let w = compare(space, &lhs, &rhs.values);
        let at = w.witness.clone();
        worst.offer(w.defect(), || format!("sample={k} {at}"));
    }
    Ok(
        DefectReport::exact("lift.semigroup_representation", worst.defect(), IDENTITY_TOL, 0.0)
            .with_witness(format!("t={} {}", t.as_f64(), worst.witness)),
    )
}

/// `L^Υ Π(1+f)^{γ} = (Lf / (1+f))*γ · Π(1+f)^{γ}`.
pub fn check_exp_generator_formula<T: Real>(space: &ConfigSpace<T>, samples: &[ExpCylinder<T>]) -> Result<DefectReport> {
    let gen = LiftedGenerator::new(space);
    let mut worst = MaxTracker::new();
    for (k, e) in samples.iter().enumerate() {
        let table = e.tabulate(space);
        let lhs = gen.apply(&table.values);
        let lf = space.base().generator_apply(e.f())?;
        let ratio = lf.zip_map(e.f(), |a, b| a / (T::one() + b));
        let star = space.star_table(&ratio);
        let rhs: Vec<T> = star.iter().zip(&table.values).map(|(&s, &v)| s * v).collect();
        let w = compare(space, &lhs, &rhs);
        let at = w.witness.clone();
        worst.offer(w.defect(), || format!("sample={k} {at}"));
    }
    Ok(DefectReport::exact("lift.exp_generator", worst.defect(), IDENTITY_TOL, 0.0).with_witness(worst.witness))
}

/// `T^Υ_t (f*) = (T_t f)*`.
pub fn check_intertwining<T: Real>(space: &ConfigSpace<T>, samples: &[BaseFunction<T>], t: T) -> Result<DefectReport> {
    let kernel = LiftedKernel::new(space, t)?;
    let mut worst = MaxTracker::new();
    for (k, f) in samples.iter().enumerate() {
        let lhs = kernel.apply(&space.star_table(f));
        let rhs = space.star_table(&space.base().semigroup_apply(f, t)?);
        let w = compare(space, &lhs, &rhs);
        let at = w.witness.clone();
        worst.offer(w.defect(), || format!("sample={k} {at}"));
    }
    Ok(
        DefectReport::exact("lift.intertwining", worst.defect(), IDENTITY_TOL, 0.0)
            .with_witness(format!("t={} {}", t.as_f64(), worst.witness)),
    )
}

/// Kernel rows built by particle convolution against `exp(t L^Υ)`.
pub fn check_kernel_identification<T: Real>(space: &ConfigSpace<T>, t: T) -> Result<DefectReport> {
    let dense = LiftedKernel::new(space, t)?.to_dense(space);
    let reference = expm(&LiftedGenerator::new(space).to_dense().scale(t))?;
    let mut worst = MaxTracker::new();
    for i in 0..space.len() {
        for j in 0..space.len() {
            worst.offer((dense[(i, j)] - reference[(i, j)]).abs().as_f64(), || {
                format!("({},{})", space.config(i), space.config(j))
            });
        }
    }
    Ok(
        DefectReport::exact("lift.kernel_identification", worst.defect(), IDENTITY_TOL, 0.0)
            .with_witness(format!("t={} {}", t.as_f64(), worst.witness)),
    )
}

/// Every kernel row is a probability vector carried by its own sector.
pub fn check_kernel_mass<T: Real>(space: &ConfigSpace<T>, t: T) -> Result<DefectReport> {
    let kernel = LiftedKernel::new(space, t)?;
    let mut worst = MaxTracker::new();
    for i in 0..space.len() {
        let row = kernel.row(space, i);
        let sector = space.sector(space.sector_of(i));
        let inside: T = row[sector.clone()].iter().copied().sum();
        let outside = row
            .iter()
            .enumerate()
            .filter(|(j, _)| !sector.contains(j))
            .fold(T::zero(), |m, (_, &v)| m.max(v.abs()));
        let negative = row.iter().fold(T::zero(), |m, &v| m.max(-v));
        let d = (inside - T::one()).abs().max(outside).max(negative);
        worst.offer(d.as_f64(), || space.config(i).to_string());
    }
    Ok(
        DefectReport::exact("lift.kernel_mass", worst.defect(), 1e-12, 0.0)
            .with_witness(format!("t={} {}", t.as_f64(), worst.witness)),
    )
}

/// Section-wise square field against `½(L^Υ u² - 2u L^Υ u)`.
pub fn check_carre_du_champ<T: Real>(space: &ConfigSpace<T>, samples: &[ConfigFunction<T>]) -> Result<DefectReport> {
    let gen = LiftedGenerator::new(space);
    let half = T::lit(0.5);
    let mut worst = MaxTracker::new();
    let mut scale = 1.0_f64;
    for (k, u) in samples.iter().enumerate() {
        check_len(space, u)?;
        let sq: Vec<T> = u.values.iter().map(|&v| v * v).collect();
        let l_sq = gen.apply(&sq);
        let l_u = gen.apply(&u.values);
        let rhs: Vec<T> = (0..u.len())
            .map(|i| half * (l_sq[i] - T::lit(2.0) * u.values[i] * l_u[i]))
            .collect();
        let lhs = gamma_section(space, u)?;
        let w = compare(space, &lhs.values, &rhs);
        let at = w.witness.clone();
        worst.offer(w.defect(), || format!("sample={k} {at}"));
        scale = scale.max(u.sup_norm().as_f64().powi(2) * gen_scale(space));
    }
    Ok(
        DefectReport::exact("lift.carre_du_champ", worst.defect(), IDENTITY_TOL * scale, 0.0)
            .with_witness(worst.witness),
    )
}

fn gen_scale<T: Real>(space: &ConfigSpace<T>) -> f64 {
    space.base().max_rate().as_f64() * space.n_max().max(1) as f64
}

/// `Γ₂(u) = ½(L^Υ Γ^Υ(u) - 2Γ^Υ(u, L^Υ u))`.
pub fn gamma_two<T: Real>(space: &ConfigSpace<T>, u: &ConfigFunction<T>) -> Result<ConfigFunction<T>> {
    check_len(space, u)?;
    let gen = LiftedGenerator::new(space);
    let g = gamma_section(space, u)?;
    let lg = gen.apply(&g.values);
    let lu = ConfigFunction::new(gen.apply(&u.values));
    let cross = gamma_section_bilinear(space, u, &lu)?;
    let half = T::lit(0.5);
    Ok(ConfigFunction::new(
        lg.iter()
            .zip(&cross.values)
            .map(|(&a, &b)| half * (a - T::lit(2.0) * b))
            .collect(),
    ))
}

/// Informational: worst value of `K Γ^Υ(u) - Γ₂(u)` over the enumeration.
/// A positive value means the pointwise curvature bound `Γ₂ >= K Γ` fails for `u`.
pub fn gamma_two_report<T: Real>(space: &ConfigSpace<T>, u: &ConfigFunction<T>, k: T) -> Result<DefectReport> {
    if !k.is_finite() {
        return Err(Error::InvalidArgument("curvature constant must be finite".into()));
    }
    let g2 = gamma_two(space, u)?;
    let g = gamma_section(space, u)?;
    let mut worst = MaxTracker::new();
    for i in 0..space.len() {
        let d = (k * g.values[i] - g2.values[i]).max(T::zero());
        worst.offer(d.as_f64(), || space.config(i).to_string());
    }
    Ok(DefectReport::asymptotic("lift.gamma_two", worst.defect())
        .with_witness(format!("K={} {}", k.as_f64(), worst.witness)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::base_space::{build_circle, build_two_state};
    use crate::config_space::enumerate;

    #[test]
    fn identities_on_two_state() {
        let cs = enumerate(&build_two_state(1.0_f64).unwrap(), 3).unwrap();
        let e = ExpCylinder::new(BaseFunction::new(vec![-0.3, 0.8])).unwrap();
        let es = [e.clone()];
        for t in [0.1, 0.5, 1.0, 2.0] {
            assert!(check_semigroup_representation(&cs, &es, t).unwrap().max_defect < 1e-13);
            assert!(check_intertwining(&cs, &[BaseFunction::new(vec![1.0, -2.0])], t).unwrap().max_defect < 1e-13);
            assert!(check_kernel_identification(&cs, t).unwrap().max_defect < 1e-13);
            assert!(check_kernel_mass(&cs, t).unwrap().max_defect < 1e-13);
        }
        assert!(check_exp_generator_formula(&cs, &es).unwrap().max_defect < 1e-14);
        let u = ConfigFunction::random(cs.len(), 9);
        assert!(check_carre_du_champ(&cs, &[u]).unwrap().max_defect < 1e-12);
    }

    #[test]
    fn identities_on_circle() {
        let cs = enumerate(&build_circle(5, 1.0_f64).unwrap(), 2).unwrap();
        let e = ExpCylinder::new(BaseFunction::new(vec![-0.1, -0.2, 0.0, 0.3, 1.5])).unwrap();
        let es = [e];
        assert_eq!(check_semigroup_representation(&cs, &es, 0.7).unwrap().pass, Some(true));
        assert_eq!(check_exp_generator_formula(&cs, &es).unwrap().pass, Some(true));
    }

    #[test]
    fn gamma_two_of_star_matches_base() {
        // On linear statistics Γ₂^Υ(f*) = (Γ₂ f)*.
        let base = build_two_state(1.0_f64).unwrap();
        let cs = enumerate(&base, 2).unwrap();
        let f = BaseFunction::new(vec![1.0, 0.0]);
        let g2 = gamma_two(&cs, &ConfigFunction::star(&cs, &f)).unwrap();
        let gf = base.square_field(&f, &f).unwrap();
        let lgf = base.generator_apply(&gf).unwrap();
        let lf = base.generator_apply(&f).unwrap();
        let cross = base.square_field(&f, &lf).unwrap();
        let expect = lgf.zip_map(&cross, |a, b| 0.5 * a - b);
        let star = cs.star_table(&expect);
        for (a, b) in g2.values.iter().zip(&star) {
            assert!((a - b).abs() < 1e-14);
        }
        let r = gamma_two_report(&cs, &ConfigFunction::star(&cs, &f), 2.0).unwrap();
        assert!(r.max_defect < 1e-14);
    }
}
