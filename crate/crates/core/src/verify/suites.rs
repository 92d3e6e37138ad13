//! Check batteries behind `verify`. Each suite reads the shared [`Context`]
//! and returns its reports; the runner stamps fixture and seed and sorts.

use rand::seq::index::sample as sample_indices;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::Context;
use crate::base_space::{check_log_harnack_base, BaseFunction, FiniteBaseSpace};
use crate::config_space::{
    check_laplace, check_mecke, check_star_isometry, enumerate, mecke_defect_mixture, mixed_poisson_weights,
    mixture_second_moment_gap, multiset_count, poisson_weights, star, tail, ConfigSpace, Configuration, GrowthBound,
    LevyMixture, MeckeMode,
};
use crate::error::{Error, Result};
use crate::lift::{
    check_carre_du_champ, check_cylinder_gamma_formula, check_cylinder_generator_formula, check_exp_generator_formula,
    check_intertwining, check_kernel_identification, check_kernel_mass, check_selfadjointness,
    check_semigroup_representation, check_sub_markov_tensorization, gamma_section, gamma_two_report,
    kernel_permanent_entry, ConfigFunction, CylinderFunction, ExpCylinder, Expr, LiftedKernel,
};
use crate::linalg::Matrix;
use crate::report::{DefectReport, MaxTracker};
use crate::scalar::i_k;
use crate::transport::{
    check_config_metric, check_dirac_isometry, check_entropy_cost, check_entropy_dissipation, check_evi, check_kwc,
    config_distance, config_matching, density, fisher_information, largest_sector, solve_assignment, wasserstein_base,
    wasserstein_config, PlanStatus,
};

use super::structure::suite_irreducibility;

/// Smallest particle cap for the measure battery.
const MEASURE_MIN_NMAX: usize = 14;
/// The measure battery grows its cap until the tail is negligible or this many configurations.
const MEASURE_CONFIG_BUDGET: u128 = 1_000_000;
const BE_TOL: f64 = 1e-9;
/// Totals up to which metric and transport checks are exhaustive.
const EXHAUSTIVE_TOTAL: usize = 3;
const KWC_EXHAUSTIVE_TOTAL: usize = 2;
const KWC_SAMPLED_PAIRS: usize = 8;

fn seed_for(cx: &Context, salt: u64) -> u64 {
    cx.opts.seed.wrapping_add(salt.wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

fn rng_for(cx: &Context, salt: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed_for(cx, salt))
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

fn random_configs(cx: &Context) -> Vec<ConfigFunction<f64>> {
    (0..cx.opts.samples)
        .map(|k| ConfigFunction::random(cx.space.len(), seed_for(cx, 100 + k as u64)))
        .collect()
}

fn star_configs(cx: &Context) -> Vec<ConfigFunction<f64>> {
    cx.base_samples.iter().map(|f| ConfigFunction::star(&cx.space, f)).collect()
}

/// Exponential cylinders with `f` drawn in `(-½, ½)`.
fn exp_samples(cx: &Context) -> Result<Vec<ExpCylinder<f64>>> {
    let mut rng = rng_for(cx, 2);
    let n = cx.space.n_states();
    (0..cx.opts.samples)
        .map(|_| ExpCylinder::new(BaseFunction::new((0..n).map(|_| 0.5 * normal(&mut rng).tanh()).collect())))
        .collect()
}

fn random_base(rng: &mut ChaCha8Rng, n: usize) -> BaseFunction<f64> {
    BaseFunction::new((0..n).map(|_| normal(rng)).collect())
}

/// Picks the report that decides the verdict: the worst failure if any, else the worst defect.
fn worst(reports: Vec<DefectReport>) -> DefectReport {
    let failing = reports.iter().any(|r| r.pass == Some(false));
    reports
        .into_iter()
        .filter(|r| !failing || r.pass == Some(false))
        .max_by(|a, b| a.max_defect.total_cmp(&b.max_defect))
        .expect("at least one report")
}

fn over_grid(cx: &Context, f: impl Fn(f64) -> Result<DefectReport>) -> Result<DefectReport> {
    Ok(worst(cx.opts.t_grid.iter().map(|&t| f(t)).collect::<Result<_>>()?))
}

/// Neumaier-compensated sum; enumerations reach a million terms.
fn compensated_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let (mut sum, mut carry) = (0.0_f64, 0.0_f64);
    for v in values {
        let t = sum + v;
        carry += if sum.abs() >= v.abs() { (sum - t) + v } else { (v - t) + sum };
        sum = t;
    }
    sum + carry
}

fn normalized(w: &[f64]) -> Vec<f64> {
    let z: f64 = w.iter().sum();
    w.iter().map(|x| x / z).collect()
}

fn singleton_indices(space: &ConfigSpace<f64>) -> Result<Vec<usize>> {
    let n = space.n_states();
    (0..n)
        .map(|x| space.require_index(&Configuration::from_particles(n, &[x])?))
        .collect()
}

pub(crate) fn identities(cx: &Context) -> Result<Vec<DefectReport>> {
    let space = &cx.space;
    let base = space.base();
    let exps = exp_samples(cx)?;
    let mut fields = random_configs(cx);
    let gamma_sample = fields[0].clone();
    fields.extend(star_configs(cx));

    let mut out = vec![
        over_grid(cx, |t| check_semigroup_representation(space, &exps, t))?,
        check_exp_generator_formula(space, &exps)?,
        over_grid(cx, |t| check_intertwining(space, &cx.base_samples, t))?,
        over_grid(cx, |t| check_kernel_identification(space, t))?,
        over_grid(cx, |t| check_kernel_mass(space, t))?,
        check_carre_du_champ(space, &fields)?,
        check_selfadjointness(space, &cx.pi)?,
        kernel_permanent(cx)?,
    ];

    let n = base.n();
    let mut rng = rng_for(cx, 3);
    let mut tables = Vec::new();
    for k in 0..8 {
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| {
                (0..n)
                    .map(|_| if k < 4 { rng.random::<f64>() } else { normal(&mut rng) })
                    .collect()
            })
            .collect();
        tables.push(Matrix::from_rows(&rows)?);
    }
    out.push(over_grid(cx, |t| check_sub_markov_tensorization(base, t, &tables))?);

    let inner = vec![random_base(&mut rng, n), random_base(&mut rng, n)];
    let outer = Expr::add(Expr::affine(2.0, 1.0, Expr::var(0)), Expr::affine(-0.5, 0.0, Expr::var(1)));
    let v = CylinderFunction::new(inner, outer)?;
    out.push(
        worst(vec![check_cylinder_generator_formula(space, &v)?, check_cylinder_gamma_formula(space, &v)?])
            .with_check_id("lift.cylinder_affine"),
    );
    out.push(gamma_two_report(space, &gamma_sample, cx.k_check)?);
    Ok(out)
}

/// Kernel blocks against the permanent formula on sectors up to three particles.
fn kernel_permanent(cx: &Context) -> Result<DefectReport> {
    let space = &cx.space;
    let top = space.n_max().min(EXHAUSTIVE_TOTAL);
    let mut worst = MaxTracker::new();
    for &t in &cx.opts.t_grid {
        let h = space.base().semigroup_matrix(t)?;
        let kernel = LiftedKernel::new(space, t)?;
        for k in 0..=top {
            for i in space.sector(k) {
                let row = kernel.row(space, i);
                for j in space.sector(k) {
                    let p = kernel_permanent_entry(&h, space.config(i), space.config(j))?;
                    worst.offer((row[j] - p).abs(), || format!("t={t} {} {}", space.config(i), space.config(j)));
                }
            }
        }
    }
    Ok(DefectReport::exact("lift.kernel_permanent", worst.defect(), 1e-12, 0.0).with_witness(worst.witness))
}

/// Enumeration for the measure battery: at least [`MEASURE_MIN_NMAX`] particles,
/// grown until the second-moment tail is negligible or the budget is hit.
fn measure_space(base: &FiniteBaseSpace<f64>, requested: usize, mean: f64) -> Result<ConfigSpace<f64>> {
    let total = |k: usize| multiset_count(base.n() + 1, k);
    let mut n_max = requested.max(MEASURE_MIN_NMAX);
    while n_max > requested && total(n_max) > MEASURE_CONFIG_BUDGET {
        n_max -= 1;
    }
    while tail::tail_moment(mean, n_max, 2) > 1e-14 && total(n_max + 1) <= MEASURE_CONFIG_BUDGET {
        n_max += 1;
    }
    enumerate(base, n_max)
}

fn refuse_on_argument(id: &str, r: Result<DefectReport>) -> Result<DefectReport> {
    match r {
        Err(Error::InvalidArgument(msg)) => Ok(DefectReport::refused(id, msg)),
        other => other,
    }
}

pub(crate) fn measures(cx: &Context) -> Result<Vec<DefectReport>> {
    let base = cx.fixture.base();
    let s = cx.opts.s;
    let mean = s * base.total_mass();
    let space = measure_space(base, cx.opts.n_max, mean)?;
    let pi = poisson_weights(&space, s)?;
    let m = base.m();

    let mut closed = MaxTracker::new();
    for (i, c) in space.configs().iter().enumerate() {
        let expect: f64 = (0..base.n())
            .map(|x| tail::poisson_pmf(s * m[x], c.count(x) as usize))
            .product();
        let rel = (pi.weights[i] - expect).abs() / expect.max(f64::MIN_POSITIVE);
        closed.offer(rel, || c.to_string());
    }
    let total = compensated_sum(pi.weights.iter().copied());
    let tail_mass = tail::upper_tail(mean, space.n_max());

    let mut rng = rng_for(cx, 4);
    let f = random_base(&mut rng, base.n());
    let g = random_base(&mut rng, base.n());
    let sup_f = f.sup_norm();
    let bounded = |c: &Configuration, x: usize| f.values[x] * star(&g, c).cos();
    let linear = |c: &Configuration, x: usize| f.values[x] * c.total() as f64;

    let mut out = vec![
        DefectReport::exact("config.poisson_closed_form", closed.defect(), 1e-12, 0.0)
            .with_witness(format!("n_max={} {}", space.n_max(), closed.witness)),
        DefectReport::exact("config.mass_tail", (total + tail_mass - 1.0).abs(), 1e-12, 0.0)
            .with_witness(format!("n_max={} mass={total} tail={tail_mass}", space.n_max())),
        check_mecke(&space, &pi, &bounded, GrowthBound::bounded(sup_f), MeckeMode::Exact)?,
        check_mecke(
            &space,
            &pi,
            &linear,
            GrowthBound {
                constant: 0.0,
                per_particle: sup_f,
            },
            MeckeMode::Exact,
        )?
        .with_check_id("config.mecke_linear"),
    ];
    out.push(if cx.opts.mc_samples < 2 {
        DefectReport::refused("config.mecke_mc", "Monte Carlo Mecke needs at least 2 samples")
    } else {
        check_mecke(
            &space,
            &pi,
            &bounded,
            GrowthBound::bounded(sup_f),
            MeckeMode::MonteCarlo {
                samples: cx.opts.mc_samples,
                seed: seed_for(cx, 5),
            },
        )?
    });
    let h = g.map(|v| 0.5 * v.tanh());
    out.push(refuse_on_argument("config.laplace", check_laplace(&space, s, &h))?);
    out.push(check_star_isometry(&space, &pi, &f)?);
    Ok(out)
}

/// `Γ(T_t u)` and `T_t Γ(u)` for every sample and grid time.
struct BeTerm {
    t: f64,
    sample: usize,
    lhs: Vec<f64>,
    rhs: Vec<f64>,
}

fn be_terms(cx: &Context) -> Result<Vec<BeTerm>> {
    let space = &cx.space;
    let mut samples = random_configs(cx);
    samples.extend(star_configs(cx));
    samples.extend(exp_samples(cx)?.iter().map(|e| e.tabulate(space)));
    let gammas: Vec<ConfigFunction<f64>> = samples.iter().map(|u| gamma_section(space, u)).collect::<Result<_>>()?;
    let mut terms = Vec::new();
    for &t in &cx.opts.t_grid {
        let kernel = LiftedKernel::new(space, t)?;
        for (k, u) in samples.iter().enumerate() {
            let tu = ConfigFunction::new(kernel.apply(&u.values));
            terms.push(BeTerm {
                t,
                sample: k,
                lhs: gamma_section(space, &tu)?.values,
                rhs: kernel.apply(&gammas[k].values),
            });
        }
    }
    Ok(terms)
}

/// Largest pointwise violation and, with weights, the largest integrated violation.
fn be_violation(cx: &Context, terms: &[BeTerm], k: f64, weights: Option<&[f64]>) -> (MaxTracker, MaxTracker) {
    let mut pointwise = MaxTracker::new();
    let mut integrated = MaxTracker::new();
    for term in terms {
        let factor = cx.opts.c * (-2.0 * k * term.t).exp();
        let mut acc = 0.0;
        for (i, (&l, &r)) in term.lhs.iter().zip(&term.rhs).enumerate() {
            let d = l - factor * r;
            pointwise.offer(d, || format!("t={} sample={} {}", term.t, term.sample, cx.space.config(i)));
            if let Some(w) = weights {
                acc += w[i] * d;
            }
        }
        if weights.is_some() {
            integrated.offer(acc, || format!("t={} sample={}", term.t, term.sample));
        }
    }
    (pointwise, integrated)
}

/// Worst base-level violation at curvature `k` over the base samples.
fn base_be_violation(cx: &Context, k: f64) -> Result<f64> {
    let base = cx.fixture.base();
    let mut worst = f64::NEG_INFINITY;
    for &t in &cx.opts.t_grid {
        let h = base.semigroup_matrix(t)?;
        let factor = cx.opts.c * (-2.0 * k * t).exp();
        for f in &cx.base_samples {
            let tf = BaseFunction::new(h.mul_vec(&f.values));
            let lhs = base.square_field(&tf, &tf)?;
            let rhs = h.mul_vec(&base.square_field(f, f)?.values);
            for x in 0..base.n() {
                worst = worst.max(lhs.values[x] - factor * rhs[x]);
            }
        }
    }
    Ok(worst)
}

pub(crate) fn be(cx: &Context) -> Result<Vec<DefectReport>> {
    let base = cx.fixture.base();
    let space = &cx.space;
    let k = cx.k_check;
    let mut out = Vec::new();

    let witness = format!("k_best={} c={} max_defect={}", cx.be.k_best, cx.be.c, cx.be.max_defect);
    out.push(match cx.fixture.analytic_curvature() {
        Some(a) => DefectReport::exact("base.be_constant", (cx.be.k_best - a).abs(), 1e-5, 0.0)
            .with_witness(format!("analytic={a} {witness}")),
        None => DefectReport::asymptotic("base.be_constant", cx.be.max_defect.max(0.0)).with_witness(witness),
    });

    let terms = be_terms(cx)?;
    let (forward, _) = be_violation(cx, &terms, k, None);
    out.push(
        DefectReport::exact("be.forward", forward.defect().max(0.0), BE_TOL, 0.0)
            .with_witness(format!("K={k} {}", forward.witness)),
    );

    // Star functions: the lifted inequality restricted to f* is the base one, term by term.
    out.push(if space.n_max() == 0 {
        DefectReport::refused("be.backward", "no particles to restrict to")
    } else {
        let mut back = MaxTracker::new();
        for &t in &cx.opts.t_grid {
            let kernel = LiftedKernel::new(space, t)?;
            let h = base.semigroup_matrix(t)?;
            let factor = cx.opts.c * (-2.0 * k * t).exp();
            for (si, f) in cx.base_samples.iter().enumerate() {
                let u = ConfigFunction::star(space, f);
                let lhs_c = gamma_section(space, &ConfigFunction::new(kernel.apply(&u.values)))?;
                let rhs_c = kernel.apply(&gamma_section(space, &u)?.values);
                let tf = BaseFunction::new(h.mul_vec(&f.values));
                let lhs_b = base.square_field(&tf, &tf)?;
                let rhs_b = BaseFunction::new(h.mul_vec(&base.square_field(f, f)?.values));
                let lhs_star = space.star_table(&lhs_b);
                let rhs_star = space.star_table(&rhs_b);
                for i in 0..space.len() {
                    let d = (lhs_c.values[i] - lhs_star[i]).abs() + (rhs_c[i] - rhs_star[i]).abs();
                    back.offer(d, || format!("t={t} sample={si} lift {}", space.config(i)));
                }
                for x in 0..base.n() {
                    let d = (lhs_b.values[x] - factor * rhs_b.values[x]).max(0.0);
                    back.offer(d, || format!("t={t} sample={si} base x={x}"));
                }
            }
        }
        DefectReport::exact("be.backward", back.defect(), BE_TOL, 0.0).with_witness(format!("K={k} {}", back.witness))
    });

    let k_neg = cx.be.k_best.max(k) + 0.1;
    let base_defect = base_be_violation(cx, k_neg)?;
    out.push(if base_defect > 0.0 {
        let (neg, _) = be_violation(cx, &terms, k_neg, None);
        let margin = 0.9 * base_defect;
        DefectReport::exact("be.negative_control", neg.defect(), BE_TOL, 0.0)
            .expect_violation(margin)
            .with_witness(format!("K={k_neg} margin={margin} {}", neg.witness))
    } else {
        DefectReport::refused("be.negative_control", format!("base samples still satisfy the estimate at K={k_neg}"))
    });
    Ok(out)
}

pub(crate) fn mixed(cx: &Context) -> Result<Vec<DefectReport>> {
    let space = &cx.space;
    let base = cx.fixture.base();
    let mixture = LevyMixture::new(cx.opts.mixture.clone())?;
    let mu = mixed_poisson_weights(space, &mixture)?;
    let k = cx.k_check;
    let mut out = Vec::new();

    let terms = be_terms(cx)?;
    let (pointwise, integrated) = be_violation(cx, &terms, k, Some(&mu.weights));
    let (p, q) = (pointwise.defect().max(0.0), integrated.defect().max(0.0));
    out.push(
        DefectReport::exact("mixed.be", p.max(q), BE_TOL, 0.0)
            .with_witness(format!("K={k} pointwise={p} integrated={q} {}", pointwise.witness)),
    );
    out.push(check_selfadjointness(space, &mu)?.with_check_id("mixed.selfadjoint"));

    let mut atoms = MaxTracker::new();
    for &(s, _) in mixture.atoms() {
        let single = mixed_poisson_weights(space, &LevyMixture::dirac(s)?)?;
        let plain = poisson_weights(space, s)?;
        for (i, (a, b)) in single.weights.iter().zip(&plain.weights).enumerate() {
            atoms.offer((a - b).abs(), || format!("s={s} {}", space.config(i)));
        }
    }
    out.push(DefectReport::exact("mixed.single_atom", atoms.defect(), 1e-15, 0.0).with_witness(atoms.witness));

    let gap = mixture_second_moment_gap(&mixture, base.total_mass());
    out.push(if gap <= 0.0 {
        DefectReport::refused("mixed.mecke_control", "degenerate mixture satisfies the Mecke identity")
    } else {
        let s_max = mixture.atoms().iter().fold(0.0_f64, |a, &(s, _)| a.max(s));
        let mspace = measure_space(base, cx.opts.n_max, s_max * base.total_mass())?;
        let mmu = mixed_poisson_weights(&mspace, &mixture)?;
        let bound = GrowthBound {
            constant: 0.0,
            per_particle: 1.0,
        };
        let r = mecke_defect_mixture(&mspace, &mmu, &mixture, &|c, _| c.total() as f64, bound)?;
        if r.tail_bound > 0.1 * gap {
            DefectReport::refused(
                "mixed.mecke_control",
                format!("truncation tail {} cannot resolve the gap {gap}", r.tail_bound),
            )
        } else {
            let w = format!("gap={gap} n_max={} {}", mspace.n_max(), r.witness);
            r.with_check_id("mixed.mecke_control").expect_violation(0.9 * gap).with_witness(w)
        }
    });
    Ok(out)
}

fn refused_all(ids: &[&str], reason: &str) -> Vec<DefectReport> {
    ids.iter().map(|id| DefectReport::refused(*id, reason)).collect()
}

pub(crate) fn transport(cx: &Context) -> Result<Vec<DefectReport>> {
    let space = &cx.space;
    let base = space.base();
    if base.metric().is_none() {
        return Ok(refused_all(
            &[
                "transport.config_metric",
                "transport.dirac_isometry",
                "transport.dirac_w2",
                "transport.ot_vs_assignment",
                "transport.cross_sector",
            ],
            "base space has no metric",
        ));
    }
    let top = space.n_max().min(EXHAUSTIVE_TOTAL);
    let limit = cx.opts.desk_limit;
    let dirac = |i: usize| {
        let mut v = vec![0.0; space.len()];
        v[i] = 1.0;
        v
    };
    let mut out = vec![check_config_metric(space, top)?, check_dirac_isometry(base)?];

    let mut diracs = MaxTracker::new();
    for k in 0..=top {
        for i in space.sector(k) {
            for j in space.sector(k).filter(|&j| j >= i) {
                let w = wasserstein_config(space, &dirac(i), &dirac(j), limit)?.distance().value();
                let d = config_distance(base, space.config(i), space.config(j))?.value();
                diracs.offer((w - d).abs(), || format!("{} {}", space.config(i), space.config(j)));
            }
        }
    }
    out.push(DefectReport::exact("transport.dirac_w2", diracs.defect(), 1e-9, 0.0).with_witness(diracs.witness));

    // Uniform measures on k points: by Birkhoff the optimal plan is a matching.
    let mut rng = rng_for(cx, 6);
    let mut lp = MaxTracker::new();
    for k in 1..=top {
        let range = space.sector(k);
        for size in 2..=range.len().min(6) {
            for trial in 0..3 {
                let src: Vec<usize> = sample_indices(&mut rng, range.len(), size).iter().map(|a| range.start + a).collect();
                let dst: Vec<usize> = sample_indices(&mut rng, range.len(), size).iter().map(|a| range.start + a).collect();
                let mut mu = vec![0.0; space.len()];
                let mut nu = vec![0.0; space.len()];
                for (&a, &b) in src.iter().zip(&dst) {
                    mu[a] = 1.0 / size as f64;
                    nu[b] = 1.0 / size as f64;
                }
                let plan = wasserstein_config(space, &mu, &nu, limit)?;
                let mut cost = Matrix::zeros(size, size);
                for (a, &i) in src.iter().enumerate() {
                    for (b, &j) in dst.iter().enumerate() {
                        cost[(a, b)] = config_matching(base, space.config(i), space.config(j))?
                            .expect("same sector")
                            .squared_cost;
                    }
                }
                let (assigned, _) = solve_assignment(&cost)?;
                let (ma, mb) = plan.marginals(space.len(), space.len());
                let marg = ma
                    .iter()
                    .zip(&mu)
                    .chain(mb.iter().zip(&nu))
                    .fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
                let d = (plan.cost - assigned / size as f64).abs().max(marg);
                lp.offer(d, || format!("sector={k} size={size} trial={trial}"));
            }
        }
    }
    out.push(DefectReport::exact("transport.ot_vs_assignment", lp.defect(), 1e-9, 0.0).with_witness(lp.witness));

    let mut cross = MaxTracker::new();
    let mut cases = 0usize;
    for a in 0..=top {
        for b in (a + 1)..=top {
            cases += 1;
            let (i, j) = (space.sector(a).start, space.sector(b).end - 1);
            let plan = wasserstein_config(space, &dirac(i), &dirac(j), limit)?;
            cross.offer(f64::from(u8::from(plan.status != PlanStatus::Infinite)), || {
                format!("{} {}", space.config(i), space.config(j))
            });
        }
    }
    if space.n_max() >= 1 && largest_sector(space, space.n_max()) <= limit {
        cases += 1;
        let pi = normalized(&cx.pi.weights);
        let conditioned = cx.pi.conditioned_on_sector(space, 1)?;
        let plan = wasserstein_config(space, &pi, &conditioned.weights, limit)?;
        cross.offer(f64::from(u8::from(plan.status != PlanStatus::Infinite)), || "pi vs pi|sector 1".into());
    }
    out.push(
        DefectReport::exact("transport.cross_sector", cross.defect(), 0.0, 0.0)
            .with_witness(format!("cases={cases} {}", cross.witness)),
    );
    Ok(out)
}

pub(crate) fn kwc(cx: &Context) -> Result<Vec<DefectReport>> {
    let space = &cx.space;
    let base = space.base();
    if base.metric().is_none() {
        return Ok(refused_all(&["transport.kwc", "transport.kwc_base"], "base space has no metric"));
    }
    let limit = cx.opts.desk_limit;
    let size = largest_sector(space, space.n_max());
    if size > limit {
        return Err(Error::DeskScale { size, limit });
    }
    let mut pairs = Vec::new();
    for k in 1..=space.n_max().min(KWC_EXHAUSTIVE_TOTAL) {
        for i in space.sector(k) {
            for j in space.sector(k).filter(|&j| j > i) {
                pairs.push((space.config(i).clone(), space.config(j).clone()));
            }
        }
    }
    let mut rng = rng_for(cx, 7);
    for k in (KWC_EXHAUSTIVE_TOTAL + 1)..=space.n_max() {
        let range = space.sector(k);
        for _ in 0..KWC_SAMPLED_PAIRS {
            let i = rng.random_range(range.clone());
            let j = rng.random_range(range.clone());
            pairs.push((space.config(i).clone(), space.config(j).clone()));
        }
    }
    let r = check_kwc(space, &|_| 1.0, &cx.opts.t_grid, &pairs, limit)?;
    let witness = format!("pairs={} {}", pairs.len(), r.witness);
    let mut out = vec![if cx.fixture.translation_invariant() {
        r.with_witness(witness)
    } else {
        // Without a transitive symmetry there is no reason for c ≡ 1 to hold.
        DefectReport::asymptotic("transport.kwc", r.max_defect).with_witness(witness)
    }];

    out.push(if space.n_max() == 0 {
        DefectReport::refused("transport.kwc_base", "no particles")
    } else {
        let idx = singleton_indices(space)?;
        let mut diff = MaxTracker::new();
        for &t in &cx.opts.t_grid {
            let kernel = LiftedKernel::new(space, t)?;
            let h = base.semigroup_matrix(t)?;
            for x in 0..base.n() {
                for y in (x + 1)..base.n() {
                    let w_c = wasserstein_config(space, &kernel.row(space, idx[x]), &kernel.row(space, idx[y]), limit)?
                        .distance()
                        .value();
                    let w_b = wasserstein_base(base, h.row(x), h.row(y))?.distance().value();
                    diff.offer((w_c - w_b).abs(), || format!("t={t} x={x} y={y}"));
                }
            }
        }
        DefectReport::exact("transport.kwc_base", diff.defect(), 1e-9, 0.0).with_witness(diff.witness)
    });
    Ok(out)
}

pub(crate) fn entropy(cx: &Context) -> Result<Vec<DefectReport>> {
    let space = &cx.space;
    let pi = normalized(&cx.pi.weights);
    let u: ConfigFunction<f64> = ConfigFunction::random(space.len(), seed_for(cx, 8));
    let mu0 = normalized(&pi.iter().zip(&u.values).map(|(p, v)| p * (0.5 * v).exp()).collect::<Vec<_>>());
    let mut out = check_entropy_dissipation(space, &mu0, &pi, &cx.opts.t_grid)?;

    // (a - b)(log a - log b) >= 4(√a - √b)² edge by edge.
    let mut order = MaxTracker::new();
    let mut times = vec![0.0];
    times.extend(&cx.opts.t_grid);
    for &t in &times {
        let mu_t = LiftedKernel::new(space, t)?.apply_measure(&mu0);
        let fi = fisher_information(space, &pi, &density(&mu_t, &pi)?)?;
        let d = (fi.sqrt_form - fi.log_form).max(0.0) / fi.log_form.abs().max(1.0);
        order.offer(d, || format!("t={t} sqrt={} log={}", fi.sqrt_form, fi.log_form));
    }
    out.push(DefectReport::exact("transport.fisher_order", order.defect(), 1e-12, 0.0).with_witness(order.witness));

    if space.base().metric().is_none() || space.n_max() == 0 {
        out.extend(refused_all(
            &["transport.entropy_cost", "transport.evi"],
            "needs a metric and at least one particle",
        ));
        return Ok(out);
    }
    let k = space.n_max().min(2);
    let range = space.sector(k);
    let mut mu = vec![0.0; space.len()];
    mu[range.start + range.len() / 2] = 1.0;
    let nu = cx.pi.conditioned_on_sector(space, k)?.weights;
    let limit = cx.opts.desk_limit;
    out.push(check_entropy_cost(space, &mu, &nu, &pi, cx.k_check, &cx.opts.t_grid, limit)?);
    out.push(check_evi(space, &mu, &nu, &pi, cx.k_check, &cx.opts.t_grid, limit)?.0);
    Ok(out)
}

pub(crate) fn structure(cx: &Context) -> Result<Vec<DefectReport>> {
    suite_irreducibility(&cx.space, &cx.pi.weights)
}

pub(crate) fn log_harnack(cx: &Context) -> Result<Vec<DefectReport>> {
    let space = &cx.space;
    let base = space.base();
    let Some(metric) = base.metric() else {
        return Ok(refused_all(&["base.log_harnack", "lift.log_harnack_dirac"], "base space has no metric"));
    };
    let n = base.n();
    let positive: Vec<BaseFunction<f64>> = cx
        .base_samples
        .iter()
        .enumerate()
        .map(|(i, f)| if i < n { f.map(|v| 1.0 + v) } else { f.map(|v| (0.5 * v).exp()) })
        .collect();
    let k = cx.k_check;
    let mut out = vec![check_log_harnack_base(base, k, &cx.opts.t_grid, &positive)?
        .with_witness(format!("K={k}"))];

    // Sector one is a copy of the base: compare the two defects point by point.
    out.push(if space.n_max() == 0 {
        DefectReport::refused("lift.log_harnack_dirac", "no particles")
    } else {
        let idx = singleton_indices(space)?;
        let mut diff = MaxTracker::new();
        for &t in &cx.opts.t_grid {
            let kernel = LiftedKernel::new(space, t)?;
            let h = base.semigroup_matrix(t)?;
            let denom = 4.0 * i_k(2.0 * k, t);
            for (si, f) in positive.iter().enumerate() {
                let mut big = vec![1.0; space.len()];
                for x in 0..n {
                    big[idx[x]] = f.values[x];
                }
                let t_log_c = kernel.apply(&big.iter().map(|v| v.ln()).collect::<Vec<_>>());
                let log_t_c: Vec<f64> = kernel.apply(&big).into_iter().map(f64::ln).collect();
                let t_log_b = h.mul_vec(&f.values.iter().map(|v| v.ln()).collect::<Vec<_>>());
                let log_t_b: Vec<f64> = h.mul_vec(&f.values).into_iter().map(f64::ln).collect();
                for x in 0..n {
                    for y in 0..n {
                        let dc = config_distance(base, space.config(idx[x]), space.config(idx[y]))?.value();
                        let c_def = t_log_c[idx[x]] - log_t_c[idx[y]] - dc * dc / denom;
                        let dxy = metric[(x, y)];
                        let b_def = t_log_b[x] - log_t_b[y] - dxy * dxy / denom;
                        diff.offer((c_def - b_def).abs(), || format!("t={t} sample={si} x={x} y={y}"));
                    }
                }
            }
        }
        DefectReport::exact("lift.log_harnack_dirac", diff.defect(), 1e-10, 0.0)
            .with_witness(format!("K={k} {}", diff.witness))
    });
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::base_space::{build_circle, build_two_state};

    #[test]
    fn compensated_sum_recovers_cancelled_terms() {
        assert_eq!(compensated_sum([1e16, 1.0, -1e16]), 1.0);
        assert_eq!(compensated_sum(std::iter::repeat_n(0.1, 10)), 1.0);
    }

    #[test]
    fn measure_cap_grows_until_tail_is_negligible() {
        let two = build_two_state(1.0_f64).unwrap();
        let cs = measure_space(&two, 2, 2.0).unwrap();
        assert!(cs.n_max() >= MEASURE_MIN_NMAX);
        assert!(tail::tail_moment(2.0, cs.n_max(), 2) <= 1e-14);
        // Eight states hit the budget before the tail is negligible.
        let circle = build_circle(8, 1.0_f64).unwrap();
        let cs = measure_space(&circle, 2, std::f64::consts::TAU).unwrap();
        assert!(multiset_count(9, cs.n_max()) <= MEASURE_CONFIG_BUDGET);
        assert!(multiset_count(9, cs.n_max() + 1) > MEASURE_CONFIG_BUDGET);
    }
}
