use configlab::base_space::{build_circle, BaseFunction};
use configlab::config_space::{enumerate, multiset_count, poisson_weights, tail, Configuration};
use configlab::lift::{lifted_generator_apply, LiftedGenerator, LiftedKernel};
use configlab::transport::{config_distance, relative_entropy, wasserstein_config, DESK_SCALE_LIMIT};
use configlab::{ConfigFunction, Expr};
use proptest::prelude::*;

fn circle(n: usize, rate: f64) -> configlab::BaseSpace {
    build_circle(n, rate).unwrap()
}

fn config_on(n: usize, particles: Vec<usize>) -> Configuration {
    Configuration::from_particles(n, &particles.into_iter().map(|p| p % n).collect::<Vec<_>>()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn sectors_have_multiset_sizes(n in 3usize..7, n_max in 0usize..4) {
        let cs = enumerate(&circle(n, 1.0), n_max).unwrap();
        for k in 0..=n_max {
            prop_assert_eq!(cs.sector(k).len() as u128, multiset_count(n, k));
        }
        for (i, c) in cs.configs().iter().enumerate() {
            prop_assert_eq!(cs.index_of(c), Some(i));
        }
    }

    #[test]
    fn generator_is_a_rate_matrix(n in 3usize..7, rate in 0.1f64..3.0) {
        let cs = enumerate(&circle(n, rate), 3).unwrap();
        let gen = LiftedGenerator::new(&cs);
        for i in 0..cs.len() {
            let off: f64 = gen.row(i).map(|(_, r)| r).sum();
            prop_assert!(gen.row(i).all(|(j, r)| j != i && r > 0.0));
            prop_assert!((off + gen.diag(i)).abs() < 1e-12);
        }
    }

    #[test]
    fn star_intertwines(values in prop::collection::vec(-3.0f64..3.0, 5), t in 0.01f64..3.0) {
        let base = circle(5, 1.3);
        let cs = enumerate(&base, 3).unwrap();
        let f = BaseFunction::new(values);
        let lhs = LiftedKernel::new(&cs, t).unwrap().apply(&cs.star_table(&f));
        let rhs = cs.star_table(&base.semigroup_apply(&f, t).unwrap());
        for (a, b) in lhs.iter().zip(&rhs) {
            prop_assert!((a - b).abs() < 1e-12);
        }
        let gl = lifted_generator_apply(&cs, &ConfigFunction::star(&cs, &f)).unwrap();
        let lf = cs.star_table(&base.generator_apply(&f).unwrap());
        for (a, b) in gl.values.iter().zip(&lf) {
            prop_assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn kernel_rows_are_probabilities(t in 0.0f64..4.0) {
        let cs = enumerate(&circle(4, 0.8), 3).unwrap();
        let k = LiftedKernel::new(&cs, t).unwrap();
        for i in 0..cs.len() {
            let row = k.row(&cs, i);
            prop_assert!(row.iter().all(|&p| p >= -1e-15));
            prop_assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn config_distance_is_a_metric(
        a in prop::collection::vec(0usize..8, 3),
        b in prop::collection::vec(0usize..8, 3),
        c in prop::collection::vec(0usize..8, 3),
    ) {
        let base = circle(8, 1.0);
        let (a, b, c) = (config_on(8, a), config_on(8, b), config_on(8, c));
        let d = |x: &Configuration, y: &Configuration| config_distance(&base, x, y).unwrap().value();
        prop_assert_eq!(d(&a, &a), 0.0);
        prop_assert_eq!(d(&a, &b).to_bits(), d(&b, &a).to_bits());
        prop_assert!(d(&a, &c) <= d(&a, &b) + d(&b, &c) + 1e-12);
        let short = config_on(8, vec![0, 1]);
        prop_assert!(!config_distance(&base, &a, &short).unwrap().is_finite());
    }

    #[test]
    fn wasserstein_is_symmetric_on_a_sector(seed in 0u64..1000) {
        let cs = enumerate(&circle(5, 1.0), 2).unwrap();
        let r = cs.sector(2);
        let u: ConfigFunction<f64> = ConfigFunction::random(cs.len(), seed);
        let v: ConfigFunction<f64> = ConfigFunction::random(cs.len(), seed + 1);
        let measure = |w: &ConfigFunction<f64>| {
            let mut m = vec![0.0; cs.len()];
            for i in r.clone() {
                m[i] = w.values[i].exp();
            }
            let z: f64 = m.iter().sum();
            m.iter().map(|x| x / z).collect::<Vec<_>>()
        };
        let (mu, nu) = (measure(&u), measure(&v));
        let ab = wasserstein_config(&cs, &mu, &nu, DESK_SCALE_LIMIT).unwrap().cost;
        let ba = wasserstein_config(&cs, &nu, &mu, DESK_SCALE_LIMIT).unwrap().cost;
        prop_assert!((ab - ba).abs() < 1e-10);
        prop_assert!(ab >= 0.0);
        prop_assert!(wasserstein_config(&cs, &mu, &mu, DESK_SCALE_LIMIT).unwrap().cost.abs() < 1e-12);
    }

    #[test]
    fn entropy_is_nonnegative(seed in 0u64..1000) {
        let cs = enumerate(&circle(4, 1.0), 2).unwrap();
        let p = poisson_weights(&cs, 1.0).unwrap().weights;
        let z: f64 = p.iter().sum();
        let pi: Vec<f64> = p.iter().map(|x| x / z).collect();
        let u: ConfigFunction<f64> = ConfigFunction::random(cs.len(), seed);
        let w: Vec<f64> = pi.iter().zip(&u.values).map(|(p, v)| p * v.exp()).collect();
        let zw: f64 = w.iter().sum();
        let mu: Vec<f64> = w.iter().map(|x| x / zw).collect();
        prop_assert!(relative_entropy(&mu, &pi).unwrap() >= 0.0);
        prop_assert!(relative_entropy(&pi, &pi).unwrap().abs() < 1e-14);
    }

    #[test]
    fn poisson_mass_plus_tail_is_one(s in 0.1f64..1.0, n_max in 6usize..12) {
        let cs = enumerate(&circle(3, 1.0), n_max).unwrap();
        let pi = poisson_weights(&cs, s).unwrap();
        let mean = s * cs.base().total_mass();
        let total: f64 = pi.weights.iter().sum();
        prop_assert!((total + tail::upper_tail(mean, n_max) - 1.0).abs() < 1e-13);
    }

    #[test]
    fn jets_match_finite_differences(x in -1.0f64..1.0, y in -1.0f64..1.0) {
        let e = Expr::add(Expr::mul(Expr::var(0), Expr::exp(Expr::var(1))), Expr::powi(Expr::var(0), 3));
        prop_assert!(e.finite_difference_defect(&[x, y], 1e-4).unwrap() < 1e-5);
    }
}
