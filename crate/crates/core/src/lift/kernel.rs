use super::{check_len, ConfigFunction, LiftedGenerator};
use crate::config_space::{ConfigMeasure, ConfigSpace, Configuration, MeasureKind};
use crate::error::{Error, Result};
use crate::linalg::{expm, Matrix};
use crate::report::{DefectReport, MaxTracker};
use crate::scalar::Real;

/// Lifted heat kernel at a fixed time, stored as one dense block per sector.
///
/// Row `γ` is the law of the configuration obtained by moving each particle of
/// `γ` independently with the base kernel; it is built by convolving in one
/// particle at a time.
#[derive(Clone, Debug)]
pub struct LiftedKernel<T> {
    t: T,
    blocks: Vec<Matrix<T>>,
    starts: Vec<usize>,
}

impl<T: Real> LiftedKernel<T> {
    pub fn new(space: &ConfigSpace<T>, t: T) -> Result<Self> {
        let h = space.base().semigroup_matrix(t)?;
        let starts: Vec<usize> = space.sector_ranges().iter().map(|r| r.start).collect();
        let blocks = space
            .sector_ranges()
            .iter()
            .enumerate()
            .map(|(k, range)| {
                let mut block = Matrix::zeros(range.len(), range.len());
                for (a, i) in range.clone().enumerate() {
                    let row = convolve_row(space, &h, space.config(i));
                    debug_assert_eq!(row.len(), range.len());
                    block.row_mut(a).copy_from_slice(&row);
                }
                debug_assert_eq!(starts[k], range.start);
                block
            })
            .collect();
        Ok(Self { t, blocks, starts })
    }

    pub fn t(&self) -> T {
        self.t
    }

    pub fn block(&self, k: usize) -> &Matrix<T> {
        &self.blocks[k]
    }

    /// Full row over all configurations (zero outside the sector).
    pub fn row(&self, space: &ConfigSpace<T>, i: usize) -> Vec<T> {
        let k = space.sector_of(i);
        let mut out = vec![T::zero(); space.len()];
        let local = i - self.starts[k];
        let start = self.starts[k];
        out[start..start + self.blocks[k].cols()].copy_from_slice(self.blocks[k].row(local));
        out
    }

    pub fn apply(&self, u: &[T]) -> Vec<T> {
        let mut out = Vec::with_capacity(u.len());
        for (k, block) in self.blocks.iter().enumerate() {
            let start = self.starts[k];
            out.extend(block.mul_vec(&u[start..start + block.cols()]));
        }
        out
    }

    /// `μ T^Υ_t` for a measure supported on the enumeration.
    pub fn apply_measure(&self, mu: &[T]) -> Vec<T> {
        let mut out = Vec::with_capacity(mu.len());
        for (k, block) in self.blocks.iter().enumerate() {
            let start = self.starts[k];
            out.extend(block.vec_mul(&mu[start..start + block.rows()]));
        }
        out
    }

    pub fn to_dense(&self, space: &ConfigSpace<T>) -> Matrix<T> {
        let mut m = Matrix::zeros(space.len(), space.len());
        for i in 0..space.len() {
            m.row_mut(i).copy_from_slice(&self.row(space, i));
        }
        m
    }
}

/// Row of the lifted kernel restricted to the sector of `c`, in local indices.
fn convolve_row<T: Real>(space: &ConfigSpace<T>, h: &Matrix<T>, c: &Configuration) -> Vec<T> {
    let n = space.n_states();
    let mut current = vec![T::one()];
    for (step, x) in c.particles().into_iter().enumerate() {
        let from = space.sector(step).start;
        let to = space.sector(step + 1);
        let mut next = vec![T::zero(); to.len()];
        for (a, &p) in current.iter().enumerate() {
            if p == T::zero() {
                continue;
            }
            for y in 0..n {
                let j = space.add_index(from + a, y).expect("adding below the cap");
                next[j - to.start] += p * h[(x, y)];
            }
        }
        current = next;
    }
    current
}

/// `T^Υ_t(γ, ·)` as a measure on the enumeration.
pub fn kernel_config_row<T: Real>(space: &ConfigSpace<T>, c: &Configuration, t: T) -> Result<ConfigMeasure<T>> {
    let i = space.require_index(c)?;
    let h = space.base().semigroup_matrix(t)?;
    let local = convolve_row(space, &h, c);
    let range = space.sector(space.sector_of(i));
    let mut weights = vec![T::zero(); space.len()];
    weights[range].copy_from_slice(&local);
    Ok(ConfigMeasure {
        weights,
        tail: T::zero(),
        kind: MeasureKind::KernelRow {
            config: c.occupation().to_vec(),
            t: t.as_f64(),
        },
    })
}

/// Permanent formula for a single kernel entry:
/// `Σ_σ Π_i h_t(x_i, y_σ(i)) / Π_y η_y!`, zero across sectors.
pub fn kernel_permanent_entry<T: Real>(h: &Matrix<T>, from: &Configuration, to: &Configuration) -> Result<T> {
    if from.total() != to.total() {
        return Ok(T::zero());
    }
    let xs = from.particles();
    let ys = to.particles();
    if xs.len() > 8 {
        return Err(Error::TooLarge(xs.len() as u128, 8));
    }
    let mut perm: Vec<usize> = (0..ys.len()).collect();
    let mut sum = T::zero();
    loop {
        sum += xs.iter().zip(&perm).map(|(&x, &p)| h[(x, ys[p])]).fold(T::one(), |a, b| a * b);
        if !next_permutation(&mut perm) {
            break;
        }
    }
    let mut norm = T::one();
    for &k in to.occupation() {
        for j in 2..=k {
            norm *= T::of_usize(j as usize);
        }
    }
    Ok(sum / norm)
}

fn next_permutation(p: &mut [usize]) -> bool {
    if p.len() < 2 {
        return false;
    }
    let mut i = p.len() - 1;
    while i > 0 && p[i - 1] >= p[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = p.len() - 1;
    while p[j] <= p[i - 1] {
        j -= 1;
    }
    p.swap(i - 1, j);
    p[i..].reverse();
    true
}

/// `T^Υ_t u` through the sector-block kernel.
pub fn lifted_semigroup_apply<T: Real>(space: &ConfigSpace<T>, u: &ConfigFunction<T>, t: T) -> Result<ConfigFunction<T>> {
    check_len(space, u)?;
    Ok(ConfigFunction::new(LiftedKernel::new(space, t)?.apply(&u.values)))
}

/// `T^Υ_t u` through the matrix exponential of the dense lifted generator.
pub fn lifted_semigroup_apply_expm<T: Real>(
    space: &ConfigSpace<T>,
    u: &ConfigFunction<T>,
    t: T,
) -> Result<ConfigFunction<T>> {
    check_len(space, u)?;
    if !(t >= T::zero()) {
        return Err(Error::InvalidArgument(format!("semigroup time must be >= 0, got {t}")));
    }
    let l = LiftedGenerator::new(space).to_dense();
    let e = expm(&l.scale(t))?;
    Ok(ConfigFunction::new(e.mul_vec(&u.values)))
}

/// Base semigroup applied in the first coordinate of a two-particle table:
/// `out[x][z] = Σ_y h_t(x,y) table[y][z]`.
pub fn partial_semigroup_first<T: Real>(h: &Matrix<T>, table: &Matrix<T>) -> Matrix<T> {
    h.matmul(table)
}

/// Sub-Markov property of the one-coordinate semigroup on two-particle tables,
/// together with the Jensen-type inequality for the square field taken in the
/// other coordinate: `Γ_2(T⊗I U) <= T⊗I Γ_2(U)`.
pub fn check_sub_markov_tensorization<T: Real>(
    space: &crate::base_space::FiniteBaseSpace<T>,
    t: T,
    tables: &[Matrix<T>],
) -> Result<DefectReport> {
    let n = space.n();
    let h = space.semigroup_matrix(t)?;
    let mut worst = MaxTracker::new();
    let second_field = |u: &Matrix<T>| -> Result<Matrix<T>> {
        let mut g = Matrix::zeros(n, n);
        for x in 0..n {
            let row = crate::base_space::BaseFunction::new(u.row(x).to_vec());
            let sq = space.square_field(&row, &row)?;
            g.row_mut(x).copy_from_slice(&sq.values);
        }
        Ok(g)
    };
    for (k, u) in tables.iter().enumerate() {
        if u.rows() != n || u.cols() != n {
            return Err(Error::Dimension(format!("two-particle table {k} must be {n}x{n}")));
        }
        let bounded = u.as_slice().iter().all(|&v| v >= T::zero() && v <= T::one());
        let pu = partial_semigroup_first(&h, u);
        if bounded {
            for x in 0..n {
                for z in 0..n {
                    let v = pu[(x, z)];
                    let excess = (-v).max(v - T::one()).max(T::zero());
                    worst.offer(excess.as_f64(), || format!("table={k} range ({x},{z})"));
                }
            }
        }
        let lhs = second_field(&pu)?;
        let rhs = partial_semigroup_first(&h, &second_field(u)?);
        for x in 0..n {
            for z in 0..n {
                let d = (lhs[(x, z)] - rhs[(x, z)]).max(T::zero());
                worst.offer(d.as_f64(), || format!("table={k} jensen ({x},{z})"));
            }
        }
    }
    Ok(DefectReport::exact("lift.sub_markov_tensorization", worst.defect(), 1e-12, 0.0)
        .with_witness(format!("t={} {}", t.as_f64(), worst.witness)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::base_space::{build_circle, build_two_state};
    use crate::config_space::enumerate;

    #[test]
    fn rows_are_probability_vectors() {
        let cs = enumerate(&build_circle(5, 1.0_f64).unwrap(), 3).unwrap();
        let k = LiftedKernel::new(&cs, 0.4).unwrap();
        for i in 0..cs.len() {
            let row = k.row(&cs, i);
            let s: f64 = row.iter().sum();
            assert!((s - 1.0).abs() < 1e-13);
            assert!(row.iter().all(|&v| v >= 0.0));
        }
    }

    #[test]
    fn two_state_closed_form() {
        // One particle: h_t(a,a) = (1 + e^{-2t})/2 with unit rate.
        let cs = enumerate(&build_two_state(1.0_f64).unwrap(), 2).unwrap();
        let t = 0.8;
        let a = Configuration::from_particles(2, &[0]).unwrap();
        let row = kernel_config_row(&cs, &a, t).unwrap();
        let p = 0.5 * (1.0 + (-2.0 * t).exp());
        let ia = cs.index_of(&a).unwrap();
        assert!((row.weights[ia] - p).abs() < 1e-15);
        // Two particles at a: {a,a} w.p. p², {a,b} w.p. 2p(1-p).
        let aa = Configuration::from_particles(2, &[0, 0]).unwrap();
        let ab = Configuration::from_particles(2, &[0, 1]).unwrap();
        let row = kernel_config_row(&cs, &aa, t).unwrap();
        assert!((row.weights[cs.index_of(&aa).unwrap()] - p * p).abs() < 1e-15);
        assert!((row.weights[cs.index_of(&ab).unwrap()] - 2.0 * p * (1.0 - p)).abs() < 1e-15);
    }

    #[test]
    fn permanent_matches_convolution() {
        let base = build_circle(4, 1.0_f64).unwrap();
        let cs = enumerate(&base, 3).unwrap();
        let t = 0.6;
        let h = base.semigroup_matrix(t).unwrap();
        let k = LiftedKernel::new(&cs, t).unwrap();
        for i in 0..cs.len() {
            let row = k.row(&cs, i);
            for j in 0..cs.len() {
                let p = kernel_permanent_entry(&h, cs.config(i), cs.config(j)).unwrap();
                assert!((row[j] - p).abs() < 1e-14, "{i} {j}");
            }
        }
    }

    #[test]
    fn block_kernel_matches_expm() {
        let cs = enumerate(&build_two_state(1.0_f64).unwrap(), 3).unwrap();
        let u = ConfigFunction::random(cs.len(), 5);
        for t in [0.0, 0.1, 1.0, 2.0] {
            let a = lifted_semigroup_apply(&cs, &u, t).unwrap();
            let b = lifted_semigroup_apply_expm(&cs, &u, t).unwrap();
            assert!(a.max_abs_diff(&b) < 1e-12);
        }
    }

    #[test]
    fn kernel_at_zero_is_identity() {
        let cs = enumerate(&build_circle(3, 2.0_f64).unwrap(), 2).unwrap();
        let k = LiftedKernel::new(&cs, 0.0).unwrap();
        let d = k.to_dense(&cs);
        assert_eq!(d.max_abs_diff(&Matrix::identity(cs.len())), 0.0);
    }

    #[test]
    fn measure_flow_conserves_mass() {
        let cs = enumerate(&build_circle(4, 1.0_f64).unwrap(), 2).unwrap();
        let k = LiftedKernel::new(&cs, 0.3).unwrap();
        let mu = vec![1.0 / cs.len() as f64; cs.len()];
        let out = k.apply_measure(&mu);
        assert!((out.iter().sum::<f64>() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn permutations_enumerated() {
        let mut p = vec![0, 1, 2];
        let mut count = 1;
        while next_permutation(&mut p) {
            count += 1;
        }
        assert_eq!(count, 6);
    }

    #[test]
    fn tensorization_holds() {
        let base = build_circle(4, 1.0_f64).unwrap();
        let tables: Vec<Matrix<f64>> = (0..3)
            .map(|s| {
                let r = ConfigFunction::<f64>::random(16, s);
                let rows: Vec<Vec<f64>> = (0..4)
                    .map(|x| (0..4).map(|z| 1.0 / (1.0 + r.values[4 * x + z].exp())).collect())
                    .collect();
                Matrix::from_rows(&rows)
                .unwrap()
            })
            .collect();
        let rep = check_sub_markov_tensorization(&base, 0.5, &tables).unwrap();
        assert_eq!(rep.pass, Some(true), "{rep:?}");
    }
}
