//! Independent-particle dynamics lifted to configuration space.
//!
//! The lifted generator moves one particle at a time with the base rates:
//! `(L^Υ u)(γ) = Σ_x γ_x Σ_y Q[x,y] (u(γ - δ_x + δ_y) - u(γ))`. It never changes
//! the particle count, so every operator here is block diagonal over sectors.

mod cylinder;
mod identities;
mod kernel;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::base_space::BaseFunction;
use crate::config_space::{ConfigMeasure, ConfigSpace};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::report::{DefectReport, MaxTracker};
use crate::scalar::Real;

pub use cylinder::{
    check_cylinder_gamma_formula, check_cylinder_generator_formula, gamma_cylinder, CylinderFunction, ExpCylinder,
    Expr, Jet,
};
pub use identities::{
    check_carre_du_champ, check_exp_generator_formula, check_intertwining, check_kernel_identification,
    check_kernel_mass, check_semigroup_representation, gamma_two, gamma_two_report, IDENTITY_TOL,
};
pub use kernel::{
    check_sub_markov_tensorization, kernel_config_row, kernel_permanent_entry, lifted_semigroup_apply,
    lifted_semigroup_apply_expm, partial_semigroup_first, LiftedKernel,
};

/// Real function on the enumerated configurations.
#[derive(Clone, Debug, PartialEq)]
pub struct ConfigFunction<T> {
    pub values: Vec<T>,
}

impl<T: Real> ConfigFunction<T> {
    pub fn new(values: Vec<T>) -> Self {
        Self { values }
    }

    pub fn constant(len: usize, c: T) -> Self {
        Self { values: vec![c; len] }
    }

    /// `γ ↦ f*γ`.
    pub fn star(space: &ConfigSpace<T>, f: &BaseFunction<T>) -> Self {
        Self {
            values: space.star_table(f),
        }
    }

    /// Independent standard normal values, deterministic in `seed`.
    pub fn random(len: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Self {
            values: (0..len)
                .map(|_| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    T::lit(z)
                })
                .collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self {
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_map(&self, other: &Self, f: impl Fn(T, T) -> T) -> Self {
        Self {
            values: self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect(),
        }
    }

    pub fn sup_norm(&self) -> T {
        self.values.iter().fold(T::zero(), |m, &v| m.max(v.abs()))
    }

    pub fn max_abs_diff(&self, other: &Self) -> T {
        self.values
            .iter()
            .zip(&other.values)
            .fold(T::zero(), |m, (&a, &b)| m.max((a - b).abs()))
    }
}

/// Sparse lifted generator in compressed-row form (off-diagonal entries only).
#[derive(Clone, Debug)]
pub struct LiftedGenerator<T> {
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    rates: Vec<T>,
    diag: Vec<T>,
}

impl<T: Real> LiftedGenerator<T> {
    pub fn new(space: &ConfigSpace<T>) -> Self {
        let n = space.n_states();
        let q = space.base().q();
        let mut row_ptr = Vec::with_capacity(space.len() + 1);
        let mut cols = Vec::new();
        let mut rates = Vec::new();
        let mut diag = Vec::with_capacity(space.len());
        row_ptr.push(0);
        for (i, c) in space.configs().iter().enumerate() {
            let mut out = T::zero();
            for x in 0..n {
                let k = c.count(x);
                if k == 0 {
                    continue;
                }
                let mult = T::of_usize(k as usize);
                for y in 0..n {
                    let r = q[(x, y)];
                    if y == x || r == T::zero() {
                        continue;
                    }
                    let j = space.move_index(i, x, y).expect("moves stay in the sector");
                    cols.push(j);
                    rates.push(mult * r);
                    out += mult * r;
                }
            }
            diag.push(T::zero() - out);
            row_ptr.push(cols.len());
        }
        Self {
            row_ptr,
            cols,
            rates,
            diag,
        }
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    /// Off-diagonal entries `(column, rate)` of row `i`.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, T)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.cols[r.clone()].iter().copied().zip(self.rates[r].iter().copied())
    }

    pub fn diag(&self, i: usize) -> T {
        self.diag[i]
    }

    pub fn apply(&self, u: &[T]) -> Vec<T> {
        (0..self.len())
            .map(|i| {
                let ui = u[i];
                self.row(i).map(|(j, r)| r * (u[j] - ui)).sum()
            })
            .collect()
    }

    pub fn to_dense(&self) -> Matrix<T> {
        let mut m = Matrix::zeros(self.len(), self.len());
        for i in 0..self.len() {
            m[(i, i)] = self.diag[i];
            for (j, r) in self.row(i) {
                m[(i, j)] += r;
            }
        }
        m
    }

    /// Triples `(row, col, value)` including the diagonal, row-major.
    pub fn triplets(&self) -> Vec<(usize, usize, T)> {
        let mut out = Vec::new();
        for i in 0..self.len() {
            let mut row: Vec<(usize, T)> = self.row(i).collect();
            row.push((i, self.diag[i]));
            row.sort_by_key(|&(j, _)| j);
            out.extend(row.into_iter().map(|(j, v)| (i, j, v)));
        }
        out
    }

    /// Coordinate CSV `row,col,value`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("row,col,value\n");
        for (i, j, v) in self.triplets() {
            s.push_str(&format!("{i},{j},{}\n", v.as_f64()));
        }
        s
    }
}

/// `L^Υ u`.
pub fn lifted_generator_apply<T: Real>(space: &ConfigSpace<T>, u: &ConfigFunction<T>) -> Result<ConfigFunction<T>> {
    check_len(space, u)?;
    Ok(ConfigFunction::new(LiftedGenerator::new(space).apply(&u.values)))
}

pub(crate) fn check_len<T: Real>(space: &ConfigSpace<T>, u: &ConfigFunction<T>) -> Result<()> {
    if u.len() != space.len() {
        return Err(Error::Dimension(format!("function of length {} on {} configurations", u.len(), space.len())));
    }
    Ok(())
}

/// Lifted square field computed section by section:
/// `Γ^Υ(u,v)(γ) = Σ_x γ_x Γ(y ↦ u(γ-δ_x+δ_y), y ↦ v(γ-δ_x+δ_y))(x)`.
pub fn gamma_section_bilinear<T: Real>(
    space: &ConfigSpace<T>,
    u: &ConfigFunction<T>,
    v: &ConfigFunction<T>,
) -> Result<ConfigFunction<T>> {
    check_len(space, u)?;
    check_len(space, v)?;
    let n = space.n_states();
    let q = space.base().q();
    let half = T::lit(0.5);
    let mut sec_u = vec![T::zero(); n];
    let mut sec_v = vec![T::zero(); n];
    let values = (0..space.len())
        .map(|i| {
            let c = space.config(i);
            let mut acc = T::zero();
            for x in 0..n {
                let k = c.count(x);
                if k == 0 {
                    continue;
                }
                for y in 0..n {
                    let j = space.move_index(i, x, y).expect("occupied site");
                    sec_u[y] = u.values[j];
                    sec_v[y] = v.values[j];
                }
                let at_x: T = (0..n)
                    .filter(|&y| y != x)
                    .map(|y| q[(x, y)] * (sec_u[y] - sec_u[x]) * (sec_v[y] - sec_v[x]))
                    .sum();
                acc += T::of_usize(k as usize) * half * at_x;
            }
            acc
        })
        .collect();
    Ok(ConfigFunction::new(values))
}

/// `Γ^Υ(u) = Γ^Υ(u,u)`.
pub fn gamma_section<T: Real>(space: &ConfigSpace<T>, u: &ConfigFunction<T>) -> Result<ConfigFunction<T>> {
    gamma_section_bilinear(space, u, u)
}

/// Dirichlet form `E(u,v) = Σ_γ μ(γ) Γ^Υ(u,v)(γ)`.
pub fn dirichlet_form<T: Real>(
    space: &ConfigSpace<T>,
    measure: &[T],
    u: &ConfigFunction<T>,
    v: &ConfigFunction<T>,
) -> Result<T> {
    let g = gamma_section_bilinear(space, u, v)?;
    Ok(measure.iter().zip(&g.values).map(|(&w, &x)| w * x).sum())
}

/// Symmetry of `diag(μ) L^Υ`: the finite-dimensional form of self-adjointness in `L²(μ)`.
pub fn check_selfadjointness<T: Real>(space: &ConfigSpace<T>, measure: &ConfigMeasure<T>) -> Result<DefectReport> {
    if measure.len() != space.len() {
        return Err(Error::Dimension("measure does not match the configuration space".into()));
    }
    if let Some(i) = measure.weights.iter().position(|&w| !(w > T::zero())) {
        return Err(Error::InvalidArgument(format!("measure vanishes at configuration {i}")));
    }
    let gen = LiftedGenerator::new(space);
    let dense = gen.to_dense();
    let w = &measure.weights;
    let mut worst = MaxTracker::new();
    for i in 0..space.len() {
        for (j, _) in gen.row(i) {
            let a = w[i] * dense[(i, j)];
            let b = w[j] * dense[(j, i)];
            worst.offer((a - b).abs().as_f64(), || format!("({},{})", space.config(i), space.config(j)));
        }
    }
    Ok(DefectReport::exact("lift.selfadjoint", worst.defect(), 1e-11, 0.0).with_witness(worst.witness))
}
