//! Cylinder functions `F(f_1*γ, ..., f_k*γ)` with an explicit outer expression.

use serde::{Deserialize, Serialize};

use super::{gamma_section, lifted_generator_apply, ConfigFunction};
use crate::base_space::BaseFunction;
use crate::config_space::{ConfigSpace, Configuration};
use crate::error::{Error, Result};
use crate::report::{DefectReport, MaxTracker};
use crate::scalar::Real;

/// Smooth outer function as an expression tree over variables `x_0, x_1, ...`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case", deny_unknown_fields)]
pub enum Expr {
    Const { value: f64 },
    Var { index: usize },
    Add { lhs: Box<Expr>, rhs: Box<Expr> },
    Mul { lhs: Box<Expr>, rhs: Box<Expr> },
    Exp { arg: Box<Expr> },
    Log { arg: Box<Expr> },
    Affine { scale: f64, shift: f64, arg: Box<Expr> },
}

/// Value, gradient and Hessian (row-major `k×k`) at a point.
#[derive(Clone, Debug, PartialEq)]
pub struct Jet<T> {
    pub value: T,
    pub grad: Vec<T>,
    pub hess: Vec<T>,
}

impl<T: Real> Jet<T> {
    fn constant(k: usize, value: T) -> Self {
        Self {
            value,
            grad: vec![T::zero(); k],
            hess: vec![T::zero(); k * k],
        }
    }

    fn outer(&mut self, a: &[T], b: &[T], scale: T) {
        let k = a.len();
        for i in 0..k {
            for j in 0..k {
                self.hess[i * k + j] += scale * a[i] * b[j];
            }
        }
    }
}

// Tree constructors, not arithmetic on values.
#[allow(clippy::should_implement_trait)]
impl Expr {
    pub fn constant(value: f64) -> Self {
        Expr::Const { value }
    }

    pub fn var(index: usize) -> Self {
        Expr::Var { index }
    }

    pub fn add(lhs: Expr, rhs: Expr) -> Self {
        Expr::Add {
            lhs: Box::new(lhs),
            rhs: Box::new(rhs),
        }
    }

    pub fn mul(lhs: Expr, rhs: Expr) -> Self {
        Expr::Mul {
            lhs: Box::new(lhs),
            rhs: Box::new(rhs),
        }
    }

    pub fn exp(arg: Expr) -> Self {
        Expr::Exp { arg: Box::new(arg) }
    }

    pub fn log(arg: Expr) -> Self {
        Expr::Log { arg: Box::new(arg) }
    }

    pub fn affine(scale: f64, shift: f64, arg: Expr) -> Self {
        Expr::Affine {
            scale,
            shift,
            arg: Box::new(arg),
        }
    }

    /// `arg^k` by repeated multiplication, `k >= 1`.
    pub fn powi(arg: Expr, k: u32) -> Self {
        let mut out = arg.clone();
        for _ in 1..k.max(1) {
            out = Expr::mul(out, arg.clone());
        }
        out
    }

    /// One more than the largest variable index (0 for a constant).
    pub fn arity(&self) -> usize {
        match self {
            Expr::Const { .. } => 0,
            Expr::Var { index } => index + 1,
            Expr::Add { lhs, rhs } | Expr::Mul { lhs, rhs } => lhs.arity().max(rhs.arity()),
            Expr::Exp { arg } | Expr::Log { arg } | Expr::Affine { arg, .. } => arg.arity(),
        }
    }

    fn has_vars(&self) -> bool {
        self.arity() > 0
    }

    /// Structurally affine in the variables.
    pub fn is_affine(&self) -> bool {
        match self {
            Expr::Const { .. } | Expr::Var { .. } => true,
            Expr::Add { lhs, rhs } => lhs.is_affine() && rhs.is_affine(),
            Expr::Mul { lhs, rhs } => {
                (!lhs.has_vars() && rhs.is_affine()) || (!rhs.has_vars() && lhs.is_affine())
            }
            Expr::Affine { arg, .. } => arg.is_affine(),
            Expr::Exp { arg } | Expr::Log { arg } => !arg.has_vars(),
        }
    }

    /// Exact value, gradient and Hessian at `x` (length `k >= arity`).
    pub fn jet<T: Real>(&self, x: &[T]) -> Result<Jet<T>> {
        let k = x.len();
        if self.arity() > k {
            return Err(Error::Dimension(format!("expression uses {} variables, got {k}", self.arity())));
        }
        self.jet_inner(x)
    }

    fn jet_inner<T: Real>(&self, x: &[T]) -> Result<Jet<T>> {
        let k = x.len();
        Ok(match self {
            Expr::Const { value } => Jet::constant(k, T::lit(*value)),
            Expr::Var { index } => {
                let mut j = Jet::constant(k, x[*index]);
                j.grad[*index] = T::one();
                j
            }
            Expr::Add { lhs, rhs } => {
                let a = lhs.jet_inner(x)?;
                let b = rhs.jet_inner(x)?;
                Jet {
                    value: a.value + b.value,
                    grad: a.grad.iter().zip(&b.grad).map(|(&p, &q)| p + q).collect(),
                    hess: a.hess.iter().zip(&b.hess).map(|(&p, &q)| p + q).collect(),
                }
            }
            Expr::Mul { lhs, rhs } => {
                let a = lhs.jet_inner(x)?;
                let b = rhs.jet_inner(x)?;
                let mut j = Jet {
                    value: a.value * b.value,
                    grad: a.grad.iter().zip(&b.grad).map(|(&p, &q)| b.value * p + a.value * q).collect(),
                    hess: a.hess.iter().zip(&b.hess).map(|(&p, &q)| b.value * p + a.value * q).collect(),
                };
                j.outer(&a.grad, &b.grad, T::one());
                j.outer(&b.grad, &a.grad, T::one());
                j
            }
            Expr::Exp { arg } => {
                let a = arg.jet_inner(x)?;
                let v = a.value.exp();
                let mut j = Jet {
                    value: v,
                    grad: a.grad.iter().map(|&p| v * p).collect(),
                    hess: a.hess.iter().map(|&p| v * p).collect(),
                };
                j.outer(&a.grad, &a.grad, v);
                j
            }
            Expr::Log { arg } => {
                let a = arg.jet_inner(x)?;
                if !(a.value > T::zero()) {
                    return Err(Error::Numerical(format!("log of non-positive value {}", a.value)));
                }
                let inv = T::one() / a.value;
                let mut j = Jet {
                    value: a.value.ln(),
                    grad: a.grad.iter().map(|&p| inv * p).collect(),
                    hess: a.hess.iter().map(|&p| inv * p).collect(),
                };
                j.outer(&a.grad, &a.grad, -inv * inv);
                j
            }
            Expr::Affine { scale, shift, arg } => {
                let a = arg.jet_inner(x)?;
                let s = T::lit(*scale);
                Jet {
                    value: s * a.value + T::lit(*shift),
                    grad: a.grad.iter().map(|&p| s * p).collect(),
                    hess: a.hess.iter().map(|&p| s * p).collect(),
                }
            }
        })
    }

    pub fn eval<T: Real>(&self, x: &[T]) -> Result<T> {
        Ok(self.jet(x)?.value)
    }

    /// Largest disagreement between the exact gradient/Hessian and central
    /// finite differences with step `h`.
    pub fn finite_difference_defect(&self, x: &[f64], h: f64) -> Result<f64> {
        let k = x.len();
        let jet = self.jet(x)?;
        let mut worst = 0.0_f64;
        let shifted = |i: usize, d: f64| -> Result<Jet<f64>> {
            let mut y = x.to_vec();
            y[i] += d;
            self.jet(&y)
        };
        for i in 0..k {
            let plus = shifted(i, h)?;
            let minus = shifted(i, -h)?;
            let g = (plus.value - minus.value) / (2.0 * h);
            worst = worst.max((g - jet.grad[i]).abs());
            for j in 0..k {
                let hij = (plus.grad[j] - minus.grad[j]) / (2.0 * h);
                worst = worst.max((hij - jet.hess[i * k + j]).abs());
            }
        }
        Ok(worst)
    }
}

/// `γ ↦ F(f_1*γ, ..., f_k*γ)`.
#[derive(Clone, Debug, PartialEq)]
pub struct CylinderFunction<T> {
    inner: Vec<BaseFunction<T>>,
    outer: Expr,
}

impl<T: Real> CylinderFunction<T> {
    pub fn new(inner: Vec<BaseFunction<T>>, outer: Expr) -> Result<Self> {
        if outer.arity() > inner.len() {
            return Err(Error::Dimension(format!(
                "outer expression uses {} variables but {} inner functions were given",
                outer.arity(),
                inner.len()
            )));
        }
        if let Some(w) = inner.windows(2).find(|w| w[0].len() != w[1].len()) {
            return Err(Error::Dimension(format!("inner functions of lengths {} and {}", w[0].len(), w[1].len())));
        }
        Ok(Self { inner, outer })
    }

    pub fn inner(&self) -> &[BaseFunction<T>] {
        &self.inner
    }

    pub fn outer(&self) -> &Expr {
        &self.outer
    }

    fn arguments(&self, c: &Configuration) -> Vec<T> {
        self.inner
            .iter()
            .map(|f| {
                f.values
                    .iter()
                    .zip(c.occupation())
                    .map(|(&v, &k)| v * T::of_usize(k as usize))
                    .sum()
            })
            .collect()
    }

    pub fn jet_at(&self, c: &Configuration) -> Result<Jet<T>> {
        self.outer.jet(&self.arguments(c))
    }

    pub fn value(&self, c: &Configuration) -> Result<T> {
        Ok(self.jet_at(c)?.value)
    }

    pub fn tabulate(&self, space: &ConfigSpace<T>) -> Result<ConfigFunction<T>> {
        Ok(ConfigFunction::new(
            space.configs().iter().map(|c| self.value(c)).collect::<Result<_>>()?,
        ))
    }
}

/// `γ ↦ Π_x (1 + f(x))^{γ_x}` with `f > -1`.
#[derive(Clone, Debug, PartialEq)]
pub struct ExpCylinder<T> {
    f: BaseFunction<T>,
}

impl<T: Real> ExpCylinder<T> {
    pub fn new(f: BaseFunction<T>) -> Result<Self> {
        if let Some(x) = f.values.iter().position(|&v| !(v > -T::one()) || !v.is_finite()) {
            return Err(Error::InvalidArgument(format!("exponential cylinder needs f > -1, fails at state {x}")));
        }
        Ok(Self { f })
    }

    pub fn f(&self) -> &BaseFunction<T> {
        &self.f
    }

    /// Whether `-δ <= f <= 0`.
    pub fn in_box(&self, delta: T) -> bool {
        self.f.values.iter().all(|&v| v <= T::zero() && v >= -delta)
    }

    pub fn value(&self, c: &Configuration) -> T {
        self.f
            .values
            .iter()
            .zip(c.occupation())
            .fold(T::one(), |acc, (&v, &k)| acc * (T::one() + v).powi(k as i32))
    }

    pub fn tabulate(&self, space: &ConfigSpace<T>) -> ConfigFunction<T> {
        ConfigFunction::new(space.configs().iter().map(|c| self.value(c)).collect())
    }
}

/// `Γ^Υ(u,v)` for cylinder functions through the chain rule:
/// `Σ_{i,j} ∂_iF ∂_jG Γ(f_i, g_j)*γ`.
pub fn gamma_cylinder<T: Real>(
    space: &ConfigSpace<T>,
    u: &CylinderFunction<T>,
    v: &CylinderFunction<T>,
) -> Result<ConfigFunction<T>> {
    let base = space.base();
    let cross: Vec<Vec<Vec<T>>> = u
        .inner
        .iter()
        .map(|f| {
            v.inner
                .iter()
                .map(|g| Ok(space.star_table(&base.square_field(f, g)?)))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    let values = space
        .configs()
        .iter()
        .enumerate()
        .map(|(idx, c)| {
            let ju = u.jet_at(c)?;
            let jv = v.jet_at(c)?;
            let mut acc = T::zero();
            for (i, row) in cross.iter().enumerate() {
                for (j, table) in row.iter().enumerate() {
                    acc += ju.grad[i] * jv.grad[j] * table[idx];
                }
            }
            Ok(acc)
        })
        .collect::<Result<_>>()?;
    Ok(ConfigFunction::new(values))
}

/// Second-order chain-rule approximation of the lifted generator on a cylinder
/// function: `Σ_j ∂_jG (Lg_j)* + Σ_{p,q} ∂²_{pq}G Γ(g_p,g_q)*`.
fn cylinder_generator_formula<T: Real>(space: &ConfigSpace<T>, v: &CylinderFunction<T>) -> Result<ConfigFunction<T>> {
    let base = space.base();
    let k = v.inner.len();
    let drift: Vec<Vec<T>> = v
        .inner
        .iter()
        .map(|g| Ok(space.star_table(&base.generator_apply(g)?)))
        .collect::<Result<_>>()?;
    let mut fields = Vec::with_capacity(k * k);
    for p in 0..k {
        for q in 0..k {
            fields.push(space.star_table(&base.square_field(&v.inner[p], &v.inner[q])?));
        }
    }
    let values = space
        .configs()
        .iter()
        .enumerate()
        .map(|(idx, c)| {
            let j = v.jet_at(c)?;
            let mut acc = T::zero();
            for (p, d) in drift.iter().enumerate() {
                acc += j.grad[p] * d[idx];
            }
            for (pq, f) in fields.iter().enumerate() {
                acc += j.hess[pq] * f[idx];
            }
            Ok(acc)
        })
        .collect::<Result<_>>()?;
    Ok(ConfigFunction::new(values))
}

fn cylinder_report(id: &str, affine: bool, worst: MaxTracker, scale: f64) -> DefectReport {
    let report = if affine {
        DefectReport::exact(id, worst.defect(), 1e-12 * scale.max(1.0), 0.0)
    } else {
        DefectReport::asymptotic(id, worst.defect())
    };
    report.with_witness(worst.witness)
}

/// Lifted generator on a cylinder function against its chain-rule formula.
/// Exact for affine outer functions; otherwise the defect is a discretization
/// remainder reported without a verdict.
pub fn check_cylinder_generator_formula<T: Real>(
    space: &ConfigSpace<T>,
    v: &CylinderFunction<T>,
) -> Result<DefectReport> {
    let exact = lifted_generator_apply(space, &v.tabulate(space)?)?;
    let formula = cylinder_generator_formula(space, v)?;
    let mut worst = MaxTracker::new();
    for (i, (&a, &b)) in exact.values.iter().zip(&formula.values).enumerate() {
        worst.offer((a - b).abs().as_f64(), || space.config(i).label(space.base().states()));
    }
    Ok(cylinder_report(
        "lift.cylinder_generator",
        v.outer.is_affine(),
        worst,
        exact.sup_norm().as_f64(),
    ))
}

/// Lifted square field of a cylinder function against the chain-rule formula.
pub fn check_cylinder_gamma_formula<T: Real>(space: &ConfigSpace<T>, u: &CylinderFunction<T>) -> Result<DefectReport> {
    let exact = gamma_section(space, &u.tabulate(space)?)?;
    let formula = gamma_cylinder(space, u, u)?;
    let mut worst = MaxTracker::new();
    for (i, (&a, &b)) in exact.values.iter().zip(&formula.values).enumerate() {
        worst.offer((a - b).abs().as_f64(), || space.config(i).label(space.base().states()));
    }
    Ok(cylinder_report(
        "lift.cylinder_gamma",
        u.outer.is_affine(),
        worst,
        exact.sup_norm().as_f64(),
    ))
}
