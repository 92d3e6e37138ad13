//! Finite reversible Markov base spaces.
//!
//! A [`FiniteBaseSpace`] is a finite state set with a strictly positive
//! reference measure `m`, a rate matrix `Q` in detailed balance with `m`, and
//! optionally a metric. Everything the configuration-space layer needs from
//! the base lives here: the generator, the square field
//! `Γ(f,g)(x) = ½ Σ_y Q[x,y] (f(y)-f(x)) (g(y)-g(x))`, the heat semigroup
//! `exp(tQ)` and base-level curvature estimates.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{expm, Matrix};
use crate::report::{DefectReport, MaxTracker};
use crate::scalar::{i_k, Real};

/// Real function on the states of a base space.
#[derive(Clone, Debug, PartialEq)]
pub struct BaseFunction<T> {
    pub values: Vec<T>,
}

impl<T: Real> BaseFunction<T> {
    pub fn new(values: Vec<T>) -> Self {
        Self { values }
    }

    pub fn constant(n: usize, c: T) -> Self {
        Self { values: vec![c; n] }
    }

    pub fn indicator(n: usize, state: usize) -> Self {
        let mut values = vec![T::zero(); n];
        values[state] = T::one();
        Self { values }
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

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}

impl<T> From<Vec<T>> for BaseFunction<T> {
    fn from(values: Vec<T>) -> Self {
        Self { values }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FiniteBaseSpace<T> {
    states: Vec<String>,
    m: Vec<T>,
    q: Matrix<T>,
    d: Option<Matrix<T>>,
}

/// JSON document form of a base space: `{states, m, Q, d}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BaseSpaceDoc {
    pub states: Vec<String>,
    pub m: Vec<f64>,
    #[serde(rename = "Q")]
    pub q: Vec<Vec<f64>>,
    pub d: Option<Vec<Vec<f64>>>,
}

impl<T: Real> FiniteBaseSpace<T> {
    /// Builds and validates a base space.
    pub fn new(states: Vec<String>, m: Vec<T>, q: Matrix<T>, d: Option<Matrix<T>>) -> Result<Self> {
        let space = Self { states, m, q, d };
        space.validate()?;
        Ok(space)
    }

    fn validate(&self) -> Result<()> {
        let n = self.states.len();
        if n == 0 {
            return Err(Error::InvalidBase("empty state set".into()));
        }
        if self.m.len() != n || self.q.rows() != n || self.q.cols() != n {
            return Err(Error::Dimension(format!(
                "{n} states, {} masses, {}x{} rate matrix",
                self.m.len(),
                self.q.rows(),
                self.q.cols()
            )));
        }
        if let Some(pos) = self.m.iter().position(|&w| !(w > T::zero()) || !w.is_finite()) {
            return Err(Error::InvalidBase(format!("reference weight m[{pos}] must be positive and finite")));
        }
        let scale = T::one().max(self.q.max_abs());
        let row_tol = T::tol(1e-12) * scale;
        for x in 0..n {
            let row = self.q.row(x);
            if row.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidBase(format!("non-finite rate in row {x}")));
            }
            for (y, &r) in row.iter().enumerate() {
                if x != y && r < T::zero() {
                    return Err(Error::InvalidBase(format!("negative rate Q[{x},{y}]")));
                }
            }
            let sum: T = row.iter().copied().sum();
            if sum.abs() > row_tol {
                return Err(Error::InvalidBase(format!("row {x} of Q sums to {sum}, not 0")));
            }
        }
        for x in 0..n {
            for y in x + 1..n {
                let lhs = self.m[x] * self.q[(x, y)];
                let rhs = self.m[y] * self.q[(y, x)];
                let tol = T::tol(1e-12) * T::one().max(lhs.abs().max(rhs.abs()));
                if (lhs - rhs).abs() > tol {
                    return Err(Error::InvalidBase(format!("detailed balance fails for states ({x},{y})")));
                }
            }
        }
        if !self.is_irreducible() {
            return Err(Error::InvalidBase("rate matrix is reducible".into()));
        }
        if let Some(d) = &self.d {
            validate_metric(d, n)?;
        }
        Ok(())
    }

    fn is_irreducible(&self) -> bool {
        let n = self.n();
        let reach = |forward: bool| {
            let mut seen = vec![false; n];
            let mut stack = vec![0usize];
            seen[0] = true;
            while let Some(x) = stack.pop() {
                for y in 0..n {
                    let rate = if forward { self.q[(x, y)] } else { self.q[(y, x)] };
                    if y != x && rate > T::zero() && !seen[y] {
                        seen[y] = true;
                        stack.push(y);
                    }
                }
            }
            seen.into_iter().all(|s| s)
        };
        reach(true) && reach(false)
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.states.len()
    }

    pub fn states(&self) -> &[String] {
        &self.states
    }

    pub fn m(&self) -> &[T] {
        &self.m
    }

    /// Total reference mass `m(X)`.
    pub fn total_mass(&self) -> T {
        self.m.iter().copied().sum()
    }

    pub fn q(&self) -> &Matrix<T> {
        &self.q
    }

    pub fn metric(&self) -> Option<&Matrix<T>> {
        self.d.as_ref()
    }

    pub fn require_metric(&self) -> Result<&Matrix<T>> {
        self.d.as_ref().ok_or(Error::MissingMetric)
    }

    pub fn max_rate(&self) -> T {
        self.q.max_abs()
    }

    fn check_dim(&self, f: &BaseFunction<T>) -> Result<()> {
        if f.len() != self.n() {
            return Err(Error::Dimension(format!("function of length {} on {} states", f.len(), self.n())));
        }
        Ok(())
    }

    /// `(Lf)(x) = Σ_y Q[x,y] (f(y) - f(x))`.
    pub fn generator_apply(&self, f: &BaseFunction<T>) -> Result<BaseFunction<T>> {
        self.check_dim(f)?;
        let values = (0..self.n())
            .map(|x| {
                let fx = f.values[x];
                self.q
                    .row(x)
                    .iter()
                    .zip(&f.values)
                    .enumerate()
                    .filter(|&(y, _)| y != x)
                    .map(|(_, (&r, &fy))| r * (fy - fx))
                    .sum()
            })
            .collect();
        Ok(BaseFunction { values })
    }

    /// `Γ(f,g)(x) = ½ Σ_y Q[x,y] (f(y)-f(x)) (g(y)-g(x))`.
    pub fn square_field(&self, f: &BaseFunction<T>, g: &BaseFunction<T>) -> Result<BaseFunction<T>> {
        self.check_dim(f)?;
        self.check_dim(g)?;
        let half = T::lit(0.5);
        let values = (0..self.n())
            .map(|x| {
                let (fx, gx) = (f.values[x], g.values[x]);
                half * (0..self.n())
                    .filter(|&y| y != x)
                    .map(|y| self.q[(x, y)] * (f.values[y] - fx) * (g.values[y] - gx))
                    .sum::<T>()
            })
            .collect();
        Ok(BaseFunction { values })
    }

    /// Right-hand side of the carré-du-champ identity, `½(L(fg) - f Lg - g Lf)`.
    pub fn carre_du_champ(&self, f: &BaseFunction<T>, g: &BaseFunction<T>) -> Result<BaseFunction<T>> {
        let fg = f.zip_map(g, |a, b| a * b);
        let l_fg = self.generator_apply(&fg)?;
        let l_f = self.generator_apply(f)?;
        let l_g = self.generator_apply(g)?;
        let half = T::lit(0.5);
        let values = (0..self.n())
            .map(|x| half * (l_fg.values[x] - f.values[x] * l_g.values[x] - g.values[x] * l_f.values[x]))
            .collect();
        Ok(BaseFunction { values })
    }

    /// Heat semigroup `T_t = exp(tQ)` as a row-stochastic matrix.
    ///
    /// Negative entries above `-1e-14` are rounding and get clamped to zero;
    /// anything more negative means the rate matrix is broken.
    pub fn semigroup_matrix(&self, t: T) -> Result<Matrix<T>> {
        if !(t >= T::zero()) || !t.is_finite() {
            return Err(Error::InvalidArgument(format!("semigroup time must be >= 0, got {t}")));
        }
        if t == T::zero() {
            return Ok(Matrix::identity(self.n()));
        }
        let mut h = expm(&self.q.scale(t))?;
        let clamp = T::tol(1e-14);
        let n = self.n();
        for x in 0..n {
            for y in 0..n {
                let v = h[(x, y)];
                if v < T::zero() {
                    if v < -clamp {
                        return Err(Error::Numerical(format!("heat kernel entry ({x},{y}) = {v} is negative")));
                    }
                    h[(x, y)] = T::zero();
                }
            }
        }
        Ok(h)
    }

    /// `T_t f` for a single function.
    pub fn semigroup_apply(&self, f: &BaseFunction<T>, t: T) -> Result<BaseFunction<T>> {
        self.check_dim(f)?;
        Ok(BaseFunction::new(self.semigroup_matrix(t)?.mul_vec(&f.values)))
    }

    /// Heat kernel `h_t(x, y)`, the transition probability of the base chain.
    pub fn heat_kernel(&self, t: T, x: usize, y: usize) -> Result<T> {
        Ok(self.semigroup_matrix(t)?[(x, y)])
    }

    /// Smallest nonzero eigenvalue of `-Q`, via the symmetrization `D^{1/2} Q D^{-1/2}`.
    pub fn spectral_gap(&self) -> f64 {
        let n = self.n();
        let sq: Vec<f64> = self.m.iter().map(|w| w.as_f64().sqrt()).collect();
        let sym = nalgebra::DMatrix::from_fn(n, n, |i, j| -self.q[(i, j)].as_f64() * sq[i] / sq[j]);
        let sym = (&sym + sym.transpose()) * 0.5;
        let mut eig: Vec<f64> = sym.symmetric_eigenvalues().iter().copied().collect();
        eig.sort_by(|a, b| a.partial_cmp(b).unwrap());
        eig.get(1).copied().unwrap_or(0.0)
    }

    pub fn to_doc(&self) -> BaseSpaceDoc {
        BaseSpaceDoc {
            states: self.states.clone(),
            m: self.m.iter().map(|w| w.as_f64()).collect(),
            q: self.q.to_rows().into_iter().map(|r| r.into_iter().map(Real::as_f64).collect()).collect(),
            d: self
                .d
                .as_ref()
                .map(|d| d.to_rows().into_iter().map(|r| r.into_iter().map(Real::as_f64).collect()).collect()),
        }
    }

    pub fn from_doc(doc: &BaseSpaceDoc) -> Result<Self> {
        let conv = |rows: &[Vec<f64>]| -> Result<Matrix<T>> {
            Matrix::from_rows(&rows.iter().map(|r| r.iter().map(|&v| T::lit(v)).collect()).collect::<Vec<_>>())
        };
        let q = conv(&doc.q)?;
        let d = doc.d.as_deref().map(conv).transpose()?;
        Self::new(doc.states.clone(), doc.m.iter().map(|&v| T::lit(v)).collect(), q, d)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.to_doc())?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: BaseSpaceDoc = serde_json::from_str(text)?;
        Self::from_doc(&doc)
    }
}

fn validate_metric<T: Real>(d: &Matrix<T>, n: usize) -> Result<()> {
    if d.rows() != n || d.cols() != n {
        return Err(Error::Dimension(format!("metric is {}x{}, expected {n}x{n}", d.rows(), d.cols())));
    }
    let tol = T::tol(1e-12) * T::one().max(d.max_abs());
    for x in 0..n {
        if d[(x, x)] != T::zero() {
            return Err(Error::InvalidBase(format!("metric d[{x},{x}] is not zero")));
        }
        for y in 0..n {
            let v = d[(x, y)];
            if !v.is_finite() || v < T::zero() {
                return Err(Error::InvalidBase(format!("metric entry ({x},{y}) must be finite and >= 0")));
            }
            if v != d[(y, x)] {
                return Err(Error::InvalidBase(format!("metric not symmetric at ({x},{y})")));
            }
        }
    }
    for x in 0..n {
        for y in 0..n {
            for z in 0..n {
                if d[(x, z)] > d[(x, y)] + d[(y, z)] + tol {
                    return Err(Error::InvalidBase(format!("triangle inequality fails for ({x},{y},{z})")));
                }
            }
        }
    }
    Ok(())
}

/// Two states `a`, `b` with unit masses, jump rate `rate` both ways, `d(a,b) = 1`.
pub fn build_two_state<T: Real>(rate: T) -> Result<FiniteBaseSpace<T>> {
    if !(rate > T::zero()) || !rate.is_finite() {
        return Err(Error::InvalidArgument(format!("two-state rate must be positive, got {rate}")));
    }
    let q = Matrix::from_rows(&[vec![-rate, rate], vec![rate, -rate]])?;
    let d = Matrix::from_rows(&[vec![T::zero(), T::one()], vec![T::one(), T::zero()]])?;
    FiniteBaseSpace::new(vec!["a".into(), "b".into()], vec![T::one(); 2], q, Some(d))
}

/// Nearest-neighbour walk on `n` equally spaced points of the unit circle.
///
/// Masses are `2π/n` per site and the metric is arc length. With
/// `rate = (n/2π)²` the walk approximates the circle heat semigroup.
pub fn build_circle<T: Real>(n: usize, rate: T) -> Result<FiniteBaseSpace<T>> {
    if n < 3 {
        return Err(Error::InvalidArgument(format!("circle needs at least 3 sites, got {n}")));
    }
    if !(rate > T::zero()) || !rate.is_finite() {
        return Err(Error::InvalidArgument(format!("circle rate must be positive, got {rate}")));
    }
    let h = T::TAU() / T::of_usize(n);
    let mut q = Matrix::zeros(n, n);
    let mut d = Matrix::zeros(n, n);
    for i in 0..n {
        q[(i, (i + 1) % n)] = rate;
        q[(i, (i + n - 1) % n)] = rate;
        q[(i, i)] = -(rate + rate);
        for j in 0..n {
            let gap = i.abs_diff(j);
            d[(i, j)] = T::of_usize(gap.min(n - gap)) * h;
        }
    }
    let states = (0..n).map(|i| i.to_string()).collect();
    FiniteBaseSpace::new(states, vec![h; n], q, Some(d))
}

/// Rate that pins the continuum limit of [`build_circle`] to the unit-speed heat flow.
pub fn circle_diffusive_rate(n: usize) -> f64 {
    let r = n as f64 / std::f64::consts::TAU;
    r * r
}

/// Location of the largest gradient-estimate violation.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BeWitness {
    pub sample: usize,
    pub t: f64,
    pub state: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BEResult {
    pub c: f64,
    pub k_best: f64,
    pub t_grid: Vec<f64>,
    pub max_defect: f64,
    pub witness: BeWitness,
}

/// Coordinate indicators followed by `random` seeded standard-normal vectors.
pub fn default_base_samples<T: Real>(n: usize, random: usize, seed: u64) -> Vec<BaseFunction<T>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out: Vec<_> = (0..n).map(|x| BaseFunction::indicator(n, x)).collect();
    for _ in 0..random {
        let values = (0..n)
            .map(|_| {
                let z: f64 = StandardNormal.sample(&mut rng);
                T::lit(z)
            })
            .collect();
        out.push(BaseFunction::new(values));
    }
    out
}

pub const BE_BISECTION_TOL: f64 = 1e-6;

/// Largest `K` for which `Γ(T_t f) ≤ c e^{-2Kt} T_t Γ(f)` holds pointwise on
/// every sample and grid time, by bisection on `[-10 max|Q|, 10 max|Q|]`.
pub fn best_be_constant<T: Real>(
    space: &FiniteBaseSpace<T>,
    c: T,
    t_grid: &[T],
    f_samples: &[BaseFunction<T>],
) -> Result<BEResult> {
    if t_grid.is_empty() || f_samples.is_empty() {
        return Err(Error::InvalidArgument("best_be_constant needs a time grid and samples".into()));
    }
    if t_grid.iter().any(|&t| !(t > T::zero())) {
        return Err(Error::InvalidArgument("time grid must be positive".into()));
    }
    if !(c >= T::one()) {
        return Err(Error::InvalidArgument(format!("BE constant c must be >= 1, got {c}")));
    }
    // (t index, sample index, state, Γ(T_t f)(x), T_t Γ(f)(x))
    let mut terms = Vec::new();
    for (ti, &t) in t_grid.iter().enumerate() {
        let h = space.semigroup_matrix(t)?;
        for (si, f) in f_samples.iter().enumerate() {
            let tf = BaseFunction::new(h.mul_vec(&f.values));
            let lhs = space.square_field(&tf, &tf)?;
            let rhs = h.mul_vec(&space.square_field(f, f)?.values);
            for x in 0..space.n() {
                terms.push((ti, si, x, lhs.values[x], rhs[x]));
            }
        }
    }
    let slack = T::tol(1e-12);
    let feasible = |k: T| {
        terms.iter().all(|&(ti, _, _, lhs, rhs)| {
            let bound = c * (-(k + k) * t_grid[ti]).exp() * rhs;
            lhs - bound <= slack * lhs.abs().max(bound.abs()) + T::tol(1e-15)
        })
    };
    let span = T::lit(10.0) * space.max_rate().max(T::one());
    let (mut lo, mut hi) = (-span, span);
    if !feasible(lo) {
        return Err(Error::Numerical(format!("gradient estimate fails even at K = {lo}")));
    }
    let k_best = if feasible(hi) {
        hi
    } else {
        let tol = T::lit(BE_BISECTION_TOL);
        while hi - lo > tol {
            let mid = (lo + hi) * T::lit(0.5);
            if feasible(mid) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        lo
    };
    let mut best = (f64::NEG_INFINITY, BeWitness { sample: 0, t: 0.0, state: 0 });
    for &(ti, si, x, lhs, rhs) in &terms {
        let defect = (lhs - c * (-(k_best + k_best) * t_grid[ti]).exp() * rhs).as_f64();
        if defect > best.0 {
            best = (defect, BeWitness { sample: si, t: t_grid[ti].as_f64(), state: x });
        }
    }
    Ok(BEResult {
        c: c.as_f64(),
        k_best: k_best.as_f64(),
        t_grid: t_grid.iter().map(|t| t.as_f64()).collect(),
        max_defect: best.0,
        witness: best.1,
    })
}

/// Base-level logarithmic Harnack defect
/// `max (T_t log f)(x) - log (T_t f)(y) - d(x,y)²/(4 I_{2K}(t))`.
pub fn check_log_harnack_base<T: Real>(
    space: &FiniteBaseSpace<T>,
    k: T,
    t_grid: &[T],
    f_samples: &[BaseFunction<T>],
) -> Result<DefectReport> {
    let d = space.require_metric()?;
    if f_samples.iter().any(|f| f.values.iter().any(|&v| !(v > T::zero()) || !v.is_finite())) {
        return Err(Error::InvalidArgument("log-Harnack samples must be strictly positive and bounded".into()));
    }
    if t_grid.iter().any(|&t| !(t > T::zero())) {
        return Err(Error::InvalidArgument("time grid must be positive".into()));
    }
    let n = space.n();
    let four = T::lit(4.0);
    let mut worst = MaxTracker::new();
    for &t in t_grid {
        let h = space.semigroup_matrix(t)?;
        let denom = four * i_k(k + k, t);
        for (si, f) in f_samples.iter().enumerate() {
            let log_f: Vec<T> = f.values.iter().map(|v| v.ln()).collect();
            let t_log_f = h.mul_vec(&log_f);
            let log_t_f: Vec<T> = h.mul_vec(&f.values).into_iter().map(|v| v.ln()).collect();
            for x in 0..n {
                for y in 0..n {
                    let dxy = d[(x, y)];
                    let defect = t_log_f[x] - log_t_f[y] - dxy * dxy / denom;
                    worst.offer(defect.as_f64(), || format!("sample={si} t={t} x={x} y={y}"));
                }
            }
        }
    }
    Ok(DefectReport::asymptotic("base.log_harnack", worst.defect()).with_witness(worst.witness))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn two_state_construction() {
        let s = build_two_state(1.0_f64).unwrap();
        for x in 0..2 {
            assert_abs_diff_eq!(s.q().row(x).iter().sum::<f64>(), 0.0);
        }
        assert_eq!(s.m()[0] * s.q()[(0, 1)], s.m()[1] * s.q()[(1, 0)]);
        assert_abs_diff_eq!(s.spectral_gap(), 2.0, epsilon = 1e-12);
        assert!(build_two_state(0.0_f64).is_err());
        assert!(build_two_state(-1.0_f64).is_err());
    }

    #[test]
    fn two_state_heat_kernel_closed_form() {
        let s = build_two_state(3.0_f64).unwrap();
        for &t in &[0.01_f64, 0.2, 1.0] {
            let expect = (1.0 - (-6.0 * t).exp()) / 2.0;
            assert_abs_diff_eq!(s.heat_kernel(t, 0, 1).unwrap(), expect, epsilon = 1e-14);
        }
        let s = build_two_state(1.0_f64).unwrap();
        assert_abs_diff_eq!(s.heat_kernel(1.0, 0, 0).unwrap(), (1.0 + (-2.0_f64).exp()) / 2.0, epsilon = 1e-14);
    }

    #[test]
    fn circle_construction() {
        let s = build_circle(4, 1.0_f64).unwrap();
        let row0: Vec<f64> = s.q().row(0).to_vec();
        assert_eq!(row0, vec![-2.0, 1.0, 0.0, 1.0]);
        let s = build_circle(8, 1.0_f64).unwrap();
        let h = std::f64::consts::TAU / 8.0;
        assert_abs_diff_eq!(s.metric().unwrap()[(0, 5)], 3.0 * h, epsilon = 1e-15);
        assert!(build_circle::<f64>(2, 1.0).is_err());
    }

    #[test]
    fn square_field_two_state_indicator() {
        let s = build_two_state(1.0_f64).unwrap();
        let f = BaseFunction::new(vec![0.0, 1.0]);
        let g = s.square_field(&f, &f).unwrap();
        assert_eq!(g.values, vec![0.5, 0.5]);
        let c = BaseFunction::constant(2, 3.0);
        assert_eq!(s.square_field(&c, &c).unwrap().values, vec![0.0, 0.0]);
        assert!(s.square_field(&BaseFunction::new(vec![1.0]), &f).is_err());
    }

    #[test]
    fn semigroup_laws_on_circle() {
        let s = build_circle(8, 1.0_f64).unwrap();
        assert_eq!(s.semigroup_matrix(0.0).unwrap(), Matrix::identity(8));
        let a = s.semigroup_matrix(0.3).unwrap();
        let b = s.semigroup_matrix(0.9).unwrap();
        let ab = s.semigroup_matrix(1.2).unwrap();
        assert!(a.matmul(&b).max_abs_diff(&ab) < 1e-10);
        for x in 0..8 {
            assert_abs_diff_eq!(ab.row(x).iter().sum::<f64>(), 1.0, epsilon = 1e-12);
        }
        assert!(s.semigroup_matrix(-1.0).is_err());
    }

    #[test]
    fn f32_semigroup_runs() {
        let s = build_two_state(1.0_f32).unwrap();
        let h = s.heat_kernel(1.0, 0, 0).unwrap();
        assert!((h - (1.0 + (-2.0_f32).exp()) / 2.0).abs() < 1e-6);
    }

    #[test]
    fn be_two_state_closed_form() {
        let s = build_two_state(1.0_f64).unwrap();
        let samples = default_base_samples(2, 32, 7);
        let grid = [0.1, 0.5, 1.0, 2.0];
        let r = best_be_constant(&s, 1.0, &grid, &samples).unwrap();
        assert!((r.k_best - 2.0).abs() < 1e-5, "{}", r.k_best);
        let r2 = best_be_constant(&s, 2.0, &grid, &samples).unwrap();
        assert!(r2.k_best >= r.k_best);
        assert!(best_be_constant(&s, 1.0, &[], &samples).is_err());
        assert!(best_be_constant(&s, 1.0, &grid, &[]).is_err());
    }

    #[test]
    fn be_circle_nonnegative() {
        let s = build_circle(8, 1.0_f64).unwrap();
        let samples = default_base_samples(8, 32, 7);
        let grid = [0.1, 0.5, 1.0, 2.0];
        let r = best_be_constant(&s, 1.0, &grid, &samples).unwrap();
        assert!(r.k_best >= 0.0);
    }

    #[test]
    fn log_harnack_constant_and_diagonal() {
        let s = build_circle(8, 1.0_f64).unwrap();
        let c = BaseFunction::constant(8, 2.5);
        let r = check_log_harnack_base(&s, 0.0, &[0.5], &[c]).unwrap();
        // diagonal pairs give exactly zero for constants
        assert_abs_diff_eq!(r.max_defect, 0.0, epsilon = 1e-14);
        let bad = BaseFunction::new(vec![1.0; 8].into_iter().enumerate().map(|(i, v)| v - i as f64 * 0.2).collect());
        assert!(check_log_harnack_base(&s, 0.0, &[0.5], &[bad]).is_err());
        let q = Matrix::from_rows(&[vec![-1.0, 1.0], vec![1.0, -1.0]]).unwrap();
        let no_metric = FiniteBaseSpace::new(vec!["a".into(), "b".into()], vec![1.0, 1.0], q, None).unwrap();
        assert!(matches!(
            check_log_harnack_base(&no_metric, 0.0, &[0.5], &[BaseFunction::constant(2, 1.0)]),
            Err(Error::MissingMetric)
        ));
    }

    #[test]
    fn json_round_trip_and_validation() {
        let s = build_circle(5, 2.0_f64).unwrap();
        let back = FiniteBaseSpace::<f64>::from_json(&s.to_json().unwrap()).unwrap();
        assert_eq!(s, back);
        let bad = r#"{"states":["a","b"],"m":[1,1],"Q":[[-1,2],[1,-1]],"d":null}"#;
        assert!(FiniteBaseSpace::<f64>::from_json(bad).is_err());
        let unbalanced = r#"{"states":["a","b"],"m":[1,2],"Q":[[-1,1],[1,-1]],"d":null}"#;
        assert!(FiniteBaseSpace::<f64>::from_json(unbalanced).is_err());
        let reducible = r#"{"states":["a","b"],"m":[1,1],"Q":[[0,0],[0,0]],"d":null}"#;
        assert!(FiniteBaseSpace::<f64>::from_json(reducible).is_err());
        let unknown = r#"{"states":["a"],"m":[1],"Q":[[0]],"d":null,"extra":1}"#;
        assert!(FiniteBaseSpace::<f64>::from_json(unknown).is_err());
    }
}
