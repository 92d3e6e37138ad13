//! Scalar abstraction shared by every numerical routine in the crate.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, NumAssign, ToPrimitive};

/// Floating point scalar the lab can run on: `f32` or `f64`.
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + Sum
    + Debug
    + Display
    + Default
    + Send
    + Sync
    + 'static
{
    /// Converts an `f64` literal. Panics only if the value is not representable at all.
    #[inline]
    fn lit(x: f64) -> Self {
        <Self as FromPrimitive>::from_f64(x).expect("literal representable in scalar type")
    }

    #[inline]
    fn of_usize(n: usize) -> Self {
        <Self as FromPrimitive>::from_usize(n).expect("count representable in scalar type")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        ToPrimitive::to_f64(&self).unwrap_or(f64::NAN)
    }

    /// `max(requested, 64 eps)`: a tolerance that stays meaningful for `f32`.
    #[inline]
    fn tol(requested: f64) -> Self {
        let floor = Self::epsilon() * Self::lit(64.0);
        let req = Self::lit(requested);
        if req > floor {
            req
        } else {
            floor
        }
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// `I_K(t) = (e^{Kt} - 1)/K`, with the removable singularity at `K = 0` filled by `t`.
pub fn i_k<T: Real>(k: T, t: T) -> T {
    if k == T::zero() {
        t
    } else {
        (k * t).exp_m1() / k
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn i_k_limit_and_formula() {
        assert_eq!(i_k(0.0_f64, 0.7), 0.7);
        let k = 1e-9_f64;
        assert!((i_k(k, 0.7) - 0.7).abs() < 1e-9);
        let v: f64 = i_k(2.0, 0.5);
        assert!((v - (1.0_f64.exp() - 1.0) / 2.0).abs() < 1e-15);
    }

    #[test]
    fn tol_floors_at_precision() {
        assert_eq!(<f64 as Real>::tol(1e-12), 1e-12);
        assert!(<f32 as Real>::tol(1e-12) > 1e-6);
    }
}
