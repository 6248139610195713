//! Scalar abstraction shared by the numeric kernels.
//!
//! Every kernel that does arithmetic on physical or economic quantities is
//! written against [`Scalar`] so it can run in `f32` for quick exploration
//! or `f64` for planning runs. The domain model itself is stored in
//! [`crate::Real`].

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};

/// Floating point number usable by the core kernels.
pub trait Scalar: Float + FromPrimitive + ToPrimitive + NumAssign + Sum + Debug + Display + Default + Send + Sync + 'static {
    /// Converts an `f64` literal, panicking only if the target cannot hold it at all.
    fn lit(value: f64) -> Self {
        Self::from_f64(value).expect("literal representable in scalar type")
    }

    /// Primal/dual feasibility tolerance appropriate for this precision.
    ///
    /// `eps^0.6`: about 4e-10 for `f64`, 7e-5 for `f32`.
    fn feas_tol() -> Self {
        Self::epsilon().powf(Self::lit(0.6))
    }

    /// Smallest pivot magnitude the simplex accepts.
    fn pivot_tol() -> Self {
        Self::epsilon().powf(Self::lit(0.7))
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// `|a - b| <= tol * max(|a|, |b|, 1)`.
pub fn rel_close<T: Scalar>(a: T, b: T, tol: T) -> bool {
    let scale = a.abs().max(b.abs()).max(T::one());
    (a - b).abs() <= tol * scale
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tolerances_track_precision() {
        assert!(f64::feas_tol() < 1e-9);
        assert!(f32::feas_tol() > 1e-6 && f32::feas_tol() < 1e-3);
        assert!(f64::pivot_tol() < f64::feas_tol());
    }

    #[test]
    fn rel_close_uses_unit_floor() {
        assert!(rel_close(0.0_f64, 1e-9, 1e-6));
        assert!(!rel_close(1e6_f64, 1e6 + 10.0, 1e-6));
        assert!(rel_close(1e6_f64, 1e6 + 0.5, 1e-6));
    }
}
