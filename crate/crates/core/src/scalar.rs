//! Scalar abstraction for the numeric kernels.
//!
//! All probability and linear-algebra code in this crate is generic over a
//! real scalar `T: Scalar`. `f64` is the precision the default tolerances are
//! calibrated for; `f32` compiles and runs but needs looser per-call
//! tolerances.

use num_traits::{FromPrimitive, ToPrimitive};

/// Real scalar usable everywhere in the crate: nalgebra's `RealField` for the
/// dense linear algebra plus num-traits conversions for literals and
/// diagnostics.
pub trait Scalar: nalgebra::RealField + FromPrimitive + ToPrimitive + Copy {}

impl<T> Scalar for T where T: nalgebra::RealField + FromPrimitive + ToPrimitive + Copy {}

/// Convert an `f64` literal into the working scalar type.
#[inline]
pub fn real<T: Scalar>(v: f64) -> T {
    T::from_f64(v).expect("finite f64 literal must convert")
}

/// Lossy view of a scalar as `f64`, for error messages and reports.
#[inline]
pub fn approx_f64<T: Scalar>(v: T) -> f64 {
    v.to_f64().unwrap_or(f64::NAN)
}

/// Quiet NaN in the working scalar type.
#[inline]
pub fn nan<T: Scalar>() -> T {
    T::from_f64(f64::NAN).expect("float types represent NaN")
}

/// Normalization tolerance for probability vectors and joint tables.
#[inline]
pub fn tol_norm<T: Scalar>() -> T {
    real(1e-12)
}

/// Fixed-point tolerance for steady-state residuals `‖γφ − γ‖₁`.
#[inline]
pub fn tol_fix<T: Scalar>() -> T {
    real(1e-10)
}

/// Default absolute gap used when clustering ω values into atoms.
#[inline]
pub fn default_merge_tol<T: Scalar>() -> T {
    real(1e-9)
}
