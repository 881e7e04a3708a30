//! Scalar abstraction shared by the numerical engines.
//!
//! Every engine is written against [`Real`], which is implemented for `f32`
//! and `f64`. Complex amplitudes are `num_complex::Complex<T>`.

use nalgebra::RealField;
use num_complex::Complex;
use num_traits::{FromPrimitive, ToPrimitive};

use crate::dense::DenseKernels;

/// Real floating-point scalar usable by the engines.
pub trait Real: RealField + Copy + FromPrimitive + ToPrimitive + DenseKernels {}

impl Real for f32 {}
impl Real for f64 {}

/// Complex amplitude over a [`Real`] scalar.
pub type Cplx<T> = Complex<T>;

/// Converts an `f64` literal into `T`.
#[inline]
pub fn lit<T: Real>(x: f64) -> T {
    T::from_f64(x).expect("f64 literal representable in target scalar")
}

/// Lossy conversion to `f64` for reporting.
#[inline]
pub fn to_f64<T: Real>(x: T) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}

#[inline]
pub(crate) fn cplx<T: Real>(re: T, im: T) -> Cplx<T> {
    Complex::new(re, im)
}

#[inline]
pub(crate) fn czero<T: Real>() -> Cplx<T> {
    Complex::new(T::zero(), T::zero())
}

#[inline]
pub(crate) fn cone<T: Real>() -> Cplx<T> {
    Complex::new(T::one(), T::zero())
}

/// `-i * z`
#[inline]
pub(crate) fn times_minus_i<T: Real>(z: Cplx<T>) -> Cplx<T> {
    Complex::new(z.im, -z.re)
}

#[inline]
pub(crate) fn abs2<T: Real>(z: Cplx<T>) -> T {
    z.re * z.re + z.im * z.im
}

#[inline]
pub(crate) fn cabs<T: Real>(z: Cplx<T>) -> T {
    abs2(z).sqrt()
}

#[inline]
pub(crate) fn is_finite_c<T: Real>(z: Cplx<T>) -> bool {
    z.re.is_finite() && z.im.is_finite()
}

/// `exp(z)` for complex `z`.
#[inline]
pub(crate) fn cexp<T: Real>(z: Cplx<T>) -> Cplx<T> {
    let m = z.re.exp();
    Complex::new(m * z.im.cos(), m * z.im.sin())
}
