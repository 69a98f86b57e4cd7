//! Scalar float helpers usable without `std`.
//!
//! Transcendental functions that are not correctly rounded by IEEE 754 (cos)
//! always go through `libm` so results do not depend on the platform's libm.
//! `sqrt` is correctly rounded everywhere, so the faster std version is used
//! when available.

#[cfg(feature = "std")]
#[inline]
pub fn sqrt(x: f64) -> f64 {
    x.sqrt()
}

#[cfg(not(feature = "std"))]
#[inline]
pub fn sqrt(x: f64) -> f64 {
    libm::sqrt(x)
}

#[inline]
pub fn cos(x: f64) -> f64 {
    libm::cos(x)
}

#[inline]
pub fn abs(x: f64) -> f64 {
    libm::fabs(x)
}

/// Integer power by repeated multiplication, left to right, so the result is
/// reproducible regardless of optimization level.
#[inline]
pub fn powi(x: f64, n: u32) -> f64 {
    let mut acc = 1.0;
    for _ in 0..n {
        acc *= x;
    }
    acc
}
