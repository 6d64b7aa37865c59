//! `pow` from the platform math library when `std` is available; the
//! portable `libm` routine is several times slower.

#[cfg(feature = "std")]
#[inline]
pub(crate) fn pow(x: f64, y: f64) -> f64 {
    std::primitive::f64::powf(x, y)
}

#[cfg(not(feature = "std"))]
#[inline]
pub(crate) fn pow(x: f64, y: f64) -> f64 {
    libm::pow(x, y)
}
