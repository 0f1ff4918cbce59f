//! Thin float-math shim so the crate builds without `std`.

#[inline]
pub fn abs(x: f64) -> f64 {
    libm::fabs(x)
}

#[inline]
pub fn ln(x: f64) -> f64 {
    libm::log(x)
}

#[inline]
pub fn powf(x: f64, y: f64) -> f64 {
    libm::pow(x, y)
}

#[inline]
pub fn sqrt(x: f64) -> f64 {
    libm::sqrt(x)
}

#[inline]
pub fn cbrt(x: f64) -> f64 {
    libm::cbrt(x)
}

#[inline]
pub fn max(a: f64, b: f64) -> f64 {
    libm::fmax(a, b)
}

#[inline]
pub fn min(a: f64, b: f64) -> f64 {
    libm::fmin(a, b)
}

/// Max-norm of a vector; the default error norm in reports.
pub fn max_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |acc, &x| max(acc, abs(x)))
}
