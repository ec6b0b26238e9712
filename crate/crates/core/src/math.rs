//! Thin wrappers so the rest of the crate reads like std float code.

#[inline]
pub(crate) fn log2(x: f64) -> f64 {
    libm::log2(x)
}

#[inline]
pub(crate) fn ln(x: f64) -> f64 {
    libm::log(x)
}

#[inline]
pub(crate) fn sqrt(x: f64) -> f64 {
    libm::sqrt(x)
}

#[inline]
pub(crate) fn abs(x: f64) -> f64 {
    libm::fabs(x)
}

/// `-Σ p log2 p` over the cells, skipping exact zeros.
pub(crate) fn entropy_bits(cells: &[f64]) -> f64 {
    let mut h = 0.0;
    for &p in cells {
        if p > 0.0 {
            h -= p * log2(p);
        }
    }
    h
}
