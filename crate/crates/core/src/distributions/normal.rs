//! Standard normal CDF and interval masses.

use std::f64::consts::SQRT_2;

/// `ln √(2π)`.
pub const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// Φ(x), computed as `erfc(−x/√2)/2` so both tails keep relative precision.
pub fn std_normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / SQRT_2)
}

/// `P[lo < X < hi]` for `X ~ N(mu, sigma²)`, evaluated on whichever tail
/// avoids cancellation.
pub fn normal_interval_mass(mu: f64, sigma: f64, lo: f64, hi: f64) -> f64 {
    if !(lo < hi) {
        return 0.0;
    }
    let zl = (lo - mu) / sigma;
    let zh = (hi - mu) / sigma;
    let mass = if zl >= 0.0 {
        std_normal_cdf(-zl) - std_normal_cdf(-zh)
    } else if zh <= 0.0 {
        std_normal_cdf(zh) - std_normal_cdf(zl)
    } else {
        1.0 - std_normal_cdf(zl) - std_normal_cdf(-zh)
    };
    mass.clamp(0.0, 1.0)
}

/// Log density of N(mu, sigma²).
pub fn normal_log_pdf(x: f64, mu: f64, sigma: f64) -> f64 {
    let z = (x - mu) / sigma;
    -0.5 * z * z - sigma.ln() - LN_SQRT_2PI
}
