//! Normal and Student-t distribution functions used throughout the crate.

use statrs::function::beta::{beta_reg, inv_beta_reg};
use libm::erfc;
use statrs::function::erf::erfc_inv;

const SQRT_2: f64 = std::f64::consts::SQRT_2;
const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

#[inline]
pub fn norm_cdf(x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    0.5 * erfc(-x / SQRT_2)
}

#[inline]
pub fn norm_pdf(x: f64) -> f64 {
    (-0.5 * x * x - LN_SQRT_2PI).exp()
}

#[inline]
pub fn norm_ln_pdf(x: f64) -> f64 {
    -0.5 * x * x - LN_SQRT_2PI
}

/// Standard normal quantile. Returns `±inf` at 0 and 1.
#[inline]
pub fn norm_ppf(p: f64) -> f64 {
    if p <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if p >= 1.0 {
        return f64::INFINITY;
    }
    let x = -SQRT_2 * erfc_inv(2.0 * p);
    // One Halley step polishes the inverse error function.
    let e = norm_cdf(x) - p;
    let u = e / norm_pdf(x);
    if u.is_finite() {
        x - u / (1.0 + 0.5 * x * u)
    } else {
        x
    }
}

/// CDF of the standard Student-t distribution with `nu` (real) degrees of freedom.
pub fn t_cdf(x: f64, nu: f64) -> f64 {
    if x.is_infinite() {
        return if x > 0.0 { 1.0 } else { 0.0 };
    }
    let tail = 0.5 * beta_reg(0.5 * nu, 0.5, nu / (nu + x * x));
    if x > 0.0 {
        1.0 - tail
    } else {
        tail
    }
}

/// Quantile of the standard Student-t distribution.
pub fn t_ppf(p: f64, nu: f64) -> f64 {
    if p <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if p >= 1.0 {
        return f64::INFINITY;
    }
    if p == 0.5 {
        return 0.0;
    }
    let tail = if p > 0.5 { 1.0 - p } else { p };
    let z = inv_beta_reg(0.5 * nu, 0.5, 2.0 * tail);
    let x = (nu * (1.0 - z) / z).sqrt();
    if p > 0.5 {
        x
    } else {
        -x
    }
}

pub use statrs::function::gamma::ln_gamma;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normal_reference_values() {
        assert!((norm_cdf(0.0) - 0.5).abs() < 1e-16);
        assert!((norm_cdf(1.959_963_984_540_054) - 0.975).abs() < 5e-12);
        assert!((norm_ppf(0.975) - 1.959_963_984_540_054).abs() < 1e-12);
        assert!((norm_ppf(0.25) + 0.674_489_750_196_081_7).abs() < 1e-12);
        for &p in &[1e-10, 1e-4, 0.1, 0.5, 0.7, 0.999, 1.0 - 1e-10] {
            assert!((norm_cdf(norm_ppf(p)) - p).abs() < 1e-11 * p.max(1e-3));
        }
    }

    #[test]
    fn student_t_reference_values() {
        // qt(0.975, 5) in R
        assert!((t_ppf(0.975, 5.0) - 2.570_581_835_636_314).abs() < 1e-9);
        assert!((t_cdf(2.570_581_835_636_314, 5.0) - 0.975).abs() < 1e-12);
        for &nu in &[2.0, 3.7, 10.0, 49.0] {
            for &p in &[1e-8, 0.01, 0.3, 0.5, 0.8, 0.999] {
                let x = t_ppf(p, nu);
                assert!((t_cdf(x, nu) - p).abs() < 1e-10, "nu={nu} p={p}");
            }
        }
    }
}
