//! Special functions: Gaussian tails and the exponential integral.

use std::f64::consts::{FRAC_1_SQRT_2, LN_2, PI};

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Standard normal CDF, `Φ(z) = erfc(-z/√2) / 2`.
pub fn normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z * FRAC_1_SQRT_2)
}

/// Standard normal survival function `1 - Φ(z)`.
pub fn normal_sf(z: f64) -> f64 {
    0.5 * libm::erfc(z * FRAC_1_SQRT_2)
}

/// Natural log of the standard normal survival function, `ln(1 - Φ(z))`.
///
/// Uses `erfc` while it is representable and the Mills-ratio asymptotic
/// series beyond `z = 30`, where `erfc` would underflow.
pub fn ln_normal_sf(z: f64) -> f64 {
    if z < 30.0 {
        (0.5 * libm::erfc(z * FRAC_1_SQRT_2)).ln()
    } else {
        let z2 = z * z;
        let series = 1.0 - 1.0 / z2 + 3.0 / (z2 * z2) - 15.0 / (z2 * z2 * z2);
        -0.5 * z2 - (z * (2.0 * PI).sqrt()).ln() + series.ln()
    }
}

/// Exponential integral `E1(x) = ∫_x^∞ e^{-t}/t dt` for `x > 0`.
pub fn e1(x: f64) -> f64 {
    exp_e1(x) * (-x).exp()
}

/// Scaled exponential integral `e^x E1(x)` for `x > 0`.
///
/// Power series for `x ≤ 1`, modified Lentz continued fraction otherwise.
/// The scaled form stays finite for large `x`, where `e^x` alone overflows.
pub fn exp_e1(x: f64) -> f64 {
    assert!(x > 0.0, "exp_e1 requires x > 0, got {x}");
    if x <= 1.0 {
        // E1(x) = -γ - ln x - Σ_{k≥1} (-x)^k / (k·k!)
        let mut sum = 0.0;
        let mut term = 1.0;
        for k in 1..60 {
            term *= -x / k as f64;
            let add = term / k as f64;
            sum += add;
            if add.abs() < 1e-17 * sum.abs().max(1e-300) {
                break;
            }
        }
        (-EULER_GAMMA - x.ln() - sum) * x.exp()
    } else {
        // e^x E1(x) = 1/(x+1- 1/(x+3- 4/(x+5- ...)))
        let tiny = 1e-300;
        let mut b = x + 1.0;
        let mut c = 1.0 / tiny;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..500 {
            let an = -((i * i) as f64);
            b += 2.0;
            d = 1.0 / (an * d + b);
            c = b + an / c;
            let del = c * d;
            h *= del;
            if (del - 1.0).abs() < 1e-16 {
                break;
            }
        }
        h
    }
}

/// `E[log2(1 + P·h)]` for `h ~ Exponential(mean)`:
/// `e^{1/(P·mean)} E1(1/(P·mean)) / ln 2`.
pub fn mean_log2_rate_exponential(mean: f64, power: f64) -> f64 {
    if mean <= 0.0 {
        return 0.0;
    }
    exp_e1(1.0 / (power * mean)) / LN_2
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn e1_reference_values() {
        // Abramowitz & Stegun table 5.1
        assert!((e1(0.5) - 0.559_773_594_776_160_8).abs() < 1e-14);
        assert!((e1(1.0) - 0.219_383_934_395_520_3).abs() < 1e-14);
        assert!((e1(2.0) - 0.048_900_510_708_061_12).abs() < 1e-14);
        assert!((exp_e1(10.0) - 0.091_563_333_939_788_08).abs() < 1e-13);
    }

    #[test]
    fn exp_e1_is_continuous_across_branch() {
        let a = exp_e1(1.0 - 1e-12);
        let b = exp_e1(1.0 + 1e-12);
        assert!((a - b).abs() < 1e-10);
    }

    #[test]
    fn exp_e1_large_argument_tends_to_inverse() {
        let x = 1e6;
        assert!((exp_e1(x) * x - 1.0).abs() < 1e-5);
    }

    #[test]
    fn mean_rate_matches_simple_quadrature() {
        // trapezoid on log2(1+h) e^{-h/2}/2 over [0, 80]
        let n = 400_000;
        let hi = 80.0;
        let step = hi / n as f64;
        let f = |h: f64| (1.0 + h).log2() * (-h / 2.0).exp() / 2.0;
        let mut acc = 0.5 * (f(0.0) + f(hi));
        for i in 1..n {
            acc += f(i as f64 * step);
        }
        let quad = acc * step;
        assert!((mean_log2_rate_exponential(2.0, 1.0) - quad).abs() < 1e-8);
        assert!((quad - 1.332).abs() < 1e-3);
    }

    #[test]
    fn ln_sf_branches_agree() {
        for z in [29.0, 29.9, 30.0, 30.1, 31.0] {
            let erfc_form = (0.5 * libm::erfc(z * FRAC_1_SQRT_2)).ln();
            assert!((ln_normal_sf(z) - erfc_form).abs() < 1e-6, "z={z}");
        }
        assert!(ln_normal_sf(-40.0).abs() < 1e-15);
        assert!(ln_normal_sf(200.0).is_finite());
    }
}
