//! Standard normal distribution function, survival function and quantile.
//!
//! Backed by the complementary error function, so tail probabilities keep
//! full relative precision far beyond `|z| = 8`.

use libm::erfc;
use statrs::function::erf::erfc_inv;
use std::f64::consts::{PI, SQRT_2};

pub fn cdf(x: f64) -> f64 {
    0.5 * erfc(-x / SQRT_2)
}

/// `1 - Φ(x)` without cancellation.
pub fn sf(x: f64) -> f64 {
    0.5 * erfc(x / SQRT_2)
}

/// `Φ^{-1}(p)` for `p ∈ (0, 1)`.
pub fn quantile(p: f64) -> f64 {
    debug_assert!(p > 0.0 && p < 1.0);
    let x = -SQRT_2 * erfc_inv(2.0 * p);
    // one Newton step against the more accurate erfc
    let resid = if x > 0.0 { (1.0 - p) - sf(x) } else { cdf(x) - p };
    let pdf = (-0.5 * x * x).exp() / (2.0 * PI).sqrt();
    if pdf > 0.0 {
        x - resid / pdf
    } else {
        x
    }
}

/// Upper `α/2` point for a two-sided interval at the given confidence level.
pub fn two_sided_critical(level: f64) -> f64 {
    -quantile(0.5 * (1.0 - level))
}

/// `2[1 - Φ(|z|)]`.
pub fn two_sided_p(z: f64) -> f64 {
    erfc(z.abs() / SQRT_2)
}

#[cfg(test)]
mod tests {
    use super::*;

    // Independent oracle: Lentz continued fraction for the Mills ratio,
    // valid and fast for x > 3.
    fn sf_continued_fraction(x: f64) -> f64 {
        let pdf = (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt();
        // R(x) = 1/(x + 1/(x + 2/(x + 3/(x + ...))))
        let mut f = 0.0;
        for k in (1..200).rev() {
            f = k as f64 / (x + f);
        }
        pdf / (x + f)
    }

    // Independent oracle for small |x|: Taylor series of Φ.
    fn cdf_series(x: f64) -> f64 {
        let mut term = x;
        let mut sum = x;
        for k in 1..200 {
            term *= -x * x / 2.0 / k as f64;
            sum += term / (2 * k + 1) as f64;
        }
        0.5 + sum / (2.0 * std::f64::consts::PI).sqrt()
    }

    #[test]
    fn cdf_matches_series() {
        for i in -30..=30 {
            let x = i as f64 / 10.0;
            assert!((cdf(x) - cdf_series(x)).abs() < 1e-13, "x={x}");
        }
    }

    #[test]
    fn tail_matches_continued_fraction() {
        for x in [3.5, 4.0, 5.528, 7.0, 10.0] {
            let rel = (sf(x) - sf_continued_fraction(x)).abs() / sf_continued_fraction(x);
            assert!(rel < 1e-12, "x={x} rel={rel}");
        }
    }

    #[test]
    fn quantile_inverts_cdf() {
        for p in [1e-12, 1e-6, 0.025, 0.3, 0.5, 0.8, 0.975, 1.0 - 1e-9] {
            assert!((cdf(quantile(p)) - p).abs() < 1e-10 * p.max(1e-3), "p={p}");
        }
        assert!((two_sided_critical(0.95) - 1.959963984540054).abs() < 1e-12);
    }

    #[test]
    fn two_sided_examples() {
        assert_eq!(two_sided_p(0.0), 1.0);
        assert!((two_sided_p(1.959964) - 0.05).abs() < 1e-6);
        let p = two_sided_p(5.528);
        assert!((p - 2.0 * sf_continued_fraction(5.528)).abs() < 1e-20);
        assert!((p - 3.24e-8).abs() < 5e-9, "{p}");
    }
}
