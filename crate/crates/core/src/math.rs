//! Small numerical helpers shared across the crate.
//!
//! Everything evidence-related is kept on the natural-log scale; probabilities
//! are only exponentiated inside normalized softmax-style weights with the
//! maximum subtracted first.

use std::f64::consts::PI;

pub use statrs::function::gamma::ln_gamma;

pub(crate) const LN_2PI: f64 = 1.837_877_066_409_345_3; // ln(2*pi)

/// `log(sum(exp(xs)))` with max subtraction.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let mut m = f64::NEG_INFINITY;
    for &x in xs {
        if x > m {
            m = x;
        }
    }
    if !m.is_finite() {
        return m;
    }
    let mut s = 0.0;
    for &x in xs {
        s += (x - m).exp();
    }
    m + s.ln()
}

/// Normalized weights `exp(x_i - logsumexp(xs))`.
pub fn softmax(xs: &[f64]) -> Vec<f64> {
    let z = log_sum_exp(xs);
    xs.iter().map(|&x| (x - z).exp()).collect()
}

/// `ln Gamma(z)` minus its Stirling approximation
/// `0.5*ln(2*pi) + (z - 0.5)*ln(z) - z`.
///
/// This is the per-factor correction that turns a Gaussian (Laplace)
/// approximation of a Gamma-type integral into the exact value. Positive for
/// all `z > 0` and decreasing like `1/(12 z)`.
pub fn stirling_error(z: f64) -> f64 {
    debug_assert!(z > 0.0);
    if z >= 18.0 {
        // Asymptotic series; truncation error is below 1e-12 in this range
        // while the direct formula starts losing digits to cancellation.
        let z2 = z * z;
        (1.0 / 12.0 - (1.0 / 360.0 - 1.0 / (1260.0 * z2)) / z2) / z
    } else {
        ln_gamma(z) - (0.5 * LN_2PI + (z - 0.5) * z.ln() - z)
    }
}

/// Standard logistic function.
pub fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// SplitMix64 step; used to derive independent RNG seeds from a base seed.
pub(crate) fn splitmix64(state: u64) -> u64 {
    let mut z = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[allow(dead_code)]
pub(crate) fn ln_beta(a: f64, b: f64) -> f64 {
    ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b)
}

pub(crate) fn ln_2pi() -> f64 {
    debug_assert!((LN_2PI - (2.0 * PI).ln()).abs() < 1e-15);
    LN_2PI
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_sum_exp_matches_naive_on_moderate_values() {
        let xs = [0.3f64, -1.2, 2.5, 0.0];
        let naive = xs.iter().map(|x| x.exp()).sum::<f64>().ln();
        assert!((log_sum_exp(&xs) - naive).abs() < 1e-12);
    }

    #[test]
    fn log_sum_exp_handles_large_offsets() {
        let xs = [-1000.0, -1000.5];
        let expected = -1000.0 + (1.0 + (-0.5f64).exp()).ln();
        assert!((log_sum_exp(&xs) - expected).abs() < 1e-12);
    }

    #[test]
    fn log_sum_exp_empty_is_neg_infinity() {
        assert_eq!(log_sum_exp(&[]), f64::NEG_INFINITY);
    }

    #[test]
    fn softmax_sums_to_one() {
        let w = softmax(&[-300.0, -301.0, -299.5]);
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(w.iter().all(|&x| x >= 0.0));
    }

    #[test]
    fn stirling_error_is_continuous_at_series_switch() {
        // The two branches agree to ~1e-12 at the switch point; the residual
        // difference across this window is the function's own slope.
        let below = stirling_error(17.999_999);
        let above = stirling_error(18.000_001);
        assert!((below - above).abs() < 2e-9);
    }

    #[test]
    fn stirling_error_known_values() {
        // ln Gamma(1) = 0, Stirling(1) = 0.5*ln(2*pi) - 1.
        let expected = 1.0 - 0.5 * LN_2PI;
        assert!((stirling_error(1.0) - expected).abs() < 1e-14);
        // Large argument behaves like 1/(12 z).
        assert!((stirling_error(1000.0) - 1.0 / 12000.0).abs() < 1e-10);
    }

    #[test]
    fn logistic_symmetry() {
        assert!((logistic(0.0) - 0.5).abs() < 1e-15);
        assert!((logistic(3.0) + logistic(-3.0) - 1.0).abs() < 1e-15);
    }
}
