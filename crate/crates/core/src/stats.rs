//! Small numeric helpers shared across modules.

use statrs::distribution::{ContinuousCDF, Normal};

/// Upper 97.5% standard normal quantile used for 95% Wald intervals.
pub const Z_975: f64 = 1.959_963_984_540_054;

#[inline]
pub fn expit(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[inline]
pub fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

/// `log(1 + exp(x))` without overflow.
#[inline]
pub fn log1p_exp(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Population (1/n) variance.
pub fn variance(values: &[f64]) -> f64 {
    let m = mean(values);
    values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / values.len() as f64
}

/// Sample standard deviation with the 1/(n-1) convention.
pub fn sample_sd(values: &[f64]) -> f64 {
    let n = values.len();
    if n < 2 {
        return f64::NAN;
    }
    let m = mean(values);
    (values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (n - 1) as f64).sqrt()
}

pub fn normal_cdf(x: f64) -> f64 {
    Normal::standard().cdf(x)
}

pub fn normal_quantile(p: f64) -> f64 {
    Normal::standard().inverse_cdf(p)
}

/// Two-sided normal p-value `2 * Phi(-|point/se|)`.
///
/// A zero point estimate always yields 1, and a nonzero point with zero
/// standard error yields 0.
pub fn two_sided_p(point: f64, se: f64) -> f64 {
    if point == 0.0 {
        return 1.0;
    }
    if se == 0.0 {
        return 0.0;
    }
    (2.0 * normal_cdf(-(point / se).abs())).min(1.0)
}

/// One-sided p-value for the alternative `point > 0`.
pub fn upper_one_sided_p(point: f64, se: f64) -> f64 {
    if se == 0.0 {
        return if point > 0.0 { 0.0 } else { 1.0 };
    }
    normal_cdf(-point / se)
}
