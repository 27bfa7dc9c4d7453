//! Exact (Clopper-Pearson) binomial confidence intervals.

use statrs::function::beta::beta_reg;

use crate::error::{Error, Result};

/// Quantile of Beta(a, b) by bisection on the regularized incomplete beta.
fn beta_quantile(a: f64, b: f64, p: f64) -> f64 {
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if beta_reg(a, b, mid) < p {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-16 {
            break;
        }
    }
    0.5 * (lo + hi)
}

pub fn exact_binomial_ci(y: u32, n: u32, level: f64) -> Result<(f64, f64)> {
    if n == 0 {
        return Err(Error::param(
            "confidence interval needs at least one observation",
        ));
    }
    if y > n {
        return Err(Error::TooManyDlts {
            patients: n,
            dlts: y,
        });
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::param(format!(
            "confidence level {level} outside (0,1)"
        )));
    }
    let alpha = 1.0 - level;
    let (yf, nf) = (f64::from(y), f64::from(n));
    let lo = if y == 0 {
        0.0
    } else {
        beta_quantile(yf, nf - yf + 1.0, alpha / 2.0)
    };
    let hi = if y == n {
        1.0
    } else {
        beta_quantile(yf + 1.0, nf - yf, 1.0 - alpha / 2.0)
    };
    Ok((lo, hi))
}
