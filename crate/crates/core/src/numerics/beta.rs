//! Beta posteriors for binomial data.

use serde::{Deserialize, Serialize};
use statrs::function::beta::beta_reg;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BetaParams {
    pub a: f64,
    pub b: f64,
}

impl BetaParams {
    pub const UNIFORM: BetaParams = BetaParams { a: 1.0, b: 1.0 };

    pub fn new(a: f64, b: f64) -> Result<Self> {
        if !(a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite()) {
            return Err(Error::param(format!(
                "beta shapes must be positive, got ({a}, {b})"
            )));
        }
        Ok(BetaParams { a, b })
    }

    /// Conjugate update with `y` events in `n` trials.
    pub fn posterior(self, y: u32, n: u32) -> Result<Self> {
        if y > n {
            return Err(Error::TooManyDlts {
                patients: n,
                dlts: y,
            });
        }
        Ok(BetaParams {
            a: self.a + f64::from(y),
            b: self.b + f64::from(n - y),
        })
    }

    pub fn mean(self) -> f64 {
        self.a / (self.a + self.b)
    }

    /// Prior pseudo-count `a + b`.
    pub fn mass(self) -> f64 {
        self.a + self.b
    }

    pub fn cdf(self, x: f64) -> f64 {
        if x <= 0.0 {
            0.0
        } else if x >= 1.0 {
            1.0
        } else {
            beta_reg(self.a, self.b, x)
        }
    }

    /// Probability mass on `(lo, hi)`.
    pub fn prob_in_interval(self, lo: f64, hi: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&lo) || !(0.0..=1.0).contains(&hi) || lo >= hi {
            return Err(Error::param(format!("degenerate interval ({lo}, {hi})")));
        }
        Ok((self.cdf(hi) - self.cdf(lo)).max(0.0))
    }
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Beta, Distribution};

    use super::*;

    #[test]
    fn conjugate_updates() {
        let u = BetaParams::UNIFORM;
        assert_eq!(u.posterior(0, 0).unwrap(), u);
        assert_eq!(u.posterior(2, 6).unwrap(), BetaParams { a: 3.0, b: 5.0 });
        let p = BetaParams::new(0.3, 0.7).unwrap().posterior(1, 3).unwrap();
        assert!((p.a - 1.3).abs() < 1e-15 && (p.b - 2.7).abs() < 1e-15);
        assert!(u.posterior(4, 3).is_err());
    }

    #[test]
    fn uniform_intervals() {
        let u = BetaParams::UNIFORM;
        assert!((u.prob_in_interval(0.0, 0.5).unwrap() - 0.5).abs() < 1e-12);
        assert!((u.prob_in_interval(0.18, 0.42).unwrap() - 0.24).abs() < 1e-12);
        assert!(u.prob_in_interval(0.4, 0.4).is_err());
    }

    #[test]
    fn beta_3_5_matches_monte_carlo() {
        let p = BetaParams { a: 3.0, b: 5.0 };
        let exact = p.prob_in_interval(0.18, 0.42).unwrap();
        let dist = Beta::new(3.0, 5.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let draws = 10_000_000u32;
        let hits = (0..draws)
            .filter(|_| {
                let x: f64 = dist.sample(&mut rng);
                x > 0.18 && x < 0.42
            })
            .count() as f64;
        let est = hits / f64::from(draws);
        let se = (exact * (1.0 - exact) / f64::from(draws)).sqrt();
        assert!((est - exact).abs() < 3.0 * se, "{est} vs {exact}");
    }

    #[test]
    fn integer_shapes_match_binomial_identity() {
        // For integer shapes, I_x(a, b) = P(Bin(a+b-1, x) >= a).
        let (a, b) = (3u32, 5u32);
        let n = a + b - 1;
        for x in [0.1f64, 0.3, 0.55, 0.9] {
            let tail: f64 = (a..=n)
                .map(|i| {
                    let c = (0..i).fold(1.0, |acc, t| acc * f64::from(n - t) / f64::from(t + 1));
                    c * x.powi(i as i32) * (1.0 - x).powi((n - i) as i32)
                })
                .sum();
            let cdf = BetaParams { a: 3.0, b: 5.0 }.cdf(x);
            assert!((cdf - tail).abs() < 1e-12);
        }
    }
}
