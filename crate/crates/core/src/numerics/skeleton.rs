//! CRM skeletons from the indifference-interval recursion for the power model.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SkeletonSpec {
    pub half_width: f64,
    /// 1-based position of the prior MTD guess.
    pub mtd_position: usize,
    pub n_levels: usize,
    pub phi: f64,
}

impl SkeletonSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.phi > 0.0 && self.phi < 1.0) {
            return Err(Error::param(format!(
                "skeleton target {} outside (0,1)",
                self.phi
            )));
        }
        if !(self.half_width > 0.0
            && self.half_width < self.phi
            && self.phi + self.half_width < 1.0)
        {
            return Err(Error::param(format!(
                "skeleton half width {} invalid",
                self.half_width
            )));
        }
        if self.mtd_position == 0 || self.mtd_position > self.n_levels {
            return Err(Error::param(format!(
                "MTD position {} outside 1..={}",
                self.mtd_position, self.n_levels
            )));
        }
        Ok(())
    }
}

/// Each level's indifference interval under `p^exp(a)` meets its neighbour's:
/// the level below maps to `phi - delta` where this level maps to `phi + delta`.
pub fn crm_skeleton(spec: &SkeletonSpec) -> Result<Vec<f64>> {
    spec.validate()?;
    let lo = (spec.phi - spec.half_width).ln();
    let hi = (spec.phi + spec.half_width).ln();
    let nu = spec.mtd_position - 1;
    let mut out = vec![0.0; spec.n_levels];
    out[nu] = spec.phi;
    for k in (1..=nu).rev() {
        let b = (hi / out[k].ln()).ln();
        out[k - 1] = (lo / b.exp()).exp();
    }
    for k in nu..spec.n_levels - 1 {
        let b = (lo / out[k].ln()).ln();
        out[k + 1] = (hi / b.exp()).exp();
    }
    if out.iter().any(|p| !(*p > 0.0 && *p < 1.0)) || out.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::param(
            "skeleton left (0,1) or lost strict monotonicity",
        ));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    /// Closed form: the log-skeleton scales by a constant ratio per level.
    fn closed_form(s: &SkeletonSpec) -> Vec<f64> {
        let r = (s.phi - s.half_width).ln() / (s.phi + s.half_width).ln();
        (1..=s.n_levels)
            .map(|t| {
                let m = s.mtd_position as i32 - t as i32;
                (s.phi.ln() * r.powi(m)).exp()
            })
            .collect()
    }

    #[test]
    fn main_setting_hits_target() {
        let s = SkeletonSpec {
            half_width: 0.05,
            mtd_position: 11,
            n_levels: 15,
            phi: 0.3,
        };
        let sk = crm_skeleton(&s).unwrap();
        assert_eq!(sk[10], 0.3);
        assert!((sk[11] - 0.401819).abs() < 1e-6);
        assert!((sk[0] - 3.7202e-9).abs() < 1e-12);
    }

    #[test]
    fn alternative_setting_matches_closed_form() {
        let s = SkeletonSpec {
            half_width: 0.03,
            mtd_position: 13,
            n_levels: 15,
            phi: 0.3,
        };
        let sk = crm_skeleton(&s).unwrap();
        assert_eq!(sk[12], 0.3);
        for (a, b) in sk.iter().zip(closed_form(&s)) {
            assert!((a - b).abs() < 1e-9, "{a} vs {b}");
        }
    }

    #[test]
    fn invalid_specs() {
        let ok = SkeletonSpec {
            half_width: 0.05,
            mtd_position: 3,
            n_levels: 5,
            phi: 0.3,
        };
        assert!(crm_skeleton(&SkeletonSpec {
            mtd_position: 0,
            ..ok
        })
        .is_err());
        assert!(crm_skeleton(&SkeletonSpec {
            mtd_position: 6,
            ..ok
        })
        .is_err());
        assert!(crm_skeleton(&SkeletonSpec {
            half_width: 0.3,
            ..ok
        })
        .is_err());
    }

    proptest! {
        #[test]
        fn strictly_increasing_with_exact_target(
            hw in 0.01f64..0.1, n in 1usize..12, pos_frac in 0.0f64..1.0, phi in 0.15f64..0.5,
        ) {
            let pos = 1 + ((n - 1) as f64 * pos_frac) as usize;
            let s = SkeletonSpec { half_width: hw, mtd_position: pos, n_levels: n, phi };
            if let Ok(sk) = crm_skeleton(&s) {
                prop_assert_eq!(sk[pos - 1], phi);
                prop_assert!(sk.windows(2).all(|w| w[0] < w[1]));
                for (a, b) in sk.iter().zip(closed_form(&s)) {
                    prop_assert!((a - b).abs() <= 1e-9 * b.max(1e-300) + 1e-15);
                }
            }
        }
    }
}
