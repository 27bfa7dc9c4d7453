//! Study-level settings shared by every design.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_PHI: f64 = 0.3;
pub const DEFAULT_MAX_N: u32 = 60;
pub const DEFAULT_COHORT_SIZE: u32 = 3;
pub const DEFAULT_REPS: u32 = 2000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudyConfig {
    #[serde(default = "default_phi")]
    pub phi: f64,
    #[serde(default = "default_max_n")]
    pub max_n: u32,
    #[serde(default = "default_cohort_size")]
    pub cohort_size: u32,
    /// Per-dose patient cap; when the recommended dose already holds this
    /// many patients the trial stops and proceeds to MTD selection.
    #[serde(default)]
    pub early_stop_n: Option<u32>,
    #[serde(default = "default_reps")]
    pub reps: u32,
    #[serde(default)]
    pub seed: u64,
}

fn default_phi() -> f64 {
    DEFAULT_PHI
}
fn default_max_n() -> u32 {
    DEFAULT_MAX_N
}
fn default_cohort_size() -> u32 {
    DEFAULT_COHORT_SIZE
}
fn default_reps() -> u32 {
    DEFAULT_REPS
}

impl Default for StudyConfig {
    fn default() -> Self {
        StudyConfig {
            phi: DEFAULT_PHI,
            max_n: DEFAULT_MAX_N,
            cohort_size: DEFAULT_COHORT_SIZE,
            early_stop_n: None,
            reps: DEFAULT_REPS,
            seed: 0,
        }
    }
}

impl StudyConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.phi > 0.0 && self.phi < 1.0) {
            return Err(Error::param(format!(
                "phi must lie in (0,1), got {}",
                self.phi
            )));
        }
        if self.cohort_size == 0 {
            return Err(Error::param("cohort_size must be positive"));
        }
        if self.max_n == 0 {
            return Err(Error::param("max_n must be positive"));
        }
        if self.cohort_size > 1 && !self.max_n.is_multiple_of(self.cohort_size) {
            return Err(Error::param(format!(
                "max_n {} is not a multiple of cohort_size {}",
                self.max_n, self.cohort_size
            )));
        }
        if let Some(cap) = self.early_stop_n {
            if cap < self.cohort_size {
                return Err(Error::param(format!(
                    "early_stop_n {cap} is smaller than cohort_size {}",
                    self.cohort_size
                )));
            }
        }
        Ok(())
    }
}
