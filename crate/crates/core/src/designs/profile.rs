//! Inputs shared by several parametric designs.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Dose, DoseGrid};
use crate::numerics::mcmc::{DEFAULT_BURN_IN, DEFAULT_KEPT};
use crate::scenario::ToxicityScenario;

/// Single-agent toxicity guesses `p_j` (agent A) and `q_k` (agent B).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MonoProfile {
    pub p: Vec<f64>,
    pub q: Vec<f64>,
}

impl Default for MonoProfile {
    fn default() -> Self {
        MonoProfile {
            p: vec![0.1, 0.2, 0.25, 0.3, 0.35],
            q: vec![0.1, 0.3, 0.35],
        }
    }
}

impl MonoProfile {
    pub fn alternative() -> Self {
        MonoProfile {
            p: vec![0.05, 0.1, 0.2, 0.25, 0.3],
            q: vec![0.1, 0.2, 0.25],
        }
    }

    pub fn validate(&self, grid: DoseGrid) -> Result<()> {
        if self.p.len() != grid.j_levels || self.q.len() != grid.k_levels {
            return Err(Error::ShapeMismatch(format!(
                "profile has {}x{} levels but the grid is {}x{}",
                self.p.len(),
                self.q.len(),
                grid.j_levels,
                grid.k_levels
            )));
        }
        for v in [&self.p, &self.q] {
            if v.iter().any(|x| !(*x > 0.0 && *x < 1.0)) {
                return Err(Error::param("profile probabilities must lie in (0,1)"));
            }
            if v.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::param(
                    "profile probabilities must be strictly increasing",
                ));
            }
        }
        Ok(())
    }
}

/// Where prior guesses of `pi_j1` and `pi_1k` come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "mode", rename_all = "lowercase", deny_unknown_fields)]
pub enum PriorGuess {
    /// The scenario's true first row and first column.
    #[default]
    Truth,
    /// A misspecified guess: each true value replaced by the next level's.
    /// This is a built-in illustration, not a published setting.
    Shifted,
    /// Clinician input; `agent_a[0]` and `agent_b[0]` both denote `pi_11`.
    Explicit {
        agent_a: Vec<f64>,
        agent_b: Vec<f64>,
    },
}

impl PriorGuess {
    pub fn needs_scenario(&self) -> bool {
        !matches!(self, PriorGuess::Explicit { .. })
    }

    /// Guessed `(pi_j1 for j = 1..J, pi_1k for k = 1..K)`, sanitized to lie
    /// in `[0.01, 0.99]` and to increase strictly by at least 0.01.
    pub fn resolve(
        &self,
        grid: DoseGrid,
        scenario: Option<&ToxicityScenario>,
    ) -> Result<(Vec<f64>, Vec<f64>)> {
        let (a, b) = match self {
            PriorGuess::Explicit { agent_a, agent_b } => {
                if agent_a.len() != grid.j_levels || agent_b.len() != grid.k_levels {
                    return Err(Error::ShapeMismatch(
                        "prior guess lengths differ from the grid".into(),
                    ));
                }
                if (agent_a[0] - agent_b[0]).abs() > 1e-9 {
                    return Err(Error::param(
                        "agent_a[0] and agent_b[0] must both equal pi_11",
                    ));
                }
                (agent_a.clone(), agent_b.clone())
            }
            PriorGuess::Truth | PriorGuess::Shifted => {
                let s = scenario.ok_or_else(|| {
                    Error::param("prior guess taken from the scenario, but no scenario was given")
                })?;
                let shift = usize::from(matches!(self, PriorGuess::Shifted));
                let a = (1..=grid.j_levels)
                    .map(|j| s.rate(Dose::new((j + shift).min(grid.j_levels), 1)))
                    .collect();
                let b = (1..=grid.k_levels)
                    .map(|k| s.rate(Dose::new(1, (k + shift).min(grid.k_levels))))
                    .collect();
                (a, b)
            }
        };
        let mut a = sanitize(a);
        let mut b = sanitize(b);
        let first = a[0].min(b[0]);
        a[0] = first;
        b[0] = first;
        Ok((sanitize(a), sanitize(b)))
    }
}

fn sanitize(mut v: Vec<f64>) -> Vec<f64> {
    for i in 0..v.len() {
        v[i] = v[i].clamp(0.01, 0.9);
        if i > 0 && v[i] < v[i - 1] + 0.01 {
            v[i] = v[i - 1] + 0.01;
        }
        v[i] = v[i].min(0.99);
    }
    v
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplerSettings {
    pub burn_in: usize,
    pub kept: usize,
}

impl Default for SamplerSettings {
    fn default() -> Self {
        SamplerSettings {
            burn_in: DEFAULT_BURN_IN,
            kept: DEFAULT_KEPT,
        }
    }
}

impl SamplerSettings {
    pub fn validate(&self) -> Result<()> {
        if self.kept == 0 {
            return Err(Error::param("sampler must keep at least one draw"));
        }
        Ok(())
    }

    pub fn steps(&self) -> usize {
        self.burn_in + self.kept
    }
}

/// Posterior probability cutoffs `(c_e, c_d)` for escalation and de-escalation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Cutoffs {
    pub escalate: f64,
    pub deescalate: f64,
}

impl Cutoffs {
    pub const fn new(escalate: f64, deescalate: f64) -> Self {
        Cutoffs {
            escalate,
            deescalate,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = |c: f64| c > 0.0 && c < 1.0;
        if !ok(self.escalate) || !ok(self.deescalate) || self.escalate + self.deescalate <= 1.0 {
            return Err(Error::param(format!(
                "cutoffs ({}, {}) must lie in (0,1) and sum to more than 1",
                self.escalate, self.deescalate
            )));
        }
        Ok(())
    }
}
