//! Hierarchical beta-binomial design. Each dose's rate is
//! `Beta(alpha_jk, beta_jk)` with
//! `ln alpha_jk = theta0 + theta1 a_j + theta2 b_k` and
//! `ln beta_jk = phi0 - phi1 a_j - phi2 b_k`, where `a_j`, `b_k` are
//! effective doses built from prior guesses of the single-agent rows.
//! Single stage: no start-up, moves within the 8-neighbourhood, and a safety
//! stop on the exact lower confidence bound of the pooled rate.

use serde::{Deserialize, Serialize};

use super::common::{
    closest, closest_tried, current_first_neighbourhood, decision_seed, move_reason,
    surface_from_draws, Surface,
};
use super::profile::{PriorGuess, SamplerSettings};
use super::{BuildContext, Design, DesignId};
use crate::decision::{Decision, MtdResult, Reason};
use crate::error::{Error, Result};
use crate::grid::{DoseGrid, DoseMatrix};
use crate::numerics::{exact_binomial_ci, logit, rw_sampler};
use crate::seeds::{TAG_DECIDE, TAG_SAMPLER, TAG_SELECT};
use crate::trial::TrialState;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HierarchyParams {
    pub guess: PriorGuess,
    pub sigma2: f64,
    /// Prior mean of the four slope hyperparameters; `2 sqrt(sigma2)` when absent.
    pub slope_mean: Option<f64>,
    /// Scale in the intercept prior means; the number of agent-B levels when absent.
    pub k_const: Option<f64>,
    pub ci_level: f64,
    pub sampler: SamplerSettings,
    pub step_scale: f64,
}

impl Default for HierarchyParams {
    fn default() -> Self {
        HierarchyParams {
            guess: PriorGuess::Truth,
            sigma2: 10.0,
            slope_mean: None,
            k_const: None,
            ci_level: 0.95,
            sampler: SamplerSettings::default(),
            step_scale: 0.6,
        }
    }
}

/// Log beta-binomial likelihood of `y` DLTs in `n`, without the binomial
/// coefficient: `ln B(alpha + y, beta + n - y) - ln B(alpha, beta)`.
pub fn beta_binomial_loglik(y: u32, n: u32, alpha: f64, beta: f64) -> f64 {
    rising_ln(alpha, y) + rising_ln(beta, n - y) - rising_ln(alpha + beta, n)
}

/// `ln (x (x+1) ... (x+m-1))`, multiplying in blocks to limit logarithms.
fn rising_ln(x: f64, m: u32) -> f64 {
    let mut total = 0.0;
    let mut prod = 1.0;
    for i in 0..m {
        prod *= x + f64::from(i);
        if i % 8 == 7 {
            total += prod.ln();
            prod = 1.0;
        }
    }
    total + prod.ln()
}

#[derive(Debug, Clone)]
pub struct Hierarchy {
    grid: DoseGrid,
    phi: f64,
    eff_a: Vec<f64>,
    eff_b: Vec<f64>,
    /// Prior means `(mu0, mu1, mu2, omega0, omega1, omega2)`.
    prior_mean: [f64; 6],
    sigma2: f64,
    ci_level: f64,
    sampler: SamplerSettings,
    step_scale: f64,
}

impl Hierarchy {
    pub fn new(p: &HierarchyParams, ctx: &BuildContext<'_>) -> Result<Self> {
        p.sampler.validate()?;
        if !(p.sigma2 > 0.0) || !(p.step_scale > 0.0) || !(p.ci_level > 0.0 && p.ci_level < 1.0) {
            return Err(Error::param(
                "hierarchy needs sigma2 > 0, step_scale > 0, ci_level in (0,1)",
            ));
        }
        let (ga, gb) = p.guess.resolve(ctx.grid, ctx.scenario)?;
        let slope = p.slope_mean.unwrap_or(2.0 * p.sigma2.sqrt());
        let k = p.k_const.unwrap_or(ctx.grid.k_levels as f64);
        let pi11 = ga[0];
        let mu0 = (k * pi11).ln();
        let omega0 = (k * (1.0 - pi11)).ln();
        let eff = |g: &[f64]| -> Vec<f64> {
            g.iter()
                .map(|x| (logit(*x) - logit(pi11)) / (2.0 * slope))
                .collect()
        };
        Ok(Hierarchy {
            grid: ctx.grid,
            phi: ctx.phi,
            eff_a: eff(&ga),
            eff_b: eff(&gb),
            prior_mean: [mu0, slope, slope, omega0, slope, slope],
            sigma2: p.sigma2,
            ci_level: p.ci_level,
            sampler: p.sampler,
            step_scale: p.step_scale,
        })
    }

    pub fn prior_mean(&self) -> [f64; 6] {
        self.prior_mean
    }

    pub fn effective_doses(&self) -> (&[f64], &[f64]) {
        (&self.eff_a, &self.eff_b)
    }

    /// `(alpha_jk, beta_jk)` at hyperparameters `h`.
    pub fn shape(&self, h: &[f64], j: usize, k: usize) -> (f64, f64) {
        let (a, b) = (self.eff_a[j - 1], self.eff_b[k - 1]);
        (
            (h[0] + h[1] * a + h[2] * b).exp(),
            (h[3] - h[4] * a - h[5] * b).exp(),
        )
    }

    pub fn surface(&self, state: &TrialState, seed: u64) -> Result<Surface> {
        let data: Vec<(usize, usize, u32, u32)> = state
            .counts()
            .into_iter()
            .map(|(d, n, y)| (d.j, d.k, n, y))
            .collect();
        let m = self.prior_mean;
        let inv2s = 0.5 / self.sigma2;
        let logpost = |h: &[f64]| {
            let prior: f64 = h
                .iter()
                .zip(&m)
                .map(|(x, mu)| -(x - mu).powi(2) * inv2s)
                .sum();
            data.iter().fold(prior, |acc, &(j, k, n, y)| {
                let (a, b) = self.shape(h, j, k);
                acc + beta_binomial_loglik(y, n, a, b)
            })
        };
        let chain = rw_sampler(
            logpost,
            &m,
            self.sampler.steps(),
            self.sampler.burn_in,
            &[self.step_scale; 6],
            seed,
        )?;
        let g = self.grid;
        let counts: Vec<(u32, u32)> = g
            .doses()
            .map(|d| (state.patients_at(d), state.dlts_at(d)))
            .collect();
        Ok(surface_from_draws(g, &chain, self.phi, None, |h, out| {
            for (i, d) in g.doses().enumerate() {
                let (a, b) = self.shape(h, d.j, d.k);
                let (n, y) = counts[i];
                out[i] = (a + f64::from(y)) / (a + b + f64::from(n));
            }
        }))
    }
}

impl Design for Hierarchy {
    fn id(&self) -> DesignId {
        DesignId::Hierarchy
    }

    fn grid(&self) -> DoseGrid {
        self.grid
    }

    fn decide(&self, state: &TrialState, seed: u64) -> Result<Decision> {
        let Some(current) = state.current() else {
            return Ok(Decision::assign(self.grid.lowest(), Reason::StartUp));
        };
        let (lo, _) = exact_binomial_ci(state.total_dlts(), state.total_patients(), self.ci_level)?;
        if lo > self.phi {
            return Ok(Decision::terminate(Reason::SafetyStop));
        }
        let seed = decision_seed(seed, state, TAG_DECIDE);
        let s = self.surface(state, crate::seeds::derive(seed, &[TAG_SAMPLER]))?;
        let next = closest(
            current_first_neighbourhood(self.grid, current),
            |d| s.mean[d],
            self.phi,
        )
        .expect("current is a candidate");
        Ok(Decision::assign(next, move_reason(current, next)))
    }

    fn select_mtd(&self, state: &TrialState, seed: u64) -> Result<MtdResult> {
        let s = self.surface(state, decision_seed(seed, state, TAG_SELECT))?;
        Ok(match closest_tried(state, &s.mean, self.phi) {
            Some(d) => MtdResult::at(d, s.mean[d]),
            None => MtdResult::none(),
        })
    }

    fn estimates(&self, state: &TrialState, seed: u64) -> Result<DoseMatrix<Option<f64>>> {
        Ok(self
            .surface(state, decision_seed(seed, state, TAG_SELECT))?
            .estimates())
    }
}
