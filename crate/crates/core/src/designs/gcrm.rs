//! Proportional-odds CRM, `logit pi_jk = alpha_k + beta a_j`, run patient by
//! patient. `alpha_1` is normal, the increments `alpha_k - alpha_(k-1)` are
//! normal truncated at zero, and `beta` is gamma.

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
use crate::numerics::{expit, logit, rw_sampler};
use crate::seeds::{TAG_DECIDE, TAG_SELECT};
use crate::trial::TrialState;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GcrmParams {
    pub guess: PriorGuess,
    pub mu_alpha: f64,
    pub mu_beta: f64,
    pub sigma2_alpha: f64,
    pub sigma2_beta: f64,
    pub stop_threshold: f64,
    pub sampler: SamplerSettings,
    /// Random-walk scales for `alpha_1`, the increments and `beta`.
    pub step_scales: [f64; 3],
}

impl Default for GcrmParams {
    fn default() -> Self {
        GcrmParams {
            guess: PriorGuess::Truth,
            mu_alpha: -8.0,
            mu_beta: 1.0,
            sigma2_alpha: 1.0,
            sigma2_beta: 1.0,
            stop_threshold: 0.95,
            sampler: SamplerSettings::default(),
            step_scales: [0.5, 0.5, 0.1],
        }
    }
}

#[derive(Debug, Clone)]
pub struct Gcrm {
    grid: DoseGrid,
    phi: f64,
    p: GcrmParams,
    eff_a: Vec<f64>,
    /// Prior means of the increments, for `k = 2..K`.
    delta: Vec<f64>,
    gamma_shape: f64,
    gamma_rate: f64,
}

impl Gcrm {
    pub fn new(p: &GcrmParams, ctx: &BuildContext<'_>) -> Result<Self> {
        p.sampler.validate()?;
        if !(p.mu_beta > 0.0 && p.sigma2_alpha > 0.0 && p.sigma2_beta > 0.0) {
            return Err(Error::param(
                "gcrm needs mu_beta, sigma2_alpha and sigma2_beta positive",
            ));
        }
        if !(p.stop_threshold > 0.0 && p.stop_threshold < 1.0) {
            return Err(Error::param("gcrm stop threshold must lie in (0,1)"));
        }
        if p.step_scales.iter().any(|s| !(*s > 0.0)) {
            return Err(Error::param("gcrm step scales must be positive"));
        }
        let (ga, gb) = p.guess.resolve(ctx.grid, ctx.scenario)?;
        Ok(Gcrm {
            grid: ctx.grid,
            phi: ctx.phi,
            p: p.clone(),
            eff_a: ga
                .iter()
                .map(|x| (logit(*x) - p.mu_alpha) / p.mu_beta)
                .collect(),
            delta: gb.windows(2).map(|w| logit(w[1]) - logit(w[0])).collect(),
            gamma_shape: p.mu_beta * p.mu_beta / p.sigma2_beta,
            gamma_rate: p.mu_beta / p.sigma2_beta,
        })
    }

    pub fn effective_doses(&self) -> &[f64] {
        &self.eff_a
    }

    pub fn increments(&self) -> &[f64] {
        &self.delta
    }

    fn alphas(x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        let mut a = x[0];
        out.push(a);
        for inc in &x[1..x.len() - 1] {
            a += inc;
            out.push(a);
        }
    }

    fn log_prior(&self, x: &[f64]) -> f64 {
        let beta = x[x.len() - 1];
        let incs = &x[1..x.len() - 1];
        if beta <= 0.0 || incs.iter().any(|d| *d < 0.0) {
            return f64::NEG_INFINITY;
        }
        let va = self.p.sigma2_alpha;
        let mut lp = -0.5 * (x[0] - self.p.mu_alpha).powi(2) / va;
        for (d, m) in incs.iter().zip(&self.delta) {
            lp -= 0.25 * (d - m).powi(2) / va;
        }
        lp + (self.gamma_shape - 1.0) * beta.ln() - self.gamma_rate * beta
    }

    pub fn surface(&self, state: &TrialState, seed: u64) -> Result<Surface> {
        let data: Vec<(usize, f64, f64, f64)> = state
            .counts()
            .into_iter()
            .map(|(d, n, y)| (d.k - 1, self.eff_a[d.j - 1], f64::from(y), f64::from(n - y)))
            .collect();
        let mut alphas = Vec::with_capacity(self.grid.k_levels);
        let logpost = |x: &[f64]| {
            let lp = self.log_prior(x);
            if !lp.is_finite() {
                return lp;
            }
            Self::alphas(x, &mut alphas);
            let beta = x[x.len() - 1];
            data.iter().fold(lp, |acc, &(k, a, y, f)| {
                let eta = alphas[k] + beta * a;
                let ln1pe = if eta > 0.0 {
                    eta + (-eta).exp().ln_1p()
                } else {
                    eta.exp().ln_1p()
                };
                acc + y * (eta - ln1pe) - f * ln1pe
            })
        };
        let mut init = vec![self.p.mu_alpha];
        init.extend(self.delta.iter().map(|d| d.max(0.0)));
        init.push(self.p.mu_beta);
        let mut scales = vec![self.p.step_scales[0]];
        scales.extend(std::iter::repeat_n(self.p.step_scales[1], self.delta.len()));
        scales.push(self.p.step_scales[2]);
        let chain = rw_sampler(
            logpost,
            &init,
            self.p.sampler.steps(),
            self.p.sampler.burn_in,
            &scales,
            seed,
        )?;
        let g = self.grid;
        let mut al = Vec::with_capacity(g.k_levels);
        Ok(surface_from_draws(g, &chain, self.phi, None, |x, out| {
            Self::alphas(x, &mut al);
            let beta = x[x.len() - 1];
            for (i, d) in g.doses().enumerate() {
                out[i] = expit(al[d.k - 1] + beta * self.eff_a[d.j - 1]);
            }
        }))
    }
}

impl Design for Gcrm {
    fn id(&self) -> DesignId {
        DesignId::Gcrm
    }

    fn grid(&self) -> DoseGrid {
        self.grid
    }

    fn cohort_size(&self, _state: &TrialState, _default: u32) -> u32 {
        1
    }

    fn decide(&self, state: &TrialState, seed: u64) -> Result<Decision> {
        let Some(current) = state.current() else {
            return Ok(Decision::assign(self.grid.lowest(), Reason::StartUp));
        };
        let s = self.surface(state, decision_seed(seed, state, TAG_DECIDE))?;
        if s.above[self.grid.lowest()] > self.p.stop_threshold {
            return Ok(Decision::terminate(Reason::SafetyStop));
        }
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
