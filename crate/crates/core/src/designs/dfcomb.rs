//! Logistic surface with interaction,
//! `logit pi = b0 + b1 a_j + b2 b_k + b3 a_j b_k` on logit-scale
//! single-agent guesses, with diagonal start-up, posterior-cutoff moves and
//! window-mass MTD selection.

use serde::{Deserialize, Serialize};

use super::common::{
    by_height, cutoff_rule, decision_seed, surface_from_draws, SequenceStartup, Surface,
};
use super::profile::{Cutoffs, MonoProfile, SamplerSettings};
use super::{BuildContext, Design, DesignId};
use crate::decision::{Decision, MtdResult, Reason};
use crate::error::{Error, Result};
use crate::grid::{Dose, DoseGrid, DoseMatrix};
use crate::numerics::{expit, logit, rw_sampler};
use crate::seeds::{TAG_DECIDE, TAG_SELECT};
use crate::trial::{Phase, TrialState};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DfcombParams {
    pub profile: MonoProfile,
    pub cutoffs: Cutoffs,
    /// Half-width of the selection window around `phi`.
    pub delta: f64,
    /// Standard deviation of the normal priors on `b0` and `b3`.
    pub normal_sd: f64,
    /// Mean of the exponential priors on `b1` and `b2`.
    pub exp_mean: f64,
    /// Fit the interaction coefficient `b3`; otherwise it is fixed at zero.
    pub interaction: bool,
    pub sampler: SamplerSettings,
    pub step_scale: f64,
}

impl Default for DfcombParams {
    fn default() -> Self {
        DfcombParams {
            profile: MonoProfile::default(),
            cutoffs: Cutoffs::new(0.85, 0.45),
            delta: 0.12,
            normal_sd: 1.0,
            exp_mean: 1.0,
            interaction: true,
            sampler: SamplerSettings::default(),
            step_scale: 0.3,
        }
    }
}

pub fn dfcomb_logit(beta: &[f64; 4], a: f64, b: f64) -> f64 {
    beta[0] + beta[1] * a + beta[2] * b + beta[3] * a * b
}

#[derive(Debug, Clone)]
pub struct Dfcomb {
    grid: DoseGrid,
    phi: f64,
    p: DfcombParams,
    eff_a: Vec<f64>,
    eff_b: Vec<f64>,
    startup: SequenceStartup,
}

impl Dfcomb {
    pub fn new(p: &DfcombParams, ctx: &BuildContext<'_>) -> Result<Self> {
        p.profile.validate(ctx.grid)?;
        p.cutoffs.validate()?;
        p.sampler.validate()?;
        if !(p.delta > 0.0 && p.normal_sd > 0.0 && p.exp_mean > 0.0 && p.step_scale > 0.0) {
            return Err(Error::param(
                "dfcomb needs positive delta, prior scales and step scale",
            ));
        }
        Ok(Dfcomb {
            grid: ctx.grid,
            phi: ctx.phi,
            p: p.clone(),
            eff_a: p.profile.p.iter().map(|x| logit(*x)).collect(),
            eff_b: p.profile.q.iter().map(|x| logit(*x)).collect(),
            startup: SequenceStartup::diagonal(ctx.grid),
        })
    }

    fn full(&self, x: &[f64]) -> [f64; 4] {
        if self.p.interaction {
            [x[0], x[1], x[2], x[3]]
        } else {
            [x[0], x[1], x[2], 0.0]
        }
    }

    /// Coefficients keeping the surface increasing in both agents at every dose.
    pub fn admissible(&self, beta: &[f64; 4]) -> bool {
        beta[1] > 0.0
            && beta[2] > 0.0
            && self.eff_b.iter().all(|b| beta[1] + beta[3] * b > 0.0)
            && self.eff_a.iter().all(|a| beta[2] + beta[3] * a > 0.0)
    }

    fn log_prior(&self, beta: &[f64; 4]) -> f64 {
        if !self.admissible(beta) {
            return f64::NEG_INFINITY;
        }
        let v = self.p.normal_sd * self.p.normal_sd;
        let mut lp = -0.5 * beta[0] * beta[0] / v - (beta[1] + beta[2]) / self.p.exp_mean;
        if self.p.interaction {
            lp -= 0.5 * beta[3] * beta[3] / v;
        }
        lp
    }

    pub fn surface(&self, state: &TrialState, seed: u64) -> Result<Surface> {
        let data: Vec<(f64, f64, f64, f64)> = state
            .counts()
            .into_iter()
            .map(|(d, n, y)| {
                (
                    self.eff_a[d.j - 1],
                    self.eff_b[d.k - 1],
                    f64::from(y),
                    f64::from(n - y),
                )
            })
            .collect();
        let logpost = |x: &[f64]| {
            let beta = self.full(x);
            let lp = self.log_prior(&beta);
            if !lp.is_finite() {
                return lp;
            }
            data.iter().fold(lp, |acc, &(a, b, y, f)| {
                let eta = dfcomb_logit(&beta, a, b);
                // ln expit(eta) and ln(1 - expit(eta)) without cancellation.
                let ln1pe = if eta > 0.0 {
                    eta + (-eta).exp().ln_1p()
                } else {
                    eta.exp().ln_1p()
                };
                acc + y * (eta - ln1pe) - f * ln1pe
            })
        };
        let dim = if self.p.interaction { 4 } else { 3 };
        let init = [0.0, 1.0, 1.0, 0.0];
        let chain = rw_sampler(
            logpost,
            &init[..dim],
            self.p.sampler.steps(),
            self.p.sampler.burn_in,
            &vec![self.p.step_scale; dim],
            seed,
        )?;
        let g = self.grid;
        let window = (self.phi - self.p.delta, self.phi + self.p.delta);
        Ok(surface_from_draws(
            g,
            &chain,
            self.phi,
            Some(window),
            |x, out| {
                let beta = self.full(x);
                for (i, d) in g.doses().enumerate() {
                    out[i] = expit(dfcomb_logit(
                        &beta,
                        self.eff_a[d.j - 1],
                        self.eff_b[d.k - 1],
                    ));
                }
            },
        ))
    }

    /// Tried dose with the largest window mass; ties go to the mean nearest `phi`.
    fn pick(state: &TrialState, s: &Surface, phi: f64) -> Option<Dose> {
        let window = s.window.as_ref().expect("window requested");
        let mut best: Option<Dose> = None;
        for d in by_height(state.tried().collect()) {
            let better = match best {
                None => true,
                Some(b) => {
                    window[d] > window[b]
                        || (window[d] == window[b]
                            && (s.mean[d] - phi).abs() < (s.mean[b] - phi).abs())
                }
            };
            if better {
                best = Some(d);
            }
        }
        best
    }
}

impl Design for Dfcomb {
    fn id(&self) -> DesignId {
        DesignId::Dfcomb
    }

    fn grid(&self) -> DoseGrid {
        self.grid
    }

    fn phase(&self, state: &TrialState) -> Phase {
        self.startup.phase(state)
    }

    fn decide(&self, state: &TrialState, seed: u64) -> Result<Decision> {
        if let Some(d) = self.startup.next(state) {
            return Ok(Decision::assign(d, Reason::StartUp));
        }
        let current = state.current().ok_or(Error::NoDosesTried)?;
        let s = self.surface(state, decision_seed(seed, state, TAG_DECIDE))?;
        Ok(cutoff_rule(
            self.grid,
            current,
            &s,
            self.phi,
            self.p.cutoffs.escalate,
            self.p.cutoffs.deescalate,
        ))
    }

    fn select_mtd(&self, state: &TrialState, seed: u64) -> Result<MtdResult> {
        let s = self.surface(state, decision_seed(seed, state, TAG_SELECT))?;
        Ok(match Self::pick(state, &s, self.phi) {
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
