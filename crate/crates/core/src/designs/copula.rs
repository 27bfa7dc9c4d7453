//! Clayton-copula surface
//! `pi = 1 - [(1 - p^alpha)^-gamma + (1 - q^beta)^-gamma - 1]^(-1/gamma)`
//! with posterior-cutoff escalation.

use serde::{Deserialize, Serialize};

use super::common::{by_height, closest, closest_tried, cutoff_rule, Surface};
use super::profile::{Cutoffs, MonoProfile};
use super::tabulated::TabulatedModel;
use super::{BuildContext, Design, DesignId};
use crate::decision::{Decision, MtdResult, Reason};
use crate::error::{Error, Result};
use crate::grid::{Dose, DoseGrid, DoseMatrix};
use crate::trial::{Phase, TrialState};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CopulaParams {
    pub profile: MonoProfile,
    pub cutoffs: Cutoffs,
    pub upper: f64,
    pub resolution: usize,
    /// Allow an untried dose to be selected as MTD.
    pub select_untried: bool,
}

impl Default for CopulaParams {
    fn default() -> Self {
        CopulaParams {
            profile: MonoProfile::default(),
            cutoffs: Cutoffs::new(0.8, 0.45),
            upper: 3.0,
            resolution: 31,
            select_untried: false,
        }
    }
}

pub fn copula_surface(p: f64, q: f64, alpha: f64, beta: f64, gamma: f64) -> f64 {
    let u = (1.0 - p.powf(alpha)).powf(-gamma);
    let v = (1.0 - q.powf(beta)).powf(-gamma);
    1.0 - (u + v - 1.0).powf(-1.0 / gamma)
}

/// Vertical pass up agent B, then horizontal pass up agent A. A pass is done
/// at its first DLT or once all its doses are tried.
#[derive(Debug, Clone)]
struct TwoPassStartup {
    vertical: Vec<Dose>,
    horizontal: Vec<Dose>,
}

impl TwoPassStartup {
    fn new(grid: DoseGrid) -> Self {
        TwoPassStartup {
            vertical: (1..=grid.k_levels).map(|k| Dose::new(1, k)).collect(),
            horizontal: (2..=grid.j_levels).map(|j| Dose::new(j, 1)).collect(),
        }
    }

    fn open(pass: &[Dose], state: &TrialState) -> Option<Dose> {
        if pass.iter().any(|d| state.dlts_at(*d) > 0) {
            return None;
        }
        pass.iter().copied().find(|d| !state.is_tried(*d))
    }

    fn next(&self, state: &TrialState) -> Option<Dose> {
        Self::open(&self.vertical, state).or_else(|| Self::open(&self.horizontal, state))
    }
}

#[derive(Debug, Clone)]
pub struct Copula {
    grid: DoseGrid,
    phi: f64,
    cutoffs: Cutoffs,
    select_untried: bool,
    model: TabulatedModel,
    startup: TwoPassStartup,
}

impl Copula {
    pub fn new(p: &CopulaParams, ctx: &BuildContext<'_>) -> Result<Self> {
        p.profile.validate(ctx.grid)?;
        p.cutoffs.validate()?;
        if !(p.upper > 0.0) || p.resolution == 0 {
            return Err(Error::param("copula needs a positive box and resolution"));
        }
        let (pa, qb) = (p.profile.p.clone(), p.profile.q.clone());
        let model = TabulatedModel::new(
            ctx.grid,
            &[(0.0, p.upper), (0.0, p.upper), (0.0, p.upper)],
            &[p.resolution; 3],
            |t, d| copula_surface(pa[d.j - 1], qb[d.k - 1], t[0], t[1], t[2]),
        )?;
        Ok(Copula {
            grid: ctx.grid,
            phi: ctx.phi,
            cutoffs: p.cutoffs,
            select_untried: p.select_untried,
            model,
            startup: TwoPassStartup::new(ctx.grid),
        })
    }

    pub fn surface(&self, state: &TrialState) -> Result<Surface> {
        self.model.surface(state, self.phi)
    }
}

impl Design for Copula {
    fn id(&self) -> DesignId {
        DesignId::Copula
    }

    fn grid(&self) -> DoseGrid {
        self.grid
    }

    fn phase(&self, state: &TrialState) -> Phase {
        if self.startup.next(state).is_some() {
            Phase::Startup
        } else {
            Phase::Model
        }
    }

    fn decide(&self, state: &TrialState, _seed: u64) -> Result<Decision> {
        if state.log().is_empty() {
            return Ok(Decision::assign(self.grid.lowest(), Reason::StartUp));
        }
        if let Some(d) = self.startup.next(state) {
            return Ok(Decision::assign(d, Reason::StartUp));
        }
        let current = state.current().ok_or(Error::NoDosesTried)?;
        let s = self.surface(state)?;
        Ok(cutoff_rule(
            self.grid,
            current,
            &s,
            self.phi,
            self.cutoffs.escalate,
            self.cutoffs.deescalate,
        ))
    }

    fn select_mtd(&self, state: &TrialState, _seed: u64) -> Result<MtdResult> {
        let s = self.surface(state)?;
        let pick = if self.select_untried {
            closest(
                by_height(self.grid.doses().collect()),
                |d| s.mean[d],
                self.phi,
            )
        } else {
            closest_tried(state, &s.mean, self.phi)
        };
        Ok(match pick {
            Some(d) => MtdResult::at(d, s.mean[d]),
            None => MtdResult::none(),
        })
    }

    fn estimates(&self, state: &TrialState, _seed: u64) -> Result<DoseMatrix<Option<f64>>> {
        Ok(self.surface(state)?.estimates())
    }
}
