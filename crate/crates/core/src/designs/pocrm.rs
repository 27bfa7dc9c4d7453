//! Partial-order CRM: six candidate orderings, each fitted by maximum
//! likelihood under the power model, one drawn at random by its posterior
//! weight at every decision.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::common::{by_height, decision_seed};
use super::crm::{
    enumerate_orderings, golden_section_max, heterogeneous, power_loglik, Ordering, SkeletonChoice,
};
use super::{BuildContext, Design, DesignId};
use crate::decision::{Decision, MtdResult, Reason};
use crate::error::{Error, Result};
use crate::grid::{Dose, DoseGrid, DoseMatrix};
use crate::numerics::quadrature::normalize_log_weights;
use crate::seeds::{self, TAG_DECIDE};
use crate::trial::{Phase, TrialState};

const A_BOUNDS: (f64, f64) = (-5.0, 5.0);
const A_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
#[derive(Default)]
pub struct PocrmParams {
    pub skeleton: SkeletonChoice,
    /// Prior ordering weights; uniform when absent.
    pub prior_weights: Option<Vec<f64>>,
}

/// Per-ordering MLEs and posterior ordering weights.
#[derive(Debug, Clone, PartialEq)]
pub struct PocrmFit {
    pub a_hat: Vec<f64>,
    pub weights: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct Pocrm {
    grid: DoseGrid,
    phi: f64,
    skeleton: Vec<f64>,
    orderings: Vec<Ordering>,
    log_prior: Vec<f64>,
}

impl Pocrm {
    pub fn new(p: &PocrmParams, ctx: &BuildContext<'_>) -> Result<Self> {
        let orderings = enumerate_orderings(ctx.grid);
        let prior = match &p.prior_weights {
            None => vec![1.0 / orderings.len() as f64; orderings.len()],
            Some(w) => {
                if w.len() != orderings.len() {
                    return Err(Error::ShapeMismatch(format!(
                        "{} prior weights for {} orderings",
                        w.len(),
                        orderings.len()
                    )));
                }
                let total: f64 = w.iter().sum();
                if w.iter().any(|x| !(*x >= 0.0)) || (total - 1.0).abs() > 1e-9 {
                    return Err(Error::param(
                        "ordering prior weights must be non-negative and sum to 1",
                    ));
                }
                w.clone()
            }
        };
        Self::with_orderings(
            ctx.grid,
            ctx.phi,
            p.skeleton.build(ctx.grid.len(), ctx.phi)?,
            orderings,
            prior,
        )
    }

    pub fn with_orderings(
        grid: DoseGrid,
        phi: f64,
        skeleton: Vec<f64>,
        orderings: Vec<Ordering>,
        prior: Vec<f64>,
    ) -> Result<Self> {
        if skeleton.len() != grid.len() || orderings.is_empty() || prior.len() != orderings.len() {
            return Err(Error::ShapeMismatch(
                "skeleton, orderings and prior disagree".into(),
            ));
        }
        Ok(Pocrm {
            grid,
            phi,
            skeleton,
            orderings,
            log_prior: prior.iter().map(|w| w.ln()).collect(),
        })
    }

    pub fn orderings(&self) -> &[Ordering] {
        &self.orderings
    }

    fn counts(state: &TrialState) -> Vec<(u32, u32)> {
        state
            .n()
            .as_slice()
            .iter()
            .zip(state.y().as_slice())
            .map(|(n, y)| (*n, *y))
            .collect()
    }

    pub fn fit(&self, state: &TrialState) -> Result<PocrmFit> {
        let counts = Self::counts(state);
        if !heterogeneous(&counts) {
            return Err(Error::MleUndefined);
        }
        let mut a_hat = Vec::with_capacity(self.orderings.len());
        let mut logw = Vec::with_capacity(self.orderings.len());
        for (o, lp) in self.orderings.iter().zip(&self.log_prior) {
            let f = |a: f64| power_loglik(a, &self.skeleton, o, &counts);
            let a = golden_section_max(f, A_BOUNDS.0, A_BOUNDS.1, A_TOL);
            a_hat.push(a);
            logw.push(f(a) + lp);
        }
        Ok(PocrmFit {
            a_hat,
            weights: normalize_log_weights(&logw)?,
        })
    }

    /// Fitted rates under ordering `m`, by grid index.
    pub fn rates(&self, fit: &PocrmFit, m: usize) -> DoseMatrix<f64> {
        let e = fit.a_hat[m].exp();
        let o = &self.orderings[m];
        DoseMatrix::from_fn(self.grid, |d| {
            self.skeleton[o.position_of_index(self.grid.index(d))].powf(e)
        })
    }

    fn closest_dose(&self, rates: &DoseMatrix<f64>) -> Dose {
        let cands = by_height(self.grid.doses().collect());
        super::common::closest(cands, |d| rates[d], self.phi).expect("grid is non-empty")
    }

    fn startup_next(&self, state: &TrialState, seed: u64) -> Option<Dose> {
        if state.total_dlts() > 0 {
            return None;
        }
        let zones = self.grid.j_levels + self.grid.k_levels - 1;
        (1..=zones).find_map(|z| {
            let open: Vec<Dose> = self
                .grid
                .doses()
                .filter(|d| d.zone() == z && !state.is_tried(*d))
                .collect();
            if open.is_empty() {
                return None;
            }
            let mut rng = seeds::rng(seed);
            Some(open[rng.random_range(0..open.len())])
        })
    }

    /// Fallback when the MLE does not exist: the highest explored dose, or the
    /// lowest if every patient had a DLT.
    fn no_heterogeneity(&self, state: &TrialState) -> Dose {
        let tried = by_height(state.tried().collect());
        if state.total_dlts() == 0 {
            *tried.last().expect("state has patients")
        } else {
            tried[0]
        }
    }
}

impl Design for Pocrm {
    fn id(&self) -> DesignId {
        DesignId::Pocrm
    }

    fn grid(&self) -> DoseGrid {
        self.grid
    }

    fn phase(&self, state: &TrialState) -> Phase {
        if state.total_dlts() > 0 || self.grid.doses().all(|d| state.is_tried(d)) {
            Phase::Model
        } else {
            Phase::Startup
        }
    }

    fn decide(&self, state: &TrialState, seed: u64) -> Result<Decision> {
        if state.log().is_empty() {
            return Ok(Decision::assign(self.grid.lowest(), Reason::StartUp));
        }
        let seed = decision_seed(seed, state, TAG_DECIDE);
        if let Some(d) = self.startup_next(state, seed) {
            return Ok(Decision::assign(d, Reason::StartUp));
        }
        let fit = match self.fit(state) {
            Ok(f) => f,
            Err(Error::MleUndefined) => {
                return Ok(Decision::assign(
                    self.no_heterogeneity(state),
                    Reason::NoHeterogeneity,
                ));
            }
            Err(e) => return Err(e),
        };
        let m = draw_index(&fit.weights, seeds::derive(seed, &[1]));
        Ok(Decision::assign(
            self.closest_dose(&self.rates(&fit, m)),
            Reason::ClosestToTarget,
        ))
    }

    fn select_mtd(&self, state: &TrialState, _seed: u64) -> Result<MtdResult> {
        if state.total_patients() == 0 {
            return Err(Error::NoDosesTried);
        }
        match self.fit(state) {
            Ok(fit) => {
                let m = argmax(&fit.weights);
                let rates = self.rates(&fit, m);
                let d = self.closest_dose(&rates);
                Ok(MtdResult::at(d, rates[d]))
            }
            Err(Error::MleUndefined) => {
                let d = self.no_heterogeneity(state);
                Ok(MtdResult::at(d, state.empirical_rate(d)?))
            }
            Err(e) => Err(e),
        }
    }

    fn estimates(&self, state: &TrialState, _seed: u64) -> Result<DoseMatrix<Option<f64>>> {
        match self.fit(state) {
            Ok(fit) => Ok(self.rates(&fit, argmax(&fit.weights)).map(|r| Some(*r))),
            Err(Error::MleUndefined) => Ok(DoseMatrix::filled(self.grid, None)),
            Err(e) => Err(e),
        }
    }
}

fn argmax(w: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in w.iter().enumerate() {
        if *x > w[best] {
            best = i;
        }
    }
    best
}

/// Index drawn with probability proportional to `w`.
pub(crate) fn draw_index(w: &[f64], seed: u64) -> usize {
    let u: f64 = seeds::rng(seed).random();
    let total: f64 = w.iter().sum();
    let mut acc = 0.0;
    for (i, x) in w.iter().enumerate() {
        acc += x / total;
        if u < acc {
            return i;
        }
    }
    w.iter().rposition(|x| *x > 0.0).unwrap_or(0)
}
