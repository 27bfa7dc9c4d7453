//! Monte Carlo study runner.
//!
//! A trial is driven by its design until the sample size is used up, the
//! design terminates, or the optional per-dose cap fires. Every replication
//! owns a seed derived from (base seed, design label, scenario name, rep), so
//! a study's output does not depend on how replications are scheduled.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::config::StudyConfig;
use crate::decision::{Action, Decision, MtdResult, Reason};
use crate::designs::Design;
use crate::error::{Error, Result};
use crate::grid::Dose;
use crate::scenario::ToxicityScenario;
use crate::seeds::{self, TAG_OUTCOMES};
use crate::trial::{CohortRecord, Phase, TrialState};

pub mod metrics;
pub mod study;

pub use metrics::{compute_metrics, MetricsRow, MetricsTable, TrialSummary};
pub use study::{run_study, Execution, Study, StudyFile};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub design: String,
    pub scenario: String,
    pub seed: u64,
    pub log: Vec<CohortRecord>,
    pub result: MtdResult,
    pub termination: Reason,
    pub patients_total: u32,
}

impl TrialRecord {
    pub fn summary(&self, scenario: &ToxicityScenario, phi: f64) -> TrialSummary {
        TrialSummary::from_log(&self.log, self.result.selected, scenario, phi)
    }
}

/// Stop when the recommended dose already holds `cap` patients.
pub fn apply_early_stop(
    state: &TrialState,
    recommended: Dose,
    cap: Option<u32>,
) -> Option<Decision> {
    let cap = cap?;
    (state.patients_at(recommended) >= cap).then(|| Decision::terminate(Reason::EarlyStop(cap)))
}

/// The study-level step: the sample-size cap, then the design, then the
/// optional per-dose cap.
pub fn next_action(
    design: &dyn Design,
    state: &TrialState,
    config: &StudyConfig,
    seed: u64,
) -> Result<Decision> {
    if state.total_patients() >= config.max_n {
        return Ok(Decision::terminate(Reason::MaxSampleSize));
    }
    let decision = design.decide(state, seed)?;
    let Some(dose) = decision.dose() else {
        return Ok(decision);
    };
    if !design.grid().contains(dose) {
        return Err(Error::Contract(format!(
            "{} assigned {dose} outside the grid",
            design.id()
        )));
    }
    Ok(apply_early_stop(state, dose, config.early_stop_n).unwrap_or(decision))
}

/// MTD selection after a trial ends. Designs that terminate on their own
/// (safety stops) select nothing.
pub fn final_selection(
    design: &dyn Design,
    state: &TrialState,
    termination: Reason,
    seed: u64,
) -> Result<MtdResult> {
    match termination {
        Reason::MaxSampleSize | Reason::EarlyStop(_) => match design.select_mtd(state, seed) {
            Ok(r) => Ok(r),
            Err(Error::NoDosesTried) => Ok(MtdResult::none()),
            Err(e) => Err(e),
        },
        _ => Ok(MtdResult::none()),
    }
}

/// Cohort outcomes: one Bernoulli draw per patient.
fn draw_dlts(rate: f64, patients: u32, seed: u64, cohort: usize) -> u32 {
    let mut rng = seeds::rng(seeds::derive(seed, &[TAG_OUTCOMES, cohort as u64]));
    (0..patients).filter(|_| rng.random::<f64>() < rate).count() as u32
}

pub fn run_trial(
    design: &dyn Design,
    scenario: &ToxicityScenario,
    config: &StudyConfig,
    seed: u64,
) -> Result<TrialRecord> {
    let grid = design.grid();
    if scenario.grid() != grid {
        return Err(Error::ShapeMismatch(format!(
            "scenario `{}` is {}x{} but the design grid is {}x{}",
            scenario.name(),
            scenario.grid().j_levels,
            scenario.grid().k_levels,
            grid.j_levels,
            grid.k_levels
        )));
    }
    let mut state = TrialState::new(grid);
    let termination = loop {
        let decision = next_action(design, &state, config, seed)?;
        let dose = match decision.action {
            Action::Terminate => break decision.reason,
            Action::Assign { dose } => dose,
        };
        let size = design
            .cohort_size(&state, config.cohort_size)
            .min(config.max_n - state.total_patients());
        if size == 0 {
            return Err(Error::Contract(format!(
                "{} asked for an empty cohort",
                design.id()
            )));
        }
        let dlts = draw_dlts(scenario.rate(dose), size, seed, state.log().len());
        state.push_cohort(dose, size, dlts)?;
        let phase = design.phase(&state);
        state.set_phase(phase);
    };
    let result = final_selection(design, &state, termination, seed)?;
    state.set_phase(Phase::Finished);
    Ok(TrialRecord {
        design: design.id().as_str().to_string(),
        scenario: scenario.name().to_string(),
        seed,
        patients_total: state.total_patients(),
        log: state.log().to_vec(),
        result,
        termination,
    })
}
