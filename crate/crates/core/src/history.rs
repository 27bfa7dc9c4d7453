//! A live trial's recorded history and the recommendation it implies.
//!
//! Offline `decide` and the conduct service both evaluate a [`TrialHistory`],
//! so a recommendation depends only on the stored design, settings, seed and
//! cohort log.

use serde::{Deserialize, Deserializer, Serialize};

use crate::config::StudyConfig;
use crate::decision::{Decision, MtdResult};
use crate::designs::{BuildContext, Design, DesignConfig};
use crate::engine::{final_selection, next_action};
use crate::error::{Error, Result};
use crate::grid::{DoseGrid, DoseMatrix};
use crate::scenario::{ScenarioFile, ToxicityScenario};
use crate::trial::{CohortRecord, Phase, TrialState};

fn design_config<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<DesignConfig, D::Error> {
    let v = serde_json::Value::deserialize(d)?;
    DesignConfig::from_value(v).map_err(serde::de::Error::custom)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrialHistory {
    #[serde(deserialize_with = "design_config")]
    pub design: DesignConfig,
    pub grid: DoseGrid,
    /// Target, sample size, cohort size, early-stop cap and the seed used by
    /// randomized designs. `reps` is ignored.
    #[serde(default)]
    pub config: StudyConfig,
    #[serde(default)]
    pub log: Vec<CohortRecord>,
    /// Only needed by designs whose prior guesses come from a scenario.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scenario: Option<ScenarioFile>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Recommendation {
    pub decision: Decision,
    pub phase: Phase,
    /// Patients in the next cohort; absent once the trial has ended.
    pub cohort_size: Option<u32>,
    pub estimates: DoseMatrix<Option<f64>>,
    pub n: DoseMatrix<u32>,
    pub y: DoseMatrix<u32>,
    /// Final selection, present once the trial has ended.
    pub mtd: Option<MtdResult>,
}

impl TrialHistory {
    pub fn new(design: DesignConfig, grid: DoseGrid, config: StudyConfig) -> Self {
        TrialHistory {
            design,
            grid,
            config,
            log: Vec::new(),
            scenario: None,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let h: TrialHistory = serde_json::from_str(text)?;
        h.validate()?;
        Ok(h)
    }

    pub fn validate(&self) -> Result<()> {
        DoseGrid::new(self.grid.j_levels, self.grid.k_levels)?;
        self.config.validate()?;
        self.build()?;
        self.state()?;
        Ok(())
    }

    pub fn build(&self) -> Result<Box<dyn Design>> {
        let scenario = self
            .scenario
            .clone()
            .map(ToxicityScenario::from_file_form)
            .transpose()?;
        self.design.build(&BuildContext {
            grid: self.grid,
            phi: self.config.phi,
            scenario: scenario.as_ref(),
        })
    }

    pub fn state(&self) -> Result<TrialState> {
        let st = TrialState::replay(self.grid, &self.log)
            .map_err(|e| Error::InvalidHistory(e.to_string()))?;
        if st.total_patients() > self.config.max_n {
            return Err(Error::InvalidHistory(format!(
                "{} patients recorded but max_n is {}",
                st.total_patients(),
                self.config.max_n
            )));
        }
        Ok(st)
    }

    pub fn evaluate(&self) -> Result<Recommendation> {
        let design = self.build()?;
        let state = self.state()?;
        let seed = self.config.seed;
        let decision = next_action(design.as_ref(), &state, &self.config, seed)?;
        let (phase, cohort_size, mtd) = if decision.is_terminate() {
            (
                Phase::Finished,
                None,
                Some(final_selection(
                    design.as_ref(),
                    &state,
                    decision.reason,
                    seed,
                )?),
            )
        } else {
            let size = design
                .cohort_size(&state, self.config.cohort_size)
                .min(self.config.max_n - state.total_patients());
            (design.phase(&state), Some(size), None)
        };
        Ok(Recommendation {
            decision,
            phase,
            cohort_size,
            estimates: estimates_or_empty(design.as_ref(), &state, seed)?,
            n: state.n().clone(),
            y: state.y().clone(),
            mtd,
        })
    }
}

/// Estimates, or all `None` before the first cohort.
fn estimates_or_empty(
    design: &dyn Design,
    state: &TrialState,
    seed: u64,
) -> Result<DoseMatrix<Option<f64>>> {
    if state.log().is_empty() {
        return Ok(DoseMatrix::filled(state.grid(), None));
    }
    design.estimates(state, seed)
}
