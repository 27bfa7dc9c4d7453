//! Studies: designs crossed with scenarios, replicated.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::metrics::{compute_metrics, MetricsTable};
use super::{run_trial, TrialRecord};
use crate::config::StudyConfig;
use crate::designs::{BuildContext, Design, DesignSpec};
use crate::error::{Error, Result};
use crate::scenario::{ScenarioFile, ToxicityScenario};
use crate::seeds;

/// How replications are scheduled. Output is identical either way.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Execution {
    Sequential,
    /// Rayon pool; `None` uses the global pool. Falls back to sequential
    /// when the `parallel` feature is off.
    Parallel {
        threads: Option<usize>,
    },
}

impl Default for Execution {
    fn default() -> Self {
        if cfg!(feature = "parallel") {
            Execution::Parallel { threads: None }
        } else {
            Execution::Sequential
        }
    }
}

impl Execution {
    pub fn with_threads(threads: Option<usize>) -> Self {
        match threads {
            Some(1) => Execution::Sequential,
            t => Execution::Parallel { threads: t },
        }
    }

    fn map<T, F>(self, n: usize, f: F) -> Result<Vec<T>>
    where
        T: Send,
        F: Fn(usize) -> Result<T> + Sync + Send,
    {
        match self {
            Execution::Sequential => (0..n).map(f).collect(),
            Execution::Parallel { threads } => parallel_map(threads, n, f),
        }
    }
}

#[cfg(feature = "parallel")]
fn parallel_map<T, F>(threads: Option<usize>, n: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync + Send,
{
    use rayon::prelude::*;
    let run = || (0..n).into_par_iter().map(&f).collect::<Result<Vec<T>>>();
    match threads {
        None => run(),
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build()
            .map_err(|e| Error::param(format!("thread pool: {e}")))?
            .install(run),
    }
}

#[cfg(not(feature = "parallel"))]
fn parallel_map<T, F>(_threads: Option<usize>, n: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync + Send,
{
    (0..n).map(f).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Study {
    pub config: StudyConfig,
    pub designs: Vec<DesignSpec>,
    pub scenarios: Vec<ToxicityScenario>,
}

/// A scenario given inline or as a path relative to the study file.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ScenarioRef {
    Path(String),
    Inline(ScenarioFile),
}

/// On-disk study configuration.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudyFile {
    #[serde(default = "defaults::phi")]
    pub phi: f64,
    #[serde(default = "defaults::max_n")]
    pub max_n: u32,
    #[serde(default = "defaults::cohort_size")]
    pub cohort_size: u32,
    #[serde(default)]
    pub early_stop_n: Option<u32>,
    #[serde(default = "defaults::reps")]
    pub reps: u32,
    #[serde(default)]
    pub seed: u64,
    pub designs: Vec<serde_json::Value>,
    pub scenarios: Vec<ScenarioRef>,
}

mod defaults {
    use crate::config::*;
    pub fn phi() -> f64 {
        DEFAULT_PHI
    }
    pub fn max_n() -> u32 {
        DEFAULT_MAX_N
    }
    pub fn cohort_size() -> u32 {
        DEFAULT_COHORT_SIZE
    }
    pub fn reps() -> u32 {
        DEFAULT_REPS
    }
}

impl Study {
    /// Parse a study file; scenario paths resolve against `base`.
    pub fn from_json(text: &str, base: &Path) -> Result<Self> {
        let file: StudyFile = serde_json::from_str(text)?;
        let config = StudyConfig {
            phi: file.phi,
            max_n: file.max_n,
            cohort_size: file.cohort_size,
            early_stop_n: file.early_stop_n,
            reps: file.reps,
            seed: file.seed,
        };
        config.validate()?;
        let designs = file
            .designs
            .into_iter()
            .map(DesignSpec::from_value)
            .collect::<Result<Vec<_>>>()?;
        let scenarios = file
            .scenarios
            .into_iter()
            .map(|s| match s {
                ScenarioRef::Path(p) => ToxicityScenario::load(&base.join(p)),
                ScenarioRef::Inline(f) => ToxicityScenario::from_file_form(f),
            })
            .collect::<Result<Vec<_>>>()?;
        let study = Study {
            config,
            designs,
            scenarios,
        };
        study.validate()?;
        Ok(study)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::from_json(&text, path.parent().unwrap_or(Path::new(".")))
    }

    pub fn validate(&self) -> Result<()> {
        self.config.validate()?;
        if self.designs.is_empty() || self.scenarios.is_empty() {
            return Err(Error::param(
                "a study needs at least one design and one scenario",
            ));
        }
        for (i, a) in self.scenarios.iter().enumerate() {
            if self.scenarios[..i].iter().any(|b| b.name() == a.name()) {
                return Err(Error::param(format!(
                    "duplicate scenario name `{}`",
                    a.name()
                )));
            }
        }
        for (i, a) in self.designs.iter().enumerate() {
            if self.designs[..i].iter().any(|b| b.label == a.label) {
                return Err(Error::param(format!(
                    "duplicate design label `{}`",
                    a.label
                )));
            }
        }
        Ok(())
    }

    fn build(&self, spec: &DesignSpec, scenario: &ToxicityScenario) -> Result<Box<dyn Design>> {
        spec.config.build(&BuildContext {
            grid: scenario.grid(),
            phi: self.config.phi,
            scenario: Some(scenario),
        })
    }

    /// Every replication of one cell, in rep order.
    pub fn simulate_cell(
        &self,
        spec: &DesignSpec,
        scenario: &ToxicityScenario,
        exec: Execution,
    ) -> Result<Vec<TrialRecord>> {
        let design = self.build(spec, scenario)?;
        exec.map(self.config.reps as usize, |rep| {
            replicate(design.as_ref(), spec, scenario, &self.config, rep as u64)
        })
    }
}

fn replicate(
    design: &dyn Design,
    spec: &DesignSpec,
    scenario: &ToxicityScenario,
    config: &StudyConfig,
    rep: u64,
) -> Result<TrialRecord> {
    let seed = seeds::rep_seed(config.seed, &spec.label, scenario.name(), rep);
    let mut record = run_trial(design, scenario, config, seed).map_err(|e| Error::Replication {
        design: spec.label.clone(),
        scenario: scenario.name().to_string(),
        rep,
        source: Box::new(e),
    })?;
    record.design = spec.label.clone();
    Ok(record)
}

/// Run every (design, scenario) cell; rows come out design-major.
pub fn run_study(study: &Study, exec: Execution) -> Result<MetricsTable> {
    study.validate()?;
    let mut cells = Vec::new();
    for spec in &study.designs {
        for scenario in &study.scenarios {
            cells.push((spec, scenario, study.build(spec, scenario)?));
        }
    }
    let reps = study.config.reps as usize;
    let summaries = exec.map(cells.len() * reps, |job| {
        let (spec, scenario, design) = &cells[job / reps];
        let record = replicate(
            design.as_ref(),
            spec,
            scenario,
            &study.config,
            (job % reps) as u64,
        )?;
        Ok(record.summary(scenario, study.config.phi))
    })?;
    let rows = cells
        .iter()
        .zip(summaries.chunks(reps.max(1)))
        .map(|((spec, scenario, _), runs)| compute_metrics(&spec.label, scenario.name(), runs))
        .collect::<Result<Vec<_>>>()?;
    Ok(MetricsTable { rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::designs::{DesignConfig, DesignId};
    use crate::grid::DoseGrid;

    fn study(reps: u32, seed: u64) -> Study {
        let grid = DoseGrid::new(5, 3).unwrap();
        let rows = vec![
            vec![0.05, 0.10, 0.15, 0.30, 0.45],
            vec![0.10, 0.15, 0.30, 0.45, 0.55],
            vec![0.15, 0.30, 0.45, 0.50, 0.60],
        ];
        Study {
            config: StudyConfig {
                reps,
                seed,
                ..StudyConfig::default()
            },
            designs: vec![
                DesignSpec::new(DesignConfig::default_for(DesignId::Cboin)),
                DesignSpec::new(DesignConfig::default_for(DesignId::Ckeyboard)),
            ],
            scenarios: vec![
                ToxicityScenario::from_rows("staircase", &rows).unwrap(),
                ToxicityScenario::uniform("flat", grid, 0.3).unwrap(),
            ],
        }
    }

    #[test]
    fn one_rep_equals_single_record() {
        let s = study(1, 5);
        let table = run_study(&s, Execution::Sequential).unwrap();
        let records = s
            .simulate_cell(&s.designs[0], &s.scenarios[0], Execution::Sequential)
            .unwrap();
        let direct = compute_metrics(
            "cboin",
            "staircase",
            &[records[0].summary(&s.scenarios[0], 0.3)],
        )
        .unwrap();
        assert_eq!(table.rows[0], direct);
        assert_eq!(table.rows.len(), 4);
    }

    #[test]
    fn doubling_reps_keeps_prefix() {
        let a = study(10, 1);
        let b = study(20, 1);
        let ra = a
            .simulate_cell(&a.designs[1], &a.scenarios[0], Execution::Sequential)
            .unwrap();
        let rb = b
            .simulate_cell(&b.designs[1], &b.scenarios[0], Execution::Sequential)
            .unwrap();
        assert_eq!(ra[..], rb[..10]);
    }

    #[test]
    fn schedule_does_not_change_output() {
        let s = study(30, 11);
        let seq = run_study(&s, Execution::Sequential)
            .unwrap()
            .to_csv_string();
        for threads in [None, Some(2), Some(3)] {
            let par = run_study(&s, Execution::Parallel { threads })
                .unwrap()
                .to_csv_string();
            assert_eq!(seq, par);
        }
    }

    #[test]
    fn parses_study_file() {
        let text = r#"{
            "reps": 3, "seed": 9, "early_stop_n": 12,
            "designs": [{"id": "cboin"}, {"id": "pocrm", "label": "pocrm-wide"}],
            "scenarios": [{"name": "a", "J": 2, "K": 1, "rates": [[0.1, 0.3]]}]
        }"#;
        let s = Study::from_json(text, Path::new(".")).unwrap();
        assert_eq!(s.config.early_stop_n, Some(12));
        assert_eq!(s.designs[1].label, "pocrm-wide");
        assert_eq!(s.scenarios[0].grid(), DoseGrid::new(2, 1).unwrap());
        let bad = text.replace("\"cboin\"", "\"boin\"");
        let err = Study::from_json(&bad, Path::new("."))
            .unwrap_err()
            .to_string();
        assert!(err.contains("cboin"), "{err}");
    }

    #[test]
    fn mismatched_profile_fails_at_build() {
        let mut s = study(2, 0);
        s.scenarios =
            vec![ToxicityScenario::uniform("tiny", DoseGrid::new(2, 2).unwrap(), 0.3).unwrap()];
        s.designs = vec![DesignSpec::new(DesignConfig::default_for(DesignId::Copula))];
        assert!(matches!(
            run_study(&s, Execution::Sequential),
            Err(Error::ShapeMismatch(_))
        ));
    }
}
