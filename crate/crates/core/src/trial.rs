//! Running trial bookkeeping.
//!
//! The cohort log is the source of truth; the `n`/`y` matrices are caches
//! rebuilt exactly by [`TrialState::replay`].

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Dose, DoseGrid, DoseMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Startup,
    Model,
    Finished,
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Phase::Startup => "startup",
            Phase::Model => "model",
            Phase::Finished => "finished",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CohortRecord {
    pub dose: Dose,
    pub patients: u32,
    pub dlts: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialState {
    grid: DoseGrid,
    n: DoseMatrix<u32>,
    y: DoseMatrix<u32>,
    log: Vec<CohortRecord>,
    phase: Phase,
    current: Option<Dose>,
}

impl TrialState {
    pub fn new(grid: DoseGrid) -> Self {
        TrialState {
            grid,
            n: DoseMatrix::filled(grid, 0),
            y: DoseMatrix::filled(grid, 0),
            log: Vec::new(),
            phase: Phase::Startup,
            current: None,
        }
    }

    /// Rebuild a state from a cohort log.
    pub fn replay(grid: DoseGrid, log: &[CohortRecord]) -> Result<Self> {
        log.iter().try_fold(TrialState::new(grid), |s, c| {
            s.record_cohort(c.dose, c.patients, c.dlts)
        })
    }

    pub fn record_cohort(&self, dose: Dose, patients: u32, dlts: u32) -> Result<Self> {
        let mut next = self.clone();
        next.push_cohort(dose, patients, dlts)?;
        Ok(next)
    }

    /// In-place form of [`record_cohort`](Self::record_cohort) for simulation loops.
    pub fn push_cohort(&mut self, dose: Dose, patients: u32, dlts: u32) -> Result<()> {
        self.grid.check(dose)?;
        if patients == 0 {
            return Err(Error::EmptyCohort);
        }
        if dlts > patients {
            return Err(Error::TooManyDlts { patients, dlts });
        }
        if self.phase == Phase::Finished {
            return Err(Error::TrialFinished);
        }
        self.n[dose] += patients;
        self.y[dose] += dlts;
        self.log.push(CohortRecord {
            dose,
            patients,
            dlts,
        });
        self.current = Some(dose);
        Ok(())
    }

    pub fn set_phase(&mut self, phase: Phase) {
        self.phase = phase;
    }

    pub fn grid(&self) -> DoseGrid {
        self.grid
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn current(&self) -> Option<Dose> {
        self.current
    }

    pub fn log(&self) -> &[CohortRecord] {
        &self.log
    }

    pub fn n(&self) -> &DoseMatrix<u32> {
        &self.n
    }

    pub fn y(&self) -> &DoseMatrix<u32> {
        &self.y
    }

    pub fn patients_at(&self, dose: Dose) -> u32 {
        self.n[dose]
    }

    pub fn dlts_at(&self, dose: Dose) -> u32 {
        self.y[dose]
    }

    pub fn total_patients(&self) -> u32 {
        self.n.as_slice().iter().sum()
    }

    pub fn total_dlts(&self) -> u32 {
        self.y.as_slice().iter().sum()
    }

    pub fn is_tried(&self, dose: Dose) -> bool {
        self.n[dose] > 0
    }

    pub fn tried(&self) -> impl Iterator<Item = Dose> + '_ {
        self.grid.doses().filter(|d| self.n[*d] > 0)
    }

    pub fn empirical_rate(&self, dose: Dose) -> Result<f64> {
        self.grid.check(dose)?;
        match self.n[dose] {
            0 => Err(Error::UndefinedRate(dose)),
            n => Ok(f64::from(self.y[dose]) / f64::from(n)),
        }
    }

    /// Tried doses with their `(n, y)` counts, in storage order.
    pub fn counts(&self) -> Vec<(Dose, u32, u32)> {
        self.tried().map(|d| (d, self.n[d], self.y[d])).collect()
    }

    /// Index of the first cohort that recorded a DLT.
    pub fn first_dlt_cohort(&self) -> Option<usize> {
        self.log.iter().position(|c| c.dlts > 0)
    }

    /// Drop the most recent cohort.
    pub fn without_last(&self) -> Result<Self> {
        if self.log.is_empty() {
            return Err(Error::InvalidHistory("log is empty".into()));
        }
        Self::replay(self.grid, &self.log[..self.log.len() - 1])
    }

    /// Truncated copy holding the first `len` cohorts.
    pub fn prefix(&self, len: usize) -> Self {
        Self::replay(self.grid, &self.log[..len.min(self.log.len())])
            .expect("prefix of a valid log is valid")
    }
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    fn grid() -> DoseGrid {
        DoseGrid::new(5, 3).unwrap()
    }

    #[test]
    fn record_into_empty_state() {
        let s = TrialState::new(grid())
            .record_cohort(Dose::new(1, 1), 3, 0)
            .unwrap();
        assert_eq!(s.patients_at(Dose::new(1, 1)), 3);
        assert_eq!(s.dlts_at(Dose::new(1, 1)), 0);
        assert_eq!(s.current(), Some(Dose::new(1, 1)));
    }

    #[test]
    fn record_accumulates() {
        let d = Dose::new(2, 1);
        let s = TrialState::new(grid())
            .record_cohort(d, 3, 0)
            .unwrap()
            .record_cohort(d, 3, 2)
            .unwrap();
        assert_eq!((s.patients_at(d), s.dlts_at(d)), (6, 2));
        assert!((s.empirical_rate(d).unwrap() - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn record_errors() {
        let s = TrialState::new(grid());
        assert!(matches!(
            s.record_cohort(Dose::new(6, 1), 3, 0),
            Err(Error::OutOfGrid { .. })
        ));
        assert!(matches!(
            s.record_cohort(Dose::new(1, 1), 3, 4),
            Err(Error::TooManyDlts { .. })
        ));
        let mut done = s.clone();
        done.set_phase(Phase::Finished);
        assert_eq!(
            done.record_cohort(Dose::new(1, 1), 3, 0),
            Err(Error::TrialFinished)
        );
    }

    #[test]
    fn empirical_rate_cases() {
        let d = Dose::new(1, 1);
        let s = TrialState::new(grid());
        assert_eq!(s.empirical_rate(d), Err(Error::UndefinedRate(d)));
        let s = s.record_cohort(d, 3, 0).unwrap();
        assert_eq!(s.empirical_rate(d).unwrap(), 0.0);
    }

    fn cohort() -> impl Strategy<Value = CohortRecord> {
        (1usize..=5, 1usize..=3, 1u32..=4)
            .prop_flat_map(|(j, k, p)| (Just(Dose::new(j, k)), Just(p), 0..=p))
            .prop_map(|(dose, patients, dlts)| CohortRecord {
                dose,
                patients,
                dlts,
            })
    }

    proptest! {
        #[test]
        fn replay_reconstructs_counts(log in proptest::collection::vec(cohort(), 0..30)) {
            let mut s = TrialState::new(grid());
            for c in &log {
                s.push_cohort(c.dose, c.patients, c.dlts).unwrap();
            }
            let r = TrialState::replay(grid(), s.log()).unwrap();
            prop_assert_eq!(r.n(), s.n());
            prop_assert_eq!(r.y(), s.y());
            let logged: u32 = log.iter().map(|c| c.patients).sum();
            prop_assert_eq!(logged, s.total_patients());
            for d in s.tried() {
                let rate = s.empirical_rate(d).unwrap();
                prop_assert!((0.0..=1.0).contains(&rate));
            }
        }
    }
}
