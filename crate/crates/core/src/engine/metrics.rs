//! Operating characteristics: S_C, S_OT, A_C, A_OT.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Dose;
use crate::scenario::{ToxicityScenario, MTD_TOL};
use crate::trial::CohortRecord;

/// What the metrics need from one replication.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialSummary {
    pub correct: bool,
    pub over_toxic: bool,
    pub selected_any: bool,
    pub patients_total: u32,
    pub at_mtd: u32,
    pub at_over_toxic: u32,
}

impl TrialSummary {
    pub fn from_log(
        log: &[CohortRecord],
        selected: Option<Dose>,
        scenario: &ToxicityScenario,
        phi: f64,
    ) -> Self {
        let mtd = scenario.true_mtd_set(phi, MTD_TOL);
        let mut s = TrialSummary {
            correct: selected.is_some_and(|d| mtd.contains(&d)),
            over_toxic: selected.is_some_and(|d| scenario.is_over_toxic(d, phi)),
            selected_any: selected.is_some(),
            patients_total: 0,
            at_mtd: 0,
            at_over_toxic: 0,
        };
        for c in log {
            s.patients_total += c.patients;
            if mtd.contains(&c.dose) {
                s.at_mtd += c.patients;
            }
            if scenario.is_over_toxic(c.dose, phi) {
                s.at_over_toxic += c.patients;
            }
        }
        s
    }

    fn share(&self, count: u32) -> f64 {
        if self.patients_total == 0 {
            0.0
        } else {
            f64::from(count) / f64::from(self.patients_total)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub design: String,
    pub scenario: String,
    #[serde(rename = "S_C")]
    pub s_c: f64,
    #[serde(rename = "S_OT")]
    pub s_ot: f64,
    #[serde(rename = "A_C")]
    pub a_c: f64,
    #[serde(rename = "A_OT")]
    pub a_ot: f64,
    pub reps: u32,
    pub mean_n: f64,
}

/// Aggregate replications of one (design, scenario) cell. Runs that select
/// nothing count in every denominator.
pub fn compute_metrics(design: &str, scenario: &str, runs: &[TrialSummary]) -> Result<MetricsRow> {
    if runs.is_empty() {
        return Err(Error::param(format!(
            "no replications for {design} on {scenario}"
        )));
    }
    let reps = runs.len() as f64;
    let frac = |f: &dyn Fn(&TrialSummary) -> f64| runs.iter().map(f).sum::<f64>() / reps;
    Ok(MetricsRow {
        design: design.to_string(),
        scenario: scenario.to_string(),
        s_c: frac(&|r| f64::from(u8::from(r.correct))),
        s_ot: frac(&|r| f64::from(u8::from(r.over_toxic))),
        a_c: frac(&|r| r.share(r.at_mtd)),
        a_ot: frac(&|r| r.share(r.at_over_toxic)),
        reps: runs.len() as u32,
        mean_n: frac(&|r| f64::from(r.patients_total)),
    })
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct MetricsTable {
    pub rows: Vec<MetricsRow>,
}

impl MetricsTable {
    pub fn get(&self, design: &str, scenario: &str) -> Option<&MetricsRow> {
        self.rows
            .iter()
            .find(|r| r.design == design && r.scenario == scenario)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for row in &self.rows {
            w.serialize(row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)
            .expect("writing to memory cannot fail");
        String::from_utf8(buf).expect("csv output is utf-8")
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(input);
        let rows = r
            .deserialize()
            .collect::<std::result::Result<Vec<MetricsRow>, _>>()?;
        Ok(MetricsTable { rows })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{DoseGrid, DoseMatrix};

    fn scenario() -> ToxicityScenario {
        let grid = DoseGrid::new(3, 1).unwrap();
        ToxicityScenario::new(
            "s",
            DoseMatrix::from_vec(grid, vec![0.1, 0.3, 0.5]).unwrap(),
        )
        .unwrap()
    }

    fn cohort(j: usize, patients: u32) -> CohortRecord {
        CohortRecord {
            dose: Dose::new(j, 1),
            patients,
            dlts: 0,
        }
    }

    #[test]
    fn all_correct() {
        let s = scenario();
        let run = TrialSummary::from_log(&[cohort(2, 3)], Some(Dose::new(2, 1)), &s, 0.3);
        let m = compute_metrics("x", "s", &[run; 4]).unwrap();
        assert_eq!((m.s_c, m.s_ot), (1.0, 0.0));
    }

    #[test]
    fn half_at_mtd() {
        let s = scenario();
        let log = [cohort(1, 15), cohort(2, 30), cohort(3, 15)];
        let run = TrialSummary::from_log(&log, Some(Dose::new(3, 1)), &s, 0.3);
        let m = compute_metrics("x", "s", &[run]).unwrap();
        assert_eq!(m.a_c, 0.5);
        assert_eq!(m.a_ot, 0.25);
        assert_eq!((m.s_c, m.s_ot, m.mean_n), (0.0, 1.0, 60.0));
    }

    #[test]
    fn no_selection_counts_against_both() {
        let s = scenario();
        let good = TrialSummary::from_log(&[cohort(2, 3)], Some(Dose::new(2, 1)), &s, 0.3);
        let none = TrialSummary::from_log(&[cohort(1, 3)], None, &s, 0.3);
        let m = compute_metrics("x", "s", &[good, none]).unwrap();
        assert_eq!((m.s_c, m.s_ot), (0.5, 0.0));
        assert!(compute_metrics("x", "s", &[]).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let s = scenario();
        let run = TrialSummary::from_log(&[cohort(2, 7)], Some(Dose::new(1, 1)), &s, 0.3);
        let table = MetricsTable {
            rows: vec![compute_metrics("cboin", "s", &[run]).unwrap()],
        };
        let text = table.to_csv_string();
        assert!(text.starts_with("design,scenario,S_C,S_OT,A_C,A_OT,reps,mean_n\n"));
        assert_eq!(MetricsTable::read_csv(text.as_bytes()).unwrap(), table);
    }
}
