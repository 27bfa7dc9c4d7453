//! Comparison of simulated operating characteristics with the published
//! reference values, and the pre-tabulated interval-design decision chart.

use std::fmt::{self, Write as _};
use std::io::Write;
use std::str::FromStr;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::designs::interval::Direction;
use crate::designs::{BuildContext, Cboin, CboinParams, Ckeyboard, CkeyboardParams, DesignId};
use crate::engine::{MetricsRow, MetricsTable};
use crate::error::{Error, Result};
use crate::grid::DoseGrid;

const REFERENCE_CSV: &str = include_str!("../data/reference.csv");

/// Which published table a comparison draws from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Setting {
    #[serde(rename = "standard")]
    Standard,
    /// Trials stop once the recommended dose already holds 12 patients.
    #[serde(rename = "early-stop-12")]
    EarlyStop12,
}

impl FromStr for Setting {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "standard" => Ok(Setting::Standard),
            "early-stop-12" | "early-stop" => Ok(Setting::EarlyStop12),
            _ => Err(Error::Parse(format!(
                "unknown setting `{s}`; use standard or early-stop-12"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Metric {
    #[serde(rename = "S_C")]
    SC,
    #[serde(rename = "S_OT")]
    SOt,
    #[serde(rename = "A_C")]
    AC,
    #[serde(rename = "A_OT")]
    AOt,
}

impl Metric {
    pub const ALL: [Metric; 4] = [Metric::SC, Metric::SOt, Metric::AC, Metric::AOt];

    pub fn as_str(self) -> &'static str {
        match self {
            Metric::SC => "S_C",
            Metric::SOt => "S_OT",
            Metric::AC => "A_C",
            Metric::AOt => "A_OT",
        }
    }

    pub fn higher_is_better(self) -> bool {
        matches!(self, Metric::SC | Metric::AC)
    }

    pub fn of(self, row: &MetricsRow) -> f64 {
        match self {
            Metric::SC => row.s_c,
            Metric::SOt => row.s_ot,
            Metric::AC => row.a_c,
            Metric::AOt => row.a_ot,
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReferenceEntry {
    pub setting: Setting,
    pub metric: Metric,
    pub design: DesignId,
    pub scenario: u32,
    pub value: f64,
    /// Marked among the best for this scenario in the published table.
    pub best: bool,
    pub worst: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceTable {
    pub entries: Vec<ReferenceEntry>,
}

impl ReferenceTable {
    pub fn embedded() -> &'static ReferenceTable {
        static TABLE: OnceLock<ReferenceTable> = OnceLock::new();
        TABLE.get_or_init(|| {
            ReferenceTable::parse(REFERENCE_CSV).expect("embedded reference table parses")
        })
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut r = csv::Reader::from_reader(text.as_bytes());
        let entries = r
            .deserialize()
            .collect::<std::result::Result<Vec<ReferenceEntry>, _>>()?;
        if let Some(e) = entries.iter().find(|e| !(0.0..=1.0).contains(&e.value)) {
            return Err(Error::Parse(format!(
                "reference value {} is not a proportion",
                e.value
            )));
        }
        Ok(ReferenceTable { entries })
    }

    pub fn get(
        &self,
        setting: Setting,
        metric: Metric,
        design: DesignId,
        scenario: u32,
    ) -> Option<&ReferenceEntry> {
        self.entries.iter().find(|e| {
            e.setting == setting
                && e.metric == metric
                && e.design == design
                && e.scenario == scenario
        })
    }

    /// Published values for one design and metric, in scenario order.
    pub fn row(&self, setting: Setting, metric: Metric, design: DesignId) -> Vec<f64> {
        let mut v: Vec<_> = self
            .entries
            .iter()
            .filter(|e| e.setting == setting && e.metric == metric && e.design == design)
            .map(|e| (e.scenario, e.value))
            .collect();
        v.sort_by_key(|(s, _)| *s);
        v.into_iter().map(|(_, x)| x).collect()
    }

    fn scenarios(&self, setting: Setting) -> Vec<u32> {
        let mut s: Vec<_> = self
            .entries
            .iter()
            .filter(|e| e.setting == setting)
            .map(|e| e.scenario)
            .collect();
        s.sort_unstable();
        s.dedup();
        s
    }
}

/// Reference scenario number of a results row: `3`, `scenario-3`,
/// `scenario_3`, `scenario 3` or `s3`.
pub fn scenario_number(name: &str) -> Option<u32> {
    let lower = name.trim().to_ascii_lowercase();
    let digits = ["scenario-", "scenario_", "scenario ", "scenario", "s"]
        .iter()
        .find_map(|p| lower.strip_prefix(p))
        .unwrap_or(&lower);
    digits.parse().ok()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub design: String,
    pub scenario: String,
    pub metric: Metric,
    pub result: f64,
    pub reference: f64,
    pub delta: f64,
    /// Best or worst among the compared designs on this scenario.
    pub best: bool,
    pub worst: bool,
    pub reference_best: bool,
    pub reference_worst: bool,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Comparison {
    pub rows: Vec<ComparisonRow>,
    pub warnings: Vec<String>,
}

fn round9(x: f64) -> f64 {
    (x * 1e9).round() / 1e9
}

/// Join results with the reference table. Rows with no published
/// counterpart are dropped with a warning, as are published scenarios the
/// results do not cover.
pub fn compare(results: &MetricsTable, reference: &ReferenceTable, setting: Setting) -> Comparison {
    let mut out = Comparison::default();
    let mut matched = Vec::new();
    for row in &results.rows {
        let design = row.design.parse::<DesignId>().ok();
        let number = scenario_number(&row.scenario);
        let (Some(design), Some(number)) = (design, number) else {
            out.warnings.push(format!(
                "no reference for {} on {}",
                row.design, row.scenario
            ));
            continue;
        };
        let mut any = false;
        for metric in Metric::ALL {
            if let Some(e) = reference.get(setting, metric, design, number) {
                any = true;
                let result = metric.of(row);
                out.rows.push(ComparisonRow {
                    design: row.design.clone(),
                    scenario: row.scenario.clone(),
                    metric,
                    result,
                    reference: e.value,
                    delta: round9(result - e.value),
                    best: false,
                    worst: false,
                    reference_best: e.best,
                    reference_worst: e.worst,
                });
            }
        }
        if any {
            matched.push(number);
        } else {
            out.warnings.push(format!(
                "no reference for {} on {}",
                row.design, row.scenario
            ));
        }
    }
    for s in reference.scenarios(setting) {
        if !matched.contains(&s) {
            out.warnings
                .push(format!("scenario {s} missing from results; omitted"));
        }
    }
    flag_extremes(&mut out.rows);
    out
}

fn flag_extremes(rows: &mut [ComparisonRow]) {
    let keys: Vec<(String, Metric)> = rows
        .iter()
        .map(|r| (r.scenario.clone(), r.metric))
        .collect();
    for (scenario, metric) in &keys {
        let group: Vec<usize> = (0..rows.len())
            .filter(|&i| rows[i].scenario == *scenario && rows[i].metric == *metric)
            .collect();
        if group.len() < 2 {
            continue;
        }
        let vals = group.iter().map(|&i| rows[i].result);
        let (lo, hi) = vals.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| {
            (a.min(x), b.max(x))
        });
        if lo == hi {
            continue;
        }
        let (best, worst) = if metric.higher_is_better() {
            (hi, lo)
        } else {
            (lo, hi)
        };
        for &i in &group {
            rows[i].best = rows[i].result == best;
            rows[i].worst = rows[i].result == worst;
        }
    }
}

impl Comparison {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for row in &self.rows {
            w.serialize(row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_markdown(&self) -> String {
        let mut s = String::new();
        s.push_str(
            "| design | scenario | metric | result | reference | delta | flag | reference flag |\n",
        );
        s.push_str("|---|---|---|---|---|---|---|---|\n");
        let flag = |best: bool, worst: bool| match (best, worst) {
            (true, _) => "best",
            (_, true) => "worst",
            _ => "",
        };
        for r in &self.rows {
            let _ = writeln!(
                s,
                "| {} | {} | {} | {:.3} | {:.2} | {:+.3} | {} | {} |",
                r.design,
                r.scenario,
                r.metric,
                r.result,
                r.reference,
                r.delta,
                flag(r.best, r.worst),
                flag(r.reference_best, r.reference_worst)
            );
        }
        for w in &self.warnings {
            let _ = writeln!(s, "\nwarning: {w}");
        }
        s
    }
}

/// One row of the interval-design decision chart at cohort total `n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct BoundaryRow {
    pub n: u32,
    /// Escalate when the DLT count is at most this.
    pub escalate_if_y_le: Option<u32>,
    /// De-escalate when the DLT count is at least this.
    pub deescalate_if_y_ge: Option<u32>,
}

pub fn boundary_table(design: DesignId, phi: f64, cap: u32) -> Result<Vec<BoundaryRow>> {
    let ctx = BuildContext {
        grid: DoseGrid::new(1, 1)?,
        phi,
        scenario: None,
    };
    let direction: Box<dyn Fn(u32, u32) -> Direction> = match design {
        DesignId::Cboin => {
            let b = *Cboin::new(&CboinParams::default(), &ctx)?.boundaries();
            Box::new(move |y, n| b.direction(y, n))
        }
        DesignId::Ckeyboard => {
            let k = Ckeyboard::new(&CkeyboardParams::default(), &ctx)?;
            Box::new(move |y, n| k.direction(y, n))
        }
        other => {
            return Err(Error::param(format!(
            "{other} decisions depend on more than (n, y); only cboin and ckeyboard have a chart"
        )))
        }
    };
    Ok((1..=cap)
        .map(|n| {
            let dirs: Vec<_> = (0..=n).map(|y| direction(y, n)).collect();
            BoundaryRow {
                n,
                escalate_if_y_le: (0..=n)
                    .filter(|&y| dirs[y as usize] == Direction::Escalate)
                    .max(),
                deescalate_if_y_ge: (0..=n)
                    .filter(|&y| dirs[y as usize] == Direction::DeEscalate)
                    .min(),
            }
        })
        .collect())
}

pub fn write_boundary_csv<W: Write>(rows: &[BoundaryRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["n", "escalate_if_y_le", "deescalate_if_y_ge"])?;
    let cell = |v: Option<u32>| v.map(|x| x.to_string()).unwrap_or_default();
    for r in rows {
        w.write_record([
            r.n.to_string(),
            cell(r.escalate_if_y_le),
            cell(r.deescalate_if_y_ge),
        ])?;
    }
    w.flush()?;
    Ok(())
}
