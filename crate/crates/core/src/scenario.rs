//! True toxicity scenarios used as ground truth by the simulator.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Dose, DoseGrid, DoseMatrix};

/// Default tolerance for deciding that a true rate equals the target.
pub const MTD_TOL: f64 = 1e-6;
/// A dose is over-toxic when its true rate exceeds the target by more than this.
pub const OVER_TOXIC_MARGIN: f64 = 1e-9;

/// On-disk form: `rates` holds `K` rows of `J` probabilities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioFile {
    pub name: String,
    #[serde(rename = "J")]
    pub j_levels: usize,
    #[serde(rename = "K")]
    pub k_levels: usize,
    pub rates: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ToxicityScenario {
    name: String,
    rates: DoseMatrix<f64>,
    monotone: bool,
}

impl ToxicityScenario {
    pub fn new(name: impl Into<String>, rates: DoseMatrix<f64>) -> Result<Self> {
        if let Some((d, r)) = rates.iter().find(|(_, r)| !(0.0..=1.0).contains(*r)) {
            return Err(Error::param(format!(
                "rate {r} at {d} is not a probability"
            )));
        }
        let grid = rates.grid();
        let monotone = grid.doses().all(|d| {
            let up_j = d.offset(1, 0).filter(|n| grid.contains(*n));
            let up_k = d.offset(0, 1).filter(|n| grid.contains(*n));
            up_j.is_none_or(|n| rates[n] >= rates[d]) && up_k.is_none_or(|n| rates[n] >= rates[d])
        });
        Ok(ToxicityScenario {
            name: name.into(),
            rates,
            monotone,
        })
    }

    /// Build from `K` rows of `J` rates.
    pub fn from_rows(name: impl Into<String>, rows: &[Vec<f64>]) -> Result<Self> {
        let k_levels = rows.len();
        let j_levels = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != j_levels) {
            return Err(Error::ShapeMismatch("ragged rate rows".into()));
        }
        let grid = DoseGrid::new(j_levels, k_levels)?;
        let data = rows.iter().flatten().copied().collect();
        Self::new(name, DoseMatrix::from_vec(grid, data)?)
    }

    pub fn uniform(name: impl Into<String>, grid: DoseGrid, rate: f64) -> Result<Self> {
        Self::new(name, DoseMatrix::filled(grid, rate))
    }

    pub fn from_file_form(file: ScenarioFile) -> Result<Self> {
        let s = Self::from_rows(file.name, &file.rates)?;
        let g = s.grid();
        if g.j_levels != file.j_levels || g.k_levels != file.k_levels {
            return Err(Error::ShapeMismatch(format!(
                "scenario `{}` declares {}x{} but rates are {}x{}",
                s.name, file.j_levels, file.k_levels, g.j_levels, g.k_levels
            )));
        }
        Ok(s)
    }

    pub fn to_file_form(&self) -> ScenarioFile {
        let g = self.grid();
        ScenarioFile {
            name: self.name.clone(),
            j_levels: g.j_levels,
            k_levels: g.k_levels,
            rates: self.rates.rows().map(<[f64]>::to_vec).collect(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Self::from_file_form(serde_json::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::from_json(&text).map_err(|e| match e {
            Error::Parse(m) => Error::Parse(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn grid(&self) -> DoseGrid {
        self.rates.grid()
    }

    pub fn rates(&self) -> &DoseMatrix<f64> {
        &self.rates
    }

    pub fn rate(&self, dose: Dose) -> f64 {
        self.rates[dose]
    }

    /// Whether rates are non-decreasing along every row and column.
    pub fn is_monotone(&self) -> bool {
        self.monotone
    }

    /// Doses whose true rate equals `phi` within `tol`.
    pub fn true_mtd_set(&self, phi: f64, tol: f64) -> Vec<Dose> {
        self.rates
            .iter()
            .filter(|(_, r)| (**r - phi).abs() <= tol)
            .map(|(d, _)| d)
            .collect()
    }

    pub fn is_over_toxic(&self, dose: Dose, phi: f64) -> bool {
        self.rates[dose] > phi + OVER_TOXIC_MARGIN
    }
}
