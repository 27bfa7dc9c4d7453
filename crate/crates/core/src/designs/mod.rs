//! The nine designs behind one contract.
//!
//! A design is built once per (configuration, grid, target, scenario) and is
//! then a pure function of the trial state and a seed: calling `decide` twice
//! with the same inputs returns the same decision.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::decision::{Decision, MtdResult};
use crate::error::{Error, Result};
use crate::grid::{DoseGrid, DoseMatrix};
use crate::scenario::ToxicityScenario;
use crate::trial::{Phase, TrialState};

pub mod bcrm;
pub mod common;
pub mod copula;
pub mod crm;
pub mod dfcomb;
pub mod gcrm;
pub mod hierarchy;
pub mod i2d;
pub mod interval;
pub mod pocrm;
pub mod profile;
mod tabulated;

pub use bcrm::{Bcrm, BcrmParams};
pub use copula::{Copula, CopulaParams};
pub use dfcomb::{Dfcomb, DfcombParams};
pub use gcrm::{Gcrm, GcrmParams};
pub use hierarchy::{Hierarchy, HierarchyParams};
pub use i2d::{I2d, I2dParams};
pub use interval::{Cboin, CboinParams, Ckeyboard, CkeyboardParams};
pub use pocrm::{Pocrm, PocrmParams};
pub use profile::{MonoProfile, PriorGuess, SamplerSettings};

pub trait Design: Send + Sync {
    fn id(&self) -> DesignId;

    fn grid(&self) -> DoseGrid;

    /// Patients to enrol in the next cohort.
    fn cohort_size(&self, _state: &TrialState, default: u32) -> u32 {
        default
    }

    /// Start-up or model phase implied by the cohort log.
    fn phase(&self, _state: &TrialState) -> Phase {
        Phase::Model
    }

    fn decide(&self, state: &TrialState, seed: u64) -> Result<Decision>;

    fn select_mtd(&self, state: &TrialState, seed: u64) -> Result<MtdResult>;

    /// Current toxicity estimate per dose; `None` where the design has none.
    fn estimates(&self, state: &TrialState, seed: u64) -> Result<DoseMatrix<Option<f64>>>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DesignId {
    I2d,
    Copula,
    Hierarchy,
    Pocrm,
    Dfcomb,
    Gcrm,
    Cboin,
    Ckeyboard,
    Bcrm,
}

impl DesignId {
    pub const ALL: [DesignId; 9] = [
        DesignId::I2d,
        DesignId::Copula,
        DesignId::Hierarchy,
        DesignId::Pocrm,
        DesignId::Dfcomb,
        DesignId::Gcrm,
        DesignId::Cboin,
        DesignId::Ckeyboard,
        DesignId::Bcrm,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            DesignId::I2d => "i2d",
            DesignId::Copula => "copula",
            DesignId::Hierarchy => "hierarchy",
            DesignId::Pocrm => "pocrm",
            DesignId::Dfcomb => "dfcomb",
            DesignId::Gcrm => "gcrm",
            DesignId::Cboin => "cboin",
            DesignId::Ckeyboard => "ckeyboard",
            DesignId::Bcrm => "bcrm",
        }
    }

    /// Conventional display name.
    pub fn display_name(self) -> &'static str {
        match self {
            DesignId::I2d => "I2D",
            DesignId::Copula => "Copula",
            DesignId::Hierarchy => "Hierarchy",
            DesignId::Pocrm => "POCRM",
            DesignId::Dfcomb => "DFCOMB",
            DesignId::Gcrm => "gCRM",
            DesignId::Cboin => "cBOIN",
            DesignId::Ckeyboard => "cKeyboard",
            DesignId::Bcrm => "bCRM",
        }
    }

    pub fn valid_ids() -> String {
        Self::ALL.map(DesignId::as_str).join(", ")
    }
}

impl fmt::Display for DesignId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DesignId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|d| d.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::UnknownDesign {
                id: s.to_string(),
                valid: Self::valid_ids(),
            })
    }
}

/// Parameters of one design; the JSON form carries the design under `"id"`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "id", rename_all = "lowercase")]
pub enum DesignConfig {
    I2d(I2dParams),
    Copula(CopulaParams),
    Hierarchy(HierarchyParams),
    Pocrm(PocrmParams),
    Dfcomb(DfcombParams),
    Gcrm(GcrmParams),
    Cboin(CboinParams),
    Ckeyboard(CkeyboardParams),
    Bcrm(BcrmParams),
}

/// What a design needs to know about the trial it will run.
#[derive(Debug, Clone, Copy)]
pub struct BuildContext<'a> {
    pub grid: DoseGrid,
    pub phi: f64,
    /// True rates, used only by designs whose prior guesses are taken from
    /// the scenario (`PriorGuess::Truth` / `Shifted`).
    pub scenario: Option<&'a ToxicityScenario>,
}

impl DesignConfig {
    pub fn default_for(id: DesignId) -> Self {
        match id {
            DesignId::I2d => DesignConfig::I2d(Default::default()),
            DesignId::Copula => DesignConfig::Copula(Default::default()),
            DesignId::Hierarchy => DesignConfig::Hierarchy(Default::default()),
            DesignId::Pocrm => DesignConfig::Pocrm(Default::default()),
            DesignId::Dfcomb => DesignConfig::Dfcomb(Default::default()),
            DesignId::Gcrm => DesignConfig::Gcrm(Default::default()),
            DesignId::Cboin => DesignConfig::Cboin(Default::default()),
            DesignId::Ckeyboard => DesignConfig::Ckeyboard(Default::default()),
            DesignId::Bcrm => DesignConfig::Bcrm(Default::default()),
        }
    }

    pub fn id(&self) -> DesignId {
        match self {
            DesignConfig::I2d(_) => DesignId::I2d,
            DesignConfig::Copula(_) => DesignId::Copula,
            DesignConfig::Hierarchy(_) => DesignId::Hierarchy,
            DesignConfig::Pocrm(_) => DesignId::Pocrm,
            DesignConfig::Dfcomb(_) => DesignId::Dfcomb,
            DesignConfig::Gcrm(_) => DesignId::Gcrm,
            DesignConfig::Cboin(_) => DesignId::Cboin,
            DesignConfig::Ckeyboard(_) => DesignId::Ckeyboard,
            DesignConfig::Bcrm(_) => DesignId::Bcrm,
        }
    }

    /// Parse a JSON object, reporting unknown ids with the list of valid ones.
    pub fn from_value(value: serde_json::Value) -> Result<Self> {
        let id = value
            .get("id")
            .and_then(serde_json::Value::as_str)
            .ok_or_else(|| Error::Parse("design entry needs a string `id`".into()))?;
        let id: DesignId = id.parse()?;
        let mut value = value;
        if let Some(obj) = value.as_object_mut() {
            obj.insert("id".into(), serde_json::Value::from(id.as_str()));
        }
        serde_json::from_value(value).map_err(|e| Error::Parse(format!("design `{id}`: {e}")))
    }

    /// True when building needs the scenario's rates.
    pub fn needs_scenario(&self) -> bool {
        match self {
            DesignConfig::Hierarchy(p) => p.guess.needs_scenario(),
            DesignConfig::Gcrm(p) => p.guess.needs_scenario(),
            _ => false,
        }
    }

    pub fn build(&self, ctx: &BuildContext<'_>) -> Result<Box<dyn Design>> {
        if !(ctx.phi > 0.0 && ctx.phi < 1.0) {
            return Err(Error::param(format!(
                "phi must lie in (0,1), got {}",
                ctx.phi
            )));
        }
        if let Some(s) = ctx.scenario {
            if s.grid() != ctx.grid {
                return Err(Error::ShapeMismatch(
                    "scenario grid differs from the trial grid".into(),
                ));
            }
        }
        Ok(match self {
            DesignConfig::I2d(p) => Box::new(I2d::new(p, ctx)?),
            DesignConfig::Copula(p) => Box::new(Copula::new(p, ctx)?),
            DesignConfig::Hierarchy(p) => Box::new(Hierarchy::new(p, ctx)?),
            DesignConfig::Pocrm(p) => Box::new(Pocrm::new(p, ctx)?),
            DesignConfig::Dfcomb(p) => Box::new(Dfcomb::new(p, ctx)?),
            DesignConfig::Gcrm(p) => Box::new(Gcrm::new(p, ctx)?),
            DesignConfig::Cboin(p) => Box::new(Cboin::new(p, ctx)?),
            DesignConfig::Ckeyboard(p) => Box::new(Ckeyboard::new(p, ctx)?),
            DesignConfig::Bcrm(p) => Box::new(Bcrm::new(p, ctx)?),
        })
    }
}

/// A design entry in a study: the configuration plus the label used in output.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignSpec {
    pub label: String,
    pub config: DesignConfig,
}

impl DesignSpec {
    pub fn new(config: DesignConfig) -> Self {
        DesignSpec {
            label: config.id().as_str().to_string(),
            config,
        }
    }

    /// Accepts `{"id": ..., "label": ..., <params>}`; `label` defaults to the id.
    pub fn from_value(value: serde_json::Value) -> Result<Self> {
        let mut value = value;
        let label = match value.as_object_mut() {
            Some(obj) => match obj.remove("label") {
                Some(serde_json::Value::String(s)) => Some(s),
                Some(_) => return Err(Error::Parse("design `label` must be a string".into())),
                None => None,
            },
            None => return Err(Error::Parse("design entry must be a JSON object".into())),
        };
        let config = DesignConfig::from_value(value)?;
        Ok(DesignSpec {
            label: label.unwrap_or_else(|| config.id().as_str().to_string()),
            config,
        })
    }

    pub fn to_value(&self) -> serde_json::Value {
        let mut v = serde_json::to_value(&self.config).expect("design config serializes");
        if self.label != self.config.id().as_str() {
            v["label"] = serde_json::Value::from(self.label.clone());
        }
        v
    }
}
