//! Design outputs: the next action during conduct and the final selection.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::Error;
use crate::grid::Dose;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Action {
    Assign { dose: Dose },
    Terminate,
}

/// Why a design chose its action. Serialized as a short kebab-case label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Reason {
    StartUp,
    /// First model-based assignment after the start-up phase.
    ModelEntry,
    Escalate,
    DeEscalate,
    Stay,
    /// Model-based pick of the admissible dose nearest the target.
    ClosestToTarget,
    /// Model cannot be fitted yet; hold at the highest explored dose.
    NoHeterogeneity,
    SafetyStop,
    EarlyStop(u32),
    MaxSampleSize,
}

impl fmt::Display for Reason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Reason::StartUp => f.write_str("start-up"),
            Reason::ModelEntry => f.write_str("model-entry"),
            Reason::Escalate => f.write_str("escalate"),
            Reason::DeEscalate => f.write_str("de-escalate"),
            Reason::Stay => f.write_str("stay"),
            Reason::ClosestToTarget => f.write_str("closest-to-target"),
            Reason::NoHeterogeneity => f.write_str("no-heterogeneity"),
            Reason::SafetyStop => f.write_str("safety-stop"),
            Reason::EarlyStop(cap) => write!(f, "early-stop-{cap}"),
            Reason::MaxSampleSize => f.write_str("max-sample-size"),
        }
    }
}

impl FromStr for Reason {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        Ok(match s {
            "start-up" => Reason::StartUp,
            "model-entry" => Reason::ModelEntry,
            "escalate" => Reason::Escalate,
            "de-escalate" => Reason::DeEscalate,
            "stay" => Reason::Stay,
            "closest-to-target" => Reason::ClosestToTarget,
            "no-heterogeneity" => Reason::NoHeterogeneity,
            "safety-stop" => Reason::SafetyStop,
            "max-sample-size" => Reason::MaxSampleSize,
            other => match other.strip_prefix("early-stop-").map(str::parse) {
                Some(Ok(cap)) => Reason::EarlyStop(cap),
                _ => return Err(Error::Parse(format!("unknown decision reason `{other}`"))),
            },
        })
    }
}

impl Serialize for Reason {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Reason {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Decision {
    pub action: Action,
    pub reason: Reason,
}

impl Decision {
    pub fn assign(dose: Dose, reason: Reason) -> Self {
        Decision {
            action: Action::Assign { dose },
            reason,
        }
    }

    pub fn terminate(reason: Reason) -> Self {
        Decision {
            action: Action::Terminate,
            reason,
        }
    }

    pub fn dose(&self) -> Option<Dose> {
        match self.action {
            Action::Assign { dose } => Some(dose),
            Action::Terminate => None,
        }
    }

    pub fn is_terminate(&self) -> bool {
        self.action == Action::Terminate
    }
}

impl fmt::Display for Decision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.action {
            Action::Assign { dose } => write!(f, "{dose}, {}", self.reason),
            Action::Terminate => write!(f, "terminate, {}", self.reason),
        }
    }
}

/// Final MTD recommendation. `selected` is `None` when the trial stopped without one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MtdResult {
    pub selected: Option<Dose>,
    pub estimate: Option<f64>,
}

impl MtdResult {
    pub fn none() -> Self {
        MtdResult {
            selected: None,
            estimate: None,
        }
    }

    pub fn at(dose: Dose, estimate: f64) -> Self {
        MtdResult {
            selected: Some(dose),
            estimate: Some(estimate),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reason_labels_round_trip() {
        for r in [
            Reason::StartUp,
            Reason::ModelEntry,
            Reason::Escalate,
            Reason::DeEscalate,
            Reason::Stay,
            Reason::ClosestToTarget,
            Reason::NoHeterogeneity,
            Reason::SafetyStop,
            Reason::EarlyStop(12),
            Reason::MaxSampleSize,
        ] {
            assert_eq!(r.to_string().parse::<Reason>().unwrap(), r);
        }
        assert_eq!(Reason::EarlyStop(12).to_string(), "early-stop-12");
        assert!("sideways".parse::<Reason>().is_err());
    }

    #[test]
    fn decision_json_shape() {
        let d = Decision::assign(Dose::new(1, 1), Reason::StartUp);
        let v = serde_json::to_value(d).unwrap();
        assert_eq!(
            v,
            serde_json::json!({"action":{"type":"assign","dose":{"j":1,"k":1}},"reason":"start-up"})
        );
        assert_eq!(d.to_string(), "(1,1), start-up");
        let back: Decision = serde_json::from_value(v).unwrap();
        assert_eq!(back, d);
    }
}
