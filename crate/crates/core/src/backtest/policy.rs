//! Mapping from per-day model labels to asset weights.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::regime::RegimeLabel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ModelId {
    #[serde(rename = "msr2s")]
    Msr2S,
    #[serde(rename = "msr3s_to_2s")]
    Msr3Sto2S,
    #[serde(rename = "kama_msr")]
    KamaMsr,
}

impl ModelId {
    pub const ALL: [ModelId; 3] = [ModelId::Msr2S, ModelId::Msr3Sto2S, ModelId::KamaMsr];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelId::Msr2S => "msr2s",
            ModelId::Msr3Sto2S => "msr3s_to_2s",
            ModelId::KamaMsr => "kama_msr",
        }
    }
}

impl fmt::Display for ModelId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for ModelId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace(['-', '_', '>', ' '], "").as_str() {
            "msr2s" => Ok(ModelId::Msr2S),
            "msr3sto2s" | "msr3s2s" => Ok(ModelId::Msr3Sto2S),
            "kamamsr" | "kama+msr" => Ok(ModelId::KamaMsr),
            _ => Err(Error::Config(format!("unknown model `{s}`"))),
        }
    }
}

/// How the high-variance bearish regime is traded.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BearMode {
    /// Short `w_bear` of the asset, remainder in cash.
    #[default]
    Short,
    /// Stay fully in cash.
    Cash,
}

/// Label of one day as produced by a model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DayLabel {
    Regime(RegimeLabel),
    /// Variance state of a two-state (or reduced) model: 0 low, 1 high;
    /// `None` on days the model does not cover.
    Variance(Option<u8>),
}

impl DayLabel {
    pub fn name(&self) -> String {
        match self {
            DayLabel::Regime(l) => l.as_str().to_string(),
            DayLabel::Variance(Some(0)) => "low_var".into(),
            DayLabel::Variance(Some(1)) => "high_var".into(),
            DayLabel::Variance(Some(s)) => format!("state{s}"),
            DayLabel::Variance(None) => "undefined".into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StrategyPolicy {
    pub model_id: ModelId,
    pub w_bull: f64,
    pub w_bear: f64,
    pub bear_mode: BearMode,
}

impl StrategyPolicy {
    /// Asset weight targeted after observing `label`; the rest sits in cash.
    pub fn target_weight(&self, label: DayLabel) -> Result<f64> {
        match (self.model_id, label) {
            (ModelId::KamaMsr, DayLabel::Regime(l)) => Ok(match l {
                RegimeLabel::LowVarBull => self.w_bull,
                RegimeLabel::HighVarBear => match self.bear_mode {
                    BearMode::Short => -self.w_bear,
                    BearMode::Cash => 0.0,
                },
                _ => 0.0,
            }),
            (ModelId::Msr2S | ModelId::Msr3Sto2S, DayLabel::Variance(s)) => match s {
                Some(0) => Ok(self.w_bull),
                Some(1) | None => Ok(0.0),
                Some(other) => Err(Error::InvalidParameter(format!(
                    "unknown variance state {other} for {}",
                    self.model_id
                ))),
            },
            (model, label) => Err(Error::InvalidParameter(format!(
                "label {} cannot drive a {model} policy",
                label.name()
            ))),
        }
    }
}

/// Held asset weight per day: the position on day `d` is the target implied
/// by the label of day `d - 1`, so a label computed at a close is traded at
/// the next close. Day 0 holds no position.
pub fn positions_from_labels(labels: &[DayLabel], policy: &StrategyPolicy) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(labels.len());
    if labels.is_empty() {
        return Ok(out);
    }
    out.push(0.0);
    for label in &labels[..labels.len() - 1] {
        out.push(policy.target_weight(*label)?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use RegimeLabel::*;

    fn kama_policy(w_bull: f64, w_bear: f64) -> StrategyPolicy {
        StrategyPolicy {
            model_id: ModelId::KamaMsr,
            w_bull,
            w_bear,
            bear_mode: BearMode::Short,
        }
    }

    #[test]
    fn single_regime_constant_weight() {
        let labels = vec![DayLabel::Regime(LowVarBull); 5];
        let w = positions_from_labels(&labels, &kama_policy(0.6, 0.3)).unwrap();
        assert_eq!(w, vec![0.0, 0.6, 0.6, 0.6, 0.6]);
    }

    #[test]
    fn rule_table_with_lag() {
        let labels = [LowVarBull, HighVarBull, HighVarBear].map(DayLabel::Regime);
        let p = kama_policy(1.0, 0.5);
        assert_eq!(positions_from_labels(&labels, &p).unwrap(), vec![0.0, 1.0, 0.0]);
        assert_eq!(p.target_weight(labels[2]).unwrap(), -0.5);
        let long_only = StrategyPolicy { bear_mode: BearMode::Cash, ..p };
        assert_eq!(long_only.target_weight(labels[2]).unwrap(), 0.0);
        assert_eq!(p.target_weight(DayLabel::Regime(LowVarBear)).unwrap(), 0.0);
        assert_eq!(p.target_weight(DayLabel::Regime(Undefined)).unwrap(), 0.0);
    }

    #[test]
    fn variance_models() {
        let p = StrategyPolicy {
            model_id: ModelId::Msr2S,
            w_bull: 0.7,
            w_bear: 0.9,
            bear_mode: BearMode::Short,
        };
        let high = vec![DayLabel::Variance(Some(1)); 4];
        assert!(positions_from_labels(&high, &p).unwrap().iter().all(|&w| w == 0.0));
        assert_eq!(p.target_weight(DayLabel::Variance(Some(0))).unwrap(), 0.7);
        assert!(p.target_weight(DayLabel::Variance(Some(2))).is_err());
        assert!(p.target_weight(DayLabel::Regime(LowVarBull)).is_err());
    }

    #[test]
    fn model_ids_parse() {
        for m in ModelId::ALL {
            assert_eq!(m.as_str().parse::<ModelId>().unwrap(), m);
        }
        assert_eq!("KamaMsr".parse::<ModelId>().unwrap(), ModelId::KamaMsr);
        assert_eq!("Msr3Sto2S".parse::<ModelId>().unwrap(), ModelId::Msr3Sto2S);
        assert!("msr4s".parse::<ModelId>().is_err());
    }
}
