//! Winning-score comparison of the three models across assets and asset
//! classes.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::market_data::AssetClass;

use super::policy::ModelId;

/// Winner index (first maximum) and `(Z_w - Z_ru) / Z_w`; the ratio is 0 on
/// a tie for first place or when the winner's score is not positive.
pub fn winning_score(scores: &[f64]) -> Result<(usize, f64)> {
    if scores.len() < 2 {
        return Err(Error::InvalidParameter(format!(
            "winning score needs at least 2 models, got {}",
            scores.len()
        )));
    }
    if let Some(i) = scores.iter().position(|s| !s.is_finite()) {
        return Err(Error::NonFinite(i));
    }
    let mut winner = 0;
    for (i, &s) in scores.iter().enumerate().skip(1) {
        if s > scores[winner] {
            winner = i;
        }
    }
    let z_w = scores[winner];
    let z_ru = scores
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != winner)
        .map(|(_, &s)| s)
        .fold(f64::NEG_INFINITY, f64::max);
    let ws = if z_w <= 0.0 || z_ru == z_w { 0.0 } else { (z_w - z_ru) / z_w };
    Ok((winner, ws))
}

pub fn combined_score(ws_returns: f64, ws_asr: f64) -> f64 {
    (ws_returns + ws_asr) / 2.0
}

/// One asset's inputs: per model, its ASR (if defined) and weighted annual
/// return on the evaluation window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssetScores {
    pub asset_id: String,
    pub asset_class: AssetClass,
    pub models: BTreeMap<ModelId, ModelScore>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelScore {
    pub asr: Option<f64>,
    pub weighted_annual_return: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricComparison {
    pub scores: BTreeMap<ModelId, Option<f64>>,
    pub winner: Option<ModelId>,
    pub ws: f64,
}

impl MetricComparison {
    /// Models with an undefined score are left out; a single defined score
    /// wins with WS 0.
    fn from_scores(scores: BTreeMap<ModelId, Option<f64>>) -> Result<Self> {
        let defined: Vec<(ModelId, f64)> = ModelId::ALL
            .iter()
            .filter_map(|m| scores.get(m).copied().flatten().map(|s| (*m, s)))
            .collect();
        let (winner, ws) = match defined.len() {
            0 => (None, 0.0),
            1 => (Some(defined[0].0), 0.0),
            _ => {
                let values: Vec<f64> = defined.iter().map(|d| d.1).collect();
                let (i, ws) = winning_score(&values)?;
                (Some(defined[i].0), ws)
            }
        };
        Ok(Self { scores, winner, ws })
    }

    /// WS credited to `model`: the ratio if it won, else 0.
    pub fn contribution(&self, model: ModelId) -> f64 {
        if self.winner == Some(model) {
            self.ws
        } else {
            0.0
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssetComparison {
    pub asset_id: String,
    pub asset_class: AssetClass,
    pub asr: MetricComparison,
    pub returns: MetricComparison,
    pub combined: BTreeMap<ModelId, f64>,
}

/// Per-model WS averaged over the assets of one class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassBlock {
    pub asset_class: AssetClass,
    pub n_assets: usize,
    pub scores: BTreeMap<ModelId, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub assets: Vec<AssetComparison>,
    pub asr_ws: Vec<ClassBlock>,
    pub returns_ws: Vec<ClassBlock>,
    pub combined_ws: Vec<ClassBlock>,
}

pub fn compare_asset(scores: &AssetScores) -> Result<AssetComparison> {
    for m in ModelId::ALL {
        if !scores.models.contains_key(&m) {
            return Err(Error::MissingArtifact(format!(
                "no {m} backtest for asset {}",
                scores.asset_id
            )));
        }
    }
    let asr = MetricComparison::from_scores(scores.models.iter().map(|(m, s)| (*m, s.asr)).collect())?;
    let returns = MetricComparison::from_scores(
        scores
            .models
            .iter()
            .map(|(m, s)| (*m, Some(s.weighted_annual_return)))
            .collect(),
    )?;
    let combined = ModelId::ALL
        .iter()
        .map(|&m| (m, combined_score(returns.contribution(m), asr.contribution(m))))
        .collect();
    Ok(AssetComparison {
        asset_id: scores.asset_id.clone(),
        asset_class: scores.asset_class,
        asr,
        returns,
        combined,
    })
}

fn class_blocks(assets: &[AssetComparison], value: impl Fn(&AssetComparison, ModelId) -> f64) -> Vec<ClassBlock> {
    let mut by_class: BTreeMap<AssetClass, Vec<&AssetComparison>> = BTreeMap::new();
    for a in assets {
        by_class.entry(a.asset_class).or_default().push(a);
    }
    by_class
        .into_iter()
        .map(|(asset_class, members)| ClassBlock {
            asset_class,
            n_assets: members.len(),
            scores: ModelId::ALL
                .iter()
                .map(|&m| (m, members.iter().map(|a| value(a, m)).sum::<f64>() / members.len() as f64))
                .collect(),
        })
        .collect()
}

pub fn compare(assets: &[AssetScores]) -> Result<ComparisonReport> {
    if assets.is_empty() {
        return Err(Error::Config("no assets to compare".into()));
    }
    let assets: Vec<AssetComparison> = assets.iter().map(compare_asset).collect::<Result<_>>()?;
    Ok(ComparisonReport {
        asr_ws: class_blocks(&assets, |a, m| a.asr.contribution(m)),
        returns_ws: class_blocks(&assets, |a, m| a.returns.contribution(m)),
        combined_ws: class_blocks(&assets, |a, m| a.combined[&m]),
        assets,
    })
}

impl ComparisonReport {
    /// One row per (block, asset class) with a column per model.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        let mut header = vec!["block".to_string(), "asset_class".into(), "n_assets".into()];
        header.extend(ModelId::ALL.iter().map(|m| m.as_str().to_string()));
        w.write_record(&header)?;
        for (name, blocks) in [
            ("asr_ws", &self.asr_ws),
            ("returns_ws", &self.returns_ws),
            ("combined_ws", &self.combined_ws),
        ] {
            for b in blocks {
                let mut row = vec![name.to_string(), b.asset_class.to_string(), b.n_assets.to_string()];
                row.extend(ModelId::ALL.iter().map(|m| b.scores[m].to_string()));
                w.write_record(&row)?;
            }
        }
        w.flush().map_err(|e| Error::io(path, e))?;
        Ok(())
    }
}
