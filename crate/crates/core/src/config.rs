//! Run configuration: one JSON file for every command.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::backtest::{BearMode, CostSchedule, SelectBy};
use crate::calibrate::{CalibrationConfig, KMeansConfig, ScoreDenominator, SearchRanges};
use crate::error::{Error, Result};
use crate::kama::KamaParams;
use crate::market_data::{AssetClass, DEFAULT_MIN_LENGTH, DEFAULT_TRAIN_FRACTION};
use crate::msr::EmConfig;
use crate::rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputSpec {
    pub asset_id: String,
    pub path: PathBuf,
    pub asset_class: AssetClass,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MsrSection {
    pub restarts: usize,
    pub tol: f64,
    pub max_iter: usize,
    pub seed: Option<u64>,
}

impl Default for MsrSection {
    fn default() -> Self {
        let em = EmConfig::default();
        Self {
            restarts: em.restarts,
            tol: em.tol,
            max_iter: em.max_iter,
            seed: None,
        }
    }
}

impl MsrSection {
    pub fn em(&self) -> EmConfig {
        EmConfig {
            restarts: self.restarts,
            tol: self.tol,
            max_iter: self.max_iter,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RegimeSection {
    /// Low-variance probability a day must exceed to count as low variance.
    pub threshold: f64,
}

impl Default for RegimeSection {
    fn default() -> Self {
        Self { threshold: 0.5 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CalibrateSection {
    /// With 0 trials the `kama` parameters are used as given.
    pub n_trials: usize,
    pub seed: Option<u64>,
    pub ranges: SearchRanges,
    pub kmeans: KMeansConfig,
    pub score_denominator: ScoreDenominator,
}

impl Default for CalibrateSection {
    fn default() -> Self {
        let c = CalibrationConfig::default();
        Self {
            n_trials: c.n_trials,
            seed: None,
            ranges: c.ranges,
            kmeans: c.kmeans,
            score_denominator: c.score_denominator,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BacktestSection {
    pub n_weight_draws: usize,
    pub seed: Option<u64>,
    pub bear_mode: BearMode,
    pub select_by: SelectBy,
}

impl Default for BacktestSection {
    fn default() -> Self {
        Self {
            n_weight_draws: 1000,
            seed: None,
            bear_mode: BearMode::Short,
            select_by: SelectBy::Asr,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Global seed; module seeds default to values derived from it.
    pub seed: u64,
    pub out_dir: PathBuf,
    pub inputs: Vec<InputSpec>,
    pub train_fraction: f64,
    pub min_series_length: usize,
    pub cash_annual_rate: f64,
    /// Optional `date,close` cash series used instead of the constant rate.
    pub cash_path: Option<PathBuf>,
    pub msr: MsrSection,
    pub kama: KamaParams,
    pub regime: RegimeSection,
    pub calibrate: CalibrateSection,
    pub backtest: BacktestSection,
    pub costs: CostSchedule,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            out_dir: PathBuf::from("out"),
            inputs: Vec::new(),
            train_fraction: DEFAULT_TRAIN_FRACTION,
            min_series_length: DEFAULT_MIN_LENGTH,
            cash_annual_rate: 0.0,
            cash_path: None,
            msr: MsrSection::default(),
            kama: KamaParams::default(),
            regime: RegimeSection::default(),
            calibrate: CalibrateSection::default(),
            backtest: BacktestSection::default(),
            costs: CostSchedule::default(),
        }
    }
}

impl RunConfig {
    /// Reads a config file. Relative input paths resolve against the file's
    /// directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg: RunConfig =
            serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or_else(|| Path::new(""));
        for input in &mut cfg.inputs {
            if input.path.is_relative() {
                input.path = base.join(&input.path);
            }
        }
        if let Some(cash) = &cfg.cash_path {
            if cash.is_relative() {
                cfg.cash_path = Some(base.join(cash));
            }
        }
        Ok(cfg)
    }

    /// Checks value ranges, duplicate asset ids and that every referenced
    /// file exists.
    pub fn validate(&self) -> Result<()> {
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(Error::Config(format!(
                "train_fraction must lie in (0, 1), got {}",
                self.train_fraction
            )));
        }
        if !(self.cash_annual_rate >= 0.0 && self.cash_annual_rate.is_finite()) {
            return Err(Error::Config("cash_annual_rate must be a non-negative number".into()));
        }
        if !(self.regime.threshold > 0.0 && self.regime.threshold < 1.0) {
            return Err(Error::Config("regime.threshold must lie in (0, 1)".into()));
        }
        if self.msr.restarts == 0 {
            return Err(Error::Config("msr.restarts must be at least 1".into()));
        }
        if self.backtest.n_weight_draws == 0 {
            return Err(Error::Config("backtest.n_weight_draws must be at least 1".into()));
        }
        self.kama.validate().map_err(|e| Error::Config(format!("kama: {e}")))?;
        if self.calibrate.n_trials > 0 {
            self.calibrate.ranges.validate()?;
        }
        for (i, input) in self.inputs.iter().enumerate() {
            if input.asset_class == AssetClass::Cash {
                return Err(Error::Config(format!("input `{}` is tagged as cash", input.asset_id)));
            }
            if self.inputs[..i].iter().any(|o| o.asset_id == input.asset_id) {
                return Err(Error::Config(format!("duplicate asset id `{}`", input.asset_id)));
            }
            if !input.path.is_file() {
                return Err(Error::io(
                    &input.path,
                    std::io::Error::new(std::io::ErrorKind::NotFound, "input file not found"),
                ));
            }
        }
        if let Some(cash) = &self.cash_path {
            if !cash.is_file() {
                return Err(Error::io(
                    cash,
                    std::io::Error::new(std::io::ErrorKind::NotFound, "cash file not found"),
                ));
            }
        }
        Ok(())
    }

    pub fn input(&self, asset_id: &str) -> Result<&InputSpec> {
        self.inputs
            .iter()
            .find(|i| i.asset_id == asset_id)
            .ok_or_else(|| Error::Config(format!("asset `{asset_id}` is not listed in the config inputs")))
    }

    pub fn msr_seed(&self) -> u64 {
        self.msr.seed.unwrap_or_else(|| rng::sub_seed(self.seed, "msr"))
    }

    pub fn calibrate_seed(&self) -> u64 {
        self.calibrate.seed.unwrap_or_else(|| rng::sub_seed(self.seed, "calibrate"))
    }

    pub fn backtest_seed(&self) -> u64 {
        self.backtest.seed.unwrap_or_else(|| rng::sub_seed(self.seed, "backtest"))
    }

    pub fn calibration_config(&self) -> CalibrationConfig {
        CalibrationConfig {
            n_trials: self.calibrate.n_trials,
            seed: self.calibrate.seed,
            ranges: self.calibrate.ranges,
            kmeans: self.calibrate.kmeans,
            score_denominator: self.calibrate.score_denominator,
            threshold: self.regime.threshold,
            coefficient_form: self.kama.coefficient_form,
            sell_reference: self.kama.sell_reference,
        }
    }
}
