//! Command implementations shared by the CLI and the integration tests.
//!
//! Every command writes under `<out_dir>/<asset_id>/` and records the SHA-256
//! of each artifact in that directory's `manifest.json`.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::backtest::{
    compare, evaluate_window, optimize_weights, weight_draws, AssetScores, BacktestResult, BearMode, ComparisonReport,
    DayLabel, ModelId, ModelScore, Optimization, SelectBy, StrategyPolicy,
};
use crate::calibrate::{label_with, random_search, score_params, CalibrationReport};
use crate::config::{InputSpec, RunConfig};
use crate::error::{Error, Result};
use crate::kama::{kama_series, trend_signals, write_kama_csv, KamaParams};
use crate::market_data::{
    align_cash, load_csv, log_returns, split_train_test, synth_cash_index, AssetClass, PriceSeries,
};
use crate::msr::{
    em_fit, hamilton_filter, reduce_three_to_two, refit_tracks, write_probabilities_csv, MsrFit, MsrParams, SavedModel,
};
use crate::regime::{featured_segments, low_var_track, write_labels_csv, write_segments_csv, RegimeLabel};
use crate::synth::{self, Scenario, SynthOutput};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub seeds: BTreeMap<String, u64>,
    /// File name to hex SHA-256.
    pub artifacts: BTreeMap<String, String>,
}

/// Output directory with its manifest; artifacts are hashed as written.
pub struct ArtifactDir {
    dir: PathBuf,
    manifest: Manifest,
}

impl ArtifactDir {
    pub fn open(dir: PathBuf) -> Result<Self> {
        std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        let path = dir.join("manifest.json");
        let manifest = if path.is_file() {
            read_json(&path)?
        } else {
            Manifest::default()
        };
        Ok(Self { dir, manifest })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    pub fn record_seed(&mut self, what: &str, seed: u64) {
        self.manifest.seeds.insert(what.to_string(), seed);
    }

    /// Hashes a file already written into the directory.
    pub fn register(&mut self, name: &str) -> Result<()> {
        let path = self.path(name);
        let bytes = std::fs::read(&path).map_err(|e| Error::io(&path, e))?;
        self.manifest
            .artifacts
            .insert(name.to_string(), hex::encode(Sha256::digest(&bytes)));
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        write_bytes(&self.path(name), text.as_bytes())?;
        self.register(name)
    }

    /// Runs `write` against the artifact path and registers the result.
    pub fn write_with(&mut self, name: &str, write: impl FnOnce(&Path) -> Result<()>) -> Result<()> {
        write(&self.path(name))?;
        self.register(name)
    }

    pub fn finish(self) -> Result<()> {
        let mut text = serde_json::to_string_pretty(&self.manifest)?;
        text.push('\n');
        write_bytes(&self.dir.join("manifest.json"), text.as_bytes())
    }
}

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(bytes).map_err(|e| Error::io(path, e))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

/// An input series with its returns, cash returns and train/test split.
#[derive(Debug, Clone)]
pub struct AssetData {
    pub spec: InputSpec,
    pub prices: PriceSeries,
    /// `returns[j]` runs from day `j` to day `j + 1`.
    pub returns: Vec<f64>,
    pub return_dates: Vec<NaiveDate>,
    pub cash_returns: Vec<f64>,
    /// Number of price days in the training partition.
    pub n_train: usize,
}

impl AssetData {
    pub fn train_returns(&self) -> &[f64] {
        &self.returns[..self.n_train - 1]
    }

    pub fn train_dates(&self) -> &[NaiveDate] {
        &self.prices.dates[..self.n_train]
    }

    pub fn train_closes(&self) -> &[f64] {
        &self.prices.closes[..self.n_train]
    }
}

pub fn load_asset(cfg: &RunConfig, asset_id: &str) -> Result<AssetData> {
    let spec = cfg.input(asset_id)?.clone();
    let mut prices = load_csv(&spec.path, spec.asset_class, cfg.min_series_length)?;
    prices.asset_id = spec.asset_id.clone();
    let (train, _, _) = split_train_test(&prices, cfg.train_fraction)?;
    let cash = match &cfg.cash_path {
        Some(path) => align_cash(&load_csv(path, AssetClass::Cash, 0)?, &prices.dates)?,
        None => synth_cash_index(&prices.dates, cfg.cash_annual_rate)?,
    };
    let returns = log_returns(&prices)?;
    let cash_returns = log_returns(&cash)?.values;
    Ok(AssetData {
        n_train: train.len(),
        spec,
        prices,
        returns: returns.values,
        return_dates: returns.dates,
        cash_returns,
    })
}

fn asset_dir(cfg: &RunConfig, asset_id: &str) -> Result<ArtifactDir> {
    ArtifactDir::open(cfg.out_dir.join(asset_id))
}

fn msr_name(k: usize) -> String {
    format!("msr{k}s")
}

/// Fits the k-state model on the training returns and writes the model and
/// its training-partition probability tracks.
fn fit_and_write(cfg: &RunConfig, data: &AssetData, k: usize, dir: &mut ArtifactDir) -> Result<MsrFit> {
    let fit = em_fit(data.train_returns(), k, &cfg.msr.em(), cfg.msr_seed())?;
    let name = msr_name(k);
    dir.record_seed("msr", cfg.msr_seed());
    dir.write_json(&format!("{name}.json"), &SavedModel::from_fit(&fit))?;
    // Probability row j belongs to training day j + 2.
    let dates = &data.train_dates()[2..];
    dir.write_with(&format!("{name}_smoothed.csv"), |p| write_probabilities_csv(p, dates, &fit.smoothed))?;
    dir.write_with(&format!("{name}_filtered.csv"), |p| write_probabilities_csv(p, dates, &fit.filtered))?;
    Ok(fit)
}

/// A saved model if it matches the current configuration, else a fresh fit.
fn obtain_msr(cfg: &RunConfig, data: &AssetData, k: usize, dir: &mut ArtifactDir) -> Result<SavedModel> {
    let path = dir.path(&format!("{}.json", msr_name(k)));
    if path.is_file() {
        let saved: SavedModel = read_json(&path)?;
        if saved.k == k && saved.meta.seed == cfg.msr_seed() && saved.meta.restarts == cfg.msr.restarts {
            return Ok(saved);
        }
    }
    Ok(SavedModel::from_fit(&fit_and_write(cfg, data, k, dir)?))
}

pub fn cmd_fit_msr(cfg: &RunConfig, asset_id: &str, k: usize) -> Result<MsrFit> {
    if !(2..=3).contains(&k) {
        return Err(Error::Config(format!("k must be 2 or 3, got {k}")));
    }
    let data = load_asset(cfg, asset_id)?;
    let mut dir = asset_dir(cfg, asset_id)?;
    let fit = fit_and_write(cfg, &data, k, &mut dir)?;
    dir.finish()?;
    Ok(fit)
}

fn calibrate_with(cfg: &RunConfig, data: &AssetData, dir: &mut ArtifactDir) -> Result<CalibrationReport> {
    let saved = obtain_msr(cfg, data, 2, dir)?;
    let tracks = refit_tracks(&saved, data.train_returns())?;
    let track = low_var_track(&tracks.smoothed, data.n_train);
    let (dates, closes) = (data.train_dates(), data.train_closes());
    let ccfg = cfg.calibration_config();
    let seed = cfg.calibrate_seed();
    let report = if ccfg.n_trials == 0 {
        let trial = score_params(
            dates,
            closes,
            &track,
            &cfg.kama,
            &ccfg,
            crate::rng::sub_seed(seed, "calibrate-kmeans"),
            0,
        );
        CalibrationReport {
            seed,
            n_trials: 0,
            ranges: ccfg.ranges,
            kmeans: ccfg.kmeans,
            score_denominator: ccfg.score_denominator,
            best: trial.clone(),
            trials: vec![trial],
        }
    } else {
        random_search(dates, closes, &track, &ccfg, seed)?
    };
    if let Some(note) = &report.best.note {
        eprintln!("warning: {}: best calibration trial scored worst ({note})", data.spec.asset_id);
    }

    let best = report.best.params;
    dir.record_seed("calibrate", seed);
    dir.write_json("calibration.json", &report)?;
    let labels = label_with(dates, closes, &track, &best, ccfg.threshold)?;
    let series = kama_series(dates, closes, &best)?;
    let signals = trend_signals(&series, &best);
    dir.write_with("kama_train.csv", |p| write_kama_csv(p, &series, &signals))?;
    dir.write_with("labels_train.csv", |p| write_labels_csv(p, dates, &labels))?;
    let segments = featured_segments(closes, &labels);
    dir.write_with("segments_train.csv", |p| write_segments_csv(p, dates, &segments))?;
    Ok(report)
}

pub fn cmd_calibrate(cfg: &RunConfig, asset_id: &str) -> Result<CalibrationReport> {
    let data = load_asset(cfg, asset_id)?;
    let mut dir = asset_dir(cfg, asset_id)?;
    let report = calibrate_with(cfg, &data, &mut dir)?;
    dir.finish()?;
    Ok(report)
}

fn obtain_calibration(cfg: &RunConfig, data: &AssetData, dir: &mut ArtifactDir) -> Result<KamaParams> {
    let path = dir.path("calibration.json");
    if path.is_file() {
        let saved: CalibrationReport = read_json(&path)?;
        if saved.seed == cfg.calibrate_seed() && saved.n_trials == cfg.calibrate.n_trials {
            return Ok(saved.best.params);
        }
    }
    Ok(calibrate_with(cfg, data, dir)?.best.params)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BacktestReport {
    pub asset_id: String,
    pub asset_class: AssetClass,
    pub model: ModelId,
    pub seed: u64,
    pub n_weight_draws: usize,
    pub bear_mode: BearMode,
    pub select_by: SelectBy,
    pub train_days: usize,
    pub test_days: usize,
    /// Calibrated KAMA parameters (KAMA+MSR only).
    pub kama: Option<KamaParams>,
    pub optimization: Optimization,
    /// Selected policy on the training window.
    pub train: BacktestResult,
    /// Selected policy on the held-out window.
    pub test: BacktestResult,
}

/// Day labels of `model` for `prices` under frozen switching-model
/// parameters (and KAMA parameters for KAMA+MSR). The filter runs causally,
/// so the label of day `d` depends on prices up to day `d` only.
pub fn day_labels(
    model: ModelId,
    params: &MsrParams,
    kama: Option<&KamaParams>,
    threshold: f64,
    prices: &PriceSeries,
) -> Result<Vec<DayLabel>> {
    let n_days = prices.len();
    let returns = log_returns(prices)?.values;
    let filtered = hamilton_filter(params, &returns)?.filtered;
    Ok(match model {
        ModelId::Msr2S => low_var_track(&filtered, n_days)
            .iter()
            .map(|p| DayLabel::Variance(p.map(|p| if p > threshold { 0 } else { 1 })))
            .collect(),
        ModelId::Msr3Sto2S => {
            let reduced = reduce_three_to_two(&filtered, &params.sigma)?;
            (0..n_days)
                .map(|d| DayLabel::Variance(d.checked_sub(2).and_then(|j| reduced.get(j)).copied()))
                .collect()
        }
        ModelId::KamaMsr => {
            let kama = kama.ok_or_else(|| Error::Config("KAMA+MSR labels need KAMA parameters".into()))?;
            let track = low_var_track(&filtered, n_days);
            label_with(&prices.dates, &prices.closes, &track, kama, threshold)?
                .into_iter()
                .map(DayLabel::Regime)
                .collect()
        }
    })
}

/// Day labels of `model` over the full series. Switching-model parameters
/// come from the training fit; the filter then runs causally over all days.
pub fn model_day_labels(
    cfg: &RunConfig,
    data: &AssetData,
    model: ModelId,
    dir: &mut ArtifactDir,
) -> Result<(Vec<DayLabel>, Option<KamaParams>)> {
    let k = if model == ModelId::Msr3Sto2S { 3 } else { 2 };
    let params = obtain_msr(cfg, data, k, dir)?.params();
    let kama = match model {
        ModelId::KamaMsr => Some(obtain_calibration(cfg, data, dir)?),
        _ => None,
    };
    let labels = day_labels(model, &params, kama.as_ref(), cfg.regime.threshold, &data.prices)?;
    Ok((labels, kama))
}

fn write_day_csv(path: &Path, header: &str, dates: &[NaiveDate], values: impl Iterator<Item = String>) -> Result<()> {
    let mut buf = format!("{header}\n");
    for (d, v) in dates.iter().zip(values) {
        buf.push_str(&format!("{d},{v}\n"));
    }
    write_bytes(path, buf.as_bytes())
}

pub fn cmd_backtest(cfg: &RunConfig, asset_id: &str, model: ModelId) -> Result<BacktestReport> {
    let data = load_asset(cfg, asset_id)?;
    let mut dir = asset_dir(cfg, asset_id)?;
    let (labels, kama) = model_day_labels(cfg, &data, model, &mut dir)?;
    let cost = cfg.costs.for_class(data.spec.asset_class);
    let n_train = data.n_train;
    let n_returns = data.returns.len();

    let seed = cfg.backtest_seed();
    let draws = weight_draws(cfg.backtest.n_weight_draws, seed);
    let skeleton = StrategyPolicy {
        model_id: model,
        w_bull: 0.0,
        w_bear: 0.0,
        bear_mode: cfg.backtest.bear_mode,
    };
    let optimization = optimize_weights(
        &labels[..n_train],
        data.train_returns(),
        &data.cash_returns[..n_train - 1],
        &skeleton,
        &cost,
        &draws,
        cfg.backtest.select_by,
    )?;
    let policy = optimization.policy;
    let evaluate = |window| {
        evaluate_window(
            &labels,
            &data.returns,
            &data.cash_returns,
            &data.return_dates,
            &policy,
            &cost,
            window,
        )
    };
    let train = evaluate(0..n_train - 1)?;
    let test = evaluate(n_train - 1..n_returns)?;

    let report = BacktestReport {
        asset_id: asset_id.to_string(),
        asset_class: data.spec.asset_class,
        model,
        seed,
        n_weight_draws: draws.len(),
        bear_mode: cfg.backtest.bear_mode,
        select_by: cfg.backtest.select_by,
        train_days: n_train,
        test_days: data.prices.len() - n_train,
        kama,
        optimization,
        train,
        test,
    };

    dir.record_seed("backtest", seed);
    dir.write_json(&format!("backtest_{model}.json"), &report)?;
    let mut equity = 1.0;
    let curve = report.test.daily_portfolio_returns.iter().zip(&report.test.positions).map(|(r, w)| {
        equity *= r.exp();
        format!("{r},{equity},{w}")
    });
    dir.write_with(&format!("{model}_equity.csv"), |p| {
        write_day_csv(p, "date,log_return,equity,position", &report.test.dates, curve)
    })?;
    dir.write_with(&format!("{model}_labels.csv"), |p| {
        write_day_csv(p, "date,label", &data.prices.dates, labels.iter().map(DayLabel::name))
    })?;
    let positions = crate::backtest::positions_from_labels(&labels, &policy)?;
    dir.write_with(&format!("{model}_positions.csv"), |p| {
        write_day_csv(p, "date,position", &data.prices.dates, positions.iter().map(f64::to_string))
    })?;
    dir.finish()?;
    Ok(report)
}

pub fn cmd_compare(cfg: &RunConfig, asset_ids: &[String]) -> Result<ComparisonReport> {
    let mut inputs = Vec::with_capacity(asset_ids.len());
    for id in asset_ids {
        let spec = cfg.input(id)?;
        let mut models = BTreeMap::new();
        for model in ModelId::ALL {
            let path = cfg.out_dir.join(id).join(format!("backtest_{model}.json"));
            if !path.is_file() {
                return Err(Error::MissingArtifact(format!(
                    "no {model} backtest for asset {id} (expected {})",
                    path.display()
                )));
            }
            let report: BacktestReport = read_json(&path)?;
            models.insert(
                model,
                ModelScore {
                    asr: report.test.adjusted_sharpe.value,
                    weighted_annual_return: report.test.weighted_annual_return,
                },
            );
        }
        inputs.push(AssetScores {
            asset_id: id.clone(),
            asset_class: spec.asset_class,
            models,
        });
    }
    let report = compare(&inputs)?;
    let mut dir = ArtifactDir::open(cfg.out_dir.clone())?;
    dir.record_seed("global", cfg.seed);
    dir.write_json("comparison.json", &report)?;
    dir.write_with("comparison.csv", |p| report.write_csv(p))?;
    dir.finish()?;
    Ok(report)
}

/// Writes `<out_dir>/<scenario>/prices.csv` and the planted truth.
pub fn cmd_synth(out_dir: &Path, scenario: Scenario, n_days: usize, seed: u64) -> Result<SynthOutput> {
    let out = synth::generate(scenario, n_days, seed)?;
    let mut dir = ArtifactDir::open(out_dir.join(scenario.as_str()))?;
    dir.record_seed("synth", seed);
    dir.write_with("prices.csv", |p| out.prices.write_csv(p))?;
    dir.write_with("truth.csv", |p| synth::write_truth_csv(p, &out))?;
    dir.finish()?;
    Ok(out)
}

/// Labels of the training partition under the fitted two-state model's
/// smoothed probabilities and the given KAMA parameters.
pub fn training_labels(cfg: &RunConfig, data: &AssetData, kama: &KamaParams) -> Result<Vec<RegimeLabel>> {
    let mut dir = asset_dir(cfg, &data.spec.asset_id)?;
    let saved = obtain_msr(cfg, data, 2, &mut dir)?;
    dir.finish()?;
    let tracks = refit_tracks(&saved, data.train_returns())?;
    let track = low_var_track(&tracks.smoothed, data.n_train);
    label_with(data.train_dates(), data.train_closes(), &track, kama, cfg.regime.threshold)
}
