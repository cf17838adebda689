use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use kamamsr::backtest::ModelId;
use kamamsr::config::RunConfig;
use kamamsr::pipeline;
use kamamsr::synth::Scenario;
use kamamsr::{Error, Result};

#[derive(Parser)]
#[command(name = "kamamsr", version, about = "Regime labeling, calibration and backtesting of daily price series")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the global seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Fit a 2- or 3-state switching regression on the training partition.
    FitMsr {
        #[command(flatten)]
        common: Common,
        /// Asset id; all configured inputs when omitted.
        #[arg(long)]
        asset: Option<String>,
        #[arg(long, default_value_t = 2, value_parser = clap::value_parser!(u8).range(2..=3))]
        k: u8,
    },
    /// Random-search the KAMA parameters.
    Calibrate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        asset: Option<String>,
    },
    /// Optimise weights on the training partition and evaluate on the test partition.
    Backtest {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        asset: Option<String>,
        /// msr2s, msr3s_to_2s or kama_msr; all three when omitted.
        #[arg(long)]
        model: Option<String>,
    },
    /// Winning-score comparison of completed backtests.
    Compare {
        #[command(flatten)]
        common: Common,
        /// Repeatable; all configured inputs when omitted.
        #[arg(long)]
        asset: Vec<String>,
    },
    /// Write a synthetic price series with its planted states.
    Synth {
        #[command(flatten)]
        common: Common,
        /// two_state, three_state or trend_regimes.
        #[arg(long)]
        scenario: String,
        /// Number of price days.
        #[arg(long, default_value_t = 5000)]
        len: usize,
    },
}

fn load_config(common: &Common, required: bool) -> Result<RunConfig> {
    let mut cfg = match &common.config {
        Some(path) => RunConfig::load(path)?,
        None if required => return Err(Error::Config("--config is required".into())),
        None => RunConfig::default(),
    };
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &common.out {
        cfg.out_dir = out.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn assets(cfg: &RunConfig, asset: Option<String>) -> Result<Vec<String>> {
    match asset {
        Some(id) => {
            cfg.input(&id)?;
            Ok(vec![id])
        }
        None if cfg.inputs.is_empty() => Err(Error::Config("no inputs configured".into())),
        None => Ok(cfg.inputs.iter().map(|i| i.asset_id.clone()).collect()),
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::FitMsr { common, asset, k } => {
            let cfg = load_config(&common, true)?;
            for id in assets(&cfg, asset)? {
                let fit = pipeline::cmd_fit_msr(&cfg, &id, k as usize)?;
                println!(
                    "{id}: {k}-state fit, log-likelihood {:.4}, sigma {:?}",
                    fit.log_likelihood, fit.params.sigma
                );
            }
        }
        Command::Calibrate { common, asset } => {
            let cfg = load_config(&common, true)?;
            for id in assets(&cfg, asset)? {
                let r = pipeline::cmd_calibrate(&cfg, &id)?;
                let p = r.best.params;
                println!(
                    "{id}: cv score {:.4} with n={} n_s={} n_l={} gamma={:.4}",
                    r.best.cv_score, p.n, p.n_s, p.n_l, p.gamma
                );
            }
        }
        Command::Backtest { common, asset, model } => {
            let cfg = load_config(&common, true)?;
            let models = match model {
                Some(m) => vec![m.parse::<ModelId>()?],
                None => ModelId::ALL.to_vec(),
            };
            for id in assets(&cfg, asset)? {
                for &m in &models {
                    let r = pipeline::cmd_backtest(&cfg, &id, m)?;
                    let asr = r.test.adjusted_sharpe.value.map_or("undefined".to_string(), |v| format!("{v:.4}"));
                    println!(
                        "{id} {m}: w_bull={:.3} w_bear={:.3}, test annual return {:.4}, ASR {asr}",
                        r.optimization.policy.w_bull, r.optimization.policy.w_bear, r.test.weighted_annual_return
                    );
                }
            }
        }
        Command::Compare { common, asset } => {
            let cfg = load_config(&common, true)?;
            let ids = if asset.is_empty() {
                assets(&cfg, None)?
            } else {
                for id in &asset {
                    cfg.input(id)?;
                }
                asset
            };
            let r = pipeline::cmd_compare(&cfg, &ids)?;
            for (name, blocks) in [("ASR", &r.asr_ws), ("returns", &r.returns_ws), ("combined", &r.combined_ws)] {
                for b in blocks {
                    let cells: Vec<String> = b.scores.iter().map(|(m, v)| format!("{m}={v:.4}")).collect();
                    println!("{name} WS {}: {}", b.asset_class, cells.join(" "));
                }
            }
        }
        Command::Synth { common, scenario, len } => {
            let cfg = load_config(&common, false)?;
            let scenario: Scenario = scenario.parse()?;
            pipeline::cmd_synth(&cfg.out_dir, scenario, len, cfg.seed)?;
            println!(
                "wrote {}",
                cfg.out_dir.join(scenario.as_str()).join("prices.csv").display()
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_usage() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
