//! Regime detection and backtesting for daily price series.
//!
//! A Markov-switching regression separates low- and high-volatility states,
//! Kaufman's adaptive moving average supplies the trend direction, and the
//! two combine into four regimes: low-variance bullish, low-variance bearish,
//! high-variance bullish and high-variance bearish. The KAMA parameters are
//! calibrated by walk-forward K-Means agreement, and strategies trading only
//! the two active regimes are backtested with per-class transaction costs
//! against plain two-state and reduced three-state switching models.

pub mod backtest;
pub mod calibrate;
pub mod config;
pub mod error;
pub mod kama;
pub mod market_data;
pub mod msr;
pub mod pipeline;
pub mod regime;
pub mod rng;
pub mod synth;

pub use error::{Error, Result};
