//! Rolling-window minimum-variance backtest.
//!
//! Each period estimates a covariance on the trailing `train_days`, solves
//! for weights, then holds them fixed for the next `hold_days`. Windows
//! advance by `hold_days`, so there are `⌊(D − train_days) / hold_days⌋`
//! periods.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use chrono::NaiveDate;
use ndarray::Array1;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::estimators::{ledoit_wolf, sample_covariance};
use super::portfolio::{equal_weights, min_variance_weights, PortfolioWeights};
use crate::data::ReturnMatrix;
use crate::error::{Error, Result};
use crate::kernels::{KernelKind, KernelSpec};
use crate::model::PriorConfig;
use crate::vi::{fit, FitConfig};

/// Annualized statistics of a daily return series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SharpeStats {
    pub mean: f64,
    pub std: f64,
    /// `None` when the series has zero volatility.
    pub sharpe: Option<f64>,
}

/// Annualized mean `m·A`, std `s·√A` (population `s`) and their ratio.
pub fn sharpe_ratio(returns: &[f64], annualization_days: usize) -> Result<SharpeStats> {
    if returns.len() < 2 {
        return Err(Error::InsufficientData {
            what: "returns",
            required: 2,
            actual: returns.len(),
        });
    }
    let n = returns.len() as f64;
    let a = annualization_days as f64;
    let m = returns.iter().sum::<f64>() / n;
    // A constant series has exactly zero spread even when `m` is rounded.
    let constant = returns.iter().all(|&r| r == returns[0]);
    let var = if constant {
        0.0
    } else {
        returns.iter().map(|r| (r - m) * (r - m)).sum::<f64>() / n
    };
    let mean = m * a;
    let std = var.sqrt() * a.sqrt();
    let sharpe = if std > 0.0 { Some(mean / std) } else { None };
    Ok(SharpeStats { mean, std, sharpe })
}

/// A covariance estimator (or the equal-weight rule) usable in a backtest.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum Estimator {
    Gplvm(KernelKind),
    SampleCovariance,
    LedoitWolf,
    EqualWeights,
}

impl Estimator {
    pub fn tag(&self) -> &'static str {
        match self {
            Estimator::Gplvm(k) => k.as_str(),
            Estimator::SampleCovariance => "sample",
            Estimator::LedoitWolf => "ledoit",
            Estimator::EqualWeights => "equal",
        }
    }

    /// Column label used in the summary table.
    pub fn label(&self) -> &'static str {
        match self {
            Estimator::Gplvm(KernelKind::Linear) => "Linear",
            Estimator::Gplvm(KernelKind::Se) => "SE",
            Estimator::Gplvm(KernelKind::Exp) => "EXP",
            Estimator::Gplvm(KernelKind::M32) => "M32",
            Estimator::SampleCovariance => "Sample Cov",
            Estimator::LedoitWolf => "Ledoit Wolf",
            Estimator::EqualWeights => "Eq. Weighted",
        }
    }

    pub fn is_model_based(&self) -> bool {
        !matches!(self, Estimator::EqualWeights)
    }
}

impl fmt::Display for Estimator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Estimator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "sample" | "sample-cov" => Ok(Estimator::SampleCovariance),
            "ledoit" | "ledoit-wolf" | "lw" => Ok(Estimator::LedoitWolf),
            "equal" | "equal-weights" => Ok(Estimator::EqualWeights),
            other => other.parse::<KernelKind>().map(Estimator::Gplvm).map_err(|_| {
                Error::InvalidArgument(format!(
                    "unknown estimator '{other}' (expected linear, se, exp, m32, sample, ledoit or equal)"
                ))
            }),
        }
    }
}

impl From<Estimator> for String {
    fn from(e: Estimator) -> String {
        e.tag().to_string()
    }
}

impl TryFrom<String> for Estimator {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

/// Parses a comma-separated estimator list.
pub fn parse_estimators(list: &str) -> Result<Vec<Estimator>> {
    let out: Vec<Estimator> = list.split(',').filter(|s| !s.trim().is_empty()).map(str::parse).collect::<Result<_>>()?;
    if out.is_empty() {
        return Err(Error::InvalidArgument("estimator list is empty".into()));
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BacktestConfig {
    pub train_days: usize,
    pub hold_days: usize,
    pub weight_cap: f64,
    pub estimators: Vec<Estimator>,
    /// Latent dimension for GP-LVM estimators.
    pub latent_dim: usize,
    pub annualization_days: usize,
}

impl Default for BacktestConfig {
    fn default() -> Self {
        Self {
            train_days: 252,
            hold_days: 126,
            weight_cap: 0.1,
            estimators: vec![
                Estimator::Gplvm(KernelKind::Linear),
                Estimator::Gplvm(KernelKind::Se),
                Estimator::Gplvm(KernelKind::Exp),
                Estimator::Gplvm(KernelKind::M32),
                Estimator::SampleCovariance,
                Estimator::LedoitWolf,
                Estimator::EqualWeights,
            ],
            latent_dim: 3,
            annualization_days: 252,
        }
    }
}

impl BacktestConfig {
    pub fn n_periods(&self, n_days: usize) -> usize {
        if n_days < self.train_days || self.hold_days == 0 {
            0
        } else {
            (n_days - self.train_days) / self.hold_days
        }
    }

    pub fn validate(&self, n_assets: usize, n_days: usize) -> Result<()> {
        if self.train_days < 2 || self.hold_days < 1 || self.latent_dim < 1 || self.annualization_days < 1 {
            return Err(Error::InvalidArgument(format!(
                "need train_days >= 2, hold_days >= 1, latent_dim >= 1, annualization_days >= 1 (got {}, {}, {}, {})",
                self.train_days, self.hold_days, self.latent_dim, self.annualization_days
            )));
        }
        if self.estimators.is_empty() {
            return Err(Error::InvalidArgument("no estimators requested".into()));
        }
        if !(self.weight_cap > 0.0 && self.weight_cap <= 1.0) {
            return Err(Error::InvalidArgument(format!("weight cap must be in (0, 1], got {}", self.weight_cap)));
        }
        if self.weight_cap * (n_assets as f64) < 1.0 - 1e-12 {
            return Err(Error::Infeasible(format!(
                "weight cap {} with {n_assets} assets cannot be fully invested (need cap * N >= 1)",
                self.weight_cap
            )));
        }
        let required = self.train_days + self.hold_days;
        if n_days < required {
            return Err(Error::InsufficientData {
                what: "days of returns (train_days + hold_days)",
                required,
                actual: n_days,
            });
        }
        Ok(())
    }
}

/// Day ranges of one rebalancing period.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodWindow {
    pub train_start: usize,
    pub hold_start: usize,
    pub hold_end: usize,
    pub train_first_date: NaiveDate,
    pub hold_first_date: NaiveDate,
    pub hold_last_date: NaiveDate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodResult {
    pub weights: Vec<f64>,
    /// Daily portfolio returns `wᵀr_d` over the holding window.
    pub returns: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorReport {
    pub estimator: Estimator,
    pub label: String,
    pub stats: SharpeStats,
    pub periods: Vec<PeriodResult>,
}

impl EstimatorReport {
    pub fn daily_returns(&self) -> Vec<f64> {
        self.periods.iter().flat_map(|p| p.returns.iter().copied()).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BacktestReport {
    pub tickers: Vec<String>,
    pub windows: Vec<PeriodWindow>,
    pub estimators: Vec<EstimatorReport>,
    pub config: BacktestConfig,
}

impl BacktestReport {
    pub fn get(&self, estimator: Estimator) -> Option<&EstimatorReport> {
        self.estimators.iter().find(|e| e.estimator == estimator)
    }

    /// Writes `Model,Mean,Std,Sharpe ratio` rows. An undefined Sharpe ratio is left empty.
    pub fn write_table<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let io = |e: csv::Error| Error::Io {
            path: "<backtest table>".into(),
            source: std::io::Error::other(e),
        };
        w.write_record(["Model", "Mean", "Std", "Sharpe ratio"]).map_err(io)?;
        for e in &self.estimators {
            w.write_record([
                e.label.clone(),
                format!("{:.3}", e.stats.mean),
                format!("{:.3}", e.stats.std),
                e.stats.sharpe.map(|s| format!("{s:.3}")).unwrap_or_default(),
            ])
            .map_err(io)?;
        }
        w.flush().map_err(|source| Error::Io {
            path: "<backtest table>".into(),
            source,
        })
    }
}

fn period_weights(
    estimator: Estimator,
    train: &ReturnMatrix,
    cfg: &BacktestConfig,
    fit_cfg: &FitConfig,
    prior: &PriorConfig,
) -> Result<Array1<f64>> {
    let k = match estimator {
        Estimator::EqualWeights => return Ok(equal_weights(train.n_assets())),
        Estimator::SampleCovariance => sample_covariance(train)?,
        Estimator::LedoitWolf => ledoit_wolf(train)?,
        Estimator::Gplvm(kind) => fit(train, &KernelSpec::new(kind), cfg.latent_dim, fit_cfg, prior)?.covariance()?,
    };
    min_variance_weights(&k, cfg.weight_cap)
}

/// Runs the rolling backtest with default priors.
pub fn backtest(r: &ReturnMatrix, cfg: &BacktestConfig, fit_cfg: &FitConfig) -> Result<BacktestReport> {
    backtest_with_prior(r, cfg, fit_cfg, &PriorConfig::default())
}

pub fn backtest_with_prior(
    r: &ReturnMatrix,
    cfg: &BacktestConfig,
    fit_cfg: &FitConfig,
    prior: &PriorConfig,
) -> Result<BacktestReport> {
    let (n, d) = (r.n_assets(), r.n_days());
    cfg.validate(n, d)?;
    let n_periods = cfg.n_periods(d);
    let mut windows = Vec::with_capacity(n_periods);
    let mut per_estimator: Vec<Vec<PeriodResult>> = vec![Vec::with_capacity(n_periods); cfg.estimators.len()];

    for p in 0..n_periods {
        let train_start = p * cfg.hold_days;
        let hold_start = train_start + cfg.train_days;
        let hold_end = hold_start + cfg.hold_days;
        let train = r.slice_days(train_start, hold_start)?;
        let hold = r.values().slice(ndarray::s![.., hold_start..hold_end]);
        windows.push(PeriodWindow {
            train_start,
            hold_start,
            hold_end,
            train_first_date: r.dates()[train_start],
            hold_first_date: r.dates()[hold_start],
            hold_last_date: r.dates()[hold_end - 1],
        });
        // Each period gets its own fit seed so periods do not share restart streams.
        let period_cfg = FitConfig {
            seed: fit_cfg.seed.wrapping_add(p as u64),
            ..*fit_cfg
        };
        let weights: Vec<Result<Array1<f64>>> = cfg
            .estimators
            .par_iter()
            .map(|&e| period_weights(e, &train, cfg, &period_cfg, prior))
            .collect();
        for (slot, w) in per_estimator.iter_mut().zip(weights) {
            let w = w?;
            let returns = hold.t().dot(&w).to_vec();
            slot.push(PeriodResult {
                weights: w.to_vec(),
                returns,
            });
        }
    }

    let mut estimators = Vec::with_capacity(cfg.estimators.len());
    for (&e, periods) in cfg.estimators.iter().zip(per_estimator) {
        let daily: Vec<f64> = periods.iter().flat_map(|p| p.returns.iter().copied()).collect();
        estimators.push(EstimatorReport {
            estimator: e,
            label: e.label().to_string(),
            stats: sharpe_ratio(&daily, cfg.annualization_days)?,
            periods,
        });
    }
    Ok(BacktestReport {
        tickers: r.tickers().to_vec(),
        windows,
        estimators,
        config: cfg.clone(),
    })
}

/// Validates each period's weights as a [`PortfolioWeights`] (simplex and cap,
/// equal weights checked against the simplex only).
pub fn check_report_weights(report: &BacktestReport) -> Result<()> {
    for e in &report.estimators {
        let cap = if e.estimator == Estimator::EqualWeights { 1.0 } else { report.config.weight_cap };
        for p in &e.periods {
            PortfolioWeights::new(report.tickers.clone(), Array1::from(p.weights.clone()), cap)?;
        }
    }
    Ok(())
}
