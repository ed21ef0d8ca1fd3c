//! Portfolio construction, baseline estimators and backtesting.

pub mod backtest;
pub mod estimators;
pub mod portfolio;

pub use backtest::{
    backtest, backtest_with_prior, check_report_weights, parse_estimators, sharpe_ratio, BacktestConfig,
    BacktestReport, Estimator, EstimatorReport, PeriodResult, PeriodWindow, SharpeStats,
};
pub use estimators::{ledoit_wolf, ledoit_wolf_with_intensity, sample_covariance, LedoitWolf};
pub use portfolio::{
    equal_weights, min_variance_weights, portfolio_variance, project_capped_simplex, solve_min_variance,
    MinVarianceSolution, PortfolioWeights,
};
