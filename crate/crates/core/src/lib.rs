//! Covariance estimation for asset returns with a Gaussian process latent
//! variable model (GP-LVM) fitted by mean-field variational inference.
//!
//! Each asset gets a latent position; a kernel over those positions gives the
//! return covariance. Around that model the crate provides minimum-variance
//! portfolios with a rolling backtest, leave-one-out imputation of missing
//! returns, and export of the latent embedding.

pub mod data;
pub mod error;
pub mod finance;
pub mod kernels;
mod linalg;
pub mod model;
pub mod predict;
pub mod vi;

pub use data::{
    compute_returns, generate_synthetic, load_prices, load_returns, LoadOptions, LoadReport, PriceTable, ReturnMatrix,
    SyntheticData, SyntheticSpec,
};
pub use error::{Error, Result};
pub use finance::{
    backtest, equal_weights, ledoit_wolf, min_variance_weights, project_capped_simplex, sample_covariance,
    sharpe_ratio, BacktestConfig, BacktestReport, Estimator, PortfolioWeights,
};
pub use kernels::{
    assemble_covariance, correlation_gram, pairwise_distances, safe_cholesky, Convention, CovarianceEstimate,
    HyperParams, JitterPolicy, KernelKind, KernelSpec, LatentPositions, Signal,
};
pub use linalg::Cholesky;
pub use model::{log_joint, log_joint_gradient, log_marginal_likelihood, log_prior, ModelParams, ParamsGradient, PriorConfig};
pub use predict::{
    export_embedding, gp_conditional, loocv_impute, mean_abs_dev, r2_score, reconstruction_r2, Embedding,
    ImputationReport, PredictiveDistribution,
};
pub use vi::{
    elbo_estimate, fit, from_unconstrained, select_latent_dim, to_unconstrained, FitConfig, FitResult, LatentDimSelection,
    VariationalPosterior,
};
