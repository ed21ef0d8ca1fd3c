use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use gpcov::KernelKind;

#[derive(Debug, Parser)]
#[command(name = "gpcov", version, about = "GP-LVM covariance estimation for asset returns")]
pub struct Cli {
    /// Worker threads (default: all available cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit the model, optionally sweeping the latent dimension.
    Fit(FitArgs),
    /// Rolling minimum-variance backtest across estimators.
    Backtest(BacktestArgs),
    /// Leave-one-out imputation of test returns with a fitted model.
    Impute(ImputeArgs),
    /// Export the latent positions of a fitted model.
    Embed(EmbedArgs),
    /// Write a synthetic price table from a three-factor market model.
    Synth(SynthArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Json => "json",
            Format::Csv => "csv",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum KernelArg {
    Linear,
    Se,
    Exp,
    M32,
}

impl From<KernelArg> for KernelKind {
    fn from(k: KernelArg) -> Self {
        match k {
            KernelArg::Linear => KernelKind::Linear,
            KernelArg::Se => KernelKind::Se,
            KernelArg::Exp => KernelKind::Exp,
            KernelArg::M32 => KernelKind::M32,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct InputArgs {
    /// Price table: `date,<ticker>,...` with one row per date.
    #[arg(long, conflicts_with = "returns", required_unless_present = "returns")]
    pub prices: Option<PathBuf>,

    /// Return table in the same layout as the price table.
    #[arg(long)]
    pub returns: Option<PathBuf>,

    /// Drop assets with missing values instead of failing.
    #[arg(long)]
    pub drop_incomplete: bool,
}

#[derive(Debug, Clone, Args)]
pub struct VariationalArgs {
    #[arg(long, default_value_t = 3000)]
    pub iterations: usize,

    #[arg(long, default_value_t = 50)]
    pub restarts: usize,

    /// Monte Carlo samples per gradient step.
    #[arg(long, default_value_t = 3)]
    pub mc_samples: usize,

    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Clone, Args)]
pub struct OutputArgs {
    /// Output directory (created if missing).
    #[arg(long, default_value = "out")]
    pub out: PathBuf,

    /// Format for tabular outputs.
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
}

#[derive(Debug, Clone, Args)]
pub struct FitArgs {
    #[command(flatten)]
    pub input: InputArgs,

    #[arg(long, value_enum, default_value_t = KernelArg::Se)]
    pub kernel: KernelArg,

    /// Latent dimension Q.
    #[arg(long, conflicts_with = "latent_dim_range")]
    pub latent_dim: Option<usize>,

    /// Inclusive range of latent dimensions to compare, e.g. `1..5`.
    #[arg(long, value_parser = parse_range)]
    pub latent_dim_range: Option<(usize, usize)>,

    #[command(flatten)]
    pub vi: VariationalArgs,

    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct BacktestArgs {
    #[command(flatten)]
    pub input: InputArgs,

    #[arg(long, default_value_t = 252)]
    pub train_days: usize,

    #[arg(long, default_value_t = 126)]
    pub hold_days: usize,

    #[arg(long, default_value_t = 0.1)]
    pub weight_cap: f64,

    /// Comma-separated estimators: linear, se, exp, m32, sample, ledoit, equal.
    #[arg(long, default_value = "linear,se,exp,m32,sample,ledoit,equal")]
    pub estimators: String,

    /// Latent dimension for the GP-LVM estimators.
    #[arg(long, default_value_t = 3)]
    pub latent_dim: usize,

    #[command(flatten)]
    pub vi: VariationalArgs,

    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct ImputeArgs {
    /// Fitted model (`model.json` from `gpcov fit`).
    #[arg(long)]
    pub model: PathBuf,

    /// Test-period data.
    #[command(flatten)]
    pub input: InputArgs,

    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct EmbedArgs {
    #[arg(long)]
    pub model: PathBuf,

    /// Optional `ticker,sector` table added as an extra column.
    #[arg(long)]
    pub sectors: Option<PathBuf>,

    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 30)]
    pub assets: usize,

    /// Number of returns; the table has one more row of prices.
    #[arg(long, default_value_t = 1500)]
    pub days: usize,

    #[arg(long, default_value_t = 0)]
    pub seed: u64,

    /// Destination CSV file.
    #[arg(long)]
    pub out: PathBuf,
}

fn parse_range(s: &str) -> Result<(usize, usize), String> {
    let (a, b) = s.split_once("..").ok_or_else(|| format!("expected A..B, got '{s}'"))?;
    let a: usize = a.trim().parse().map_err(|_| format!("bad range start '{a}'"))?;
    let b: usize = b.trim().trim_start_matches('=').parse().map_err(|_| format!("bad range end '{b}'"))?;
    if a == 0 || b < a {
        return Err(format!("range {a}..{b} must satisfy 1 <= A <= B"));
    }
    Ok((a, b))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ranges() {
        assert_eq!(parse_range("1..5"), Ok((1, 5)));
        assert_eq!(parse_range("2..=3"), Ok((2, 3)));
        assert!(parse_range("0..3").is_err());
        assert!(parse_range("4..2").is_err());
        assert!(parse_range("3").is_err());
    }

    #[test]
    fn cli_is_well_formed() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
