use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use gpcov::data::{market_spec, prices_from_returns, write_table};
use gpcov::finance::{check_report_weights, parse_estimators};
use gpcov::predict::parse_sectors;
use gpcov::vi::LatentDimRow;
use gpcov::{
    backtest, compute_returns, export_embedding, generate_synthetic, load_prices, load_returns, loocv_impute,
    select_latent_dim, BacktestConfig, Error, FitConfig, FitResult, KernelSpec, LoadOptions, PriorConfig,
    Result, ReturnMatrix,
};
use ndarray::{Array1, Axis};
use serde::Serialize;
use serde_json::json;
use sha2::{Digest, Sha256};

use crate::args::{BacktestArgs, EmbedArgs, FitArgs, Format, ImputeArgs, InputArgs, OutputArgs, SynthArgs, VariationalArgs};

#[derive(Debug, Serialize)]
struct InputDigest {
    role: &'static str,
    path: String,
    sha256: String,
}

/// Everything needed to rerun a command. Thread count and wall-clock times are
/// left out so that identical runs produce identical files.
#[derive(Debug, Serialize)]
struct Manifest {
    tool: &'static str,
    version: &'static str,
    command: &'static str,
    seed: Option<u64>,
    config: serde_json::Value,
    inputs: Vec<InputDigest>,
    outputs: Vec<String>,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.display().to_string(),
        source,
    }
}

fn digest(role: &'static str, path: &Path) -> Result<InputDigest> {
    let bytes = fs::read(path).map_err(io_err(path))?;
    Ok(InputDigest {
        role,
        path: path.display().to_string(),
        sha256: hex::encode(Sha256::digest(&bytes)),
    })
}

struct Outputs {
    dir: PathBuf,
    written: Vec<String>,
}

impl Outputs {
    fn new(args: &OutputArgs) -> Result<Self> {
        fs::create_dir_all(&args.out).map_err(io_err(&args.out))?;
        Ok(Self {
            dir: args.out.clone(),
            written: Vec::new(),
        })
    }

    fn write(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        let path = self.dir.join(name);
        fs::write(&path, bytes).map_err(io_err(&path))?;
        self.written.push(name.to_string());
        Ok(())
    }

    fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::InvalidArgument(e.to_string()))?;
        text.push('\n');
        self.write(name, text.as_bytes())
    }

    fn finish(mut self, command: &'static str, seed: Option<u64>, config: serde_json::Value, inputs: Vec<InputDigest>) -> Result<()> {
        let manifest = Manifest {
            tool: "gpcov",
            version: env!("CARGO_PKG_VERSION"),
            command,
            seed,
            config,
            inputs,
            outputs: self.written.clone(),
        };
        self.write_json("manifest.json", &manifest)
    }
}

fn load_input(input: &InputArgs) -> Result<(ReturnMatrix, InputDigest)> {
    let opts = LoadOptions {
        drop_incomplete: input.drop_incomplete,
        ..LoadOptions::default()
    };
    let (returns, report, digest) = match (&input.prices, &input.returns) {
        (Some(path), _) => {
            let (prices, report) = load_prices(path, &opts)?;
            (compute_returns(&prices)?, report, digest("prices", path)?)
        }
        (None, Some(path)) => {
            let (returns, report) = load_returns(path, &opts)?;
            (returns, report, digest("returns", path)?)
        }
        (None, None) => return Err(Error::InvalidArgument("one of --prices or --returns is required".into())),
    };
    if !report.dropped.is_empty() {
        eprintln!("dropped {} incomplete assets: {}", report.dropped.len(), report.dropped.join(", "));
    }
    Ok((returns, digest))
}

fn fit_config(vi: &VariationalArgs) -> FitConfig {
    FitConfig {
        iterations: vi.iterations,
        restarts: vi.restarts,
        mc_samples: vi.mc_samples,
        seed: vi.seed,
        ..FitConfig::default()
    }
}

fn table_bytes(headers: &[&str], rows: &[Vec<String>]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let err = |e: csv::Error| Error::InvalidArgument(e.to_string());
    w.write_record(headers).map_err(err)?;
    for r in rows {
        w.write_record(r).map_err(err)?;
    }
    w.into_inner().map_err(|e| Error::InvalidArgument(e.to_string()))
}

fn print_aligned(headers: &[&str], rows: &[Vec<String>]) {
    let mut widths: Vec<usize> = headers.iter().map(|h| h.len()).collect();
    for r in rows {
        for (w, c) in widths.iter_mut().zip(r) {
            *w = (*w).max(c.len());
        }
    }
    let line = |cells: Vec<&str>| {
        let parts: Vec<String> = cells.iter().zip(&widths).map(|(c, w)| format!("{c:>w$}")).collect();
        println!("{}", parts.join("  "));
    };
    line(headers.to_vec());
    for r in rows {
        line(r.iter().map(String::as_str).collect());
    }
}

pub fn fit(args: &FitArgs) -> Result<()> {
    let (data, input) = load_input(&args.input)?;
    let dims: Vec<usize> = match (args.latent_dim, args.latent_dim_range) {
        (_, Some((a, b))) => (a..=b).collect(),
        (Some(q), None) => vec![q],
        (None, None) => vec![3],
    };
    let spec = KernelSpec::new(args.kernel.into());
    let cfg = fit_config(&args.vi);
    let prior = PriorConfig::default();
    let selection = select_latent_dim(&data, &spec, &dims, &cfg, &prior)?;
    let best = selection.best_fit();

    let headers = ["latent_dim", "elbo", "std_error", "best", "error"];
    let rows: Vec<Vec<String>> = selection.rows.iter().map(|r| summary_row(r, selection.best_latent_dim)).collect();
    print_aligned(&headers, &rows);

    let mut out = Outputs::new(&args.output)?;
    out.write_json("model.json", best)?;
    match args.output.format {
        Format::Csv => out.write("fit_summary.csv", &table_bytes(&headers, &rows)?)?,
        Format::Json => out.write_json(
            "fit_summary.json",
            &json!({ "best_latent_dim": selection.best_latent_dim, "rows": selection.rows }),
        )?,
    }
    let config = json!({
        "kernel": spec,
        "latent_dims": dims,
        "fit": cfg,
        "prior": prior,
        "drop_incomplete": args.input.drop_incomplete,
        "format": args.output.format.extension(),
    });
    out.finish("fit", Some(cfg.seed), config, vec![input])
}

fn summary_row(r: &LatentDimRow, best: usize) -> Vec<String> {
    vec![
        r.latent_dim.to_string(),
        r.elbo.map(|e| format!("{e:.3}")).unwrap_or_default(),
        r.std_error.map(|e| format!("{e:.3}")).unwrap_or_default(),
        if r.latent_dim == best { "*".into() } else { String::new() },
        r.error.clone().unwrap_or_default(),
    ]
}

pub fn backtest_cmd(args: &BacktestArgs) -> Result<()> {
    let (data, input) = load_input(&args.input)?;
    let cfg = BacktestConfig {
        train_days: args.train_days,
        hold_days: args.hold_days,
        weight_cap: args.weight_cap,
        estimators: parse_estimators(&args.estimators)?,
        latent_dim: args.latent_dim,
        ..BacktestConfig::default()
    };
    let fit_cfg = fit_config(&args.vi);
    let report = backtest(&data, &cfg, &fit_cfg)?;
    check_report_weights(&report)?;

    let mut table = Vec::new();
    report.write_table(&mut table)?;
    let text = String::from_utf8(table.clone()).expect("csv output is utf-8");
    let mut lines = text.lines().map(|l| l.split(',').map(str::to_string).collect::<Vec<_>>());
    let headers = lines.next().unwrap_or_default();
    let rows: Vec<Vec<String>> = lines.collect();
    print_aligned(&headers.iter().map(String::as_str).collect::<Vec<_>>(), &rows);

    let mut out = Outputs::new(&args.output)?;
    match args.output.format {
        Format::Csv => out.write("backtest.csv", &table)?,
        Format::Json => out.write_json("backtest.json", &report)?,
    }
    let config = json!({ "backtest": cfg, "fit": fit_cfg, "prior": PriorConfig::default() });
    out.finish("backtest", Some(fit_cfg.seed), config, vec![input])
}

fn read_model(path: &Path) -> Result<FitResult> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(|e| Error::Validation(format!("{} is not a fitted model: {e}", path.display())))
}

/// Reorders `data` to the model's ticker order, failing on any mismatch.
fn align(data: &ReturnMatrix, model: &FitResult) -> Result<ReturnMatrix> {
    let pos: HashMap<&str, usize> = data.tickers().iter().enumerate().map(|(i, t)| (t.as_str(), i)).collect();
    let missing: Vec<&str> = model.tickers.iter().map(String::as_str).filter(|t| !pos.contains_key(t)).collect();
    let extra: Vec<&str> = data
        .tickers()
        .iter()
        .map(String::as_str)
        .filter(|t| !model.tickers.iter().any(|m| m == t))
        .collect();
    if !missing.is_empty() || !extra.is_empty() {
        return Err(Error::Validation(format!(
            "ticker mismatch between model and data: missing from data [{}], not in model [{}]",
            missing.join(", "),
            extra.join(", ")
        )));
    }
    let idx: Vec<usize> = model.tickers.iter().map(|t| pos[t.as_str()]).collect();
    ReturnMatrix::new(model.tickers.clone(), data.dates().to_vec(), data.values().select(Axis(0), &idx))
}

pub fn impute(args: &ImputeArgs) -> Result<()> {
    let model = read_model(&args.model)?;
    let (data, input) = load_input(&args.input)?;
    let data = align(&data, &model)?;
    let k = model.covariance()?;
    let report = loocv_impute(&data, &k, &Array1::from(model.train_means.clone()))?;

    let headers = ["predictor", "r2", "mean_abs_dev"];
    let rows = vec![
        vec!["gplvm".into(), format!("{:.4}", report.r2), format!("{:.6}", report.mean_abs_dev)],
        vec!["mean".into(), format!("{:.4}", report.baseline_r2), format!("{:.6}", report.baseline_mean_abs_dev)],
    ];
    print_aligned(&headers, &rows);

    let mut out = Outputs::new(&args.output)?;
    match args.output.format {
        Format::Csv => {
            let mut buf = Vec::new();
            report.write_csv(&mut buf)?;
            out.write("imputation.csv", &buf)?;
            out.write("imputation_summary.csv", &table_bytes(&headers, &rows)?)?;
        }
        Format::Json => out.write_json("imputation.json", &report)?,
    }
    let inputs = vec![digest("model", &args.model)?, input];
    out.finish("impute", None, json!({ "kernel": model.kernel, "latent_dim": model.latent_dim }), inputs)
}

pub fn embed(args: &EmbedArgs) -> Result<()> {
    let model = read_model(&args.model)?;
    let mut inputs = vec![digest("model", &args.model)?];
    let sectors = match &args.sectors {
        Some(path) => {
            let file = fs::File::open(path).map_err(io_err(path))?;
            inputs.push(digest("sectors", path)?);
            Some(parse_sectors(file)?)
        }
        None => None,
    };
    let embedding = export_embedding(&model, sectors.as_ref());
    let mut out = Outputs::new(&args.output)?;
    match args.output.format {
        Format::Csv => {
            let mut buf = Vec::new();
            embedding.write_csv(&mut buf)?;
            out.write("embedding.csv", &buf)?;
        }
        Format::Json => out.write_json("embedding.json", &embedding)?,
    }
    println!("wrote {} latent positions (Q = {})", embedding.rows.len(), embedding.latent_dim);
    out.finish("embed", None, json!({ "kernel": model.kernel, "latent_dim": model.latent_dim }), inputs)
}

pub fn synth(args: &SynthArgs) -> Result<()> {
    let data = generate_synthetic(&market_spec(args.assets, args.days, args.seed))?;
    // the price row preceding the first synthetic return date (2010-01-04)
    let start = NaiveDate::from_ymd_opt(2009, 12, 31).expect("valid date");
    let prices = prices_from_returns(&data.returns, start, &Array1::from_elem(args.assets, 100.0))?;
    if let Some(parent) = args.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(io_err(parent))?;
    }
    let file = fs::File::create(&args.out).map_err(io_err(&args.out))?;
    write_table(std::io::BufWriter::new(file), prices.tickers(), prices.dates(), prices.prices())?;
    println!("wrote {} assets x {} prices to {}", args.assets, args.days + 1, args.out.display());
    Ok(())
}
