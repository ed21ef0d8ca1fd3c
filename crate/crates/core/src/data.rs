//! Price and return tables: file ingestion, validation, returns, synthetic data.
//!
//! Files are comma-delimited text with a `date,<ticker1>,<ticker2>,...`
//! header and one ISO-8601 date per row. Prices should be adjusted closes if
//! dividends and splits matter to the analysis; no adjustment is applied here.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use chrono::{Days, NaiveDate, Weekday};
use chrono::Datelike;
use ndarray::{Array1, Array2, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{signal_covariance, HyperParams, KernelKind, KernelSpec, LatentPositions};
use crate::linalg;

/// Close prices, one row per ticker and one column per date.
#[derive(Debug, Clone, PartialEq)]
pub struct PriceTable {
    tickers: Vec<String>,
    dates: Vec<NaiveDate>,
    prices: Array2<f64>,
}

impl PriceTable {
    pub fn new(tickers: Vec<String>, dates: Vec<NaiveDate>, prices: Array2<f64>) -> Result<Self> {
        check_shape(&tickers, &dates, &prices)?;
        check_dates(&dates)?;
        for ((n, d), &p) in prices.indexed_iter() {
            if !(p > 0.0 && p.is_finite()) {
                return Err(Error::Validation(format!(
                    "price for {} on {} must be positive and finite, got {p}",
                    tickers[n], dates[d]
                )));
            }
        }
        Ok(Self { tickers, dates, prices })
    }

    pub fn tickers(&self) -> &[String] {
        &self.tickers
    }

    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    /// `N × (D+1)` price matrix.
    pub fn prices(&self) -> &Array2<f64> {
        &self.prices
    }

    pub fn n_assets(&self) -> usize {
        self.tickers.len()
    }
}

/// Simple returns, one row per ticker. `dates[d]` is the later date of each pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReturnMatrix {
    tickers: Vec<String>,
    dates: Vec<NaiveDate>,
    values: Array2<f64>,
}

impl ReturnMatrix {
    pub fn new(tickers: Vec<String>, dates: Vec<NaiveDate>, values: Array2<f64>) -> Result<Self> {
        check_shape(&tickers, &dates, &values)?;
        check_dates(&dates)?;
        for ((n, d), &r) in values.indexed_iter() {
            if !r.is_finite() || r <= -1.0 {
                return Err(Error::Validation(format!(
                    "return for {} on {} must be finite and above -1, got {r}",
                    tickers[n], dates[d]
                )));
            }
        }
        Ok(Self { tickers, dates, values })
    }

    /// Builds a matrix with placeholder tickers `A0, A1, ...` and consecutive business days.
    pub fn from_values(values: Array2<f64>) -> Result<Self> {
        let tickers = default_tickers(values.nrows());
        let dates = business_days(default_start(), values.ncols());
        Self::new(tickers, dates, values)
    }

    pub fn tickers(&self) -> &[String] {
        &self.tickers
    }

    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    /// `N × D` return values.
    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn n_assets(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_days(&self) -> usize {
        self.values.ncols()
    }

    /// Days `start..end` as a new matrix.
    pub fn slice_days(&self, start: usize, end: usize) -> Result<Self> {
        if start >= end || end > self.n_days() {
            return Err(Error::InvalidArgument(format!(
                "day range {start}..{end} outside 0..{}",
                self.n_days()
            )));
        }
        Ok(Self {
            tickers: self.tickers.clone(),
            dates: self.dates[start..end].to_vec(),
            values: self.values.slice(ndarray::s![.., start..end]).to_owned(),
        })
    }

    /// Per-asset mean return over all days.
    pub fn asset_means(&self) -> Array1<f64> {
        self.values.mean_axis(Axis(1)).expect("at least one day")
    }

    /// Per-asset population standard deviation.
    pub fn asset_stds(&self) -> Array1<f64> {
        self.values.std_axis(Axis(1), 0.0)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        write_table(writer, &self.tickers, &self.dates, &self.values)
    }
}

fn check_shape<T>(tickers: &[String], dates: &[T], values: &Array2<f64>) -> Result<()> {
    if values.dim() != (tickers.len(), dates.len()) {
        return Err(Error::InvalidArgument(format!(
            "values are {:?} but there are {} tickers and {} dates",
            values.dim(),
            tickers.len(),
            dates.len()
        )));
    }
    let mut seen = std::collections::HashSet::new();
    for t in tickers {
        if !seen.insert(t) {
            return Err(Error::Validation(format!("duplicate ticker '{t}'")));
        }
    }
    Ok(())
}

fn check_dates(dates: &[NaiveDate]) -> Result<()> {
    for w in dates.windows(2) {
        if w[1] <= w[0] {
            return Err(Error::Validation(format!(
                "dates must be strictly increasing: {} follows {}",
                w[1], w[0]
            )));
        }
    }
    Ok(())
}

/// Options for reading delimited price or return files.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LoadOptions {
    pub delimiter: u8,
    /// Remove tickers with any missing cell instead of failing.
    pub drop_incomplete: bool,
}

impl Default for LoadOptions {
    fn default() -> Self {
        Self {
            delimiter: b',',
            drop_incomplete: false,
        }
    }
}

/// Tickers removed during loading because their history was incomplete.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LoadReport {
    pub dropped: Vec<String>,
}

struct RawTable {
    tickers: Vec<String>,
    dates: Vec<NaiveDate>,
    // cells[n][d], None when empty or NA
    cells: Vec<Vec<Option<f64>>>,
}

fn read_raw<R: Read>(reader: R, opts: &LoadOptions) -> Result<RawTable> {
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(opts.delimiter)
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header = rdr
        .headers()
        .map_err(|e| Error::Format {
            row: 1,
            col: 1,
            msg: e.to_string(),
        })?
        .clone();
    if header.len() < 2 {
        return Err(Error::Format {
            row: 1,
            col: 1,
            msg: "header must be `date,<ticker>,...` with at least one ticker".into(),
        });
    }
    let tickers: Vec<String> = header.iter().skip(1).map(str::to_owned).collect();
    if let Some(pos) = tickers.iter().position(|t| t.is_empty()) {
        return Err(Error::Format {
            row: 1,
            col: pos + 2,
            msg: "empty ticker name".into(),
        });
    }
    let mut dates = Vec::new();
    let mut cells = vec![Vec::new(); tickers.len()];
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 2;
        let rec = rec.map_err(|e| Error::Format {
            row,
            col: 1,
            msg: e.to_string(),
        })?;
        if rec.len() != header.len() {
            return Err(Error::Format {
                row,
                col: rec.len().min(header.len()) + 1,
                msg: format!("expected {} fields, found {}", header.len(), rec.len()),
            });
        }
        let date = NaiveDate::parse_from_str(&rec[0], "%Y-%m-%d").map_err(|e| Error::Format {
            row,
            col: 1,
            msg: format!("bad date '{}': {e}", &rec[0]),
        })?;
        dates.push(date);
        for (n, field) in rec.iter().skip(1).enumerate() {
            let cell = if field.is_empty() || field.eq_ignore_ascii_case("na") || field.eq_ignore_ascii_case("nan") {
                None
            } else {
                Some(field.parse::<f64>().map_err(|e| Error::Format {
                    row,
                    col: n + 2,
                    msg: format!("bad number '{field}': {e}"),
                })?)
            };
            cells[n].push(cell);
        }
    }
    Ok(RawTable { tickers, dates, cells })
}

fn complete_rows(raw: RawTable, opts: &LoadOptions) -> Result<(Vec<String>, Vec<NaiveDate>, Array2<f64>, LoadReport)> {
    let mut report = LoadReport::default();
    let mut keep_tickers = Vec::new();
    let mut rows = Vec::new();
    for (ticker, col) in raw.tickers.into_iter().zip(raw.cells) {
        match col.iter().position(Option::is_none) {
            None => {
                keep_tickers.push(ticker);
                rows.push(col.into_iter().map(Option::unwrap).collect::<Vec<_>>());
            }
            Some(d) if !opts.drop_incomplete => {
                return Err(Error::Validation(format!(
                    "ticker {ticker} has no value on {} (pass drop-incomplete to remove such tickers)",
                    raw.dates[d]
                )));
            }
            Some(_) => report.dropped.push(ticker),
        }
    }
    if keep_tickers.is_empty() {
        return Err(Error::Validation("no ticker has a complete history".into()));
    }
    let d = raw.dates.len();
    let flat: Vec<f64> = rows.into_iter().flatten().collect();
    let values = Array2::from_shape_vec((keep_tickers.len(), d), flat).expect("rows have equal length");
    Ok((keep_tickers, raw.dates, values, report))
}

/// Parses a price table from any reader.
pub fn parse_prices<R: Read>(reader: R, opts: &LoadOptions) -> Result<(PriceTable, LoadReport)> {
    let raw = read_raw(reader, opts)?;
    check_dates(&raw.dates)?;
    let (tickers, dates, prices, report) = complete_rows(raw, opts)?;
    Ok((PriceTable::new(tickers, dates, prices)?, report))
}

/// Loads and validates a price file.
pub fn load_prices(path: impl AsRef<Path>, opts: &LoadOptions) -> Result<(PriceTable, LoadReport)> {
    parse_prices(open(path.as_ref())?, opts)
}

/// Parses a return table (same layout as prices, values are returns).
pub fn parse_returns<R: Read>(reader: R, opts: &LoadOptions) -> Result<(ReturnMatrix, LoadReport)> {
    let raw = read_raw(reader, opts)?;
    check_dates(&raw.dates)?;
    let (tickers, dates, values, report) = complete_rows(raw, opts)?;
    Ok((ReturnMatrix::new(tickers, dates, values)?, report))
}

pub fn load_returns(path: impl AsRef<Path>, opts: &LoadOptions) -> Result<(ReturnMatrix, LoadReport)> {
    parse_returns(open(path.as_ref())?, opts)
}

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Writes a `date,<tickers...>` table with one row per date.
pub fn write_table<W: Write>(writer: W, tickers: &[String], dates: &[NaiveDate], values: &Array2<f64>) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let io_err = |e: csv::Error| Error::Io {
        path: "<table>".into(),
        source: std::io::Error::other(e),
    };
    let mut header = vec!["date".to_string()];
    header.extend(tickers.iter().cloned());
    w.write_record(&header).map_err(io_err)?;
    for (d, date) in dates.iter().enumerate() {
        let mut rec = vec![date.format("%Y-%m-%d").to_string()];
        rec.extend(values.column(d).iter().map(|v| v.to_string()));
        w.write_record(&rec).map_err(io_err)?;
    }
    w.flush().map_err(|source| Error::Io {
        path: "<table>".into(),
        source,
    })
}

/// `r[n,d] = (p[n,d] − p[n,d−1]) / p[n,d−1]`.
pub fn compute_returns(prices: &PriceTable) -> Result<ReturnMatrix> {
    let p = prices.prices();
    let cols = p.ncols();
    if cols < 2 {
        return Err(Error::InsufficientData {
            what: "price dates",
            required: 2,
            actual: cols,
        });
    }
    let values = Array2::from_shape_fn((p.nrows(), cols - 1), |(n, d)| (p[[n, d + 1]] - p[[n, d]]) / p[[n, d]]);
    ReturnMatrix::new(prices.tickers.clone(), prices.dates[1..].to_vec(), values)
}

/// Rebuilds prices from returns and a starting price per asset.
pub fn prices_from_returns(returns: &ReturnMatrix, start_date: NaiveDate, initial: &Array1<f64>) -> Result<PriceTable> {
    let (n, d) = returns.values.dim();
    if initial.len() != n {
        return Err(Error::InvalidArgument(format!("{} initial prices for {n} assets", initial.len())));
    }
    let mut p = Array2::zeros((n, d + 1));
    for i in 0..n {
        p[[i, 0]] = initial[i];
        for t in 0..d {
            p[[i, t + 1]] = p[[i, t]] * (1.0 + returns.values[[i, t]]);
        }
    }
    let mut dates = vec![start_date];
    dates.extend_from_slice(&returns.dates);
    PriceTable::new(returns.tickers.clone(), dates, p)
}

/// Parameters of a synthetic GP-LVM dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub n_assets: usize,
    pub n_days: usize,
    pub latent_dim: usize,
    /// Per-asset noise standard deviation, `>= 0`.
    pub noise_scales: Vec<f64>,
    pub seed: u64,
    pub kernel: KernelSpec,
    /// Linear kernel amplitude `σ` (signal `σ²BBᵀ`).
    pub kernel_sigma: f64,
    /// Stationary kernel lengthscale.
    pub lengthscale: f64,
    /// Per-asset signal scales for stationary kernels.
    pub signal_scales: Vec<f64>,
    /// Fixed latent positions; drawn from a standard normal when absent.
    pub latents: Option<Array2<f64>>,
}

impl SyntheticSpec {
    /// Linear factor data `r = Bf + ε` with unit kernel amplitude.
    pub fn linear(n_assets: usize, n_days: usize, latent_dim: usize, noise: f64, seed: u64) -> Self {
        Self {
            n_assets,
            n_days,
            latent_dim,
            noise_scales: vec![noise; n_assets],
            seed,
            kernel: KernelSpec::new(KernelKind::Linear),
            kernel_sigma: 0.01,
            lengthscale: 1.0,
            signal_scales: vec![1.0; n_assets],
            latents: None,
        }
    }

    /// Data from a stationary-kernel GP with common signal and noise scales.
    pub fn stationary(
        kind: KernelKind,
        n_assets: usize,
        n_days: usize,
        latent_dim: usize,
        signal: f64,
        noise: f64,
        seed: u64,
    ) -> Self {
        Self {
            kernel: KernelSpec::new(kind),
            signal_scales: vec![signal; n_assets],
            ..Self::linear(n_assets, n_days, latent_dim, noise, seed)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.latent_dim < 1 || self.n_assets < 2 || self.n_days < 2 {
            return Err(Error::InvalidArgument(format!(
                "synthetic spec needs latent_dim >= 1, n_assets >= 2, n_days >= 2 (got {}, {}, {})",
                self.latent_dim, self.n_assets, self.n_days
            )));
        }
        if self.noise_scales.len() != self.n_assets || self.noise_scales.iter().any(|&s| !(s >= 0.0 && s.is_finite())) {
            return Err(Error::InvalidArgument("noise_scales must be n_assets finite values >= 0".into()));
        }
        if let Some(b) = &self.latents {
            if b.dim() != (self.n_assets, self.latent_dim) {
                return Err(Error::InvalidArgument(format!(
                    "latents are {:?}, expected ({}, {})",
                    b.dim(),
                    self.n_assets,
                    self.latent_dim
                )));
            }
        }
        Ok(())
    }

    fn hyper(&self) -> HyperParams {
        // noise enters separately, the placeholder only satisfies validation
        let noise = Array1::ones(self.n_assets);
        if self.kernel.kind.is_stationary() {
            HyperParams::stationary(self.lengthscale, Array1::from(self.signal_scales.clone()), noise)
        } else {
            HyperParams::linear(self.kernel_sigma, noise)
        }
    }
}

/// Output of [`generate_synthetic`].
#[derive(Debug, Clone)]
pub struct SyntheticData {
    pub returns: ReturnMatrix,
    /// `K_signal + diag(σ_n²)`.
    pub true_covariance: Array2<f64>,
    pub true_latents: Array2<f64>,
}

/// Draws `D` independent columns from `N(0, K_signal)` and adds per-asset noise.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<SyntheticData> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let (n, d, q) = (spec.n_assets, spec.n_days, spec.latent_dim);
    let latents = match &spec.latents {
        Some(b) => b.clone(),
        None => Array2::from_shape_fn((n, q), |_| StandardNormal.sample(&mut rng)),
    };
    let b = LatentPositions::new(latents.clone())?;
    let k_signal = signal_covariance(&spec.kernel, &b, &spec.hyper())?;
    let factor = linalg::psd_factor(k_signal.view(), 1e-12).map_err(|fail| Error::NotPositiveDefinite {
        max_jitter: 0.0,
        pivot: fail.pivot,
        pivot_value: fail.value,
        condition_estimate: f64::INFINITY,
    })?;
    let z = Array2::from_shape_fn((n, d), |_| StandardNormal.sample(&mut rng));
    let eps: Array2<f64> = Array2::from_shape_fn((n, d), |_| StandardNormal.sample(&mut rng));
    let mut values = factor.dot(&z);
    for (i, &s) in spec.noise_scales.iter().enumerate() {
        values.row_mut(i).scaled_add(s, &eps.row(i));
    }
    let mut true_covariance = k_signal;
    for (i, &s) in spec.noise_scales.iter().enumerate() {
        true_covariance[[i, i]] += s * s;
    }
    let returns = ReturnMatrix::from_values(values)?;
    Ok(SyntheticData {
        returns,
        true_covariance,
        true_latents: latents,
    })
}

/// Market-like preset: one dominant common factor plus two weaker ones, with
/// heterogeneous idiosyncratic noise. Daily volatilities are around 1–3%.
pub fn market_spec(n_assets: usize, n_days: usize, seed: u64) -> SyntheticSpec {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x6d61_726b_6574);
    let latents = Array2::from_shape_fn((n_assets, 3), |(_, j)| {
        let z: f64 = StandardNormal.sample(&mut rng);
        if j == 0 {
            1.0 + 0.3 * z
        } else {
            0.4 * z
        }
    });
    let noise_scales = (0..n_assets)
        .map(|_| {
            let u: f64 = rand::Rng::gen(&mut rng);
            0.005 + 0.025 * u
        })
        .collect();
    SyntheticSpec {
        latents: Some(latents),
        noise_scales,
        kernel_sigma: 0.01,
        ..SyntheticSpec::linear(n_assets, n_days, 3, 0.0, seed)
    }
}

pub(crate) fn default_tickers(n: usize) -> Vec<String> {
    let width = n.saturating_sub(1).to_string().len().max(2);
    (0..n).map(|i| format!("A{i:0width$}")).collect()
}

pub(crate) fn default_start() -> NaiveDate {
    NaiveDate::from_ymd_opt(2010, 1, 4).expect("valid date")
}

/// `count` consecutive weekdays starting at `start` (or the next weekday).
pub fn business_days(start: NaiveDate, count: usize) -> Vec<NaiveDate> {
    let mut out = Vec::with_capacity(count);
    let mut day = start;
    while out.len() < count {
        if !matches!(day.weekday(), Weekday::Sat | Weekday::Sun) {
            out.push(day);
        }
        day = day + Days::new(1);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn table(csv: &str, drop: bool) -> Result<(PriceTable, LoadReport)> {
        parse_prices(
            csv.as_bytes(),
            &LoadOptions {
                drop_incomplete: drop,
                ..Default::default()
            },
        )
    }

    #[test]
    fn loads_well_formed_table() {
        let (t, report) = table(
            "date,A,B,C\n2020-01-01,1,2,3\n2020-01-02,1.1,2.1,3.1\n2020-01-03,1.2,2.2,3.2\n2020-01-06,1,2,3\n",
            false,
        )
        .unwrap();
        assert_eq!(t.n_assets(), 3);
        assert_eq!(t.dates().len(), 4);
        assert_eq!(t.prices()[[1, 2]], 2.2);
        assert!(report.dropped.is_empty());
    }

    #[test]
    fn zero_price_names_cell() {
        let err = table("date,A,B\n2020-01-01,1,2\n2020-01-02,0.0,2\n", false).unwrap_err();
        let msg = err.to_string();
        assert!(matches!(err, Error::Validation(_)));
        assert!(msg.contains('A') && msg.contains("2020-01-02"), "{msg}");
    }

    #[test]
    fn missing_cell_is_error_unless_dropping() {
        let csv = "date,A,B,C\n2020-01-01,1,2,3\n2020-01-02,1,,3\n2020-01-03,1,2,3\n";
        assert!(matches!(table(csv, false), Err(Error::Validation(_))));
        let (t, report) = table(csv, true).unwrap();
        assert_eq!(t.tickers(), &["A".to_string(), "C".to_string()]);
        assert_eq!(report.dropped, vec!["B".to_string()]);
    }

    #[test]
    fn unordered_dates_rejected() {
        let err = table("date,A\n2020-01-02,1\n2020-01-01,1\n", false).unwrap_err();
        assert!(matches!(err, Error::Validation(_)));
        let err = table("date,A\n2020-01-02,1\n2020-01-02,1\n", false).unwrap_err();
        assert!(matches!(err, Error::Validation(_)));
    }

    #[test]
    fn parse_errors_carry_position() {
        match table("date,A,B\n2020-01-01,1,x\n", false) {
            Err(Error::Format { row, col, .. }) => assert_eq!((row, col), (2, 3)),
            other => panic!("{other:?}"),
        }
        match table("date,A\n01/02/2020,1\n", false) {
            Err(Error::Format { row, col, .. }) => assert_eq!((row, col), (2, 1)),
            other => panic!("{other:?}"),
        }
    }

    fn one_row(prices: &[f64]) -> PriceTable {
        let dates = business_days(default_start(), prices.len());
        PriceTable::new(vec!["X".into()], dates, Array2::from_shape_vec((1, prices.len()), prices.to_vec()).unwrap())
            .unwrap()
    }

    #[test]
    fn return_formula() {
        let r = compute_returns(&one_row(&[100.0, 110.0, 99.0])).unwrap();
        assert!((r.values()[[0, 0]] - 0.10).abs() < 1e-15);
        assert!((r.values()[[0, 1]] + 0.10).abs() < 1e-15);
        assert_eq!(compute_returns(&one_row(&[50.0, 50.0, 50.0])).unwrap().values(), &array![[0.0, 0.0]]);
        assert_eq!(compute_returns(&one_row(&[1.0, 2.0, 1.0])).unwrap().values(), &array![[1.0, -0.5]]);
        let r = compute_returns(&one_row(&[1.0, 2.0, 1.0])).unwrap();
        assert_eq!(r.dates().len(), 2);
        assert_eq!(r.dates()[0], business_days(default_start(), 2)[1]);
        assert!(compute_returns(&one_row(&[1.0])).is_err());
    }

    #[test]
    fn synthetic_identical_latents_give_identical_rows() {
        let spec = SyntheticSpec {
            latents: Some(array![[1.0], [1.0]]),
            ..SyntheticSpec::linear(2, 50, 1, 0.0, 9)
        };
        let data = generate_synthetic(&spec).unwrap();
        let v = data.returns.values();
        assert_eq!(v.row(0), v.row(1));
    }

    #[test]
    fn synthetic_is_deterministic() {
        let spec = SyntheticSpec::stationary(KernelKind::Se, 8, 30, 2, 0.02, 0.01, 4);
        let a = generate_synthetic(&spec).unwrap();
        let b = generate_synthetic(&spec).unwrap();
        assert_eq!(a.returns, b.returns);
        assert_eq!(a.true_latents, b.true_latents);
        assert_eq!(a.returns.values().len(), 8 * 30);
        assert!(a.returns.values().iter().all(|x| x.is_finite()));
    }

    #[test]
    fn synthetic_spec_validation() {
        assert!(generate_synthetic(&SyntheticSpec::linear(1, 10, 1, 0.1, 0)).is_err());
        assert!(generate_synthetic(&SyntheticSpec::linear(3, 10, 0, 0.1, 0)).is_err());
        assert!(generate_synthetic(&SyntheticSpec::linear(3, 1, 1, 0.1, 0)).is_err());
    }

    #[test]
    fn returns_roundtrip_through_csv() {
        let data = generate_synthetic(&SyntheticSpec::linear(3, 5, 1, 0.1, 2)).unwrap();
        let mut buf = Vec::new();
        data.returns.write_csv(&mut buf).unwrap();
        let (back, _) = parse_returns(buf.as_slice(), &LoadOptions::default()).unwrap();
        assert_eq!(back, data.returns);
    }

    #[test]
    fn business_days_skip_weekends() {
        let days = business_days(NaiveDate::from_ymd_opt(2024, 1, 5).unwrap(), 3);
        assert_eq!(days[1], NaiveDate::from_ymd_opt(2024, 1, 8).unwrap());
    }
}
