//! GP predictions across assets: conditionals, leave-one-out imputation,
//! reconstruction scores and latent-space export.

use std::collections::HashMap;
use std::io::{Read, Write};

use chrono::NaiveDate;
use ndarray::{Array1, Array2, Axis};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::ReturnMatrix;
use crate::error::{Error, Result};
use crate::kernels::{safe_cholesky, signal_covariance, CovarianceEstimate, JitterPolicy};
use crate::vi::FitResult;

/// Gaussian over a set of target assets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictiveDistribution {
    pub mean: Array1<f64>,
    pub covariance: Array2<f64>,
}

fn submatrix(k: &Array2<f64>, rows: &[usize], cols: &[usize]) -> Array2<f64> {
    Array2::from_shape_fn((rows.len(), cols.len()), |(i, j)| k[[rows[i], cols[j]]])
}

/// Zero-mean GP conditional of `targets` given values at `observed`:
///
/// ```text
/// mean = K_tx K_xx⁻¹ y
/// cov  = K_tt − K_tx K_xx⁻¹ K_xt
/// ```
pub fn gp_conditional(
    k: &CovarianceEstimate,
    observed: &[usize],
    observed_values: &Array1<f64>,
    targets: &[usize],
) -> Result<PredictiveDistribution> {
    let n = k.dim();
    if observed.len() != observed_values.len() {
        return Err(Error::InvalidArgument(format!(
            "{} observed indices but {} values",
            observed.len(),
            observed_values.len()
        )));
    }
    if let Some(&bad) = observed.iter().chain(targets).find(|&&i| i >= n) {
        return Err(Error::InvalidArgument(format!("index {bad} outside covariance of size {n}")));
    }
    if let Some(dup) = targets.iter().find(|t| observed.contains(t)) {
        return Err(Error::InvalidArgument(format!("asset {dup} is both observed and a target")));
    }
    let k_tt = submatrix(&k.matrix, targets, targets);
    if observed.is_empty() {
        return Ok(PredictiveDistribution {
            mean: Array1::zeros(targets.len()),
            covariance: k_tt,
        });
    }
    let k_xx = submatrix(&k.matrix, observed, observed);
    let k_xt = submatrix(&k.matrix, observed, targets);
    let chol = safe_cholesky(&k_xx, &JitterPolicy::default())?;
    let mean = k_xt.t().dot(&chol.solve_vec(observed_values));
    let v = chol.whiten(&k_xt);
    let mut covariance = k_tt - v.t().dot(&v);
    crate::linalg::symmetrize(&mut covariance);
    Ok(PredictiveDistribution { mean, covariance })
}

/// `R² = 1 − Σ(y − f)² / Σ(y − ȳ)²`.
pub fn r2_score(actual: &[f64], predicted: &[f64]) -> Result<f64> {
    if actual.len() != predicted.len() {
        return Err(Error::InvalidArgument(format!(
            "{} actual values but {} predictions",
            actual.len(),
            predicted.len()
        )));
    }
    if actual.len() < 2 {
        return Err(Error::InsufficientData {
            what: "values for R²",
            required: 2,
            actual: actual.len(),
        });
    }
    let mean = actual.iter().sum::<f64>() / actual.len() as f64;
    let ss_tot: f64 = actual.iter().map(|y| (y - mean) * (y - mean)).sum();
    if ss_tot == 0.0 {
        return Err(Error::InvalidArgument("R² undefined: actual values are constant".into()));
    }
    let ss_res: f64 = actual.iter().zip(predicted).map(|(y, f)| (y - f) * (y - f)).sum();
    Ok(1.0 - ss_res / ss_tot)
}

/// `(1/ND) Σ |actual − predicted|`.
pub fn mean_abs_dev(actual: &Array2<f64>, predicted: &Array2<f64>) -> Result<f64> {
    if actual.dim() != predicted.dim() {
        return Err(Error::InvalidArgument(format!(
            "shape mismatch: {:?} vs {:?}",
            actual.dim(),
            predicted.dim()
        )));
    }
    if actual.is_empty() {
        return Err(Error::InvalidArgument("empty matrices".into()));
    }
    let total: f64 = actual.iter().zip(predicted.iter()).map(|(a, p)| (a - p).abs()).sum();
    Ok(total / actual.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImputedCell {
    pub ticker: String,
    pub date: NaiveDate,
    pub actual: f64,
    pub predicted: f64,
    /// Historical-mean prediction.
    pub baseline: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImputationReport {
    pub cells: Vec<ImputedCell>,
    /// Pooled R² over every cell.
    pub r2: f64,
    pub mean_abs_dev: f64,
    pub baseline_r2: f64,
    pub baseline_mean_abs_dev: f64,
    /// R² per asset over its days; `None` where the asset's returns are constant.
    pub per_asset_r2: Vec<Option<f64>>,
}

impl ImputationReport {
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let io = |e: csv::Error| Error::Io {
            path: "<imputation report>".into(),
            source: std::io::Error::other(e),
        };
        w.write_record(["ticker", "date", "actual", "predicted", "baseline"]).map_err(io)?;
        for c in &self.cells {
            w.write_record([
                c.ticker.clone(),
                c.date.format("%Y-%m-%d").to_string(),
                c.actual.to_string(),
                c.predicted.to_string(),
                c.baseline.to_string(),
            ])
            .map_err(io)?;
        }
        w.flush().map_err(|source| Error::Io {
            path: "<imputation report>".into(),
            source,
        })
    }
}

/// Predicts every `(asset, day)` from the other assets on the same day.
///
/// `historical_means` supplies the baseline prediction per asset, normally the
/// training-period mean return.
pub fn loocv_impute(r_test: &ReturnMatrix, k: &CovarianceEstimate, historical_means: &Array1<f64>) -> Result<ImputationReport> {
    let (n, d) = (r_test.n_assets(), r_test.n_days());
    if k.dim() != n || historical_means.len() != n {
        return Err(Error::InvalidArgument(format!(
            "covariance ({}) and means ({}) must match the {n} test assets",
            k.dim(),
            historical_means.len()
        )));
    }
    if n < 2 {
        return Err(Error::InsufficientData {
            what: "assets for leave-one-out",
            required: 2,
            actual: n,
        });
    }
    let values = r_test.values();
    // One factorization per left-out asset; each day's mean is then a dot product.
    let predictions: Vec<Result<Array1<f64>>> = (0..n)
        .into_par_iter()
        .map(|target| {
            let observed: Vec<usize> = (0..n).filter(|&i| i != target).collect();
            let k_xx = submatrix(&k.matrix, &observed, &observed);
            let k_xt = submatrix(&k.matrix, &observed, &[target]).index_axis_move(Axis(1), 0);
            let chol = safe_cholesky(&k_xx, &JitterPolicy::default())?;
            let coef = chol.solve_vec(&k_xt);
            let rest = values.select(Axis(0), &observed);
            Ok(rest.t().dot(&coef))
        })
        .collect();
    let mut predicted = Array2::zeros((n, d));
    for (i, p) in predictions.into_iter().enumerate() {
        predicted.row_mut(i).assign(&p?);
    }
    let baseline = Array2::from_shape_fn((n, d), |(i, _)| historical_means[i]);

    let mut cells = Vec::with_capacity(n * d);
    for i in 0..n {
        for t in 0..d {
            cells.push(ImputedCell {
                ticker: r_test.tickers()[i].clone(),
                date: r_test.dates()[t],
                actual: values[[i, t]],
                predicted: predicted[[i, t]],
                baseline: baseline[[i, t]],
            });
        }
    }
    let flat = |m: &Array2<f64>| m.iter().copied().collect::<Vec<_>>();
    let per_asset_r2 = (0..n)
        .map(|i| r2_score(&values.row(i).to_vec(), &predicted.row(i).to_vec()).ok())
        .collect();
    Ok(ImputationReport {
        r2: r2_score(&flat(values), &flat(&predicted))?,
        mean_abs_dev: mean_abs_dev(values, &predicted)?,
        baseline_r2: r2_score(&flat(values), &flat(&baseline))?,
        baseline_mean_abs_dev: mean_abs_dev(values, &baseline)?,
        per_asset_r2,
        cells,
    })
}

/// Noise-free conditional mean `K_signal K⁻¹ r` for every day.
pub fn reconstruct(r: &ReturnMatrix, fit: &FitResult) -> Result<Array2<f64>> {
    if r.tickers() != fit.tickers.as_slice() {
        return Err(Error::Validation("data tickers differ from the fitted model".into()));
    }
    let params = &fit.point_params;
    let k_signal = signal_covariance(&fit.kernel, &params.latents, &params.hyper)?;
    let k = fit.covariance()?;
    let chol = safe_cholesky(&k.matrix, &JitterPolicy::default())?;
    Ok(k_signal.dot(&chol.solve(r.values())))
}

/// Pooled in-sample R² of [`reconstruct`] against `r`.
pub fn reconstruction_r2(r: &ReturnMatrix, fit: &FitResult) -> Result<f64> {
    let pred = reconstruct(r, fit)?;
    r2_score(&r.values().iter().copied().collect::<Vec<_>>(), &pred.iter().copied().collect::<Vec<_>>())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingRow {
    pub ticker: String,
    pub coords: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sector: Option<String>,
}

/// Posterior-mean latent coordinates, one row per ticker.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Embedding {
    pub latent_dim: usize,
    pub rows: Vec<EmbeddingRow>,
}

impl Embedding {
    pub fn has_sectors(&self) -> bool {
        self.rows.iter().any(|r| r.sector.is_some())
    }

    /// Writes `ticker,x1,...,xQ[,sector]`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let io = |e: csv::Error| Error::Io {
            path: "<embedding>".into(),
            source: std::io::Error::other(e),
        };
        let sectors = self.has_sectors();
        let mut header = vec!["ticker".to_string()];
        header.extend((1..=self.latent_dim).map(|i| format!("x{i}")));
        if sectors {
            header.push("sector".into());
        }
        w.write_record(&header).map_err(io)?;
        for row in &self.rows {
            let mut rec = vec![row.ticker.clone()];
            rec.extend(row.coords.iter().map(|c| c.to_string()));
            if sectors {
                rec.push(row.sector.clone().unwrap_or_default());
            }
            w.write_record(&rec).map_err(io)?;
        }
        w.flush().map_err(|source| Error::Io {
            path: "<embedding>".into(),
            source,
        })
    }
}

pub fn export_embedding(fit: &FitResult, sectors: Option<&HashMap<String, String>>) -> Embedding {
    let b = fit.point_params.latents.as_array();
    let rows = fit
        .tickers
        .iter()
        .enumerate()
        .map(|(i, t)| EmbeddingRow {
            ticker: t.clone(),
            coords: b.row(i).to_vec(),
            sector: sectors.and_then(|s| s.get(t).cloned()),
        })
        .collect();
    Embedding {
        latent_dim: fit.latent_dim,
        rows,
    }
}

/// Reads a `ticker,sector` table (header row required).
pub fn parse_sectors<R: Read>(reader: R) -> Result<HashMap<String, String>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let mut out = HashMap::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::Format {
            row: i + 2,
            col: 1,
            msg: e.to_string(),
        })?;
        if rec.len() < 2 {
            return Err(Error::Format {
                row: i + 2,
                col: rec.len() + 1,
                msg: "expected ticker,sector".into(),
            });
        }
        out.insert(rec[0].to_string(), rec[1].to_string());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn cov(m: Array2<f64>) -> CovarianceEstimate {
        CovarianceEstimate::new(m, "t").unwrap()
    }

    #[test]
    fn two_asset_conditional() {
        let k = cov(array![[1.0, 0.5], [0.5, 1.0]]);
        let p = gp_conditional(&k, &[0], &array![2.0], &[1]).unwrap();
        assert!((p.mean[0] - 1.0).abs() < 1e-7);
        assert!((p.covariance[[0, 0]] - 0.75).abs() < 1e-7);
    }

    #[test]
    fn independent_assets_carry_no_information() {
        let k = cov(Array2::from_diag(&array![1.0, 2.0, 3.0]));
        let p = gp_conditional(&k, &[0, 2], &array![0.5, -0.4], &[1]).unwrap();
        assert_eq!(p.mean[0], 0.0);
        assert_eq!(p.covariance[[0, 0]], 2.0);
    }

    #[test]
    fn overlapping_indices_rejected() {
        let k = cov(Array2::eye(3));
        assert!(gp_conditional(&k, &[0, 1], &array![0.0, 0.0], &[1]).is_err());
        assert!(gp_conditional(&k, &[0], &array![0.0], &[3]).is_err());
    }

    #[test]
    fn r2_reference_values() {
        assert_eq!(r2_score(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap(), 1.0);
        assert_eq!(r2_score(&[1.0, 2.0, 3.0], &[2.0, 2.0, 2.0]).unwrap(), 0.0);
        assert!((r2_score(&[1.0, 2.0, 3.0], &[1.0, 2.0, 4.0]).unwrap() - 0.5).abs() < 1e-15);
        assert!(r2_score(&[1.0, 1.0], &[1.0, 2.0]).is_err());
        assert!(r2_score(&[1.0], &[1.0]).is_err());
    }

    #[test]
    fn mad_reference_values() {
        let a = array![[0.0, 0.0], [0.0, 0.0]];
        assert_eq!(mean_abs_dev(&a, &a).unwrap(), 0.0);
        assert!((mean_abs_dev(&a, &array![[0.1, 0.0], [0.0, -0.1]]).unwrap() - 0.05).abs() < 1e-15);
        let b = array![[0.3, -0.2], [0.1, 0.0]];
        assert!((mean_abs_dev(&b, &(&b + 0.01)).unwrap() - 0.01).abs() < 1e-15);
        assert!(mean_abs_dev(&a, &array![[0.0, 0.0]]).is_err());
    }

    #[test]
    fn diagonal_covariance_imputes_zero() {
        let r = ReturnMatrix::from_values(array![[0.01, -0.02, 0.03], [0.02, 0.01, -0.01], [0.0, 0.01, 0.02]]).unwrap();
        let k = cov(Array2::from_diag(&array![1e-4, 2e-4, 3e-4]));
        let report = loocv_impute(&r, &k, &array![0.001, 0.002, 0.003]).unwrap();
        assert!(report.cells.iter().all(|c| c.predicted == 0.0));
        assert!(report.r2 <= 0.0);
        assert_eq!(report.cells.len(), 9);
    }

    #[test]
    fn sector_table() {
        let s = parse_sectors("ticker,sector\nAAA,Tech\nBBB, Energy\n".as_bytes()).unwrap();
        assert_eq!(s["BBB"], "Energy");
        assert_eq!(s.len(), 2);
    }
}
