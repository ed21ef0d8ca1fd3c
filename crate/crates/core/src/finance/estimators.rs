//! Baseline covariance estimators.

use ndarray::{Array1, Array2, Axis};

use crate::data::ReturnMatrix;
use crate::error::{Error, Result};
use crate::kernels::CovarianceEstimate;
use crate::linalg;

fn centered(r: &ReturnMatrix) -> Result<Array2<f64>> {
    let d = r.n_days();
    if d < 2 {
        return Err(Error::InsufficientData {
            what: "days",
            required: 2,
            actual: d,
        });
    }
    let mean = r.values().mean_axis(Axis(1)).expect("non-empty");
    Ok(r.values() - &mean.insert_axis(Axis(1)))
}

/// `K = (1/D)(r − μ̂)(r − μ̂)ᵀ` with per-asset means `μ̂`.
pub fn sample_covariance(r: &ReturnMatrix) -> Result<CovarianceEstimate> {
    let x = centered(r)?;
    let mut s = x.dot(&x.t()) / r.n_days() as f64;
    linalg::symmetrize(&mut s);
    CovarianceEstimate::new(s, "sample")
}

/// Shrinkage toward `μI`, `μ = tr(S)/N`, and the intensity used.
#[derive(Debug, Clone)]
pub struct LedoitWolf {
    pub estimate: CovarianceEstimate,
    pub shrinkage: f64,
}

/// Ledoit–Wolf (2004) shrinkage of the `1/D` sample covariance toward a scaled identity.
pub fn ledoit_wolf(r: &ReturnMatrix) -> Result<CovarianceEstimate> {
    Ok(ledoit_wolf_with_intensity(r)?.estimate)
}

pub fn ledoit_wolf_with_intensity(r: &ReturnMatrix) -> Result<LedoitWolf> {
    let x = centered(r)?;
    let (n, d) = x.dim();
    let (nf, df) = (n as f64, d as f64);
    let mut s = x.dot(&x.t()) / df;
    linalg::symmetrize(&mut s);
    let mu = s.diag().sum() / nf;

    // Frobenius norms are normalized by N, as in the original estimator.
    let s_norm2: f64 = s.iter().map(|v| v * v).sum();
    let delta2 = (s_norm2 - 2.0 * mu * s.diag().sum() + nf * mu * mu) / nf;
    // Σ_d ‖x_d‖⁴ where x_d is the day-d cross-section
    let sq_norms: Array1<f64> = x.map_axis(Axis(0), |col| col.iter().map(|v| v * v).sum());
    let fourth: f64 = sq_norms.iter().map(|v| v * v).sum();
    let beta_bar2 = (fourth / df - s_norm2) / (nf * df);
    let beta2 = beta_bar2.min(delta2);
    let shrinkage = if beta2 <= 0.0 || delta2 <= 0.0 {
        0.0
    } else {
        (beta2 / delta2).clamp(0.0, 1.0)
    };

    let mut shrunk = s.mapv(|v| (1.0 - shrinkage) * v);
    for i in 0..n {
        shrunk[[i, i]] += shrinkage * mu;
    }
    Ok(LedoitWolf {
        estimate: CovarianceEstimate::new(shrunk, "ledoit")?,
        shrinkage,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn rm(v: Array2<f64>) -> ReturnMatrix {
        ReturnMatrix::from_values(v).unwrap()
    }

    #[test]
    fn identical_rows_perfectly_correlated() {
        let k = sample_covariance(&rm(array![[0.1, -0.2, 0.3], [0.1, -0.2, 0.3], [0.0, 0.5, 0.1]])).unwrap().matrix;
        assert!((k[[0, 0]] - k[[0, 1]]).abs() < 1e-15);
        assert!((k[[1, 1]] - k[[0, 1]]).abs() < 1e-15);
    }

    #[test]
    fn hand_computed_two_by_two() {
        // [[1,−1],[−1,1]] is not a valid return matrix (−1 is a total loss),
        // so use half scale: K = 0.25 · [[1,−1],[−1,1]].
        let k = sample_covariance(&rm(array![[0.5, -0.5], [-0.5, 0.5]])).unwrap().matrix;
        assert_eq!(k, array![[0.25, -0.25], [-0.25, 0.25]]);
    }

    #[test]
    fn constant_rows_give_zero() {
        let k = sample_covariance(&rm(array![[0.25, 0.25, 0.25], [0.5, 0.5, 0.5]])).unwrap().matrix;
        assert!(k.iter().all(|&x| x == 0.0));
        let lw = ledoit_wolf_with_intensity(&rm(array![[0.25, 0.25, 0.25], [0.5, 0.5, 0.5]])).unwrap();
        assert_eq!(lw.shrinkage, 0.0);
    }

    #[test]
    fn needs_two_days() {
        assert!(matches!(sample_covariance(&rm(array![[0.1], [0.2]])), Err(Error::InsufficientData { .. })));
        assert!(ledoit_wolf(&rm(array![[0.1], [0.2]])).is_err());
    }
}
