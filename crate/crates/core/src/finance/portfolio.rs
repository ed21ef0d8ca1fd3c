//! Long-only minimum-variance portfolios under a per-asset weight cap.

use ndarray::Array1;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::CovarianceEstimate;

/// Stop once no weight moves by more than this in one step.
pub const STEP_TOLERANCE: f64 = 1e-10;
pub const MAX_ITERATIONS: usize = 200_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PortfolioWeights {
    pub tickers: Vec<String>,
    pub weights: Array1<f64>,
}

impl PortfolioWeights {
    /// Checks `Σw = 1` and `0 <= w <= cap`, both within 1e-8.
    pub fn new(tickers: Vec<String>, weights: Array1<f64>, cap: f64) -> Result<Self> {
        if tickers.len() != weights.len() {
            return Err(Error::InvalidArgument(format!(
                "{} tickers for {} weights",
                tickers.len(),
                weights.len()
            )));
        }
        check_feasible(&weights, cap, 1e-8)?;
        Ok(Self { tickers, weights })
    }
}

pub(crate) fn check_feasible(w: &Array1<f64>, cap: f64, tol: f64) -> Result<()> {
    let sum = w.sum();
    if (sum - 1.0).abs() > tol {
        return Err(Error::Validation(format!("weights sum to {sum}, not 1")));
    }
    if let Some((i, x)) = w.iter().enumerate().find(|(_, &x)| x < -tol || x > cap + tol || !x.is_finite()) {
        return Err(Error::Validation(format!("weight {i} = {x} outside [0, {cap}]")));
    }
    Ok(())
}

fn check_cap(n: usize, cap: f64) -> Result<()> {
    if n == 0 {
        return Err(Error::InvalidArgument("empty portfolio".into()));
    }
    if !(cap > 0.0 && cap.is_finite()) || cap * (n as f64) < 1.0 - 1e-12 {
        return Err(Error::Infeasible(format!(
            "cap {cap} with {n} assets cannot hold a fully invested portfolio (need cap * N >= 1)"
        )));
    }
    Ok(())
}

/// `(1, ..., 1) / N`. Ignores any cap.
pub fn equal_weights(n: usize) -> Array1<f64> {
    Array1::from_elem(n, 1.0 / n as f64)
}

fn clamped_sum(v: &Array1<f64>, tau: f64, cap: f64) -> f64 {
    v.iter().map(|&x| (x - tau).clamp(0.0, cap)).sum()
}

/// Euclidean projection onto `{w : Σw = 1, 0 <= w_i <= cap}`.
///
/// The projection is `w_i = clamp(v_i − τ, 0, cap)`; `τ` is found by
/// bisection and then solved exactly for the resulting active pattern.
pub fn project_capped_simplex(v: &Array1<f64>, cap: f64) -> Result<Array1<f64>> {
    let n = v.len();
    check_cap(n, cap)?;
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("projection input".into()));
    }
    let vmin = v.iter().cloned().fold(f64::INFINITY, f64::min);
    let vmax = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    // sum(lo) = N·cap >= 1, sum(hi) = 0
    let mut lo = vmin - cap;
    let mut hi = vmax;
    let mut tau = 0.5 * (lo + hi);
    for _ in 0..200 {
        tau = 0.5 * (lo + hi);
        let s = clamped_sum(v, tau, cap);
        if (s - 1.0).abs() <= 1e-12 {
            break;
        }
        if s > 1.0 {
            lo = tau;
        } else {
            hi = tau;
        }
        if hi - lo <= f64::EPSILON * (1.0 + tau.abs()) {
            break;
        }
    }
    // Re-solve τ on the free set so the sum is exact to rounding.
    let (mut free_sum, mut n_free, mut n_upper) = (0.0, 0usize, 0usize);
    for &x in v {
        let y = x - tau;
        if y >= cap {
            n_upper += 1;
        } else if y > 0.0 {
            free_sum += x;
            n_free += 1;
        }
    }
    if n_free > 0 {
        let exact = (free_sum + cap * n_upper as f64 - 1.0) / n_free as f64;
        if (clamped_sum(v, exact, cap) - 1.0).abs() <= (clamped_sum(v, tau, cap) - 1.0).abs() {
            tau = exact;
        }
    }
    Ok(v.mapv(|x| (x - tau).clamp(0.0, cap)))
}

/// Outcome of the projected-gradient solve.
#[derive(Debug, Clone, PartialEq)]
pub struct MinVarianceSolution {
    pub weights: Array1<f64>,
    pub iterations: usize,
    pub converged: bool,
}

/// Minimizes `wᵀKw` over the capped simplex by projected gradient descent.
pub fn min_variance_weights(k: &CovarianceEstimate, cap: f64) -> Result<Array1<f64>> {
    Ok(solve_min_variance(k, cap)?.weights)
}

pub fn solve_min_variance(k: &CovarianceEstimate, cap: f64) -> Result<MinVarianceSolution> {
    let n = k.dim();
    check_cap(n, cap)?;
    let km = &k.matrix;
    // Gershgorin: λ_max <= max_i Σ_j |K_ij|. Gradient of ½wᵀKw is Kw.
    let lipschitz = km
        .rows()
        .into_iter()
        .map(|row| row.iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0_f64, f64::max);
    let mut w = project_capped_simplex(&equal_weights(n), cap)?;
    if lipschitz == 0.0 {
        return Ok(MinVarianceSolution {
            weights: w,
            iterations: 0,
            converged: true,
        });
    }
    let step = 1.0 / lipschitz;
    for it in 1..=MAX_ITERATIONS {
        let grad = km.dot(&w);
        let next = project_capped_simplex(&(&w - &(grad * step)), cap)?;
        let moved = next.iter().zip(w.iter()).map(|(a, b)| (a - b).abs()).fold(0.0_f64, f64::max);
        w = next;
        if moved < STEP_TOLERANCE {
            return Ok(MinVarianceSolution {
                weights: w,
                iterations: it,
                converged: true,
            });
        }
    }
    Ok(MinVarianceSolution {
        weights: w,
        iterations: MAX_ITERATIONS,
        converged: false,
    })
}

/// Portfolio variance `wᵀKw`.
pub fn portfolio_variance(k: &CovarianceEstimate, w: &Array1<f64>) -> f64 {
    w.dot(&k.matrix.dot(w))
}
