//! GP-LVM log marginal likelihood, priors and the unnormalized log posterior.
//!
//! Days are independent draws `r[:,d] ~ N(0, K)`, so
//!
//! ```text
//! log p(r | B, θ) = −(ND/2)·log 2π − (D/2)·log|K| − ½·tr(K⁻¹ r rᵀ)
//! ```
//!
//! Priors: `B ~ N(0, 1)`, the lengthscale (stationary) or amplitude (linear)
//! `~ InvGamma(3, 1)`, and each per-asset scale and noise level
//! `~ HalfNormal(variance 0.5)`.

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::data::ReturnMatrix;
use crate::error::{Error, Result};
use crate::kernels::{
    assemble_covariance, gram_from_distances, pairwise_distances, safe_cholesky, CovarianceEstimate, HyperParams,
    JitterPolicy, KernelSpec, LatentPositions, Signal,
};

const LN_2PI: f64 = 1.837_877_066_409_345_3;

/// Latent positions plus kernel hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub latents: LatentPositions,
    pub hyper: HyperParams,
}

impl ModelParams {
    pub fn n_assets(&self) -> usize {
        self.latents.n_assets()
    }

    pub fn latent_dim(&self) -> usize {
        self.latents.latent_dim()
    }

    pub fn validate(&self, spec: &KernelSpec) -> Result<()> {
        self.hyper.validate(spec, self.n_assets())
    }

    pub fn covariance(&self, spec: &KernelSpec) -> Result<CovarianceEstimate> {
        assemble_covariance(spec, &self.latents, &self.hyper)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PriorConfig {
    pub latent_std: f64,
    pub invgamma_shape: f64,
    pub invgamma_scale: f64,
    pub halfnormal_variance: f64,
}

impl Default for PriorConfig {
    fn default() -> Self {
        Self {
            latent_std: 1.0,
            invgamma_shape: 3.0,
            invgamma_scale: 1.0,
            halfnormal_variance: 0.5,
        }
    }
}

impl PriorConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = [self.latent_std, self.invgamma_shape, self.invgamma_scale, self.halfnormal_variance]
            .iter()
            .all(|&x| x > 0.0 && x.is_finite());
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!("prior parameters must be positive: {self:?}")))
        }
    }
}

/// Log density of `N(0, std²)` and its derivative.
pub fn normal_log_density(x: f64, std: f64) -> (f64, f64) {
    let v = std * std;
    (-0.5 * (LN_2PI + v.ln()) - 0.5 * x * x / v, -x / v)
}

/// Shape–scale inverse-gamma log density and its derivative, `x > 0`.
pub fn inv_gamma_log_density(x: f64, shape: f64, scale: f64) -> (f64, f64) {
    let lp = shape * scale.ln() - ln_gamma(shape) - (shape + 1.0) * x.ln() - scale / x;
    (lp, -(shape + 1.0) / x + scale / (x * x))
}

/// Half-normal log density with the given variance and its derivative, `x >= 0`.
pub fn half_normal_log_density(x: f64, variance: f64) -> (f64, f64) {
    let lp = std::f64::consts::LN_2 - 0.5 * (LN_2PI + variance.ln()) - 0.5 * x * x / variance;
    (lp, -x / variance)
}

/// Gradient of a scalar function of [`ModelParams`], laid out like the parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamsGradient {
    pub latents: Array2<f64>,
    /// Derivative in the linear amplitude `σ` or the stationary lengthscale.
    pub kernel: f64,
    /// Per-asset scales; `None` for the linear kernel.
    pub scales: Option<Array1<f64>>,
    pub noise: Array1<f64>,
}

impl ParamsGradient {
    fn zeros_like(params: &ModelParams) -> Self {
        let n = params.n_assets();
        Self {
            latents: Array2::zeros((n, params.latent_dim())),
            kernel: 0.0,
            scales: match params.hyper.signal {
                Signal::Stationary { .. } => Some(Array1::zeros(n)),
                Signal::Linear { .. } => None,
            },
            noise: Array1::zeros(n),
        }
    }

    /// Number of scalar coordinates.
    pub fn len(&self) -> usize {
        self.latents.len() + 1 + self.scales.as_ref().map_or(0, |s| s.len()) + self.noise.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    fn add_assign(&mut self, other: &ParamsGradient) {
        self.latents += &other.latents;
        self.kernel += other.kernel;
        if let (Some(a), Some(b)) = (self.scales.as_mut(), other.scales.as_ref()) {
            *a += b;
        }
        self.noise += &other.noise;
    }
}

fn check_dims(r: &ReturnMatrix, k: &CovarianceEstimate) -> Result<()> {
    if k.dim() != r.n_assets() {
        return Err(Error::InvalidArgument(format!(
            "covariance is {}x{} but data has {} assets",
            k.dim(),
            k.dim(),
            r.n_assets()
        )));
    }
    Ok(())
}

/// Log marginal likelihood of the return columns under `N(0, K)`.
pub fn log_marginal_likelihood(r: &ReturnMatrix, k: &CovarianceEstimate) -> Result<f64> {
    check_dims(r, k)?;
    Ok(likelihood(r.values(), &k.matrix, &JitterPolicy::default(), false)?.0)
}

/// Value and, when requested, `∂/∂K = ½(K⁻¹rrᵀK⁻¹ − D·K⁻¹)`.
fn likelihood(values: &Array2<f64>, k: &Array2<f64>, policy: &JitterPolicy, with_grad: bool) -> Result<(f64, Option<Array2<f64>>)> {
    let (n, d) = values.dim();
    let chol = safe_cholesky(k, policy)?;
    let whitened = chol.whiten(values);
    let mut quad = 0.0;
    for x in whitened.iter() {
        quad += x * x;
    }
    let value = -0.5 * (n * d) as f64 * LN_2PI - 0.5 * d as f64 * chol.log_det() - 0.5 * quad;
    if !value.is_finite() {
        return Err(Error::NonFinite("log marginal likelihood".into()));
    }
    if !with_grad {
        return Ok((value, None));
    }
    let mut alpha = whitened;
    crate::linalg::solve_lower_transpose_in_place(chol.factor(), &mut alpha);
    let kinv = chol.inverse();
    let mut w = alpha.dot(&alpha.t());
    w.scaled_add(-(d as f64), &kinv);
    w.mapv_inplace(|x| 0.5 * x);
    crate::linalg::symmetrize(&mut w);
    Ok((value, Some(w)))
}

/// Sum of prior log densities over every model parameter.
pub fn log_prior(params: &ModelParams, cfg: &PriorConfig) -> f64 {
    prior_with_gradient(params, cfg).0
}

fn prior_with_gradient(params: &ModelParams, cfg: &PriorConfig) -> (f64, ParamsGradient) {
    let mut grad = ParamsGradient::zeros_like(params);
    let mut lp = 0.0;
    for (g, &x) in grad.latents.iter_mut().zip(params.latents.as_array().iter()) {
        let (v, dv) = normal_log_density(x, cfg.latent_std);
        lp += v;
        *g = dv;
    }
    let kernel_param = match &params.hyper.signal {
        Signal::Linear { sigma } => *sigma,
        Signal::Stationary { lengthscale, .. } => *lengthscale,
    };
    let (v, dv) = inv_gamma_log_density(kernel_param, cfg.invgamma_shape, cfg.invgamma_scale);
    lp += v;
    grad.kernel = dv;
    if let (Signal::Stationary { scales, .. }, Some(gs)) = (&params.hyper.signal, grad.scales.as_mut()) {
        for (g, &x) in gs.iter_mut().zip(scales.iter()) {
            let (v, dv) = half_normal_log_density(x, cfg.halfnormal_variance);
            lp += v;
            *g = dv;
        }
    }
    for (g, &x) in grad.noise.iter_mut().zip(params.hyper.noise.iter()) {
        let (v, dv) = half_normal_log_density(x, cfg.halfnormal_variance);
        lp += v;
        *g = dv;
    }
    (lp, grad)
}

/// Unnormalized log posterior `log p(r | B, θ) + log p(B, θ)`.
pub fn log_joint(r: &ReturnMatrix, params: &ModelParams, spec: &KernelSpec, cfg: &PriorConfig) -> Result<f64> {
    let k = params.covariance(spec)?;
    Ok(log_marginal_likelihood(r, &k)? + log_prior(params, cfg))
}

/// Analytic gradient of [`log_joint`] in every parameter coordinate.
pub fn log_joint_gradient(
    r: &ReturnMatrix,
    params: &ModelParams,
    spec: &KernelSpec,
    cfg: &PriorConfig,
) -> Result<ParamsGradient> {
    Ok(log_joint_with_gradient(r.values(), params, spec, cfg, &JitterPolicy::default())?.1)
}

/// [`log_joint`] and its gradient from a single factorization.
pub fn log_joint_with_gradient(
    values: &Array2<f64>,
    params: &ModelParams,
    spec: &KernelSpec,
    cfg: &PriorConfig,
    policy: &JitterPolicy,
) -> Result<(f64, ParamsGradient)> {
    if values.nrows() != params.n_assets() {
        return Err(Error::InvalidArgument(format!(
            "data has {} assets but parameters describe {}",
            values.nrows(),
            params.n_assets()
        )));
    }
    params.validate(spec)?;
    let b = params.latents.as_array();
    let n = params.n_assets();
    let hyper = &params.hyper;

    // Assemble K while keeping the pieces needed for the chain rule.
    let (k, gram, dist) = match &hyper.signal {
        Signal::Linear { sigma } => {
            let mut k = b.dot(&b.t());
            k.mapv_inplace(|x| sigma * sigma * x);
            crate::linalg::symmetrize(&mut k);
            (k, None, None)
        }
        Signal::Stationary { lengthscale, scales } => {
            let dist = pairwise_distances(&params.latents);
            let gram = gram_from_distances(spec, &dist, *lengthscale);
            let k = Array2::from_shape_fn((n, n), |(i, j)| scales[i] * scales[j] * gram[[i, j]]);
            (k, Some(gram), Some(dist))
        }
    };
    let mut k = k;
    for (i, s) in hyper.noise.iter().enumerate() {
        k[[i, i]] += s * s;
    }

    let (ll, w) = likelihood(values, &k, policy, true)?;
    let w = w.expect("gradient requested");

    let (lp, mut grad) = prior_with_gradient(params, cfg);
    let mut lik_grad = ParamsGradient::zeros_like(params);
    for i in 0..n {
        lik_grad.noise[i] = 2.0 * hyper.noise[i] * w[[i, i]];
    }
    match &hyper.signal {
        Signal::Linear { sigma } => {
            let wb = w.dot(b);
            lik_grad.latents = wb.mapv(|x| 2.0 * sigma * sigma * x);
            let bbt = b.dot(&b.t());
            let mut acc = 0.0;
            for (x, y) in w.iter().zip(bbt.iter()) {
                acc += x * y;
            }
            lik_grad.kernel = 2.0 * sigma * acc;
        }
        Signal::Stationary { lengthscale, scales } => {
            let gram = gram.expect("stationary gram");
            let dist = dist.expect("stationary distances");
            let gs = lik_grad.scales.as_mut().expect("stationary gradient has scales");
            let q = b.ncols();
            let mut g_len = 0.0;
            for i in 0..n {
                let mut acc = 0.0;
                for j in 0..n {
                    acc += w[[i, j]] * scales[j] * gram[[i, j]];
                }
                gs[i] = 2.0 * acc;
            }
            for i in 0..n {
                for j in 0..n {
                    if i == j {
                        continue;
                    }
                    let g = w[[i, j]] * scales[i] * scales[j];
                    let dij = dist[[i, j]];
                    let (_, dk_dd, dk_dl) = spec.profile(dij, *lengthscale).expect("stationary kernel");
                    g_len += g * dk_dl;
                    if dij > 0.0 {
                        let coef = 2.0 * g * dk_dd / dij;
                        for c in 0..q {
                            lik_grad.latents[[i, c]] += coef * (b[[i, c]] - b[[j, c]]);
                        }
                    }
                }
            }
            lik_grad.kernel = g_len;
        }
    }
    grad.add_assign(&lik_grad);
    Ok((ll + lp, grad))
}
