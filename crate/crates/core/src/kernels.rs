//! Kernel functions over latent positions and covariance assembly.
//!
//! The linear kernel yields `σ²·B·Bᵀ + diag(σ_noise²)`. Stationary kernels are
//! used as a correlation matrix and rescaled per asset:
//! `diag(σ_vec)·K_corr·diag(σ_vec) + diag(σ_noise²)`.
//!
//! The exponential and Matérn-3/2 kernels default to the [`Convention::Halved`]
//! form, where the exponent carries `1/(2l)`:
//!
//! ```text
//! k_exp(d) = exp(-d / (2l))
//! k_m32(d) = (1 + √3·d/l) · exp(-√3·d / (2l))
//! ```
//!
//! With the halved exponent `k_m32` is not a correlation function (it exceeds 1
//! for small positive `d`), but the Gram diagonal is still exactly 1.
//! [`Convention::Standard`] switches both to the textbook `1/l` exponent.

use std::fmt;
use std::str::FromStr;

use ndarray::{Array1, Array2, ArrayView1};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, Cholesky};

const SQRT_3: f64 = 1.732_050_807_568_877_2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelKind {
    Linear,
    Se,
    Exp,
    M32,
}

impl KernelKind {
    pub const ALL: [KernelKind; 4] = [KernelKind::Linear, KernelKind::Se, KernelKind::Exp, KernelKind::M32];

    pub fn is_stationary(self) -> bool {
        !matches!(self, KernelKind::Linear)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            KernelKind::Linear => "linear",
            KernelKind::Se => "se",
            KernelKind::Exp => "exp",
            KernelKind::M32 => "m32",
        }
    }
}

impl fmt::Display for KernelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for KernelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "linear" => Ok(KernelKind::Linear),
            "se" => Ok(KernelKind::Se),
            "exp" => Ok(KernelKind::Exp),
            "m32" => Ok(KernelKind::M32),
            other => Err(Error::InvalidArgument(format!(
                "unknown kernel '{other}' (expected linear, se, exp or m32)"
            ))),
        }
    }
}

/// Exponent convention for the `exp` and `m32` kernels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Convention {
    /// Exponent scaled by `1/(2l)`.
    #[default]
    Halved,
    /// Textbook exponent scaled by `1/l`.
    Standard,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub kind: KernelKind,
    #[serde(default)]
    pub convention: Convention,
}

impl KernelSpec {
    pub fn new(kind: KernelKind) -> Self {
        Self {
            kind,
            convention: Convention::default(),
        }
    }

    pub fn with_convention(mut self, convention: Convention) -> Self {
        self.convention = convention;
        self
    }

    fn exponent_divisor(&self) -> f64 {
        match self.convention {
            Convention::Halved => 2.0,
            Convention::Standard => 1.0,
        }
    }

    /// Stationary profile `k(d)` with its derivatives in `d` and in the lengthscale.
    ///
    /// Returns `None` for the linear kernel.
    pub fn profile(&self, d: f64, lengthscale: f64) -> Option<(f64, f64, f64)> {
        let l = lengthscale;
        match self.kind {
            KernelKind::Linear => None,
            KernelKind::Se => {
                let k = (-0.5 * d * d / (l * l)).exp();
                Some((k, -d / (l * l) * k, d * d / (l * l * l) * k))
            }
            KernelKind::Exp => {
                let c = self.exponent_divisor();
                let k = (-d / (c * l)).exp();
                Some((k, -k / (c * l), d / (c * l * l) * k))
            }
            KernelKind::M32 => {
                let a = SQRT_3 / l;
                let b = SQRT_3 / (self.exponent_divisor() * l);
                let e = (-b * d).exp();
                let k = (1.0 + a * d) * e;
                let dk_dd = (a - b - a * b * d) * e;
                let dk_dl = e * (d / l) * (b * (1.0 + a * d) - a);
                Some((k, dk_dd, dk_dl))
            }
        }
    }

    /// Stationary kernel value at distance `d`.
    pub fn eval(&self, d: f64, lengthscale: f64) -> Option<f64> {
        self.profile(d, lengthscale).map(|(k, _, _)| k)
    }
}

impl fmt::Display for KernelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.kind, self.convention) {
            (KernelKind::Exp | KernelKind::M32, Convention::Standard) => write!(f, "{}-standard", self.kind),
            _ => write!(f, "{}", self.kind),
        }
    }
}

/// Latent coordinates `B`, one row per asset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatentPositions(Array2<f64>);

impl LatentPositions {
    pub fn new(b: Array2<f64>) -> Result<Self> {
        if b.ncols() == 0 {
            return Err(Error::InvalidArgument("latent dimension must be at least 1".into()));
        }
        if b.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("latent positions".into()));
        }
        Ok(Self(b))
    }

    pub fn n_assets(&self) -> usize {
        self.0.nrows()
    }

    pub fn latent_dim(&self) -> usize {
        self.0.ncols()
    }

    pub fn as_array(&self) -> &Array2<f64> {
        &self.0
    }

    pub fn into_inner(self) -> Array2<f64> {
        self.0
    }
}

/// Kernel-specific signal parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Signal {
    /// Linear kernel amplitude `σ`; the signal term is `σ²·B·Bᵀ`.
    Linear { sigma: f64 },
    /// Stationary kernel lengthscale and per-asset return scales `σ_vec`.
    Stationary { lengthscale: f64, scales: Array1<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HyperParams {
    pub signal: Signal,
    /// Per-asset residual standard deviations `σ_noise`.
    pub noise: Array1<f64>,
}

impl HyperParams {
    pub fn linear(sigma: f64, noise: Array1<f64>) -> Self {
        Self {
            signal: Signal::Linear { sigma },
            noise,
        }
    }

    pub fn stationary(lengthscale: f64, scales: Array1<f64>, noise: Array1<f64>) -> Self {
        Self {
            signal: Signal::Stationary { lengthscale, scales },
            noise,
        }
    }

    pub fn n_assets(&self) -> usize {
        self.noise.len()
    }

    pub fn lengthscale(&self) -> Option<f64> {
        match self.signal {
            Signal::Stationary { lengthscale, .. } => Some(lengthscale),
            Signal::Linear { .. } => None,
        }
    }

    /// Checks positivity and that the signal parameters fit `spec` and `n` assets.
    pub fn validate(&self, spec: &KernelSpec, n: usize) -> Result<()> {
        let positive = |x: f64| x > 0.0 && x.is_finite();
        if self.noise.len() != n {
            return Err(Error::InvalidArgument(format!(
                "noise vector has {} entries for {n} assets",
                self.noise.len()
            )));
        }
        if !self.noise.iter().all(|&x| positive(x)) {
            return Err(Error::InvalidArgument("noise scales must be positive and finite".into()));
        }
        match (&self.signal, spec.kind.is_stationary()) {
            (Signal::Linear { sigma }, false) => {
                if !positive(*sigma) {
                    return Err(Error::InvalidArgument(format!("kernel sigma must be positive, got {sigma}")));
                }
            }
            (Signal::Stationary { lengthscale, scales }, true) => {
                if !positive(*lengthscale) {
                    return Err(Error::InvalidArgument(format!(
                        "lengthscale must be positive, got {lengthscale}"
                    )));
                }
                if scales.len() != n {
                    return Err(Error::InvalidArgument(format!(
                        "scale vector has {} entries for {n} assets",
                        scales.len()
                    )));
                }
                if !scales.iter().all(|&x| positive(x)) {
                    return Err(Error::InvalidArgument("signal scales must be positive and finite".into()));
                }
            }
            _ => {
                return Err(Error::InvalidArgument(format!(
                    "hyperparameters do not match the {} kernel",
                    spec.kind
                )))
            }
        }
        Ok(())
    }
}

/// A symmetric covariance matrix with a provenance tag.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovarianceEstimate {
    pub matrix: Array2<f64>,
    pub tag: String,
}

impl CovarianceEstimate {
    /// Wraps `matrix`, rejecting non-square, non-finite or asymmetric input.
    pub fn new(matrix: Array2<f64>, tag: impl Into<String>) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::InvalidArgument(format!(
                "covariance must be square, got {:?}",
                matrix.dim()
            )));
        }
        if matrix.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("covariance entries".into()));
        }
        let asym = linalg::asymmetry(&matrix);
        if asym > 1e-12 {
            return Err(Error::InvalidArgument(format!(
                "covariance is not symmetric (relative asymmetry {asym:.2e})"
            )));
        }
        Ok(Self {
            matrix,
            tag: tag.into(),
        })
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }
}

pub fn pairwise_distances(latents: &LatentPositions) -> Array2<f64> {
    let b = latents.as_array();
    let n = b.nrows();
    let mut d = Array2::zeros((n, n));
    for i in 0..n {
        for j in (i + 1)..n {
            let dij = euclidean(b.row(i), b.row(j));
            d[[i, j]] = dij;
            d[[j, i]] = dij;
        }
    }
    d
}

fn euclidean(a: ArrayView1<f64>, b: ArrayView1<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Stationary Gram matrix `K_corr[i,j] = k(‖β_i − β_j‖)` with unit diagonal.
pub fn correlation_gram(spec: &KernelSpec, latents: &LatentPositions, hyper: &HyperParams) -> Result<Array2<f64>> {
    let lengthscale = match (spec.kind.is_stationary(), hyper.lengthscale()) {
        (true, Some(l)) => l,
        _ => {
            return Err(Error::InvalidArgument(format!(
                "correlation_gram needs a stationary kernel with a lengthscale, got {}",
                spec.kind
            )))
        }
    };
    Ok(gram_from_distances(spec, &pairwise_distances(latents), lengthscale))
}

pub(crate) fn gram_from_distances(spec: &KernelSpec, dist: &Array2<f64>, lengthscale: f64) -> Array2<f64> {
    let n = dist.nrows();
    let mut k = Array2::zeros((n, n));
    for i in 0..n {
        k[[i, i]] = 1.0;
        for j in (i + 1)..n {
            let v = spec.eval(dist[[i, j]], lengthscale).expect("stationary kernel");
            k[[i, j]] = v;
            k[[j, i]] = v;
        }
    }
    k
}

/// Noise-free part of the covariance: `σ²BBᵀ` or `ΣK_corrΣ`.
pub fn signal_covariance(spec: &KernelSpec, latents: &LatentPositions, hyper: &HyperParams) -> Result<Array2<f64>> {
    let n = latents.n_assets();
    hyper.validate(spec, n)?;
    match &hyper.signal {
        Signal::Linear { sigma } => {
            let b = latents.as_array();
            let mut k = b.dot(&b.t());
            k.mapv_inplace(|x| sigma * sigma * x);
            linalg::symmetrize(&mut k);
            Ok(k)
        }
        Signal::Stationary { scales, .. } => {
            let mut k = correlation_gram(spec, latents, hyper)?;
            for i in 0..n {
                for j in 0..n {
                    k[[i, j]] *= scales[i] * scales[j];
                }
            }
            Ok(k)
        }
    }
}

/// Full model covariance: signal term plus `diag(σ_noise²)`.
pub fn assemble_covariance(
    spec: &KernelSpec,
    latents: &LatentPositions,
    hyper: &HyperParams,
) -> Result<CovarianceEstimate> {
    let mut k = signal_covariance(spec, latents, hyper)?;
    for (i, s) in hyper.noise.iter().enumerate() {
        k[[i, i]] += s * s;
    }
    let tag = format!("gplvm-{}-q{}", spec, latents.latent_dim());
    CovarianceEstimate::new(k, tag)
}

/// Diagonal shift schedule for [`safe_cholesky`], relative to `mean(diag K)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JitterPolicy {
    pub initial: f64,
    pub max: f64,
    pub growth: f64,
}

impl Default for JitterPolicy {
    fn default() -> Self {
        Self {
            initial: 1e-8,
            max: 1e-4,
            growth: 10.0,
        }
    }
}

impl JitterPolicy {
    /// Absolute jitter values to try for a matrix with the given mean diagonal.
    pub fn schedule(&self, mean_diag: f64) -> Vec<f64> {
        let scale = if mean_diag > 0.0 && mean_diag.is_finite() { mean_diag } else { 1.0 };
        let mut out = Vec::new();
        let mut rel = self.initial;
        // a little slack so that 1e-8 * 10^4 still counts as reaching 1e-4
        while rel <= self.max * (1.0 + 1e-9) {
            out.push(rel * scale);
            rel *= self.growth;
        }
        out
    }
}

/// Cholesky factorization of `K + jitter·I` with escalating jitter.
pub fn safe_cholesky(k: &Array2<f64>, policy: &JitterPolicy) -> Result<Cholesky> {
    if !k.is_square() {
        return Err(Error::InvalidArgument(format!("cannot factor a {:?} matrix", k.dim())));
    }
    let n = k.nrows();
    if n == 0 {
        return Ok(Cholesky::new(Array2::zeros((0, 0)), 0.0));
    }
    let mean_diag = k.diag().sum() / n as f64;
    let schedule = policy.schedule(mean_diag);
    let mut last = None;
    for &jitter in &schedule {
        match linalg::cholesky_shifted(k.view(), jitter) {
            Ok(l) => return Ok(Cholesky::new(l, jitter)),
            Err(fail) => last = Some(fail),
        }
    }
    let fail = last.expect("jitter schedule is never empty");
    let max_diag = k.diag().iter().fold(0.0_f64, |m, &x| m.max(x.abs()));
    Err(Error::NotPositiveDefinite {
        max_jitter: *schedule.last().unwrap_or(&0.0),
        pivot: fail.pivot,
        pivot_value: fail.value,
        condition_estimate: if fail.value > 0.0 {
            max_diag / fail.value
        } else {
            f64::INFINITY
        },
    })
}
