//! Mean-field Gaussian variational inference for the GP-LVM.
//!
//! All positive parameters are mapped to the real line with a natural log, so
//! the variational family is a diagonal Gaussian over
//!
//! ```text
//! [ B (row-major, N·Q) | log σ or log l | log σ_vec (stationary only, N) | log σ_noise (N) ]
//! ```
//!
//! The ELBO is estimated with reparameterized draws `ζ = μ + exp(ω)·ε` and the
//! closed-form Gaussian entropy, and maximized with Adam.

use ndarray::{Array1, Array2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::ReturnMatrix;
use crate::error::{Error, Result};
use crate::kernels::{HyperParams, JitterPolicy, KernelSpec, LatentPositions, Signal};
use crate::model::{log_joint_with_gradient, ModelParams, PriorConfig};

const LN_2PI: f64 = 1.837_877_066_409_345_3;

/// Shape of the unconstrained parameter vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamLayout {
    pub n_assets: usize,
    pub latent_dim: usize,
    pub stationary: bool,
}

impl ParamLayout {
    pub fn new(spec: &KernelSpec, n_assets: usize, latent_dim: usize) -> Self {
        Self {
            n_assets,
            latent_dim,
            stationary: spec.kind.is_stationary(),
        }
    }

    pub fn of(params: &ModelParams) -> Self {
        Self {
            n_assets: params.n_assets(),
            latent_dim: params.latent_dim(),
            stationary: matches!(params.hyper.signal, Signal::Stationary { .. }),
        }
    }

    pub fn dim(&self) -> usize {
        self.n_latent() + self.n_positive()
    }

    fn n_latent(&self) -> usize {
        self.n_assets * self.latent_dim
    }

    fn n_positive(&self) -> usize {
        1 + if self.stationary { 2 } else { 1 } * self.n_assets
    }

    /// Index range of the log-transformed coordinates.
    pub fn positive_range(&self) -> std::ops::Range<usize> {
        self.n_latent()..self.dim()
    }
}

/// Maps parameters to the unconstrained space: identity on `B`, `ln` on the rest.
pub fn to_unconstrained(params: &ModelParams) -> Result<Array1<f64>> {
    let layout = ParamLayout::of(params);
    let mut z = Vec::with_capacity(layout.dim());
    z.extend(params.latents.as_array().iter().copied());
    let mut push_log = |x: f64| -> Result<()> {
        if !(x > 0.0 && x.is_finite()) {
            return Err(Error::InvalidArgument(format!("positive parameter expected, got {x}")));
        }
        z.push(x.ln());
        Ok(())
    };
    match &params.hyper.signal {
        Signal::Linear { sigma } => push_log(*sigma)?,
        Signal::Stationary { lengthscale, scales } => {
            push_log(*lengthscale)?;
            for &s in scales {
                push_log(s)?;
            }
        }
    }
    for &s in &params.hyper.noise {
        push_log(s)?;
    }
    Ok(Array1::from(z))
}

/// Inverse of [`to_unconstrained`].
pub fn from_unconstrained(layout: &ParamLayout, z: &[f64]) -> Result<ModelParams> {
    if z.len() != layout.dim() {
        return Err(Error::InvalidArgument(format!(
            "unconstrained vector has {} entries, layout needs {}",
            z.len(),
            layout.dim()
        )));
    }
    if let Some(bad) = z.iter().position(|x| !x.is_finite()) {
        return Err(Error::NonFinite(format!("unconstrained coordinate {bad}")));
    }
    let (n, q) = (layout.n_assets, layout.latent_dim);
    let b = Array2::from_shape_vec((n, q), z[..n * q].to_vec()).expect("length checked");
    let pos: Vec<f64> = z[n * q..].iter().map(|x| x.exp()).collect();
    if let Some(bad) = pos.iter().position(|x| !(*x > 0.0 && x.is_finite())) {
        return Err(Error::NonFinite(format!(
            "positive parameter {bad} overflowed (unconstrained {})",
            z[n * q + bad]
        )));
    }
    let noise = Array1::from(pos[pos.len() - n..].to_vec());
    let hyper = if layout.stationary {
        HyperParams::stationary(pos[0], Array1::from(pos[1..1 + n].to_vec()), noise)
    } else {
        HyperParams::linear(pos[0], noise)
    };
    Ok(ModelParams {
        latents: LatentPositions::new(b)?,
        hyper,
    })
}

/// Log-Jacobian of the inverse transform: the sum of the log-transformed coordinates.
pub fn log_jacobian(layout: &ParamLayout, z: &[f64]) -> f64 {
    z[layout.positive_range()].iter().sum()
}

/// An unnormalized log density on `R^dim` with its gradient.
pub trait LogDensity: Sync {
    fn dim(&self) -> usize;

    /// Writes the gradient into `grad` and returns the log density.
    fn log_density(&self, z: &[f64], grad: &mut [f64]) -> Result<f64>;
}

/// GP-LVM log joint expressed on the unconstrained space, Jacobian included.
pub struct GplvmTarget<'a> {
    values: &'a Array2<f64>,
    spec: KernelSpec,
    prior: PriorConfig,
    layout: ParamLayout,
    policy: JitterPolicy,
}

impl<'a> GplvmTarget<'a> {
    pub fn new(data: &'a ReturnMatrix, spec: KernelSpec, latent_dim: usize, prior: PriorConfig) -> Self {
        Self {
            values: data.values(),
            spec,
            prior,
            layout: ParamLayout::new(&spec, data.n_assets(), latent_dim),
            policy: JitterPolicy::default(),
        }
    }

    pub fn layout(&self) -> &ParamLayout {
        &self.layout
    }
}

impl LogDensity for GplvmTarget<'_> {
    fn dim(&self) -> usize {
        self.layout.dim()
    }

    fn log_density(&self, z: &[f64], grad: &mut [f64]) -> Result<f64> {
        let params = from_unconstrained(&self.layout, z)?;
        let (value, g) = log_joint_with_gradient(self.values, &params, &self.spec, &self.prior, &self.policy)?;
        let nq = g.latents.len();
        for (dst, src) in grad[..nq].iter_mut().zip(g.latents.iter()) {
            *dst = *src;
        }
        // d/dζ [f(e^ζ) + ζ] = e^ζ·f'(e^ζ) + 1
        let mut i = nq;
        let mut chain = |gx: f64| {
            grad[i] = gx * z[i].exp() + 1.0;
            i += 1;
        };
        chain(g.kernel);
        if let Some(gs) = &g.scales {
            for &x in gs {
                chain(x);
            }
        }
        for &x in &g.noise {
            chain(x);
        }
        Ok(value + log_jacobian(&self.layout, z))
    }
}

/// Independent Gaussians over the unconstrained coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariationalPosterior {
    pub means: Vec<f64>,
    pub log_stddevs: Vec<f64>,
}

impl VariationalPosterior {
    pub fn new(means: Vec<f64>, log_stddevs: Vec<f64>) -> Result<Self> {
        if means.len() != log_stddevs.len() {
            return Err(Error::InvalidArgument(format!(
                "{} means but {} log-stddevs",
                means.len(),
                log_stddevs.len()
            )));
        }
        if means.iter().chain(&log_stddevs).any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("variational parameters".into()));
        }
        Ok(Self { means, log_stddevs })
    }

    pub fn dim(&self) -> usize {
        self.means.len()
    }

    /// `Σ log σ_i + (dim/2)(1 + log 2π)`.
    pub fn entropy(&self) -> f64 {
        self.log_stddevs.iter().sum::<f64>() + 0.5 * self.dim() as f64 * (1.0 + LN_2PI)
    }

    fn draw(&self, eps: &[f64], out: &mut [f64]) {
        for (((o, m), w), e) in out.iter_mut().zip(&self.means).zip(&self.log_stddevs).zip(eps) {
            *o = m + w.exp() * e;
        }
    }
}

/// Monte-Carlo ELBO with its standard error.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElboEstimate {
    pub value: f64,
    pub std_error: f64,
    /// Per-draw `log p̃(ζ_s) + H[q]`.
    pub samples: Vec<f64>,
}

fn standard_normals(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| StandardNormal.sample(rng)).collect()
}

fn check_dim(q: &VariationalPosterior, target: &dyn LogDensity) -> Result<()> {
    if q.dim() != target.dim() {
        return Err(Error::InvalidArgument(format!(
            "posterior has {} coordinates, model needs {}",
            q.dim(),
            target.dim()
        )));
    }
    Ok(())
}

/// ELBO estimate from `n_samples` reparameterized draws.
pub fn elbo_estimate(
    q: &VariationalPosterior,
    target: &dyn LogDensity,
    n_samples: usize,
    rng: &mut ChaCha8Rng,
) -> Result<ElboEstimate> {
    check_dim(q, target)?;
    if n_samples == 0 {
        return Err(Error::InvalidArgument("need at least one ELBO sample".into()));
    }
    let dim = q.dim();
    let entropy = q.entropy();
    let mut z = vec![0.0; dim];
    let mut grad = vec![0.0; dim];
    let mut samples = Vec::with_capacity(n_samples);
    for s in 0..n_samples {
        let eps = standard_normals(rng, dim);
        q.draw(&eps, &mut z);
        let lp = target
            .log_density(&z, &mut grad)
            .map_err(|e| annotate(e, &format!("ELBO draw {s}")))?;
        samples.push(lp + entropy);
    }
    let value = samples.iter().sum::<f64>() / n_samples as f64;
    let std_error = if n_samples > 1 {
        let var = samples.iter().map(|x| (x - value) * (x - value)).sum::<f64>() / (n_samples - 1) as f64;
        (var / n_samples as f64).sqrt()
    } else {
        f64::INFINITY
    };
    Ok(ElboEstimate {
        value,
        std_error,
        samples,
    })
}

fn annotate(e: Error, context: &str) -> Error {
    match e {
        Error::NonFinite(msg) => Error::NonFinite(format!("{context}: {msg}")),
        other => other,
    }
}

/// ELBO and its reparameterization gradient for fixed base draws `eps`.
#[derive(Debug, Clone, PartialEq)]
pub struct ElboGradient {
    pub value: f64,
    pub d_means: Vec<f64>,
    pub d_log_stddevs: Vec<f64>,
}

pub fn elbo_gradient(q: &VariationalPosterior, target: &dyn LogDensity, eps: &[Vec<f64>]) -> Result<ElboGradient> {
    check_dim(q, target)?;
    if eps.is_empty() {
        return Err(Error::InvalidArgument("need at least one base draw".into()));
    }
    let dim = q.dim();
    let m = eps.len() as f64;
    let mut z = vec![0.0; dim];
    let mut g = vec![0.0; dim];
    let mut d_means = vec![0.0; dim];
    let mut d_log_stddevs = vec![0.0; dim];
    let mut value = 0.0;
    for e in eps {
        q.draw(e, &mut z);
        value += target.log_density(&z, &mut g)?;
        for i in 0..dim {
            d_means[i] += g[i];
            d_log_stddevs[i] += g[i] * e[i] * q.log_stddevs[i].exp();
        }
    }
    value = value / m + q.entropy();
    for i in 0..dim {
        d_means[i] /= m;
        d_log_stddevs[i] = d_log_stddevs[i] / m + 1.0;
    }
    Ok(ElboGradient {
        value,
        d_means,
        d_log_stddevs,
    })
}

/// Adam ascent state.
#[derive(Debug, Clone)]
pub struct Adam {
    step_size: f64,
    beta1: f64,
    beta2: f64,
    epsilon: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    pub fn new(dim: usize, step_size: f64) -> Self {
        Self {
            step_size,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            m: vec![0.0; dim],
            v: vec![0.0; dim],
            t: 0,
        }
    }

    /// Moves `params` uphill along `grad`.
    pub fn ascend(&mut self, params: &mut [f64], grad: &[f64]) {
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t);
        let bc2 = 1.0 - self.beta2.powi(self.t);
        for i in 0..params.len() {
            let g = grad[i];
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g;
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g;
            let m_hat = self.m[i] / bc1;
            let v_hat = self.v[i] / bc2;
            params[i] += self.step_size * m_hat / (v_hat.sqrt() + self.epsilon);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    pub iterations: usize,
    pub step_size: f64,
    pub mc_samples: usize,
    pub restarts: usize,
    pub final_elbo_samples: usize,
    pub seed: u64,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            iterations: 3000,
            step_size: 0.05,
            mc_samples: 3,
            restarts: 50,
            final_elbo_samples: 100,
            seed: 0,
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 || self.mc_samples == 0 || self.restarts == 0 || self.final_elbo_samples == 0 {
            return Err(Error::InvalidArgument(format!("fit counts must all be at least 1: {self:?}")));
        }
        if !(self.step_size > 0.0 && self.step_size.is_finite()) {
            return Err(Error::InvalidArgument(format!("step size must be positive, got {}", self.step_size)));
        }
        Ok(())
    }
}

/// A fitted model: the winning restart's posterior and diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub kernel: KernelSpec,
    pub latent_dim: usize,
    pub tickers: Vec<String>,
    pub posterior: VariationalPosterior,
    pub elbo_trace: Vec<f64>,
    pub final_elbo: f64,
    pub final_elbo_std_error: f64,
    /// Parameters decoded from the posterior means.
    pub point_params: ModelParams,
    pub restart_index: usize,
    /// Final ELBO of every restart; `None` for restarts that failed.
    pub restart_elbos: Vec<Option<f64>>,
    /// Per-asset mean return of the training data.
    pub train_means: Vec<f64>,
    pub config: FitConfig,
    pub prior: PriorConfig,
}

impl FitResult {
    pub fn layout(&self) -> ParamLayout {
        ParamLayout::new(&self.kernel, self.tickers.len(), self.latent_dim)
    }

    /// Model covariance at the posterior-mean parameters.
    pub fn covariance(&self) -> Result<crate::kernels::CovarianceEstimate> {
        self.point_params.covariance(&self.kernel)
    }
}

struct RestartOutcome {
    posterior: VariationalPosterior,
    trace: Vec<f64>,
    final_elbo: ElboEstimate,
}

/// Random initialization of the variational parameters for one restart.
pub fn initial_posterior(data: &ReturnMatrix, spec: &KernelSpec, latent_dim: usize, rng: &mut ChaCha8Rng) -> VariationalPosterior {
    let layout = ParamLayout::new(spec, data.n_assets(), latent_dim);
    let n = data.n_assets();
    let stds = data.asset_stds().mapv(|s| s.max(1e-8));
    let mut means = standard_normals(rng, n * latent_dim);
    means.push(0.0);
    if layout.stationary {
        means.extend(stds.iter().map(|s| s.ln()));
    }
    means.extend(stds.iter().map(|s| (0.5 * s).ln()));
    let log_stddevs = vec![0.1f64.ln(); layout.dim()];
    VariationalPosterior { means, log_stddevs }
}

fn restart_rng(seed: u64, restart: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(restart as u64);
    rng
}

fn run_restart(data: &ReturnMatrix, spec: &KernelSpec, latent_dim: usize, cfg: &FitConfig, prior: &PriorConfig, restart: usize) -> Result<RestartOutcome> {
    let target = GplvmTarget::new(data, *spec, latent_dim, *prior);
    let mut rng = restart_rng(cfg.seed, restart);
    let mut q = initial_posterior(data, spec, latent_dim, &mut rng);
    let dim = q.dim();
    let mut adam = Adam::new(2 * dim, cfg.step_size);
    let mut packed = vec![0.0; 2 * dim];
    let mut grad = vec![0.0; 2 * dim];
    let mut trace = Vec::with_capacity(cfg.iterations);
    for it in 0..cfg.iterations {
        let eps: Vec<Vec<f64>> = (0..cfg.mc_samples).map(|_| standard_normals(&mut rng, dim)).collect();
        let g = elbo_gradient(&q, &target, &eps).map_err(|e| annotate(e, &format!("iteration {it}")))?;
        trace.push(g.value);
        packed[..dim].copy_from_slice(&q.means);
        packed[dim..].copy_from_slice(&q.log_stddevs);
        grad[..dim].copy_from_slice(&g.d_means);
        grad[dim..].copy_from_slice(&g.d_log_stddevs);
        adam.ascend(&mut packed, &grad);
        if packed.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite(format!("variational parameters diverged at iteration {it}")));
        }
        q.means.copy_from_slice(&packed[..dim]);
        q.log_stddevs.copy_from_slice(&packed[dim..]);
    }
    let final_elbo = elbo_estimate(&q, &target, cfg.final_elbo_samples, &mut rng)?;
    Ok(RestartOutcome {
        posterior: q,
        trace,
        final_elbo,
    })
}

/// Fits the model with `cfg.restarts` random restarts and keeps the best final ELBO.
///
/// Restarts run on the current rayon pool; each owns the RNG stream
/// `(cfg.seed, restart)`, so the result does not depend on the thread count.
pub fn fit(data: &ReturnMatrix, spec: &KernelSpec, latent_dim: usize, cfg: &FitConfig, prior: &PriorConfig) -> Result<FitResult> {
    cfg.validate()?;
    prior.validate()?;
    if latent_dim == 0 {
        return Err(Error::InvalidArgument("latent dimension must be at least 1".into()));
    }
    if data.n_days() < 1 {
        return Err(Error::InsufficientData {
            what: "days",
            required: 1,
            actual: 0,
        });
    }
    let outcomes: Vec<Result<RestartOutcome>> = (0..cfg.restarts)
        .into_par_iter()
        .map(|r| run_restart(data, spec, latent_dim, cfg, prior, r))
        .collect();

    let restart_elbos: Vec<Option<f64>> = outcomes
        .iter()
        .map(|o| o.as_ref().ok().map(|o| o.final_elbo.value))
        .collect();
    let mut best: Option<(usize, &RestartOutcome)> = None;
    for (i, o) in outcomes.iter().enumerate() {
        if let Ok(o) = o {
            if best.map_or(true, |(_, b)| o.final_elbo.value > b.final_elbo.value) {
                best = Some((i, o));
            }
        }
    }
    let Some((restart_index, _)) = best else {
        let diagnostics = outcomes
            .iter()
            .enumerate()
            .filter_map(|(i, o)| o.as_ref().err().map(|e| format!("restart {i}: {e}")))
            .collect();
        return Err(Error::FitFailed(diagnostics));
    };
    let winner = outcomes.into_iter().nth(restart_index).expect("index in range").expect("winner succeeded");
    let layout = ParamLayout::new(spec, data.n_assets(), latent_dim);
    let point_params = from_unconstrained(&layout, &winner.posterior.means)?;
    Ok(FitResult {
        kernel: *spec,
        latent_dim,
        tickers: data.tickers().to_vec(),
        posterior: winner.posterior,
        elbo_trace: winner.trace,
        final_elbo: winner.final_elbo.value,
        final_elbo_std_error: winner.final_elbo.std_error,
        point_params,
        restart_index,
        restart_elbos,
        train_means: data.asset_means().to_vec(),
        config: *cfg,
        prior: *prior,
    })
}

/// One row of a latent-dimension sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatentDimRow {
    pub latent_dim: usize,
    pub elbo: Option<f64>,
    pub std_error: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone)]
pub struct LatentDimSelection {
    pub rows: Vec<LatentDimRow>,
    pub best_latent_dim: usize,
    /// Successful fits, in `rows` order.
    pub fits: Vec<FitResult>,
}

impl LatentDimSelection {
    pub fn best_fit(&self) -> &FitResult {
        self.fits
            .iter()
            .find(|f| f.latent_dim == self.best_latent_dim)
            .expect("best dimension has a fit")
    }
}

/// Fits every `Q` in `latent_dims` and picks the highest ELBO, ties going to the smallest `Q`.
pub fn select_latent_dim(
    data: &ReturnMatrix,
    spec: &KernelSpec,
    latent_dims: &[usize],
    cfg: &FitConfig,
    prior: &PriorConfig,
) -> Result<LatentDimSelection> {
    if latent_dims.is_empty() {
        return Err(Error::InvalidArgument("latent dimension range is empty".into()));
    }
    let mut rows = Vec::with_capacity(latent_dims.len());
    let mut fits = Vec::new();
    let mut best: Option<(usize, f64)> = None;
    for &q in latent_dims {
        match fit(data, spec, q, cfg, prior) {
            Ok(f) => {
                rows.push(LatentDimRow {
                    latent_dim: q,
                    elbo: Some(f.final_elbo),
                    std_error: Some(f.final_elbo_std_error),
                    error: None,
                });
                let better = match best {
                    None => true,
                    Some((bq, be)) => f.final_elbo > be || (f.final_elbo == be && q < bq),
                };
                if better {
                    best = Some((q, f.final_elbo));
                }
                fits.push(f);
            }
            Err(e) => rows.push(LatentDimRow {
                latent_dim: q,
                elbo: None,
                std_error: None,
                error: Some(e.to_string()),
            }),
        }
    }
    let Some((best_latent_dim, _)) = best else {
        return Err(Error::FitFailed(rows.into_iter().filter_map(|r| r.error.map(|e| format!("Q={}: {e}", r.latent_dim))).collect()));
    };
    Ok(LatentDimSelection {
        rows,
        best_latent_dim,
        fits,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::{Convention, KernelKind};
    use ndarray::array;

    fn params(stationary: bool) -> ModelParams {
        let b = LatentPositions::new(array![[0.3, -1.0], [2.0, 0.5], [-0.4, 0.1]]).unwrap();
        let noise = array![0.1, 0.2, 0.05];
        let hyper = if stationary {
            HyperParams::stationary(1.7, array![0.5, 1.5, 1.0], noise)
        } else {
            HyperParams::linear(0.3, noise)
        };
        ModelParams { latents: b, hyper }
    }

    #[test]
    fn roundtrip_is_identity() {
        for st in [false, true] {
            let p = params(st);
            let z = to_unconstrained(&p).unwrap();
            let back = from_unconstrained(&ParamLayout::of(&p), z.as_slice().unwrap()).unwrap();
            assert_eq!(back.latents, p.latents);
            let rel = |a: f64, b: f64| ((a - b) / b).abs();
            for (a, b) in back.hyper.noise.iter().zip(p.hyper.noise.iter()) {
                assert!(rel(*a, *b) < 1e-14);
            }
        }
    }

    #[test]
    fn unit_parameter_maps_to_zero() {
        let p = ModelParams {
            latents: LatentPositions::new(array![[0.0]]).unwrap(),
            hyper: HyperParams::linear(1.0, array![1.0]),
        };
        let z = to_unconstrained(&p).unwrap();
        assert_eq!(z.to_vec(), vec![0.0, 0.0, 0.0]);
        let layout = ParamLayout::of(&p);
        assert_eq!(log_jacobian(&layout, &[5.0, 0.7, 0.0]), 0.7);
    }

    #[test]
    fn rejects_non_finite() {
        let layout = ParamLayout::of(&params(false));
        let mut z = to_unconstrained(&params(false)).unwrap().to_vec();
        z[0] = f64::NAN;
        assert!(from_unconstrained(&layout, &z).is_err());
    }

    #[test]
    fn entropy_doubling() {
        let q = VariationalPosterior::new(vec![0.0; 5], vec![-0.3, 0.1, 0.0, 2.0, -1.0]).unwrap();
        let doubled = VariationalPosterior::new(vec![0.0; 5], q.log_stddevs.iter().map(|w| w + 2f64.ln()).collect()).unwrap();
        assert!((doubled.entropy() - q.entropy() - 5.0 * 2f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn adam_climbs_a_quadratic() {
        let mut x = vec![3.0, -2.0];
        let mut adam = Adam::new(2, 0.1);
        for _ in 0..500 {
            let g: Vec<f64> = x.iter().map(|v| -2.0 * v).collect();
            adam.ascend(&mut x, &g);
        }
        assert!(x.iter().all(|v| v.abs() < 1e-2), "{x:?}");
    }

    #[test]
    fn target_chains_jacobian() {
        let data = ReturnMatrix::from_values(array![[0.1, -0.2, 0.05], [0.0, 0.3, -0.1], [0.2, 0.1, 0.0]]).unwrap();
        let spec = KernelSpec::new(KernelKind::M32).with_convention(Convention::Standard);
        let target = GplvmTarget::new(&data, spec, 2, PriorConfig::default());
        let z = to_unconstrained(&params(true)).unwrap().to_vec();
        let mut g = vec![0.0; z.len()];
        target.log_density(&z, &mut g).unwrap();
        let h = 1e-6;
        let mut scratch = vec![0.0; z.len()];
        for i in 0..z.len() {
            let mut zp = z.clone();
            zp[i] += h;
            let mut zm = z.clone();
            zm[i] -= h;
            let fd = (target.log_density(&zp, &mut scratch).unwrap() - target.log_density(&zm, &mut scratch).unwrap()) / (2.0 * h);
            assert!((fd - g[i]).abs() < 1e-5 * (1.0 + fd.abs()), "coord {i}: {} vs {fd}", g[i]);
        }
    }

    #[test]
    fn dimension_mismatch() {
        let data = ReturnMatrix::from_values(array![[0.1, -0.2], [0.0, 0.3]]).unwrap();
        let target = GplvmTarget::new(&data, KernelSpec::new(KernelKind::Linear), 1, PriorConfig::default());
        let q = VariationalPosterior::new(vec![0.0; 3], vec![0.0; 3]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(elbo_estimate(&q, &target, 4, &mut rng).is_err());
    }

    #[test]
    fn select_single_dim() {
        let data = ReturnMatrix::from_values(array![[0.01, -0.02, 0.015, 0.0], [0.012, -0.018, 0.01, 0.001], [0.0, 0.01, -0.01, 0.02]]).unwrap();
        let cfg = FitConfig {
            iterations: 20,
            restarts: 2,
            final_elbo_samples: 5,
            ..Default::default()
        };
        let sel = select_latent_dim(&data, &KernelSpec::new(KernelKind::Se), &[2], &cfg, &PriorConfig::default()).unwrap();
        assert_eq!(sel.best_latent_dim, 2);
        assert_eq!(sel.rows.len(), 1);
        assert!(sel.rows[0].elbo.is_some() && sel.rows[0].std_error.is_some());
        assert!(select_latent_dim(&data, &KernelSpec::new(KernelKind::Se), &[], &cfg, &PriorConfig::default()).is_err());
    }

    #[test]
    fn fit_rejects_bad_config() {
        let data = ReturnMatrix::from_values(array![[0.01, -0.02], [0.0, 0.01]]).unwrap();
        let cfg = FitConfig {
            restarts: 0,
            ..Default::default()
        };
        assert!(fit(&data, &KernelSpec::new(KernelKind::Linear), 1, &cfg, &PriorConfig::default()).is_err());
        assert!(fit(&data, &KernelSpec::new(KernelKind::Linear), 0, &FitConfig::default(), &PriorConfig::default()).is_err());
    }
}
