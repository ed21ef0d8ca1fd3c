mod oracles;

use gpcov::kernels::{safe_cholesky, Convention, HyperParams, JitterPolicy, KernelKind, KernelSpec, LatentPositions, Signal};
use gpcov::model::{log_joint, log_joint_gradient, ModelParams, PriorConfig};
use gpcov::{log_marginal_likelihood, CovarianceEstimate, ReturnMatrix};
use ndarray::{Array1, Array2};
use oracles::{mvn_log_density_columns, normal_matrix, random_spd, uniform};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn returns(values: Array2<f64>) -> ReturnMatrix {
    ReturnMatrix::from_values(values).unwrap()
}

/// The likelihood factors `K + ε·I` with `ε = 1e-8·mean(diag K)`; the oracle
/// evaluates the same matrix.
fn jittered(k: &Array2<f64>) -> Array2<f64> {
    let n = k.nrows();
    let eps = 1e-8 * k.diag().sum() / n as f64;
    let mut out = k.clone();
    for i in 0..n {
        out[[i, i]] += eps;
    }
    out
}

#[test]
fn likelihood_matches_dense_column_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..50 {
        let n = rng.gen_range(1..=6);
        let d = rng.gen_range(1..=8);
        let k = random_spd(&mut rng, n, 0.1);
        let r = normal_matrix(&mut rng, n, d, 0.1);
        let got = log_marginal_likelihood(&returns(r.clone()), &CovarianceEstimate::new(k.clone(), "t").unwrap()).unwrap();
        let want = mvn_log_density_columns(&r, &jittered(&k));
        assert!((got - want).abs() <= 1e-8 * want.abs(), "{got} vs {want}");
    }
}

#[test]
fn likelihood_scales_with_covariance() {
    // With Q = Σ_d r_dᵀ K⁻¹ r_d: L(cK) − L(K) = −(ND/2)·log c + (Q/2)(1 − 1/c).
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (n, d, c) = (4, 6, 4.0);
    let k = random_spd(&mut rng, n, 0.2);
    let r = normal_matrix(&mut rng, n, d, 0.1);
    let lu = oracles::Lu::new(&jittered(&k)).unwrap();
    let quad: f64 = r.columns().into_iter().map(|col| col.dot(&lu.solve(&col.to_owned()))).sum();
    let base = log_marginal_likelihood(&returns(r.clone()), &CovarianceEstimate::new(k.clone(), "a").unwrap()).unwrap();
    let scaled = log_marginal_likelihood(&returns(r), &CovarianceEstimate::new(&k * c, "b").unwrap()).unwrap();
    let expect = base - 0.5 * (n * d) as f64 * f64::ln(c) + 0.5 * quad * (1.0 - 1.0 / c);
    assert!((scaled - expect).abs() < 1e-9 * expect.abs(), "{scaled} vs {expect}");
}

/// Flattens every model coordinate in gradient order.
fn flatten(p: &ModelParams) -> Vec<f64> {
    let mut v: Vec<f64> = p.latents.as_array().iter().copied().collect();
    match &p.hyper.signal {
        Signal::Linear { sigma } => v.push(*sigma),
        Signal::Stationary { lengthscale, scales } => {
            v.push(*lengthscale);
            v.extend(scales.iter());
        }
    }
    v.extend(p.hyper.noise.iter());
    v
}

fn unflatten(template: &ModelParams, v: &[f64]) -> ModelParams {
    let (n, q) = (template.n_assets(), template.latent_dim());
    let b = Array2::from_shape_vec((n, q), v[..n * q].to_vec()).unwrap();
    let mut i = n * q;
    let signal = match &template.hyper.signal {
        Signal::Linear { .. } => {
            i += 1;
            Signal::Linear { sigma: v[n * q] }
        }
        Signal::Stationary { .. } => {
            let l = v[i];
            let s = Array1::from(v[i + 1..i + 1 + n].to_vec());
            i += 1 + n;
            Signal::Stationary { lengthscale: l, scales: s }
        }
    };
    ModelParams {
        latents: LatentPositions::new(b).unwrap(),
        hyper: HyperParams {
            signal,
            noise: Array1::from(v[i..i + n].to_vec()),
        },
    }
}

fn flat_gradient(g: &gpcov::ParamsGradient) -> Vec<f64> {
    let mut v: Vec<f64> = g.latents.iter().copied().collect();
    v.push(g.kernel);
    if let Some(s) = &g.scales {
        v.extend(s.iter());
    }
    v.extend(g.noise.iter());
    v
}

pub fn random_params(rng: &mut ChaCha8Rng, spec: &KernelSpec, n: usize, q: usize) -> ModelParams {
    let b = normal_matrix(rng, n, q, 1.0);
    let noise = Array1::from_shape_fn(n, |_| uniform(rng, 0.2, 0.6));
    let hyper = if spec.kind.is_stationary() {
        HyperParams::stationary(uniform(rng, 0.6, 2.0), Array1::from_shape_fn(n, |_| uniform(rng, 0.5, 1.5)), noise)
    } else {
        HyperParams::linear(uniform(rng, 0.5, 1.5), noise)
    };
    ModelParams {
        latents: LatentPositions::new(b).unwrap(),
        hyper,
    }
}

fn check_gradient(spec: KernelSpec, instances: usize, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let prior = PriorConfig::default();
    let (n, d, q) = (8, 12, 2);
    let h = 1e-5;
    for inst in 0..instances {
        // The halved m32 form can be indefinite; keep draws whose covariance
        // factors at the base jitter so both sides see the same matrix.
        let p = loop {
            let p = random_params(&mut rng, &spec, n, q);
            let k = p.covariance(&spec).unwrap();
            if safe_cholesky(&k.matrix, &JitterPolicy::default()).map_or(false, |c| c.jitter() <= 1e-8 * k.matrix.diag().mean().unwrap()) {
                break p;
            }
        };
        let r = returns(normal_matrix(&mut rng, n, d, 0.15));
        let analytic = flat_gradient(&log_joint_gradient(&r, &p, &spec, &prior).unwrap());
        let x = flatten(&p);
        assert_eq!(analytic.len(), x.len());
        for i in 0..x.len() {
            let mut xp = x.clone();
            xp[i] += h;
            let mut xm = x.clone();
            xm[i] -= h;
            let fp = log_joint(&r, &unflatten(&p, &xp), &spec, &prior).unwrap();
            let fm = log_joint(&r, &unflatten(&p, &xm), &spec, &prior).unwrap();
            let fd = (fp - fm) / (2.0 * h);
            let tol = (1e-4 * fd.abs()).max(1e-7);
            assert!(
                (analytic[i] - fd).abs() <= tol,
                "{:?} instance {inst} coord {i}: analytic {} vs fd {fd}",
                spec,
                analytic[i]
            );
        }
    }
}

#[test]
fn gradient_linear() {
    check_gradient(KernelSpec::new(KernelKind::Linear), 5, 1);
}

#[test]
fn gradient_se() {
    check_gradient(KernelSpec::new(KernelKind::Se), 5, 2);
}

#[test]
fn gradient_exp() {
    check_gradient(KernelSpec::new(KernelKind::Exp), 5, 3);
}

#[test]
fn gradient_m32_both_conventions() {
    check_gradient(KernelSpec::new(KernelKind::M32), 5, 4);
    check_gradient(KernelSpec::new(KernelKind::M32).with_convention(Convention::Standard), 5, 5);
}

#[test]
fn log_joint_is_likelihood_plus_prior() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let spec = KernelSpec::new(KernelKind::Se);
    let p = random_params(&mut rng, &spec, 5, 2);
    let r = returns(normal_matrix(&mut rng, 5, 7, 0.3));
    let prior = PriorConfig::default();
    let lj = log_joint(&r, &p, &spec, &prior).unwrap();
    let ll = log_marginal_likelihood(&r, &p.covariance(&spec).unwrap()).unwrap();
    assert!((lj - ll - gpcov::log_prior(&p, &prior)).abs() < 1e-12 * lj.abs().max(1.0));
}
