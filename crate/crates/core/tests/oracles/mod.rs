//! Reference implementations used as test oracles.
//!
//! Nothing here goes through the library's Cholesky path: determinants and
//! solves use LU with partial pivoting, the QP oracle enumerates active sets,
//! and the conjugate model has a closed-form evidence.

#![allow(dead_code)]

use ndarray::{Array1, Array2};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub const LN_2PI: f64 = 1.837_877_066_409_345_3;

/// LU factorization with partial pivoting, `PA = LU` stored in one matrix.
pub struct Lu {
    lu: Array2<f64>,
    perm: Vec<usize>,
    sign: f64,
}

impl Lu {
    pub fn new(a: &Array2<f64>) -> Option<Self> {
        let n = a.nrows();
        let mut lu = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut sign = 1.0;
        for k in 0..n {
            let p = (k..n).max_by(|&i, &j| lu[[i, k]].abs().total_cmp(&lu[[j, k]].abs()))?;
            if lu[[p, k]] == 0.0 {
                return None;
            }
            if p != k {
                for c in 0..n {
                    lu.swap([p, c], [k, c]);
                }
                perm.swap(p, k);
                sign = -sign;
            }
            for i in k + 1..n {
                let f = lu[[i, k]] / lu[[k, k]];
                lu[[i, k]] = f;
                for c in k + 1..n {
                    lu[[i, c]] -= f * lu[[k, c]];
                }
            }
        }
        Some(Self { lu, perm, sign })
    }

    /// `(log|det A|, sign of det A)`.
    pub fn log_abs_det(&self) -> (f64, f64) {
        let mut s = self.sign;
        let mut l = 0.0;
        for i in 0..self.lu.nrows() {
            let d = self.lu[[i, i]];
            s *= d.signum();
            l += d.abs().ln();
        }
        (l, s)
    }

    pub fn solve(&self, b: &Array1<f64>) -> Array1<f64> {
        let n = b.len();
        let mut x: Array1<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            for j in 0..i {
                x[i] -= self.lu[[i, j]] * x[j];
            }
        }
        for i in (0..n).rev() {
            for j in i + 1..n {
                x[i] -= self.lu[[i, j]] * x[j];
            }
            x[i] /= self.lu[[i, i]];
        }
        x
    }
}

/// Sum over columns of `log N(r_d; 0, K)`, each column evaluated on its own.
pub fn mvn_log_density_columns(r: &Array2<f64>, k: &Array2<f64>) -> f64 {
    let n = k.nrows();
    let lu = Lu::new(k).expect("nonsingular covariance");
    let (log_det, sign) = lu.log_abs_det();
    assert!(sign > 0.0, "covariance determinant must be positive");
    let mut total = 0.0;
    for col in r.columns() {
        let col = col.to_owned();
        let x = lu.solve(&col);
        let quad = col.dot(&x);
        total += -0.5 * n as f64 * LN_2PI - 0.5 * log_det - 0.5 * quad;
    }
    total
}

pub fn random_spd(rng: &mut ChaCha8Rng, n: usize, ridge: f64) -> Array2<f64> {
    let a = Array2::from_shape_fn((n, n + 2), |_| rng.sample::<f64, _>(StandardNormal));
    let mut k = a.dot(&a.t()) / (n + 2) as f64;
    for i in 0..n {
        k[[i, i]] += ridge;
    }
    // exact symmetry regardless of accumulation order
    for i in 0..n {
        for j in 0..i {
            k[[j, i]] = k[[i, j]];
        }
    }
    k
}

pub fn normal_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize, scale: f64) -> Array2<f64> {
    Array2::from_shape_fn((rows, cols), |_| scale * rng.sample::<f64, _>(StandardNormal))
}

pub fn uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * rng.gen::<f64>()
}

/// Exact minimizer of `wᵀKw` over `{Σw = 1, 0 ≤ w ≤ cap}` by enumerating which
/// coordinates sit at 0, at `cap`, or strictly between, and solving the
/// equality-constrained problem on the free set. Exponential in `N`; N ≤ 8.
pub fn active_set_min_variance(k: &Array2<f64>, cap: f64) -> (Array1<f64>, f64) {
    let n = k.nrows();
    let mut best: Option<(Array1<f64>, f64)> = None;
    let total = 3usize.pow(n as u32);
    for code in 0..total {
        let mut state = vec![0u8; n];
        let mut c = code;
        for s in state.iter_mut() {
            *s = (c % 3) as u8;
            c /= 3;
        }
        let free: Vec<usize> = (0..n).filter(|&i| state[i] == 2).collect();
        let mut w = Array1::<f64>::zeros(n);
        for i in 0..n {
            if state[i] == 1 {
                w[i] = cap;
            }
        }
        let fixed_sum: f64 = w.sum();
        if free.is_empty() {
            if (fixed_sum - 1.0).abs() > 1e-12 {
                continue;
            }
        } else {
            // [K_FF 1; 1ᵀ 0] [w_F; λ] = [−K_FU w_U; 1 − Σ w_U]
            let m = free.len();
            let mut a = Array2::<f64>::zeros((m + 1, m + 1));
            let mut b = Array1::<f64>::zeros(m + 1);
            for (p, &i) in free.iter().enumerate() {
                for (q, &j) in free.iter().enumerate() {
                    a[[p, q]] = k[[i, j]];
                }
                a[[p, m]] = 1.0;
                a[[m, p]] = 1.0;
                b[p] = -(0..n).filter(|&j| state[j] == 1).map(|j| k[[i, j]] * cap).sum::<f64>();
            }
            b[m] = 1.0 - fixed_sum;
            let Some(lu) = Lu::new(&a) else { continue };
            let x = lu.solve(&b);
            let mut ok = true;
            for (p, &i) in free.iter().enumerate() {
                if x[p] < -1e-12 || x[p] > cap + 1e-12 {
                    ok = false;
                }
                w[i] = x[p];
            }
            if !ok {
                continue;
            }
        }
        let obj = w.dot(&k.dot(&w));
        if best.as_ref().map_or(true, |(_, o)| obj < *o) {
            best = Some((w, obj));
        }
    }
    best.expect("feasible set is non-empty")
}

/// KKT residual for `min wᵀKw` on the capped simplex: there must exist `λ`
/// with `g_i ≥ λ` at zero weights, `g_i ≤ λ` at capped weights and `g_i = λ`
/// on the free set, where `g = 2Kw`. Returns the largest violation.
pub fn kkt_violation(k: &Array2<f64>, w: &Array1<f64>, cap: f64, tol_active: f64) -> f64 {
    let g = k.dot(w) * 2.0;
    let free: Vec<usize> = (0..w.len()).filter(|&i| w[i] > tol_active && w[i] < cap - tol_active).collect();
    let lambda = if free.is_empty() {
        // any λ between max over capped and min over zero works; pick midpoint
        let lo = (0..w.len()).filter(|&i| w[i] >= cap - tol_active).map(|i| g[i]).fold(f64::NEG_INFINITY, f64::max);
        let hi = (0..w.len()).filter(|&i| w[i] <= tol_active).map(|i| g[i]).fold(f64::INFINITY, f64::min);
        match (lo.is_finite(), hi.is_finite()) {
            (true, true) => 0.5 * (lo + hi),
            (true, false) => lo,
            (false, true) => hi,
            _ => 0.0,
        }
    } else {
        free.iter().map(|&i| g[i]).sum::<f64>() / free.len() as f64
    };
    let mut worst: f64 = 0.0;
    for i in 0..w.len() {
        let v = if w[i] <= tol_active {
            (lambda - g[i]).max(0.0)
        } else if w[i] >= cap - tol_active {
            (g[i] - lambda).max(0.0)
        } else {
            (g[i] - lambda).abs()
        };
        worst = worst.max(v);
    }
    worst
}

/// One-dimensional conjugate model: `x ~ N(m0, s0²)`, `y_i | x ~ N(x, s²)`.
pub struct ConjugateToy {
    pub prior_mean: f64,
    pub prior_var: f64,
    pub noise_var: f64,
    pub obs: Vec<f64>,
}

impl ConjugateToy {
    pub fn log_joint(&self, x: f64) -> (f64, f64) {
        let mut v = -0.5 * LN_2PI - 0.5 * self.prior_var.ln() - 0.5 * (x - self.prior_mean).powi(2) / self.prior_var;
        let mut g = -(x - self.prior_mean) / self.prior_var;
        for &y in &self.obs {
            v += -0.5 * LN_2PI - 0.5 * self.noise_var.ln() - 0.5 * (y - x).powi(2) / self.noise_var;
            g += (y - x) / self.noise_var;
        }
        (v, g)
    }

    /// Posterior mean and variance of `x`.
    pub fn posterior(&self) -> (f64, f64) {
        let n = self.obs.len() as f64;
        let precision = 1.0 / self.prior_var + n / self.noise_var;
        let mean = (self.prior_mean / self.prior_var + self.obs.iter().sum::<f64>() / self.noise_var) / precision;
        (mean, 1.0 / precision)
    }

    /// `log N(y; m0·1, s²I + s0²·11ᵀ)` evaluated densely.
    pub fn log_evidence(&self) -> f64 {
        let n = self.obs.len();
        let cov = Array2::from_shape_fn((n, n), |(i, j)| self.prior_var + if i == j { self.noise_var } else { 0.0 });
        let y = Array1::from_iter(self.obs.iter().map(|v| v - self.prior_mean));
        let col = y.insert_axis(ndarray::Axis(1));
        mvn_log_density_columns(&col, &cov)
    }
}
