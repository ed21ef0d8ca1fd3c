//! Dense Cholesky factorization and triangular solves on row-major `ndarray` matrices.
//!
//! Sizes in this crate are at most a few hundred, so plain row-oriented loops
//! are fast enough and keep every reduction in a fixed order.

use ndarray::{Array1, Array2, ArrayView2, Axis};

/// A failed factorization: index and value of the first non-positive pivot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct PivotFailure {
    pub pivot: usize,
    pub value: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut s = 0.0;
    for (x, y) in a.iter().zip(b) {
        s += x * y;
    }
    s
}

/// Lower Cholesky factor of `a + shift * I`. Only the lower triangle of `a` is read.
pub(crate) fn cholesky_shifted(a: ArrayView2<f64>, shift: f64) -> Result<Array2<f64>, PivotFailure> {
    let n = a.nrows();
    let mut l = Array2::<f64>::zeros((n, n));
    let ls = l.as_slice_mut().expect("fresh array is contiguous");
    for j in 0..n {
        let row_j = &mut ls[j * n..(j + 1) * n];
        let d = a[[j, j]] + shift - dot(&row_j[..j], &row_j[..j]);
        if !(d > 0.0) || !d.is_finite() {
            return Err(PivotFailure { pivot: j, value: d });
        }
        let ljj = d.sqrt();
        row_j[j] = ljj;
        for i in (j + 1)..n {
            let (upper, lower) = ls.split_at_mut(i * n);
            let row_j = &upper[j * n..j * n + j];
            let row_i = &mut lower[..n];
            let v = (a[[i, j]] - dot(&row_i[..j], row_j)) / ljj;
            row_i[j] = v;
        }
    }
    Ok(l)
}

/// Factor of a positive semidefinite matrix: `a = F Fᵀ` with `F` lower
/// triangular. Pivots below `rel_tol * max(diag a)` are treated as exact zeros
/// and their columns left empty; a pivot more negative than that is an error.
pub(crate) fn psd_factor(a: ArrayView2<f64>, rel_tol: f64) -> Result<Array2<f64>, PivotFailure> {
    let n = a.nrows();
    let scale = a.diag().iter().fold(0.0_f64, |m, &x| m.max(x.abs()));
    let tol = rel_tol * scale.max(f64::MIN_POSITIVE);
    let mut l = Array2::<f64>::zeros((n, n));
    for j in 0..n {
        let d = a[[j, j]] - dot_rows(&l, j, j, j);
        if !d.is_finite() || d < -tol {
            return Err(PivotFailure { pivot: j, value: d });
        }
        if d <= tol {
            continue;
        }
        let ljj = d.sqrt();
        l[[j, j]] = ljj;
        for i in (j + 1)..n {
            l[[i, j]] = (a[[i, j]] - dot_rows(&l, i, j, j)) / ljj;
        }
    }
    Ok(l)
}

fn dot_rows(l: &Array2<f64>, i: usize, j: usize, len: usize) -> f64 {
    let ri = l.row(i);
    let rj = l.row(j);
    let mut s = 0.0;
    for k in 0..len {
        s += ri[k] * rj[k];
    }
    s
}

/// Solves `L X = B` in place for lower-triangular `L`.
pub(crate) fn solve_lower_in_place(l: &Array2<f64>, b: &mut Array2<f64>) {
    let n = l.nrows();
    let d = b.ncols();
    debug_assert_eq!(b.nrows(), n);
    let bs = b.as_slice_mut().expect("standard layout");
    for i in 0..n {
        let (done, rest) = bs.split_at_mut(i * d);
        let row_i = &mut rest[..d];
        for k in 0..i {
            let lik = l[[i, k]];
            if lik != 0.0 {
                let row_k = &done[k * d..(k + 1) * d];
                for (x, y) in row_i.iter_mut().zip(row_k) {
                    *x -= lik * y;
                }
            }
        }
        let lii = l[[i, i]];
        for x in row_i.iter_mut() {
            *x /= lii;
        }
    }
}

/// Solves `Lᵀ X = B` in place for lower-triangular `L`.
pub(crate) fn solve_lower_transpose_in_place(l: &Array2<f64>, b: &mut Array2<f64>) {
    let n = l.nrows();
    let d = b.ncols();
    debug_assert_eq!(b.nrows(), n);
    let bs = b.as_slice_mut().expect("standard layout");
    for i in (0..n).rev() {
        let (head, rest) = bs.split_at_mut(i * d);
        let row_i = &mut rest[..d];
        let lii = l[[i, i]];
        for x in row_i.iter_mut() {
            *x /= lii;
        }
        for k in 0..i {
            let lik = l[[i, k]];
            if lik != 0.0 {
                let row_k = &mut head[k * d..(k + 1) * d];
                for (x, y) in row_k.iter_mut().zip(row_i.iter()) {
                    *x -= lik * y;
                }
            }
        }
    }
}

/// A successful factorization `K + jitter·I = L Lᵀ`.
#[derive(Debug, Clone)]
pub struct Cholesky {
    factor: Array2<f64>,
    jitter: f64,
}

impl Cholesky {
    pub(crate) fn new(factor: Array2<f64>, jitter: f64) -> Self {
        Self { factor, jitter }
    }

    /// Lower-triangular factor `L`.
    pub fn factor(&self) -> &Array2<f64> {
        &self.factor
    }

    /// Diagonal shift that was added before factorization succeeded.
    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    pub fn dim(&self) -> usize {
        self.factor.nrows()
    }

    /// `log |K + jitter·I|`.
    pub fn log_det(&self) -> f64 {
        2.0 * self.factor.diag().iter().map(|x| x.ln()).sum::<f64>()
    }

    /// `L⁻¹ B`.
    pub fn whiten(&self, b: &Array2<f64>) -> Array2<f64> {
        let mut x = b.as_standard_layout().into_owned();
        solve_lower_in_place(&self.factor, &mut x);
        x
    }

    /// `(K + jitter·I)⁻¹ B`.
    pub fn solve(&self, b: &Array2<f64>) -> Array2<f64> {
        let mut x = self.whiten(b);
        solve_lower_transpose_in_place(&self.factor, &mut x);
        x
    }

    pub fn solve_vec(&self, b: &Array1<f64>) -> Array1<f64> {
        let col = b.view().insert_axis(Axis(1)).to_owned();
        self.solve(&col).index_axis_move(Axis(1), 0)
    }

    /// `(K + jitter·I)⁻¹`, symmetrized.
    pub fn inverse(&self) -> Array2<f64> {
        let n = self.dim();
        let mut inv = self.solve(&Array2::eye(n));
        symmetrize(&mut inv);
        inv
    }
}

/// Replaces `a` by `(a + aᵀ)/2`.
pub(crate) fn symmetrize(a: &mut Array2<f64>) {
    let n = a.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (a[[i, j]] + a[[j, i]]);
            a[[i, j]] = v;
            a[[j, i]] = v;
        }
    }
}

/// Largest absolute asymmetry relative to the largest absolute entry.
pub(crate) fn asymmetry(a: &Array2<f64>) -> f64 {
    let n = a.nrows();
    let mut scale = 0.0_f64;
    let mut worst = 0.0_f64;
    for i in 0..n {
        for j in 0..n {
            scale = scale.max(a[[i, j]].abs());
            if j > i {
                worst = worst.max((a[[i, j]] - a[[j, i]]).abs());
            }
        }
    }
    if scale == 0.0 {
        0.0
    } else {
        worst / scale
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn factor_reconstructs() {
        let a = array![[4.0, 2.0, 0.4], [2.0, 5.0, 1.0], [0.4, 1.0, 3.0]];
        let l = cholesky_shifted(a.view(), 0.0).unwrap();
        let back = l.dot(&l.t());
        for (x, y) in back.iter().zip(a.iter()) {
            assert!((x - y).abs() < 1e-14);
        }
    }

    #[test]
    fn solves_match_inverse() {
        let a = array![[4.0, 2.0, 0.4], [2.0, 5.0, 1.0], [0.4, 1.0, 3.0]];
        let chol = Cholesky::new(cholesky_shifted(a.view(), 0.0).unwrap(), 0.0);
        let inv = chol.inverse();
        let id = a.dot(&inv);
        for i in 0..3 {
            for j in 0..3 {
                let e = if i == j { 1.0 } else { 0.0 };
                assert!((id[[i, j]] - e).abs() < 1e-13);
            }
        }
        let det: f64 = 4.0 * (5.0 * 3.0 - 1.0) - 2.0 * (2.0 * 3.0 - 0.4) + 0.4 * (2.0 - 5.0 * 0.4);
        assert!((chol.log_det() - det.ln()).abs() < 1e-13);
    }

    #[test]
    fn indefinite_reports_pivot() {
        let a = array![[1.0, 2.0], [2.0, 1.0]];
        let err = cholesky_shifted(a.view(), 0.0).unwrap_err();
        assert_eq!(err.pivot, 1);
        assert!((err.value + 3.0).abs() < 1e-12);
    }

    #[test]
    fn psd_factor_handles_rank_one() {
        let a = array![[1.0, 1.0], [1.0, 1.0]];
        let f = psd_factor(a.view(), 1e-12).unwrap();
        assert_eq!(f.row(0), f.row(1));
        assert!(psd_factor(array![[1.0, 2.0], [2.0, 1.0]].view(), 1e-12).is_err());
    }
}
