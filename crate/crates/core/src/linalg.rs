//! Thin dense helpers over `faer`.

use faer::linalg::solvers::Solve;
use faer::{Mat, Side};

use crate::error::{QueError, Result};

pub fn identity(n: usize) -> Mat<f64> {
    Mat::identity(n, n)
}

pub fn diag(values: &[f64]) -> Mat<f64> {
    let n = values.len();
    Mat::from_fn(n, n, |i, j| if i == j { values[i] } else { 0.0 })
}

/// `diag(d) · a`
pub fn scale_rows(d: &[f64], a: &Mat<f64>) -> Mat<f64> {
    Mat::from_fn(a.nrows(), a.ncols(), |i, j| d[i] * a[(i, j)])
}

/// `a · diag(d)`
pub fn scale_cols(a: &Mat<f64>, d: &[f64]) -> Mat<f64> {
    Mat::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)] * d[j])
}

pub fn transpose(a: &Mat<f64>) -> Mat<f64> {
    a.transpose().to_owned()
}

pub fn symmetrize(a: &Mat<f64>) -> Mat<f64> {
    Mat::from_fn(a.nrows(), a.ncols(), |i, j| 0.5 * (a[(i, j)] + a[(j, i)]))
}

pub fn frobenius(a: &Mat<f64>) -> f64 {
    a.norm_l2()
}

pub fn max_abs(a: &Mat<f64>) -> f64 {
    a.norm_max()
}

pub fn mat_vec(a: &Mat<f64>, x: &[f64]) -> Vec<f64> {
    assert_eq!(a.ncols(), x.len());
    (0..a.nrows())
        .map(|i| (0..a.ncols()).map(|j| a[(i, j)] * x[j]).sum())
        .collect()
}

pub fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

/// `xᵀ A y`
pub fn bilinear(a: &Mat<f64>, x: &[f64], y: &[f64]) -> f64 {
    dot(x, &mat_vec(a, y))
}

/// `Σ w_i x_i y_i`
pub fn weighted_dot(w: &[f64], x: &[f64], y: &[f64]) -> f64 {
    w.iter().zip(x).zip(y).map(|((w, a), b)| w * a * b).sum()
}

pub fn column(a: &Mat<f64>, j: usize) -> Vec<f64> {
    (0..a.nrows()).map(|i| a[(i, j)]).collect()
}

pub fn from_columns(rows: usize, cols: &[Vec<f64>]) -> Mat<f64> {
    Mat::from_fn(rows, cols.len(), |i, j| cols[j][i])
}

/// Rows `idx` of `a`.
pub fn select_rows(a: &Mat<f64>, idx: &[usize]) -> Mat<f64> {
    Mat::from_fn(idx.len(), a.ncols(), |i, j| a[(idx[i], j)])
}

/// The block `a[rows, cols]`.
pub fn select(a: &Mat<f64>, rows: &[usize], cols: &[usize]) -> Mat<f64> {
    Mat::from_fn(rows.len(), cols.len(), |i, j| a[(rows[i], cols[j])])
}

/// Lower Cholesky factor `L` with `a = L Lᵀ`.
pub fn cholesky(a: &Mat<f64>) -> Result<Mat<f64>> {
    let llt = a
        .llt(Side::Lower)
        .map_err(|e| QueError::Numerical(format!("Cholesky factorization failed: {e:?}")))?;
    Ok(llt.L().to_owned())
}

/// Solves `a x = b` for symmetric positive definite `a`.
pub fn solve_spd(a: &Mat<f64>, b: &Mat<f64>) -> Result<Mat<f64>> {
    let llt = a
        .llt(Side::Lower)
        .map_err(|e| QueError::Numerical(format!("Cholesky factorization failed: {e:?}")))?;
    Ok(llt.solve(b))
}

/// Solves `l x = b` for lower triangular `l`.
pub fn solve_lower(l: &Mat<f64>, b: &Mat<f64>) -> Mat<f64> {
    let mut x = b.clone();
    l.solve_lower_triangular_in_place(&mut x);
    x
}

/// Eigenvalues (ascending) and orthonormal eigenvectors of a symmetric matrix.
pub fn sym_eigen(a: &Mat<f64>) -> Result<(Vec<f64>, Mat<f64>)> {
    let evd = a
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| QueError::Numerical(format!("symmetric eigensolver failed: {e:?}")))?;
    let values = (0..a.nrows()).map(|i| evd.S()[i]).collect();
    Ok((values, evd.U().to_owned()))
}

pub fn sym_eigenvalues(a: &Mat<f64>) -> Result<Vec<f64>> {
    a.self_adjoint_eigenvalues(Side::Lower)
        .map_err(|e| QueError::Numerical(format!("symmetric eigensolver failed: {e:?}")))
}

/// Singular values, descending.
pub fn singular_values(a: &Mat<f64>) -> Result<Vec<f64>> {
    if a.nrows() == 0 || a.ncols() == 0 {
        return Ok(Vec::new());
    }
    a.singular_values()
        .map_err(|e| QueError::Numerical(format!("SVD failed: {e:?}")))
}

/// Largest singular value, from the largest eigenvalue of the smaller Gram matrix.
pub fn spectral_norm(a: &Mat<f64>) -> Result<f64> {
    if a.nrows() == 0 || a.ncols() == 0 {
        return Ok(0.0);
    }
    let gram = if a.ncols() <= a.nrows() {
        a.transpose() * a
    } else {
        a * a.transpose()
    };
    let top = sym_eigenvalues(&symmetrize(&gram))?
        .last()
        .copied()
        .unwrap_or(0.0);
    Ok(top.max(0.0).sqrt())
}

/// Largest singular value of `re + i·im`, through the real embedding
/// `[[re, -im], [im, re]]`, which has the same singular values.
pub fn spectral_norm_complex(re: &Mat<f64>, im: &Mat<f64>) -> Result<f64> {
    let (m, n) = (re.nrows(), re.ncols());
    let embed = Mat::from_fn(2 * m, 2 * n, |i, j| match (i < m, j < n) {
        (true, true) => re[(i, j)],
        (true, false) => -im[(i, j - n)],
        (false, true) => im[(i - m, j)],
        (false, false) => re[(i - m, j - n)],
    });
    spectral_norm(&embed)
}

/// Least-squares slope of `y` against `x`.
pub fn fit_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slope_of_a_line() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let y: Vec<f64> = x.iter().map(|v| 3.0 - 0.5 * v).collect();
        assert!((fit_slope(&x, &y) + 0.5).abs() < 1e-14);
    }

    #[test]
    fn cholesky_reconstructs() {
        let a = Mat::from_fn(3, 3, |i, j| if i == j { 4.0 } else { 1.0 });
        let l = cholesky(&a).unwrap();
        let back = &l * l.transpose();
        assert!((&back - &a).norm_max() < 1e-14);
        assert!(cholesky(&Mat::<f64>::zeros(2, 2)).is_err());
    }

    #[test]
    fn eigen_of_diagonal() {
        let (vals, _) = sym_eigen(&diag(&[3.0, 1.0, 2.0])).unwrap();
        assert_eq!(vals, vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn spectral_norm_matches_svd() {
        let a = Mat::from_fn(5, 3, |i, j| ((i * 7 + j * 3) % 5) as f64 - 2.0);
        let svd = singular_values(&a).unwrap()[0];
        assert!((spectral_norm(&a).unwrap() - svd).abs() < 1e-12 * svd);
        assert!((spectral_norm(&transpose(&a)).unwrap() - svd).abs() < 1e-12 * svd);
    }

    #[test]
    fn complex_norm_of_a_rotation() {
        // e^{iθ} · I has norm 1
        let (c, s) = (0.6, 0.8);
        let n = spectral_norm_complex(&diag(&[c, c]), &diag(&[s, s])).unwrap();
        assert!((n - 1.0).abs() < 1e-14);
    }

    #[test]
    fn triangular_solve() {
        let l = Mat::from_fn(3, 3, |i, j| if j <= i { (i + j + 1) as f64 } else { 0.0 });
        let b = Mat::from_fn(3, 2, |i, j| (i + 2 * j) as f64);
        let x = solve_lower(&l, &b);
        assert!((&l * &x - &b).norm_max() < 1e-13);
    }
}
