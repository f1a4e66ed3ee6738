//! Dense graph-Laplacian eigenvectors. Quadratic memory, cubic time; only
//! for small point sets.

use faer::{Mat, MatRef, Side};

use super::alpha::{smoothness, solve_alpha, LabeledPoints};
use crate::error::{Error, Result};

pub const MAX_EXACT_POINTS: usize = 5000;

#[derive(Debug, Clone)]
pub struct ExactEigen {
    /// n x k, columns unit-norm, eigenvalues ascending.
    pub vectors: Mat<f64>,
    pub values: Vec<f64>,
}

fn guard(n: usize) -> Result<()> {
    if n > MAX_EXACT_POINTS {
        return Err(Error::InvalidParam(format!(
            "exact eigenvectors are limited to {MAX_EXACT_POINTS} points, got {n}"
        )));
    }
    Ok(())
}

/// `L = D - W` with `W_ij = exp(-|x_i - x_j|^2 / 2 eps^2)`.
pub fn graph_laplacian(points: MatRef<'_, f64>, eps: f64) -> Result<Mat<f64>> {
    let (n, d) = (points.nrows(), points.ncols());
    guard(n)?;
    if !(eps > 0.0) {
        return Err(Error::InvalidParam("affinity bandwidth must be positive".into()));
    }
    let mut w = Mat::from_fn(n, n, |i, j| {
        let d2: f64 = (0..d).map(|k| (points[(i, k)] - points[(j, k)]).powi(2)).sum();
        (-d2 / (2.0 * eps * eps)).exp()
    });
    let deg: Vec<f64> = (0..n).map(|i| w.col(i).iter().sum()).collect();
    for j in 0..n {
        for i in 0..n {
            w[(i, j)] = -w[(i, j)];
        }
        w[(j, j)] += deg[j];
    }
    Ok(w)
}

pub fn solve_exact_eigenvectors(points: MatRef<'_, f64>, eps: f64, k: usize) -> Result<ExactEigen> {
    let n = points.nrows();
    guard(n)?;
    if k == 0 || k >= n {
        return Err(Error::InvalidParam(format!("need 0 < k < n, got k={k}, n={n}")));
    }
    let l = graph_laplacian(points, eps)?;
    eigen_of_laplacian(&l, k)
}

pub fn eigen_of_laplacian(l: &Mat<f64>, k: usize) -> Result<ExactEigen> {
    let n = l.nrows();
    let evd = l
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Numeric(format!("Laplacian eigendecomposition failed: {e:?}")))?;
    crate::simd::clear_upper_state();
    let s = evd.S().column_vector();
    let u = evd.U();
    let mut vectors = Mat::zeros(n, k);
    for c in 0..k {
        let col = u.col(c);
        // first entry of meaningful magnitude made positive
        let first = col.iter().copied().find(|v| v.abs() > 1e-12).unwrap_or(1.0);
        let s = first.signum();
        for i in 0..n {
            vectors[(i, c)] = s * col[i];
        }
    }
    Ok(ExactEigen {
        vectors,
        values: (0..k).map(|c| s[c]).collect(),
    })
}

/// Smoothness field from exact eigenvectors, with `Sigma = U' L U` formed
/// literally.
#[derive(Debug, Clone)]
pub struct ExactSolution {
    pub eigen: ExactEigen,
    pub sigma: Mat<f64>,
    pub alpha: Vec<f64>,
    pub f: Vec<f64>,
    pub ridge: bool,
}

pub fn exact_smoothness(
    points: MatRef<'_, f64>,
    eps: f64,
    k: usize,
    labels: &LabeledPoints,
    lambda: f64,
) -> Result<ExactSolution> {
    let l = graph_laplacian(points, eps)?;
    if k == 0 || k >= points.nrows() {
        return Err(Error::InvalidParam("need 0 < k < n".into()));
    }
    let eigen = eigen_of_laplacian(&l, k)?;
    let lu = &l * &eigen.vectors;
    let sigma = eigen.vectors.transpose() * &lu;
    crate::simd::clear_upper_state();
    let sol = solve_alpha(eigen.vectors.as_ref(), sigma.as_ref(), labels, lambda)?;
    let f = smoothness(eigen.vectors.as_ref(), &sol.alpha);
    Ok(ExactSolution {
        eigen,
        sigma,
        alpha: sol.alpha,
        f,
        ridge: sol.ridge,
    })
}
