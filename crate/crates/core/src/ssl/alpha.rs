use faer::linalg::solvers::Solve;
use faer::{Mat, MatRef, Side};

use crate::error::{Error, Result};
use crate::image::{Label, ScribbleMap};

/// Sparse label vector `y`: +1 foreground, -1 background.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LabeledPoints {
    pub indices: Vec<usize>,
    pub targets: Vec<f64>,
}

impl LabeledPoints {
    pub fn new(indices: Vec<usize>, targets: Vec<f64>) -> Self {
        assert_eq!(indices.len(), targets.len());
        Self { indices, targets }
    }

    pub fn from_scribbles(s: &ScribbleMap) -> Self {
        let (indices, targets) = s.seeds().map(|(i, l)| (i, l.target())).unzip();
        Self { indices, targets }
    }

    pub fn from_labels(labels: &[(usize, Label)]) -> Self {
        let (indices, targets) = labels.iter().map(|&(i, l)| (i, l.target())).unzip();
        Self { indices, targets }
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn negated(&self) -> Self {
        Self {
            indices: self.indices.clone(),
            targets: self.targets.iter().map(|t| -t).collect(),
        }
    }

    /// Dense `y` of length `n`.
    pub fn dense(&self, n: usize) -> Vec<f64> {
        let mut y = vec![0.0; n];
        for (&i, &t) in self.indices.iter().zip(&self.targets) {
            y[i] = t;
        }
        y
    }

    pub(crate) fn validate(&self, n: usize, lambda: f64) -> Result<()> {
        if !(lambda > 0.0) {
            return Err(Error::InvalidParam("lambda must be positive".into()));
        }
        if self.indices.iter().any(|&i| i >= n) {
            return Err(Error::InvalidParam("label index out of range".into()));
        }
        if !self.targets.iter().any(|&t| t > 0.0) || !self.targets.iter().any(|&t| t < 0.0) {
            return Err(Error::Annotation(
                "need at least one foreground and one background label".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlphaSolution {
    pub alpha: Vec<f64>,
    /// The system was not positive definite and was solved with a small ridge.
    pub ridge: bool,
}

pub const RIDGE: f64 = 1e-10;

/// Solves the symmetric `m x m` system `a x = b`, falling back to a ridge
/// when Cholesky fails.
pub fn solve_symmetric(a: &Mat<f64>, b: &[f64]) -> Result<AlphaSolution> {
    let out = solve_symmetric_inner(a, b);
    crate::simd::clear_upper_state();
    out
}

fn solve_symmetric_inner(a: &Mat<f64>, b: &[f64]) -> Result<AlphaSolution> {
    let m = a.nrows();
    let rhs = Mat::from_fn(m, 1, |i, _| b[i]);
    let finite = |x: &Mat<f64>| (0..m).all(|i| x[(i, 0)].is_finite());
    if let Ok(llt) = a.llt(Side::Lower) {
        let x = llt.solve(&rhs);
        if finite(&x) {
            return Ok(AlphaSolution {
                alpha: (0..m).map(|i| x[(i, 0)]).collect(),
                ridge: false,
            });
        }
    }
    let mut reg = a.clone();
    for i in 0..m {
        reg[(i, i)] += RIDGE;
    }
    let x = match reg.llt(Side::Lower) {
        Ok(llt) => llt.solve(&rhs),
        Err(_) => reg.partial_piv_lu().solve(&rhs),
    };
    if !finite(&x) {
        return Err(Error::Numeric("coefficient system is singular".into()));
    }
    Ok(AlphaSolution {
        alpha: (0..m).map(|i| x[(i, 0)]).collect(),
        ridge: true,
    })
}

/// `alpha = (Sigma + U' L U)^-1 U' L y` with `L = lambda` on labeled rows.
/// Only the labeled rows of `U` are touched.
pub fn solve_alpha(
    u: MatRef<'_, f64>,
    sigma: MatRef<'_, f64>,
    labels: &LabeledPoints,
    lambda: f64,
) -> Result<AlphaSolution> {
    let (n, m) = (u.nrows(), u.ncols());
    labels.validate(n, lambda)?;
    assert_eq!((sigma.nrows(), sigma.ncols()), (m, m));
    let ul = Mat::from_fn(labels.len(), m, |r, k| u[(labels.indices[r], k)]);
    solve_gathered(ul.as_ref(), sigma, &labels.targets, lambda)
}

/// [`solve_alpha`] given only the labeled rows `ul` of `U`.
pub fn solve_gathered(
    ul: MatRef<'_, f64>,
    sigma: MatRef<'_, f64>,
    targets: &[f64],
    lambda: f64,
) -> Result<AlphaSolution> {
    let (l, m) = (ul.nrows(), ul.ncols());
    assert_eq!(targets.len(), l);
    let scaled = Mat::from_fn(l, m, |r, k| lambda * ul[(r, k)]);
    let mut a = ul.transpose() * &scaled;
    for j in 0..m {
        for i in 0..m {
            a[(i, j)] += sigma[(i, j)];
        }
    }
    let b: Vec<f64> = (0..m)
        .map(|k| (0..l).map(|r| scaled[(r, k)] * targets[r]).sum())
        .collect();
    solve_symmetric(&a, &b)
}

/// [`solve_alpha`] with a diagonal `Sigma`.
pub fn solve_alpha_diag(
    u: MatRef<'_, f64>,
    sigma: &[f64],
    labels: &LabeledPoints,
    lambda: f64,
) -> Result<AlphaSolution> {
    let s = Mat::from_fn(sigma.len(), sigma.len(), |i, j| if i == j { sigma[i] } else { 0.0 });
    solve_alpha(u, s.as_ref(), labels, lambda)
}

/// Reference formulation that treats `Lambda` as a full `n x n` operator and
/// forms `Lambda U` and `Lambda y` with plain loops over every entry. Costs
/// `O(n^2 m)`; kept as the timing baseline.
pub fn solve_alpha_unoptimized(
    u: MatRef<'_, f64>,
    sigma: &[f64],
    labels: &LabeledPoints,
    lambda: f64,
) -> Result<AlphaSolution> {
    let (n, m) = (u.nrows(), u.ncols());
    labels.validate(n, lambda)?;
    let mut diag = vec![0.0; n];
    for &i in &labels.indices {
        diag[i] = lambda;
    }
    let y = labels.dense(n);
    let lambda_at = |i: usize, j: usize| if i == j { diag[i] } else { 0.0 };
    let mut lu = vec![0.0; n * m];
    let mut ly = vec![0.0; n];
    for i in 0..n {
        for j in 0..n {
            let l = lambda_at(i, j);
            ly[i] += l * y[j];
            for k in 0..m {
                lu[i * m + k] += l * u[(j, k)];
            }
        }
    }
    let mut a = Mat::from_fn(m, m, |i, j| if i == j { sigma[i] } else { 0.0 });
    let mut b = vec![0.0; m];
    for i in 0..n {
        for p in 0..m {
            b[p] += u[(i, p)] * ly[i];
            for q in 0..m {
                a[(p, q)] += u[(i, p)] * lu[i * m + q];
            }
        }
    }
    solve_symmetric(&a, &b)
}

/// `f = U alpha`.
pub fn smoothness(u: MatRef<'_, f64>, alpha: &[f64]) -> Vec<f64> {
    assert_eq!(u.ncols(), alpha.len());
    let a = Mat::from_fn(alpha.len(), 1, |i, _| alpha[i]);
    let f = u * &a;
    crate::simd::clear_upper_state();
    (0..u.nrows()).map(|i| f[(i, 0)]).collect()
}

/// `alpha' Sigma alpha + (U alpha - y)' Lambda (U alpha - y)`.
pub fn objective(
    u: MatRef<'_, f64>,
    sigma: MatRef<'_, f64>,
    labels: &LabeledPoints,
    lambda: f64,
    alpha: &[f64],
) -> f64 {
    let m = alpha.len();
    let mut reg = 0.0;
    for i in 0..m {
        for j in 0..m {
            reg += alpha[i] * sigma[(i, j)] * alpha[j];
        }
    }
    let fit: f64 = labels
        .indices
        .iter()
        .zip(&labels.targets)
        .map(|(&i, &t)| {
            let fi: f64 = (0..m).map(|k| u[(i, k)] * alpha[k]).sum();
            lambda * (fi - t).powi(2)
        })
        .sum();
    reg + fit
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_point_constant_column() {
        let u = Mat::from_fn(5, 1, |_, _| 1.0);
        let labels = LabeledPoints::new(vec![2, 4], vec![1.0, -1.0]);
        // one FG and one BG at the same constant value: fit averages to 0
        let s = solve_alpha_diag(u.as_ref(), &[0.0], &labels, 100.0).unwrap();
        assert!(s.alpha[0].abs() < 1e-12);
        // 1x1 algebra with a single positive and a far negative weightless label
        let labels = LabeledPoints::new(vec![1, 3], vec![1.0, -1.0]);
        let u = Mat::from_fn(5, 1, |i, _| if i == 3 { 0.0 } else { 1.0 });
        let s = solve_alpha_diag(u.as_ref(), &[0.0], &labels, 100.0).unwrap();
        assert!((s.alpha[0] - 1.0).abs() < 1e-12);
        assert!(!s.ridge);
    }

    #[test]
    fn needs_both_classes() {
        let u = Mat::from_fn(4, 2, |i, j| (i + j) as f64);
        let labels = LabeledPoints::new(vec![0], vec![1.0]);
        assert!(matches!(
            solve_alpha_diag(u.as_ref(), &[0.1, 0.2], &labels, 1.0),
            Err(Error::Annotation(_))
        ));
    }

    #[test]
    fn singular_system_uses_ridge() {
        let u = Mat::<f64>::zeros(4, 2);
        let labels = LabeledPoints::new(vec![0, 1], vec![1.0, -1.0]);
        let s = solve_alpha_diag(u.as_ref(), &[0.0, 0.0], &labels, 10.0).unwrap();
        assert!(s.ridge);
        assert_eq!(s.alpha, vec![0.0, 0.0]);
    }

    #[test]
    fn smoothness_cases() {
        let u = Mat::from_fn(3, 1, |_, _| 1.0);
        assert_eq!(smoothness(u.as_ref(), &[2.0]), vec![2.0; 3]);
        let u = Mat::from_fn(3, 2, |i, j| (i * 2 + j) as f64);
        assert_eq!(smoothness(u.as_ref(), &[0.0, 0.0]), vec![0.0; 3]);
    }
}
