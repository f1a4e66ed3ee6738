//! Principal component rotation of feature matrices.

use faer::{Mat, Side};

use super::{ColumnOrigin, FeatureMatrix};
use crate::error::{Error, Result};

/// How many principal components to keep.
#[derive(Debug, Clone, Copy, Default, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Retain {
    /// Every component with non-negligible variance (pure decorrelation).
    #[default]
    AllNonzero,
    /// Smallest prefix covering at least this fraction of total variance.
    Fraction(f64),
    Count(usize),
}

#[derive(Debug, Clone)]
pub struct PcaBasis {
    pub mean: Vec<f64>,
    /// d x d' matrix whose columns are the retained unit components.
    pub components: Mat<f64>,
    /// Variance along each retained component, nonincreasing.
    pub variances: Vec<f64>,
}

impl PcaBasis {
    pub fn n_components(&self) -> usize {
        self.variances.len()
    }

    pub fn reconstruct(&self, projected: &Mat<f64>) -> Mat<f64> {
        let mut out = projected * self.components.transpose();
        for j in 0..out.ncols() {
            for i in 0..out.nrows() {
                out[(i, j)] += self.mean[j];
            }
        }
        out
    }
}

// Relative to the largest variance; anything below is numerical noise.
const VARIANCE_FLOOR: f64 = 1e-10;

pub fn pca_rotate(fm: &FeatureMatrix, retain: Retain) -> Result<(FeatureMatrix, PcaBasis)> {
    let x = &fm.values;
    let (n, d) = (x.nrows(), x.ncols());
    if n < 2 || d == 0 {
        return Err(Error::DegenerateData(format!(
            "PCA needs at least 2 rows and 1 column, got {n}x{d}"
        )));
    }
    let mean: Vec<f64> = (0..d)
        .map(|j| x.col(j).iter().sum::<f64>() / n as f64)
        .collect();
    let centered = Mat::from_fn(n, d, |i, j| x[(i, j)] - mean[j]);
    let mut cov = centered.transpose() * &centered;
    cov *= faer::Scale(1.0 / (n - 1) as f64);

    let evd = cov
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Numeric(format!("covariance eigendecomposition failed: {e:?}")))?;
    let vals = evd.S().column_vector();
    let vecs = evd.U();
    // faer sorts ascending; walk from the top.
    let order: Vec<usize> = (0..d).rev().collect();
    let top = vals[order[0]].max(0.0);
    if top <= 0.0 || !top.is_finite() {
        return Err(Error::DegenerateData(
            "all feature rows are identical (zero variance)".into(),
        ));
    }
    let nonzero = order
        .iter()
        .take_while(|&&k| vals[k] > VARIANCE_FLOOR * top)
        .count();
    let keep = match retain {
        Retain::AllNonzero => nonzero,
        Retain::Count(c) => c.clamp(1, nonzero),
        Retain::Fraction(f) => {
            let total: f64 = order[..nonzero].iter().map(|&k| vals[k]).sum();
            let mut acc = 0.0;
            let mut c = 0;
            for &k in &order[..nonzero] {
                acc += vals[k];
                c += 1;
                if acc >= f * total {
                    break;
                }
            }
            c
        }
    };

    let mut components = Mat::zeros(d, keep);
    for (c, &k) in order[..keep].iter().enumerate() {
        // Fix the sign so the largest-magnitude loading is positive.
        let col = vecs.col(k);
        let (mut best, mut sign) = (0.0, 1.0);
        for i in 0..d {
            if col[i].abs() > best {
                best = col[i].abs();
                sign = col[i].signum();
            }
        }
        for i in 0..d {
            components[(i, c)] = sign * col[i];
        }
    }
    let variances = order[..keep].iter().map(|&k| vals[k]).collect();
    let projected = &centered * &components;
    crate::simd::clear_upper_state();
    let rotated = FeatureMatrix {
        values: projected,
        columns: (0..keep).map(ColumnOrigin::Principal).collect(),
    };
    Ok((
        rotated,
        PcaBasis {
            mean,
            components,
            variances,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn fm(values: Mat<f64>) -> FeatureMatrix {
        let d = values.ncols();
        FeatureMatrix {
            values,
            columns: (0..d).map(ColumnOrigin::Principal).collect(),
        }
    }

    fn column_cov(m: &Mat<f64>, a: usize, b: usize) -> f64 {
        let n = m.nrows();
        let ma = m.col(a).iter().sum::<f64>() / n as f64;
        let mb = m.col(b).iter().sum::<f64>() / n as f64;
        (0..n).map(|i| (m[(i, a)] - ma) * (m[(i, b)] - mb)).sum::<f64>() / (n - 1) as f64
    }

    #[test]
    fn axis_aligned_data_gives_axis_components() {
        let x = Mat::from_fn(4, 3, |i, j| {
            let patterns = [[1.0, 5.0, 2.5], [-1.0, 5.0, -2.5], [1.0, -5.0, -2.5], [-1.0, -5.0, 2.5]];
            patterns[i][j]
        });
        let (_, basis) = pca_rotate(&fm(x), Retain::AllNonzero).unwrap();
        // Expected order by variance: axis 1, axis 2, axis 0.
        let expect_axis = [1, 2, 0];
        for (c, &axis) in expect_axis.iter().enumerate() {
            for i in 0..3 {
                let want = if i == axis { 1.0 } else { 0.0 };
                assert!((basis.components[(i, c)].abs() - want).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn rank_one_keeps_one() {
        let x = Mat::from_fn(50, 4, |i, j| (i as f64) * [1.0, -2.0, 0.5, 3.0][j]);
        let (out, basis) = pca_rotate(&fm(x), Retain::AllNonzero).unwrap();
        assert_eq!(basis.n_components(), 1);
        assert_eq!(out.values.ncols(), 1);
    }

    #[test]
    fn identical_rows_are_degenerate() {
        let x = Mat::from_fn(10, 3, |_, j| j as f64);
        assert!(matches!(
            pca_rotate(&fm(x), Retain::AllNonzero),
            Err(Error::DegenerateData(_))
        ));
    }

    #[test]
    fn full_reconstruction_and_decorrelation() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let x = Mat::from_fn(100, 5, |_, _| rng.random::<f64>());
        let (out, basis) = pca_rotate(&fm(x.clone()), Retain::AllNonzero).unwrap();
        assert_eq!(basis.n_components(), 5);
        let back = basis.reconstruct(&out.values);
        for i in 0..100 {
            for j in 0..5 {
                assert!((back[(i, j)] - x[(i, j)]).abs() < 1e-8);
            }
        }
        // orthonormal components
        let g = basis.components.transpose() * &basis.components;
        for a in 0..5 {
            for b in 0..5 {
                let want = if a == b { 1.0 } else { 0.0 };
                assert!((g[(a, b)] - want).abs() < 1e-8);
            }
        }
        for a in 0..5 {
            for b in 0..a {
                let rel = column_cov(&out.values, a, b).abs() / basis.variances[0];
                assert!(rel < 1e-6);
            }
            if a > 0 {
                assert!(basis.variances[a] <= basis.variances[a - 1]);
            }
        }
    }

    #[test]
    fn fraction_retention() {
        let x = Mat::from_fn(4, 2, |i, j| [[10.0, 0.1], [-10.0, -0.1], [10.0, -0.1], [-10.0, 0.1]][i][j]);
        let (_, b) = pca_rotate(&fm(x.clone()), Retain::Fraction(0.9)).unwrap();
        assert_eq!(b.n_components(), 1);
        let (_, b) = pca_rotate(&fm(x), Retain::Count(5)).unwrap();
        assert_eq!(b.n_components(), 2);
    }
}
