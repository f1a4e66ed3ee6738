use std::cmp::Ordering;

use faer::{Mat, MatRef, Side};
use serde::{Deserialize, Serialize};

use super::histogram::DensityHistogram;
use crate::error::{Error, Result};

/// A numerical eigenfunction of the density-weighted Laplacian along one
/// feature dimension, tabulated at the histogram bin centers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Eigenfunction {
    pub dim_index: usize,
    /// Position within its dimension's spectrum, smallest first.
    pub index: usize,
    pub bin_centers: Vec<f64>,
    pub values: Vec<f64>,
    pub sigma: f64,
    /// Participation ratio of the function under the sample density: near
    /// one for functions spread over all samples, near the mass of a single
    /// bin for functions concentrated there.
    pub support: f64,
}

impl Eigenfunction {
    /// Linear interpolation between bin centers, clamped at both ends.
    pub fn eval(&self, v: f64) -> f64 {
        let c = &self.bin_centers;
        let g = &self.values;
        let last = c.len() - 1;
        if last == 0 || v <= c[0] {
            return g[0];
        }
        if v >= c[last] {
            return g[last];
        }
        let pos = (v - c[0]) / (c[1] - c[0]);
        let k = (pos.floor() as usize).min(last - 1);
        let t = pos - k as f64;
        g[k] + t * (g[k + 1] - g[k])
    }

    fn is_constant(&self) -> bool {
        let mean = self.values.iter().sum::<f64>() / self.values.len() as f64;
        self.values.iter().all(|v| (v - mean).abs() < CONSTANT_TOLERANCE)
    }
}

const CONSTANT_TOLERANCE: f64 = 1e-6;

/// Operators of the discretized eigenproblem for one histogram.
#[derive(Debug, Clone)]
pub struct DiscreteOperators {
    /// `D~ - P W~ P`
    pub lhs: Mat<f64>,
    /// Diagonal of `P D^`.
    pub rhs_diag: Vec<f64>,
}

pub fn floored_probs(h: &DensityHistogram) -> Vec<f64> {
    let floor = 1e-10 / h.bins() as f64;
    h.probs.iter().map(|&p| p.max(floor)).collect()
}

pub fn discrete_operators(h: &DensityHistogram, eps: f64) -> DiscreteOperators {
    let b = h.bins();
    let c = &h.bin_centers;
    let p = floored_probs(h);
    let w = Mat::from_fn(b, b, |i, j| (-(c[i] - c[j]).powi(2) / (2.0 * eps * eps)).exp());
    let pwp = Mat::from_fn(b, b, |i, j| p[i] * w[(i, j)] * p[j]);
    let d_tilde: Vec<f64> = (0..b).map(|j| (0..b).map(|i| pwp[(i, j)]).sum()).collect();
    let d_hat: Vec<f64> = (0..b).map(|j| (0..b).map(|i| p[i] * w[(i, j)]).sum()).collect();
    let lhs = Mat::from_fn(b, b, |i, j| {
        let d = if i == j { d_tilde[i] } else { 0.0 };
        d - pwp[(i, j)]
    });
    let rhs_diag = (0..b).map(|i| p[i] * d_hat[i]).collect();
    DiscreteOperators { lhs, rhs_diag }
}

/// `max |(D~ - P W~ P) g - sigma P D^ g| / max |g|`.
pub fn relative_residual(ops: &DiscreteOperators, g: &[f64], sigma: f64) -> f64 {
    let b = g.len();
    let mut worst = 0.0f64;
    for i in 0..b {
        let lg: f64 = (0..b).map(|j| ops.lhs[(i, j)] * g[j]).sum();
        worst = worst.max((lg - sigma * ops.rhs_diag[i] * g[i]).abs());
    }
    let scale = g.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    if scale == 0.0 {
        worst
    } else {
        worst / scale
    }
}

/// Solves `(D~ - P W~ P) g = sigma P D^ g` on the bin centers and returns
/// the `count` smallest pairs, normalized to `g' P D^ g = 1` with the first
/// nonzero entry positive.
pub fn solve_eigenfunctions(
    h: &DensityHistogram,
    eps: f64,
    count: usize,
    dim_index: usize,
) -> Result<Vec<Eigenfunction>> {
    let b = h.bins();
    if !(eps > 0.0) {
        return Err(Error::InvalidParam("eigenfunction bandwidth must be positive".into()));
    }
    if count > b {
        return Err(Error::InvalidParam(format!(
            "requested {count} eigenfunctions from {b} bins"
        )));
    }
    let c = &h.bin_centers;
    let p = floored_probs(h);
    let w = Mat::from_fn(b, b, |i, j| (-(c[i] - c[j]).powi(2) / (2.0 * eps * eps)).exp());
    let dh: Vec<f64> = (0..b)
        .map(|j| p[j] * (0..b).map(|i| p[i] * w[(i, j)]).sum::<f64>())
        .collect();
    // Symmetric form: h = (P D^)^{1/2} g. D~ equals P D^, so the diagonal
    // of the normalized operator is 1 - off.
    let inv_sqrt: Vec<f64> = dh.iter().map(|d| 1.0 / d.sqrt()).collect();
    let sym = Mat::from_fn(b, b, |i, j| {
        let off = p[i] * w[(i, j)] * p[j] * inv_sqrt[i] * inv_sqrt[j];
        if i == j {
            1.0 - off
        } else {
            -off
        }
    });
    // The constant function is an exact null vector; in symmetric form it
    // is sqrt(dh). The rest of the spectrum is solved on its orthogonal
    // complement, spanned by all but the first column of the Householder
    // reflection that maps e1 onto it.
    let total: f64 = dh.iter().sum();
    let mut v: Vec<f64> = dh.iter().map(|d| (d / total).sqrt()).collect();
    v[0] += 1.0;
    let vv: f64 = v.iter().map(|x| x * x).sum();
    let q = Mat::from_fn(b, b - 1, |i, j| {
        let e = if i == j + 1 { 1.0 } else { 0.0 };
        e - 2.0 * v[i] * v[j + 1] / vv
    });
    let reduced = q.transpose() * (&sym * &q);
    let evd = reduced
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Numeric(format!("bin eigendecomposition failed: {e:?}")))?;
    let vals = evd.S().column_vector();
    let vecs = &q * evd.U();

    let mut out = Vec::with_capacity(count);
    if count > 0 {
        out.push(Eigenfunction {
            dim_index,
            index: 0,
            bin_centers: c.clone(),
            values: vec![1.0 / total.sqrt(); b],
            sigma: 0.0,
            support: 1.0,
        });
    }
    for k in 1..count {
        let mut g: Vec<f64> = (0..b).map(|i| vecs[(i, k - 1)] * inv_sqrt[i]).collect();
        let norm: f64 = g.iter().zip(&dh).map(|(g, d)| g * g * d).sum::<f64>().sqrt();
        let scale_max = g.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let first = g
            .iter()
            .copied()
            .find(|v| v.abs() > 1e-12 * scale_max)
            .unwrap_or(1.0);
        let s = first.signum() / norm;
        for v in &mut g {
            *v *= s;
        }
        out.push(Eigenfunction {
            dim_index,
            index: k,
            bin_centers: c.clone(),
            support: participation(&h.probs, &g),
            values: g,
            sigma: vals[k - 1],
        });
    }
    Ok(out)
}

/// `(sum p g^2)^2 / (sum p g^4)` with `p` normalized to unit mass.
pub fn participation(probs: &[f64], g: &[f64]) -> f64 {
    let mass: f64 = probs.iter().sum();
    let (mut m2, mut m4) = (0.0, 0.0);
    for (p, v) in probs.iter().zip(g) {
        let v2 = v * v;
        m2 += p * v2;
        m4 += p * v2 * v2;
    }
    if m4 > 0.0 {
        m2 * m2 / (m4 * mass)
    } else {
        0.0
    }
}

/// Eigenfunctions merged across dimensions.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EigenfunctionSet {
    /// Sorted by eigenvalue, ascending.
    pub functions: Vec<Eigenfunction>,
    /// Fewer nonconstant functions existed than were requested.
    pub shortfall: bool,
}

impl EigenfunctionSet {
    pub fn len(&self) -> usize {
        self.functions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.functions.is_empty()
    }

    pub fn sigmas(&self) -> Vec<f64> {
        self.functions.iter().map(|f| f.sigma).collect()
    }
}

pub fn select_smallest(per_dim: Vec<Vec<Eigenfunction>>, m: usize, min_support: f64) -> EigenfunctionSet {
    let mut all: Vec<Eigenfunction> = per_dim
        .into_iter()
        .flatten()
        .filter(|f| !f.is_constant() && f.support >= min_support)
        .collect();
    all.sort_by(|a, b| {
        a.sigma
            .partial_cmp(&b.sigma)
            .unwrap_or(Ordering::Equal)
            .then(a.dim_index.cmp(&b.dim_index))
            .then(a.index.cmp(&b.index))
    });
    let shortfall = all.len() < m;
    all.truncate(m);
    EigenfunctionSet {
        functions: all,
        shortfall,
    }
}

/// Evaluates every eigenfunction at each row's value in its dimension.
pub fn interpolate_eigenvectors(efs: &EigenfunctionSet, features: MatRef<'_, f64>) -> Mat<f64> {
    let n = features.nrows();
    let mut u = Mat::zeros(n, efs.len());
    for (k, f) in efs.functions.iter().enumerate() {
        assert!(f.dim_index < features.ncols(), "eigenfunction dimension out of range");
        let col = features.col(f.dim_index);
        for i in 0..n {
            u[(i, k)] = f.eval(col[i]);
        }
    }
    u
}
