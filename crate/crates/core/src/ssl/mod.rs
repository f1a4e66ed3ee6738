//! Semi-supervised labeling with graph-Laplacian eigenfunctions.
//!
//! The label field is `f = U alpha`, where the columns of `U` are smooth
//! functions of the data and `alpha` minimizes
//! `alpha' Sigma alpha + (U alpha - y)' Lambda (U alpha - y)`.
//! For large point sets `U` comes from eigenfunctions of the data density,
//! computed per feature dimension on a histogram and interpolated back to
//! the points. [`exact`] builds the full graph instead.

pub mod alpha;
pub mod eigenfunction;
pub mod exact;
pub mod histogram;
pub mod toy;

use faer::{Mat, MatRef};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
pub use alpha::{
    objective, smoothness, solve_alpha, solve_alpha_diag, solve_alpha_unoptimized, solve_gathered,
    AlphaSolution, LabeledPoints,
};
pub use eigenfunction::{
    interpolate_eigenvectors, select_smallest, solve_eigenfunctions, Eigenfunction,
    EigenfunctionSet,
};
pub use exact::{exact_smoothness, solve_exact_eigenvectors, ExactEigen, MAX_EXACT_POINTS};
pub use histogram::{histogram_density, DensityHistogram};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SslParams {
    /// Number of eigenfunctions kept across all dimensions.
    pub m: usize,
    pub bins: usize,
    pub lambda: f64,
    /// Bin-center affinity bandwidth in units of the bin width.
    pub bin_eps: f64,
    /// Prepend one constant column with zero eigenvalue to `U`.
    pub bias: bool,
    /// Eigenfunctions whose participation ratio falls below this are not
    /// selected.
    pub min_support: f64,
}

impl Default for SslParams {
    fn default() -> Self {
        Self {
            m: 100,
            bins: 50,
            lambda: 100.0,
            bin_eps: 2.0,
            bias: true,
            min_support: 1e-3,
        }
    }
}

impl SslParams {
    pub fn validate(&self) -> Result<()> {
        if self.m == 0 {
            return Err(Error::InvalidParam("eigenfunction count must be at least 1".into()));
        }
        if self.bins < 2 {
            return Err(Error::InvalidParam("need at least 2 bins".into()));
        }
        if !(self.lambda > 0.0) {
            return Err(Error::InvalidParam("lambda must be positive".into()));
        }
        if !(self.bin_eps > 0.0) {
            return Err(Error::InvalidParam("bin bandwidth must be positive".into()));
        }
        Ok(())
    }
}

/// Which `alpha` solver to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AlphaPath {
    #[default]
    LabeledRows,
    /// The `O(n^2 m)` baseline.
    Unoptimized,
}

#[derive(Debug, Clone)]
pub struct SmoothnessSolution {
    pub functions: EigenfunctionSet,
    /// Interpolated eigenvectors, after the constant column when `bias`.
    pub u: Mat<f64>,
    pub bias: bool,
    pub sigma: Vec<f64>,
    pub alpha: Vec<f64>,
    pub f: Vec<f64>,
    pub lambda: f64,
    pub ridge: bool,
}

/// Histograms and eigenfunctions for every column of `features`.
pub fn fit_eigenfunctions(features: MatRef<'_, f64>, params: &SslParams) -> Result<EigenfunctionSet> {
    params.validate()?;
    let per_dim_count = params.bins.min(params.m + 1);
    let per_dim: Vec<Vec<Eigenfunction>> = (0..features.ncols())
        .into_par_iter()
        .map(|j| -> Result<Vec<Eigenfunction>> {
            let col: Vec<f64> = features.col(j).iter().copied().collect();
            let h = histogram_density(&col, params.bins)?;
            if h.degenerate {
                return Ok(Vec::new());
            }
            solve_eigenfunctions(&h, params.bin_eps * h.bin_width(), per_dim_count, j)
        })
        .collect::<Result<_>>()?;
    crate::simd::clear_upper_state();
    let set = select_smallest(per_dim, params.m, params.min_support);
    if set.is_empty() {
        return Err(Error::DegenerateData(
            "no feature dimension yields a nonconstant eigenfunction".into(),
        ));
    }
    if set.shortfall {
        tracing::warn!(
            requested = params.m,
            available = set.len(),
            "fewer eigenfunctions than requested"
        );
    }
    Ok(set)
}

pub fn eigenfunction_smoothness(
    features: MatRef<'_, f64>,
    labels: &LabeledPoints,
    params: &SslParams,
    path: AlphaPath,
) -> Result<SmoothnessSolution> {
    let functions = fit_eigenfunctions(features, params)?;
    let mut u = interpolate_eigenvectors(&functions, features);
    let mut sigma = functions.sigmas();
    if params.bias {
        u = Mat::from_fn(u.nrows(), u.ncols() + 1, |i, k| if k == 0 { 1.0 } else { u[(i, k - 1)] });
        sigma.insert(0, 0.0);
    }
    let sol = match path {
        AlphaPath::LabeledRows => solve_alpha_diag(u.as_ref(), &sigma, labels, params.lambda)?,
        AlphaPath::Unoptimized => solve_alpha_unoptimized(u.as_ref(), &sigma, labels, params.lambda)?,
    };
    if sol.ridge {
        tracing::warn!("coefficient system needed a ridge");
    }
    let f = smoothness(u.as_ref(), &sol.alpha);
    Ok(SmoothnessSolution {
        functions,
        u,
        bias: params.bias,
        sigma,
        alpha: sol.alpha,
        f,
        lambda: params.lambda,
        ridge: sol.ridge,
    })
}

/// The smoothness field without the `n x m` matrix `U`: `alpha` is solved
/// from the labeled rows and `f = U alpha` is evaluated by combining the
/// eigenfunctions of each dimension into one table first.
#[derive(Debug, Clone)]
pub struct FieldSolution {
    pub functions: EigenfunctionSet,
    /// Leads with the constant term when `bias` is set.
    pub alpha: Vec<f64>,
    pub f: Vec<f64>,
    pub ridge: bool,
}

pub fn eigenfunction_field(
    features: MatRef<'_, f64>,
    labels: &LabeledPoints,
    params: &SslParams,
) -> Result<FieldSolution> {
    labels.validate(features.nrows(), params.lambda)?;
    let functions = fit_eigenfunctions(features, params)?;
    let offset = usize::from(params.bias);
    let m = functions.len() + offset;
    let ul = Mat::from_fn(labels.len(), m, |r, k| {
        if k < offset {
            return 1.0;
        }
        let f = &functions.functions[k - offset];
        f.eval(features[(labels.indices[r], f.dim_index)])
    });
    let mut sigma = functions.sigmas();
    if params.bias {
        sigma.insert(0, 0.0);
    }
    let sigma = Mat::from_fn(m, m, |i, j| if i == j { sigma[i] } else { 0.0 });
    let sol = solve_gathered(ul.as_ref(), sigma.as_ref(), &labels.targets, params.lambda)?;
    if sol.ridge {
        tracing::warn!("coefficient system needed a ridge");
    }

    let mut tables: Vec<Option<Eigenfunction>> = vec![None; features.ncols()];
    for (f, &a) in functions.functions.iter().zip(&sol.alpha[offset..]) {
        let t = tables[f.dim_index].get_or_insert_with(|| Eigenfunction {
            values: vec![0.0; f.values.len()],
            sigma: 0.0,
            index: 0,
            ..f.clone()
        });
        for (acc, g) in t.values.iter_mut().zip(&f.values) {
            *acc += a * g;
        }
    }
    let base = if params.bias { sol.alpha[0] } else { 0.0 };
    let mut field = vec![base; features.nrows()];
    for t in tables.iter().flatten() {
        let col = features.col(t.dim_index);
        for (i, v) in field.iter_mut().enumerate() {
            *v += t.eval(col[i]);
        }
    }
    Ok(FieldSolution {
        functions,
        alpha: sol.alpha,
        f: field,
        ridge: sol.ridge,
    })
}
