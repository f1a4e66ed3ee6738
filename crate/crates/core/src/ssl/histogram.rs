use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Equal-width histogram estimate of a 1-D density.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityHistogram {
    pub bin_centers: Vec<f64>,
    pub probs: Vec<f64>,
    /// Set when the column is constant; such dimensions carry no
    /// eigenfunctions and are skipped.
    pub degenerate: bool,
}

impl DensityHistogram {
    pub fn bins(&self) -> usize {
        self.bin_centers.len()
    }

    pub fn bin_width(&self) -> f64 {
        match self.bin_centers.as_slice() {
            [a, b, ..] => b - a,
            _ => 0.0,
        }
    }
}

pub fn histogram_density(column: &[f64], bins: usize) -> Result<DensityHistogram> {
    if column.len() < 2 {
        return Err(Error::DegenerateData(format!(
            "histogram needs at least 2 samples, got {}",
            column.len()
        )));
    }
    if bins == 0 {
        return Err(Error::InvalidParam("bin count must be at least 1".into()));
    }
    if column.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("histogram input contains non-finite values".into()));
    }
    let lo = column.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = column.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = hi - lo;
    if span <= 1e-12 * lo.abs().max(hi.abs()).max(1.0) {
        return Ok(DensityHistogram {
            bin_centers: vec![lo; bins],
            probs: vec![1.0 / bins as f64; bins],
            degenerate: true,
        });
    }
    let width = span / bins as f64;
    let mut counts = vec![0usize; bins];
    for &v in column {
        let k = (((v - lo) / width) as usize).min(bins - 1);
        counts[k] += 1;
    }
    let n = column.len() as f64;
    Ok(DensityHistogram {
        bin_centers: (0..bins).map(|k| lo + (k as f64 + 0.5) * width).collect(),
        probs: counts.into_iter().map(|c| c as f64 / n).collect(),
        degenerate: false,
    })
}
