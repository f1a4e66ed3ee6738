//! Two-Gaussian point clouds for checking and timing the solvers.

use std::time::{Duration, Instant};

use faer::Mat;
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::Serialize;

use super::alpha::LabeledPoints;
use super::exact::{exact_smoothness, MAX_EXACT_POINTS};
use super::{eigenfunction_smoothness, AlphaPath, SslParams};
use crate::error::Result;

#[derive(Debug, Clone, PartialEq)]
pub struct ToyConfig {
    pub n: usize,
    pub seed: u64,
    pub labels_per_class: usize,
    pub separation: f64,
    pub spread: f64,
    pub ssl: SslParams,
    /// Bandwidth of the dense graph used by the exact path.
    pub exact_eps: f64,
}

impl Default for ToyConfig {
    fn default() -> Self {
        Self {
            n: 400,
            seed: 0,
            labels_per_class: 2,
            separation: 4.0,
            spread: 0.7,
            ssl: SslParams {
                m: 2,
                ..SslParams::default()
            },
            exact_eps: 0.5,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ToyData {
    /// n x 2
    pub points: Mat<f64>,
    /// +1 for the right-hand cluster, -1 for the left.
    pub truth: Vec<f64>,
    pub labels: LabeledPoints,
}

pub fn sample_toy(cfg: &ToyConfig) -> ToyData {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let noise = Normal::new(0.0, cfg.spread).expect("spread is finite and nonnegative");
    let half = cfg.n / 2;
    let truth: Vec<f64> = (0..cfg.n).map(|i| if i < half { -1.0 } else { 1.0 }).collect();
    let mut coords = Vec::with_capacity(cfg.n * 2);
    for &t in &truth {
        coords.push(t * cfg.separation / 2.0 + noise.sample(&mut rng));
        coords.push(noise.sample(&mut rng));
    }
    let points = Mat::from_fn(cfg.n, 2, |i, j| coords[i * 2 + j]);
    let per = cfg.labels_per_class.max(1);
    let mut indices = Vec::new();
    let mut targets = Vec::new();
    for (start, len, t) in [(0, half, -1.0), (half, cfg.n - half, 1.0)] {
        for k in sample(&mut rng, len, per.min(len)).into_iter() {
            indices.push(start + k);
            targets.push(t);
        }
    }
    ToyData {
        points,
        truth,
        labels: LabeledPoints::new(indices, targets),
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ToyReport {
    pub n: usize,
    pub efn_time: Duration,
    pub exact_time: Option<Duration>,
    /// Fraction of points where both paths assign the same sign.
    pub agreement: Option<f64>,
    pub efn_accuracy: f64,
    pub exact_accuracy: Option<f64>,
    #[serde(skip)]
    pub efn_field: Vec<f64>,
    #[serde(skip)]
    pub exact_field: Option<Vec<f64>>,
}

fn sign_class(v: f64) -> bool {
    v > 0.0
}

fn agreement(a: &[f64], b: &[f64]) -> f64 {
    let same = a
        .iter()
        .zip(b)
        .filter(|(x, y)| sign_class(**x) == sign_class(**y))
        .count();
    same as f64 / a.len() as f64
}

/// Classifies the toy with the eigenfunction path and, when small enough,
/// the exact path.
pub fn run_toy(cfg: &ToyConfig) -> Result<(ToyData, ToyReport)> {
    let data = sample_toy(cfg);
    let t0 = Instant::now();
    let efn = eigenfunction_smoothness(data.points.as_ref(), &data.labels, &cfg.ssl, AlphaPath::LabeledRows)?;
    let efn_time = t0.elapsed();
    let (exact_time, exact_field) = if cfg.n <= MAX_EXACT_POINTS {
        let t0 = Instant::now();
        let k = (cfg.ssl.m + 1).min(cfg.n - 1);
        let ex = exact_smoothness(data.points.as_ref(), cfg.exact_eps, k, &data.labels, cfg.ssl.lambda)?;
        (Some(t0.elapsed()), Some(ex.f))
    } else {
        (None, None)
    };
    let report = ToyReport {
        n: cfg.n,
        efn_time,
        exact_time,
        agreement: exact_field.as_ref().map(|e| agreement(&efn.f, e)),
        efn_accuracy: agreement(&efn.f, &data.truth),
        exact_accuracy: exact_field.as_ref().map(|e| agreement(e, &data.truth)),
        efn_field: efn.f,
        exact_field,
    };
    Ok((data, report))
}

/// One row of the timing sweep.
#[derive(Debug, Clone, Serialize)]
pub struct BenchRow {
    pub n: usize,
    pub t_exact: Option<Duration>,
    pub t_efn: Duration,
    pub t_efn_opt: Duration,
}

pub const BENCH_SIZES: [usize; 7] = [400, 900, 1600, 2500, 3600, 15000, 30000];

pub fn bench_point(cfg: &ToyConfig, n: usize, with_exact: bool) -> Result<BenchRow> {
    let cfg = ToyConfig { n, ..cfg.clone() };
    let data = sample_toy(&cfg);
    let time = |path| -> Result<Duration> {
        let t0 = Instant::now();
        eigenfunction_smoothness(data.points.as_ref(), &data.labels, &cfg.ssl, path)?;
        Ok(t0.elapsed())
    };
    let t_efn_opt = time(AlphaPath::LabeledRows)?;
    let t_efn = time(AlphaPath::Unoptimized)?;
    let t_exact = if with_exact && n <= MAX_EXACT_POINTS {
        let t0 = Instant::now();
        let k = (cfg.ssl.m + 1).min(n - 1);
        exact_smoothness(data.points.as_ref(), cfg.exact_eps, k, &data.labels, cfg.ssl.lambda)?;
        Some(t0.elapsed())
    } else {
        None
    };
    Ok(BenchRow {
        n,
        t_exact,
        t_efn,
        t_efn_opt,
    })
}

pub fn bench(cfg: &ToyConfig, sizes: &[usize], with_exact: bool) -> Result<Vec<BenchRow>> {
    sizes.iter().map(|&n| bench_point(cfg, n, with_exact)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sampling_is_deterministic() {
        let cfg = ToyConfig {
            n: 50,
            ..ToyConfig::default()
        };
        let a = sample_toy(&cfg);
        let b = sample_toy(&cfg);
        assert_eq!(a.points, b.points);
        assert_eq!(a.labels, b.labels);
        assert_eq!(a.labels.len(), 4);
        assert_eq!(a.labels.targets.iter().filter(|&&t| t > 0.0).count(), 2);
    }
}
