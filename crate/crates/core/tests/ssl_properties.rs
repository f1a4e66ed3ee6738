use faer::Mat;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use seeded_laplacian::ssl::*;

struct Instance {
    x: Mat<f64>,
    labels: LabeledPoints,
}

/// Points from a mixture of two blobs, a few of each labeled.
fn instance(seed: u64, n: usize, d: usize) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let class: Vec<bool> = (0..n).map(|i| i % 2 == 0).collect();
    let x = Mat::from_fn(n, d, |i, _| {
        let c = if class[i] { 1.0 } else { -1.0 };
        c + rng.random_range(-0.8..0.8)
    });
    let mut idx = Vec::new();
    let mut tgt = Vec::new();
    for i in 0..n {
        if i < 2 || rng.random_bool(0.15) {
            idx.push(i);
            tgt.push(if class[i] { 1.0 } else { -1.0 });
        }
    }
    Instance {
        x,
        labels: LabeledPoints::new(idx, tgt),
    }
}

fn small_params() -> SslParams {
    SslParams {
        m: 6,
        bins: 20,
        min_support: 0.0,
        ..SslParams::default()
    }
}

fn diag(v: &[f64]) -> Mat<f64> {
    Mat::from_fn(v.len(), v.len(), |i, j| if i == j { v[i] } else { 0.0 })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn alpha_is_a_local_minimum(seed in any::<u64>(), n in 30usize..90, d in 1usize..4) {
        let inst = instance(seed, n, d);
        let p = small_params();
        let sol = eigenfunction_smoothness(inst.x.as_ref(), &inst.labels, &p, AlphaPath::LabeledRows).unwrap();
        let sigma = diag(&sol.sigma);
        let j0 = objective(sol.u.as_ref(), sigma.as_ref(), &inst.labels, p.lambda, &sol.alpha);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
        for _ in 0..100 {
            let mut delta: Vec<f64> = (0..sol.alpha.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
            let norm = delta.iter().map(|v| v * v).sum::<f64>().sqrt();
            for v in &mut delta {
                *v *= 1e-3 / norm;
            }
            let moved: Vec<f64> = sol.alpha.iter().zip(&delta).map(|(a, b)| a + b).collect();
            let j1 = objective(sol.u.as_ref(), sigma.as_ref(), &inst.labels, p.lambda, &moved);
            prop_assert!(j0 <= j1 + 1e-9 * j0.max(1.0), "J {j0} > perturbed {j1}");
        }
    }

    #[test]
    fn flipping_labels_flips_field(seed in any::<u64>(), n in 30usize..90) {
        let inst = instance(seed, n, 2);
        let p = small_params();
        let a = eigenfunction_field(inst.x.as_ref(), &inst.labels, &p).unwrap();
        let b = eigenfunction_field(inst.x.as_ref(), &inst.labels.negated(), &p).unwrap();
        let scale = a.f.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        for (u, v) in a.f.iter().zip(&b.f) {
            prop_assert!((u + v).abs() <= 1e-8 * scale);
        }
    }

    #[test]
    fn table_field_equals_u_alpha(seed in any::<u64>(), n in 30usize..90, d in 1usize..4) {
        let inst = instance(seed, n, d);
        let p = small_params();
        let full = eigenfunction_smoothness(inst.x.as_ref(), &inst.labels, &p, AlphaPath::LabeledRows).unwrap();
        let fast = eigenfunction_field(inst.x.as_ref(), &inst.labels, &p).unwrap();
        let direct = smoothness(full.u.as_ref(), &full.alpha);
        let scale = direct.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        for i in 0..n {
            prop_assert!((full.f[i] - direct[i]).abs() <= 1e-10 * scale);
            prop_assert!((fast.f[i] - direct[i]).abs() <= 1e-8 * scale);
        }
    }

    #[test]
    fn labeled_and_dense_solves_agree(seed in any::<u64>(), n in 20usize..60) {
        let inst = instance(seed, n, 2);
        let p = small_params();
        let sol = eigenfunction_smoothness(inst.x.as_ref(), &inst.labels, &p, AlphaPath::LabeledRows).unwrap();
        let base = solve_alpha_unoptimized(sol.u.as_ref(), &sol.sigma, &inst.labels, p.lambda).unwrap();
        let scale = sol.alpha.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        for (a, b) in sol.alpha.iter().zip(&base.alpha) {
            prop_assert!((a - b).abs() <= 1e-9 * scale);
        }
    }

    #[test]
    fn selection_is_sorted_and_nonconstant(seed in any::<u64>(), n in 30usize..120, d in 1usize..5, m in 1usize..30) {
        let inst = instance(seed, n, d);
        let p = SslParams { m, ..small_params() };
        let set = fit_eigenfunctions(inst.x.as_ref(), &p).unwrap();
        prop_assert!(set.len() <= m);
        prop_assert_eq!(set.shortfall, set.len() < m);
        for w in set.functions.windows(2) {
            prop_assert!(w[0].sigma <= w[1].sigma);
        }
        for f in &set.functions {
            prop_assert!(f.sigma >= -1e-10);
            prop_assert!(f.values.iter().all(|v| v.is_finite()));
            let lo = f.values.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = f.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            prop_assert!(hi - lo > 1e-6);
        }
    }

    #[test]
    fn histogram_is_a_distribution(values in prop::collection::vec(-1e3f64..1e3, 2..300), bins in 2usize..80) {
        let h = histogram_density(&values, bins).unwrap();
        prop_assert_eq!(h.bins(), bins);
        prop_assert!((h.probs.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        prop_assert!(h.probs.iter().all(|&p| p >= 0.0));
    }

    #[test]
    fn discrete_eigenpairs_satisfy_the_equation(
        counts in prop::collection::vec(0u32..50, 5..60),
        eps in 0.5f64..4.0,
    ) {
        prop_assume!(counts.iter().filter(|&&c| c > 0).count() >= 2);
        let total: u32 = counts.iter().sum();
        let h = DensityHistogram {
            bin_centers: (0..counts.len()).map(|i| i as f64 + 0.5).collect(),
            probs: counts.iter().map(|&c| c as f64 / total as f64).collect(),
            degenerate: false,
        };
        let ops = eigenfunction::discrete_operators(&h, eps);
        let fs = solve_eigenfunctions(&h, eps, counts.len().min(8), 0).unwrap();
        prop_assert!(fs[0].sigma == 0.0);
        for f in &fs {
            prop_assert!(eigenfunction::relative_residual(&ops, &f.values, f.sigma) <= 1e-8);
        }
        for w in fs.windows(2) {
            prop_assert!(w[0].sigma <= w[1].sigma + 1e-12);
        }
    }

    #[test]
    fn probability_scale_does_not_matter(counts in prop::collection::vec(1u32..40, 4..30), c in 0.01f64..100.0) {
        let total: u32 = counts.iter().sum();
        let centers: Vec<f64> = (0..counts.len()).map(|i| i as f64).collect();
        let make = |k: f64| {
            let raw: Vec<f64> = counts.iter().map(|&n| k * n as f64 / total as f64).collect();
            let s: f64 = raw.iter().sum();
            DensityHistogram {
                bin_centers: centers.clone(),
                probs: raw.iter().map(|v| v / s).collect(),
                degenerate: false,
            }
        };
        let a = solve_eigenfunctions(&make(1.0), 2.0, 4, 0).unwrap();
        let b = solve_eigenfunctions(&make(c), 2.0, 4, 0).unwrap();
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x.sigma - y.sigma).abs() <= 1e-8);
            for (u, v) in x.values.iter().zip(&y.values) {
                prop_assert!((u - v).abs() <= 1e-8 * u.abs().max(1.0));
            }
        }
    }
}
