use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use seeded_laplacian::features::geodesic::geodesic_distance_field;
use seeded_laplacian::features::*;
use seeded_laplacian::image::{ImageRgb, Label, ScribbleMap};

fn noisy_image(seed: u64, w: usize, h: usize) -> ImageRgb {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    ImageRgb::from_fn(w, h, |x, _| {
        let base: u8 = if x < w / 2 { 60 } else { 190 };
        [0; 3].map(|_: u8| base.saturating_add(rng.random_range(0..40)))
    })
}

fn two_strokes(w: usize, h: usize) -> ScribbleMap {
    let mut s = ScribbleMap::empty(w, h);
    for y in 1..h - 1 {
        s.set(1, y, Some(Label::Foreground));
        s.set(w - 2, y, Some(Label::Background));
    }
    s
}

fn cfg(k: usize) -> AffinityConfig {
    AffinityConfig {
        k_fg: k,
        k_bg: k,
        ..AffinityConfig::default()
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn products_factor_into_cues(seed in any::<u64>(), w in 6usize..16, h in 6usize..14, k in 1usize..5, scale in 0.25f64..2.0) {
        let img = noisy_image(seed, w, h);
        let cfg = cfg(k);
        let pivots = sample_pivots(&two_strokes(w, h), k, k).unwrap();
        let p = pivots.len();
        let mul = build_feature_matrix(&img, &pivots, &cfg, scale, AugmentMode::Multiply).unwrap();
        let cat = build_feature_matrix(&img, &pivots, &cfg, scale, AugmentMode::Concat).unwrap();
        prop_assert_eq!(mul.n_cols(), p + 6);
        prop_assert_eq!(cat.n_cols(), 4 * p);
        prop_assert_eq!(mul.n_rows(), w * h);
        for i in 0..w * h {
            for j in 0..p {
                let factors: Vec<f64> = (0..4).map(|b| cat.values[(i, b * p + j)]).collect();
                let v = mul.values[(i, j)];
                prop_assert!(v > 0.0 && v <= 1.0);
                prop_assert!(factors.iter().all(|&f| f > 0.0 && f <= 1.0 && v <= f + 1e-15));
                prop_assert!((v - factors.iter().product::<f64>()).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn another_seed_never_lengthens_paths(
        lum in prop::collection::vec(0.0f64..100.0, 36),
        seeds in prop::collection::vec(0usize..36, 1..4),
        extra in 0usize..36,
        gamma in 0.0f64..=1.0,
    ) {
        let before = geodesic_distance_field(&lum, 6, 6, &seeds, gamma);
        let mut more = seeds.clone();
        more.push(extra);
        let after = geodesic_distance_field(&lum, 6, 6, &more, gamma);
        for (a, b) in after.iter().zip(&before) {
            prop_assert!(a <= b);
        }
        prop_assert_eq!(after[extra], 0.0);
    }

    #[test]
    fn pivots_are_reproducible(seed in any::<u64>(), w in 5usize..20, h in 5usize..20, k in 1usize..30) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut s = ScribbleMap::empty(w, h);
        s.set(0, 0, Some(Label::Foreground));
        s.set(w - 1, h - 1, Some(Label::Background));
        for _ in 0..w * h / 3 {
            let l = if rng.random_bool(0.5) { Label::Foreground } else { Label::Background };
            s.set(rng.random_range(0..w), rng.random_range(0..h), Some(l));
        }
        let a = sample_pivots(&s, k, k).unwrap();
        prop_assert_eq!(&a, &sample_pivots(&s, k, k).unwrap());
        for (list, label) in [(&a.foreground, Label::Foreground), (&a.background, Label::Background)] {
            prop_assert!(!list.is_empty() && list.len() <= k);
            prop_assert_eq!(list.len(), k.min(s.count(label)));
            for p in list.iter() {
                prop_assert_eq!(p.label, label);
                prop_assert_eq!(s.get(p.x, p.y), Some(label));
            }
            let mut uniq: Vec<(usize, usize)> = list.iter().map(|p| (p.x, p.y)).collect();
            uniq.sort_unstable();
            uniq.dedup();
            prop_assert_eq!(uniq.len(), list.len());
        }
    }

    #[test]
    fn pca_decorrelates(seed in any::<u64>(), n in 10usize..80, d in 1usize..7) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mix: Vec<f64> = (0..d * d).map(|_| rng.random_range(-1.0..1.0)).collect();
        let z: Vec<f64> = (0..n * d).map(|_| rng.random_range(-1.0..1.0)).collect();
        let values = faer::Mat::from_fn(n, d, |i, j| (0..d).map(|k| z[i * d + k] * mix[k * d + j]).sum());
        let fm = FeatureMatrix { values, columns: (0..d).map(ColumnOrigin::Principal).collect() };
        let (rot, basis) = pca_rotate(&fm, Retain::AllNonzero).unwrap();
        let c = basis.n_components();
        prop_assert_eq!(rot.n_cols(), c);
        let cols: Vec<Vec<f64>> = (0..c).map(|j| rot.values.col(j).iter().copied().collect()).collect();
        let cov = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>() / (n - 1) as f64;
        let var: Vec<f64> = cols.iter().map(|v| cov(v, v)).collect();
        for a in 0..c {
            prop_assert!(cols[a].iter().sum::<f64>().abs() <= 1e-9 * n as f64);
            if a + 1 < c {
                prop_assert!(var[a] + 1e-12 >= var[a + 1]);
            }
            for b in 0..a {
                prop_assert!(cov(&cols[a], &cols[b]).abs() <= 1e-6 * var[0]);
            }
            for b in 0..c {
                let dot: f64 = (0..d).map(|i| basis.components[(i, a)] * basis.components[(i, b)]).sum();
                let eye = f64::from(u8::from(a == b));
                prop_assert!((dot - eye).abs() <= 1e-8);
            }
        }
        if c == d {
            let back = basis.reconstruct(&rot.values);
            for i in 0..n {
                for j in 0..d {
                    prop_assert!((back[(i, j)] - fm.values[(i, j)]).abs() <= 1e-8);
                }
            }
        }
    }
}
