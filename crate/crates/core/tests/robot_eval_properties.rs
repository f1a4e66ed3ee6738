use proptest::prelude::*;

use seeded_laplacian::eval::*;
use seeded_laplacian::image::Mask;
use seeded_laplacian::robot::*;
use seeded_laplacian::segment::{SegmenterParams, SessionState};
use seeded_laplacian::synth::{generate, SynthConfig, SynthSample};

fn rect_mask(w: usize, h: usize, r: (usize, usize, usize, usize)) -> Mask {
    Mask::from_fn(w, h, |x, y| (r.0..r.0 + r.2).contains(&x) && (r.1..r.1 + r.3).contains(&y))
}

fn bits(w: usize, h: usize, raw: &[bool]) -> Mask {
    Mask::new(w, h, raw[..w * h].to_vec()).unwrap()
}

fn small(seed: u64) -> SynthSample {
    let cfg = SynthConfig {
        width: 48,
        height: 36,
        margin: 6,
        ..SynthConfig::default()
    };
    generate(&cfg, seed)
}

fn params() -> SegmenterParams {
    SegmenterParams {
        m: 30,
        ..SegmenterParams::default()
    }
}

fn errors_at(mask: &Mask, gt: &Mask, pixels: &[usize]) -> usize {
    pixels.iter().filter(|&&i| mask.data()[i] != gt.data()[i]).count()
}

#[test]
fn strokes_fix_their_own_pixels() {
    let s = small(11);
    let (w, h) = s.image.dims();
    let p = params();
    let mut st = SessionState::start(&s.image, &s.scribbles, &p).unwrap();
    for _ in 0..3 {
        let mask = st.last().mask.clone();
        let Some(stroke) = next_stroke(&mask, &s.ground_truth, DEFAULT_RADIUS).unwrap() else {
            break;
        };
        let before = errors_at(&mask, &s.ground_truth, &stroke.pixels);
        assert!(before > 0);
        let after_mask = st.refine(&stroke.to_scribbles(w, h)).unwrap().mask.clone();
        assert!(errors_at(&after_mask, &s.ground_truth, &stroke.pixels) < before);
    }
}

#[test]
fn traces_are_reproducible() {
    let s = small(12);
    for mode in [RobotMode::Naive, RobotMode::Incremental] {
        let robot = RobotParams {
            max_strokes: 3,
            mode,
            ..RobotParams::default()
        };
        let a = run_robot(&s.image, &s.ground_truth, &s.scribbles, &params(), &robot).unwrap();
        let b = run_robot(&s.image, &s.ground_truth, &s.scribbles, &params(), &robot).unwrap();
        assert_eq!(a, b);
        assert!(a.steps.len() <= robot.max_strokes + 1);
        assert!(a.steps[0].stroke.is_none());
        assert_eq!(a.to_csv().lines().count(), a.steps.len() + 1);
    }
}

#[test]
fn trace_ends_on_its_final_mask() {
    let s = small(13);
    let trace = run_robot(&s.image, &s.ground_truth, &s.scribbles, &params(), &RobotParams::default()).unwrap();
    if trace.steps[0].jaccard == 1.0 {
        assert_eq!(trace.strokes(), 0);
    }
    assert_eq!(trace.final_mask.dims(), s.ground_truth.dims());
    let last = trace.steps.last().unwrap().jaccard;
    assert_eq!(last, jaccard(&confusion(&trace.final_mask, &s.ground_truth).unwrap()));
}

#[test]
fn dataset_summary_of_two() {
    let s = Summary::of(&[0.4, 0.8]);
    assert!((s.mean - 0.6).abs() < 1e-12 && (s.std - 0.2).abs() < 1e-12);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn robot_never_lies(
        w in 4usize..40,
        h in 4usize..40,
        a in (0usize..40, 0usize..40, 1usize..30, 1usize..30),
        b in (0usize..40, 0usize..40, 1usize..30, 1usize..30),
        radius in 0usize..10,
    ) {
        let gt = rect_mask(w, h, a);
        let mask = rect_mask(w, h, b);
        match next_stroke(&mask, &gt, radius).unwrap() {
            None => prop_assert_eq!(&mask, &gt),
            Some(s) => {
                let c = s.center.1 * w + s.center.0;
                prop_assert!(mask.data()[c] != gt.data()[c]);
                prop_assert_eq!(s.label, gt.label_at(c));
                prop_assert!(s.pixels.contains(&c));
                let r2 = (radius * radius) as isize;
                for &p in &s.pixels {
                    prop_assert_eq!(gt.label_at(p), s.label);
                    let (dx, dy) = ((p % w) as isize - s.center.0 as isize, (p / w) as isize - s.center.1 as isize);
                    prop_assert!(dx * dx + dy * dy <= r2);
                }
            }
        }
    }

    #[test]
    fn jaccard_never_exceeds_fscore(tp in 0u64..1000, fp in 0u64..1000, fn_ in 0u64..1000, tn in 0u64..1000) {
        let c = Confusion { tp, fp, fn_, tn };
        let (j, f) = (jaccard(&c), fscore(&c));
        prop_assert!((0.0..=1.0).contains(&j) && (0.0..=1.0).contains(&f));
        prop_assert!(j <= f + 1e-15);
        prop_assert!((j - f / (2.0 - f)).abs() <= 1e-12);
        let extreme = |v: f64| v == 0.0 || v == 1.0;
        prop_assert_eq!((j - f).abs() < 1e-15, extreme(j) && extreme(f));
    }

    #[test]
    fn confusion_ignores_pixel_order(
        w in 1usize..16,
        h in 1usize..16,
        ma in prop::collection::vec(any::<bool>(), 256),
        mb in prop::collection::vec(any::<bool>(), 256),
        shift in 0usize..256,
    ) {
        let (a, b) = (bits(w, h, &ma), bits(w, h, &mb));
        let n = w * h;
        let perm = |m: &Mask| {
            let d: Vec<bool> = (0..n).map(|i| m.data()[(i * 7 + shift) % n]).collect();
            d
        };
        // i -> 7i + shift is a bijection whenever 7 does not divide n
        prop_assume!(n % 7 != 0);
        let c1 = confusion(&a, &b).unwrap();
        let c2 = confusion(&Mask::new(w, h, perm(&a)).unwrap(), &Mask::new(w, h, perm(&b)).unwrap()).unwrap();
        prop_assert_eq!(c1, c2);
        prop_assert_eq!(c1.total(), n as u64);
    }

    #[test]
    fn higher_traces_need_fewer_strokes(
        base in prop::collection::vec(0.0f64..1.0, 1..22),
        lift in prop::collection::vec(0.0f64..0.3, 22),
    ) {
        let higher: Vec<f64> = base.iter().zip(&lift).map(|(b, l)| (b + l).min(1.0)).collect();
        let band = Band::default();
        let lo = avg_strokes(&base, band, 21);
        let hi = avg_strokes(&higher, band, 21);
        prop_assert!(hi <= lo + 1e-12, "{hi} > {lo}");
        prop_assert!((0.0..=21.0).contains(&lo));
    }
}
