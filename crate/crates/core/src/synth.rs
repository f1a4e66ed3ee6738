//! Generated two-region images with known ground truth and scribbles.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::image::{ImageRgb, Label, Mask, ScribbleMap};

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub width: usize,
    pub height: usize,
    /// Per-channel Gaussian noise on the 0..255 scale.
    pub noise_sigma: f64,
    /// Minimum RGB distance between the two region colors.
    pub min_color_distance: f64,
    pub margin: usize,
    pub stroke_thickness: usize,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            width: 96,
            height: 72,
            noise_sigma: 5.0,
            min_color_distance: 80.0,
            margin: 10,
            stroke_thickness: 3,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SynthSample {
    pub id: String,
    pub image: ImageRgb,
    /// One foreground and three background strokes.
    pub scribbles: ScribbleMap,
    pub ground_truth: Mask,
}

fn random_color(rng: &mut ChaCha8Rng) -> [f64; 3] {
    [0; 3].map(|_: u8| rng.random_range(20.0..235.0))
}

fn distance(a: [f64; 3], b: [f64; 3]) -> f64 {
    (0..3).map(|k| (a[k] - b[k]).powi(2)).sum::<f64>().sqrt()
}

fn paint(s: &mut ScribbleMap, gt: &Mask, label: Label, x0: usize, y0: usize, x1: usize, y1: usize) {
    for y in y0..=y1.min(s.height() - 1) {
        for x in x0..=x1.min(s.width() - 1) {
            let fg = gt.get(x, y);
            if fg == (label == Label::Foreground) {
                s.set(x, y, Some(label));
            }
        }
    }
}

/// An elliptical foreground on a flat background, both colors perturbed by
/// noise.
pub fn generate(cfg: &SynthConfig, seed: u64) -> SynthSample {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (w, h, margin) = (cfg.width, cfg.height, cfg.margin);
    let fg_color = random_color(&mut rng);
    let bg_color = loop {
        let c = random_color(&mut rng);
        if distance(c, fg_color) >= cfg.min_color_distance {
            break c;
        }
    };
    let max_rx = (w / 2 - margin) as f64;
    let max_ry = (h / 2 - margin) as f64;
    let rx = rng.random_range(0.45 * max_rx..max_rx);
    let ry = rng.random_range(0.45 * max_ry..max_ry);
    let cx = rng.random_range(margin as f64 + rx..(w - margin) as f64 - rx);
    let cy = rng.random_range(margin as f64 + ry..(h - margin) as f64 - ry);
    let gt = Mask::from_fn(w, h, |x, y| {
        let dx = (x as f64 - cx) / rx;
        let dy = (y as f64 - cy) / ry;
        dx * dx + dy * dy <= 1.0
    });

    let noise = Normal::new(0.0, cfg.noise_sigma).expect("finite noise level");
    let mut data = Vec::with_capacity(w * h * 3);
    for y in 0..h {
        for x in 0..w {
            let base = if gt.get(x, y) { fg_color } else { bg_color };
            for c in base {
                data.push((c + noise.sample(&mut rng)).round().clamp(0.0, 255.0) as u8);
            }
        }
    }
    let image = ImageRgb::new(w, h, data).expect("buffer sized to image");

    let t = cfg.stroke_thickness.max(1);
    let half = t / 2;
    let mut scribbles = ScribbleMap::empty(w, h);
    let (cxi, cyi) = (cx.round() as usize, cy.round() as usize);
    let reach = (0.6 * rx) as usize;
    paint(
        &mut scribbles,
        &gt,
        Label::Foreground,
        cxi.saturating_sub(reach),
        cyi.saturating_sub(half),
        cxi + reach,
        cyi + t - 1 - half,
    );
    let edge = 3usize;
    let (span_x, span_y) = (w * 7 / 10, h * 7 / 10);
    let (sx, sy) = ((w - span_x) / 2, (h - span_y) / 2);
    paint(&mut scribbles, &gt, Label::Background, sx, edge - half, sx + span_x, edge - half + t - 1);
    let bottom = h - 1 - edge;
    paint(&mut scribbles, &gt, Label::Background, sx, bottom - half, sx + span_x, bottom - half + t - 1);
    paint(&mut scribbles, &gt, Label::Background, edge - half, sy, edge - half + t - 1, sy + span_y);

    SynthSample {
        id: format!("synth-{seed:03}"),
        image,
        scribbles,
        ground_truth: gt,
    }
}

pub fn generate_suite(cfg: &SynthConfig, count: usize, seed: u64) -> Vec<SynthSample> {
    (0..count as u64).map(|i| generate(cfg, seed.wrapping_add(i))).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sample_is_consistent() {
        let cfg = SynthConfig::default();
        let s = generate(&cfg, 4);
        assert_eq!(s.image.dims(), (96, 72));
        assert!(s.ground_truth.foreground_count() > 200);
        s.scribbles.validate_for_segmentation().unwrap();
        for (i, label) in s.scribbles.seeds() {
            assert_eq!(s.ground_truth.label_at(i), label);
        }
        let again = generate(&cfg, 4);
        assert_eq!(again.image, s.image);
        assert_ne!(generate(&cfg, 5).image, s.image);
    }

    #[test]
    fn stroke_count_shape() {
        let s = generate(&SynthConfig::default(), 1);
        let bg = s.scribbles.count(Label::Background);
        let fg = s.scribbles.count(Label::Foreground);
        assert!(fg >= 3 * 10, "fg stroke {fg}");
        assert!(bg >= 3 * 3 * 40, "bg strokes {bg}");
    }
}
