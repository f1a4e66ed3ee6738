//! sRGB (D65) to CIE L*a*b* conversion.

use crate::image::ImageRgb;

const WHITE_X: f64 = 0.4124564 + 0.3575761 + 0.1804375;
const WHITE_Z: f64 = 0.0193339 + 0.1191920 + 0.9503041;
const DELTA: f64 = 6.0 / 29.0;

fn srgb_to_linear(c: u8) -> f64 {
    let c = c as f64 / 255.0;
    if c <= 0.04045 {
        c / 12.92
    } else {
        ((c + 0.055) / 1.055).powf(2.4)
    }
}

fn lab_f(t: f64) -> f64 {
    if t > DELTA * DELTA * DELTA {
        t.cbrt()
    } else {
        t / (3.0 * DELTA * DELTA) + 4.0 / 29.0
    }
}

pub fn rgb_pixel_to_lab(rgb: [u8; 3]) -> [f64; 3] {
    let [r, g, b] = rgb.map(srgb_to_linear);
    let x = 0.4124564 * r + 0.3575761 * g + 0.1804375 * b;
    let y = 0.2126729 * r + 0.7151522 * g + 0.0721750 * b;
    let z = 0.0193339 * r + 0.1191920 * g + 0.9503041 * b;
    let (fx, fy, fz) = (lab_f(x / WHITE_X), lab_f(y), lab_f(z / WHITE_Z));
    let l = (116.0 * fy - 16.0).clamp(0.0, 100.0);
    [l, 500.0 * (fx - fy), 200.0 * (fy - fz)]
}

/// Per-pixel (L, a, b), row-major.
pub fn rgb_to_lab(img: &ImageRgb) -> Vec<[f64; 3]> {
    (0..img.len()).map(|i| rgb_pixel_to_lab(img.pixel_at(i))).collect()
}
