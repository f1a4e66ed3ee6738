//! Canny edge detection producing a soft contour probability per pixel.
//!
//! Thresholds are fractions of the image's maximum gradient magnitude.
//! Edge pixels carry their normalized magnitude clamped to [0.01, 0.99];
//! everything else is 0.

use std::collections::VecDeque;

use crate::morphology::{neighbor, NEIGHBORS_8};

const SIGMA: f64 = 1.0;
const RADIUS: isize = 3;

fn gaussian_kernel() -> Vec<f64> {
    let k: Vec<f64> = (-RADIUS..=RADIUS)
        .map(|i| (-(i * i) as f64 / (2.0 * SIGMA * SIGMA)).exp())
        .collect();
    let s: f64 = k.iter().sum();
    k.into_iter().map(|v| v / s).collect()
}

fn clamp_index(i: isize, n: usize) -> usize {
    i.clamp(0, n as isize - 1) as usize
}

fn smooth(src: &[f64], w: usize, h: usize) -> Vec<f64> {
    let k = gaussian_kernel();
    let mut tmp = vec![0.0; src.len()];
    for y in 0..h {
        for x in 0..w {
            tmp[y * w + x] = (-RADIUS..=RADIUS)
                .map(|d| k[(d + RADIUS) as usize] * src[y * w + clamp_index(x as isize + d, w)])
                .sum();
        }
    }
    let mut out = vec![0.0; src.len()];
    for y in 0..h {
        for x in 0..w {
            out[y * w + x] = (-RADIUS..=RADIUS)
                .map(|d| k[(d + RADIUS) as usize] * tmp[clamp_index(y as isize + d, h) * w + x])
                .sum();
        }
    }
    out
}

/// Soft Canny edges of a single-channel image (values on any scale).
pub fn canny_edges(gray: &[f64], width: usize, height: usize, low: f64, high: f64) -> Vec<f64> {
    assert_eq!(gray.len(), width * height);
    assert!(0.0 <= low && low < high, "thresholds must satisfy 0 <= low < high");
    let (w, h) = (width, height);
    let s = smooth(gray, w, h);
    let at = |x: isize, y: isize| s[clamp_index(y, h) * w + clamp_index(x, w)];

    let mut gx = vec![0.0; s.len()];
    let mut gy = vec![0.0; s.len()];
    let mut mag = vec![0.0; s.len()];
    for y in 0..h as isize {
        for x in 0..w as isize {
            let i = y as usize * w + x as usize;
            gx[i] = (at(x + 1, y - 1) + 2.0 * at(x + 1, y) + at(x + 1, y + 1))
                - (at(x - 1, y - 1) + 2.0 * at(x - 1, y) + at(x - 1, y + 1));
            gy[i] = (at(x - 1, y + 1) + 2.0 * at(x, y + 1) + at(x + 1, y + 1))
                - (at(x - 1, y - 1) + 2.0 * at(x, y - 1) + at(x + 1, y - 1));
            mag[i] = gx[i].hypot(gy[i]);
        }
    }
    let max = mag.iter().cloned().fold(0.0, f64::max);
    if max <= 1e-12 {
        return vec![0.0; s.len()];
    }
    for m in &mut mag {
        *m /= max;
    }

    // Non-maximum suppression along the quantized gradient direction. The
    // comparison is strict on the negative side so plateaus two pixels wide
    // keep a single ridge.
    let mut thin = vec![0.0; s.len()];
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            let m = mag[i];
            if m == 0.0 {
                continue;
            }
            let angle = gy[i].atan2(gx[i]).to_degrees().rem_euclid(180.0);
            let (dx, dy): (isize, isize) = if !(22.5..157.5).contains(&angle) {
                (1, 0)
            } else if angle < 67.5 {
                (1, 1)
            } else if angle < 112.5 {
                (0, 1)
            } else {
                (-1, 1)
            };
            let get = |dx: isize, dy: isize| {
                neighbor(x, y, (dx, dy), w, h).map_or(0.0, |(nx, ny)| mag[ny * w + nx])
            };
            if m > get(-dx, -dy) && m >= get(dx, dy) {
                thin[i] = m;
            }
        }
    }

    let mut edge = vec![false; s.len()];
    let mut queue = VecDeque::new();
    for (i, &m) in thin.iter().enumerate() {
        if m >= high {
            edge[i] = true;
            queue.push_back(i);
        }
    }
    while let Some(i) = queue.pop_front() {
        let (x, y) = (i % w, i / w);
        for d in NEIGHBORS_8 {
            if let Some((nx, ny)) = neighbor(x, y, d, w, h) {
                let j = ny * w + nx;
                if !edge[j] && thin[j] >= low && thin[j] > 0.0 {
                    edge[j] = true;
                    queue.push_back(j);
                }
            }
        }
    }

    thin.iter()
        .zip(&edge)
        .map(|(&m, &e)| if e { m.clamp(0.01, 0.99) } else { 0.0 })
        .collect()
}
