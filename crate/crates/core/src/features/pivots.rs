//! Pivot sampling: representative seed pixels taken at uniform arc-length
//! spacing along the boundary contours of each class's scribbles.

use std::collections::HashSet;

use crate::error::{Error, Result};
use crate::image::{Label, ScribbleMap};
use crate::morphology::components_8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Pivot {
    pub x: usize,
    pub y: usize,
    pub label: Label,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PivotSet {
    pub foreground: Vec<Pivot>,
    pub background: Vec<Pivot>,
}

impl PivotSet {
    pub fn len(&self) -> usize {
        self.foreground.len() + self.background.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Foreground pivots first, then background: the feature column order.
    pub fn iter(&self) -> impl Iterator<Item = &Pivot> {
        self.foreground.iter().chain(self.background.iter())
    }

    pub fn extend(&mut self, other: &PivotSet) {
        self.foreground.extend_from_slice(&other.foreground);
        self.background.extend_from_slice(&other.background);
    }
}

// Clockwise with y pointing down: E, SE, S, SW, W, NW, N, NE.
const DIRS: [(isize, isize); 8] = [
    (1, 0),
    (1, 1),
    (0, 1),
    (-1, 1),
    (-1, 0),
    (-1, -1),
    (0, -1),
    (1, -1),
];

fn dir_index(dx: isize, dy: isize) -> usize {
    DIRS.iter()
        .position(|&d| d == (dx, dy))
        .expect("adjacent offset")
}

/// Moore-neighbor boundary trace of the component containing `start`,
/// which must be the component's first pixel in scan order. Returns the
/// closed contour without repeating the start pixel at the end; pixels
/// on one-pixel-wide parts appear once per pass.
pub fn trace_contour(member: &[bool], width: usize, height: usize, start: usize) -> Vec<usize> {
    let is_member = |x: isize, y: isize| {
        x >= 0
            && y >= 0
            && (x as usize) < width
            && (y as usize) < height
            && member[y as usize * width + x as usize]
    };
    let pos = |i: usize| ((i % width) as isize, (i / width) as isize);

    let mut contour = vec![start];
    let mut cur = start;
    // The west neighbor of a first-in-scan pixel is never a member.
    let mut back = 4usize;
    let mut first_move: Option<usize> = None;
    let limit = 4 * member.len() + 8;
    for _ in 0..limit {
        let (cx, cy) = pos(cur);
        let mut found = None;
        for k in 1..=8 {
            let d = (back + k) % 8;
            let (nx, ny) = (cx + DIRS[d].0, cy + DIRS[d].1);
            if is_member(nx, ny) {
                let prev = (back + k - 1) % 8;
                let (bx, by) = (cx + DIRS[prev].0, cy + DIRS[prev].1);
                found = Some((ny as usize * width + nx as usize, dir_index(bx - nx, by - ny)));
                break;
            }
        }
        let Some((next, next_back)) = found else {
            return contour;
        };
        if cur == start {
            match first_move {
                None => first_move = Some(next),
                Some(f) if f == next => {
                    contour.pop();
                    return contour;
                }
                Some(_) => {}
            }
        }
        cur = next;
        back = next_back;
        contour.push(cur);
    }
    contour
}

fn class_pivots(scribbles: &ScribbleMap, label: Label, k: usize) -> Vec<Pivot> {
    let (w, h) = scribbles.dims();
    let member: Vec<bool> = scribbles.labels().iter().map(|l| *l == Some(label)).collect();
    let to_pivot = |i: usize| Pivot {
        x: i % w,
        y: i / w,
        label,
    };
    let labeled: Vec<usize> = (0..member.len()).filter(|&i| member[i]).collect();
    if labeled.len() <= k {
        return labeled.into_iter().map(to_pivot).collect();
    }

    let mut polyline = Vec::new();
    for comp in components_8(&member, w, h) {
        polyline.extend(trace_contour(&member, w, h, comp.pixels[0]));
    }

    let xy = |i: usize| ((i % w) as f64, (i / w) as f64);
    let seg = |a: usize, b: usize| {
        let (ax, ay) = xy(a);
        let (bx, by) = xy(b);
        (ax - bx).hypot(ay - by)
    };
    let mut cum = Vec::with_capacity(polyline.len());
    let mut acc = 0.0;
    for (j, &p) in polyline.iter().enumerate() {
        if j > 0 {
            acc += seg(polyline[j - 1], p);
        }
        cum.push(acc);
    }
    let total = acc + seg(*polyline.last().unwrap(), polyline[0]);

    let mut chosen = Vec::with_capacity(k);
    let mut used = HashSet::new();
    for i in 0..k {
        let target = total * i as f64 / k as f64;
        let mut j = cum.partition_point(|&c| c <= target).saturating_sub(1);
        let mut steps = 0;
        while used.contains(&polyline[j]) && steps < polyline.len() {
            j = (j + 1) % polyline.len();
            steps += 1;
        }
        if used.insert(polyline[j]) {
            chosen.push(polyline[j]);
        }
    }
    // Thin contours can hold fewer distinct pixels than k; top up from the
    // remaining seeds in scan order.
    for &i in &labeled {
        if chosen.len() >= k {
            break;
        }
        if used.insert(i) {
            chosen.push(i);
        }
    }
    chosen.into_iter().map(to_pivot).collect()
}

/// Samples up to `k_fg` foreground and `k_bg` background pivots.
pub fn sample_pivots(scribbles: &ScribbleMap, k_fg: usize, k_bg: usize) -> Result<PivotSet> {
    scribbles.validate_for_segmentation()?;
    if k_fg == 0 || k_bg == 0 {
        return Err(Error::InvalidParam("pivot counts must be at least 1".into()));
    }
    Ok(PivotSet {
        foreground: class_pivots(scribbles, Label::Foreground, k_fg),
        background: class_pivots(scribbles, Label::Background, k_bg),
    })
}

/// Like [`sample_pivots`] but tolerates a missing class, which yields no
/// pivots for it. Used when refining with strokes of a single class.
pub fn sample_pivots_partial(scribbles: &ScribbleMap, k_fg: usize, k_bg: usize) -> PivotSet {
    PivotSet {
        foreground: class_pivots(scribbles, Label::Foreground, k_fg),
        background: class_pivots(scribbles, Label::Background, k_bg),
    }
}
