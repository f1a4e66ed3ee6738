//! Simulated user that places corrective brush strokes.
//!
//! Each stroke is a disk placed in the largest connected region of
//! disagreement between the current mask and the ground truth, at the
//! point farthest from that region's boundary.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::{confusion, jaccard};
use crate::image::{ImageRgb, Label, Mask, ScribbleMap};
use crate::morphology::{chessboard_distance, components_8};
use crate::segment::{segment_single_pass, SegmenterParams, SessionState};

pub const DEFAULT_RADIUS: usize = 8;
pub const DEFAULT_MAX_STROKES: usize = 20;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Stroke {
    pub center: (usize, usize),
    pub radius: usize,
    pub label: Label,
    /// Disk pixels whose ground-truth class is `label`.
    pub pixels: Vec<usize>,
}

impl Stroke {
    pub fn diameter(&self) -> usize {
        2 * self.radius + 1
    }

    pub fn to_scribbles(&self, width: usize, height: usize) -> ScribbleMap {
        let mut s = ScribbleMap::empty(width, height);
        for &i in &self.pixels {
            s.set(i % width, i / width, Some(self.label));
        }
        s
    }
}

/// Disk of `radius` around `center`, clipped to the image.
pub fn disk(center: (usize, usize), radius: usize, width: usize, height: usize) -> Vec<usize> {
    let (cx, cy) = (center.0 as isize, center.1 as isize);
    let r = radius as isize;
    let mut out = Vec::new();
    for y in (cy - r).max(0)..=(cy + r).min(height as isize - 1) {
        for x in (cx - r).max(0)..=(cx + r).min(width as isize - 1) {
            if (x - cx).pow(2) + (y - cy).pow(2) <= r * r {
                out.push(y as usize * width + x as usize);
            }
        }
    }
    out
}

/// The next corrective stroke, or `None` when the mask is already exact.
pub fn next_stroke(mask: &Mask, gt: &Mask, radius: usize) -> Result<Option<Stroke>> {
    if mask.dims() != gt.dims() {
        return Err(Error::Dimension {
            expected: gt.dims(),
            found: mask.dims(),
        });
    }
    let (w, h) = gt.dims();
    let error: Vec<bool> = mask.data().iter().zip(gt.data()).map(|(a, b)| a != b).collect();
    let comps = components_8(&error, w, h);
    let Some(target) = comps.iter().min_by(|a, b| {
        b.area()
            .cmp(&a.area())
            .then((a.min_y, a.min_x).cmp(&(b.min_y, b.min_x)))
    }) else {
        return Ok(None);
    };
    let mut member = vec![false; w * h];
    for &p in &target.pixels {
        member[p] = true;
    }
    let dist = chessboard_distance(&member, w, h);
    let mut best = (0u32, usize::MAX);
    for &p in &target.pixels {
        if dist[p] > best.0 || (dist[p] == best.0 && p < best.1) {
            best = (dist[p], p);
        }
    }
    let c = best.1;
    let center = (c % w, c / w);
    let label = gt.label_at(c);
    let pixels = disk(center, radius, w, h)
        .into_iter()
        .filter(|&i| gt.label_at(i) == label)
        .collect();
    Ok(Some(Stroke {
        center,
        radius,
        label,
        pixels,
    }))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum RobotMode {
    /// Re-segment from scratch with all strokes so far.
    #[default]
    Naive,
    /// Add pivots from each new stroke to the running session.
    Incremental,
}

impl std::str::FromStr for RobotMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "naive" => Ok(RobotMode::Naive),
            "incremental" => Ok(RobotMode::Incremental),
            other => Err(Error::InvalidParam(format!("unknown robot mode {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RobotParams {
    pub max_strokes: usize,
    pub radius: usize,
    pub mode: RobotMode,
}

impl Default for RobotParams {
    fn default() -> Self {
        Self {
            max_strokes: DEFAULT_MAX_STROKES,
            radius: DEFAULT_RADIUS,
            mode: RobotMode::Naive,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RobotStep {
    /// `None` for the initial segmentation.
    pub stroke: Option<Stroke>,
    pub jaccard: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RobotTrace {
    pub steps: Vec<RobotStep>,
    pub max_strokes: usize,
    #[serde(skip)]
    pub final_mask: Mask,
}

impl RobotTrace {
    pub fn jaccards(&self) -> Vec<f64> {
        self.steps.iter().map(|s| s.jaccard).collect()
    }

    pub fn strokes(&self) -> usize {
        self.steps.len() - 1
    }

    /// First step whose Jaccard index reaches `target`.
    pub fn first_reaching(&self, target: f64) -> Option<usize> {
        self.steps.iter().position(|s| s.jaccard >= target)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("step,center_x,center_y,label,jaccard\n");
        for (i, s) in self.steps.iter().enumerate() {
            match &s.stroke {
                Some(st) => writeln!(
                    out,
                    "{i},{},{},{},{:.6}",
                    st.center.0,
                    st.center.1,
                    st.label.short_name(),
                    s.jaccard
                ),
                None => writeln!(out, "{i},,,,{:.6}", s.jaccard),
            }
            .expect("writing to a String");
        }
        out
    }
}

fn score(mask: &Mask, gt: &Mask) -> Result<f64> {
    Ok(jaccard(&confusion(mask, gt)?))
}

/// Segments, then alternates stroke placement and re-segmentation until
/// the mask is exact or `max_strokes` strokes have been placed.
pub fn run_robot(
    img: &ImageRgb,
    gt: &Mask,
    initial: &ScribbleMap,
    params: &SegmenterParams,
    robot: &RobotParams,
) -> Result<RobotTrace> {
    if gt.dims() != img.dims() {
        return Err(Error::Dimension {
            expected: img.dims(),
            found: gt.dims(),
        });
    }
    let (w, h) = img.dims();
    let mut session = match robot.mode {
        RobotMode::Incremental => Some(SessionState::start(img, initial, params)?),
        RobotMode::Naive => None,
    };
    let mut scribbles = initial.clone();
    let mut mask = match &session {
        Some(s) => s.last().mask.clone(),
        None => segment_single_pass(img, &scribbles, params)?.mask,
    };
    let mut steps = vec![RobotStep {
        stroke: None,
        jaccard: score(&mask, gt)?,
    }];
    for _ in 0..robot.max_strokes {
        let Some(stroke) = next_stroke(&mask, gt, robot.radius)? else {
            break;
        };
        let added = stroke.to_scribbles(w, h);
        mask = match session.as_mut() {
            Some(s) => s.refine(&added)?.mask.clone(),
            None => {
                scribbles.merge(&added)?;
                segment_single_pass(img, &scribbles, params)?.mask
            }
        };
        steps.push(RobotStep {
            stroke: Some(stroke),
            jaccard: score(&mask, gt)?,
        });
    }
    Ok(RobotTrace {
        steps,
        max_strokes: robot.max_strokes,
        final_mask: mask,
    })
}
