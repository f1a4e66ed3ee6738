//! Polyline brush strokes and their rasterization into scribbles.

use serde::{Deserialize, Serialize};

use seeded_laplacian::features::{parse_cues, AugmentMode};
use seeded_laplacian::image::{Label, ScribbleMap};
use seeded_laplacian::robot::{disk, DEFAULT_RADIUS};
use seeded_laplacian::segment::SegmenterParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StrokeLabel {
    Fg,
    Bg,
}

impl From<StrokeLabel> for Label {
    fn from(l: StrokeLabel) -> Self {
        match l {
            StrokeLabel::Fg => Label::Foreground,
            StrokeLabel::Bg => Label::Background,
        }
    }
}

fn default_radius() -> usize {
    DEFAULT_RADIUS
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stroke {
    pub label: StrokeLabel,
    /// Image coordinates `[x, y]`.
    pub points: Vec<[f64; 2]>,
    #[serde(default = "default_radius")]
    pub radius: usize,
}

/// Optional overrides of the segmenter defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamOverrides {
    pub eigvecs: Option<usize>,
    pub pivots_fg: Option<usize>,
    pub pivots_bg: Option<usize>,
    pub lambda: Option<f64>,
    pub bins: Option<usize>,
    pub gamma_g: Option<f64>,
    pub scales: Option<Vec<f64>>,
    /// `multiply` or `concat`.
    pub mode: Option<String>,
    /// Comma-separated cue list such as `rgb,lab,euc,geo`.
    pub features: Option<String>,
}

impl ParamOverrides {
    pub fn apply(&self, mut p: SegmenterParams) -> seeded_laplacian::Result<SegmenterParams> {
        if let Some(v) = self.eigvecs {
            p.m = v;
        }
        if let Some(v) = self.pivots_fg {
            p.affinity.k_fg = v;
        }
        if let Some(v) = self.pivots_bg {
            p.affinity.k_bg = v;
        }
        if let Some(v) = self.lambda {
            p.lambda = v;
        }
        if let Some(v) = self.bins {
            p.bins = v;
        }
        if let Some(v) = self.gamma_g {
            p.affinity.gamma_g = v;
        }
        if let Some(v) = &self.scales {
            p.affinity.scales = v.clone();
        }
        if let Some(v) = &self.mode {
            p.affinity.mode = v.parse::<AugmentMode>()?;
        }
        if let Some(v) = &self.features {
            p.affinity.cues = parse_cues(v)?;
        }
        p.validate()?;
        Ok(p)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StrokePayload {
    #[serde(default)]
    pub strokes: Vec<Stroke>,
    #[serde(default)]
    pub params: Option<ParamOverrides>,
}

/// Stamps a disk at every pixel step along each polyline; later strokes
/// overwrite earlier ones where they overlap.
pub fn rasterize(strokes: &[Stroke], width: usize, height: usize) -> Result<ScribbleMap, String> {
    let mut map = ScribbleMap::empty(width, height);
    for (k, s) in strokes.iter().enumerate() {
        if s.points.is_empty() {
            return Err(format!("stroke {k} has no points"));
        }
        for p in &s.points {
            let inside = p[0].is_finite() && p[1].is_finite() && p[0] >= 0.0 && p[1] >= 0.0;
            if !inside || p[0] > (width - 1) as f64 || p[1] > (height - 1) as f64 {
                return Err(format!("stroke {k} has point ({}, {}) outside the {width}x{height} image", p[0], p[1]));
            }
        }
        let label = Some(Label::from(s.label));
        let mut stamp = |x: f64, y: f64| {
            let c = (x.round() as usize, y.round() as usize);
            for i in disk(c, s.radius, width, height) {
                map.set(i % width, i / width, label);
            }
        };
        stamp(s.points[0][0], s.points[0][1]);
        for w in s.points.windows(2) {
            let (a, b) = (w[0], w[1]);
            let len = (b[0] - a[0]).hypot(b[1] - a[1]);
            let steps = len.ceil().max(1.0) as usize;
            for t in 1..=steps {
                let f = t as f64 / steps as f64;
                stamp(a[0] + f * (b[0] - a[0]), a[1] + f * (b[1] - a[1]));
            }
        }
    }
    Ok(map)
}
