//! Pixel-to-pivot affinity features.
//!
//! Every pixel is described by its affinity to a small set of pivot seeds
//! under several cues (RGB and LAB color, spatial proximity, geodesic
//! distance, intervening contour). Per pivot the cues are either
//! multiplied into one column, with the pixel's own normalized RGB and LAB
//! values appended, or stacked side by side.

pub mod canny;
pub mod color;
pub mod contour;
pub mod geodesic;
pub mod pca;
pub mod pivots;

use std::fmt;
use std::str::FromStr;

use faer::Mat;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::ImageRgb;
pub use pca::{pca_rotate, PcaBasis, Retain};
pub use pivots::{sample_pivots, Pivot, PivotSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Cue {
    Rgb,
    Lab,
    #[serde(rename = "euc")]
    Euclidean,
    #[serde(rename = "geo")]
    Geodesic,
    #[serde(rename = "ic")]
    Contour,
}

impl Cue {
    pub const DEFAULT: [Cue; 4] = [Cue::Rgb, Cue::Lab, Cue::Euclidean, Cue::Geodesic];

    pub fn name(self) -> &'static str {
        match self {
            Cue::Rgb => "rgb",
            Cue::Lab => "lab",
            Cue::Euclidean => "euc",
            Cue::Geodesic => "geo",
            Cue::Contour => "ic",
        }
    }
}

impl fmt::Display for Cue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Cue {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "rgb" => Ok(Cue::Rgb),
            "lab" => Ok(Cue::Lab),
            "euc" | "euclidean" => Ok(Cue::Euclidean),
            "geo" | "geodesic" => Ok(Cue::Geodesic),
            "ic" | "contour" => Ok(Cue::Contour),
            other => Err(Error::InvalidParam(format!("unknown feature cue {other:?}"))),
        }
    }
}

/// Parses a comma-separated cue list such as `rgb,lab,euc,geo`.
pub fn parse_cues(s: &str) -> Result<Vec<Cue>> {
    let mut out = Vec::new();
    for part in s.split(',').filter(|p| !p.trim().is_empty()) {
        let cue: Cue = part.parse()?;
        if !out.contains(&cue) {
            out.push(cue);
        }
    }
    if out.is_empty() {
        return Err(Error::InvalidParam("feature cue list is empty".into()));
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum AugmentMode {
    #[default]
    Multiply,
    Concat,
}

impl FromStr for AugmentMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "multiply" | "mul" => Ok(AugmentMode::Multiply),
            "concat" | "concatenate" => Ok(AugmentMode::Concat),
            other => Err(Error::InvalidParam(format!("unknown augmentation mode {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AffinityConfig {
    /// RGB kernel bandwidth in 0..255 units; `None` derives it from data.
    pub eps_rgb: Option<f64>,
    /// LAB kernel bandwidth; `None` derives it from data.
    pub eps_lab: Option<f64>,
    /// Geodesic kernel bandwidth; `None` derives it from data.
    pub eps_geo: Option<f64>,
    pub gamma_g: f64,
    pub scales: Vec<f64>,
    pub canny_low: f64,
    pub canny_high: f64,
    pub k_fg: usize,
    pub k_bg: usize,
    pub cues: Vec<Cue>,
    pub mode: AugmentMode,
}

impl Default for AffinityConfig {
    fn default() -> Self {
        Self {
            eps_rgb: None,
            eps_lab: None,
            eps_geo: None,
            gamma_g: 0.5,
            scales: vec![0.25, 0.5, 1.0, 2.0],
            canny_low: 0.1,
            canny_high: 0.25,
            k_fg: 21,
            k_bg: 21,
            cues: Cue::DEFAULT.to_vec(),
            mode: AugmentMode::Multiply,
        }
    }
}

impl AffinityConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParam(m.to_string()));
        for eps in [self.eps_rgb, self.eps_lab, self.eps_geo].into_iter().flatten() {
            if !(eps > 0.0) {
                return bad("kernel bandwidths must be positive");
            }
        }
        if !(0.0..=1.0).contains(&self.gamma_g) {
            return bad("gamma_g must lie in [0, 1]");
        }
        if self.scales.is_empty() || self.scales.iter().any(|s| !(*s > 0.0)) {
            return bad("scales must be a nonempty list of positive values");
        }
        if !(0.0 <= self.canny_low && self.canny_low < self.canny_high) {
            return bad("canny thresholds must satisfy 0 <= low < high");
        }
        if self.k_fg == 0 || self.k_bg == 0 {
            return bad("pivot counts must be at least 1");
        }
        if self.cues.is_empty() {
            return bad("at least one feature cue is required");
        }
        Ok(())
    }

    pub fn uses(&self, cue: Cue) -> bool {
        self.cues.contains(&cue)
    }
}

/// Where a feature column came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ColumnOrigin {
    /// Product of all active cues for one pivot.
    Product { pivot: usize },
    /// A single cue for one pivot (concatenation layout).
    Cue { cue: Cue, pivot: usize },
    RawRgb(usize),
    RawLab(usize),
    Principal(usize),
}

impl fmt::Display for ColumnOrigin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ColumnOrigin::Product { pivot } => write!(f, "prod:p{pivot}"),
            ColumnOrigin::Cue { cue, pivot } => write!(f, "{cue}:p{pivot}"),
            ColumnOrigin::RawRgb(c) => write!(f, "rgb:{}", ["r", "g", "b"][*c]),
            ColumnOrigin::RawLab(c) => write!(f, "lab:{}", ["L", "a", "b"][*c]),
            ColumnOrigin::Principal(k) => write!(f, "pc{k}"),
        }
    }
}

/// n x d per-pixel features, one row per pixel in scan order.
#[derive(Debug, Clone)]
pub struct FeatureMatrix {
    pub values: Mat<f64>,
    pub columns: Vec<ColumnOrigin>,
}

impl FeatureMatrix {
    pub fn n_rows(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_cols(&self) -> usize {
        self.values.ncols()
    }

    pub fn header(&self) -> String {
        self.columns
            .iter()
            .map(ToString::to_string)
            .collect::<Vec<_>>()
            .join(",")
    }
}

/// `exp(-|a - b|^2 / (2 eps^2))`.
pub fn color_affinity(a: [f64; 3], b: [f64; 3], eps: f64) -> f64 {
    let d2: f64 = (0..3).map(|k| (a[k] - b[k]).powi(2)).sum();
    (-d2 / (2.0 * eps * eps)).exp()
}

/// `exp(-|dxy|^2 / (2 * scale * variance))`.
pub fn euclidean_feature(pixel: (usize, usize), pivot: (usize, usize), variance: f64, scale: f64) -> f64 {
    let dx = pixel.0 as f64 - pivot.0 as f64;
    let dy = pixel.1 as f64 - pivot.1 as f64;
    (-(dx * dx + dy * dy) / (2.0 * scale * variance)).exp()
}

/// Mean of the per-axis population variances of all pixel coordinates.
pub fn spatial_variance(width: usize, height: usize) -> f64 {
    let axis = |n: usize| ((n * n) as f64 - 1.0) / 12.0;
    let v = 0.5 * (axis(width) + axis(height));
    // a 1x1 image has no spread; keep the kernel finite
    if v > 0.0 {
        v
    } else {
        1.0
    }
}

/// Per-image quantities shared by every pivot and scale.
#[derive(Debug, Clone)]
pub struct FeatureContext {
    pub width: usize,
    pub height: usize,
    pub rgb: Vec<[f64; 3]>,
    pub lab: Vec<[f64; 3]>,
    /// L* channel, the geodesic gradient source.
    pub luminance: Vec<f64>,
    pub edges: Option<Vec<f64>>,
    pub spatial_variance: f64,
}

impl FeatureContext {
    pub fn new(img: &ImageRgb, cfg: &AffinityConfig) -> Self {
        let rgb: Vec<[f64; 3]> = (0..img.len())
            .map(|i| img.pixel_at(i).map(f64::from))
            .collect();
        let lab = color::rgb_to_lab(img);
        let luminance: Vec<f64> = lab.iter().map(|p| p[0]).collect();
        let edges = cfg.uses(Cue::Contour).then(|| {
            let gray: Vec<f64> = luminance.iter().map(|l| l / 100.0).collect();
            canny::canny_edges(&gray, img.width(), img.height(), cfg.canny_low, cfg.canny_high)
        });
        Self {
            width: img.width(),
            height: img.height(),
            rgb,
            lab,
            luminance,
            edges,
            spatial_variance: spatial_variance(img.width(), img.height()),
        }
    }

    pub fn n_pixels(&self) -> usize {
        self.width * self.height
    }

    fn index(&self, p: &Pivot) -> usize {
        p.y * self.width + p.x
    }
}

/// Resolved kernel bandwidths for one image and pivot set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bandwidths {
    pub rgb: f64,
    pub lab: f64,
    pub geo: f64,
}

fn std_dev(values: impl Iterator<Item = f64>) -> f64 {
    let (mut n, mut mean, mut m2) = (0usize, 0.0, 0.0);
    for v in values {
        n += 1;
        let delta = v - mean;
        mean += delta / n as f64;
        m2 += delta * (v - mean);
    }
    if n == 0 {
        0.0
    } else {
        (m2 / n as f64).sqrt()
    }
}

fn floor_bandwidth(v: f64) -> f64 {
    if v.is_finite() && v > 1e-9 {
        v
    } else {
        1.0
    }
}

fn pooled_color_std(values: &[[f64; 3]], pivots: &[usize]) -> f64 {
    std_dev(pivots.iter().flat_map(|&q| {
        values.iter().map(move |p| {
            let d2: f64 = (0..3).map(|k| (p[k] - values[q][k]).powi(2)).sum();
            d2.sqrt()
        })
    }))
}

/// Per-pivot, scale-independent affinity fields. In multiply mode one
/// field per pivot holds the product of every non-spatial cue; in concat
/// mode each non-spatial cue keeps its own fields.
#[derive(Debug, Clone)]
pub struct PivotAffinities {
    pub pivots: Vec<Pivot>,
    pub mode: AugmentMode,
    /// `[slot][pivot][pixel]`
    fields: Vec<Vec<Vec<f64>>>,
    /// Cue of each slot in concat mode.
    slots: Vec<Cue>,
}

impl PivotAffinities {
    pub fn len(&self) -> usize {
        self.pivots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pivots.is_empty()
    }

    /// Appends the pivots of `other`, which must come from the same config.
    pub fn extend(&mut self, other: PivotAffinities) {
        assert_eq!(self.mode, other.mode);
        assert_eq!(self.slots, other.slots);
        self.pivots.extend(other.pivots);
        for (mine, theirs) in self.fields.iter_mut().zip(other.fields) {
            mine.extend(theirs);
        }
    }
}

/// Geodesic distance field from each pivot.
pub fn pivot_geodesics(ctx: &FeatureContext, pivots: &[Pivot], gamma_g: f64) -> Vec<Vec<f64>> {
    pivots
        .par_iter()
        .map(|p| {
            geodesic::geodesic_distance_field(
                &ctx.luminance,
                ctx.width,
                ctx.height,
                &[ctx.index(p)],
                gamma_g,
            )
        })
        .collect()
}

/// Derives bandwidths from data where the config leaves them unset: the
/// standard deviation of the pooled pixel-to-pivot distances in each space.
pub fn resolve_bandwidths(
    ctx: &FeatureContext,
    pivots: &[Pivot],
    geodesics: &[Vec<f64>],
    cfg: &AffinityConfig,
) -> Bandwidths {
    let idx: Vec<usize> = pivots.iter().map(|p| ctx.index(p)).collect();
    let rgb = cfg
        .eps_rgb
        .unwrap_or_else(|| floor_bandwidth(pooled_color_std(&ctx.rgb, &idx)));
    let lab = cfg
        .eps_lab
        .unwrap_or_else(|| floor_bandwidth(pooled_color_std(&ctx.lab, &idx)));
    let geo = cfg.eps_geo.unwrap_or_else(|| {
        floor_bandwidth(std_dev(geodesics.iter().flat_map(|g| g.iter().copied())))
    });
    Bandwidths { rgb, lab, geo }
}

fn cue_field(
    ctx: &FeatureContext,
    cue: Cue,
    pivot: &Pivot,
    geodesic: Option<&Vec<f64>>,
    bw: &Bandwidths,
) -> Vec<f64> {
    let q = ctx.index(pivot);
    let n = ctx.n_pixels();
    match cue {
        Cue::Rgb => (0..n).map(|i| color_affinity(ctx.rgb[i], ctx.rgb[q], bw.rgb)).collect(),
        Cue::Lab => (0..n).map(|i| color_affinity(ctx.lab[i], ctx.lab[q], bw.lab)).collect(),
        Cue::Geodesic => {
            let d = geodesic.expect("one geodesic field per pivot");
            let c = 1.0 / (2.0 * bw.geo * bw.geo);
            d.iter().map(|d| (-d * d * c).exp()).collect()
        }
        Cue::Contour => {
            let edges = ctx.edges.as_ref().expect("contour cue needs an edge map");
            (0..n)
                .map(|i| {
                    contour::intervening_contour_affinity(
                        edges,
                        ctx.width,
                        (i % ctx.width, i / ctx.width),
                        (pivot.x, pivot.y),
                    )
                })
                .collect()
        }
        Cue::Euclidean => unreachable!("spatial affinity depends on the scale"),
    }
}

/// Computes the scale-independent cue fields for `pivots`. `geodesics`
/// must hold one distance field per pivot when the geodesic cue is active.
pub fn pivot_affinities(
    ctx: &FeatureContext,
    pivots: &[Pivot],
    geodesics: &[Vec<f64>],
    cfg: &AffinityConfig,
    bw: &Bandwidths,
    mode: AugmentMode,
) -> PivotAffinities {
    if cfg.uses(Cue::Geodesic) {
        assert_eq!(geodesics.len(), pivots.len(), "one geodesic field per pivot");
    }
    let slots: Vec<Cue> = cfg.cues.iter().copied().filter(|&c| c != Cue::Euclidean).collect();
    let per_pivot: Vec<Vec<Vec<f64>>> = pivots
        .par_iter()
        .enumerate()
        .map(|(k, p)| {
            let fields = slots.iter().map(|&c| cue_field(ctx, c, p, geodesics.get(k), bw));
            match mode {
                AugmentMode::Concat => fields.collect(),
                AugmentMode::Multiply => {
                    let mut prod = vec![1.0; ctx.n_pixels()];
                    for f in fields {
                        for (a, b) in prod.iter_mut().zip(f) {
                            *a *= b;
                        }
                    }
                    vec![prod]
                }
            }
        })
        .collect();
    let n_slots = match mode {
        AugmentMode::Concat => slots.len(),
        AugmentMode::Multiply => 1,
    };
    let mut fields: Vec<Vec<Vec<f64>>> = vec![Vec::with_capacity(pivots.len()); n_slots];
    for pf in per_pivot {
        for (slot, f) in fields.iter_mut().zip(pf) {
            slot.push(f);
        }
    }
    PivotAffinities {
        pivots: pivots.to_vec(),
        mode,
        fields,
        slots,
    }
}

/// Separable spatial kernel of one pivot: the Euclidean feature of pixel
/// `(x, y)` is `xs[x] * ys[y]`.
struct SpatialTable {
    xs: Vec<f64>,
    ys: Vec<f64>,
}

impl SpatialTable {
    fn new(ctx: &FeatureContext, p: &Pivot, scale: f64) -> Self {
        let c = 1.0 / (2.0 * scale * ctx.spatial_variance);
        let axis = |n: usize, at: usize| -> Vec<f64> {
            (0..n).map(|v| (-((v as f64 - at as f64).powi(2)) * c).exp()).collect()
        };
        Self {
            xs: axis(ctx.width, p.x),
            ys: axis(ctx.height, p.y),
        }
    }

    #[inline]
    fn at(&self, x: usize, y: usize) -> f64 {
        self.xs[x] * self.ys[y]
    }
}

fn raw_color(ctx: &FeatureContext, i: usize, c: usize) -> f64 {
    if c < 3 {
        ctx.rgb[i][c] / 255.0
    } else {
        let lab = ctx.lab[i];
        match c - 3 {
            0 => lab[0] / 100.0,
            c => ((lab[c] + 128.0) / 255.0).clamp(0.0, 1.0),
        }
    }
}

/// Full feature matrix for one Euclidean scale. Multiply mode yields one
/// product column per pivot followed by the pixel's own RGB and LAB values
/// rescaled to [0, 1]; concat mode yields one block of pivot columns per
/// cue, in config order.
pub fn assemble_features(
    ctx: &FeatureContext,
    aff: &PivotAffinities,
    cfg: &AffinityConfig,
    scale: f64,
) -> FeatureMatrix {
    let n = ctx.n_pixels();
    let w = ctx.width;
    let k = aff.len();
    let spatial = cfg.uses(Cue::Euclidean);
    let tables: Vec<SpatialTable> = if spatial {
        aff.pivots.iter().map(|p| SpatialTable::new(ctx, p, scale)).collect()
    } else {
        Vec::new()
    };
    match aff.mode {
        AugmentMode::Multiply => {
            let prod = &aff.fields[0];
            let values = Mat::from_fn(n, k + 6, |i, j| {
                if j < k {
                    let v = prod[j][i];
                    if spatial {
                        v * tables[j].at(i % w, i / w)
                    } else {
                        v
                    }
                } else {
                    raw_color(ctx, i, j - k)
                }
            });
            let mut columns: Vec<ColumnOrigin> =
                (0..k).map(|pivot| ColumnOrigin::Product { pivot }).collect();
            columns.extend((0..3).map(ColumnOrigin::RawRgb));
            columns.extend((0..3).map(ColumnOrigin::RawLab));
            FeatureMatrix { values, columns }
        }
        AugmentMode::Concat => {
            // block b of the output reads slot `source[b]`, or the spatial table
            let source: Vec<Option<usize>> = cfg
                .cues
                .iter()
                .map(|&c| aff.slots.iter().position(|&s| s == c))
                .collect();
            let values = Mat::from_fn(n, cfg.cues.len() * k, |i, j| {
                let (block, pivot) = (j / k, j % k);
                match source[block] {
                    Some(slot) => aff.fields[slot][pivot][i],
                    None => tables[pivot].at(i % w, i / w),
                }
            });
            let columns = cfg
                .cues
                .iter()
                .flat_map(|&cue| (0..k).map(move |pivot| ColumnOrigin::Cue { cue, pivot }))
                .collect();
            FeatureMatrix { values, columns }
        }
    }
}

/// One-shot feature construction: derives bandwidths from the data and
/// returns the features for a single scale.
pub fn build_feature_matrix(
    img: &ImageRgb,
    pivots: &PivotSet,
    cfg: &AffinityConfig,
    scale: f64,
    mode: AugmentMode,
) -> Result<FeatureMatrix> {
    cfg.validate()?;
    let list: Vec<Pivot> = pivots.iter().copied().collect();
    if list.iter().any(|p| p.x >= img.width() || p.y >= img.height()) {
        return Err(Error::InvalidParam("pivot outside image bounds".into()));
    }
    let ctx = FeatureContext::new(img, cfg);
    let geodesics = if cfg.uses(Cue::Geodesic) {
        pivot_geodesics(&ctx, &list, cfg.gamma_g)
    } else {
        Vec::new()
    };
    let bw = resolve_bandwidths(&ctx, &list, &geodesics, cfg);
    let aff = pivot_affinities(&ctx, &list, &geodesics, cfg, &bw, mode);
    Ok(assemble_features(&ctx, &aff, cfg, scale))
}
