//! Single-pass and incremental segmentation.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::pivots::sample_pivots_partial;
use crate::features::{
    assemble_features, pca_rotate, pivot_affinities, pivot_geodesics, resolve_bandwidths,
    sample_pivots, AffinityConfig, Bandwidths, Cue, FeatureContext, FeatureMatrix, Pivot,
    PivotAffinities, PivotSet, Retain,
};
use crate::image::{ImageRgb, Mask, ScribbleMap};
use crate::morphology::components_8;
use crate::ssl::{eigenfunction_field, LabeledPoints, SslParams};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SegmenterParams {
    /// Eigenfunctions kept per scale.
    pub m: usize,
    pub lambda: f64,
    pub bins: usize,
    pub affinity: AffinityConfig,
    /// Foreground islands smaller than this are removed; `None` is 0.1% of
    /// the image area.
    pub island_min_area: Option<usize>,
    /// Enclosed background holes smaller than this are filled; `None` is
    /// 0.1% of the image area.
    pub hole_max_area: Option<usize>,
    /// Force scribbled pixels to their label in the final field.
    pub pin_labels: bool,
    /// Principal components kept before the eigenfunction fit.
    pub retain: Retain,
}

impl Default for SegmenterParams {
    fn default() -> Self {
        Self {
            m: 100,
            lambda: 100.0,
            bins: 50,
            affinity: AffinityConfig::default(),
            island_min_area: None,
            hole_max_area: None,
            pin_labels: true,
            retain: Retain::AllNonzero,
        }
    }
}

impl SegmenterParams {
    pub fn ssl(&self) -> SslParams {
        SslParams {
            m: self.m,
            bins: self.bins,
            lambda: self.lambda,
            ..SslParams::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.ssl().validate()?;
        self.affinity.validate()
    }

    fn default_area(n_pixels: usize) -> usize {
        n_pixels / 1000
    }

    pub fn island_area(&self, n_pixels: usize) -> usize {
        self.island_min_area.unwrap_or_else(|| Self::default_area(n_pixels))
    }

    pub fn hole_area(&self, n_pixels: usize) -> usize {
        self.hole_max_area.unwrap_or_else(|| Self::default_area(n_pixels))
    }
}

/// Wall-clock seconds per stage.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct StageTimings {
    pub pivots: f64,
    pub affinities: f64,
    pub features: f64,
    pub pca: f64,
    pub smoothness: f64,
    pub postprocess: f64,
    pub total: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SegmentationResult {
    #[serde(skip)]
    pub mask: Mask,
    #[serde(skip)]
    pub f_field: Vec<f64>,
    pub timings: StageTimings,
    pub params: SegmenterParams,
    pub bandwidths: Bandwidths,
    pub pivot_count: usize,
    /// Scales whose features were degenerate and were left out of the average.
    pub skipped_scales: Vec<f64>,
    /// Some scale needed a ridge to solve for its coefficients.
    pub ridge: bool,
    /// Some scale had fewer eigenfunctions than requested.
    pub shortfall: bool,
}

fn secs(t: Instant) -> f64 {
    t.elapsed().as_secs_f64()
}

/// Thresholds at zero (ties go to background), removes small foreground
/// islands, then fills small enclosed background holes.
pub fn postprocess(f: &[f64], width: usize, height: usize, island_min_area: usize, hole_max_area: usize) -> Mask {
    assert_eq!(f.len(), width * height);
    let mut fg: Vec<bool> = f.iter().map(|&v| v > 0.0).collect();
    for c in components_8(&fg, width, height) {
        if c.area() < island_min_area {
            for &p in &c.pixels {
                fg[p] = false;
            }
        }
    }
    let bg: Vec<bool> = fg.iter().map(|v| !v).collect();
    for c in components_8(&bg, width, height) {
        if !c.touches_border && c.area() < hole_max_area {
            for &p in &c.pixels {
                fg[p] = true;
            }
        }
    }
    Mask::new(width, height, fg).expect("dimensions match")
}

/// Everything computed from the image and pivots that does not depend on
/// the labels.
#[derive(Debug, Clone)]
struct FeatureCache {
    ctx: FeatureContext,
    bandwidths: Bandwidths,
    affinities: PivotAffinities,
}

impl FeatureCache {
    fn build(img: &ImageRgb, pivots: &[Pivot], cfg: &AffinityConfig) -> Self {
        let ctx = FeatureContext::new(img, cfg);
        let geodesics = if cfg.uses(Cue::Geodesic) {
            pivot_geodesics(&ctx, pivots, cfg.gamma_g)
        } else {
            Vec::new()
        };
        let bandwidths = resolve_bandwidths(&ctx, pivots, &geodesics, cfg);
        let affinities = pivot_affinities(&ctx, pivots, &geodesics, cfg, &bandwidths, cfg.mode);
        Self {
            ctx,
            bandwidths,
            affinities,
        }
    }

    fn add_pivots(&mut self, pivots: &[Pivot], cfg: &AffinityConfig) {
        let geodesics = if cfg.uses(Cue::Geodesic) {
            pivot_geodesics(&self.ctx, pivots, cfg.gamma_g)
        } else {
            Vec::new()
        };
        let more = pivot_affinities(&self.ctx, pivots, &geodesics, cfg, &self.bandwidths, cfg.mode);
        self.affinities.extend(more);
    }

    fn features(&self, cfg: &AffinityConfig, scale: f64) -> FeatureMatrix {
        assemble_features(&self.ctx, &self.affinities, cfg, scale)
    }
}

fn solve_field(
    cache: &FeatureCache,
    scribbles: &ScribbleMap,
    params: &SegmenterParams,
    timings: &mut StageTimings,
) -> Result<(Vec<f64>, Vec<f64>, bool, bool)> {
    let labels = LabeledPoints::from_scribbles(scribbles);
    let ssl = params.ssl();
    let n = cache.ctx.n_pixels();
    let mut sum = vec![0.0; n];
    let mut used = 0usize;
    let mut skipped = Vec::new();
    let (mut ridge, mut shortfall) = (false, false);
    for &scale in &params.affinity.scales {
        let t = Instant::now();
        let fm = cache.features(&params.affinity, scale);
        timings.features += secs(t);
        let t = Instant::now();
        let rotated = match pca_rotate(&fm, params.retain) {
            Ok((rotated, _)) => rotated,
            Err(Error::DegenerateData(msg)) => {
                tracing::warn!(scale, %msg, "skipping degenerate scale");
                skipped.push(scale);
                continue;
            }
            Err(e) => return Err(e),
        };
        timings.pca += secs(t);
        let t = Instant::now();
        let sol = match eigenfunction_field(rotated.values.as_ref(), &labels, &ssl) {
            Ok(sol) => sol,
            Err(Error::DegenerateData(msg)) => {
                tracing::warn!(scale, %msg, "skipping degenerate scale");
                skipped.push(scale);
                continue;
            }
            Err(e) => return Err(e),
        };
        timings.smoothness += secs(t);
        ridge |= sol.ridge;
        shortfall |= sol.functions.shortfall;
        for (s, v) in sum.iter_mut().zip(&sol.f) {
            *s += v;
        }
        used += 1;
    }
    if used == 0 {
        return Err(Error::DegenerateData("every scale produced degenerate features".into()));
    }
    for v in &mut sum {
        *v /= used as f64;
    }
    if params.pin_labels {
        for (i, t) in labels.indices.iter().zip(&labels.targets) {
            sum[*i] = *t;
        }
    }
    Ok((sum, skipped, ridge, shortfall))
}

fn finish(
    cache: &FeatureCache,
    scribbles: &ScribbleMap,
    params: &SegmenterParams,
    mut timings: StageTimings,
    start: Instant,
) -> Result<SegmentationResult> {
    let (f_field, skipped_scales, ridge, shortfall) = solve_field(cache, scribbles, params, &mut timings)?;
    let t = Instant::now();
    let (w, h) = (cache.ctx.width, cache.ctx.height);
    let mask = postprocess(&f_field, w, h, params.island_area(w * h), params.hole_area(w * h));
    timings.postprocess = secs(t);
    timings.total = secs(start);
    Ok(SegmentationResult {
        mask,
        f_field,
        timings,
        params: params.clone(),
        bandwidths: cache.bandwidths,
        pivot_count: cache.affinities.len(),
        skipped_scales,
        ridge,
        shortfall,
    })
}

fn check_inputs(img: &ImageRgb, scribbles: &ScribbleMap, params: &SegmenterParams) -> Result<()> {
    params.validate()?;
    if img.dims() != scribbles.dims() {
        return Err(Error::Dimension {
            expected: img.dims(),
            found: scribbles.dims(),
        });
    }
    scribbles.validate_for_segmentation()
}

pub fn segment_single_pass(img: &ImageRgb, scribbles: &ScribbleMap, params: &SegmenterParams) -> Result<SegmentationResult> {
    Ok(SessionState::start(img, scribbles, params)?.last)
}

/// Pre-PCA feature matrices, one per scale.
pub fn feature_matrices(img: &ImageRgb, scribbles: &ScribbleMap, params: &SegmenterParams) -> Result<Vec<FeatureMatrix>> {
    check_inputs(img, scribbles, params)?;
    let cfg = &params.affinity;
    let pivots = sample_pivots(scribbles, cfg.k_fg, cfg.k_bg)?;
    let list: Vec<Pivot> = pivots.iter().copied().collect();
    let cache = FeatureCache::build(img, &list, cfg);
    Ok(cfg.scales.iter().map(|&s| cache.features(cfg, s)).collect())
}

/// An interactive session: pivots and their affinity fields accumulate as
/// strokes arrive.
#[derive(Debug, Clone)]
pub struct SessionState {
    image: ImageRgb,
    params: SegmenterParams,
    scribbles: ScribbleMap,
    pivots: PivotSet,
    cache: FeatureCache,
    last: SegmentationResult,
}

impl SessionState {
    /// Runs a single pass and keeps its intermediate state.
    pub fn start(img: &ImageRgb, scribbles: &ScribbleMap, params: &SegmenterParams) -> Result<Self> {
        let start = Instant::now();
        check_inputs(img, scribbles, params)?;
        let cfg = &params.affinity;
        let mut timings = StageTimings::default();
        let t = Instant::now();
        let pivots = sample_pivots(scribbles, cfg.k_fg, cfg.k_bg)?;
        timings.pivots = secs(t);
        let t = Instant::now();
        let list: Vec<Pivot> = pivots.iter().copied().collect();
        let cache = FeatureCache::build(img, &list, cfg);
        timings.affinities = secs(t);
        let last = finish(&cache, scribbles, params, timings, start)?;
        Ok(Self {
            image: img.clone(),
            params: params.clone(),
            scribbles: scribbles.clone(),
            pivots,
            cache,
            last,
        })
    }

    /// Adds strokes: pivots are sampled from `new` only, their affinity
    /// columns are appended, and the solve reruns on the widened features.
    pub fn refine(&mut self, new: &ScribbleMap) -> Result<&SegmentationResult> {
        if new.dims() != self.image.dims() {
            return Err(Error::Dimension {
                expected: self.image.dims(),
                found: new.dims(),
            });
        }
        if new.is_unlabeled() {
            return Ok(&self.last);
        }
        let start = Instant::now();
        let cfg = &self.params.affinity;
        let mut timings = StageTimings::default();
        let t = Instant::now();
        let added = sample_pivots_partial(new, cfg.k_fg, cfg.k_bg);
        timings.pivots = secs(t);
        let mut scribbles = self.scribbles.clone();
        scribbles.merge(new)?;
        scribbles.validate_for_segmentation()?;
        let t = Instant::now();
        let mut cache = self.cache.clone();
        let list: Vec<Pivot> = added.iter().copied().collect();
        cache.add_pivots(&list, cfg);
        timings.affinities = secs(t);
        let last = finish(&cache, &scribbles, &self.params, timings, start)?;
        self.pivots.extend(&added);
        self.scribbles = scribbles;
        self.cache = cache;
        self.last = last;
        Ok(&self.last)
    }

    pub fn image(&self) -> &ImageRgb {
        &self.image
    }

    pub fn params(&self) -> &SegmenterParams {
        &self.params
    }

    pub fn scribbles(&self) -> &ScribbleMap {
        &self.scribbles
    }

    pub fn pivots(&self) -> &PivotSet {
        &self.pivots
    }

    pub fn last(&self) -> &SegmentationResult {
        &self.last
    }

    /// Pre-PCA features at one scale for the accumulated pivots.
    pub fn features(&self, scale: f64) -> FeatureMatrix {
        self.cache.features(&self.params.affinity, scale)
    }
}

pub fn segment_incremental(mut state: SessionState, new: &ScribbleMap) -> Result<(SessionState, SegmentationResult)> {
    let result = state.refine(new)?.clone();
    Ok((state, result))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_positive_is_all_foreground() {
        let m = postprocess(&[1.0; 12], 4, 3, 2, 2);
        assert_eq!(m.foreground_count(), 12);
    }

    #[test]
    fn single_pixel_island_removed() {
        let mut f = vec![-1.0; 25];
        f[12] = 0.5;
        assert_eq!(postprocess(&f, 5, 5, 2, 0).foreground_count(), 0);
        assert_eq!(postprocess(&f, 5, 5, 1, 0).foreground_count(), 1);
    }

    #[test]
    fn zero_goes_to_background() {
        assert_eq!(postprocess(&[0.0; 4], 2, 2, 0, 0).foreground_count(), 0);
    }

    #[test]
    fn ring_hole_filled() {
        let (w, h) = (7, 7);
        let hole = [(3, 2), (3, 3), (3, 4)];
        let f: Vec<f64> = (0..w * h)
            .map(|i| {
                let (x, y) = (i % w, i / w);
                let inside = (1..6).contains(&x) && (1..6).contains(&y);
                if inside && !hole.contains(&(x, y)) {
                    1.0
                } else {
                    -1.0
                }
            })
            .collect();
        let m = postprocess(&f, w, h, 0, 10);
        assert_eq!(m.foreground_count(), 25);
        let kept = postprocess(&f, w, h, 0, 3);
        assert_eq!(kept.foreground_count(), 22);
    }
}
