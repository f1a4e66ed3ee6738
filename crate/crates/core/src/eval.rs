//! Segmentation metrics and dataset evaluation.

use std::fmt::Write as _;
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{DatasetManifest, Mask};
use crate::robot::{run_robot, RobotParams};
use crate::segment::{segment_single_pass, SegmenterParams};

/// Pixel counts with foreground as the positive class.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tn: u64,
}

impl Confusion {
    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.fn_ + self.tn
    }
}

pub fn confusion(mask: &Mask, gt: &Mask) -> Result<Confusion> {
    if mask.dims() != gt.dims() {
        return Err(Error::Dimension {
            expected: gt.dims(),
            found: mask.dims(),
        });
    }
    let mut c = Confusion::default();
    for (&m, &g) in mask.data().iter().zip(gt.data()) {
        match (m, g) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            (false, true) => c.fn_ += 1,
            (false, false) => c.tn += 1,
        }
    }
    Ok(c)
}

/// `TP / (TP + FP + FN)`; 1 when neither mask has foreground.
pub fn jaccard(c: &Confusion) -> f64 {
    let d = c.tp + c.fp + c.fn_;
    if d == 0 {
        1.0
    } else {
        c.tp as f64 / d as f64
    }
}

/// `2 TP / (2 TP + FP + FN)`; 1 when neither mask has foreground.
pub fn fscore(c: &Confusion) -> f64 {
    let d = 2 * c.tp + c.fp + c.fn_;
    if d == 0 {
        1.0
    } else {
        (2 * c.tp) as f64 / d as f64
    }
}

/// Accuracy band for the stroke-effort measure.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Band {
    pub low: f64,
    pub high: f64,
}

impl Default for Band {
    fn default() -> Self {
        Self {
            low: 0.85,
            high: 0.98,
        }
    }
}

impl FromStr for Band {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidParam(format!("band must look like 0.85:0.98, got {s:?}"));
        let (a, b) = s.split_once(':').ok_or_else(bad)?;
        let low: f64 = a.trim().parse().map_err(|_| bad())?;
        let high: f64 = b.trim().parse().map_err(|_| bad())?;
        if !(0.0 <= low && low < high && high <= 1.0) {
            return Err(bad());
        }
        Ok(Self { low, high })
    }
}

/// Area above the Jaccard-per-stroke step curve inside `band`, in units of
/// strokes. Entry `i` covers `[i, i + 1)`; the integral stops at the first
/// entry reaching `band.high`. When the trace never gets there the last
/// value is extended to `horizon` entries.
pub fn avg_strokes(jaccards: &[f64], band: Band, horizon: usize) -> f64 {
    assert!(!jaccards.is_empty(), "empty trace");
    let width = band.high - band.low;
    let deficit = |v: f64| (band.high - v.clamp(band.low, band.high)) / width;
    let mut area = 0.0;
    for &v in jaccards {
        if v >= band.high {
            return area;
        }
        area += deficit(v);
    }
    let last = *jaccards.last().expect("nonempty");
    area + deficit(last) * horizon.saturating_sub(jaccards.len()) as f64
}

/// Mean and population standard deviation.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub std: f64,
}

impl Summary {
    pub fn of(values: &[f64]) -> Self {
        if values.is_empty() {
            return Self {
                mean: f64::NAN,
                std: f64::NAN,
            };
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        Self {
            mean,
            std: var.sqrt(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EvalMode {
    SinglePass,
    Robot(RobotParams, Band),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SampleResult {
    pub id: String,
    pub jaccard: f64,
    pub fscore: f64,
    pub avg_strokes: Option<f64>,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SampleFailure {
    pub id: String,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub samples: Vec<SampleResult>,
    pub failures: Vec<SampleFailure>,
    pub jaccard: Summary,
    pub fscore: Summary,
    pub avg_strokes: Option<Summary>,
}

impl EvalReport {
    pub fn from_results(results: Vec<std::result::Result<SampleResult, SampleFailure>>, robot: bool) -> Self {
        let mut samples = Vec::new();
        let mut failures = Vec::new();
        for r in results {
            match r {
                Ok(s) => samples.push(s),
                Err(f) => failures.push(f),
            }
        }
        let ji: Vec<f64> = samples.iter().map(|s| s.jaccard).collect();
        let fs: Vec<f64> = samples.iter().map(|s| s.fscore).collect();
        let avg_strokes = robot.then(|| {
            let v: Vec<f64> = samples.iter().filter_map(|s| s.avg_strokes).collect();
            Summary::of(&v)
        });
        Self {
            jaccard: Summary::of(&ji),
            fscore: Summary::of(&fs),
            avg_strokes,
            samples,
            failures,
        }
    }

    /// One row per sample, then `mean` and `std` rows (population std).
    /// Failed samples appear as comment lines.
    pub fn to_csv(&self) -> String {
        let robot = self.avg_strokes.is_some();
        let mut out = String::from(if robot {
            "id,jaccard,fscore,avg_strokes\n"
        } else {
            "id,jaccard,fscore\n"
        });
        for s in &self.samples {
            write!(out, "{},{:.6},{:.6}", s.id, s.jaccard, s.fscore).expect("string write");
            if robot {
                write!(out, ",{:.6}", s.avg_strokes.unwrap_or(f64::NAN)).expect("string write");
            }
            out.push('\n');
        }
        let mut summary = |name: &str, pick: fn(&Summary) -> f64| {
            write!(out, "{name},{:.6},{:.6}", pick(&self.jaccard), pick(&self.fscore)).expect("string write");
            if let Some(a) = &self.avg_strokes {
                write!(out, ",{:.6}", pick(a)).expect("string write");
            }
            out.push('\n');
        };
        summary("mean", |s| s.mean);
        summary("std", |s| s.std);
        for f in &self.failures {
            writeln!(out, "# failed,{},{}", f.id, f.error.replace('\n', " ")).expect("string write");
        }
        out
    }

    pub fn to_table(&self) -> String {
        let mut out = String::new();
        writeln!(out, "{:<24} {:>8} {:>8} {:>8}", "id", "JI", "Fs", "strokes").expect("string write");
        for s in &self.samples {
            let strokes = s.avg_strokes.map_or("-".to_string(), |v| format!("{v:.2}"));
            writeln!(out, "{:<24} {:>8.4} {:>8.4} {:>8}", s.id, s.jaccard, s.fscore, strokes)
                .expect("string write");
        }
        writeln!(
            out,
            "samples {}  failed {}  JI {:.4} ± {:.4}  Fs {:.4} ± {:.4}",
            self.samples.len(),
            self.failures.len(),
            self.jaccard.mean,
            self.jaccard.std,
            self.fscore.mean,
            self.fscore.std
        )
        .expect("string write");
        if let Some(a) = &self.avg_strokes {
            writeln!(out, "avg strokes {:.3} ± {:.3}", a.mean, a.std).expect("string write");
        }
        out
    }
}

pub fn evaluate_sample(
    id: &str,
    image: &crate::image::ImageRgb,
    scribbles: &crate::image::ScribbleMap,
    gt: &Mask,
    params: &SegmenterParams,
    mode: EvalMode,
) -> Result<SampleResult> {
    let start = Instant::now();
    let (mask, avg) = match mode {
        EvalMode::SinglePass => (segment_single_pass(image, scribbles, params)?.mask, None),
        EvalMode::Robot(robot, band) => {
            let trace = run_robot(image, gt, scribbles, params, &robot)?;
            let avg = avg_strokes(&trace.jaccards(), band, robot.max_strokes + 1);
            // the initial segmentation is what the single-pass metrics describe
            let first = match trace.steps.len() {
                1 => trace.final_mask.clone(),
                _ => segment_single_pass(image, scribbles, params)?.mask,
            };
            (first, Some(avg))
        }
    };
    let c = confusion(&mask, gt)?;
    Ok(SampleResult {
        id: id.to_string(),
        jaccard: jaccard(&c),
        fscore: fscore(&c),
        avg_strokes: avg,
        seconds: start.elapsed().as_secs_f64(),
    })
}

/// Evaluates every sample; failures are recorded rather than aborting.
pub fn evaluate_dataset(manifest: &DatasetManifest, params: &SegmenterParams, mode: EvalMode) -> EvalReport {
    let results: Vec<_> = manifest
        .samples
        .par_iter()
        .map(|s| {
            let run = || -> Result<SampleResult> {
                let (img, scribbles, gt) = s.load()?;
                evaluate_sample(&s.id, &img, &scribbles, &gt, params, mode)
            };
            run().map_err(|e| SampleFailure {
                id: s.id.clone(),
                error: e.to_string(),
            })
        })
        .collect();
    EvalReport::from_results(results, matches!(mode, EvalMode::Robot(..)))
}
