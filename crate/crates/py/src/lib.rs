//! Python bindings.

use std::path::PathBuf;

use pyo3::create_exception;
use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyBytes, PyDict};

use seeded_laplacian::eval::{self, Band, EvalMode};
use seeded_laplacian::features::{parse_cues, AugmentMode};
use seeded_laplacian::image::{self as img, Label};
use seeded_laplacian::robot::{self, RobotMode, RobotParams};
use seeded_laplacian::segment::{self as seg, SegmenterParams};
use seeded_laplacian::synth::{self, SynthConfig};
use seeded_laplacian::Error;

create_exception!(seeded_laplacian_py, SegmentationError, PyValueError);

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Io { .. } | Error::MissingFile(_) => PyIOError::new_err(e.to_string()),
        _ => SegmentationError::new_err(e.to_string()),
    }
}

trait OrPy<T> {
    fn or_py(self) -> PyResult<T>;
}

impl<T> OrPy<T> for seeded_laplacian::Result<T> {
    fn or_py(self) -> PyResult<T> {
        self.map_err(to_py)
    }
}

/// An 8-bit RGB image.
#[pyclass(module = "seeded_laplacian_py", frozen, from_py_object)]
#[derive(Clone)]
pub struct Image(img::ImageRgb);

#[pymethods]
impl Image {
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        img::load_image(path).map(Self).or_py()
    }

    #[staticmethod]
    fn from_png(data: &[u8]) -> PyResult<Self> {
        img::ImageRgb::decode_png(data).map(Self).or_py()
    }

    /// Row-major interleaved RGB bytes.
    #[staticmethod]
    fn from_rgb(width: usize, height: usize, data: Vec<u8>) -> PyResult<Self> {
        img::ImageRgb::new(width, height, data).map(Self).or_py()
    }

    #[getter]
    fn width(&self) -> usize {
        self.0.width()
    }

    #[getter]
    fn height(&self) -> usize {
        self.0.height()
    }

    fn pixel(&self, x: usize, y: usize) -> PyResult<(u8, u8, u8)> {
        check_xy(x, y, self.0.dims())?;
        let [r, g, b] = self.0.pixel(x, y);
        Ok((r, g, b))
    }

    fn to_png<'py>(&self, py: Python<'py>) -> Bound<'py, PyBytes> {
        PyBytes::new(py, &self.0.encode_png())
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        self.0.save(path).or_py()
    }

    fn __repr__(&self) -> String {
        format!("Image({}x{})", self.0.width(), self.0.height())
    }
}

fn check_xy(x: usize, y: usize, (w, h): (usize, usize)) -> PyResult<()> {
    if x >= w || y >= h {
        return Err(PyValueError::new_err(format!("({x}, {y}) is outside {w}x{h}")));
    }
    Ok(())
}

fn label_code(l: Option<Label>) -> i8 {
    match l {
        Some(Label::Foreground) => 1,
        Some(Label::Background) => -1,
        None => 0,
    }
}

fn code_label(c: i8) -> PyResult<Option<Label>> {
    match c {
        1 => Ok(Some(Label::Foreground)),
        -1 => Ok(Some(Label::Background)),
        0 => Ok(None),
        other => Err(PyValueError::new_err(format!("label codes are 1, -1 or 0, got {other}"))),
    }
}

/// Per-pixel scribble labels: 1 foreground, -1 background, 0 unlabeled.
#[pyclass(module = "seeded_laplacian_py", frozen, from_py_object)]
#[derive(Clone)]
pub struct Scribbles(img::ScribbleMap);

#[pymethods]
impl Scribbles {
    /// Reads a raster where pure green is foreground and pure red is
    /// background; checks its size against `image` when given.
    #[staticmethod]
    #[pyo3(signature = (path, image=None))]
    fn load(path: PathBuf, image: Option<&Image>) -> PyResult<Self> {
        match image {
            Some(i) => img::load_scribbles_for(path, &i.0),
            None => img::load_scribbles(path),
        }
        .map(Self)
        .or_py()
    }

    #[staticmethod]
    fn from_codes(width: usize, height: usize, codes: Vec<i8>) -> PyResult<Self> {
        let labels = codes.into_iter().map(code_label).collect::<PyResult<Vec<_>>>()?;
        img::ScribbleMap::from_labels(width, height, labels).map(Self).or_py()
    }

    #[staticmethod]
    fn empty(width: usize, height: usize) -> Self {
        Self(img::ScribbleMap::empty(width, height))
    }

    /// A copy with a filled disk of `label` stamped at `(x, y)`.
    fn with_disk(&self, x: usize, y: usize, radius: usize, label: i8) -> PyResult<Self> {
        let (w, h) = self.0.dims();
        check_xy(x, y, (w, h))?;
        let l = code_label(label)?;
        let mut m = self.0.clone();
        for i in robot::disk((x, y), radius, w, h) {
            m.set(i % w, i / w, l);
        }
        Ok(Self(m))
    }

    fn codes(&self) -> Vec<i8> {
        self.0.labels().iter().map(|&l| label_code(l)).collect()
    }

    #[getter]
    fn width(&self) -> usize {
        self.0.width()
    }

    #[getter]
    fn height(&self) -> usize {
        self.0.height()
    }

    #[getter]
    fn foreground(&self) -> usize {
        self.0.count(Label::Foreground)
    }

    #[getter]
    fn background(&self) -> usize {
        self.0.count(Label::Background)
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        self.0.save(path).or_py()
    }

    fn __repr__(&self) -> String {
        format!(
            "Scribbles({}x{}, fg={}, bg={})",
            self.0.width(),
            self.0.height(),
            self.foreground(),
            self.background()
        )
    }
}

/// A binary foreground mask.
#[pyclass(module = "seeded_laplacian_py", frozen, eq, from_py_object)]
#[derive(Clone, PartialEq)]
pub struct Mask(img::Mask);

#[pymethods]
impl Mask {
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        img::load_mask(path).map(Self).or_py()
    }

    #[staticmethod]
    fn from_png(data: &[u8]) -> PyResult<Self> {
        img::Mask::decode_png(data).map(Self).or_py()
    }

    #[staticmethod]
    fn from_list(width: usize, height: usize, data: Vec<bool>) -> PyResult<Self> {
        img::Mask::new(width, height, data).map(Self).or_py()
    }

    fn to_list(&self) -> Vec<bool> {
        self.0.data().to_vec()
    }

    fn get(&self, x: usize, y: usize) -> PyResult<bool> {
        check_xy(x, y, self.0.dims())?;
        Ok(self.0.get(x, y))
    }

    #[getter]
    fn width(&self) -> usize {
        self.0.width()
    }

    #[getter]
    fn height(&self) -> usize {
        self.0.height()
    }

    #[getter]
    fn foreground_count(&self) -> usize {
        self.0.foreground_count()
    }

    fn to_png<'py>(&self, py: Python<'py>) -> Bound<'py, PyBytes> {
        PyBytes::new(py, &self.0.encode_png())
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        img::save_mask(&self.0, path).or_py()
    }

    fn __repr__(&self) -> String {
        format!(
            "Mask({}x{}, foreground={})",
            self.0.width(),
            self.0.height(),
            self.0.foreground_count()
        )
    }
}

/// Segmenter settings; keyword arguments mirror the command-line flags.
#[pyclass(module = "seeded_laplacian_py", frozen, from_py_object)]
#[derive(Clone)]
pub struct Params(SegmenterParams);

#[pymethods]
impl Params {
    #[new]
    #[pyo3(signature = (
        *,
        eigvecs = 100,
        pivots_fg = 21,
        pivots_bg = 21,
        lambda_ = 100.0,
        bins = 50,
        gamma_g = 0.5,
        scales = vec![0.25, 0.5, 1.0, 2.0],
        features = "rgb,lab,euc,geo",
        mode = "multiply",
    ))]
    #[allow(clippy::too_many_arguments)]
    fn new(
        eigvecs: usize,
        pivots_fg: usize,
        pivots_bg: usize,
        lambda_: f64,
        bins: usize,
        gamma_g: f64,
        scales: Vec<f64>,
        features: &str,
        mode: &str,
    ) -> PyResult<Self> {
        let mut p = SegmenterParams {
            m: eigvecs,
            lambda: lambda_,
            bins,
            ..SegmenterParams::default()
        };
        let a = &mut p.affinity;
        a.k_fg = pivots_fg;
        a.k_bg = pivots_bg;
        a.gamma_g = gamma_g;
        a.scales = scales;
        a.cues = parse_cues(features).or_py()?;
        a.mode = mode.parse::<AugmentMode>().or_py()?;
        p.validate().or_py()?;
        Ok(Self(p))
    }

    #[getter]
    fn eigvecs(&self) -> usize {
        self.0.m
    }

    #[getter]
    fn lambda_(&self) -> f64 {
        self.0.lambda
    }

    #[getter]
    fn scales(&self) -> Vec<f64> {
        self.0.affinity.scales.clone()
    }

    #[getter]
    fn features(&self) -> String {
        self.0.affinity.cues.iter().map(|c| c.name()).collect::<Vec<_>>().join(",")
    }

    fn __repr__(&self) -> String {
        format!(
            "Params(eigvecs={}, pivots_fg={}, pivots_bg={}, lambda_={}, bins={}, features={:?})",
            self.0.m,
            self.0.affinity.k_fg,
            self.0.affinity.k_bg,
            self.0.lambda,
            self.0.bins,
            self.features()
        )
    }
}

fn params_or_default(p: Option<&Params>) -> SegmenterParams {
    p.map(|p| p.0.clone()).unwrap_or_default()
}

/// Output of one segmentation.
#[pyclass(module = "seeded_laplacian_py", frozen)]
pub struct Segmentation(seg::SegmentationResult);

#[pymethods]
impl Segmentation {
    #[getter]
    fn mask(&self) -> Mask {
        Mask(self.0.mask.clone())
    }

    /// The averaged real-valued field before thresholding.
    #[getter]
    fn field(&self) -> Vec<f64> {
        self.0.f_field.clone()
    }

    #[getter]
    fn pivot_count(&self) -> usize {
        self.0.pivot_count
    }

    #[getter]
    fn ridge(&self) -> bool {
        self.0.ridge
    }

    #[getter]
    fn shortfall(&self) -> bool {
        self.0.shortfall
    }

    #[getter]
    fn skipped_scales(&self) -> Vec<f64> {
        self.0.skipped_scales.clone()
    }

    /// Seconds per stage.
    #[getter]
    fn timings<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let t = &self.0.timings;
        let d = PyDict::new(py);
        for (k, v) in [
            ("pivots", t.pivots),
            ("affinities", t.affinities),
            ("features", t.features),
            ("pca", t.pca),
            ("smoothness", t.smoothness),
            ("postprocess", t.postprocess),
            ("total", t.total),
        ] {
            d.set_item(k, v)?;
        }
        Ok(d)
    }

    fn __repr__(&self) -> String {
        format!(
            "Segmentation(foreground={}, pivots={}, total={:.3}s)",
            self.0.mask.foreground_count(),
            self.0.pivot_count,
            self.0.timings.total
        )
    }
}

/// Segments once from scratch.
#[pyfunction]
#[pyo3(signature = (image, scribbles, params=None))]
fn segment(py: Python<'_>, image: &Image, scribbles: &Scribbles, params: Option<&Params>) -> PyResult<Segmentation> {
    let p = params_or_default(params);
    py.detach(|| seg::segment_single_pass(&image.0, &scribbles.0, &p))
        .map(Segmentation)
        .or_py()
}

/// An interactive session that reuses earlier pivots as strokes arrive.
#[pyclass(module = "seeded_laplacian_py")]
pub struct Session(seg::SessionState);

#[pymethods]
impl Session {
    #[new]
    #[pyo3(signature = (image, scribbles, params=None))]
    fn new(py: Python<'_>, image: &Image, scribbles: &Scribbles, params: Option<&Params>) -> PyResult<Self> {
        let p = params_or_default(params);
        py.detach(|| seg::SessionState::start(&image.0, &scribbles.0, &p))
            .map(Self)
            .or_py()
    }

    /// Adds new strokes and re-solves.
    fn refine(&mut self, py: Python<'_>, scribbles: &Scribbles) -> PyResult<Segmentation> {
        let st = &mut self.0;
        py.detach(|| st.refine(&scribbles.0).cloned())
            .map(Segmentation)
            .or_py()
    }

    #[getter]
    fn last(&self) -> Segmentation {
        Segmentation(self.0.last().clone())
    }

    #[getter]
    fn scribbles(&self) -> Scribbles {
        Scribbles(self.0.scribbles().clone())
    }

    #[getter]
    fn pivot_count(&self) -> usize {
        self.0.pivots().len()
    }
}

/// Result of a simulated correction run.
#[pyclass(module = "seeded_laplacian_py", frozen)]
pub struct RobotTrace(robot::RobotTrace);

#[pymethods]
impl RobotTrace {
    /// Jaccard index after 0, 1, 2, ... strokes.
    #[getter]
    fn jaccards(&self) -> Vec<f64> {
        self.0.jaccards()
    }

    /// `(x, y, label)` for every placed stroke.
    #[getter]
    fn strokes(&self) -> Vec<(usize, usize, i8)> {
        self.0
            .steps
            .iter()
            .filter_map(|s| s.stroke.as_ref())
            .map(|s| (s.center.0, s.center.1, label_code(Some(s.label))))
            .collect()
    }

    #[getter]
    fn final_mask(&self) -> Mask {
        Mask(self.0.final_mask.clone())
    }

    fn to_csv(&self) -> String {
        self.0.to_csv()
    }

    fn __len__(&self) -> usize {
        self.0.strokes()
    }
}

fn robot_mode(mode: &str) -> PyResult<RobotMode> {
    mode.parse().or_py()
}

/// Places corrective strokes on the largest error region until the mask
/// matches `gt` or the budget runs out.
#[pyfunction]
#[pyo3(signature = (image, gt, scribbles, params=None, *, max_strokes=20, radius=8, mode="naive"))]
#[allow(clippy::too_many_arguments)]
fn run_robot(
    py: Python<'_>,
    image: &Image,
    gt: &Mask,
    scribbles: &Scribbles,
    params: Option<&Params>,
    max_strokes: usize,
    radius: usize,
    mode: &str,
) -> PyResult<RobotTrace> {
    let p = params_or_default(params);
    let r = RobotParams {
        max_strokes,
        radius,
        mode: robot_mode(mode)?,
    };
    py.detach(|| robot::run_robot(&image.0, &gt.0, &scribbles.0, &p, &r))
        .map(RobotTrace)
        .or_py()
}

#[pyfunction]
fn jaccard(mask: &Mask, gt: &Mask) -> PyResult<f64> {
    eval::confusion(&mask.0, &gt.0).map(|c| eval::jaccard(&c)).or_py()
}

#[pyfunction]
fn fscore(mask: &Mask, gt: &Mask) -> PyResult<f64> {
    eval::confusion(&mask.0, &gt.0).map(|c| eval::fscore(&c)).or_py()
}

/// Mean number of strokes needed to stay above each accuracy level in
/// `[low, high]`.
#[pyfunction]
#[pyo3(signature = (jaccards, low=0.85, high=0.98, horizon=21))]
fn avg_strokes(jaccards: Vec<f64>, low: f64, high: f64, horizon: usize) -> PyResult<f64> {
    let band: Band = format!("{low}:{high}").parse().or_py()?;
    Ok(eval::avg_strokes(&jaccards, band, horizon))
}

/// Scores every sample of a manifest; returns the CSV report.
#[pyfunction]
#[pyo3(signature = (manifest, params=None, *, robot=false, max_strokes=20, mode="naive"))]
fn evaluate(
    py: Python<'_>,
    manifest: PathBuf,
    params: Option<&Params>,
    robot: bool,
    max_strokes: usize,
    mode: &str,
) -> PyResult<String> {
    let p = params_or_default(params);
    let m = img::load_dataset(manifest).or_py()?;
    let mode = if robot {
        EvalMode::Robot(
            RobotParams {
                max_strokes,
                mode: robot_mode(mode)?,
                ..RobotParams::default()
            },
            Band::default(),
        )
    } else {
        EvalMode::SinglePass
    };
    Ok(py.detach(|| eval::evaluate_dataset(&m, &p, mode)).to_csv())
}

/// A seeded two-region test image with its scribbles and ground truth.
#[pyfunction]
#[pyo3(signature = (seed, width=96, height=72, noise=5.0))]
fn synthetic(seed: u64, width: usize, height: usize, noise: f64) -> PyResult<(Image, Scribbles, Mask)> {
    let margin = SynthConfig::default().margin;
    if width < 2 * margin + 8 || height < 2 * margin + 8 {
        return Err(PyValueError::new_err(format!(
            "synthetic images need at least {0}x{0} pixels",
            2 * margin + 8
        )));
    }
    let cfg = SynthConfig {
        width,
        height,
        noise_sigma: noise,
        ..SynthConfig::default()
    };
    let s = synth::generate(&cfg, seed);
    Ok((Image(s.image), Scribbles(s.scribbles), Mask(s.ground_truth)))
}

/// Draws the mask boundary on the image, tinting errors when `gt` is given.
#[pyfunction]
#[pyo3(signature = (image, mask, gt=None))]
fn overlay(image: &Image, mask: &Mask, gt: Option<&Mask>) -> PyResult<Image> {
    img::render_overlay(&image.0, &mask.0, gt.map(|g| &g.0)).map(Image).or_py()
}

#[pymodule]
fn seeded_laplacian_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("SegmentationError", m.py().get_type::<SegmentationError>())?;
    m.add_class::<Image>()?;
    m.add_class::<Scribbles>()?;
    m.add_class::<Mask>()?;
    m.add_class::<Params>()?;
    m.add_class::<Segmentation>()?;
    m.add_class::<Session>()?;
    m.add_class::<RobotTrace>()?;
    m.add_function(wrap_pyfunction!(segment, m)?)?;
    m.add_function(wrap_pyfunction!(run_robot, m)?)?;
    m.add_function(wrap_pyfunction!(jaccard, m)?)?;
    m.add_function(wrap_pyfunction!(fscore, m)?)?;
    m.add_function(wrap_pyfunction!(avg_strokes, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    m.add_function(wrap_pyfunction!(synthetic, m)?)?;
    m.add_function(wrap_pyfunction!(overlay, m)?)?;
    Ok(())
}
