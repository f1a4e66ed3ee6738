//! Raster data model: RGB images, scribble maps, binary masks, and the
//! dataset manifest that ties them together.
//!
//! Scribbles are stored as a separate RGB raster the size of the image:
//! pure green `(0,255,0)` marks foreground seeds, pure red `(255,0,0)`
//! marks background seeds, and every other color is unlabeled. Masks are
//! single-channel 8-bit PNGs with foreground 255 and background 0.

use std::collections::HashSet;
use std::io::Cursor;
use std::path::{Path, PathBuf};

use image::{DynamicImage, GrayImage, ImageFormat, RgbImage};

use crate::error::{Error, Result};

pub const SCRIBBLE_FG: [u8; 3] = [0, 255, 0];
pub const SCRIBBLE_BG: [u8; 3] = [255, 0, 0];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ImageRgb {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

impl ImageRgb {
    pub fn new(width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidParam(format!(
                "image must be non-empty, got {width}x{height}"
            )));
        }
        if data.len() != 3 * width * height {
            return Err(Error::InvalidParam(format!(
                "expected {} bytes for a {width}x{height} RGB image, got {}",
                3 * width * height,
                data.len()
            )));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> [u8; 3]) -> Self {
        assert!(width > 0 && height > 0, "image must be non-empty");
        let mut data = Vec::with_capacity(3 * width * height);
        for y in 0..height {
            for x in 0..width {
                data.extend_from_slice(&f(x, y));
            }
        }
        Self {
            width,
            height,
            data,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn len(&self) -> usize {
        self.width * self.height
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn pixel(&self, x: usize, y: usize) -> [u8; 3] {
        self.pixel_at(y * self.width + x)
    }

    pub fn pixel_at(&self, index: usize) -> [u8; 3] {
        let o = 3 * index;
        [self.data[o], self.data[o + 1], self.data[o + 2]]
    }

    pub fn set_pixel(&mut self, x: usize, y: usize, rgb: [u8; 3]) {
        let o = 3 * (y * self.width + x);
        self.data[o..o + 3].copy_from_slice(&rgb);
    }

    fn from_dynamic(img: DynamicImage, path: &Path) -> Result<Self> {
        let rgb = match img {
            DynamicImage::ImageLuma8(_)
            | DynamicImage::ImageLumaA8(_)
            | DynamicImage::ImageRgb8(_)
            | DynamicImage::ImageRgba8(_) => img.to_rgb8(),
            other => {
                return Err(Error::Decode {
                    path: path.to_path_buf(),
                    message: format!("unsupported pixel format {:?}", other.color()),
                })
            }
        };
        let (w, h) = (rgb.width() as usize, rgb.height() as usize);
        Self::new(w, h, rgb.into_raw())
    }

    /// Decodes PNG bytes; grayscale is promoted to RGB by replication.
    pub fn decode_png(bytes: &[u8]) -> Result<Self> {
        let path = PathBuf::from("<memory>");
        let img = image::load_from_memory_with_format(bytes, ImageFormat::Png).map_err(|e| {
            Error::Decode {
                path: path.clone(),
                message: e.to_string(),
            }
        })?;
        Self::from_dynamic(img, &path)
    }

    pub fn encode_png(&self) -> Vec<u8> {
        let buf = RgbImage::from_raw(self.width as u32, self.height as u32, self.data.clone())
            .expect("buffer length checked at construction");
        let mut out = Cursor::new(Vec::new());
        buf.write_to(&mut out, ImageFormat::Png)
            .expect("in-memory PNG encoding cannot fail");
        out.into_inner()
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.encode_png()).map_err(|e| Error::io(path, e))
    }
}

pub fn load_image(path: impl AsRef<Path>) -> Result<ImageRgb> {
    let path = path.as_ref();
    let img = open_dynamic(path)?;
    ImageRgb::from_dynamic(img, path)
}

fn open_dynamic(path: &Path) -> Result<DynamicImage> {
    if !path.exists() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    image::load_from_memory(&bytes).map_err(|e| Error::Decode {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    #[serde(alias = "bg")]
    Background,
    #[serde(alias = "fg")]
    Foreground,
}

impl Label {
    /// Regression target: +1 for foreground, -1 for background.
    pub fn target(self) -> f64 {
        match self {
            Label::Foreground => 1.0,
            Label::Background => -1.0,
        }
    }

    pub fn short_name(self) -> &'static str {
        match self {
            Label::Foreground => "fg",
            Label::Background => "bg",
        }
    }
}

/// Per-pixel seed labels. `None` is unlabeled.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScribbleMap {
    width: usize,
    height: usize,
    labels: Vec<Option<Label>>,
}

impl ScribbleMap {
    pub fn empty(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            labels: vec![None; width * height],
        }
    }

    pub fn from_labels(width: usize, height: usize, labels: Vec<Option<Label>>) -> Result<Self> {
        if labels.len() != width * height {
            return Err(Error::Dimension {
                expected: (width, height),
                found: (labels.len(), 1),
            });
        }
        Ok(Self {
            width,
            height,
            labels,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn labels(&self) -> &[Option<Label>] {
        &self.labels
    }

    pub fn get(&self, x: usize, y: usize) -> Option<Label> {
        self.labels[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, label: Option<Label>) {
        self.labels[y * self.width + x] = label;
    }

    pub fn count(&self, label: Label) -> usize {
        self.labels.iter().filter(|l| **l == Some(label)).count()
    }

    pub fn labeled_count(&self) -> usize {
        self.labels.iter().filter(|l| l.is_some()).count()
    }

    pub fn is_unlabeled(&self) -> bool {
        self.labels.iter().all(Option::is_none)
    }

    /// Indices and labels of all seeded pixels, in scan order.
    pub fn seeds(&self) -> impl Iterator<Item = (usize, Label)> + '_ {
        self.labels
            .iter()
            .enumerate()
            .filter_map(|(i, l)| l.map(|l| (i, l)))
    }

    /// Overlays `other` onto `self`; labeled pixels of `other` win.
    pub fn merge(&mut self, other: &ScribbleMap) -> Result<()> {
        check_dims(self.dims(), other.dims())?;
        for (dst, src) in self.labels.iter_mut().zip(&other.labels) {
            if src.is_some() {
                *dst = *src;
            }
        }
        Ok(())
    }

    /// Both classes present, as segmentation requires.
    pub fn validate_for_segmentation(&self) -> Result<()> {
        let fg = self.count(Label::Foreground);
        let bg = self.count(Label::Background);
        if fg == 0 || bg == 0 {
            return Err(Error::Annotation(format!(
                "scribbles need at least one foreground and one background pixel \
                 (found {fg} foreground, {bg} background)"
            )));
        }
        Ok(())
    }

    pub fn from_image(raster: &ImageRgb) -> Self {
        let labels = (0..raster.len())
            .map(|i| match raster.pixel_at(i) {
                SCRIBBLE_FG => Some(Label::Foreground),
                SCRIBBLE_BG => Some(Label::Background),
                _ => None,
            })
            .collect();
        Self {
            width: raster.width(),
            height: raster.height(),
            labels,
        }
    }

    /// Renders the overlay-raster encoding (black where unlabeled).
    pub fn to_image(&self) -> ImageRgb {
        ImageRgb::from_fn(self.width, self.height, |x, y| match self.get(x, y) {
            Some(Label::Foreground) => SCRIBBLE_FG,
            Some(Label::Background) => SCRIBBLE_BG,
            None => [0, 0, 0],
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        self.to_image().save(path)
    }
}

pub fn load_scribbles(path: impl AsRef<Path>) -> Result<ScribbleMap> {
    Ok(ScribbleMap::from_image(&load_image(path)?))
}

/// Loads scribbles and checks them against the paired image size.
pub fn load_scribbles_for(path: impl AsRef<Path>, image: &ImageRgb) -> Result<ScribbleMap> {
    let map = load_scribbles(path)?;
    check_dims(image.dims(), map.dims())?;
    Ok(map)
}

/// Binary foreground/background raster. Used both for ground truth and
/// for segmentation output.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mask {
    width: usize,
    height: usize,
    data: Vec<bool>,
}

pub type GroundTruthMask = Mask;

impl Mask {
    pub fn new(width: usize, height: usize, data: Vec<bool>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::Dimension {
                expected: (width, height),
                found: (data.len(), 1),
            });
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn filled(width: usize, height: usize, foreground: bool) -> Self {
        Self {
            width,
            height,
            data: vec![foreground; width * height],
        }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self {
            width,
            height,
            data,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[bool] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [bool] {
        &mut self.data
    }

    pub fn get(&self, x: usize, y: usize) -> bool {
        self.data[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, v: bool) {
        self.data[y * self.width + x] = v;
    }

    pub fn label_at(&self, index: usize) -> Label {
        if self.data[index] {
            Label::Foreground
        } else {
            Label::Background
        }
    }

    pub fn foreground_count(&self) -> usize {
        self.data.iter().filter(|v| **v).count()
    }

    /// Single-channel bytes, foreground 255 and background 0.
    pub fn to_bytes(&self) -> Vec<u8> {
        self.data.iter().map(|&v| if v { 255 } else { 0 }).collect()
    }

    pub fn encode_png(&self) -> Vec<u8> {
        let buf = GrayImage::from_raw(self.width as u32, self.height as u32, self.to_bytes())
            .expect("buffer length matches dims");
        let mut out = Cursor::new(Vec::new());
        buf.write_to(&mut out, ImageFormat::Png)
            .expect("in-memory PNG encoding cannot fail");
        out.into_inner()
    }

    pub fn decode_png(bytes: &[u8]) -> Result<Self> {
        let img = image::load_from_memory_with_format(bytes, ImageFormat::Png).map_err(|e| {
            Error::Decode {
                path: PathBuf::from("<memory>"),
                message: e.to_string(),
            }
        })?;
        Ok(Self::from_luma(&img.to_luma8()))
    }

    fn from_luma(gray: &GrayImage) -> Self {
        Self {
            width: gray.width() as usize,
            height: gray.height() as usize,
            data: gray.as_raw().iter().map(|&v| v >= 128).collect(),
        }
    }
}

pub fn save_mask(mask: &Mask, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, mask.encode_png()).map_err(|e| Error::io(path, e))
}

/// Loads a mask; pixels with luminance >= 128 are foreground.
pub fn load_mask(path: impl AsRef<Path>) -> Result<Mask> {
    let path = path.as_ref();
    let img = open_dynamic(path)?;
    Ok(Mask::from_luma(&img.to_luma8()))
}

pub(crate) fn check_dims(expected: (usize, usize), found: (usize, usize)) -> Result<()> {
    if expected != found {
        return Err(Error::Dimension { expected, found });
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetSample {
    pub id: String,
    pub image: PathBuf,
    pub scribbles: PathBuf,
    pub ground_truth: PathBuf,
}

impl DatasetSample {
    pub fn load(&self) -> Result<(ImageRgb, ScribbleMap, Mask)> {
        let image = load_image(&self.image)?;
        let scribbles = load_scribbles_for(&self.scribbles, &image)?;
        let gt = load_mask(&self.ground_truth)?;
        check_dims(image.dims(), gt.dims())?;
        Ok((image, scribbles, gt))
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DatasetManifest {
    pub samples: Vec<DatasetSample>,
}

impl DatasetManifest {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, DatasetSample> {
        self.samples.iter()
    }

    /// Parses manifest text. Each non-comment line is
    /// `<id>\t<image>\t<scribbles>\t<groundtruth>`; relative paths resolve
    /// against `base`. File existence is not checked here.
    pub fn parse(text: &str, base: &Path, origin: &Path) -> Result<Self> {
        let mut samples = Vec::new();
        let mut seen = HashSet::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim_end_matches('\r');
            if line.trim().is_empty() || line.trim_start().starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            let err = |message: String| Error::Manifest {
                path: origin.to_path_buf(),
                line: lineno + 1,
                message,
            };
            if fields.len() != 4 {
                return Err(err(format!(
                    "expected 4 tab-separated fields, found {}",
                    fields.len()
                )));
            }
            if fields.iter().any(|f| f.trim().is_empty()) {
                return Err(err("empty field".into()));
            }
            let id = fields[0].trim().to_string();
            if !seen.insert(id.clone()) {
                return Err(err(format!("duplicate id {id:?}")));
            }
            let resolve = |p: &str| {
                let p = Path::new(p.trim());
                if p.is_absolute() {
                    p.to_path_buf()
                } else {
                    base.join(p)
                }
            };
            samples.push(DatasetSample {
                id,
                image: resolve(fields[1]),
                scribbles: resolve(fields[2]),
                ground_truth: resolve(fields[3]),
            });
        }
        Ok(Self { samples })
    }

    pub fn validate_files(&self) -> Result<()> {
        for s in &self.samples {
            for p in [&s.image, &s.scribbles, &s.ground_truth] {
                if !p.is_file() {
                    return Err(Error::MissingFile(p.clone()));
                }
            }
        }
        Ok(())
    }
}

pub fn load_dataset(path: impl AsRef<Path>) -> Result<DatasetManifest> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    let manifest = DatasetManifest::parse(&text, base, path)?;
    manifest.validate_files()?;
    Ok(manifest)
}

const BOUNDARY_COLOR: [u8; 3] = [255, 255, 0];

fn blend(px: [u8; 3], tint: [u8; 3]) -> [u8; 3] {
    let mix = |a: u8, b: u8| ((a as u16 + b as u16) / 2) as u8;
    [mix(px[0], tint[0]), mix(px[1], tint[1]), mix(px[2], tint[2])]
}

/// Foreground pixels with at least one 4-neighbor outside the foreground.
pub fn mask_boundary(mask: &Mask) -> Vec<bool> {
    let (w, h) = mask.dims();
    let mut out = vec![false; w * h];
    for y in 0..h {
        for x in 0..w {
            if !mask.get(x, y) {
                continue;
            }
            let edge = x == 0
                || y == 0
                || x + 1 == w
                || y + 1 == h
                || !mask.get(x - 1, y)
                || !mask.get(x + 1, y)
                || !mask.get(x, y - 1)
                || !mask.get(x, y + 1);
            out[y * w + x] = edge;
        }
    }
    out
}

/// Draws the mask boundary over the image. With ground truth, true
/// positives are tinted green, false positives red and false negatives blue.
pub fn render_overlay(image: &ImageRgb, mask: &Mask, gt: Option<&Mask>) -> Result<ImageRgb> {
    check_dims(image.dims(), mask.dims())?;
    if let Some(gt) = gt {
        check_dims(image.dims(), gt.dims())?;
    }
    let boundary = mask_boundary(mask);
    let w = image.width();
    Ok(ImageRgb::from_fn(image.width(), image.height(), |x, y| {
        let i = y * w + x;
        if boundary[i] {
            return BOUNDARY_COLOR;
        }
        let px = image.pixel_at(i);
        match gt {
            Some(gt) => match (mask.data[i], gt.data[i]) {
                (true, true) => blend(px, [0, 255, 0]),
                (true, false) => blend(px, [255, 0, 0]),
                (false, true) => blend(px, [0, 0, 255]),
                (false, false) => px,
            },
            None => px,
        }
    }))
}
