//! Floating-point raster types, codec I/O and global image statistics.
//!
//! Every image in the pipeline is a [`RasterImage`]: three channels of `f64`
//! normalized to `[0, 1]`. Scalar per-pixel quantities (saturation, texture
//! features, weights, pyramid levels) live in a [`GrayMap`], which carries no
//! range restriction beyond finiteness.

use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use image::codecs::png::PngEncoder;
use image::codecs::pnm::{PnmEncoder, PnmSubtype, SampleEncoding};
use image::{DynamicImage, ExtendedColorType, ImageEncoder, ImageError, ImageReader};

use crate::error::{Error, Result};

/// Rec. 601 luma weights.
pub const LUMA_WEIGHTS: [f64; 3] = [0.299, 0.587, 0.114];

/// Number of histogram bins per channel.
pub const HISTOGRAM_BINS: usize = 256;

/// A three-channel image with every sample in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct RasterImage {
    width: usize,
    height: usize,
    pixels: Vec<[f64; 3]>,
}

impl RasterImage {
    /// Builds an image from row-major pixels, validating the range invariant.
    pub fn new(width: usize, height: usize, pixels: Vec<[f64; 3]>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::EmptyImage);
        }
        if pixels.len() != width * height {
            return Err(Error::InvalidParameter(format!(
                "expected {} pixels for {width}x{height}, got {}",
                width * height,
                pixels.len()
            )));
        }
        if let Some(bad) = pixels
            .iter()
            .flatten()
            .find(|v| !(0.0..=1.0).contains(*v))
        {
            return Err(Error::InvalidParameter(format!(
                "channel value {bad} outside [0, 1]"
            )));
        }
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    /// Builds an image by evaluating `f(x, y)` at every pixel. Values are
    /// clamped into `[0, 1]`; NaN becomes 0.
    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> [f64; 3]) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::EmptyImage);
        }
        let mut pixels = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                pixels.push(f(x, y).map(clamp_unit));
            }
        }
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    pub fn constant(width: usize, height: usize, value: [f64; 3]) -> Result<Self> {
        Self::new(width, height, vec![value; width * height])
    }

    /// Reassembles an image from three channel planes, clamping into `[0, 1]`.
    pub fn from_planes_clamped(planes: &[GrayMap; 3]) -> Result<Self> {
        let (w, h) = planes[0].dims();
        for p in &planes[1..] {
            check_dims((w, h), p.dims())?;
        }
        let pixels = (0..w * h)
            .map(|i| {
                [
                    clamp_unit(planes[0].values[i]),
                    clamp_unit(planes[1].values[i]),
                    clamp_unit(planes[2].values[i]),
                ]
            })
            .collect();
        Self::new(w, h, pixels)
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

    pub fn pixels(&self) -> &[[f64; 3]] {
        &self.pixels
    }

    pub fn pixel(&self, x: usize, y: usize) -> [f64; 3] {
        self.pixels[y * self.width + x]
    }

    /// Pixel lookup with edge replication for out-of-range coordinates.
    pub fn pixel_clamped(&self, x: isize, y: isize) -> [f64; 3] {
        let cx = x.clamp(0, self.width as isize - 1) as usize;
        let cy = y.clamp(0, self.height as isize - 1) as usize;
        self.pixel(cx, cy)
    }

    /// Applies `f` to every channel sample; results are clamped into `[0, 1]`.
    pub fn map_channels(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            width: self.width,
            height: self.height,
            pixels: self
                .pixels
                .iter()
                .map(|p| p.map(|v| clamp_unit(f(v))))
                .collect(),
        }
    }

    /// Splits into R, G and B planes.
    pub fn planes(&self) -> [GrayMap; 3] {
        std::array::from_fn(|c| GrayMap {
            width: self.width,
            height: self.height,
            values: self.pixels.iter().map(|p| p[c]).collect(),
        })
    }

    pub fn luminance(&self) -> GrayMap {
        GrayMap {
            width: self.width,
            height: self.height,
            values: self.pixels.iter().map(|p| luma(*p)).collect(),
        }
    }

    pub fn flip_horizontal(&self) -> Self {
        let mut pixels = Vec::with_capacity(self.pixels.len());
        for row in self.pixels.chunks(self.width) {
            pixels.extend(row.iter().rev());
        }
        Self {
            width: self.width,
            height: self.height,
            pixels,
        }
    }
}

/// A single-channel map of finite reals.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayMap {
    width: usize,
    height: usize,
    values: Vec<f64>,
}

impl GrayMap {
    pub fn new(width: usize, height: usize, values: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::EmptyImage);
        }
        if values.len() != width * height {
            return Err(Error::InvalidParameter(format!(
                "expected {} values for {width}x{height}, got {}",
                width * height,
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("map contains non-finite values".into()));
        }
        Ok(Self {
            width,
            height,
            values,
        })
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Self {
        assert!(width > 0 && height > 0, "map dimensions must be positive");
        Self {
            width,
            height,
            values: vec![value; width * height],
        }
    }

    /// Crate-internal constructor for producers that guarantee the invariants.
    pub(crate) fn from_raw(width: usize, height: usize, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), width * height);
        Self {
            width,
            height,
            values,
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

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub(crate) fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.values[y * self.width + x]
    }

    pub fn min_max(&self) -> (f64, f64) {
        self.values
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
    }

    /// Writes the map as an 8-bit grayscale PNG, clamping values into `[0, 1]`.
    pub fn save_png(&self, path: &Path) -> Result<()> {
        let bytes: Vec<u8> = self.values.iter().map(|&v| quantize(clamp_unit(v))).collect();
        let file = File::create(path).map_err(|source| Error::Write {
            path: path.to_path_buf(),
            source,
        })?;
        PngEncoder::new(BufWriter::new(file))
            .write_image(&bytes, self.width as u32, self.height as u32, ExtendedColorType::L8)
            .map_err(|e| encode_error(path, e))
    }
}

/// Per-channel 256-bin intensity histogram.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Histogram {
    pub counts: [[u64; HISTOGRAM_BINS]; 3],
    pub total: u64,
}

impl Histogram {
    /// Bin index for a value under the top-edge convention: 1.0 lands in the last bin.
    pub fn bin_of(v: f64) -> usize {
        ((v * HISTOGRAM_BINS as f64) as usize).min(HISTOGRAM_BINS - 1)
    }
}

/// Rec. 601 luma, arranged around the green channel so gray pixels map to
/// exactly their own value.
pub fn luma(p: [f64; 3]) -> f64 {
    p[1] + LUMA_WEIGHTS[0] * (p[0] - p[1]) + LUMA_WEIGHTS[2] * (p[2] - p[1])
}

pub(crate) fn clamp_unit(v: f64) -> f64 {
    if v.is_nan() {
        0.0
    } else {
        v.clamp(0.0, 1.0)
    }
}

pub(crate) fn check_dims(left: (usize, usize), right: (usize, usize)) -> Result<()> {
    if left == right {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { left, right })
    }
}

fn quantize(v: f64) -> u8 {
    (v * 255.0).round() as u8
}

fn encode_error(path: &Path, e: ImageError) -> Error {
    match e {
        ImageError::IoError(source) => Error::Write {
            path: path.to_path_buf(),
            source,
        },
        other => Error::Encode {
            path: path.to_path_buf(),
            message: other.to_string(),
        },
    }
}

/// Decodes a PNG, PPM or JPEG file into a normalized RGB image.
///
/// Integer samples are divided by the maximum code value of their bit depth.
/// Grayscale inputs are replicated to three channels; alpha is discarded.
pub fn load_image(path: impl AsRef<Path>) -> Result<RasterImage> {
    let path = path.as_ref();
    let reader = ImageReader::open(path)
        .map_err(|source| Error::Read {
            path: path.to_path_buf(),
            source,
        })?
        .with_guessed_format()
        .map_err(|source| Error::Read {
            path: path.to_path_buf(),
            source,
        })?;
    let decoded = reader.decode().map_err(|e| match e {
        ImageError::Unsupported(u) => Error::UnsupportedFormat(format!("{}: {u}", path.display())),
        other => Error::Decode {
            path: path.to_path_buf(),
            message: other.to_string(),
        },
    })?;
    from_dynamic(decoded)
}

fn from_dynamic(decoded: DynamicImage) -> Result<RasterImage> {
    let (w, h) = (decoded.width() as usize, decoded.height() as usize);
    if w == 0 || h == 0 {
        return Err(Error::EmptyImage);
    }
    let pixels: Vec<[f64; 3]> = match decoded {
        DynamicImage::ImageLuma8(_)
        | DynamicImage::ImageLumaA8(_)
        | DynamicImage::ImageRgb8(_)
        | DynamicImage::ImageRgba8(_) => decoded
            .into_rgb8()
            .pixels()
            .map(|p| p.0.map(|c| c as f64 / 255.0))
            .collect(),
        DynamicImage::ImageLuma16(_)
        | DynamicImage::ImageLumaA16(_)
        | DynamicImage::ImageRgb16(_)
        | DynamicImage::ImageRgba16(_) => decoded
            .into_rgb16()
            .pixels()
            .map(|p| p.0.map(|c| c as f64 / 65535.0))
            .collect(),
        other => other
            .into_rgb32f()
            .pixels()
            .map(|p| p.0.map(|c| clamp_unit(c as f64)))
            .collect(),
    };
    RasterImage::new(w, h, pixels)
}

/// Writes an 8-bit PNG or binary PPM chosen by the file extension.
/// Samples are quantized with `round(v * 255)`.
pub fn save_image(img: &RasterImage, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let ext = path
        .extension()
        .and_then(|e| e.to_str())
        .map(|e| e.to_ascii_lowercase())
        .unwrap_or_default();
    if !matches!(ext.as_str(), "png" | "ppm") {
        return Err(Error::UnsupportedFormat(format!(
            "cannot write '{}': expected .png or .ppm",
            path.display()
        )));
    }
    let bytes: Vec<u8> = img.pixels.iter().flat_map(|p| p.map(quantize)).collect();
    let file = File::create(path).map_err(|source| Error::Write {
        path: path.to_path_buf(),
        source,
    })?;
    let out = BufWriter::new(file);
    let (w, h) = (img.width as u32, img.height as u32);
    let result = if ext == "png" {
        PngEncoder::new(out).write_image(&bytes, w, h, ExtendedColorType::Rgb8)
    } else {
        PnmEncoder::new(out)
            .with_subtype(PnmSubtype::Pixmap(SampleEncoding::Binary))
            .write_image(&bytes, w, h, ExtendedColorType::Rgb8)
    };
    result.map_err(|e| encode_error(path, e))
}

/// Arithmetic mean over all pixels and channels.
pub fn mean_intensity(img: &RasterImage) -> f64 {
    let sum: f64 = img.pixels.iter().flatten().sum();
    sum / (img.pixels.len() * 3) as f64
}

/// Population standard deviation over all channel samples.
pub fn intensity_stddev(img: &RasterImage) -> f64 {
    let mean = mean_intensity(img);
    let ss: f64 = img.pixels.iter().flatten().map(|v| (v - mean) * (v - mean)).sum();
    (ss / (img.pixels.len() * 3) as f64).sqrt()
}

pub fn histogram(img: &RasterImage) -> Histogram {
    let mut counts = [[0u64; HISTOGRAM_BINS]; 3];
    for p in &img.pixels {
        for (c, &v) in p.iter().enumerate() {
            counts[c][Histogram::bin_of(v)] += 1;
        }
    }
    Histogram {
        counts,
        total: img.pixels.len() as u64,
    }
}
