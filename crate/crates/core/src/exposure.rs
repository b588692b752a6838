//! Synthesis of the multi-exposure stack from a single input image.
//!
//! The stack holds four power-law (gamma) variants followed by one CLAHE
//! variant. Which four gamma factors are used depends on whether the input's
//! mean intensity falls below a threshold.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::image::{clamp_unit, mean_intensity, GrayMap, RasterImage};

/// Number of images in an exposure stack.
pub const STACK_SIZE: usize = 5;

/// Number of gamma variants in an exposure stack.
pub const GAMMA_VARIANTS: usize = 4;

/// Adaptive choice of gamma factors keyed on mean image intensity.
#[derive(Debug, Clone, PartialEq)]
pub struct GammaSchedule {
    /// Used when the mean intensity is below `threshold`.
    pub dark_set: [f64; GAMMA_VARIANTS],
    /// Used when the mean intensity is at or above `threshold`.
    pub bright_set: [f64; GAMMA_VARIANTS],
    pub threshold: f64,
}

impl Default for GammaSchedule {
    fn default() -> Self {
        Self {
            dark_set: [1.2, 1.4, 1.6, 1.8],
            bright_set: [2.0, 3.0, 4.0, 5.0],
            threshold: 0.5,
        }
    }
}

impl GammaSchedule {
    pub fn validate(&self) -> Result<()> {
        for (name, set) in [("dark", &self.dark_set), ("bright", &self.bright_set)] {
            if set.iter().any(|g| !(g.is_finite() && *g > 0.0)) {
                return Err(Error::InvalidParameter(format!(
                    "{name} gamma factors must be positive, got {set:?}"
                )));
            }
            if set.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::InvalidParameter(format!(
                    "{name} gamma factors must be strictly increasing, got {set:?}"
                )));
            }
        }
        if !(0.0..=1.0).contains(&self.threshold) {
            return Err(Error::InvalidParameter(format!(
                "gamma threshold {} outside [0, 1]",
                self.threshold
            )));
        }
        Ok(())
    }
}

/// Contrast-limited adaptive histogram equalization settings.
#[derive(Debug, Clone, PartialEq)]
pub struct ClaheParams {
    pub tiles_x: usize,
    pub tiles_y: usize,
    /// Clip height as a multiple of the mean bin count (`tile pixels / bins`).
    pub clip_limit: f64,
    pub bins: usize,
}

impl Default for ClaheParams {
    fn default() -> Self {
        Self {
            tiles_x: 8,
            tiles_y: 8,
            clip_limit: 2.0,
            bins: 256,
        }
    }
}

impl ClaheParams {
    pub fn validate(&self) -> Result<()> {
        if self.tiles_x == 0 || self.tiles_y == 0 {
            return Err(Error::InvalidParameter("CLAHE tile grid must be at least 1x1".into()));
        }
        if !(self.clip_limit > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "CLAHE clip limit must be positive, got {}",
                self.clip_limit
            )));
        }
        if self.bins < 2 {
            return Err(Error::InvalidParameter("CLAHE needs at least 2 bins".into()));
        }
        Ok(())
    }
}

/// Four gamma variants in ascending gamma order followed by the CLAHE variant.
#[derive(Debug, Clone, PartialEq)]
pub struct ExposureStack {
    images: Vec<RasterImage>,
}

impl ExposureStack {
    pub fn new(images: Vec<RasterImage>) -> Result<Self> {
        if images.len() != STACK_SIZE {
            return Err(Error::StackSizeMismatch {
                expected: STACK_SIZE,
                actual: images.len(),
            });
        }
        let dims = images[0].dims();
        for img in &images[1..] {
            crate::image::check_dims(dims, img.dims())?;
        }
        Ok(Self { images })
    }

    pub fn images(&self) -> &[RasterImage] {
        &self.images
    }

    pub fn source_dims(&self) -> (usize, usize) {
        self.images[0].dims()
    }

    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// Power-law transform `v -> v^gamma` on every channel.
pub fn gamma_correct(img: &RasterImage, gamma: f64) -> Result<RasterImage> {
    if !(gamma.is_finite() && gamma > 0.0) {
        return Err(Error::InvalidParameter(format!("gamma must be positive, got {gamma}")));
    }
    Ok(img.map_channels(|v| v.powf(gamma)))
}

pub fn select_gamma_set(mean: f64, schedule: &GammaSchedule) -> [f64; GAMMA_VARIANTS] {
    if mean < schedule.threshold {
        schedule.dark_set
    } else {
        schedule.bright_set
    }
}

/// CLAHE applied to luminance; each RGB channel is then scaled by the
/// luminance gain so hue is preserved. Black pixels take the mapped luminance
/// directly.
pub fn clahe(img: &RasterImage, params: &ClaheParams) -> Result<RasterImage> {
    let lum = img.luminance();
    let mapped = clahe_gray(&lum, params)?;
    let pixels = img
        .pixels()
        .iter()
        .zip(lum.values().iter().zip(mapped.values()))
        .map(|(p, (&y, &y_new))| {
            if y > 1e-12 {
                let gain = y_new / y;
                p.map(|c| clamp_unit(c * gain))
            } else {
                [clamp_unit(y_new); 3]
            }
        })
        .collect();
    RasterImage::new(img.width(), img.height(), pixels)
}

/// CLAHE on a single `[0, 1]` channel.
pub fn clahe_gray(map: &GrayMap, params: &ClaheParams) -> Result<GrayMap> {
    params.validate()?;
    let (w, h) = map.dims();
    let (tx, ty) = (params.tiles_x, params.tiles_y);
    if w < tx || h < ty {
        return Err(Error::ImageSmallerThanTiles {
            width: w,
            height: h,
            grid_x: tx,
            grid_y: ty,
        });
    }
    let bins = params.bins;
    let bin_of = |v: f64| ((clamp_unit(v) * bins as f64) as usize).min(bins - 1);
    let binned: Vec<usize> = map.values().iter().map(|&v| bin_of(v)).collect();

    // Tiles cover an edge-replicated padding of the image to a multiple of the grid.
    let tile_w = w.div_ceil(tx);
    let tile_h = h.div_ceil(ty);
    let tile_pixels = (tile_w * tile_h) as f64;
    let clip = params.clip_limit * tile_pixels / bins as f64;

    let luts: Vec<Vec<f64>> = (0..tx * ty)
        .into_par_iter()
        .map(|t| {
            let (tcol, trow) = (t % tx, t / tx);
            let mut hist = vec![0.0f64; bins];
            for py in trow * tile_h..(trow + 1) * tile_h {
                let sy = py.min(h - 1);
                for px in tcol * tile_w..(tcol + 1) * tile_w {
                    hist[binned[sy * w + px.min(w - 1)]] += 1.0;
                }
            }
            clip_histogram(&mut hist, clip);
            equalization_lut(&hist, tile_pixels)
        })
        .collect();

    let axis = |pos: usize, tile: usize, count: usize| -> (usize, usize, f64) {
        let g = ((pos as f64 + 0.5) / tile as f64 - 0.5).clamp(0.0, (count - 1) as f64);
        let lo = g.floor() as usize;
        let hi = (lo + 1).min(count - 1);
        (lo, hi, g - lo as f64)
    };

    let mut out = vec![0.0; w * h];
    out.par_chunks_mut(w).enumerate().for_each(|(y, row)| {
        let (y0, y1, fy) = axis(y, tile_h, ty);
        for (x, slot) in row.iter_mut().enumerate() {
            let (x0, x1, fx) = axis(x, tile_w, tx);
            let b = binned[y * w + x];
            let top = (1.0 - fx) * luts[y0 * tx + x0][b] + fx * luts[y0 * tx + x1][b];
            let bottom = (1.0 - fx) * luts[y1 * tx + x0][b] + fx * luts[y1 * tx + x1][b];
            *slot = clamp_unit((1.0 - fy) * top + fy * bottom);
        }
    });
    Ok(GrayMap::from_raw(w, h, out))
}

/// Clips every bin at `limit` and spreads the total excess uniformly over all
/// bins in a single pass. Returns the excess that was redistributed.
pub(crate) fn clip_histogram(hist: &mut [f64], limit: f64) -> f64 {
    let mut excess = 0.0;
    for count in hist.iter_mut() {
        if *count > limit {
            excess += *count - limit;
            *count = limit;
        }
    }
    let share = excess / hist.len() as f64;
    for count in hist.iter_mut() {
        *count += share;
    }
    excess
}

/// Mid-bin cumulative mapping: bin `b` maps to `(sum of bins below b + hist[b] / 2) / total`.
fn equalization_lut(hist: &[f64], total: f64) -> Vec<f64> {
    let mut below = 0.0;
    hist.iter()
        .map(|&count| {
            let v = (below + 0.5 * count) / total;
            below += count;
            clamp_unit(v)
        })
        .collect()
}

/// Builds the five-image exposure stack: gamma variants in ascending order, CLAHE last.
pub fn build_stack(img: &RasterImage, schedule: &GammaSchedule, clahe_params: &ClaheParams) -> Result<ExposureStack> {
    schedule.validate()?;
    clahe_params.validate()?;
    let gammas = select_gamma_set(mean_intensity(img), schedule);
    let (gamma_images, clahe_image) = rayon::join(
        || {
            gammas
                .par_iter()
                .map(|&g| gamma_correct(img, g))
                .collect::<Result<Vec<_>>>()
        },
        || clahe(img, clahe_params),
    );
    let mut images = gamma_images?;
    images.push(clahe_image?);
    ExposureStack::new(images)
}
