//! Gaussian and Laplacian pyramids.
//!
//! Reduction blurs with the 5-tap binomial kernel `(1, 4, 6, 4, 1) / 16` and
//! halves each axis to `ceil(n / 2)` samples. Odd-length axes keep the even
//! samples. Even-length axes average adjacent blurred pairs, which puts the
//! coarse samples at half-pixel positions; the effective kernel is then the
//! 6-tap binomial. Both choices are mirror-symmetric, so a pyramid of a
//! flipped image is the flipped pyramid. Expansion is the matching
//! interpolator and reproduces constants exactly, edges included.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::image::{GrayMap, RasterImage};

const MIN_AUTO_COARSEST: usize = 4;

/// Pyramid depth selection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct FusionParams {
    /// Number of levels; `None` picks a depth from the image size.
    pub levels: Option<usize>,
}

impl FusionParams {
    pub fn with_levels(levels: usize) -> Self {
        Self { levels: Some(levels) }
    }

    /// Resolves the level count for a `width x height` image.
    ///
    /// The automatic depth is `floor(log2(min side)) - 2` clamped to `[3, 8]`,
    /// then reduced until the coarsest level is at least 4 pixels per side.
    pub fn resolve(&self, width: usize, height: usize) -> Result<usize> {
        match self.levels {
            Some(n) => {
                check_levels(width, height, n)?;
                Ok(n)
            }
            None => Ok(auto_levels(width, height)),
        }
    }
}

fn auto_levels(width: usize, height: usize) -> usize {
    let min_side = width.min(height).max(1);
    let log2 = usize::BITS as usize - 1 - min_side.leading_zeros() as usize;
    let mut n = log2.saturating_sub(2).clamp(3, 8);
    while n > 1 && coarsest_side(min_side, n) < MIN_AUTO_COARSEST {
        n -= 1;
    }
    n
}

fn coarsest_side(side: usize, levels: usize) -> usize {
    (1..levels).fold(side, |s, _| s.div_ceil(2))
}

/// Every level below the base must keep at least 2 pixels per side.
fn check_levels(width: usize, height: usize, levels: usize) -> Result<()> {
    let too_small = Error::TooSmallForPyramid {
        width,
        height,
        levels,
    };
    if levels == 0 || width == 0 || height == 0 {
        return Err(too_small);
    }
    if levels > 1 && coarsest_side(width.min(height), levels) < 2 {
        return Err(too_small);
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianPyramid {
    pub levels: Vec<GrayMap>,
}

/// Band-pass levels of an RGB image plus the low-pass residual.
#[derive(Debug, Clone, PartialEq)]
pub struct LaplacianPyramid {
    /// Finest first. `detail.len()` is the level count minus one.
    pub detail: Vec<[GrayMap; 3]>,
    pub residual: [GrayMap; 3],
}

impl LaplacianPyramid {
    pub fn level_count(&self) -> usize {
        self.detail.len() + 1
    }
}

fn blur_line(src: &[f64], dst: &mut [f64]) {
    let n = src.len();
    let at = |i: isize| src[i.clamp(0, n as isize - 1) as usize];
    for (i, out) in dst.iter_mut().enumerate() {
        let i = i as isize;
        *out = (at(i - 2) + 4.0 * at(i - 1) + 6.0 * at(i) + 4.0 * at(i + 1) + at(i + 2)) / 16.0;
    }
}

fn reduce_line(src: &[f64], scratch: &mut [f64], dst: &mut [f64]) {
    blur_line(src, scratch);
    if src.len() % 2 == 1 {
        for (i, out) in dst.iter_mut().enumerate() {
            *out = scratch[2 * i];
        }
    } else {
        for (i, out) in dst.iter_mut().enumerate() {
            *out = 0.5 * (scratch[2 * i] + scratch[2 * i + 1]);
        }
    }
}

/// Expands `src` (length `ceil(dst.len() / 2)`) to `dst.len()` samples.
fn expand_line(src: &[f64], dst: &mut [f64]) {
    let m = src.len();
    let at = |i: isize| src[i.clamp(0, m as isize - 1) as usize];
    let odd = dst.len() % 2 == 1;
    for (j, out) in dst.iter_mut().enumerate() {
        let i = (j / 2) as isize;
        *out = match (odd, j % 2 == 0) {
            (true, true) => (at(i - 1) + 6.0 * at(i) + at(i + 1)) / 8.0,
            (true, false) => 0.5 * (at(i) + at(i + 1)),
            (false, true) => (5.0 * at(i - 1) + 10.0 * at(i) + at(i + 1)) / 16.0,
            (false, false) => (at(i - 1) + 10.0 * at(i) + 5.0 * at(i + 1)) / 16.0,
        };
    }
}

/// Applies a 1-D resampler along rows, then along columns.
fn separable(map: &GrayMap, out_w: usize, out_h: usize, line: impl Fn(&[f64], &mut [f64]) + Sync) -> GrayMap {
    let (w, h) = map.dims();
    let mut rows = vec![0.0; out_w * h];
    rows.par_chunks_mut(out_w)
        .zip(map.values().par_chunks(w))
        .for_each(|(dst, src)| line(src, dst));

    let mut cols = vec![0.0; out_w * out_h];
    let columns: Vec<Vec<f64>> = (0..out_w)
        .into_par_iter()
        .map(|x| {
            let src: Vec<f64> = (0..h).map(|y| rows[y * out_w + x]).collect();
            let mut dst = vec![0.0; out_h];
            line(&src, &mut dst);
            dst
        })
        .collect();
    for (x, col) in columns.iter().enumerate() {
        for (y, v) in col.iter().enumerate() {
            cols[y * out_w + x] = *v;
        }
    }
    GrayMap::from_raw(out_w, out_h, cols)
}

/// Blurs and halves a map (`ceil` on odd sides).
pub fn reduce(map: &GrayMap) -> GrayMap {
    let (w, h) = map.dims();
    separable(map, w.div_ceil(2), h.div_ceil(2), |src, dst| {
        let mut scratch = vec![0.0; src.len()];
        reduce_line(src, &mut scratch, dst)
    })
}

/// Interpolates a coarse map up to `width x height`, the size it was reduced from.
pub fn expand(map: &GrayMap, width: usize, height: usize) -> Result<GrayMap> {
    if map.width() != width.div_ceil(2) || map.height() != height.div_ceil(2) {
        return Err(Error::DimensionMismatch {
            left: map.dims(),
            right: (width.div_ceil(2), height.div_ceil(2)),
        });
    }
    Ok(separable(map, width, height, expand_line))
}

pub fn gaussian_pyramid(map: &GrayMap, params: &FusionParams) -> Result<GaussianPyramid> {
    let n = params.resolve(map.width(), map.height())?;
    Ok(gaussian_levels(map, n))
}

fn gaussian_levels(map: &GrayMap, n: usize) -> GaussianPyramid {
    let mut levels = Vec::with_capacity(n);
    levels.push(map.clone());
    for _ in 1..n {
        let next = reduce(levels.last().expect("pyramid has a base level"));
        levels.push(next);
    }
    GaussianPyramid { levels }
}

fn laplacian_channel(plane: &GrayMap, n: usize) -> (Vec<GrayMap>, GrayMap) {
    let mut gauss = gaussian_levels(plane, n).levels;
    let residual = gauss.pop().expect("pyramid has at least one level");
    let mut detail = Vec::with_capacity(n - 1);
    for i in 0..n - 1 {
        let coarser = if i + 1 < gauss.len() { &gauss[i + 1] } else { &residual };
        let (w, h) = gauss[i].dims();
        let up = expand(coarser, w, h).expect("pyramid levels have consistent sizes");
        let values = gauss[i].values().iter().zip(up.values()).map(|(g, u)| g - u).collect();
        detail.push(GrayMap::from_raw(w, h, values));
    }
    (detail, residual)
}

/// Decomposes each channel into `N - 1` band-pass levels and a low-pass residual.
pub fn laplacian_pyramid(img: &RasterImage, params: &FusionParams) -> Result<LaplacianPyramid> {
    let n = params.resolve(img.width(), img.height())?;
    Ok(laplacian_from_planes(&img.planes(), n))
}

pub(crate) fn laplacian_from_planes(planes: &[GrayMap; 3], n: usize) -> LaplacianPyramid {
    let parts: Vec<(Vec<GrayMap>, GrayMap)> = planes.par_iter().map(|p| laplacian_channel(p, n)).collect();
    let mut parts = parts.into_iter();
    let (d0, r0) = parts.next().expect("three channels");
    let (d1, r1) = parts.next().expect("three channels");
    let (d2, r2) = parts.next().expect("three channels");
    let detail = d0
        .into_iter()
        .zip(d1)
        .zip(d2)
        .map(|((a, b), c)| [a, b, c])
        .collect();
    LaplacianPyramid {
        detail,
        residual: [r0, r1, r2],
    }
}

/// Reconstructs the channel planes without clamping.
pub fn collapse_planes(pyr: &LaplacianPyramid) -> Result<[GrayMap; 3]> {
    let mut current = pyr.residual.clone();
    for level in pyr.detail.iter().rev() {
        for c in 0..3 {
            let (w, h) = level[c].dims();
            let mut up = expand(&current[c], w, h)?;
            for (u, d) in up.values_mut().iter_mut().zip(level[c].values()) {
                *u += d;
            }
            current[c] = up;
        }
    }
    Ok(current)
}

/// Reconstructs the image, clamping into `[0, 1]`.
pub fn collapse(pyr: &LaplacianPyramid) -> Result<RasterImage> {
    RasterImage::from_planes_clamped(&collapse_planes(pyr)?)
}
