//! Full-reference image quality: MSE, PSNR and mean SSIM, optionally
//! restricted to a region of interest.

use std::path::Path;

use image::ImageReader;

use crate::error::{Error, Result};
use crate::image::{check_dims, GrayMap, RasterImage};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SsimWindow {
    /// Square box window, stride 1.
    Uniform { size: usize },
    /// Square Gaussian window with the given standard deviation, stride 1.
    Gaussian { size: usize, sigma: f64 },
}

impl SsimWindow {
    pub fn size(&self) -> usize {
        match *self {
            SsimWindow::Uniform { size } | SsimWindow::Gaussian { size, .. } => size,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SsimChannels {
    /// Rec. 601 luma only.
    Luminance,
    /// Mean of the per-channel SSIM values.
    PerChannel,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SsimParams {
    pub k1: f64,
    pub k2: f64,
    /// Dynamic range of the samples; 1.0 for normalized images.
    pub range: f64,
    pub window: SsimWindow,
    pub channels: SsimChannels,
}

impl Default for SsimParams {
    fn default() -> Self {
        Self {
            k1: 0.01,
            k2: 0.03,
            range: 1.0,
            window: SsimWindow::Uniform { size: 8 },
            channels: SsimChannels::Luminance,
        }
    }
}

impl SsimParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.k1 > 0.0 && self.k2 > 0.0 && self.range > 0.0) {
            return Err(Error::InvalidParameter("SSIM k1, k2 and range must be positive".into()));
        }
        match self.window {
            SsimWindow::Uniform { size } if size >= 1 => Ok(()),
            SsimWindow::Gaussian { size, sigma } if size >= 1 && sigma > 0.0 => Ok(()),
            w => Err(Error::InvalidParameter(format!("invalid SSIM window {w:?}"))),
        }
    }

    pub fn c1(&self) -> f64 {
        (self.k1 * self.range).powi(2)
    }

    pub fn c2(&self) -> f64 {
        (self.k2 * self.range).powi(2)
    }
}

/// Binary region-of-interest mask.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RoiMask {
    width: usize,
    height: usize,
    inside: Vec<bool>,
}

impl RoiMask {
    pub fn new(width: usize, height: usize, inside: Vec<bool>) -> Result<Self> {
        if inside.len() != width * height {
            return Err(Error::InvalidParameter(format!(
                "mask has {} entries, expected {}",
                inside.len(),
                width * height
            )));
        }
        if !inside.iter().any(|&b| b) {
            return Err(Error::EmptyMask);
        }
        Ok(Self {
            width,
            height,
            inside,
        })
    }

    pub fn full(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            inside: vec![true; width * height],
        }
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn contains(&self, x: usize, y: usize) -> bool {
        self.inside[y * self.width + x]
    }

    pub fn count(&self) -> usize {
        self.inside.iter().filter(|&&b| b).count()
    }

    /// Reads a mask image; any nonzero color sample marks the pixel as inside.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let io = |source| Error::Read {
            path: path.to_path_buf(),
            source,
        };
        let decoded = ImageReader::open(path)
            .map_err(io)?
            .with_guessed_format()
            .map_err(io)?
            .decode()
            .map_err(|e| Error::Decode {
                path: path.to_path_buf(),
                message: e.to_string(),
            })?
            .into_rgb16();
        let (w, h) = (decoded.width() as usize, decoded.height() as usize);
        let inside = decoded.pixels().map(|p| p.0.iter().any(|&c| c != 0)).collect();
        Self::new(w, h, inside)
    }
}

/// MSE, PSNR and SSIM of one (reference, estimate) pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IqaReport {
    pub mse: f64,
    /// `f64::INFINITY` when the images are identical over the evaluated region.
    pub psnr: f64,
    pub ssim: f64,
    pub roi_applied: bool,
}

fn check_pair(reference: &RasterImage, estimate: &RasterImage, mask: Option<&RoiMask>) -> Result<()> {
    check_dims(reference.dims(), estimate.dims())?;
    if let Some(m) = mask {
        check_dims(reference.dims(), m.dims())?;
    }
    Ok(())
}

/// Mean squared channel difference over the (masked) pixels.
pub fn mse(reference: &RasterImage, estimate: &RasterImage, mask: Option<&RoiMask>) -> Result<f64> {
    check_pair(reference, estimate, mask)?;
    let mut sum = 0.0;
    let mut count = 0usize;
    for (i, (r, e)) in reference.pixels().iter().zip(estimate.pixels()).enumerate() {
        if mask.is_some_and(|m| !m.inside[i]) {
            continue;
        }
        sum += (0..3).map(|c| (r[c] - e[c]) * (r[c] - e[c])).sum::<f64>();
        count += 1;
    }
    if count == 0 {
        return Err(Error::EmptyMask);
    }
    Ok(sum / (3 * count) as f64)
}

/// `10 log10(range^2 / mse)`; zero error gives `+inf`.
pub fn psnr_from_mse(mse: f64, range: f64) -> f64 {
    if mse == 0.0 {
        f64::INFINITY
    } else {
        10.0 * (range * range / mse).log10()
    }
}

pub fn psnr(reference: &RasterImage, estimate: &RasterImage, mask: Option<&RoiMask>) -> Result<f64> {
    Ok(psnr_from_mse(mse(reference, estimate, mask)?, 1.0))
}

/// Local first and second moments of two planes for every window position.
struct WindowStats {
    cols: usize,
    rows: usize,
    mean_a: Vec<f64>,
    mean_b: Vec<f64>,
    var_a: Vec<f64>,
    var_b: Vec<f64>,
    cov: Vec<f64>,
}

fn uniform_stats(a: &GrayMap, b: &GrayMap, size: usize) -> WindowStats {
    let (w, h) = a.dims();
    // Summed-area tables with a zero first row and column.
    let sat = |f: &dyn Fn(usize) -> f64| -> Vec<f64> {
        let mut t = vec![0.0; (w + 1) * (h + 1)];
        for y in 0..h {
            let mut row = 0.0;
            for x in 0..w {
                row += f(y * w + x);
                t[(y + 1) * (w + 1) + x + 1] = t[y * (w + 1) + x + 1] + row;
            }
        }
        t
    };
    let (av, bv) = (a.values(), b.values());
    let tables = [
        sat(&|i| av[i]),
        sat(&|i| bv[i]),
        sat(&|i| av[i] * av[i]),
        sat(&|i| bv[i] * bv[i]),
        sat(&|i| av[i] * bv[i]),
    ];
    let (cols, rows) = (w - size + 1, h - size + 1);
    let n = (size * size) as f64;
    let boxed = |t: &[f64], x: usize, y: usize| {
        let s = w + 1;
        (t[(y + size) * s + x + size] - t[y * s + x + size] - t[(y + size) * s + x] + t[y * s + x]) / n
    };
    let mut stats = WindowStats {
        cols,
        rows,
        mean_a: Vec::with_capacity(cols * rows),
        mean_b: Vec::with_capacity(cols * rows),
        var_a: Vec::with_capacity(cols * rows),
        var_b: Vec::with_capacity(cols * rows),
        cov: Vec::with_capacity(cols * rows),
    };
    for y in 0..rows {
        for x in 0..cols {
            let ma = boxed(&tables[0], x, y);
            let mb = boxed(&tables[1], x, y);
            stats.mean_a.push(ma);
            stats.mean_b.push(mb);
            stats.var_a.push(boxed(&tables[2], x, y) - ma * ma);
            stats.var_b.push(boxed(&tables[3], x, y) - mb * mb);
            stats.cov.push(boxed(&tables[4], x, y) - ma * mb);
        }
    }
    stats
}

fn gaussian_kernel(size: usize, sigma: f64) -> Vec<f64> {
    let center = (size as f64 - 1.0) / 2.0;
    let raw: Vec<f64> = (0..size)
        .map(|i| {
            let d = i as f64 - center;
            (-d * d / (2.0 * sigma * sigma)).exp()
        })
        .collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|v| v / total).collect()
}

/// Separable weighted sums over every valid window position.
fn weighted_windows(values: &[f64], w: usize, h: usize, kernel: &[f64]) -> Vec<f64> {
    let size = kernel.len();
    let (cols, rows) = (w - size + 1, h - size + 1);
    let mut horizontal = vec![0.0; cols * h];
    for y in 0..h {
        for x in 0..cols {
            horizontal[y * cols + x] = kernel.iter().enumerate().map(|(k, wk)| wk * values[y * w + x + k]).sum();
        }
    }
    let mut out = vec![0.0; cols * rows];
    for y in 0..rows {
        for x in 0..cols {
            out[y * cols + x] = kernel
                .iter()
                .enumerate()
                .map(|(k, wk)| wk * horizontal[(y + k) * cols + x])
                .sum();
        }
    }
    out
}

fn gaussian_stats(a: &GrayMap, b: &GrayMap, size: usize, sigma: f64) -> WindowStats {
    let (w, h) = a.dims();
    let kernel = gaussian_kernel(size, sigma);
    let (av, bv) = (a.values(), b.values());
    let product = |f: &dyn Fn(usize) -> f64| -> Vec<f64> { (0..w * h).map(f).collect() };
    let mean_a = weighted_windows(av, w, h, &kernel);
    let mean_b = weighted_windows(bv, w, h, &kernel);
    let sq_a = weighted_windows(&product(&|i| av[i] * av[i]), w, h, &kernel);
    let sq_b = weighted_windows(&product(&|i| bv[i] * bv[i]), w, h, &kernel);
    let cross = weighted_windows(&product(&|i| av[i] * bv[i]), w, h, &kernel);
    let var_a = sq_a.iter().zip(&mean_a).map(|(s, m)| s - m * m).collect();
    let var_b = sq_b.iter().zip(&mean_b).map(|(s, m)| s - m * m).collect();
    let cov = cross
        .iter()
        .zip(mean_a.iter().zip(&mean_b))
        .map(|(s, (ma, mb))| s - ma * mb)
        .collect();
    WindowStats {
        cols: w - size + 1,
        rows: h - size + 1,
        mean_a,
        mean_b,
        var_a,
        var_b,
        cov,
    }
}

/// SSIM of one window from its moments.
pub fn ssim_from_moments(mean_a: f64, mean_b: f64, var_a: f64, var_b: f64, cov: f64, c1: f64, c2: f64) -> f64 {
    ((2.0 * mean_a * mean_b + c1) * (2.0 * cov + c2)) / ((mean_a * mean_a + mean_b * mean_b + c1) * (var_a + var_b + c2))
}

fn plane_ssim(a: &GrayMap, b: &GrayMap, params: &SsimParams, mask: Option<&RoiMask>) -> Result<f64> {
    let size = params.window.size();
    let stats = match params.window {
        SsimWindow::Uniform { size } => uniform_stats(a, b, size),
        SsimWindow::Gaussian { size, sigma } => gaussian_stats(a, b, size, sigma),
    };
    let (c1, c2) = (params.c1(), params.c2());
    let offset = size / 2;
    let mut sum = 0.0;
    let mut count = 0usize;
    for y in 0..stats.rows {
        for x in 0..stats.cols {
            if mask.is_some_and(|m| !m.contains(x + offset, y + offset)) {
                continue;
            }
            let i = y * stats.cols + x;
            sum += ssim_from_moments(
                stats.mean_a[i],
                stats.mean_b[i],
                stats.var_a[i],
                stats.var_b[i],
                stats.cov[i],
                c1,
                c2,
            );
            count += 1;
        }
    }
    if count == 0 {
        return Err(Error::EmptyMask);
    }
    Ok(sum / count as f64)
}

/// Mean SSIM over all windows whose center pixel lies in the mask.
///
/// The center of an even-sized window is the pixel at offset `size / 2`.
pub fn ssim(reference: &RasterImage, estimate: &RasterImage, params: &SsimParams, mask: Option<&RoiMask>) -> Result<f64> {
    params.validate()?;
    check_pair(reference, estimate, mask)?;
    let size = params.window.size();
    let (w, h) = reference.dims();
    if w < size || h < size {
        return Err(Error::SmallerThanWindow {
            width: w,
            height: h,
            window: size,
        });
    }
    match params.channels {
        SsimChannels::Luminance => plane_ssim(&reference.luminance(), &estimate.luminance(), params, mask),
        SsimChannels::PerChannel => {
            let (rp, ep) = (reference.planes(), estimate.planes());
            let mut total = 0.0;
            for c in 0..3 {
                total += plane_ssim(&rp[c], &ep[c], params, mask)?;
            }
            Ok(total / 3.0)
        }
    }
}

/// All three metrics under the same mask.
pub fn evaluate_pair(
    reference: &RasterImage,
    estimate: &RasterImage,
    mask: Option<&RoiMask>,
    params: &SsimParams,
) -> Result<IqaReport> {
    let mse = mse(reference, estimate, mask)?;
    Ok(IqaReport {
        mse,
        psnr: psnr_from_mse(mse, params.range),
        ssim: ssim(reference, estimate, params, mask)?,
        roi_applied: mask.is_some(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn random_image(w: usize, h: usize, seed: u64) -> RasterImage {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        RasterImage::from_fn(w, h, |_, _| [rng.gen(), rng.gen(), rng.gen()]).unwrap()
    }

    #[test]
    fn mse_cases() {
        let a = RasterImage::from_fn(6, 6, |x, y| [x as f64 / 10.0, y as f64 / 10.0, 0.2]).unwrap();
        assert_eq!(mse(&a, &a, None).unwrap(), 0.0);
        let shifted = a.map_channels(|v| v + 0.1);
        assert!((mse(&a, &shifted, None).unwrap() - 0.01).abs() < 1e-15);

        let b = RasterImage::from_fn(6, 6, |x, y| if x < 3 { a.pixel(x, y) } else { [1.0; 3] }).unwrap();
        let left = RoiMask::new(6, 6, (0..36).map(|i| i % 6 < 3).collect()).unwrap();
        assert_eq!(mse(&a, &b, Some(&left)).unwrap(), 0.0);
        assert!(mse(&a, &b, None).unwrap() > 0.0);
    }

    #[test]
    fn psnr_cases() {
        assert!((psnr_from_mse(0.01, 1.0) - 20.0).abs() < 1e-12);
        assert_eq!(psnr_from_mse(1.0, 1.0), 0.0);
        let a = random_image(5, 5, 1);
        assert_eq!(psnr(&a, &a, None).unwrap(), f64::INFINITY);
    }

    #[test]
    fn mismatches_and_empty_mask() {
        let a = random_image(8, 8, 1);
        let b = random_image(8, 9, 2);
        assert!(matches!(mse(&a, &b, None), Err(Error::DimensionMismatch { .. })));
        assert!(matches!(ssim(&a, &b, &SsimParams::default(), None), Err(Error::DimensionMismatch { .. })));
        assert!(matches!(RoiMask::new(2, 2, vec![false; 4]), Err(Error::EmptyMask)));
        let small = random_image(7, 9, 3);
        assert!(matches!(
            ssim(&small, &small, &SsimParams::default(), None),
            Err(Error::SmallerThanWindow { .. })
        ));
    }

    #[test]
    fn ssim_identity() {
        let a = random_image(20, 17, 5);
        for params in [
            SsimParams::default(),
            SsimParams {
                window: SsimWindow::Gaussian { size: 11, sigma: 1.5 },
                ..Default::default()
            },
            SsimParams {
                channels: SsimChannels::PerChannel,
                ..Default::default()
            },
        ] {
            assert!((ssim(&a, &a, &params, None).unwrap() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn ssim_constant_closed_form() {
        let (a, b) = (0.3, 0.7);
        let ia = RasterImage::constant(10, 10, [a; 3]).unwrap();
        let ib = RasterImage::constant(10, 10, [b; 3]).unwrap();
        let p = SsimParams::default();
        let (c1, c2) = (p.c1(), p.c2());
        let expected = (2.0 * a * b + c1) * c2 / ((a * a + b * b + c1) * c2);
        // Luma of a gray pixel equals the gray value up to rounding of the weights.
        assert!((ssim(&ia, &ib, &p, None).unwrap() - expected).abs() < 1e-9);
    }

    #[test]
    fn inverted_checkerboard_is_negative() {
        let board = RasterImage::from_fn(8, 8, |x, y| [if (x + y) % 2 == 0 { 0.9 } else { 0.1 }; 3]).unwrap();
        let inverted = board.map_channels(|v| 1.0 - v);
        // A single 8x8 window: equal means 0.5, variances 0.16, covariance -0.16.
        let p = SsimParams::default();
        let expected = ssim_from_moments(0.5, 0.5, 0.16, 0.16, -0.16, p.c1(), p.c2());
        let got = ssim(&board, &inverted, &p, None).unwrap();
        assert!(got < 0.0);
        assert!((got - expected).abs() < 1e-9);
    }

    #[test]
    fn full_mask_equals_unmasked_exactly() {
        let a = random_image(16, 16, 8);
        let b = random_image(16, 16, 9);
        let p = SsimParams::default();
        let full = RoiMask::full(16, 16);
        let masked = evaluate_pair(&a, &b, Some(&full), &p).unwrap();
        let plain = evaluate_pair(&a, &b, None, &p).unwrap();
        assert_eq!((masked.mse, masked.psnr, masked.ssim), (plain.mse, plain.psnr, plain.ssim));
        assert!(masked.roi_applied);
        assert!(!plain.roi_applied);
    }

    #[test]
    fn identical_pair_report() {
        let a = random_image(12, 12, 10);
        let r = evaluate_pair(&a, &a, None, &SsimParams::default()).unwrap();
        assert_eq!(r.mse, 0.0);
        assert_eq!(r.psnr, f64::INFINITY);
        assert!((r.ssim - 1.0).abs() < 1e-9);
    }

    #[test]
    fn mask_outside_window_centers_is_rejected() {
        let a = random_image(10, 10, 11);
        let corner = RoiMask::new(10, 10, (0..100).map(|i| i == 0).collect()).unwrap();
        assert!(matches!(ssim(&a, &a, &SsimParams::default(), Some(&corner)), Err(Error::EmptyMask)));
        assert_eq!(mse(&a, &a, Some(&corner)).unwrap(), 0.0);
    }

    #[test]
    fn mask_loads_from_png() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("roi.png");
        image::RgbImage::from_fn(3, 2, |x, _| if x == 1 { image::Rgb([200, 0, 0]) } else { image::Rgb([0, 0, 0]) })
            .save(&path)
            .unwrap();
        let m = RoiMask::load(&path).unwrap();
        assert_eq!(m.dims(), (3, 2));
        assert_eq!(m.count(), 2);
        assert!(m.contains(1, 1) && !m.contains(0, 0));
    }

    #[test]
    fn metrics_are_symmetric() {
        let a = random_image(16, 12, 12);
        let b = random_image(16, 12, 13);
        let p = SsimParams::default();
        assert_eq!(mse(&a, &b, None).unwrap(), mse(&b, &a, None).unwrap());
        assert!((ssim(&a, &b, &p, None).unwrap() - ssim(&b, &a, &p, None).unwrap()).abs() < 1e-12);
    }
}
