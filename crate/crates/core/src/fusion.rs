//! Multi-scale blending of the exposure stack and the end-to-end enhancer.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::exposure::{build_stack, ClaheParams, ExposureStack, GammaSchedule};
use crate::image::{check_dims, GrayMap, RasterImage};
use crate::pyramid::{collapse_planes, gaussian_pyramid, laplacian_from_planes, FusionParams, LaplacianPyramid};
use crate::weights::{analyze_stack, ConfidenceParams, WeightAnalysis};

/// All tunables of the enhancement pipeline.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct EnhanceConfig {
    pub schedule: GammaSchedule,
    pub clahe: ClaheParams,
    pub confidence: ConfidenceParams,
    pub fusion: FusionParams,
}

impl EnhanceConfig {
    pub fn validate(&self) -> Result<()> {
        self.schedule.validate()?;
        self.clahe.validate()?;
        self.confidence.validate()
    }
}

/// Blends per-image Laplacian pyramids under Gaussian pyramids of the weights
/// and returns the fused pyramid. Inputs are raw channel planes; nothing is
/// clamped.
pub fn fuse_pyramid(images: &[[GrayMap; 3]], weights: &[GrayMap], params: &FusionParams) -> Result<LaplacianPyramid> {
    if images.is_empty() {
        return Err(Error::InvalidParameter("nothing to fuse".into()));
    }
    if images.len() != weights.len() {
        return Err(Error::StackSizeMismatch {
            expected: images.len(),
            actual: weights.len(),
        });
    }
    let dims = images[0][0].dims();
    for planes in images {
        for p in planes {
            check_dims(dims, p.dims())?;
        }
    }
    for w in weights {
        check_dims(dims, w.dims())?;
    }
    let n = params.resolve(dims.0, dims.1)?;
    let fixed = FusionParams::with_levels(n);

    let image_pyramids: Vec<LaplacianPyramid> =
        images.par_iter().map(|planes| laplacian_from_planes(planes, n)).collect();
    let weight_pyramids = weights
        .par_iter()
        .map(|w| gaussian_pyramid(w, &fixed))
        .collect::<Result<Vec<_>>>()?;

    let blend = |level: usize, pick: &dyn Fn(&LaplacianPyramid) -> &[GrayMap; 3]| -> [GrayMap; 3] {
        let (w, h) = pick(&image_pyramids[0])[0].dims();
        std::array::from_fn(|c| {
            let mut acc = vec![0.0; w * h];
            for (pyr, wp) in image_pyramids.iter().zip(&weight_pyramids) {
                let band = pick(pyr)[c].values();
                let weight = wp.levels[level].values();
                for ((a, b), k) in acc.iter_mut().zip(band).zip(weight) {
                    *a += k * b;
                }
            }
            GrayMap::from_raw(w, h, acc)
        })
    };

    let detail = (0..n - 1).map(|i| blend(i, &|p| &p.detail[i])).collect();
    let residual = blend(n - 1, &|p| &p.residual);
    Ok(LaplacianPyramid { detail, residual })
}

/// Fused channel planes before the final clamp.
pub fn fuse_planes(images: &[[GrayMap; 3]], weights: &[GrayMap], params: &FusionParams) -> Result<[GrayMap; 3]> {
    collapse_planes(&fuse_pyramid(images, weights, params)?)
}

/// Fuses the stack under normalized weight maps; the result is clamped to `[0, 1]`.
pub fn fuse(stack: &ExposureStack, weights: &[GrayMap], params: &FusionParams) -> Result<RasterImage> {
    let planes: Vec<[GrayMap; 3]> = stack.images().iter().map(RasterImage::planes).collect();
    RasterImage::from_planes_clamped(&fuse_planes(&planes, weights, params)?)
}

/// Everything computed on the way to an enhanced image.
#[derive(Debug, Clone)]
pub struct EnhanceTrace {
    pub stack: ExposureStack,
    pub analysis: WeightAnalysis,
    pub fused: LaplacianPyramid,
    pub output: RasterImage,
}

pub fn enhance_traced(img: &RasterImage, config: &EnhanceConfig) -> Result<EnhanceTrace> {
    config.validate()?;
    let stack = build_stack(img, &config.schedule, &config.clahe)?;
    let analysis = analyze_stack(&stack, &config.confidence)?;
    let planes: Vec<[GrayMap; 3]> = stack.images().iter().map(RasterImage::planes).collect();
    let fused = fuse_pyramid(&planes, &analysis.weights, &config.fusion)?;
    let output = RasterImage::from_planes_clamped(&collapse_planes(&fused)?)?;
    Ok(EnhanceTrace {
        stack,
        analysis,
        fused,
        output,
    })
}

/// Exposure stack, weight maps and pyramid fusion in one call.
pub fn enhance(img: &RasterImage, config: &EnhanceConfig) -> Result<RasterImage> {
    Ok(enhance_traced(img, config)?.output)
}
