//! Per-pixel fusion weights.
//!
//! Each exposure image gets a weight map `H = P * S`, where `P` is a local
//! ternary texture feature over the 3x3 neighborhood and `S` is the channel
//! spread (saturation) of the pixel. Maps are then normalized across the
//! stack so the weights at every pixel sum to one.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::exposure::ExposureStack;
use crate::image::{GrayMap, RasterImage};

/// Raw weight sums below this are treated as degenerate and get uniform weights.
pub const WEIGHT_EPSILON: f64 = 1e-12;

/// Neighbor offsets, clockwise from the top-left.
pub const NEIGHBOR_OFFSETS: [(isize, isize); 8] = [
    (-1, -1),
    (0, -1),
    (1, -1),
    (1, 0),
    (1, 1),
    (0, 1),
    (-1, 1),
    (-1, 0),
];

/// Number of label slots in a pattern: 8 neighbors by 3 channels.
pub const PATTERN_SLOTS: usize = 24;

/// Width of the per-channel tolerance band around the center value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConfidenceParams {
    /// Minimal distinguishable difference in dB.
    pub d_min: f64,
}

impl Default for ConfidenceParams {
    fn default() -> Self {
        Self { d_min: 0.5 }
    }
}

impl ConfidenceParams {
    pub fn validate(&self) -> Result<()> {
        if self.d_min.is_finite() && self.d_min > 0.0 {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!(
                "d_min must be positive, got {}",
                self.d_min
            )))
        }
    }

    fn ratio(&self) -> f64 {
        10f64.powf(self.d_min / 20.0)
    }

    /// Relative lower margin.
    pub fn alpha(&self) -> f64 {
        let r = self.ratio();
        (r - 1.0) / r
    }

    /// Relative upper margin.
    pub fn beta(&self) -> f64 {
        self.ratio() - 1.0
    }
}

/// Lower and upper bound of the band a neighbor must fall in to be labeled 0.
pub fn confidence_interval(c0: f64, cp: &ConfidenceParams) -> (f64, f64) {
    (c0 - cp.alpha() * c0, c0 + cp.beta() * c0)
}

/// Ternary labels for the 8 neighbors of a pixel, per channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct LabelGrid {
    /// `labels[n][c]` for neighbor `n` (see [`NEIGHBOR_OFFSETS`]) and channel `c`.
    pub labels: [[i8; 3]; 8],
}

impl LabelGrid {
    pub fn nonzero_count(&self) -> usize {
        self.labels.iter().flatten().filter(|&&l| l != 0).count()
    }
}

fn label(value: f64, lower: f64, upper: f64) -> i8 {
    if value > upper {
        1
    } else if value < lower {
        -1
    } else {
        0
    }
}

/// Codes a 3x3 patch given row-major (center at index 4).
pub fn code_patch(patch: &[[f64; 3]; 9], cp: &ConfidenceParams) -> LabelGrid {
    let (alpha, beta) = (cp.alpha(), cp.beta());
    let center = patch[4];
    let bounds: [(f64, f64); 3] = center.map(|c0| (c0 - alpha * c0, c0 + beta * c0));
    let mut grid = LabelGrid::default();
    for (n, (dx, dy)) in NEIGHBOR_OFFSETS.iter().enumerate() {
        let neighbor = patch[((dy + 1) * 3 + dx + 1) as usize];
        for c in 0..3 {
            grid.labels[n][c] = label(neighbor[c], bounds[c].0, bounds[c].1);
        }
    }
    grid
}

/// Extracts the 3x3 patch around `(x, y)` with edge replication.
pub fn patch_at(img: &RasterImage, x: usize, y: usize) -> [[f64; 3]; 9] {
    std::array::from_fn(|i| {
        let dx = (i % 3) as isize - 1;
        let dy = (i / 3) as isize - 1;
        img.pixel_clamped(x as isize + dx, y as isize + dy)
    })
}

pub fn code_pattern(img: &RasterImage, x: usize, y: usize, cp: &ConfidenceParams) -> LabelGrid {
    code_patch(&patch_at(img, x, y), cp)
}

/// Fraction of nonzero labels: `(|negative labels| + positive labels) / 24`.
pub fn texture_feature(grid: &LabelGrid) -> f64 {
    let negatives: i32 = grid.labels.iter().flatten().filter(|&&l| l < 0).map(|&l| -(l as i32)).sum();
    let positives: i32 = grid.labels.iter().flatten().filter(|&&l| l > 0).map(|&l| l as i32).sum();
    (negatives + positives) as f64 / PATTERN_SLOTS as f64
}

pub fn texture_map(img: &RasterImage, cp: &ConfidenceParams) -> GrayMap {
    let (w, h) = img.dims();
    let mut values = vec![0.0; w * h];
    values.par_chunks_mut(w).enumerate().for_each(|(y, row)| {
        for (x, slot) in row.iter_mut().enumerate() {
            *slot = texture_feature(&code_pattern(img, x, y, cp));
        }
    });
    GrayMap::from_raw(w, h, values)
}

/// Root of the summed squared deviation of the channels from their mean.
pub fn pixel_saturation(p: [f64; 3]) -> f64 {
    let mean = (p[0] + p[1] + p[2]) / 3.0;
    p.iter().map(|c| (c - mean) * (c - mean)).sum::<f64>().sqrt()
}

pub fn saturation_map(img: &RasterImage) -> GrayMap {
    let values = img.pixels().iter().map(|&p| pixel_saturation(p)).collect();
    GrayMap::from_raw(img.width(), img.height(), values)
}

/// Intermediate maps for every stack entry.
#[derive(Debug, Clone)]
pub struct WeightAnalysis {
    pub texture: Vec<GrayMap>,
    pub saturation: Vec<GrayMap>,
    /// Normalized weights; they sum to one at every pixel.
    pub weights: Vec<GrayMap>,
}

pub fn analyze_stack(stack: &ExposureStack, cp: &ConfidenceParams) -> Result<WeightAnalysis> {
    cp.validate()?;
    let (texture, saturation): (Vec<GrayMap>, Vec<GrayMap>) = stack
        .images()
        .par_iter()
        .map(|img| (texture_map(img, cp), saturation_map(img)))
        .unzip();
    let raw: Vec<GrayMap> = texture
        .iter()
        .zip(&saturation)
        .map(|(p, s)| {
            let values = p.values().iter().zip(s.values()).map(|(a, b)| a * b).collect();
            GrayMap::from_raw(p.width(), p.height(), values)
        })
        .collect();
    Ok(WeightAnalysis {
        texture,
        saturation,
        weights: normalize_weights(raw)?,
    })
}

/// Weight maps `H_k = P_k * S_k`, normalized across the stack.
pub fn weight_maps(stack: &ExposureStack, cp: &ConfidenceParams) -> Result<Vec<GrayMap>> {
    Ok(analyze_stack(stack, cp)?.weights)
}

/// Scales the maps so they sum to one at every pixel; pixels whose raw sum is
/// below [`WEIGHT_EPSILON`] get `1/K` for every map.
pub fn normalize_weights(mut maps: Vec<GrayMap>) -> Result<Vec<GrayMap>> {
    let Some(first) = maps.first() else {
        return Err(Error::InvalidParameter("no weight maps to normalize".into()));
    };
    let dims = first.dims();
    for m in &maps[1..] {
        crate::image::check_dims(dims, m.dims())?;
    }
    let k = maps.len();
    let n = dims.0 * dims.1;
    let sums: Vec<f64> = (0..n).map(|i| maps.iter().map(|m| m.values()[i]).sum()).collect();
    for m in &mut maps {
        for (v, &sum) in m.values_mut().iter_mut().zip(&sums) {
            *v = if sum < WEIGHT_EPSILON { 1.0 / k as f64 } else { *v / sum };
        }
    }
    Ok(maps)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exposure::{build_stack, ClaheParams, GammaSchedule};
    use proptest::prelude::*;

    fn patch_with(center: f64, neighbor: Option<(usize, f64)>) -> [[f64; 3]; 9] {
        let mut p = [[center; 3]; 9];
        if let Some((i, v)) = neighbor {
            p[i] = [v; 3];
        }
        p
    }

    #[test]
    fn interval_at_half() {
        let cp = ConfidenceParams::default();
        assert!((cp.alpha() - 0.055939).abs() < 5e-7);
        assert!((cp.beta() - 0.059254).abs() < 5e-7);
        let (lo, hi) = confidence_interval(0.5, &cp);
        assert!((lo - 0.47203).abs() < 5e-6);
        assert!((hi - 0.52963).abs() < 5e-6);
    }

    #[test]
    fn interval_zero_and_scaling() {
        let cp = ConfidenceParams::default();
        assert_eq!(confidence_interval(0.0, &cp), (0.0, 0.0));
        let (lo, hi) = confidence_interval(0.2, &cp);
        let (lo3, hi3) = confidence_interval(0.6, &cp);
        assert!((lo3 - 3.0 * lo).abs() < 1e-15 && (hi3 - 3.0 * hi).abs() < 1e-15);
    }

    #[test]
    fn zero_center_labels() {
        let cp = ConfidenceParams::default();
        let g = code_patch(&patch_with(0.0, Some((0, 0.01))), &cp);
        assert_eq!(g.labels[0], [1; 3]);
        assert!(g.labels[1..].iter().all(|l| *l == [0; 3]));
    }

    #[test]
    fn constant_patch_is_all_zero() {
        let img = RasterImage::constant(3, 3, [0.42, 0.1, 0.9]).unwrap();
        let g = code_pattern(&img, 1, 1, &ConfidenceParams::default());
        assert_eq!(g, LabelGrid::default());
    }

    #[test]
    fn brighter_and_darker_neighbor() {
        let cp = ConfidenceParams::default();
        // Patch index 5 is the right neighbor: offset (1, 0), NEIGHBOR_OFFSETS slot 3.
        let up = code_patch(&patch_with(0.5, Some((5, 0.6))), &cp);
        assert_eq!(up.labels[3], [1; 3]);
        assert_eq!(up.nonzero_count(), 3);
        let down = code_patch(&patch_with(0.5, Some((5, 0.4))), &cp);
        assert_eq!(down.labels[3], [-1; 3]);
        assert_eq!(down.nonzero_count(), 3);
    }

    #[test]
    fn interval_bounds_are_inclusive() {
        let cp = ConfidenceParams::default();
        let (lo, hi) = confidence_interval(0.5, &cp);
        assert_eq!(label(lo, lo, hi), 0);
        assert_eq!(label(hi, lo, hi), 0);
    }

    #[test]
    fn feature_examples() {
        assert_eq!(texture_feature(&LabelGrid::default()), 0.0);
        let full = LabelGrid { labels: [[1, -1, 1]; 8] };
        assert_eq!(texture_feature(&full), 1.0);
        let mut four = LabelGrid::default();
        for n in 0..4 {
            four.labels[n][0] = -1;
        }
        assert_eq!(texture_feature(&four), 4.0 / 24.0);
    }

    #[test]
    fn saturation_examples() {
        assert_eq!(pixel_saturation([0.3, 0.3, 0.3]), 0.0);
        assert_eq!(pixel_saturation([0.0; 3]), 0.0);
        assert!((pixel_saturation([1.0, 0.0, 0.0]) - (2.0f64 / 3.0).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn border_pixels_use_edge_replication() {
        let img = RasterImage::from_fn(3, 3, |x, y| if (x, y) == (1, 0) { [0.9; 3] } else { [0.5; 3] }).unwrap();
        let g = code_pattern(&img, 0, 0, &ConfidenceParams::default());
        // From the corner, (1, 0) is the right neighbor and also the replicated top-right.
        assert_eq!(g.labels[3], [1; 3]);
        assert_eq!(g.labels[2], [1; 3]);
        assert_eq!(g.nonzero_count(), 6);
    }

    fn stack_of(images: Vec<RasterImage>) -> ExposureStack {
        ExposureStack::new(images).unwrap()
    }

    #[test]
    fn identical_entries_give_uniform_weights() {
        let img = RasterImage::from_fn(9, 7, |x, y| [(x as f64 / 9.0), (y as f64 / 7.0), 0.5]).unwrap();
        let w = weight_maps(&stack_of(vec![img; 5]), &ConfidenceParams::default()).unwrap();
        for m in &w {
            assert!(m.values().iter().all(|v| (v - 0.2).abs() < 1e-15));
        }
    }

    #[test]
    fn constant_gray_input_falls_back_to_uniform() {
        let img = RasterImage::constant(16, 16, [0.5; 3]).unwrap();
        let stack = build_stack(&img, &GammaSchedule::default(), &ClaheParams::default()).unwrap();
        let w = weight_maps(&stack, &ConfidenceParams::default()).unwrap();
        assert_eq!(w.len(), 5);
        assert!(w.iter().all(|m| m.values().iter().all(|&v| v == 0.2)));
    }

    #[test]
    fn zero_texture_gives_zero_raw_weight() {
        // Entry 0 is flat but saturated; entry 1 is textured.
        let flat = RasterImage::constant(5, 5, [1.0, 0.0, 0.0]).unwrap();
        let textured =
            RasterImage::from_fn(5, 5, |x, y| if (x + y) % 2 == 0 { [0.9, 0.1, 0.1] } else { [0.2, 0.6, 0.1] }).unwrap();
        let stack = stack_of(vec![flat, textured.clone(), textured.clone(), textured.clone(), textured]);
        let a = analyze_stack(&stack, &ConfidenceParams::default()).unwrap();
        assert!(a.texture[0].values().iter().all(|&p| p == 0.0));
        assert!(a.weights[0].values().iter().all(|&h| h == 0.0));
        assert!(a.weights[1].values().iter().all(|&h| (h - 0.25).abs() < 1e-15));
    }

    fn arb_patch() -> impl Strategy<Value = [[f64; 3]; 9]> {
        proptest::array::uniform9(proptest::array::uniform3(0.0f64..=1.0))
    }

    proptest! {
        #[test]
        fn coding_is_scale_invariant(patch in arb_patch(), k in 0.01f64..100.0) {
            let cp = ConfidenceParams::default();
            let scaled = patch.map(|p| p.map(|v| v * k));
            prop_assert_eq!(code_patch(&patch, &cp), code_patch(&scaled, &cp));
        }

        #[test]
        fn feature_matches_count(labels in proptest::array::uniform8(proptest::array::uniform3(-1i8..=1))) {
            let grid = LabelGrid { labels };
            let count = labels.iter().flatten().filter(|&&l| l != 0).count();
            prop_assert_eq!(texture_feature(&grid), count as f64 / 24.0);
        }

        #[test]
        fn texture_in_unit_range(patch in arb_patch(), d_min in 0.05f64..6.0) {
            let p = texture_feature(&code_patch(&patch, &ConfidenceParams { d_min }));
            prop_assert!((0.0..=1.0).contains(&p));
        }

        #[test]
        fn more_contrast_never_lowers_feature(
            patch in arb_patch(), slot in 0usize..8, channel in 0usize..3, push in 0.0f64..1.0
        ) {
            let cp = ConfidenceParams::default();
            let before = texture_feature(&code_patch(&patch, &cp));
            let (dx, dy) = NEIGHBOR_OFFSETS[slot];
            let idx = ((dy + 1) * 3 + dx + 1) as usize;
            let c0 = patch[4][channel];
            let mut pushed = patch;
            let v = pushed[idx][channel];
            pushed[idx][channel] = if v >= c0 { v + push } else { (v - push).max(-1.0) };
            let after = texture_feature(&code_patch(&pushed, &cp));
            prop_assert!(after >= before);
        }

        #[test]
        fn normalized_weights_sum_to_one(
            raw in proptest::collection::vec(proptest::collection::vec(0.0f64..2.0, 12), 5),
            zero_mask in proptest::collection::vec(any::<bool>(), 12)
        ) {
            let maps: Vec<GrayMap> = raw
                .iter()
                .map(|v| {
                    let vals = v.iter().zip(&zero_mask).map(|(x, z)| if *z { 0.0 } else { *x }).collect();
                    GrayMap::new(4, 3, vals).unwrap()
                })
                .collect();
            let norm = normalize_weights(maps).unwrap();
            for i in 0..12 {
                let s: f64 = norm.iter().map(|m| m.values()[i]).sum();
                prop_assert!((s - 1.0).abs() < 1e-9);
            }
        }
    }
}
