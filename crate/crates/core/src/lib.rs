//! Multi-exposure fusion enhancement for hazy and low-contrast images.
//!
//! The pipeline turns one input into five exposures (four gamma curves and a
//! CLAHE pass), weights every exposure per pixel by local ternary texture and
//! color saturation, and blends them with Laplacian pyramids. Alongside it
//! live full-reference quality metrics (MSE, PSNR, SSIM with optional ROI
//! masks), a synthetic haze generator and the batch harness behind the CLI.
//!
//! ```no_run
//! use hazefuse::{enhance, load_image, save_image, EnhanceConfig};
//!
//! let hazy = load_image("hazy.png")?;
//! let clear = enhance(&hazy, &EnhanceConfig::default())?;
//! save_image(&clear, "enhanced.png")?;
//! # Ok::<(), hazefuse::Error>(())
//! ```

pub mod config;
pub mod error;
pub mod exposure;
pub mod fusion;
pub mod harness;
pub mod haze;
pub mod image;
pub mod iqa;
pub mod pyramid;
pub mod weights;

pub use crate::error::{Error, Result};
pub use crate::exposure::{build_stack, clahe, gamma_correct, select_gamma_set, ClaheParams, ExposureStack, GammaSchedule};
pub use crate::fusion::{enhance, enhance_traced, fuse, EnhanceConfig};
pub use crate::haze::{apply_haze, HazeParams, Transmission};
pub use crate::image::{histogram, intensity_stddev, load_image, mean_intensity, save_image, GrayMap, Histogram, RasterImage};
pub use crate::iqa::{evaluate_pair, mse, psnr, ssim, IqaReport, RoiMask, SsimParams};
pub use crate::pyramid::{collapse, gaussian_pyramid, laplacian_pyramid, FusionParams};
pub use crate::weights::{code_pattern, confidence_interval, saturation_map, texture_feature, weight_maps, ConfidenceParams, LabelGrid};
