//! Synthetic haze: `hazy = clear * t + A * (1 - t)`.

use crate::error::{Error, Result};
use crate::image::{check_dims, GrayMap, RasterImage};

#[derive(Debug, Clone, PartialEq)]
pub enum Transmission {
    Uniform(f64),
    /// Per-pixel transmission.
    Map(GrayMap),
    /// `t(x) = exp(-scattering * depth(x))`.
    Depth { scattering: f64, depth: GrayMap },
}

#[derive(Debug, Clone, PartialEq)]
pub struct HazeParams {
    pub transmission: Transmission,
    pub airlight: [f64; 3],
}

impl HazeParams {
    pub fn uniform(t: f64, airlight: [f64; 3]) -> Self {
        Self {
            transmission: Transmission::Uniform(t),
            airlight,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.airlight.iter().any(|a| !(0.0..=1.0).contains(a)) {
            return Err(Error::InvalidParameter(format!(
                "airlight {:?} outside [0, 1]",
                self.airlight
            )));
        }
        let valid_t = |t: f64| t > 0.0 && t <= 1.0;
        match &self.transmission {
            Transmission::Uniform(t) if !valid_t(*t) => {
                Err(Error::InvalidParameter(format!("transmission {t} outside (0, 1]")))
            }
            Transmission::Map(m) if !m.values().iter().all(|&t| valid_t(t)) => {
                Err(Error::InvalidParameter("transmission map has values outside (0, 1]".into()))
            }
            Transmission::Depth { scattering, depth } => {
                if !(scattering.is_finite() && *scattering > 0.0) {
                    return Err(Error::InvalidParameter(format!(
                        "scattering coefficient must be positive, got {scattering}"
                    )));
                }
                if depth.values().iter().any(|&d| d < 0.0) {
                    return Err(Error::InvalidParameter("depth map has negative values".into()));
                }
                // Far depths can underflow exp() to zero; that is still outside (0, 1].
                if depth.values().iter().any(|&d| !valid_t((-scattering * d).exp())) {
                    return Err(Error::InvalidParameter("depth map drives transmission to zero".into()));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    fn transmission_at(&self, i: usize) -> f64 {
        match &self.transmission {
            Transmission::Uniform(t) => *t,
            Transmission::Map(m) => m.values()[i],
            Transmission::Depth { scattering, depth } => (-scattering * depth.values()[i]).exp(),
        }
    }
}

/// Horizontal depth ramp from `near` at the left edge to `far` at the right.
pub fn ramp_depth(width: usize, height: usize, near: f64, far: f64) -> GrayMap {
    let span = (width.max(2) - 1) as f64;
    let values = (0..width * height)
        .map(|i| near + (far - near) * (i % width) as f64 / span)
        .collect();
    GrayMap::from_raw(width, height, values)
}

pub fn apply_haze(clear: &RasterImage, params: &HazeParams) -> Result<RasterImage> {
    params.validate()?;
    match &params.transmission {
        Transmission::Map(m) | Transmission::Depth { depth: m, .. } => check_dims(clear.dims(), m.dims())?,
        Transmission::Uniform(_) => {}
    }
    let a = params.airlight;
    let pixels = clear
        .pixels()
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let t = params.transmission_at(i);
            std::array::from_fn(|c| (p[c] * t + a[c] * (1.0 - t)).clamp(0.0, 1.0))
        })
        .collect();
    RasterImage::new(clear.width(), clear.height(), pixels)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::iqa::mse;
    use crate::weights::pixel_saturation;
    use proptest::prelude::*;

    fn sample() -> RasterImage {
        RasterImage::from_fn(7, 5, |x, y| [x as f64 / 7.0, y as f64 / 5.0, 0.2 + 0.1 * ((x + y) % 3) as f64]).unwrap()
    }

    #[test]
    fn examples() {
        let img = sample();
        assert_eq!(apply_haze(&img, &HazeParams::uniform(1.0, [1.0; 3])).unwrap(), img);

        let px = RasterImage::constant(1, 1, [0.2; 3]).unwrap();
        let hazy = apply_haze(&px, &HazeParams::uniform(0.5, [1.0; 3])).unwrap();
        assert!((hazy.pixel(0, 0)[0] - 0.6).abs() < 1e-15);

        let a = [0.8, 0.85, 0.9];
        let thick = apply_haze(&img, &HazeParams::uniform(1e-9, a)).unwrap();
        for p in thick.pixels() {
            for c in 0..3 {
                assert!((p[c] - a[c]).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn rejects_invalid_params() {
        let img = sample();
        assert!(apply_haze(&img, &HazeParams::uniform(0.0, [1.0; 3])).is_err());
        assert!(apply_haze(&img, &HazeParams::uniform(1.2, [1.0; 3])).is_err());
        assert!(apply_haze(&img, &HazeParams::uniform(0.5, [1.1, 1.0, 1.0])).is_err());
        let bad_depth = HazeParams {
            transmission: Transmission::Depth {
                scattering: -1.0,
                depth: ramp_depth(7, 5, 0.0, 1.0),
            },
            airlight: [1.0; 3],
        };
        assert!(apply_haze(&img, &bad_depth).is_err());
        let wrong_size = HazeParams {
            transmission: Transmission::Map(GrayMap::filled(3, 3, 0.5)),
            airlight: [1.0; 3],
        };
        assert!(apply_haze(&img, &wrong_size).is_err());
    }

    #[test]
    fn depth_mode_thickens_with_distance() {
        let img = RasterImage::constant(10, 2, [0.1; 3]).unwrap();
        let params = HazeParams {
            transmission: Transmission::Depth {
                scattering: 1.2,
                depth: ramp_depth(10, 2, 0.0, 2.0),
            },
            airlight: [0.9; 3],
        };
        let hazy = apply_haze(&img, &params).unwrap();
        assert!((hazy.pixel(0, 0)[0] - 0.1).abs() < 1e-15);
        for x in 1..10 {
            assert!(hazy.pixel(x, 1)[0] > hazy.pixel(x - 1, 1)[0]);
        }
    }

    proptest! {
        #[test]
        fn affine_in_clear_image(
            t in 0.05f64..=1.0, a in 0.0f64..=1.0, u in 0.0f64..=1.0, v in 0.0f64..=1.0, lambda in 0.0f64..=1.0
        ) {
            let p = HazeParams::uniform(t, [a; 3]);
            let haze = |x: f64| apply_haze(&RasterImage::constant(1, 1, [x; 3]).unwrap(), &p).unwrap().pixel(0, 0)[0];
            let mixed = haze(lambda * u + (1.0 - lambda) * v);
            prop_assert!((mixed - (lambda * haze(u) + (1.0 - lambda) * haze(v))).abs() < 1e-12);
        }

        #[test]
        fn gray_airlight_contracts_saturation(
            px in proptest::array::uniform3(0.0f64..=1.0), t in 0.01f64..=1.0, a in 0.0f64..=1.0
        ) {
            let clear = RasterImage::constant(1, 1, px).unwrap();
            let hazy = apply_haze(&clear, &HazeParams::uniform(t, [a; 3])).unwrap();
            let (s0, s1) = (pixel_saturation(px), pixel_saturation(hazy.pixel(0, 0)));
            prop_assert!(s1 <= s0 + 1e-12);
            prop_assert!((s1 - t * s0).abs() < 1e-12);
        }

        #[test]
        fn mse_scales_with_squared_opacity(seed in any::<u64>(), t in 0.05f64..=1.0, a in 0.0f64..=1.0) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let clear = RasterImage::from_fn(6, 6, |_, _| [rng.gen(), rng.gen(), rng.gen()]).unwrap();
            let hazy = apply_haze(&clear, &HazeParams::uniform(t, [a; 3])).unwrap();
            let flat = RasterImage::constant(6, 6, [a; 3]).unwrap();
            let lhs = mse(&clear, &hazy, None).unwrap();
            let rhs = (1.0 - t).powi(2) * mse(&clear, &flat, None).unwrap();
            prop_assert!((lhs - rhs).abs() < 1e-12);
        }
    }
}
