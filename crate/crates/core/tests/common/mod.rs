//! Procedural test scenes shared by the integration suites.

#![allow(dead_code)]

use hazefuse::RasterImage;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_image(w: usize, h: usize, seed: u64) -> RasterImage {
    let mut r = rng(seed);
    RasterImage::from_fn(w, h, |_, _| [r.gen(), r.gen(), r.gen()]).unwrap()
}

fn random_color(r: &mut ChaCha8Rng) -> [f64; 3] {
    [r.gen(), r.gen(), r.gen()]
}

fn mix(a: [f64; 3], b: [f64; 3], t: f64) -> [f64; 3] {
    std::array::from_fn(|c| a[c] * (1.0 - t) + b[c] * t)
}

/// Linear blend between two colors along a random direction.
pub fn gradient(w: usize, h: usize, seed: u64) -> RasterImage {
    let mut r = rng(seed);
    let (a, b) = (random_color(&mut r), random_color(&mut r));
    let angle: f64 = r.gen_range(0.0..std::f64::consts::TAU);
    let (dx, dy) = (angle.cos(), angle.sin());
    let span = (w as f64 * dx.abs() + h as f64 * dy.abs()).max(1.0);
    RasterImage::from_fn(w, h, |x, y| {
        let u = (x as f64 - w as f64 / 2.0) * dx + (y as f64 - h as f64 / 2.0) * dy;
        mix(a, b, (u / span + 0.5).clamp(0.0, 1.0))
    })
    .unwrap()
}

/// Two-color checkerboard with a random cell size.
pub fn checkers(w: usize, h: usize, seed: u64) -> RasterImage {
    let mut r = rng(seed);
    let (a, b) = (random_color(&mut r), random_color(&mut r));
    let cell = r.gen_range(8..48);
    RasterImage::from_fn(w, h, |x, y| if (x / cell + y / cell) % 2 == 0 { a } else { b }).unwrap()
}

/// Axis-aligned colored rectangles over a colored background.
pub fn rectangles(w: usize, h: usize, seed: u64) -> RasterImage {
    let mut r = rng(seed);
    let background = random_color(&mut r);
    let rects: Vec<(usize, usize, usize, usize, [f64; 3])> = (0..24)
        .map(|_| {
            let x0 = r.gen_range(0..w);
            let y0 = r.gen_range(0..h);
            let rw = r.gen_range(w / 16..w / 3);
            let rh = r.gen_range(h / 16..h / 3);
            (x0, y0, x0 + rw, y0 + rh, random_color(&mut r))
        })
        .collect();
    RasterImage::from_fn(w, h, |x, y| {
        rects
            .iter()
            .rev()
            .find(|(x0, y0, x1, y1, _)| x >= *x0 && x < *x1 && y >= *y0 && y < *y1)
            .map_or(background, |r| r.4)
    })
    .unwrap()
}

/// Sinusoidal gratings per channel with random frequencies and phases.
pub fn gratings(w: usize, h: usize, seed: u64) -> RasterImage {
    let mut r = rng(seed);
    let params: Vec<(f64, f64, f64)> = (0..3)
        .map(|_| (r.gen_range(0.01..0.08), r.gen_range(0.01..0.08), r.gen_range(0.0..6.3)))
        .collect();
    RasterImage::from_fn(w, h, |x, y| {
        std::array::from_fn(|c| {
            let (fx, fy, phase) = params[c];
            0.5 + 0.45 * (fx * x as f64 + fy * y as f64 + phase).sin()
        })
    })
    .unwrap()
}

/// Multi-octave bilinear value noise tinted between random colors; a rough
/// stand-in for natural texture.
pub fn value_noise(w: usize, h: usize, seed: u64) -> RasterImage {
    let mut r = rng(seed);
    let (a, b) = (random_color(&mut r), random_color(&mut r));
    let octaves: Vec<(usize, Vec<f64>, f64)> = [4usize, 8, 16, 32, 64]
        .iter()
        .enumerate()
        .map(|(i, &cells)| {
            let grid = (0..(cells + 1) * (cells + 1)).map(|_| r.gen::<f64>()).collect();
            (cells, grid, 0.5f64.powi(i as i32))
        })
        .collect();
    let norm: f64 = octaves.iter().map(|o| o.2).sum();
    RasterImage::from_fn(w, h, |x, y| {
        let mut v = 0.0;
        for (cells, grid, amp) in &octaves {
            let gx = x as f64 / w as f64 * *cells as f64;
            let gy = y as f64 / h as f64 * *cells as f64;
            let (ix, iy) = ((gx as usize).min(cells - 1), (gy as usize).min(cells - 1));
            let (fx, fy) = (gx - ix as f64, gy - iy as f64);
            let at = |i: usize, j: usize| grid[j * (cells + 1) + i];
            let top = at(ix, iy) * (1.0 - fx) + at(ix + 1, iy) * fx;
            let bottom = at(ix, iy + 1) * (1.0 - fx) + at(ix + 1, iy + 1) * fx;
            v += amp * (top * (1.0 - fy) + bottom * fy);
        }
        mix(a, b, v / norm)
    })
    .unwrap()
}

/// Filled disks of random colors on a radial gradient.
pub fn disks(w: usize, h: usize, seed: u64) -> RasterImage {
    let mut r = rng(seed);
    let (inner, outer) = (random_color(&mut r), random_color(&mut r));
    let disks: Vec<(f64, f64, f64, [f64; 3])> = (0..16)
        .map(|_| {
            (
                r.gen_range(0.0..w as f64),
                r.gen_range(0.0..h as f64),
                r.gen_range(w as f64 / 30.0..w as f64 / 6.0),
                random_color(&mut r),
            )
        })
        .collect();
    let (cx, cy) = (w as f64 / 2.0, h as f64 / 2.0);
    let rmax = (cx * cx + cy * cy).sqrt();
    RasterImage::from_fn(w, h, |x, y| {
        let (fx, fy) = (x as f64, y as f64);
        disks
            .iter()
            .rev()
            .find(|(dx, dy, rad, _)| (fx - dx).powi(2) + (fy - dy).powi(2) <= rad * rad)
            .map_or_else(
                || mix(inner, outer, ((fx - cx).powi(2) + (fy - cy).powi(2)).sqrt() / rmax),
                |d| d.3,
            )
    })
    .unwrap()
}

pub type SceneFn = fn(usize, usize, u64) -> RasterImage;

pub const SCENES: [(&str, SceneFn); 6] = [
    ("gradient", gradient),
    ("checkers", checkers),
    ("rectangles", rectangles),
    ("gratings", gratings),
    ("noise", value_noise),
    ("disks", disks),
];

/// `count` scenes cycling through every generator.
pub fn scene_suite(count: usize, w: usize, h: usize, seed: u64) -> Vec<(String, RasterImage)> {
    (0..count)
        .map(|i| {
            let (name, f) = SCENES[i % SCENES.len()];
            (format!("{name}_{i:02}"), f(w, h, seed.wrapping_add(i as u64 * 7919)))
        })
        .collect()
}
