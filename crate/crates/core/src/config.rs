//! Run configuration as a flat `key = value` text file.
//!
//! ```text
//! # comments and blank lines are ignored
//! gamma.dark = 1.2,1.4,1.6,1.8
//! gamma.bright = 2,3,4,5
//! gamma.threshold = 0.5
//! clahe.tiles = 8x8
//! clahe.clip_limit = 2
//! clahe.bins = 256
//! texture.dmin = 0.5
//! pyramid.levels = auto
//! ssim.k1 = 0.01
//! ssim.k2 = 0.03
//! ssim.range = 1
//! ssim.window = uniform:8          # or gaussian:11:1.5
//! ssim.channels = luminance        # or per-channel
//! synth.transmission = 0.4,0.8
//! synth.airlight = 0.7,1
//! seed = 0
//! jobs = 0                         # 0 uses every core
//! dump_maps = false
//! input = photos/
//! output = out/
//! roi_dir = masks/
//! ```
//!
//! Unknown or repeated keys are rejected. Command-line flags are applied on
//! top of the file through [`RunConfig::set`].

use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::PathBuf;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::fusion::EnhanceConfig;
use crate::iqa::{SsimChannels, SsimParams, SsimWindow};

/// Sampling ranges for synthetic haze; airlight is achromatic.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthRanges {
    pub transmission: (f64, f64),
    pub airlight: (f64, f64),
}

impl Default for SynthRanges {
    fn default() -> Self {
        Self {
            transmission: (0.4, 0.8),
            airlight: (0.7, 1.0),
        }
    }
}

impl SynthRanges {
    pub fn validate(&self) -> Result<()> {
        let (t0, t1) = self.transmission;
        if !(t0 > 0.0 && t0 <= t1 && t1 <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "transmission range {t0},{t1} must satisfy 0 < lo <= hi <= 1"
            )));
        }
        let (a0, a1) = self.airlight;
        if !(0.0 <= a0 && a0 <= a1 && a1 <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "airlight range {a0},{a1} must satisfy 0 <= lo <= hi <= 1"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunConfig {
    pub enhance: EnhanceConfig,
    pub ssim: SsimParams,
    pub synth: SynthRanges,
    pub seed: u64,
    /// Worker threads; 0 means one per core.
    pub jobs: usize,
    pub dump_maps: bool,
    pub input: Option<PathBuf>,
    pub output: Option<PathBuf>,
    pub roi_dir: Option<PathBuf>,
}

fn invalid(key: &str, value: &str, expected: &str) -> Error {
    Error::InvalidParameter(format!("{key}: cannot parse '{value}' as {expected}"))
}

fn number<T: FromStr>(key: &str, value: &str, expected: &str) -> Result<T> {
    value.trim().parse().map_err(|_| invalid(key, value, expected))
}

fn list<const N: usize>(key: &str, value: &str) -> Result<[f64; N]> {
    let parts: Vec<f64> = value
        .split(',')
        .map(|p| number(key, p, "a number"))
        .collect::<Result<_>>()?;
    parts
        .try_into()
        .map_err(|_| invalid(key, value, &format!("{N} comma-separated numbers")))
}

fn join(values: &[f64]) -> String {
    values.iter().map(f64::to_string).collect::<Vec<_>>().join(",")
}

impl RunConfig {
    /// Every key accepted by [`RunConfig::set`].
    pub const KEYS: [&'static str; 21] = [
        "gamma.dark",
        "gamma.bright",
        "gamma.threshold",
        "clahe.tiles",
        "clahe.clip_limit",
        "clahe.bins",
        "texture.dmin",
        "pyramid.levels",
        "ssim.k1",
        "ssim.k2",
        "ssim.range",
        "ssim.window",
        "ssim.channels",
        "synth.transmission",
        "synth.airlight",
        "seed",
        "jobs",
        "dump_maps",
        "input",
        "output",
        "roi_dir",
    ];

    /// Assigns one key; the value syntax matches the file format.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        let e = &mut self.enhance;
        match key {
            "gamma.dark" => e.schedule.dark_set = list(key, value)?,
            "gamma.bright" => e.schedule.bright_set = list(key, value)?,
            "gamma.threshold" => e.schedule.threshold = number(key, value, "a number")?,
            "clahe.tiles" => {
                let (x, y) = value.split_once('x').unwrap_or((value, value));
                e.clahe.tiles_x = number(key, x, "a tile count")?;
                e.clahe.tiles_y = number(key, y, "a tile count")?;
            }
            "clahe.clip_limit" => e.clahe.clip_limit = number(key, value, "a number")?,
            "clahe.bins" => e.clahe.bins = number(key, value, "a bin count")?,
            "texture.dmin" => e.confidence.d_min = number(key, value, "a number")?,
            "pyramid.levels" => {
                e.fusion.levels = if value == "auto" {
                    None
                } else {
                    Some(number(key, value, "a level count or 'auto'")?)
                }
            }
            "ssim.k1" => self.ssim.k1 = number(key, value, "a number")?,
            "ssim.k2" => self.ssim.k2 = number(key, value, "a number")?,
            "ssim.range" => self.ssim.range = number(key, value, "a number")?,
            "ssim.window" => self.ssim.window = parse_window(key, value)?,
            "ssim.channels" => {
                self.ssim.channels = match value {
                    "luminance" => SsimChannels::Luminance,
                    "per-channel" => SsimChannels::PerChannel,
                    _ => return Err(invalid(key, value, "'luminance' or 'per-channel'")),
                }
            }
            "synth.transmission" => {
                let [lo, hi] = list(key, value)?;
                self.synth.transmission = (lo, hi);
            }
            "synth.airlight" => {
                let [lo, hi] = list(key, value)?;
                self.synth.airlight = (lo, hi);
            }
            "seed" => self.seed = number(key, value, "an unsigned integer")?,
            "jobs" => self.jobs = number(key, value, "an unsigned integer")?,
            "dump_maps" => self.dump_maps = number(key, value, "true or false")?,
            "input" => self.input = Some(PathBuf::from(value)),
            "output" => self.output = Some(PathBuf::from(value)),
            "roi_dir" => self.roi_dir = Some(PathBuf::from(value)),
            _ => return Err(Error::InvalidParameter(format!("unknown config key '{key}'"))),
        }
        Ok(())
    }

    /// Parses a config file body on top of the defaults and validates it.
    pub fn parse(text: &str) -> Result<Self> {
        let mut config = Self::default();
        let mut seen = HashSet::new();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Error::Config {
                    line: line_no,
                    message: format!("expected 'key = value', got '{line}'"),
                });
            };
            let key = key.trim();
            if !seen.insert(key.to_string()) {
                return Err(Error::Config {
                    line: line_no,
                    message: format!("duplicate key '{key}'"),
                });
            }
            config.set(key, value).map_err(|e| Error::Config {
                line: line_no,
                message: e.to_string(),
            })?;
        }
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Read {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text)
    }

    pub fn validate(&self) -> Result<()> {
        self.enhance.validate()?;
        if self.enhance.fusion.levels == Some(0) {
            return Err(Error::InvalidParameter("pyramid.levels must be at least 1".into()));
        }
        self.ssim.validate()?;
        self.synth.validate()
    }

    /// Serializes every key in file syntax. `parse(&c.to_config_string()) == c`
    /// for any valid config.
    pub fn to_config_string(&self) -> String {
        let e = &self.enhance;
        let mut out = String::new();
        let mut line = |k: &str, v: String| {
            let _ = writeln!(out, "{k} = {v}");
        };
        line("gamma.dark", join(&e.schedule.dark_set));
        line("gamma.bright", join(&e.schedule.bright_set));
        line("gamma.threshold", e.schedule.threshold.to_string());
        line("clahe.tiles", format!("{}x{}", e.clahe.tiles_x, e.clahe.tiles_y));
        line("clahe.clip_limit", e.clahe.clip_limit.to_string());
        line("clahe.bins", e.clahe.bins.to_string());
        line("texture.dmin", e.confidence.d_min.to_string());
        line(
            "pyramid.levels",
            e.fusion.levels.map_or_else(|| "auto".to_string(), |n| n.to_string()),
        );
        line("ssim.k1", self.ssim.k1.to_string());
        line("ssim.k2", self.ssim.k2.to_string());
        line("ssim.range", self.ssim.range.to_string());
        line(
            "ssim.window",
            match self.ssim.window {
                SsimWindow::Uniform { size } => format!("uniform:{size}"),
                SsimWindow::Gaussian { size, sigma } => format!("gaussian:{size}:{sigma}"),
            },
        );
        line(
            "ssim.channels",
            match self.ssim.channels {
                SsimChannels::Luminance => "luminance".into(),
                SsimChannels::PerChannel => "per-channel".into(),
            },
        );
        line(
            "synth.transmission",
            join(&[self.synth.transmission.0, self.synth.transmission.1]),
        );
        line("synth.airlight", join(&[self.synth.airlight.0, self.synth.airlight.1]));
        line("seed", self.seed.to_string());
        line("jobs", self.jobs.to_string());
        line("dump_maps", self.dump_maps.to_string());
        for (key, path) in [("input", &self.input), ("output", &self.output), ("roi_dir", &self.roi_dir)] {
            if let Some(p) = path {
                line(key, p.display().to_string());
            }
        }
        out
    }
}

fn parse_window(key: &str, value: &str) -> Result<SsimWindow> {
    let parts: Vec<&str> = value.split(':').collect();
    match parts.as_slice() {
        ["uniform", size] => Ok(SsimWindow::Uniform {
            size: number(key, size, "a window size")?,
        }),
        ["gaussian", size, sigma] => Ok(SsimWindow::Gaussian {
            size: number(key, size, "a window size")?,
            sigma: number(key, sigma, "a number")?,
        }),
        _ => Err(invalid(key, value, "'uniform:<size>' or 'gaussian:<size>:<sigma>'")),
    }
}
