//! Batch commands behind the CLI: enhance directories, evaluate
//! (reference, test) pairs into a CSV report, and synthesize hazy suites.
//!
//! Per-image work fans out over a bounded rayon pool. Inputs are sorted by
//! file name before any work starts and results are assembled in that order,
//! so outputs never depend on scheduling.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::config::RunConfig;
use crate::error::Error;
use crate::fusion::{enhance, enhance_traced, EnhanceTrace};
use crate::haze::{apply_haze, HazeParams};
use crate::image::{load_image, save_image, GrayMap, RasterImage};
use crate::iqa::{evaluate_pair, IqaReport, RoiMask};

const IMAGE_EXTENSIONS: [&str; 5] = ["png", "ppm", "pnm", "jpg", "jpeg"];

/// Process exit status of a command.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitStatus {
    Success,
    Usage,
    Io,
    EmptyResult,
}

impl ExitStatus {
    pub fn code(self) -> i32 {
        match self {
            ExitStatus::Success => 0,
            ExitStatus::Usage => 1,
            ExitStatus::Io => 2,
            ExitStatus::EmptyResult => 3,
        }
    }
}

#[derive(Debug)]
pub struct CommandError {
    pub status: ExitStatus,
    pub message: String,
}

impl CommandError {
    pub fn usage(message: impl Into<String>) -> Self {
        Self {
            status: ExitStatus::Usage,
            message: message.into(),
        }
    }

    pub fn io(message: impl Into<String>) -> Self {
        Self {
            status: ExitStatus::Io,
            message: message.into(),
        }
    }

    pub fn empty(message: impl Into<String>) -> Self {
        Self {
            status: ExitStatus::EmptyResult,
            message: message.into(),
        }
    }
}

impl fmt::Display for CommandError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for CommandError {}

impl From<Error> for CommandError {
    fn from(e: Error) -> Self {
        let status = match e {
            Error::Read { .. } | Error::Write { .. } | Error::Decode { .. } | Error::Encode { .. } => ExitStatus::Io,
            _ => ExitStatus::Usage,
        };
        Self {
            status,
            message: e.to_string(),
        }
    }
}

/// Runs `work` on a pool of `jobs` threads (0 = one per core).
pub fn with_pool<T: Send>(jobs: usize, work: impl FnOnce() -> T + Send) -> Result<T, CommandError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| CommandError::usage(format!("cannot start worker pool: {e}")))?;
    Ok(pool.install(work))
}

fn has_image_extension(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| IMAGE_EXTENSIONS.contains(&e.to_ascii_lowercase().as_str()))
}

/// A single file, or the image files of a directory sorted by name.
pub fn collect_inputs(input: &Path) -> Result<Vec<PathBuf>, CommandError> {
    if input.is_file() {
        return Ok(vec![input.to_path_buf()]);
    }
    let entries = fs::read_dir(input).map_err(|e| CommandError::io(format!("cannot read {}: {e}", input.display())))?;
    let mut files: Vec<PathBuf> = entries
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && has_image_extension(p))
        .collect();
    files.sort_by(|a, b| a.file_name().cmp(&b.file_name()));
    Ok(files)
}

fn stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

/// Output name: same stem; PPM inputs stay PPM, everything else becomes PNG.
fn output_path(input: &Path, output_dir: &Path) -> PathBuf {
    let ppm = input
        .extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| e.eq_ignore_ascii_case("ppm"));
    output_dir.join(format!("{}.{}", stem(input), if ppm { "ppm" } else { "png" }))
}

#[derive(Debug, Default)]
pub struct EnhanceSummary {
    pub written: Vec<PathBuf>,
    pub skipped: Vec<(PathBuf, String)>,
}

/// Visualizes a signed band-pass level around mid-gray.
fn detail_visual(map: &GrayMap) -> GrayMap {
    let values = map.values().iter().map(|v| 0.5 + v).collect();
    GrayMap::new(map.width(), map.height(), values).unwrap_or_else(|_| map.clone())
}

fn dump_maps(trace: &EnhanceTrace, dir: &Path) -> crate::Result<()> {
    fs::create_dir_all(dir).map_err(|source| Error::Write {
        path: dir.to_path_buf(),
        source,
    })?;
    for (k, img) in trace.stack.images().iter().enumerate() {
        save_image(img, dir.join(format!("exposure_{k}.png")))?;
        trace.analysis.texture[k].save_png(&dir.join(format!("texture_{k}.png")))?;
        trace.analysis.saturation[k].save_png(&dir.join(format!("saturation_{k}.png")))?;
        trace.analysis.weights[k].save_png(&dir.join(format!("weight_{k}.png")))?;
    }
    for (i, level) in trace.fused.detail.iter().enumerate() {
        let visual: [GrayMap; 3] = std::array::from_fn(|c| detail_visual(&level[c]));
        save_image(&RasterImage::from_planes_clamped(&visual)?, dir.join(format!("fused_detail_{i}.png")))?;
    }
    save_image(
        &RasterImage::from_planes_clamped(&trace.fused.residual)?,
        dir.join("fused_residual.png"),
    )?;
    Ok(())
}

fn enhance_one(input: &Path, output_dir: &Path, config: &RunConfig) -> crate::Result<PathBuf> {
    let img = load_image(input)?;
    let out = output_path(input, output_dir);
    if config.dump_maps {
        let trace = enhance_traced(&img, &config.enhance)?;
        dump_maps(&trace, &output_dir.join(format!("{}_maps", stem(input))))?;
        save_image(&trace.output, &out)?;
    } else {
        save_image(&enhance(&img, &config.enhance)?, &out)?;
    }
    Ok(out)
}

/// Enhances every image under `input` into `output_dir`, keeping stems.
/// Undecodable files are skipped and reported.
pub fn run_enhance(input: &Path, output_dir: &Path, config: &RunConfig) -> Result<EnhanceSummary, CommandError> {
    config.validate()?;
    let inputs = collect_inputs(input)?;
    if inputs.is_empty() {
        return Err(CommandError::empty(format!("no inputs found in {}", input.display())));
    }
    fs::create_dir_all(output_dir)
        .map_err(|e| CommandError::io(format!("cannot create {}: {e}", output_dir.display())))?;
    let results: Vec<(PathBuf, crate::Result<PathBuf>)> = with_pool(config.jobs, || {
        inputs
            .par_iter()
            .map(|p| (p.clone(), enhance_one(p, output_dir, config)))
            .collect()
    })?;
    let mut summary = EnhanceSummary::default();
    for (input, result) in results {
        match result {
            Ok(out) => summary.written.push(out),
            Err(e) => summary.skipped.push((input, e.to_string())),
        }
    }
    if summary.written.is_empty() {
        return Err(CommandError::empty("no decodable inputs"));
    }
    Ok(summary)
}

/// One manifest entry.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PairSpec {
    pub clear: PathBuf,
    pub test: PathBuf,
    pub roi: Option<PathBuf>,
}

impl PairSpec {
    pub fn id(&self) -> String {
        stem(&self.test)
    }
}

/// Parses `clear_path,test_path[,roi_path]` lines. Relative paths resolve
/// against `base`; blank lines and `#` comments are skipped.
pub fn parse_manifest(text: &str, base: &Path) -> Result<Vec<PairSpec>, CommandError> {
    let resolve = |p: &str| {
        let p = Path::new(p.trim());
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            base.join(p)
        }
    };
    let mut pairs = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        match fields.as_slice() {
            [clear, test] => pairs.push(PairSpec {
                clear: resolve(clear),
                test: resolve(test),
                roi: None,
            }),
            [clear, test, roi] => pairs.push(PairSpec {
                clear: resolve(clear),
                test: resolve(test),
                roi: Some(resolve(roi)),
            }),
            _ => {
                return Err(CommandError::usage(format!(
                    "manifest line {}: expected clear_path,test_path[,roi_path]",
                    i + 1
                )))
            }
        }
    }
    Ok(pairs)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RowMetrics {
    /// Test image against the reference.
    pub hazy: IqaReport,
    /// Enhanced test image against the reference.
    pub enhanced: IqaReport,
}

impl RowMetrics {
    /// Enhanced minus hazy, for (mse, psnr, ssim).
    pub fn deltas(&self) -> [f64; 3] {
        [
            self.enhanced.mse - self.hazy.mse,
            self.enhanced.psnr - self.hazy.psnr,
            self.enhanced.ssim - self.hazy.ssim,
        ]
    }

    fn columns(&self) -> [f64; 9] {
        let d = self.deltas();
        [
            self.hazy.mse,
            self.hazy.psnr,
            self.hazy.ssim,
            self.enhanced.mse,
            self.enhanced.psnr,
            self.enhanced.ssim,
            d[0],
            d[1],
            d[2],
        ]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalRow {
    pub id: String,
    pub roi_applied: bool,
    pub outcome: Result<RowMetrics, String>,
}

pub const CSV_HEADER: &str =
    "id,hazy_mse,hazy_psnr,hazy_ssim,enhanced_mse,enhanced_psnr,enhanced_ssim,delta_mse,delta_psnr,delta_ssim,roi,error";

fn roi_for(pair: &PairSpec, roi_dir: Option<&Path>) -> Option<PathBuf> {
    pair.roi.clone().or_else(|| {
        let dir = roi_dir?;
        let candidate = dir.join(format!("{}.png", pair.id()));
        candidate.is_file().then_some(candidate)
    })
}

fn evaluate_one(pair: &PairSpec, roi: Option<&Path>, config: &RunConfig) -> crate::Result<RowMetrics> {
    let clear = load_image(&pair.clear)?;
    let test = load_image(&pair.test)?;
    let mask = roi.map(RoiMask::load).transpose()?;
    let enhanced = enhance(&test, &config.enhance)?;
    Ok(RowMetrics {
        hazy: evaluate_pair(&clear, &test, mask.as_ref(), &config.ssim)?,
        enhanced: evaluate_pair(&clear, &enhanced, mask.as_ref(), &config.ssim)?,
    })
}

/// Evaluates every pair; rows come back sorted by id. Failures are recorded
/// per row and do not stop the run.
pub fn evaluate_pairs(pairs: &[PairSpec], roi_dir: Option<&Path>, config: &RunConfig) -> Result<Vec<EvalRow>, CommandError> {
    config.validate()?;
    let mut order: Vec<&PairSpec> = pairs.iter().collect();
    order.sort_by(|a, b| a.id().cmp(&b.id()).then_with(|| a.test.cmp(&b.test)));
    with_pool(config.jobs, || {
        order
            .par_iter()
            .map(|pair| {
                let roi = roi_for(pair, roi_dir);
                EvalRow {
                    id: pair.id(),
                    roi_applied: roi.is_some(),
                    outcome: evaluate_one(pair, roi.as_deref(), config).map_err(|e| e.to_string()),
                }
            })
            .collect()
    })
}

/// Formats a value with 6 significant digits; infinities as `inf`/`-inf`.
pub fn format_sig6(v: f64) -> String {
    if v.is_nan() {
        return "nan".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if v == 0.0 {
        return "0".into();
    }
    let exp = v.abs().log10().floor() as i32;
    if !(-4..6).contains(&exp) {
        return format!("{v:.5e}");
    }
    let decimals = (5 - exp).max(0) as usize;
    let s = format!("{v:.decimals$}");
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

/// Column means over successful rows, skipping non-finite values. A column
/// whose only values are `+inf` averages to `+inf`.
pub fn mean_columns(rows: &[EvalRow]) -> Option<[f64; 9]> {
    let ok: Vec<[f64; 9]> = rows
        .iter()
        .filter_map(|r| r.outcome.as_ref().ok().map(RowMetrics::columns))
        .collect();
    if ok.is_empty() {
        return None;
    }
    Some(std::array::from_fn(|c| {
        let finite: Vec<f64> = ok.iter().map(|r| r[c]).filter(|v| v.is_finite()).collect();
        if finite.is_empty() {
            if ok.iter().all(|r| r[c] == f64::INFINITY) {
                f64::INFINITY
            } else {
                f64::NAN
            }
        } else {
            finite.iter().sum::<f64>() / finite.len() as f64
        }
    }))
}

fn sanitize(message: &str) -> String {
    message.replace([',', '\n', '\r'], ";")
}

/// Renders rows plus a trailing `mean` row when any row succeeded.
pub fn evaluation_csv(rows: &[EvalRow]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for row in rows {
        out.push_str(&row.id);
        match &row.outcome {
            Ok(m) => {
                for v in m.columns() {
                    out.push(',');
                    out.push_str(&format_sig6(v));
                }
                out.push_str(&format!(",{},\n", row.roi_applied));
            }
            Err(e) => out.push_str(&format!(",,,,,,,,,,{},{}\n", row.roi_applied, sanitize(e))),
        }
    }
    if let Some(mean) = mean_columns(rows) {
        out.push_str("mean");
        for v in mean {
            out.push(',');
            out.push_str(&format_sig6(v));
        }
        out.push_str(",,\n");
    }
    out
}

/// Status for a finished evaluation: empty when no row succeeded.
pub fn evaluation_status(rows: &[EvalRow]) -> ExitStatus {
    if rows.iter().any(|r| r.outcome.is_ok()) {
        ExitStatus::Success
    } else {
        ExitStatus::EmptyResult
    }
}

/// Parses the manifest at `manifest`, evaluates it and returns the CSV body
/// together with the exit status.
pub fn run_evaluate(manifest: &Path, roi_dir: Option<&Path>, config: &RunConfig) -> Result<(String, ExitStatus), CommandError> {
    let text = fs::read_to_string(manifest)
        .map_err(|e| CommandError::io(format!("cannot read manifest {}: {e}", manifest.display())))?;
    let base = manifest.parent().unwrap_or(Path::new("."));
    let pairs = parse_manifest(&text, base)?;
    let rows = evaluate_pairs(&pairs, roi_dir, config)?;
    Ok((evaluation_csv(&rows), evaluation_status(&rows)))
}

/// Sampled degradation for one synthesized image.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthRecord {
    pub id: String,
    pub clear: PathBuf,
    pub hazy: PathBuf,
    pub transmission: f64,
    pub airlight: f64,
}

#[derive(Debug, Default)]
pub struct SynthSummary {
    pub records: Vec<SynthRecord>,
    pub skipped: Vec<(PathBuf, String)>,
}

pub const PAIRS_FILE: &str = "pairs.txt";
pub const PARAMS_FILE: &str = "params.csv";

/// Draws `(t, airlight)` for each input in order from a generator seeded with `seed`.
pub fn sample_haze(count: usize, config: &RunConfig) -> Vec<(f64, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let (t0, t1) = config.synth.transmission;
    let (a0, a1) = config.synth.airlight;
    (0..count)
        .map(|_| (rng.gen_range(t0..=t1), rng.gen_range(a0..=a1)))
        .collect()
}

pub fn params_csv(records: &[SynthRecord]) -> String {
    let mut out = String::from("id,clear_path,hazy_path,transmission,airlight\n");
    for r in records {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            r.id,
            r.clear.display(),
            r.hazy.display(),
            r.transmission,
            r.airlight
        ));
    }
    out
}

pub fn pairs_manifest(records: &[SynthRecord]) -> String {
    records
        .iter()
        .map(|r| format!("{},{}\n", r.clear.display(), r.hazy.display()))
        .collect()
}

/// Degrades every clear image under `input` with seeded uniform haze and
/// writes the hazy images, an evaluation manifest and a parameter manifest.
pub fn run_synth(input: &Path, output_dir: &Path, config: &RunConfig) -> Result<SynthSummary, CommandError> {
    config.validate()?;
    let inputs = collect_inputs(input)?;
    if inputs.is_empty() {
        return Err(CommandError::empty(format!("no inputs found in {}", input.display())));
    }
    fs::create_dir_all(output_dir)
        .map_err(|e| CommandError::io(format!("cannot create {}: {e}", output_dir.display())))?;
    let draws = sample_haze(inputs.len(), config);
    let results: Vec<(PathBuf, crate::Result<SynthRecord>)> = with_pool(config.jobs, || {
        inputs
            .par_iter()
            .zip(&draws)
            .map(|(path, &(t, a))| {
                let result = (|| {
                    let clear = load_image(path)?;
                    let hazy = apply_haze(&clear, &HazeParams::uniform(t, [a; 3]))?;
                    let out = output_dir.join(format!("{}.png", stem(path)));
                    save_image(&hazy, &out)?;
                    Ok(SynthRecord {
                        id: stem(path),
                        clear: path.clone(),
                        hazy: out,
                        transmission: t,
                        airlight: a,
                    })
                })();
                (path.clone(), result)
            })
            .collect()
    })?;
    let mut summary = SynthSummary::default();
    for (path, result) in results {
        match result {
            Ok(r) => summary.records.push(r),
            Err(e) => summary.skipped.push((path, e.to_string())),
        }
    }
    let write = |name: &str, body: String| {
        let path = output_dir.join(name);
        fs::write(&path, body).map_err(|e| CommandError::io(format!("cannot write {}: {e}", path.display())))
    };
    write(PAIRS_FILE, pairs_manifest(&summary.records))?;
    write(PARAMS_FILE, params_csv(&summary.records))?;
    if summary.records.is_empty() {
        return Err(CommandError::empty("no decodable inputs"));
    }
    Ok(summary)
}

/// Aggregate view of an evaluation CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportSummary {
    pub rows: usize,
    pub failed: usize,
    pub ssim_improved: usize,
    pub psnr_improved: usize,
    /// Means copied from the CSV's `mean` row, in column order.
    pub means: Option<[f64; 9]>,
}

fn parse_cell(cell: &str) -> Option<f64> {
    match cell {
        "inf" => Some(f64::INFINITY),
        "-inf" => Some(f64::NEG_INFINITY),
        "" => None,
        other => other.parse().ok(),
    }
}

/// Reads an evaluation CSV produced by [`evaluation_csv`].
pub fn summarize_report(csv: &str) -> Result<ReportSummary, CommandError> {
    let mut lines = csv.lines();
    if lines.next() != Some(CSV_HEADER) {
        return Err(CommandError::usage("not an evaluation report: header mismatch"));
    }
    let mut summary = ReportSummary {
        rows: 0,
        failed: 0,
        ssim_improved: 0,
        psnr_improved: 0,
        means: None,
    };
    for (i, line) in lines.enumerate() {
        let cells: Vec<&str> = line.splitn(12, ',').collect();
        if cells.len() < 10 {
            return Err(CommandError::usage(format!("report line {}: too few columns", i + 2)));
        }
        let values: Vec<Option<f64>> = cells[1..10].iter().map(|c| parse_cell(c)).collect();
        if cells[0] == "mean" {
            summary.means = Some(std::array::from_fn(|c| values[c].unwrap_or(f64::NAN)));
            continue;
        }
        summary.rows += 1;
        match (values[7], values[8]) {
            (Some(dp), Some(ds)) => {
                summary.psnr_improved += usize::from(dp > 0.0);
                summary.ssim_improved += usize::from(ds > 0.0);
            }
            _ => summary.failed += 1,
        }
    }
    Ok(summary)
}

impl fmt::Display for ReportSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "pairs:          {}", self.rows)?;
        writeln!(f, "failed:         {}", self.failed)?;
        writeln!(f, "ssim improved:  {}/{}", self.ssim_improved, self.rows - self.failed)?;
        writeln!(f, "psnr improved:  {}/{}", self.psnr_improved, self.rows - self.failed)?;
        if let Some(m) = self.means {
            let names = ["mse", "psnr", "ssim"];
            for (k, name) in names.iter().enumerate() {
                writeln!(
                    f,
                    "mean {name:<5} hazy {:>10}  enhanced {:>10}  delta {:>10}",
                    format_sig6(m[k]),
                    format_sig6(m[3 + k]),
                    format_sig6(m[6 + k])
                )?;
            }
        }
        Ok(())
    }
}
