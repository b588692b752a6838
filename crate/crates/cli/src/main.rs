use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use hazefuse::config::RunConfig;
use hazefuse::harness::{self, CommandError, ExitStatus};

#[derive(Parser)]
#[command(name = "hazefuse", version, about = "Multi-exposure fusion enhancement for hazy images")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Enhance an image or every image in a directory.
    Enhance(Common),
    /// Score (clear, test) pairs from a manifest, before and after enhancement.
    Evaluate(Common),
    /// Degrade clear images with seeded synthetic haze.
    Synth(Common),
    /// Summarize an evaluation CSV.
    Report(Common),
}

#[derive(Args, Debug, Default)]
struct Common {
    /// Input file, directory, manifest or report, depending on the command.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Output directory (enhance, synth) or CSV file (evaluate).
    #[arg(long)]
    output: Option<PathBuf>,
    /// Flat key = value config file; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    gamma_threshold: Option<String>,
    #[arg(long)]
    clip_limit: Option<String>,
    /// CLAHE grid, e.g. 8x8 or 8.
    #[arg(long)]
    tiles: Option<String>,
    #[arg(long)]
    dmin: Option<String>,
    /// Pyramid levels, or "auto".
    #[arg(long)]
    levels: Option<String>,
    /// Directory of ROI masks named after the test image.
    #[arg(long)]
    roi_dir: Option<PathBuf>,
    #[arg(long)]
    seed: Option<String>,
    /// Worker threads (0 = one per core).
    #[arg(long)]
    jobs: Option<String>,
    /// Write intermediate exposure, texture, saturation, weight and pyramid maps.
    #[arg(long)]
    dump_maps: bool,
    /// Transmission sampling range for synth, e.g. 0.4,0.8.
    #[arg(long)]
    t_range: Option<String>,
    /// Achromatic airlight sampling range for synth, e.g. 0.7,1.0.
    #[arg(long)]
    airlight_range: Option<String>,
}

impl Common {
    /// Defaults, then the config file, then flags.
    fn resolve(&self) -> Result<RunConfig, CommandError> {
        let mut config = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        let overrides = [
            ("gamma.threshold", &self.gamma_threshold),
            ("clahe.clip_limit", &self.clip_limit),
            ("clahe.tiles", &self.tiles),
            ("texture.dmin", &self.dmin),
            ("pyramid.levels", &self.levels),
            ("seed", &self.seed),
            ("jobs", &self.jobs),
            ("synth.transmission", &self.t_range),
            ("synth.airlight", &self.airlight_range),
        ];
        for (key, value) in overrides {
            if let Some(v) = value {
                config.set(key, v)?;
            }
        }
        if let Some(p) = &self.input {
            config.input = Some(p.clone());
        }
        if let Some(p) = &self.output {
            config.output = Some(p.clone());
        }
        if let Some(p) = &self.roi_dir {
            config.roi_dir = Some(p.clone());
        }
        if self.dump_maps {
            config.dump_maps = true;
        }
        config.validate()?;
        Ok(config)
    }
}

fn required<'a>(path: &'a Option<PathBuf>, flag: &str) -> Result<&'a Path, CommandError> {
    path.as_deref()
        .ok_or_else(|| CommandError::usage(format!("missing --{flag} (flag or config key)")))
}

fn report_skipped(skipped: &[(PathBuf, String)]) {
    for (path, reason) in skipped {
        eprintln!("skipped {}: {reason}", path.display());
    }
}

fn run(cli: Cli) -> Result<ExitStatus, CommandError> {
    match cli.command {
        Command::Enhance(args) => {
            let config = args.resolve()?;
            let summary = harness::run_enhance(
                required(&config.input, "input")?,
                required(&config.output, "output")?,
                &config,
            )?;
            report_skipped(&summary.skipped);
            eprintln!("enhanced {} image(s)", summary.written.len());
            Ok(ExitStatus::Success)
        }
        Command::Evaluate(args) => {
            let config = args.resolve()?;
            let (csv, status) =
                harness::run_evaluate(required(&config.input, "input")?, config.roi_dir.as_deref(), &config)?;
            match &config.output {
                Some(path) => std::fs::write(path, &csv)
                    .map_err(|e| CommandError::io(format!("cannot write {}: {e}", path.display())))?,
                None => print!("{csv}"),
            }
            if status == ExitStatus::EmptyResult {
                eprintln!("no pair could be evaluated");
            }
            Ok(status)
        }
        Command::Synth(args) => {
            let config = args.resolve()?;
            let summary = harness::run_synth(
                required(&config.input, "input")?,
                required(&config.output, "output")?,
                &config,
            )?;
            report_skipped(&summary.skipped);
            eprintln!("synthesized {} hazy image(s)", summary.records.len());
            Ok(ExitStatus::Success)
        }
        Command::Report(args) => {
            let config = args.resolve()?;
            let path = required(&config.input, "input")?;
            let csv = std::fs::read_to_string(path)
                .map_err(|e| CommandError::io(format!("cannot read {}: {e}", path.display())))?;
            print!("{}", harness::summarize_report(&csv)?);
            Ok(ExitStatus::Success)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { ExitStatus::Usage.code() as u8 } else { 0 });
        }
    };
    match run(cli) {
        Ok(status) => ExitCode::from(status.code() as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.status.code() as u8)
        }
    }
}
