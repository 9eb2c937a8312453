use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;

use projstab::bandlimit::FilterKind;
use projstab::decomposition::{MarginMode, Verdict, DEFAULT_THRESHOLD_DB};
use projstab::interp::InterpMethod;
use projstab::pipeline::{analyze, Analysis, AnalysisConfig};
use projstab::poles::DEFAULT_MAX_ORDER;
use projstab::report::{write_curves, Report, ReportEntry};
use projstab::synth::{eval_frf, random_system, UnstablePair};
use projstab::{io, Error, Result};

const EXIT_ERROR: u8 = 1;
const EXIT_UNSTABLE: u8 = 2;

/// Stability analysis of sampled frequency responses by stable/unstable
/// projection.
#[derive(Debug, Parser)]
#[command(name = "projstab", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Split each input into stable and unstable parts and judge stability.
    Analyze(AnalyzeArgs),
    /// Same as `analyze --poles`, with a pole table on stdout.
    Poles(AnalyzeArgs),
    /// Write a seeded synthetic response as CSV.
    Synth(SynthArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum FilterArg {
    Lowpass,
    Bandpass,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum InterpArg {
    Linear,
    Pade,
}

#[derive(Debug, Args)]
struct AnalyzeArgs {
    /// CSV inputs (`freq_hz,re_ohm,im_ohm`), analyzed independently.
    #[arg(required = true)]
    inputs: Vec<PathBuf>,
    /// Lower band edge in Hz.
    #[arg(long)]
    fmin: Option<f64>,
    /// Upper band edge in Hz [default: highest sample frequency].
    #[arg(long)]
    fmax: Option<f64>,
    #[arg(long, value_enum, default_value = "lowpass")]
    filter: FilterArg,
    #[arg(long, default_value_t = 10)]
    filter_order: usize,
    #[arg(long, default_value_t = 0.1)]
    ripple_db: f64,
    #[arg(long, default_value_t = 100.0)]
    atten_db: f64,
    /// Moebius scale in rad/s [default: 2 pi fmax (sqrt 2 - 1)].
    #[arg(long)]
    alpha: Option<f64>,
    /// Uniform disc grid size, a power of two [default: next power of two >= 8 x samples].
    #[arg(long)]
    nfft: Option<usize>,
    #[arg(long, value_enum, default_value = "linear")]
    interp: InterpArg,
    #[arg(long, default_value_t = DEFAULT_THRESHOLD_DB)]
    threshold_db: f64,
    /// Compare the unstable part with the local error level instead of the global maximum.
    #[arg(long)]
    pointwise_margin: bool,
    /// Estimate the unstable poles.
    #[arg(long)]
    poles: bool,
    #[arg(long, default_value_t = DEFAULT_MAX_ORDER)]
    max_order: usize,
    /// JSON report path [default: stdout].
    #[arg(long)]
    report: Option<PathBuf>,
    /// CSV curves path; with several inputs an index and label are appended.
    #[arg(long)]
    curves: Option<PathBuf>,
    /// Exit with code 2 when any input is unstable.
    #[arg(long)]
    fail_on_unstable: bool,
}

#[derive(Debug, Args)]
struct SynthArgs {
    /// Number of poles.
    #[arg(long, default_value_t = 20)]
    order: usize,
    #[arg(long, default_value_t = 0.0)]
    fmin: f64,
    #[arg(long)]
    fmax: f64,
    #[arg(long, default_value_t = 5000)]
    points: usize,
    /// Planted unstable pair `F0_HZ,SIGMA_RAD_S`; repeatable.
    #[arg(long, value_parser = parse_pair)]
    unstable: Vec<(f64, f64)>,
    /// Residue of the planted pairs relative to sigma.
    #[arg(long, default_value_t = 0.1)]
    residue_scale: f64,
    /// Delay in seconds.
    #[arg(long, default_value_t = 0.0)]
    delay: f64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Output path [default: stdout].
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_pair(s: &str) -> std::result::Result<(f64, f64), String> {
    let (a, b) = s.split_once(',').ok_or_else(|| format!("expected F0,SIGMA, got '{s}'"))?;
    let f0 = a.trim().parse::<f64>().map_err(|e| e.to_string())?;
    let sigma = b.trim().parse::<f64>().map_err(|e| e.to_string())?;
    Ok((f0, sigma))
}

impl AnalyzeArgs {
    fn config(&self, force_poles: bool) -> AnalysisConfig {
        AnalysisConfig {
            f_min: self.fmin,
            f_max: self.fmax,
            filter_kind: match self.filter {
                FilterArg::Lowpass => FilterKind::Lowpass,
                FilterArg::Bandpass => FilterKind::Bandpass,
            },
            filter_order: self.filter_order,
            ripple_db: self.ripple_db,
            atten_db: self.atten_db,
            alpha: self.alpha,
            n_fft: self.nfft,
            interp: match self.interp {
                InterpArg::Linear => InterpMethod::Linear,
                InterpArg::Pade => InterpMethod::Pade,
            },
            threshold_db: self.threshold_db,
            margin_mode: if self.pointwise_margin { MarginMode::Pointwise } else { MarginMode::Global },
            extract_poles: self.poles || force_poles,
            max_order: self.max_order,
        }
    }
}

struct Outcome {
    entry: ReportEntry,
    analysis: Analysis,
}

fn analyze_one(path: &Path, cfg: &AnalysisConfig) -> Result<Outcome> {
    let frf = io::read_csv(path)?;
    let analysis = analyze(&frf, cfg)?;
    let entry = ReportEntry::new(&analysis, &frf.label, &path.display().to_string(), frf.mixing_index);
    Ok(Outcome { entry, analysis })
}

fn curves_path(base: &Path, index: usize, label: &str, many: bool) -> PathBuf {
    if !many {
        return base.to_path_buf();
    }
    let stem = base.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let ext = base.extension().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "csv".into());
    let clean: String = label.chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' { c } else { '_' }).collect();
    base.with_file_name(format!("{stem}_{index}_{clean}.{ext}"))
}

fn run_analyze(args: &AnalyzeArgs, pole_table: bool) -> Result<u8> {
    let cfg = args.config(pole_table);
    cfg.validate()?;
    let results: Vec<Result<Outcome>> = args.inputs.par_iter().map(|p| analyze_one(p, &cfg)).collect();
    let mut outcomes = Vec::with_capacity(results.len());
    for (path, r) in args.inputs.iter().zip(results) {
        match r {
            Ok(o) => outcomes.push(o),
            Err(e) => {
                eprintln!("error: {}: {e}", path.display());
                return Ok(EXIT_ERROR);
            }
        }
    }
    if let Some(base) = &args.curves {
        let many = outcomes.len() > 1;
        for (i, o) in outcomes.iter().enumerate() {
            write_curves(curves_path(base, i, &o.entry.label, many), &o.analysis)?;
        }
    }
    let any_unstable = outcomes.iter().any(|o| o.entry.stability.verdict == Verdict::Unstable);
    for o in &outcomes {
        let s = &o.entry.stability;
        eprintln!(
            "{}: {:?}, margin {:.2} dB at {:.6e} Hz (floor {:.2} dB)",
            o.entry.label, s.verdict, s.margin_db, s.peak_frequency, s.error_floor_db
        );
    }
    let report = Report::new(cfg, outcomes.into_iter().map(|o| o.entry).collect());
    if pole_table {
        print_poles(&report);
    }
    match &args.report {
        Some(path) => report.write(path)?,
        None if !pole_table => println!("{}", report.to_json()?),
        None => {}
    }
    Ok(if args.fail_on_unstable && any_unstable { EXIT_UNSTABLE } else { 0 })
}

fn print_poles(report: &Report) {
    println!("{:<16} {:>16} {:>16} {:>14} {:>8}", "label", "freq_hz", "sigma_rad_s", "|residue|", "reliable");
    for e in &report.entries {
        match (&e.poles, &e.pole_error) {
            (Some(set), _) => {
                for p in &set.poles {
                    println!(
                        "{:<16} {:>16.9e} {:>16.9e} {:>14.6e} {:>8}",
                        e.label,
                        p.freq_hz(),
                        p.lambda.re,
                        p.residue.norm(),
                        p.reliable
                    );
                }
            }
            (None, Some(err)) => println!("{:<16} pole estimation failed: {err}", e.label),
            (None, None) => {}
        }
    }
}

fn run_synth(args: &SynthArgs) -> Result<u8> {
    if args.points < 2 {
        return Err(Error::BadSpec("at least 2 points needed".into()));
    }
    let pairs: Vec<UnstablePair> = args
        .unstable
        .iter()
        .map(|&(f0, sigma)| UnstablePair::new(f0, sigma).with_residue_scale(args.residue_scale))
        .collect();
    let sys = random_system(args.order, (args.fmin, args.fmax), &pairs, args.seed)?.with_delay(args.delay);
    let n = args.points;
    let freqs: Vec<f64> = (0..n).map(|i| args.fmin + (args.fmax - args.fmin) * i as f64 / (n - 1) as f64).collect();
    let frf = eval_frf(&sys, &freqs)?.with_label(format!("synth-{}", args.seed));
    match &args.out {
        Some(path) => io::write_csv(path, &frf)?,
        None => io::write_csv_to(&mut std::io::stdout().lock(), &frf)?,
    }
    Ok(0)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    // usage errors exit with 1; 2 is reserved for unstable verdicts
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_ERROR } else { 0 });
        }
    };
    let result = match &cli.command {
        Command::Analyze(a) => run_analyze(a, false),
        Command::Poles(a) => run_analyze(a, true),
        Command::Synth(s) => run_synth(s),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_ERROR)
        }
    }
}
