//! `lskel` command-line tool.
//!
//! Exit status is 0 on success, 1 when an input cannot be read, parsed or
//! written, and 2 on usage errors.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::error::ErrorKind;
use clap::{Args, CommandFactory, Parser, Subcommand, ValueEnum};
use lskel::bench::{self, EngineKind};
use lskel::pgm::{load_pgm, save_pgm, PgmVariant};
use lskel::sdm::{EngineConfig, ParallelEngine};
use lskel::skeleton::{lambda_skeleton_with, SkeletonTarget};
use lskel::synth::{gen_synthetic, SyntheticSpec};
use lskel::{count_targets, gradient3x3, is_stable, GrayImage, Lambda, Point};
use serde_json::json;

#[derive(Parser)]
#[command(name = "lskel", version, about = "Filtered topological thinning of grayscale PGM images")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Thin an image and print run statistics as JSON.
    Thin(ThinArgs),
    /// Time engines over thread counts; emit CSV and a summary.
    Bench(BenchArgs),
    /// Report whether an image is stable and how many targets remain.
    Verify(VerifyArgs),
    /// Print the local classification of one pixel as JSON.
    Classify(ClassifyArgs),
    /// Replace each pixel by the max minus min of its 3x3 block.
    Gradient(GradientArgs),
    /// Render a synthetic image, e.g. `ridge:64x64:contrast=20`.
    Synth(SynthArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Engine {
    Seq,
    Guarded,
    #[value(alias = "spin_wait", alias = "spin-wait")]
    Spin,
}

impl From<Engine> for EngineKind {
    fn from(e: Engine) -> Self {
        match e {
            Engine::Seq => EngineKind::Seq,
            Engine::Guarded => EngineKind::Guarded,
            Engine::Spin => EngineKind::SpinWait,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    P2,
    P5,
}

#[derive(Args)]
struct OutputFormat {
    /// Output encoding.
    #[arg(long, value_enum, default_value = "p5")]
    format: Format,
}

impl OutputFormat {
    fn variant(&self) -> PgmVariant {
        match self.format {
            Format::P2 => PgmVariant::P2,
            Format::P5 => PgmVariant::P5,
        }
    }
}

#[derive(Args)]
struct ThinArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    output: PathBuf,
    #[arg(long, default_value_t = 0)]
    lambda: u32,
    #[arg(long, value_enum, default_value = "seq")]
    engine: Engine,
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    threads: u64,
    /// Also report the Hamming distance to this image.
    #[arg(long)]
    compare: Option<PathBuf>,
    #[command(flatten)]
    out: OutputFormat,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long, conflicts_with = "synthetic", required_unless_present = "synthetic")]
    input: Option<PathBuf>,
    /// Synthetic input spec instead of a file.
    #[arg(long)]
    synthetic: Option<SyntheticSpec>,
    #[arg(long, default_value_t = 10)]
    lambda: u32,
    #[arg(long, value_delimiter = ',', default_value = "1,2,4,8,16",
          value_parser = clap::value_parser!(u64).range(1..))]
    threads_list: Vec<u64>,
    #[arg(long, default_value_t = 5, value_parser = clap::value_parser!(u64).range(1..))]
    repeats: u64,
    #[arg(long, value_enum, value_delimiter = ',', default_value = "seq,guarded,spin")]
    engines: Vec<Engine>,
    /// Write rows here instead of standard output.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value_t = 0)]
    lambda: u32,
}

#[derive(Args)]
struct ClassifyArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    x: usize,
    #[arg(long)]
    y: usize,
    #[arg(long, default_value_t = 0)]
    lambda: u32,
}

#[derive(Args)]
struct GradientArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    output: PathBuf,
    #[command(flatten)]
    out: OutputFormat,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    spec: SyntheticSpec,
    #[arg(long)]
    output: PathBuf,
    #[command(flatten)]
    out: OutputFormat,
}

type Failure = String;

fn load(path: &Path) -> Result<GrayImage, Failure> {
    load_pgm(path).map_err(|e| format!("{}: {e}", path.display()))
}

fn save(path: &Path, img: &GrayImage, variant: PgmVariant) -> Result<(), Failure> {
    save_pgm(path, img, variant).map_err(|e| format!("{}: {e}", path.display()))
}

fn thin(a: ThinArgs) -> Result<(), Failure> {
    let img = load(&a.input)?;
    let lambda = Lambda(a.lambda);
    let engine = EngineKind::from(a.engine);
    let threads = a.threads as usize;
    let start = Instant::now();
    let (out, stats) = match engine.variant() {
        None => {
            let (out, s) = lambda_skeleton_with(&img, lambda, &SkeletonTarget);
            (out, serde_json::to_value(s).expect("plain struct"))
        }
        Some(v) => {
            let engine = ParallelEngine::new(EngineConfig::new(threads, lambda, v)).map_err(|e| e.to_string())?;
            let (out, s) = engine.run(&img);
            (out, serde_json::to_value(s).expect("plain struct"))
        }
    };
    let wall_ms = start.elapsed().as_secs_f64() * 1e3;
    save(&a.output, &out, a.out.variant())?;
    let mut report = json!({
        "engine": engine.name(),
        "threads": if engine == EngineKind::Seq { 1 } else { threads },
        "lambda": a.lambda,
        "width": img.width(),
        "height": img.height(),
        "wall_ms": wall_ms,
        "changed_pixels": out.hamming_distance(&img),
        "stable": is_stable(&out, lambda),
        "stats": stats,
    });
    if let Some(path) = &a.compare {
        let other = load(path)?;
        report["hamming"] = json!(out.hamming_distance(&other));
    }
    println!("{report}");
    Ok(())
}

fn bench_cmd(a: BenchArgs) -> Result<(), Failure> {
    let img = match (&a.input, &a.synthetic) {
        (Some(path), _) => load(path)?,
        (None, Some(spec)) => gen_synthetic(spec).map_err(|e| e.to_string())?,
        (None, None) => unreachable!("clap requires one input"),
    };
    let engines: Vec<EngineKind> = a.engines.iter().map(|&e| e.into()).collect();
    let threads: Vec<usize> = a.threads_list.iter().map(|&n| n as usize).collect();
    let report = bench::run_bench(&img, Lambda(a.lambda), &engines, &threads, a.repeats as usize)
        .map_err(|e| e.to_string())?;
    let csv = report.to_csv();
    match &a.csv {
        Some(path) => fs::write(path, csv).map_err(|e| format!("{}: {e}", path.display()))?,
        None => print!("{csv}"),
    }
    println!();
    print!("{}", report.summary_text());
    Ok(())
}

fn verify(a: VerifyArgs) -> Result<(), Failure> {
    let img = load(&a.input)?;
    let lambda = Lambda(a.lambda);
    let targets = count_targets(&img, lambda);
    println!("stable: {}", if targets == 0 { "yes" } else { "no" });
    println!("targets: {targets}");
    Ok(())
}

fn classify(a: ClassifyArgs) -> Result<(), Failure> {
    let img = load(&a.input)?;
    let p = Point::new(a.x, a.y);
    if !img.is_interior(p) {
        Cli::command()
            .error(
                ErrorKind::ValueValidation,
                format!("({}, {}) is not an interior pixel of a {}x{} image", a.x, a.y, img.width(), img.height()),
            )
            .exit();
    }
    let nb = lskel::Neighborhood::of(&img, p).expect("interior checked");
    let lambda = Lambda(a.lambda);
    let report = json!({
        "x": a.x,
        "y": a.y,
        "value": nb.center,
        "class": nb.classify(),
        "lambda": a.lambda,
        "lambda_destructible": nb.is_lambda_destructible(lambda),
        "lambda_end": nb.is_lambda_end(lambda),
        "lambda_deletable": nb.is_lambda_deletable(lambda),
        "target": nb.is_skeleton_target(lambda),
    });
    println!("{report}");
    Ok(())
}

fn gradient(a: GradientArgs) -> Result<(), Failure> {
    let img = load(&a.input)?;
    save(&a.output, &gradient3x3(&img), a.out.variant())
}

fn synth(a: SynthArgs) -> Result<(), Failure> {
    let img = gen_synthetic(&a.spec).map_err(|e| e.to_string())?;
    save(&a.output, &img, a.out.variant())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Thin(a) => thin(a),
        Command::Bench(a) => bench_cmd(a),
        Command::Verify(a) => verify(a),
        Command::Classify(a) => classify(a),
        Command::Gradient(a) => gradient(a),
        Command::Synth(a) => synth(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
