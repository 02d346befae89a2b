//! Timing harness, speedup and efficiency formulas, Amdahl fit.
//!
//! Each configuration is run `repeats` times on a fresh copy of the input and
//! the minimum wall time is reported. Only the thinning call is timed.

use std::fmt::{self, Write as _};
use std::str::FromStr;
use std::time::Instant;

use thiserror::Error;

use crate::image::GrayImage;
use crate::sdm::{EngineConfig, EngineError, ParallelEngine, QueueVariant};
use crate::skeleton::lambda_skeleton;
use crate::topology::Lambda;

/// Reference speedups at 8 threads on an 8-core machine, 512x512 input.
pub const REFERENCE_SPEEDUP_SPIN_8: f64 = 6.2;
pub const REFERENCE_SPEEDUP_GUARDED_8: f64 = 1.7;
/// Reference times (ms) for the sequential and 8-thread spin-wait engines.
pub const REFERENCE_SEQ_MS: f64 = 48.247;
pub const REFERENCE_SPIN_8_MS: f64 = 8.282;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BenchError {
    #[error("parallel fraction {0} outside [0, 1]")]
    FractionOutOfRange(f64),
    #[error("thread count must be at least 1")]
    NoThreads,
    #[error("times must be positive, got {seq_ms} and {par_ms}")]
    NonPositiveTime { seq_ms: f64, par_ms: f64 },
    #[error("no measurement with more than one thread and positive speedup")]
    NoFitPoints,
    #[error("repeats must be at least 1")]
    NoRepeats,
    #[error(transparent)]
    Engine(#[from] EngineError),
}

/// `1 / (1 - p + p / n)`.
pub fn amdahl_speedup(p: f64, n: usize) -> Result<f64, BenchError> {
    if !(0.0..=1.0).contains(&p) {
        return Err(BenchError::FractionOutOfRange(p));
    }
    if n == 0 {
        return Err(BenchError::NoThreads);
    }
    Ok(1.0 / (1.0 - p + p / n as f64))
}

/// `seq_ms / (n * par_ms)`.
pub fn efficiency(seq_ms: f64, par_ms: f64, n: usize) -> Result<f64, BenchError> {
    if !(seq_ms > 0.0 && par_ms > 0.0) {
        return Err(BenchError::NonPositiveTime { seq_ms, par_ms });
    }
    if n == 0 {
        return Err(BenchError::NoThreads);
    }
    Ok(seq_ms / (n as f64 * par_ms))
}

/// Efficiency predicted for parallel fraction `p`: `1 / (n(1 - p) + p)`.
pub fn amdahl_efficiency(p: f64, n: usize) -> Result<f64, BenchError> {
    Ok(amdahl_speedup(p, n)? / n as f64)
}

/// Mean over points with `n > 1` of `(1 - 1/S) / (1 - 1/n)`, clamped to [0, 1].
pub fn amdahl_fit(measured: &[(usize, f64)]) -> Result<f64, BenchError> {
    let estimates: Vec<f64> = measured
        .iter()
        .filter(|&&(n, s)| n > 1 && s > 0.0)
        .map(|&(n, s)| (1.0 - 1.0 / s) / (1.0 - 1.0 / n as f64))
        .collect();
    if estimates.is_empty() {
        return Err(BenchError::NoFitPoints);
    }
    let mean = estimates.iter().sum::<f64>() / estimates.len() as f64;
    Ok(mean.clamp(0.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EngineKind {
    Seq,
    Guarded,
    SpinWait,
}

impl EngineKind {
    pub const ALL: [EngineKind; 3] = [EngineKind::Seq, EngineKind::Guarded, EngineKind::SpinWait];

    pub fn name(self) -> &'static str {
        match self {
            EngineKind::Seq => "seq",
            EngineKind::Guarded => "guarded",
            EngineKind::SpinWait => "spin_wait",
        }
    }

    pub fn variant(self) -> Option<QueueVariant> {
        match self {
            EngineKind::Seq => None,
            EngineKind::Guarded => Some(QueueVariant::Guarded),
            EngineKind::SpinWait => Some(QueueVariant::SpinWait),
        }
    }
}

impl fmt::Display for EngineKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EngineKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "seq" | "sequential" => Ok(EngineKind::Seq),
            "guarded" => Ok(EngineKind::Guarded),
            "spin" | "spin_wait" | "spin-wait" => Ok(EngineKind::SpinWait),
            _ => Err(format!("unknown engine {s:?} (expected seq, guarded or spin)")),
        }
    }
}

/// Thins `img` with the chosen engine. `threads` is ignored by `Seq`.
pub fn thin(img: &GrayImage, engine: EngineKind, threads: usize, lambda: Lambda) -> Result<GrayImage, EngineError> {
    match engine.variant() {
        None => Ok(lambda_skeleton(img, lambda)),
        Some(v) => Ok(ParallelEngine::new(EngineConfig::new(threads, lambda, v))?.run(img).0),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct BenchRow {
    pub engine: EngineKind,
    pub threads: usize,
    pub run: usize,
    pub wall_ms: f64,
}

/// Derived figures for one engine and thread count.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct ConfigSummary {
    pub engine: EngineKind,
    pub threads: usize,
    pub best_ms: f64,
    /// Best sequential time over this configuration's best time.
    pub speedup: f64,
    /// This engine's best 1-thread time over its best time here.
    pub self_speedup: Option<f64>,
    pub efficiency: f64,
    pub images_per_s: f64,
    /// Pixels differing from the sequential output.
    pub hamming: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, serde::Serialize)]
pub struct BenchReport {
    pub rows: Vec<BenchRow>,
    /// First-run output distance to the sequential output, per configuration.
    pub hamming: Vec<(EngineKind, usize, usize)>,
}

impl BenchReport {
    fn times(&self, engine: EngineKind, threads: Option<usize>) -> impl Iterator<Item = f64> + '_ {
        self.rows
            .iter()
            .filter(move |r| r.engine == engine && threads.is_none_or(|t| r.threads == t))
            .map(|r| r.wall_ms)
    }

    /// Minimum wall time over the repeats of one configuration.
    pub fn best_ms(&self, engine: EngineKind, threads: usize) -> Option<f64> {
        self.times(engine, Some(threads)).reduce(f64::min)
    }

    /// Minimum sequential wall time over all rows.
    pub fn best_seq_ms(&self) -> Option<f64> {
        self.times(EngineKind::Seq, None).reduce(f64::min)
    }

    /// Configurations in the order they were first measured.
    pub fn configs(&self) -> Vec<(EngineKind, usize)> {
        let mut seen = Vec::new();
        for r in &self.rows {
            if !seen.contains(&(r.engine, r.threads)) {
                seen.push((r.engine, r.threads));
            }
        }
        seen
    }

    pub fn summary(&self) -> Vec<ConfigSummary> {
        let Some(seq) = self.best_seq_ms() else {
            return Vec::new();
        };
        self.configs()
            .into_iter()
            .map(|(engine, threads)| {
                let best_ms = self.best_ms(engine, threads).expect("config has rows");
                ConfigSummary {
                    engine,
                    threads,
                    best_ms,
                    speedup: seq / best_ms,
                    self_speedup: self.best_ms(engine, 1).map(|t1| t1 / best_ms),
                    efficiency: seq / (threads as f64 * best_ms),
                    images_per_s: 1000.0 / best_ms,
                    hamming: self
                        .hamming
                        .iter()
                        .find(|&&(e, t, _)| e == engine && t == threads)
                        .map(|&(_, _, d)| d),
                }
            })
            .collect()
    }

    /// Fitted parallel fraction for `engine`, from its self-speedups
    /// (or speedups over the sequential engine when no 1-thread run exists).
    pub fn fitted_fraction(&self, engine: EngineKind) -> Result<f64, BenchError> {
        let points: Vec<(usize, f64)> = self
            .summary()
            .into_iter()
            .filter(|s| s.engine == engine)
            .map(|s| (s.threads, s.self_speedup.unwrap_or(s.speedup)))
            .collect();
        amdahl_fit(&points)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("engine,threads,run,wall_ms\n");
        for r in &self.rows {
            writeln!(out, "{},{},{},{:.6}", r.engine, r.threads, r.run, r.wall_ms).expect("string write");
        }
        out
    }

    /// Human-readable summary block.
    pub fn summary_text(&self) -> String {
        let mut out = String::new();
        writeln!(
            out,
            "{:<10} {:>7} {:>11} {:>8} {:>8} {:>7} {:>10} {:>8}",
            "engine", "threads", "best_ms", "S(n)", "self_S", "eff", "images/s", "hamming"
        )
        .unwrap();
        for s in self.summary() {
            let opt = |v: Option<String>| v.unwrap_or_else(|| "-".into());
            writeln!(
                out,
                "{:<10} {:>7} {:>11.3} {:>8.3} {:>8} {:>7.3} {:>10.1} {:>8}",
                s.engine.name(),
                s.threads,
                s.best_ms,
                s.speedup,
                opt(s.self_speedup.map(|v| format!("{v:.3}"))),
                s.efficiency,
                s.images_per_s,
                opt(s.hamming.map(|d| d.to_string())),
            )
            .unwrap();
        }
        for engine in [EngineKind::Guarded, EngineKind::SpinWait] {
            if let Ok(p) = self.fitted_fraction(engine) {
                writeln!(out, "fitted parallel fraction ({engine}): {p:.4}").unwrap();
            }
        }
        out
    }
}

/// Runs every engine at every thread count `repeats` times.
///
/// The sequential engine is run once per thread count as well, so the CSV
/// has `engines x threads x repeats` rows.
pub fn run_bench(
    img: &GrayImage,
    lambda: Lambda,
    engines: &[EngineKind],
    threads: &[usize],
    repeats: usize,
) -> Result<BenchReport, BenchError> {
    if repeats == 0 {
        return Err(BenchError::NoRepeats);
    }
    if threads.contains(&0) {
        return Err(BenchError::NoThreads);
    }
    let reference = lambda_skeleton(img, lambda);
    let mut report = BenchReport::default();
    for &engine in engines {
        let counts = if engine == EngineKind::Seq { &[1][..] } else { threads };
        for &n in counts {
            let parallel = engine
                .variant()
                .map(|v| ParallelEngine::new(EngineConfig::new(n, lambda, v)))
                .transpose()?;
            for run in 0..repeats {
                let input = img.clone();
                let start = Instant::now();
                let out = match &parallel {
                    None => lambda_skeleton(&input, lambda),
                    Some(p) => p.run(&input).0,
                };
                let wall_ms = start.elapsed().as_secs_f64() * 1e3;
                report.rows.push(BenchRow {
                    engine,
                    threads: n,
                    run,
                    wall_ms,
                });
                if run == 0 {
                    let d = out.hamming_distance(&reference).expect("same dimensions");
                    report.hamming.push((engine, n, d));
                }
            }
        }
    }
    Ok(report)
}
