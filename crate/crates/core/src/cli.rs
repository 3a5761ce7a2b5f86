// SPDX-License-Identifier: Apache-2.0

//! Command-line driver: `lock`, `elements`, `verify` and `key-effect`.
//!
//! Results go to stdout. Warnings and errors go to stderr as one JSON object
//! per line: `{"warning"|"error": kind, "message": text}`.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;
use thiserror::Error;

use crate::analyze::{analyze, uniquify, AnalyzeError, ElementsReport};
use crate::backend::keyfile::{key_text, manifest_text, parse_key};
use crate::backend::{emit, insert_key_ports, read_key, write_atomic, BackendError, DEFAULT_KEY_PORT};
use crate::frontend::ast::SourceUnit;
use crate::frontend::{parse_with_top, FrontendError};
use crate::harness::{self, HarnessError, Mode, DEFAULT_CYCLES, DEFAULT_VECTORS};
use crate::lock::{obfuscate_design, Budget, LockError, ObfuscationConfig, TechniqueSet};

#[derive(Debug, Parser)]
#[command(name = "rtlock", version, about = "Lock RTL designs and check the locked result")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Lock a design; writes `<name>.locked.v`, `<name>.key`, `<name>.manifest.jsonl`.
    Lock(LockArgs),
    /// Print the candidate elements and blacklist as JSON without locking.
    Elements(ElementsArgs),
    /// Check a locked design against the original under a key.
    Verify(CheckArgs),
    /// Flip each key bit and report the fraction of failing points.
    KeyEffect(KeyEffectArgs),
}

#[derive(Debug, Args)]
pub struct LockArgs {
    pub design: PathBuf,
    #[arg(long)]
    pub top: Option<String>,
    /// `all` or a comma list of `const`, `op`, `branch`.
    #[arg(long, default_value = "all")]
    pub techniques: TechniqueSet,
    /// Percentage of each element category to lock [default: 100].
    #[arg(long, conflicts_with = "max_key_bits", value_parser = clap::value_parser!(u32).range(0..=100))]
    pub percent: Option<u32>,
    /// Upper bound on the key width.
    #[arg(long)]
    pub max_key_bits: Option<u64>,
    #[arg(long, env = "ASSURE_SEED", default_value_t = 0)]
    pub seed: u64,
    /// Key file supplying operation and branch key bits.
    #[arg(long)]
    pub input_key: Option<PathBuf>,
    #[arg(long, default_value = DEFAULT_KEY_PORT)]
    pub key_port: String,
    /// Directory for the outputs [default: next to the input].
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    /// Lock elements marked with skip pragmas too.
    #[arg(long)]
    pub ignore_pragmas: bool,
}

#[derive(Debug, Args)]
pub struct ElementsArgs {
    pub design: PathBuf,
    #[arg(long)]
    pub top: Option<String>,
}

#[derive(Debug, Args)]
pub struct CheckArgs {
    pub original: PathBuf,
    pub locked: PathBuf,
    pub key: PathBuf,
    #[arg(long)]
    pub top: Option<String>,
    #[arg(long, default_value = DEFAULT_KEY_PORT)]
    pub key_port: String,
    /// Enumerate every input sequence instead of random vectors.
    #[arg(long)]
    pub exhaustive: bool,
    /// Random sequences.
    #[arg(long, default_value_t = DEFAULT_VECTORS)]
    pub vectors: usize,
    /// Cycles per sequence; for exhaustive checking the default depends on the design.
    #[arg(long)]
    pub cycles: Option<usize>,
    #[arg(long, env = "ASSURE_SEED", default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ReportFormat {
    Text,
    Json,
}

#[derive(Debug, Args)]
pub struct KeyEffectArgs {
    #[command(flatten)]
    pub check: CheckArgs,
    #[arg(long, value_enum, default_value_t = ReportFormat::Text)]
    pub report: ReportFormat,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Frontend { path: PathBuf, source: FrontendError },
    #[error(transparent)]
    Analyze(#[from] AnalyzeError),
    #[error(transparent)]
    Lock(#[from] LockError),
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error(transparent)]
    Harness(#[from] HarnessError),
    #[error("locked design does not match the original at cycle {cycle}, output `{output}` bit {bit}")]
    Mismatch { cycle: usize, output: String, bit: u32 },
}

impl CliError {
    fn kind(&self) -> String {
        match self {
            CliError::Read { .. } => "Io".into(),
            CliError::Frontend { source, .. } => match source {
                FrontendError::Syntax { .. } => "ParseError",
                FrontendError::Unsupported { .. } => "UnsupportedConstruct",
                FrontendError::ParameterUnresolvable { .. } => "ParameterUnresolvable",
                FrontendError::Invalid { .. } => "InvalidDesign",
            }
            .into(),
            CliError::Analyze(_) => "AnalyzeError".into(),
            CliError::Lock(e) => variant(e),
            CliError::Backend(e) => variant(e),
            CliError::Harness(HarnessError::Sim(e)) => variant(e),
            CliError::Harness(e) => variant(e),
            CliError::Mismatch { .. } => "Mismatch".into(),
        }
    }
}

/// Variant name from the `Debug` form.
fn variant(e: &impl std::fmt::Debug) -> String {
    let s = format!("{e:?}");
    s.split(|c: char| !c.is_alphanumeric()).next().unwrap_or_default().to_string()
}

fn message(kind: &str, tag: &str, text: &str) -> String {
    json!({ tag: kind, "message": text }).to_string()
}

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|source| CliError::Read { path: path.to_path_buf(), source })
}

fn load(path: &Path, top: Option<&str>) -> Result<SourceUnit, CliError> {
    parse_with_top(&read(path)?, top).map_err(|source| CliError::Frontend { path: path.to_path_buf(), source })
}

/// Output paths `<stem>.locked.v`, `<stem>.key`, `<stem>.manifest.jsonl`.
pub fn output_paths(design: &Path, out_dir: Option<&Path>) -> [PathBuf; 3] {
    let stem = design.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "design".into());
    let dir = out_dir.map(Path::to_path_buf).unwrap_or_else(|| design.parent().unwrap_or(Path::new("")).to_path_buf());
    [dir.join(format!("{stem}.locked.v")), dir.join(format!("{stem}.key")), dir.join(format!("{stem}.manifest.jsonl"))]
}

fn lock(a: &LockArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<(), CliError> {
    let design = load(&a.design, a.top.as_deref())?;
    let budget = match (a.percent, a.max_key_bits) {
        (_, Some(n)) => Budget::MaxBits(n),
        (Some(p), None) => Budget::Percent(p),
        (None, None) => Budget::Percent(100),
    };
    let mut cfg = ObfuscationConfig::new(a.techniques, budget, a.seed);
    cfg.respect_pragmas = !a.ignore_pragmas;
    if let Some(p) = &a.input_key {
        cfg.input_key = Some(parse_key(&read(p)?)?);
    }
    let locked = obfuscate_design(&design, &cfg)?;
    let (wired, wiring) = insert_key_ports(&locked.design, &a.key_port)?;
    let text = emit(&wired);
    let paths = output_paths(&a.design, a.out_dir.as_deref());
    for w in &locked.warnings {
        let _ = writeln!(err, "{}", message(&variant(w), "warning", &w.to_string()));
    }
    if let Some(d) = &a.out_dir {
        fs::create_dir_all(d).map_err(|source| CliError::Read { path: d.clone(), source })?;
    }
    write_atomic(&paths[0], text.as_bytes())?;
    write_atomic(&paths[1], key_text(&locked.key).as_bytes())?;
    write_atomic(&paths[2], manifest_text(&locked.key).as_bytes())?;
    let summary = json!({
        "design": design.top_name,
        "key_width": locked.key.width(),
        "key_port": wiring.modules.iter().any(|(m, _)| *m == wired.top_name).then_some(&a.key_port),
        "candidates": locked.candidates.len(),
        "locked": locked.locked.len(),
        "outputs": paths.iter().map(|p| p.display().to_string()).collect::<Vec<_>>(),
    });
    let _ = writeln!(out, "{summary}");
    Ok(())
}

fn elements(a: &ElementsArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let design = uniquify(&load(&a.design, a.top.as_deref())?);
    let report = ElementsReport::new(&design, &analyze(&design)?);
    let _ = writeln!(out, "{}", serde_json::to_string_pretty(&report).expect("report serializes"));
    Ok(())
}

fn check_inputs(a: &CheckArgs) -> Result<(harness::Pair, SourceUnit, Vec<bool>, Mode), CliError> {
    let orig = load(&a.original, a.top.as_deref())?;
    let locked = load(&a.locked, Some(&orig.top_name))?;
    let key = read_key(&a.key, None)?.bits;
    let pair = harness::Pair::new(&orig, &locked, &a.key_port)?;
    let mode = if a.exhaustive {
        match a.cycles {
            Some(cycles) => Mode::Exhaustive { cycles },
            None => Mode::exhaustive(&pair.orig),
        }
    } else {
        Mode::Random { vectors: a.vectors, cycles: a.cycles.unwrap_or(DEFAULT_CYCLES), seed: a.seed }
    };
    Ok((pair, orig, key, mode))
}

fn verify(a: &CheckArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let (pair, _, key, mode) = check_inputs(a)?;
    let res = harness::check_correctness_with(&pair, &key, mode, harness::Exec::default())?;
    let _ = writeln!(out, "{}", serde_json::to_string(&res).expect("result serializes"));
    match res.counterexample {
        None => Ok(()),
        Some(c) => Err(CliError::Mismatch { cycle: c.cycle, output: c.output, bit: c.bit }),
    }
}

fn key_effect(a: &KeyEffectArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let (pair, orig, key, mode) = check_inputs(&a.check)?;
    let report = harness::key_effect_with(&pair, &orig.top_name, &key, mode, harness::Exec::default())?;
    match a.report {
        ReportFormat::Json => {
            let _ = writeln!(out, "{}", serde_json::to_string(&report).expect("report serializes"));
        }
        ReportFormat::Text => {
            let _ = writeln!(out, "# design {} r={} mode={}", report.design, report.r, report.mode);
            let _ = writeln!(out, "# point = (output bit, sampled cycle) after reset release");
            for b in &report.per_bit {
                let _ = writeln!(out, "bit {:>4}  failing {:>10} / {}", b.bit, b.failing, b.total);
            }
            let _ = writeln!(out, "F = {}", report.f_text());
        }
    }
    let bad = report.violations();
    if mode.is_exhaustive() && !bad.is_empty() {
        return Err(HarnessError::KeyEffectViolation { bits: bad, report: Box::new(report) }.into());
    }
    Ok(())
}

/// Run the CLI on `args` (including the program name); returns the exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = write!(out, "{e}");
                return 0;
            }
            let _ = writeln!(err, "{}", message("Usage", "error", e.to_string().trim()));
            return 2;
        }
    };
    let res = match &cli.command {
        Command::Lock(a) => lock(a, out, err),
        Command::Elements(a) => elements(a, out),
        Command::Verify(a) => verify(a, out),
        Command::KeyEffect(a) => key_effect(a, out),
    };
    match res {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "{}", message(&e.kind(), "error", &e.to_string()));
            1
        }
    }
}
