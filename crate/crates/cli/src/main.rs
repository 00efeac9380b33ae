//! `mcp`: experiment runner and codec tool for minimum complexity pursuit.
//!
//! Exit codes: 0 when every checked criterion passes, 1 when one fails,
//! 2 on usage, configuration or input errors.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use mcp_core::codecs::{decode, encode_with, stream_header, CodecId, CodecRegistry, CodedSignal};
use mcp_core::harness::{
    manifest_path, run_corollary_check, run_lemma_suite, run_mismatch_scan, run_phase_scan, to_csv, Criterion,
    ExperimentConfig, Report, RunManifest,
};
use mcp_core::signals::{read_signal_csv, write_signal_csv};
use mcp_core::{quantize_vector, BitString, McpError};
use serde::Serialize;

#[derive(Parser)]
#[command(name = "mcp", version, about = "Minimum complexity pursuit experiments and codecs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Success frequency over a grid of measurement counts.
    Scan(RunArgs),
    /// Finite-n failure rate of the sparse-class error bound.
    Corollary(RunArgs),
    /// Monte-Carlo checks of the chi-square and singular-value tail bounds.
    Lemmas(RunArgs),
    /// Recovery of near-structured signals with the tolerant program.
    Mismatch(RunArgs),
    /// Quantizes a one-column CSV signal and writes its shortest codeword.
    Encode(EncodeArgs),
    /// Decodes a codeword back to a one-column CSV signal.
    Decode(DecodeArgs),
}

#[derive(Args)]
struct RunArgs {
    /// `key = value` configuration file.
    #[arg(short, long)]
    config: Option<PathBuf>,
    /// Override a configuration key; repeatable.
    #[arg(short = 's', long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trials: Option<u64>,
    #[arg(long)]
    workers: Option<usize>,
    /// CSV output path; the manifest goes next to it with a `.json` extension.
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct EncodeArgs {
    /// One value per line, each in [0, 1].
    #[arg(short, long)]
    input: PathBuf,
    /// Bits per entry.
    #[arg(short, long)]
    m: u32,
    /// Force one codec instead of the shortest.
    #[arg(long)]
    codec: Option<String>,
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Args)]
struct DecodeArgs {
    #[arg(short, long)]
    input: PathBuf,
    /// Bits per entry used at encoding time.
    #[arg(short, long)]
    m: u32,
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Debug)]
enum Failure {
    /// Usage, configuration or input problem.
    Usage(String),
    /// Ran to completion but a checked criterion failed.
    Criteria,
}

impl From<McpError> for Failure {
    fn from(e: McpError) -> Self {
        Failure::Usage(e.to_string())
    }
}

fn load_config(args: &RunArgs) -> Result<ExperimentConfig, Failure> {
    let mut cfg = match &args.config {
        Some(path) => ExperimentConfig::from_file(path)?,
        None => ExperimentConfig::default(),
    };
    cfg.apply_overrides(args.overrides.iter().map(String::as_str))?;
    if let Some(v) = args.seed {
        cfg.seed = v;
    }
    if let Some(v) = args.trials {
        cfg.trials = v;
    }
    if let Some(v) = args.workers {
        cfg.workers = Some(v);
    }
    if let Some(v) = &args.output {
        cfg.output = v.clone();
    }
    Ok(cfg)
}

fn finish<R: Serialize, S: Serialize>(
    command: &str,
    cfg: &ExperimentConfig,
    report: Report<R, S>,
) -> Result<(), Failure> {
    let csv = to_csv(&report.records)?;
    let mut manifest = RunManifest::new(command, cfg, &report.summary, report.criteria)?;
    manifest.write_output(&cfg.output, &csv)?;
    let json = manifest_path(&cfg.output);
    manifest.write(&json)?;
    print_criteria(&manifest.criteria);
    println!("wrote {} ({} records) and {}", cfg.output.display(), report.records.len(), json.display());
    if manifest.passed {
        Ok(())
    } else {
        Err(Failure::Criteria)
    }
}

fn print_criteria(criteria: &[Criterion]) {
    for c in criteria {
        println!("{} {}: {}", if c.pass { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
}

fn encode_cmd(args: &EncodeArgs) -> Result<(), Failure> {
    let file = File::open(&args.input).map_err(|e| Failure::Usage(format!("{}: {e}", args.input.display())))?;
    let x = read_signal_csv(BufReader::new(file))?;
    let q = quantize_vector(&x, args.m)?;
    let coded = match &args.codec {
        Some(name) => encode_with(name.parse::<CodecId>()?, &q)?,
        None => CodecRegistry::default().best(&q)?,
    };
    write_bytes(&args.output, &coded.payload.to_padded_bytes())?;
    println!("codec={} n={} m={} dl_bits={}", coded.codec, q.len(), args.m, coded.dl_bits());
    Ok(())
}

fn decode_cmd(args: &DecodeArgs) -> Result<(), Failure> {
    let bytes = fs::read(&args.input).map_err(|e| Failure::Usage(format!("{}: {e}", args.input.display())))?;
    let payload = BitString::from_padded_bytes(&bytes)?;
    let (_, n) = stream_header(&payload)?;
    let coded = CodedSignal::from_stream(payload)?;
    let x = decode(&coded, n, args.m)?;
    let out = File::create(&args.output).map_err(|e| Failure::Usage(format!("{}: {e}", args.output.display())))?;
    write_signal_csv(BufWriter::new(out), &x.to_f64())?;
    println!("codec={} n={n} m={} dl_bits={}", coded.codec, args.m, coded.dl_bits());
    Ok(())
}

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<(), Failure> {
    fs::write(path, bytes).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Scan(a) => {
            let cfg = load_config(&a)?;
            finish("scan", &cfg, run_phase_scan(&cfg)?)
        }
        Command::Corollary(a) => {
            let cfg = load_config(&a)?;
            finish("corollary", &cfg, run_corollary_check(&cfg)?)
        }
        Command::Lemmas(a) => {
            let cfg = load_config(&a)?;
            finish("lemmas", &cfg, run_lemma_suite(&cfg)?)
        }
        Command::Mismatch(a) => {
            let cfg = load_config(&a)?;
            finish("mismatch", &cfg, run_mismatch_scan(&cfg)?)
        }
        Command::Encode(a) => encode_cmd(&a),
        Command::Decode(a) => decode_cmd(&a),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Criteria) => ExitCode::from(1),
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
