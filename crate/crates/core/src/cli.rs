//! Command-line front end.
//!
//! Exit codes: 0 success, 1 output could not be written, 2 input unreadable
//! or invalid, 3 no usable connections, 4 internal invariant violated,
//! 5 incompatible documents.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use log::info;
use sha2::{Digest, Sha256};

use crate::analysis::analyze_frames;
use crate::capture::{parse_capture, parse_keylog, CaptureFormat};
use crate::report::{
    compare, render_analysis, render_comparison, AnalysisDocument, CompareOptions, OutputFormat,
    ReportError,
};
use crate::stats::{CosDenominator, DeltaBasis, Percentile, RunSummary};
use crate::synth::{capture_file_name, generate, ScenarioSpec, SynthError};

pub const EXIT_OK: i32 = 0;
pub const EXIT_WRITE_FAILED: i32 = 1;
pub const EXIT_UNREADABLE: i32 = 2;
pub const EXIT_NO_CONNECTIONS: i32 = 3;
pub const EXIT_INVARIANT: i32 = 4;
pub const EXIT_INCOMPATIBLE: i32 = 5;

#[derive(Debug, Parser)]
#[command(name = "layertrace", version, about = "Per-layer HTTPS latency decomposition from packet captures")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Analyze a capture (and key log) into an analysis document.
    Analyze(AnalyzeArgs),
    /// Compare a candidate analysis document against a baseline.
    Compare(CompareArgs),
    /// Generate a synthetic capture, key log and ground truth from a scenario.
    Synth(SynthArgs),
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    #[arg(long)]
    pub pcap: PathBuf,
    /// NSS key log. Without it only the TCP handshake and TCP-to-TLS layers
    /// are measured.
    #[arg(long)]
    pub keylog: Option<PathBuf>,
    /// Run label; defaults to the capture file stem.
    #[arg(long)]
    pub label: Option<String>,
    /// Output file; the document goes to stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, default_value_t = default_workers())]
    pub workers: usize,
    #[arg(long, default_value = "json")]
    pub format: OutputFormat,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[arg(long)]
    pub baseline: PathBuf,
    #[arg(long)]
    pub candidate: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "p50,p95")]
    pub percentiles: Vec<Percentile>,
    #[arg(long, default_value = "layersum")]
    pub cos_denominator: CosDenominator,
    #[arg(long, default_value = "p50")]
    pub delta_basis: DeltaBasis,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, default_value = "json")]
    pub format: OutputFormat,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Scenario file (TOML).
    #[arg(long)]
    pub spec: PathBuf,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value = "pcap-ns")]
    pub capture_format: CaptureFormat,
}

fn default_workers() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

/// A failed command: message and exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

fn fail(code: i32, message: impl Into<String>) -> Failure {
    Failure {
        code,
        message: message.into(),
    }
}

fn read_input(path: &Path) -> Result<Vec<u8>, Failure> {
    fs::read(path).map_err(|e| fail(EXIT_UNREADABLE, format!("cannot read {}: {e}", path.display())))
}

fn write_output(path: &Path, text: &str) -> Result<(), Failure> {
    fs::write(path, text)
        .map_err(|e| fail(EXIT_WRITE_FAILED, format!("cannot write {}: {e}", path.display())))
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Run a parsed command line, returning the process exit code.
pub fn run(cli: Cli) -> i32 {
    let result = match cli.command {
        Command::Analyze(a) => cmd_analyze(&a),
        Command::Compare(c) => cmd_compare(&c),
        Command::Synth(s) => cmd_synth(&s),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(f) => {
            eprintln!("layertrace: {}", f.message);
            f.code
        }
    }
}

pub fn cmd_analyze(args: &AnalyzeArgs) -> Result<(), Failure> {
    let pcap_bytes = read_input(&args.pcap)?;
    let capture = parse_capture(&pcap_bytes)
        .map_err(|e| fail(EXIT_UNREADABLE, format!("{}: {e}", args.pcap.display())))?;
    let mut inputs = BTreeMap::from([("pcap".to_string(), sha256_hex(&pcap_bytes))]);
    let keylog = match &args.keylog {
        Some(path) => {
            let bytes = read_input(path)?;
            inputs.insert("keylog".to_string(), sha256_hex(&bytes));
            let text = String::from_utf8_lossy(&bytes);
            Some(parse_keylog(&text))
        }
        None => None,
    };
    info!("{} frames read", capture.frames.len());

    let analysis = analyze_frames(&capture.frames, keylog.as_ref(), args.workers);
    let label = args.label.clone().unwrap_or_else(|| {
        args.pcap
            .file_stem()
            .map_or_else(|| "run".to_string(), |s| s.to_string_lossy().into_owned())
    });
    let run = RunSummary::from_timelines(label, &analysis.timelines);
    let doc = AnalysisDocument::from_run(&run, analysis.decrypted, inputs);
    doc.check_invariants().map_err(|m| fail(EXIT_INVARIANT, m))?;

    let rendered = render_analysis(&doc, args.format);
    match &args.out {
        Some(path) => {
            write_output(path, &rendered)?;
            print!("{}", render_analysis(&doc, OutputFormat::Table));
        }
        None => print!("{rendered}"),
    }

    let usable = if analysis.decrypted {
        run.counts.valid
    } else {
        run.layers.get(&crate::timeline::Layer::TcpToTls).map_or(0, |s| s.count)
    };
    if usable == 0 {
        return Err(fail(EXIT_NO_CONNECTIONS, "no usable connections in capture"));
    }
    Ok(())
}

fn load_document(path: &Path) -> Result<AnalysisDocument, Failure> {
    let bytes = read_input(path)?;
    let text = String::from_utf8(bytes)
        .map_err(|_| fail(EXIT_UNREADABLE, format!("{} is not UTF-8", path.display())))?;
    AnalysisDocument::from_json(&text)
        .map_err(|e| fail(EXIT_UNREADABLE, format!("{}: {e}", path.display())))
}

pub fn cmd_compare(args: &CompareArgs) -> Result<(), Failure> {
    let baseline = load_document(&args.baseline)?;
    let candidate = load_document(&args.candidate)?;
    let opts = CompareOptions {
        percentiles: args.percentiles.clone(),
        cos_denominator: args.cos_denominator,
        delta_basis: args.delta_basis,
    };
    let doc = compare(&baseline, &candidate, &opts).map_err(|e| match e {
        ReportError::Incompatible(_) => fail(EXIT_INCOMPATIBLE, e.to_string()),
        ReportError::Parse(_) => fail(EXIT_UNREADABLE, e.to_string()),
    })?;
    let rendered = render_comparison(&doc, args.format);
    match &args.out {
        Some(path) => {
            write_output(path, &rendered)?;
            print!("{}", render_comparison(&doc, OutputFormat::Table));
        }
        None => print!("{rendered}"),
    }
    Ok(())
}

pub fn cmd_synth(args: &SynthArgs) -> Result<(), Failure> {
    let text = String::from_utf8(read_input(&args.spec)?)
        .map_err(|_| fail(EXIT_UNREADABLE, format!("{} is not UTF-8", args.spec.display())))?;
    let spec = ScenarioSpec::from_toml(&text)
        .map_err(|e| fail(EXIT_UNREADABLE, format!("{}: {e}", args.spec.display())))?;
    let out = generate(&spec).map_err(|e| fail(EXIT_UNREADABLE, e.to_string()))?;
    out.write_to_dir(&args.out, args.capture_format).map_err(|e| match e {
        SynthError::Capture(_) | SynthError::Write(_) => fail(EXIT_WRITE_FAILED, e.to_string()),
        other => fail(EXIT_UNREADABLE, other.to_string()),
    })?;
    println!(
        "{} connections, {} frames -> {}",
        spec.connections.len(),
        out.frames.len(),
        args.out.join(capture_file_name(args.capture_format)).display()
    );
    Ok(())
}
