//! Analyze a capture into per-layer statistics.
//!
//!     cargo run --example analyze_capture -- capture.pcap [keylog.txt]
//!
//! With no arguments a synthetic capture is generated in memory first.

use std::path::Path;

use layertrace::analysis::{analyze_capture, analyze_frames, Analysis};
use layertrace::report::{render_analysis, AnalysisDocument, OutputFormat};
use layertrace::synth::{generate, ConnectionSpec, ScenarioSpec};
use layertrace::tls::NamedGroup;

fn synthetic() -> Analysis {
    let connections = (0..40u64)
        .map(|i| {
            let t = i * 25_000_000;
            let jitter = (i * 7919) % 600_000;
            let mut c = ConnectionSpec::clean([
                t,
                t + 350_000 + jitter / 4,
                t + 2_000_000 + jitter,
                t + 8_200_000 + 2 * jitter,
                t + 9_100_000 + 2 * jitter,
                t + 18_000_000 + 3 * jitter,
            ]);
            c.group = NamedGroup::X25519_MLKEM768;
            c.segmentation_seed = i;
            c
        })
        .collect();
    let out = generate(&ScenarioSpec { connections }).expect("built-in scenario is valid");
    analyze_frames(&out.frames, Some(&out.keylog), 4)
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let (label, analysis) = match args.as_slice() {
        [] => ("synthetic".to_string(), synthetic()),
        [pcap, rest @ ..] => {
            let keylog = rest.first().map(Path::new);
            (pcap.clone(), analyze_capture(pcap, keylog, 4)?)
        }
    };
    println!(
        "{} connections, {} undecodable frames, decrypted: {}",
        analysis.connections.len(),
        analysis.decode_errors,
        analysis.decrypted
    );
    let run = analysis.summarize(&label);
    let doc = AnalysisDocument::from_run(&run, analysis.decrypted, Default::default());
    print!("{}", render_analysis(&doc, OutputFormat::Table));
    Ok(())
}
