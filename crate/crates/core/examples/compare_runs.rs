//! Compare analysis documents against a baseline.
//!
//!     cargo run --example compare_runs -- baseline.json candidate.json...
//!
//! Without arguments the bundled published-run documents are compared
//! against x25519 at p50 and p95.

use std::path::PathBuf;

use layertrace::report::{compare, render_comparison, AnalysisDocument, CompareOptions, OutputFormat};

fn load(path: &PathBuf) -> Result<AnalysisDocument, Box<dyn std::error::Error>> {
    Ok(AnalysisDocument::from_json(&std::fs::read_to_string(path)?)?)
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut paths: Vec<PathBuf> = std::env::args().skip(1).map(PathBuf::from).collect();
    if paths.is_empty() {
        let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/published_runs");
        paths = ["x25519_4kb", "x25519_mlkem512_4kb", "x25519_mlkem768_4kb", "mlkem512_4kb", "mlkem1024_4kb"]
            .iter()
            .map(|n| dir.join(format!("{n}.json")))
            .collect();
    }
    let baseline = load(&paths[0])?;
    for path in &paths[1..] {
        let candidate = load(path)?;
        let doc = compare(&baseline, &candidate, &CompareOptions::default())?;
        println!("{}", render_comparison(&doc, OutputFormat::Table));
    }
    Ok(())
}
