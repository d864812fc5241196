//! Generate a synthetic capture, key log and ground truth.
//!
//!     cargo run --example synth_capture -- [scenario.toml] [out-dir]
//!
//! Without arguments a small built-in scenario is written to a directory
//! under the system temp dir.

use std::collections::BTreeSet;
use std::path::PathBuf;

use layertrace::capture::CaptureFormat;
use layertrace::synth::{generate, Anomaly, ConnectionSpec, ScenarioSpec};
use layertrace::tls::NamedGroup;

fn builtin() -> ScenarioSpec {
    let groups = [NamedGroup::X25519, NamedGroup::X25519_MLKEM768, NamedGroup::MLKEM1024];
    let mut connections: Vec<ConnectionSpec> = groups
        .iter()
        .enumerate()
        .map(|(i, &group)| {
            let t = i as u64 * 30_000_000;
            let mut c = ConnectionSpec::clean([t, t + 360_000, t + 1_900_000, t + 8_000_000, t + 9_000_000, t + 17_500_000]);
            c.group = group;
            c.segmentation_seed = i as u64;
            c
        })
        .collect();
    let mut lossy = connections[0].clone();
    lossy.boundary_times_ns = lossy.boundary_times_ns.map(|t| t + 100_000_000);
    lossy.anomalies = BTreeSet::from([Anomaly::Retransmit, Anomaly::Reorder]);
    lossy.response_body_bytes = 40 * 1024;
    connections.push(lossy);
    ScenarioSpec { connections }
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let spec = match args.next() {
        Some(path) => ScenarioSpec::load(path)?,
        None => builtin(),
    };
    let out_dir = args
        .next()
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("layertrace-synth"));

    let out = generate(&spec)?;
    out.write_to_dir(&out_dir, CaptureFormat::PcapNano)?;
    println!(
        "{} connections, {} frames, {} key-log lines -> {}",
        spec.connections.len(),
        out.frames.len(),
        out.keylog.len(),
        out_dir.display()
    );
    for (i, c) in out.truth.connections.iter().enumerate() {
        let e2e = c.e2e_ns.map_or("-".to_string(), |ns| format!("{:.3} ms", ns as f64 / 1e6));
        println!("  #{i} {} {:?} e2e {e2e}", c.client_random, c.timeline.validity);
    }
    Ok(())
}
