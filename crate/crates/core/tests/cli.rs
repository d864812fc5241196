use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use layertrace::capture::CaptureFormat;
use layertrace::report::AnalysisDocument;
use layertrace::synth::{generate, ConnectionSpec, ScenarioSpec};
use layertrace::tls::NamedGroup;

fn layertrace(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_layertrace"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures/published_runs")
        .join(format!("{name}.json"))
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Boundaries on even microseconds, so the microsecond capture loses nothing.
fn scenario() -> ScenarioSpec {
    let connections = (0..6u64)
        .map(|i| {
            let t = 1_000_000 + i * 40_000_000;
            let mut c = ConnectionSpec::clean([t, t + 360_000, t + 1_866_000, t + 7_746_000, t + 8_736_000, t + 17_900_000]);
            c.group = NamedGroup::KNOWN[i as usize];
            c.segmentation_seed = i * 7;
            c
        })
        .collect();
    ScenarioSpec { connections }
}

#[test]
fn synth_then_analyze() {
    let dir = tempfile::tempdir().unwrap();
    let spec_path = dir.path().join("scenario.toml");
    std::fs::write(&spec_path, scenario().to_toml()).unwrap();
    let out_dir = dir.path().join("synth");
    let synth = layertrace(&["synth", "--spec", s(&spec_path), "--out", s(&out_dir)]);
    assert_eq!(code(&synth), 0, "{}", String::from_utf8_lossy(&synth.stderr));

    let analyze = layertrace(&[
        "analyze",
        "--pcap",
        s(&out_dir.join("capture.pcap")),
        "--keylog",
        s(&out_dir.join("keylog.txt")),
    ]);
    assert_eq!(code(&analyze), 0);
    let doc = AnalysisDocument::from_json(&String::from_utf8(analyze.stdout).unwrap()).unwrap();
    assert_eq!(doc.counts.valid, 6);
    assert_eq!(doc.label, "capture");
    assert!(doc.inputs.contains_key("keylog"));

    let csv = layertrace(&["analyze", "--pcap", s(&out_dir.join("capture.pcap")), "--format", "csv"]);
    assert_eq!(code(&csv), 0);
    let text = String::from_utf8(csv.stdout).unwrap();
    assert!(text.starts_with("layer,statistic,value\n"));
}

#[test]
fn microsecond_and_nanosecond_captures_agree() {
    let dir = tempfile::tempdir().unwrap();
    let out = generate(&scenario()).unwrap();
    let mut docs = Vec::new();
    for (name, format) in [("us", CaptureFormat::PcapMicro), ("ns", CaptureFormat::PcapNano), ("ng", CaptureFormat::PcapNg)] {
        let sub = dir.path().join(name);
        out.write_to_dir(&sub, format).unwrap();
        let capture = sub.join(layertrace::synth::capture_file_name(format));
        let r = layertrace(&[
            "analyze",
            "--label",
            "same",
            "--pcap",
            s(&capture),
            "--keylog",
            s(&sub.join("keylog.txt")),
        ]);
        assert_eq!(code(&r), 0);
        let mut doc = AnalysisDocument::from_json(&String::from_utf8(r.stdout).unwrap()).unwrap();
        doc.inputs.clear();
        docs.push(doc);
    }
    assert_eq!(docs[0], docs[1]);
    assert_eq!(docs[1], docs[2]);
}

#[test]
fn unreadable_input_exits_2() {
    let r = layertrace(&["analyze", "--pcap", "/nonexistent/capture.pcap"]);
    assert_eq!(code(&r), 2);
    let r = layertrace(&["compare", "--baseline", "/nonexistent.json", "--candidate", s(&fixture("mlkem512_4kb"))]);
    assert_eq!(code(&r), 2);

    let dir = tempfile::tempdir().unwrap();
    let junk = dir.path().join("junk.pcap");
    std::fs::write(&junk, b"not a capture at all").unwrap();
    assert_eq!(code(&layertrace(&["analyze", "--pcap", s(&junk)])), 2);
}

#[test]
fn empty_capture_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    generate(&ScenarioSpec::default())
        .unwrap()
        .write_to_dir(dir.path(), CaptureFormat::PcapNano)
        .unwrap();
    let r = layertrace(&["analyze", "--pcap", s(&dir.path().join("capture.pcap"))]);
    assert_eq!(code(&r), 3);
}

#[test]
fn unwritable_output_exits_1() {
    let r = layertrace(&[
        "compare",
        "--baseline",
        s(&fixture("x25519_4kb")),
        "--candidate",
        s(&fixture("mlkem512_4kb")),
        "--out",
        "/nonexistent/dir/out.json",
    ]);
    assert_eq!(code(&r), 1);
}

#[test]
fn missing_percentile_exits_5() {
    let dir = tempfile::tempdir().unwrap();
    let mut doc: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(fixture("mlkem512_4kb")).unwrap()).unwrap();
    doc["layers"]["tls_handshake"]
        .as_object_mut()
        .unwrap()
        .remove("p95");
    let path = dir.path().join("thin.json");
    std::fs::write(&path, doc.to_string()).unwrap();
    let base = fixture("x25519_4kb");
    let args = ["compare", "--baseline", s(&base), "--candidate", s(&path)];
    assert_eq!(code(&layertrace(&args)), 5);

    let mut p50_only = args.to_vec();
    p50_only.extend(["--percentiles", "p50"]);
    assert_eq!(code(&layertrace(&p50_only)), 0);
}

#[test]
fn compare_formats() {
    let base = fixture("x25519_4kb");
    let cand = fixture("x25519_mlkem768_4kb");
    let csv = layertrace(&["compare", "--baseline", s(&base), "--candidate", s(&cand), "--format", "csv"]);
    assert_eq!(code(&csv), 0);
    let text = String::from_utf8(csv.stdout).unwrap();
    assert!(text.lines().next().unwrap().contains("percentile"));

    let table = layertrace(&["compare", "--baseline", s(&base), "--candidate", s(&cand), "--format", "table"]);
    let text = String::from_utf8(table.stdout).unwrap();
    assert!(text.contains("14.1"), "{text}");

    let e2e = layertrace(&[
        "compare",
        "--baseline",
        s(&base),
        "--candidate",
        s(&cand),
        "--cos-denominator",
        "e2e",
        "--percentiles",
        "p50",
    ]);
    assert_eq!(code(&e2e), 0);
    let doc: serde_json::Value = serde_json::from_slice(&e2e.stdout).unwrap();
    assert_eq!(doc["cos_denominator"], "e2e");
    // 1.903 - 0.294 + 6.495 - 5.547 over the 19.63 ms e2e median.
    assert_eq!(doc["reports"]["p50"]["cos_percent"], 13.0);
}
