use std::path::Path;

use serde_json::Value;

use layertrace::analysis::analyze_frames;
use layertrace::report::{compare, AnalysisDocument, CompareOptions};
use layertrace::stats::{CosDenominator, DeltaBasis, Percentile};
use layertrace::synth::{generate, Anomaly, ConnectionSpec, ScenarioSpec};

fn validator(name: &str) -> jsonschema::Validator {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("schemas").join(name);
    let schema: Value = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
    jsonschema::validator_for(&schema).expect("schema compiles")
}

fn assert_valid(v: &jsonschema::Validator, json: &str, what: &str) {
    let instance: Value = serde_json::from_str(json).unwrap();
    let errors: Vec<String> = v.iter_errors(&instance).map(|e| format!("{e} at {}", e.instance_path())).collect();
    assert!(errors.is_empty(), "{what}: {errors:?}");
}

fn fixture(name: &str) -> AnalysisDocument {
    let path = Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures/published_runs")
        .join(format!("{name}.json"));
    AnalysisDocument::from_json(&std::fs::read_to_string(path).unwrap()).unwrap()
}

const FIXTURES: [&str; 7] = [
    "x25519_4kb",
    "x25519_mlkem512_4kb",
    "x25519_mlkem768_4kb",
    "mlkem512_4kb",
    "mlkem1024_4kb",
    "x25519_40kb",
    "x25519_mlkem768_40kb",
];

fn degraded_run(keylog: bool) -> AnalysisDocument {
    let plan = [vec![], vec![Anomaly::DropKeylog], vec![Anomaly::Truncate], vec![Anomaly::Non200]];
    let connections = plan
        .iter()
        .enumerate()
        .map(|(i, a)| {
            let t = i as u64 * 30_000_000;
            let mut c = ConnectionSpec::clean([t, t + 300_000, t + 1_800_000, t + 7_000_000, t + 8_000_000, t + 16_000_000]);
            c.anomalies = a.iter().copied().collect();
            c
        })
        .collect();
    let out = generate(&ScenarioSpec { connections }).unwrap();
    let analysis = analyze_frames(&out.frames, keylog.then_some(&out.keylog), 1);
    let mut inputs = std::collections::BTreeMap::new();
    inputs.insert("pcap".to_string(), "0".repeat(64));
    AnalysisDocument::from_run(&analysis.summarize("degraded"), analysis.decrypted, inputs)
}

#[test]
fn analysis_documents_match_schema() {
    let v = validator("analysis-document.v1.json");
    for name in FIXTURES {
        assert_valid(&v, &fixture(name).to_json(), name);
    }
    let with_keys = degraded_run(true);
    assert!(!with_keys.counts.partial_by_reason.is_empty());
    assert!(!with_keys.counts.excluded_by_reason.is_empty());
    assert_valid(&v, &with_keys.to_json(), "degraded");
    assert_valid(&v, &degraded_run(false).to_json(), "no key log");

    let mut bad: Value = serde_json::from_str(&fixture("x25519_4kb").to_json()).unwrap();
    bad["layers"]["tls_handshake"]["p42"] = Value::from(1.0);
    assert!(!v.is_valid(&bad));
}

#[test]
fn comparison_documents_match_schema() {
    let v = validator("comparison-document.v1.json");
    let base = fixture("x25519_4kb");
    for name in &FIXTURES[1..] {
        let cand = fixture(name);
        for cos_denominator in [CosDenominator::LayerSum, CosDenominator::E2e] {
            let opts = CompareOptions {
                percentiles: vec![Percentile::P50, Percentile::P95, Percentile::P99],
                cos_denominator,
                delta_basis: DeltaBasis::P50,
            };
            let doc = compare(&base, &cand, &opts).unwrap();
            assert_valid(&v, &doc.to_json(), name);
        }
    }
}
