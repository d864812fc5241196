use std::fmt::Write as _;
use std::str::FromStr;

use super::{AnalysisDocument, ComparisonDocument, StatsBlock};
use crate::timeline::Layer;

pub const STATISTIC_NAMES: [&str; 9] = ["count", "mean", "p50", "p90", "p95", "p99", "min", "max", "sd"];
/// Five layers plus e2e, nine statistics each.
pub const ANALYSIS_CSV_ROWS: usize = 6 * STATISTIC_NAMES.len();

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OutputFormat {
    #[default]
    Json,
    Csv,
    Table,
}

impl FromStr for OutputFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "json" => Ok(OutputFormat::Json),
            "csv" => Ok(OutputFormat::Csv),
            "table" => Ok(OutputFormat::Table),
            _ => Err(format!("unknown format `{s}` (expected json, csv or table)")),
        }
    }
}

fn cell(v: Option<f64>, decimals: usize) -> String {
    v.map_or_else(|| "-".to_string(), |x| format!("{x:.decimals$}"))
}

fn csv_value(name: &str, v: Option<f64>) -> String {
    match (name, v) {
        (_, None) => String::new(),
        ("count", Some(x)) => format!("{x}"),
        (_, Some(x)) => format!("{x:.3}"),
    }
}

/// Left-align the first column and right-align the rest.
fn align(rows: &[Vec<String>]) -> String {
    let cols = rows.iter().map(Vec::len).max().unwrap_or(0);
    let widths: Vec<usize> = (0..cols)
        .map(|c| rows.iter().filter_map(|r| r.get(c)).map(|s| s.chars().count()).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    for row in rows {
        let mut line = String::new();
        for (c, s) in row.iter().enumerate() {
            if c == 0 {
                let _ = write!(line, "{s:<w$}", w = widths[0]);
            } else {
                let _ = write!(line, "  {s:>w$}", w = widths[c]);
            }
        }
        out.push_str(line.trim_end());
        out.push('\n');
    }
    out
}

fn analysis_rows(doc: &AnalysisDocument) -> Vec<(String, Option<StatsBlock>)> {
    let mut rows: Vec<(String, Option<StatsBlock>)> = Layer::ALL
        .iter()
        .map(|l| (l.name().to_string(), doc.layers.get(l).copied()))
        .collect();
    rows.push(("e2e".to_string(), doc.e2e));
    rows
}

pub fn render_analysis(doc: &AnalysisDocument, format: OutputFormat) -> String {
    match format {
        OutputFormat::Json => doc.to_json(),
        OutputFormat::Csv => {
            let mut out = String::from("layer,statistic,value\n");
            for (name, block) in analysis_rows(doc) {
                for stat in STATISTIC_NAMES {
                    let v = block.and_then(|b| b.get(stat));
                    let _ = writeln!(out, "{name},{stat},{}", csv_value(stat, v));
                }
            }
            out
        }
        OutputFormat::Table => {
            let mut rows = vec![["layer", "n", "mean", "p50", "p90", "p95", "p99", "min", "max", "sd"]
                .map(String::from)
                .to_vec()];
            let title = |name: &str| {
                Layer::ALL
                    .iter()
                    .find(|l| l.name() == name)
                    .map_or("End-to-end", |l| l.title())
                    .to_string()
            };
            for (name, block) in analysis_rows(doc) {
                let mut row = vec![title(&name)];
                match block {
                    Some(b) => {
                        row.push(b.count.map_or("-".into(), |c| c.to_string()));
                        for stat in &STATISTIC_NAMES[1..] {
                            row.push(cell(b.get(stat), 3));
                        }
                    }
                    None => row.extend(std::iter::repeat_n("-".to_string(), 9)),
                }
                rows.push(row);
            }
            let c = &doc.counts;
            let mut out = format!(
                "{} ({}), latencies in ms\n",
                doc.label,
                if doc.decrypted { "decrypted" } else { "no-decrypt" }
            );
            out.push_str(&align(&rows));
            let _ = writeln!(
                out,
                "connections: {} total, {} valid, {} partial, {} excluded",
                c.total_streams,
                c.valid,
                c.partial(),
                c.excluded()
            );
            for (r, n) in &c.partial_by_reason {
                let _ = writeln!(out, "  partial {}: {n}", serde_json::to_value(r).unwrap().as_str().unwrap());
            }
            for (r, n) in &c.excluded_by_reason {
                let _ = writeln!(out, "  excluded {}: {n}", serde_json::to_value(r).unwrap().as_str().unwrap());
            }
            let h = &doc.handshake;
            if let Some(g) = h.group {
                let _ = writeln!(
                    out,
                    "handshake: group {g}, key_share {} B, ClientHello {} B, ServerHello {} B{}",
                    h.key_share_len.map_or("-".into(), |v| v.to_string()),
                    h.client_hello_len.map_or("-".into(), |v| v.to_string()),
                    h.server_hello_len.map_or("-".into(), |v| v.to_string()),
                    h.cipher_suite.map_or(String::new(), |s| format!(", {}", s.name())),
                );
            }
            out
        }
    }
}

pub fn render_comparison(doc: &ComparisonDocument, format: OutputFormat) -> String {
    match format {
        OutputFormat::Json => doc.to_json(),
        OutputFormat::Csv => {
            let mut out = String::from("percentile,metric,layer,value\n");
            for (p, r) in &doc.reports {
                for (l, v) in &r.overhead_factor {
                    let _ = writeln!(out, "{p},overhead_factor,{l},{v:.2}");
                }
                let _ = writeln!(out, "{p},of_combined,,{:.2}", r.of_combined);
                let _ = writeln!(out, "{p},cos_percent,,{:.1}", r.cos_percent);
                for (l, e) in &r.effect_size {
                    let _ = writeln!(out, "{p},glass_delta,{l},{:.2}", e.delta);
                }
                if let Some(v) = r.relative_e2e_overhead_percent {
                    let _ = writeln!(out, "{p},relative_e2e_overhead_percent,,{v:.1}");
                }
            }
            out
        }
        OutputFormat::Table => {
            let mut out = format!(
                "{} vs {} (COS denominator: {}, delta basis: {})\n",
                doc.candidate, doc.baseline, doc.cos_denominator, doc.delta_basis
            );
            let mut rows = vec![["percentile", "OF TCP-to-TLS", "OF TLS", "OF Combined", "COS (%)"]
                .map(String::from)
                .to_vec()];
            for (p, r) in &doc.reports {
                rows.push(vec![
                    p.to_string(),
                    format!("{:.2}", r.overhead_factor[&Layer::TcpToTls]),
                    format!("{:.2}", r.overhead_factor[&Layer::TlsHandshake]),
                    format!("{:.2}", r.of_combined),
                    format!("{:.1}", r.cos_percent),
                ]);
            }
            out.push_str(&align(&rows));
            if let Some(r) = doc.reports.values().next() {
                let mut rows = vec![vec!["layer".to_string(), "OF".into(), "Glass's delta".into(), "effect".into()]];
                for l in Layer::ALL {
                    let e = r.effect_size.get(&l);
                    rows.push(vec![
                        l.title().to_string(),
                        format!("{:.2}", r.overhead_factor[&l]),
                        e.map_or("-".into(), |e| format!("{:.2}", e.delta)),
                        e.map_or("-".into(), |e| e.classification.name().to_string()),
                    ]);
                }
                let _ = writeln!(out, "\nper layer at {}:", doc.reports.keys().next().unwrap());
                out.push_str(&align(&rows));
            }
            if let Some(v) = doc.relative_e2e_overhead_percent {
                let _ = writeln!(out, "median end-to-end change: {v:+.1}%");
            }
            out
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::report::{compare, CompareOptions};
    use crate::stats::{ConnectionCounts, HandshakeMetadata};
    use std::collections::BTreeMap;

    fn sample() -> AnalysisDocument {
        let b = StatsBlock {
            count: Some(3),
            mean: Some(1.0),
            p50: Some(1.0),
            p90: Some(1.5),
            p95: Some(1.75),
            p99: Some(1.95),
            min: Some(0.5),
            max: Some(2.0),
            sd: Some(0.5),
        };
        AnalysisDocument {
            schema_version: 1,
            tool_version: "t".into(),
            inputs: BTreeMap::new(),
            label: "run".into(),
            decrypted: true,
            layers: Layer::ALL.iter().map(|l| (*l, b)).collect(),
            e2e: Some(b),
            ttlb: None,
            counts: ConnectionCounts {
                total_streams: 3,
                valid: 3,
                ..Default::default()
            },
            handshake: HandshakeMetadata::default(),
        }
    }

    #[test]
    fn csv_has_one_row_per_statistic() {
        let csv = render_analysis(&sample(), OutputFormat::Csv);
        assert_eq!(csv.lines().count(), 1 + ANALYSIS_CSV_ROWS);
        assert!(csv.contains("tcp_to_tls,p95,1.750\n"));
        assert!(csv.contains("e2e,count,3\n"));
        let mut partial = sample();
        partial.layers.remove(&Layer::AppResponse);
        partial.e2e = None;
        let csv = render_analysis(&partial, OutputFormat::Csv);
        assert_eq!(csv.lines().count(), 1 + ANALYSIS_CSV_ROWS);
        assert!(csv.contains("app_response,p50,\n"));
    }

    #[test]
    fn tables_render() {
        let t = render_analysis(&sample(), OutputFormat::Table);
        assert!(t.contains("TCP-to-TLS"));
        assert!(t.contains("3 valid"));
        let c = compare(&sample(), &sample(), &CompareOptions::default()).unwrap();
        let t = render_comparison(&c, OutputFormat::Table);
        assert!(t.contains("1.00"));
        assert!(t.contains("0.0"));
        let csv = render_comparison(&c, OutputFormat::Csv);
        assert!(csv.contains("p50,of_combined,,1.00"));
    }
}
