//! Analysis and comparison documents, and their rendering.

mod render;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::stats::{
    overhead_report, relative_e2e_overhead, ConnectionCounts, CosDenominator, DeltaBasis,
    EffectSize, HandshakeMetadata, LayerSeries, LayerStatistics, OverheadReport, Percentile,
    RunSummary, StatsError,
};
use crate::timeline::Layer;

pub use render::{
    render_analysis, render_comparison, OutputFormat, ANALYSIS_CSV_ROWS, STATISTIC_NAMES,
};

pub const ANALYSIS_SCHEMA_VERSION: u32 = 1;
pub const COMPARISON_SCHEMA_VERSION: u32 = 1;
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

const MS_DECIMALS: usize = 3;
const FACTOR_DECIMALS: usize = 2;
const PERCENT_DECIMALS: usize = 1;

/// Round through decimal formatting so the stored value prints exactly as
/// it is rounded.
pub fn round_to(x: f64, decimals: usize) -> f64 {
    let v: f64 = format!("{x:.decimals$}").parse().expect("formatted float parses");
    if v == 0.0 {
        0.0
    } else {
        v
    }
}

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("documents are incompatible: {0}")]
    Incompatible(String),
    #[error("invalid document: {0}")]
    Parse(#[from] serde_json::Error),
}

/// Statistics of one layer as stored in a document. Every field is
/// optional so that published tables with partial columns can be encoded.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StatsBlock {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub count: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mean: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p50: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p90: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p95: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p99: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sd: Option<f64>,
}

impl StatsBlock {
    pub fn at(&self, p: Percentile) -> Option<f64> {
        match p {
            Percentile::P50 => self.p50,
            Percentile::P90 => self.p90,
            Percentile::P95 => self.p95,
            Percentile::P99 => self.p99,
        }
    }

    pub fn center(&self, basis: DeltaBasis) -> Option<f64> {
        match basis {
            DeltaBasis::P50 => self.p50,
            DeltaBasis::Mean => self.mean,
        }
    }

    /// Statistic by its CSV name.
    pub fn get(&self, name: &str) -> Option<f64> {
        match name {
            "count" => self.count.map(|c| c as f64),
            "mean" => self.mean,
            "p50" => self.p50,
            "p90" => self.p90,
            "p95" => self.p95,
            "p99" => self.p99,
            "min" => self.min,
            "max" => self.max,
            "sd" => self.sd,
            _ => None,
        }
    }

    /// Check the ordering every complete summary satisfies.
    pub fn is_consistent(&self) -> bool {
        let chain: Vec<f64> = [self.min, self.p50, self.p90, self.p95, self.p99, self.max]
            .into_iter()
            .flatten()
            .collect();
        chain.windows(2).all(|w| w[0] <= w[1])
            && self.sd.is_none_or(|s| s >= 0.0)
            && self.count.is_none_or(|c| c >= 1)
    }
}

impl From<&LayerStatistics> for StatsBlock {
    fn from(s: &LayerStatistics) -> Self {
        let ms = |x: f64| Some(round_to(x, MS_DECIMALS));
        StatsBlock {
            count: Some(s.count),
            mean: ms(s.mean),
            p50: ms(s.p50),
            p90: ms(s.p90),
            p95: ms(s.p95),
            p99: ms(s.p99),
            min: ms(s.min),
            max: ms(s.max),
            sd: ms(s.sd),
        }
    }
}

/// Result of `analyze`: one run's statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisDocument {
    pub schema_version: u32,
    #[serde(default)]
    pub tool_version: String,
    /// SHA-256 of each input file, keyed by role (`pcap`, `keylog`).
    #[serde(default)]
    pub inputs: BTreeMap<String, String>,
    pub label: String,
    /// False when no key log was given; only the first two layers exist.
    pub decrypted: bool,
    pub layers: BTreeMap<Layer, StatsBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub e2e: Option<StatsBlock>,
    /// Informational time to the last response byte, from SYN.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ttlb: Option<StatsBlock>,
    #[serde(default)]
    pub counts: ConnectionCounts,
    #[serde(default)]
    pub handshake: HandshakeMetadata,
}

impl AnalysisDocument {
    pub fn from_run(run: &RunSummary, decrypted: bool, inputs: BTreeMap<String, String>) -> Self {
        AnalysisDocument {
            schema_version: ANALYSIS_SCHEMA_VERSION,
            tool_version: TOOL_VERSION.to_string(),
            inputs,
            label: run.label.clone(),
            decrypted,
            layers: run.layers.iter().map(|(l, s)| (*l, s.into())).collect(),
            e2e: run.e2e.as_ref().map(Into::into),
            ttlb: run.ttlb.as_ref().map(Into::into),
            counts: run.counts.clone(),
            handshake: run.handshake.clone(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self, ReportError> {
        Ok(serde_json::from_str(text)?)
    }

    /// Canonical JSON: sorted keys, two-space indentation, trailing newline.
    pub fn to_json(&self) -> String {
        canonical_json(self)
    }

    /// Internal consistency: tallies add up and every block is ordered.
    pub fn check_invariants(&self) -> Result<(), String> {
        if !self.counts.is_consistent() {
            return Err("connection tallies do not sum to total_streams".into());
        }
        for (name, block) in self
            .layers
            .iter()
            .map(|(l, b)| (l.name(), b))
            .chain(self.e2e.iter().map(|b| ("e2e", b)))
            .chain(self.ttlb.iter().map(|b| ("ttlb", b)))
        {
            if !block.is_consistent() {
                return Err(format!("statistics for {name} are out of order"));
            }
        }
        Ok(())
    }
}

pub(crate) fn canonical_json<T: Serialize>(doc: &T) -> String {
    let value = serde_json::to_value(doc).expect("documents serialize");
    let mut s = serde_json::to_string_pretty(&value).expect("values serialize");
    s.push('\n');
    s
}

/// Overhead metrics at one percentile, rounded for presentation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComparisonDocument {
    pub schema_version: u32,
    #[serde(default)]
    pub tool_version: String,
    pub baseline: String,
    pub candidate: String,
    pub percentiles: Vec<Percentile>,
    pub cos_denominator: CosDenominator,
    pub delta_basis: DeltaBasis,
    pub reports: BTreeMap<Percentile, OverheadReport>,
    /// Median end-to-end change, when both runs carry e2e statistics.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub relative_e2e_overhead_percent: Option<f64>,
}

impl ComparisonDocument {
    pub fn from_json(text: &str) -> Result<Self, ReportError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> String {
        canonical_json(self)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CompareOptions {
    pub percentiles: Vec<Percentile>,
    pub cos_denominator: CosDenominator,
    pub delta_basis: DeltaBasis,
}

impl Default for CompareOptions {
    fn default() -> Self {
        CompareOptions {
            percentiles: vec![Percentile::P50, Percentile::P95],
            cos_denominator: CosDenominator::LayerSum,
            delta_basis: DeltaBasis::P50,
        }
    }
}

fn series(
    doc: &AnalysisDocument,
    role: &str,
    p: Percentile,
    basis: DeltaBasis,
) -> Result<LayerSeries, ReportError> {
    let missing = |what: String| ReportError::Incompatible(format!("{role} `{}` lacks {what}", doc.label));
    let mut values = [0.0; 5];
    let mut centers = [0.0; 5];
    let mut sds = [0.0; 5];
    for layer in Layer::ALL {
        let i = layer.index();
        let block = doc.layers.get(&layer).ok_or_else(|| missing(format!("layer {layer}")))?;
        values[i] = block.at(p).ok_or_else(|| missing(format!("{p} for {layer}")))?;
        centers[i] = block.center(basis).ok_or_else(|| missing(format!("{basis} for {layer}")))?;
        sds[i] = block.sd.unwrap_or(f64::NAN);
    }
    Ok(LayerSeries {
        values,
        centers,
        sds,
        e2e: doc.e2e.and_then(|b| b.at(p)),
    })
}

fn stats_to_report(e: StatsError) -> ReportError {
    ReportError::Incompatible(format!("baseline cannot normalize: {e}"))
}

fn round_report(r: OverheadReport) -> OverheadReport {
    OverheadReport {
        overhead_factor: r
            .overhead_factor
            .into_iter()
            .map(|(l, v)| (l, round_to(v, FACTOR_DECIMALS)))
            .collect(),
        of_combined: round_to(r.of_combined, FACTOR_DECIMALS),
        cos_percent: round_to(r.cos_percent, PERCENT_DECIMALS),
        cos_denominator: r.cos_denominator,
        effect_size: r
            .effect_size
            .into_iter()
            .map(|(l, e)| (l, EffectSize::new(round_to(e.delta, FACTOR_DECIMALS))))
            .collect(),
        relative_e2e_overhead_percent: r
            .relative_e2e_overhead_percent
            .map(|v| round_to(v, PERCENT_DECIMALS)),
    }
}

/// Compare a candidate run against a baseline run.
pub fn compare(
    baseline: &AnalysisDocument,
    candidate: &AnalysisDocument,
    opts: &CompareOptions,
) -> Result<ComparisonDocument, ReportError> {
    if opts.percentiles.is_empty() {
        return Err(ReportError::Incompatible("no percentiles requested".into()));
    }
    let mut percentiles = opts.percentiles.clone();
    percentiles.sort();
    percentiles.dedup();
    let mut reports = BTreeMap::new();
    for &p in &percentiles {
        let base = series(baseline, "baseline", p, opts.delta_basis)?;
        let cand = series(candidate, "candidate", p, opts.delta_basis)?;
        if opts.cos_denominator == CosDenominator::E2e && cand.e2e.is_none() {
            return Err(ReportError::Incompatible(format!(
                "candidate `{}` lacks e2e {p} needed for the e2e denominator",
                candidate.label
            )));
        }
        let report = overhead_report(&base, &cand, opts.cos_denominator).map_err(stats_to_report)?;
        reports.insert(p, round_report(report));
    }
    let relative = match (
        candidate.e2e.and_then(|b| b.p50),
        baseline.e2e.and_then(|b| b.p50),
    ) {
        (Some(c), Some(b)) => Some(round_to(
            relative_e2e_overhead(c, b).map_err(stats_to_report)?,
            PERCENT_DECIMALS,
        )),
        _ => None,
    };
    Ok(ComparisonDocument {
        schema_version: COMPARISON_SCHEMA_VERSION,
        tool_version: TOOL_VERSION.to_string(),
        baseline: baseline.label.clone(),
        candidate: candidate.label.clone(),
        percentiles,
        cos_denominator: opts.cos_denominator,
        delta_basis: opts.delta_basis,
        reports,
        relative_e2e_overhead_percent: relative,
    })
}
