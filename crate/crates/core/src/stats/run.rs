use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{summarize_ns, LayerStatistics};
use crate::timeline::{ConnectionTimeline, ExcludeReason, Layer, PartialReason, Validity};
use crate::tls::{CipherSuite, NamedGroup};

/// Connection tallies. `valid + partial + excluded = total_streams`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConnectionCounts {
    pub total_streams: u64,
    pub valid: u64,
    pub partial_by_reason: BTreeMap<PartialReason, u64>,
    pub excluded_by_reason: BTreeMap<ExcludeReason, u64>,
}

impl ConnectionCounts {
    pub fn partial(&self) -> u64 {
        self.partial_by_reason.values().sum()
    }

    pub fn excluded(&self) -> u64 {
        self.excluded_by_reason.values().sum()
    }

    pub fn is_consistent(&self) -> bool {
        self.valid + self.partial() + self.excluded() == self.total_streams
    }
}

/// Most common handshake parameters across a run.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct HandshakeMetadata {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub group: Option<NamedGroup>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub key_share_len: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub client_hello_len: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub server_hello_len: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cipher_suite: Option<CipherSuite>,
}

/// Statistics for one analyzed run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub label: String,
    /// Layers with at least one sample.
    pub layers: BTreeMap<Layer, LayerStatistics>,
    /// Over per-connection totals of valid connections.
    pub e2e: Option<LayerStatistics>,
    /// SYN to the record holding the last response byte.
    pub ttlb: Option<LayerStatistics>,
    pub counts: ConnectionCounts,
    pub handshake: HandshakeMetadata,
}

/// Most frequent value; ties go to the smallest.
fn mode<T: Ord + Copy>(values: impl Iterator<Item = T>) -> Option<T> {
    let mut freq: BTreeMap<T, u64> = BTreeMap::new();
    for v in values {
        *freq.entry(v).or_default() += 1;
    }
    let best = freq.values().copied().max()?;
    freq.into_iter().find(|(_, n)| *n == best).map(|(v, _)| v)
}

impl RunSummary {
    pub fn from_timelines(label: impl Into<String>, timelines: &[ConnectionTimeline]) -> Self {
        let mut samples: BTreeMap<Layer, Vec<u64>> = BTreeMap::new();
        let mut e2e = Vec::new();
        let mut ttlb = Vec::new();
        let mut counts = ConnectionCounts {
            total_streams: timelines.len() as u64,
            ..Default::default()
        };
        for tl in timelines {
            match tl.validity {
                Validity::Valid => counts.valid += 1,
                Validity::Partial(r) => *counts.partial_by_reason.entry(r).or_default() += 1,
                Validity::Excluded(r) => *counts.excluded_by_reason.entry(r).or_default() += 1,
            }
            for (layer, ns) in tl.layer_samples() {
                samples.entry(layer).or_default().push(ns);
            }
            if tl.validity.is_valid() {
                if let (Some(a), Some(b)) = (tl.t_syn, tl.t_http_200) {
                    e2e.push(b - a);
                }
                if let (Some(a), Some(b)) = (tl.t_syn, tl.t_last_byte) {
                    ttlb.push(b.saturating_sub(a));
                }
            }
        }
        let layers = samples
            .into_iter()
            .filter_map(|(l, s)| summarize_ns(&s).ok().map(|st| (l, st)))
            .collect();
        let counted = timelines.iter().filter(|t| !matches!(t.validity, Validity::Excluded(_)));
        let handshake = HandshakeMetadata {
            group: mode(counted.clone().filter_map(|t| t.group)),
            key_share_len: mode(counted.clone().filter_map(|t| t.key_share_len)),
            client_hello_len: mode(counted.clone().filter_map(|t| t.client_hello_len)),
            server_hello_len: mode(counted.clone().filter_map(|t| t.server_hello_len)),
            cipher_suite: mode(counted.filter_map(|t| t.cipher_suite)),
        };
        RunSummary {
            label: label.into(),
            layers,
            e2e: summarize_ns(&e2e).ok(),
            ttlb: summarize_ns(&ttlb).ok(),
            counts,
            handshake,
        }
    }
}
