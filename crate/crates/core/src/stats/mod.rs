//! Descriptive statistics over retained samples and the comparison metrics
//! built on them.

mod metrics;
mod run;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use metrics::{
    combined_overhead_factor, cryptographic_overhead_share, glass_delta, overhead_factor,
    overhead_report, relative_e2e_overhead, CosDenominator, DeltaBasis, EffectClass, EffectSize,
    LayerSeries, OverheadReport,
};
pub use run::{ConnectionCounts, HandshakeMetadata, RunSummary};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum StatsError {
    #[error("no samples")]
    EmptySamples,
    #[error("percentile fraction {0} outside [0, 1]")]
    BadFraction(u64),
    #[error("baseline value is zero")]
    ZeroBaseline,
    #[error("share denominator is zero")]
    ZeroDenominator,
    #[error("baseline standard deviation is zero")]
    ZeroBaselineSd,
}

/// The reported percentiles.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Percentile {
    P50,
    P90,
    P95,
    P99,
}

impl Percentile {
    pub const ALL: [Percentile; 4] = [Percentile::P50, Percentile::P90, Percentile::P95, Percentile::P99];

    pub fn fraction(self) -> f64 {
        match self {
            Percentile::P50 => 0.50,
            Percentile::P90 => 0.90,
            Percentile::P95 => 0.95,
            Percentile::P99 => 0.99,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Percentile::P50 => "p50",
            Percentile::P90 => "p90",
            Percentile::P95 => "p95",
            Percentile::P99 => "p99",
        }
    }
}

impl fmt::Display for Percentile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Percentile {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Percentile::ALL
            .into_iter()
            .find(|p| p.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| format!("unknown percentile `{s}` (expected p50, p90, p95 or p99)"))
    }
}

/// Summary of one layer's samples, in milliseconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LayerStatistics {
    pub count: u64,
    pub mean: f64,
    pub p50: f64,
    pub p90: f64,
    pub p95: f64,
    pub p99: f64,
    pub min: f64,
    pub max: f64,
    pub sd: f64,
}

impl LayerStatistics {
    pub fn at(&self, p: Percentile) -> f64 {
        match p {
            Percentile::P50 => self.p50,
            Percentile::P90 => self.p90,
            Percentile::P95 => self.p95,
            Percentile::P99 => self.p99,
        }
    }
}

/// Linear interpolation between closest ranks over an ascending slice.
/// Position h = (n - 1) p.
pub fn percentile_sorted(sorted: &[f64], p: f64) -> Result<f64, StatsError> {
    if sorted.is_empty() {
        return Err(StatsError::EmptySamples);
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(StatsError::BadFraction(p.to_bits()));
    }
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let frac = h - lo as f64;
    let x0 = sorted[lo];
    match sorted.get(lo + 1) {
        Some(&x1) if frac > 0.0 => Ok(x0 + frac * (x1 - x0)),
        _ => Ok(x0),
    }
}

pub fn percentile(samples: &[f64], p: f64) -> Result<f64, StatsError> {
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    percentile_sorted(&sorted, p)
}

pub fn summarize(samples: &[f64]) -> Result<LayerStatistics, StatsError> {
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    summarize_sorted(&sorted)
}

/// Same as [`summarize`] for input already in ascending order.
pub fn summarize_sorted(sorted: &[f64]) -> Result<LayerStatistics, StatsError> {
    let n = sorted.len();
    if n == 0 {
        return Err(StatsError::EmptySamples);
    }
    let mean = sorted.iter().sum::<f64>() / n as f64;
    let sd = if n > 1 {
        let ss: f64 = sorted.iter().map(|x| (x - mean) * (x - mean)).sum();
        (ss / (n - 1) as f64).sqrt()
    } else {
        0.0
    };
    let q = |p: Percentile| percentile_sorted(sorted, p.fraction());
    Ok(LayerStatistics {
        count: n as u64,
        mean,
        p50: q(Percentile::P50)?,
        p90: q(Percentile::P90)?,
        p95: q(Percentile::P95)?,
        p99: q(Percentile::P99)?,
        min: sorted[0],
        max: sorted[n - 1],
        sd,
    })
}

/// Integer nanosecond samples, summarized in milliseconds after an exact
/// integer sort.
pub fn summarize_ns(samples_ns: &[u64]) -> Result<LayerStatistics, StatsError> {
    let mut sorted = samples_ns.to_vec();
    sorted.sort_unstable();
    let ms: Vec<f64> = sorted.iter().map(|&ns| ns as f64 / 1_000_000.0).collect();
    summarize_sorted(&ms)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn singleton() {
        for p in [0.0, 0.3, 0.5, 1.0] {
            assert_eq!(percentile(&[5.0], p), Ok(5.0));
        }
    }

    #[test]
    fn interpolates_between_ranks() {
        assert_eq!(percentile(&[4.0, 1.0, 3.0, 2.0], 0.5), Ok(2.5));
        assert_eq!(percentile(&[1.0, 2.0, 3.0, 4.0], 0.0), Ok(1.0));
        assert_eq!(percentile(&[1.0, 2.0, 3.0, 4.0], 1.0), Ok(4.0));
        // h = 0.99 * 3 = 2.97
        let v = percentile(&[1.0, 2.0, 3.0, 4.0], 0.99).unwrap();
        assert!((v - 3.97).abs() < 1e-12);
    }

    #[test]
    fn empty_and_bad_fraction() {
        assert_eq!(percentile(&[], 0.5), Err(StatsError::EmptySamples));
        assert_eq!(summarize(&[]), Err(StatsError::EmptySamples));
        assert!(matches!(percentile(&[1.0], 1.5), Err(StatsError::BadFraction(_))));
    }

    #[test]
    fn constant_samples() {
        let s = summarize(&[2.0, 2.0, 2.0]).unwrap();
        assert_eq!(s.mean, 2.0);
        assert_eq!(s.sd, 0.0);
        for p in Percentile::ALL {
            assert_eq!(s.at(p), 2.0);
        }
        assert_eq!((s.min, s.max, s.count), (2.0, 2.0, 3));
    }

    #[test]
    fn sample_sd_uses_n_minus_one() {
        let s = summarize(&[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(s.mean, 2.0);
        assert_eq!(s.sd, 1.0);
    }

    #[test]
    fn ns_summary_converts_to_ms() {
        let s = summarize_ns(&[2_000_000, 1_000_000, 3_000_000]).unwrap();
        assert_eq!((s.min, s.p50, s.max), (1.0, 2.0, 3.0));
    }

    #[test]
    fn percentile_names() {
        assert_eq!("P95".parse::<Percentile>(), Ok(Percentile::P95));
        assert!("p75".parse::<Percentile>().is_err());
        assert_eq!(serde_json::to_string(&Percentile::P99).unwrap(), "\"p99\"");
    }
}
