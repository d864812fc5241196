use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::StatsError;
use crate::timeline::Layer;

/// Per-layer slowdown of a candidate relative to the baseline.
pub fn overhead_factor(l_pqc: f64, l_base: f64) -> Result<f64, StatsError> {
    if l_base <= 0.0 {
        return Err(StatsError::ZeroBaseline);
    }
    Ok(l_pqc / l_base)
}

/// Ratio of the summed TCP-to-TLS and TLS handshake latencies.
pub fn combined_overhead_factor(
    tcp2tls_pqc: f64,
    tls_pqc: f64,
    tcp2tls_base: f64,
    tls_base: f64,
) -> Result<f64, StatsError> {
    overhead_factor(tcp2tls_pqc + tls_pqc, tcp2tls_base + tls_base)
}

/// Excess latency of the two crypto-sensitive layers as a percentage of
/// `denominator`.
pub fn cryptographic_overhead_share(
    tcp2tls_pqc: f64,
    tls_pqc: f64,
    tcp2tls_base: f64,
    tls_base: f64,
    denominator: f64,
) -> Result<f64, StatsError> {
    if denominator <= 0.0 {
        return Err(StatsError::ZeroDenominator);
    }
    Ok(100.0 * ((tcp2tls_pqc - tcp2tls_base) + (tls_pqc - tls_base)) / denominator)
}

/// Percentage change of end-to-end latency.
pub fn relative_e2e_overhead(e2e_pqc: f64, e2e_base: f64) -> Result<f64, StatsError> {
    if e2e_base <= 0.0 {
        return Err(StatsError::ZeroBaseline);
    }
    Ok(100.0 * (e2e_pqc - e2e_base) / e2e_base)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EffectClass {
    Negligible,
    SmallToMedium,
    Large,
}

impl EffectClass {
    pub fn of(delta: f64) -> Self {
        let a = delta.abs();
        if a < 0.2 {
            EffectClass::Negligible
        } else if a <= 0.8 {
            EffectClass::SmallToMedium
        } else {
            EffectClass::Large
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            EffectClass::Negligible => "negligible",
            EffectClass::SmallToMedium => "small_to_medium",
            EffectClass::Large => "large",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EffectSize {
    pub delta: f64,
    pub classification: EffectClass,
}

impl EffectSize {
    pub fn new(delta: f64) -> Self {
        EffectSize {
            delta,
            classification: EffectClass::of(delta),
        }
    }
}

/// Glass's effect size: the difference scaled by the baseline's standard
/// deviation.
pub fn glass_delta(value_pqc: f64, value_base: f64, sd_base: f64) -> Result<EffectSize, StatsError> {
    if sd_base.is_nan() || sd_base <= 0.0 {
        return Err(StatsError::ZeroBaselineSd);
    }
    Ok(EffectSize::new((value_pqc - value_base) / sd_base))
}

/// Which total the overhead share is divided by.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CosDenominator {
    /// Sum of the candidate's five layer values at the same percentile.
    #[default]
    LayerSum,
    /// The candidate's end-to-end value at that percentile.
    E2e,
}

impl FromStr for CosDenominator {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "layersum" => Ok(CosDenominator::LayerSum),
            "e2e" => Ok(CosDenominator::E2e),
            _ => Err(format!("unknown denominator `{s}` (expected layersum or e2e)")),
        }
    }
}

impl fmt::Display for CosDenominator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CosDenominator::LayerSum => "layersum",
            CosDenominator::E2e => "e2e",
        })
    }
}

/// Central tendency fed to Glass's delta.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DeltaBasis {
    #[default]
    P50,
    Mean,
}

impl FromStr for DeltaBasis {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "p50" => Ok(DeltaBasis::P50),
            "mean" => Ok(DeltaBasis::Mean),
            _ => Err(format!("unknown delta basis `{s}` (expected p50 or mean)")),
        }
    }
}

impl fmt::Display for DeltaBasis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DeltaBasis::P50 => "p50",
            DeltaBasis::Mean => "mean",
        })
    }
}

/// One run's inputs to a comparison, indexed by [`Layer::index`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LayerSeries {
    /// Layer values at the percentile being evaluated.
    pub values: [f64; 5],
    /// Layer central tendency for the effect size.
    pub centers: [f64; 5],
    pub sds: [f64; 5],
    /// End-to-end value at the percentile being evaluated.
    pub e2e: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverheadReport {
    pub overhead_factor: BTreeMap<Layer, f64>,
    pub of_combined: f64,
    pub cos_percent: f64,
    pub cos_denominator: CosDenominator,
    /// Layers whose baseline has a positive standard deviation.
    pub effect_size: BTreeMap<Layer, EffectSize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub relative_e2e_overhead_percent: Option<f64>,
}

pub fn overhead_report(
    base: &LayerSeries,
    cand: &LayerSeries,
    cos_denominator: CosDenominator,
) -> Result<OverheadReport, StatsError> {
    let t2t = Layer::TcpToTls.index();
    let tls = Layer::TlsHandshake.index();
    let mut of = BTreeMap::new();
    let mut effect = BTreeMap::new();
    for layer in Layer::ALL {
        let i = layer.index();
        of.insert(layer, overhead_factor(cand.values[i], base.values[i])?);
        match glass_delta(cand.centers[i], base.centers[i], base.sds[i]) {
            Ok(e) => {
                effect.insert(layer, e);
            }
            Err(StatsError::ZeroBaselineSd) => {}
            Err(e) => return Err(e),
        }
    }
    let denominator = match cos_denominator {
        CosDenominator::LayerSum => cand.values.iter().sum(),
        CosDenominator::E2e => cand.e2e.ok_or(StatsError::ZeroDenominator)?,
    };
    let relative = match (cand.e2e, base.e2e) {
        (Some(c), Some(b)) => Some(relative_e2e_overhead(c, b)?),
        _ => None,
    };
    Ok(OverheadReport {
        overhead_factor: of,
        of_combined: combined_overhead_factor(
            cand.values[t2t],
            cand.values[tls],
            base.values[t2t],
            base.values[tls],
        )?,
        cos_percent: cryptographic_overhead_share(
            cand.values[t2t],
            cand.values[tls],
            base.values[t2t],
            base.values[tls],
            denominator,
        )?,
        cos_denominator,
        effect_size: effect,
        relative_e2e_overhead_percent: relative,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn overhead_factor_values() {
        assert!(close(overhead_factor(1.866, 0.294).unwrap(), 6.35, 0.005));
        assert!(close(overhead_factor(5.879, 5.547).unwrap(), 1.06, 0.005));
        assert_eq!(overhead_factor(3.2, 3.2), Ok(1.0));
        assert_eq!(overhead_factor(1.0, 0.0), Err(StatsError::ZeroBaseline));
    }

    #[test]
    fn combined_factor_values() {
        assert!(close(combined_overhead_factor(1.866, 5.879, 0.294, 5.547).unwrap(), 1.33, 0.005));
        assert!(close(combined_overhead_factor(1.903, 6.495, 0.294, 5.547).unwrap(), 1.44, 0.005));
        assert_eq!(combined_overhead_factor(0.3, 5.5, 0.3, 5.5), Ok(1.0));
    }

    #[test]
    fn overhead_share_over_layer_sum() {
        let den = 0.390 + 1.866 + 5.879 + 0.991 + 8.880;
        let cos = cryptographic_overhead_share(1.866, 5.879, 0.294, 5.547, den).unwrap();
        assert!(close(cos, 10.6, 0.05));
        assert_eq!(
            cryptographic_overhead_share(1.0, 1.0, 1.0, 1.0, 0.0),
            Err(StatsError::ZeroDenominator)
        );
        assert_eq!(cryptographic_overhead_share(1.0, 2.0, 1.0, 2.0, 10.0), Ok(0.0));
    }

    #[test]
    fn effect_sizes() {
        let d = glass_delta(0.402, 0.360, 0.248).unwrap();
        assert!(close(d.delta, 0.17, 0.005));
        assert_eq!(d.classification, EffectClass::Negligible);
        let d = glass_delta(1.004, 0.526, 0.389).unwrap();
        assert!(close(d.delta, 1.23, 0.005));
        assert_eq!(d.classification, EffectClass::Large);
        assert_eq!(glass_delta(1.0, 1.0, 0.0), Err(StatsError::ZeroBaselineSd));
        assert_eq!(glass_delta(1.0, 1.0, f64::NAN), Err(StatsError::ZeroBaselineSd));
    }

    #[test]
    fn classification_thresholds() {
        assert_eq!(EffectClass::of(0.1999), EffectClass::Negligible);
        assert_eq!(EffectClass::of(-0.2), EffectClass::SmallToMedium);
        assert_eq!(EffectClass::of(0.8), EffectClass::SmallToMedium);
        assert_eq!(EffectClass::of(0.8001), EffectClass::Large);
        assert_eq!(EffectClass::of(-5.0), EffectClass::Large);
    }

    #[test]
    fn relative_overhead() {
        assert!(close(relative_e2e_overhead(20.26, 16.54).unwrap(), 22.5, 0.1));
        assert!(close(relative_e2e_overhead(18.92, 16.54).unwrap(), 14.4, 0.1));
        assert_eq!(relative_e2e_overhead(7.0, 7.0), Ok(0.0));
    }

    #[test]
    fn identity_report() {
        let s = LayerSeries {
            values: [0.36, 0.294, 5.547, 0.526, 9.071],
            centers: [0.36, 0.294, 5.547, 0.526, 9.071],
            sds: [0.248, 0.194, 2.893, 0.389, 3.553],
            e2e: Some(16.54),
        };
        for mode in [CosDenominator::LayerSum, CosDenominator::E2e] {
            let r = overhead_report(&s, &s, mode).unwrap();
            assert!(r.overhead_factor.values().all(|&v| v == 1.0));
            assert_eq!(r.of_combined, 1.0);
            assert_eq!(r.cos_percent, 0.0);
            assert!(r.effect_size.values().all(|e| e.delta == 0.0));
            assert_eq!(r.relative_e2e_overhead_percent, Some(0.0));
        }
        let flat = LayerSeries { sds: [0.0; 5], ..s };
        let r = overhead_report(&flat, &flat, CosDenominator::LayerSum).unwrap();
        assert!(r.effect_size.is_empty());
        assert_eq!(r.of_combined, 1.0);
    }

    #[test]
    fn parse_modes() {
        assert_eq!("LayerSum".parse(), Ok(CosDenominator::LayerSum));
        assert_eq!("e2e".parse(), Ok(CosDenominator::E2e));
        assert_eq!("mean".parse(), Ok(DeltaBasis::Mean));
        assert!("median".parse::<DeltaBasis>().is_err());
    }
}
