use proptest::prelude::*;

use layertrace::analysis::analyze_frames;
use layertrace::capture::{parse_keylog, render_keylog, KeyLogStore, SecretLabel};
use layertrace::stats::{percentile, summarize};
use layertrace::synth::{generate, render_client_hello, ConnectionSpec, ScenarioSpec};
use layertrace::tls::{parse_client_hello_message, ClientHelloInfo, KeyShareEntry, NamedGroup};

fn samples() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0f64..1e4, 1..300)
}

proptest! {
    #[test]
    fn percentiles_are_monotone(xs in samples(), a in 0.0f64..=1.0, b in 0.0f64..=1.0) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let p_lo = percentile(&xs, lo).unwrap();
        let p_hi = percentile(&xs, hi).unwrap();
        prop_assert!(p_lo <= p_hi);
        let s = summarize(&xs).unwrap();
        prop_assert!(s.min <= s.p50 && s.p50 <= s.p90 && s.p90 <= s.p95);
        prop_assert!(s.p95 <= s.p99 && s.p99 <= s.max);
    }

    #[test]
    fn percentiles_scale_with_data(xs in samples(), k in 0.001f64..1000.0, p in 0.0f64..=1.0) {
        let scaled: Vec<f64> = xs.iter().map(|x| x * k).collect();
        let direct = percentile(&scaled, p).unwrap();
        let expected = percentile(&xs, p).unwrap() * k;
        prop_assert!((direct - expected).abs() <= 1e-9 * expected.abs().max(1.0));
    }

    #[test]
    fn summary_ignores_sample_order(mut xs in samples(), seed in any::<u64>()) {
        let before = summarize(&xs).unwrap();
        let n = xs.len();
        xs.rotate_left((seed as usize) % n);
        xs.reverse();
        let after = summarize(&xs).unwrap();
        prop_assert_eq!(before.p50, after.p50);
        prop_assert_eq!(before.p99, after.p99);
        prop_assert!((before.mean - after.mean).abs() <= 1e-9 * before.mean.abs().max(1.0));
    }

    #[test]
    fn client_hello_round_trip(
        random in prop::array::uniform32(any::<u8>()),
        suites in prop::collection::vec(any::<u16>(), 1..8),
        shares in prop::collection::vec((any::<u16>(), 0usize..2000), 0..4),
    ) {
        let info = ClientHelloInfo {
            client_random: random,
            total_length: 0,
            cipher_suites: suites,
            key_shares: shares
                .iter()
                .map(|&(g, len)| KeyShareEntry { group: NamedGroup(g), key_exchange_length: len })
                .collect(),
            offered_groups: shares.iter().map(|&(g, _)| NamedGroup(g)).collect(),
        };
        let wire = render_client_hello(&info);
        let parsed = parse_client_hello_message(&wire).unwrap();
        prop_assert_eq!(parsed.client_random, info.client_random);
        prop_assert_eq!(&parsed.cipher_suites, &info.cipher_suites);
        prop_assert_eq!(&parsed.key_shares, &info.key_shares);
        prop_assert_eq!(&parsed.offered_groups, &info.offered_groups);
        prop_assert_eq!(parsed.total_length, wire.len());
    }

    #[test]
    fn keylog_round_trip(
        entries in prop::collection::vec(
            (prop::array::uniform32(any::<u8>()), 0usize..4, prop::bool::ANY, any::<u8>()),
            0..20,
        )
    ) {
        let mut store = KeyLogStore::new();
        for (cr, label, long, fill) in entries {
            let len = if long { 48 } else { 32 };
            store.insert(cr, SecretLabel::ALL[label], vec![fill; len]);
        }
        let text = render_keylog(&store);
        let parsed = parse_keylog(&text);
        prop_assert_eq!(render_keylog(&parsed), text);
        prop_assert_eq!(parsed.len(), store.len());
        prop_assert!(parsed.diagnostics.malformed.is_empty());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn reassembly_ignores_frame_order(seed in any::<u64>(), body in 0u64..30_000) {
        let mut c = ConnectionSpec::clean([1_000, 350_000, 2_100_000, 7_900_000, 8_800_000, 17_000_000]);
        c.segmentation_seed = seed;
        c.response_body_bytes = body;
        let mut other = c.clone();
        other.boundary_times_ns = c.boundary_times_ns.map(|t| t + 3_000_000);
        other.group = NamedGroup::X25519_MLKEM768;
        let out = generate(&ScenarioSpec { connections: vec![c, other] }).unwrap();
        let expected: Vec<_> = out.truth.connections.iter().map(|e| e.timeline.clone()).collect();

        let mut frames = out.frames.clone();
        frames.reverse();
        let n = frames.len();
        frames.rotate_left((seed as usize) % n);
        let analysis = analyze_frames(&frames, Some(&out.keylog), 1);
        prop_assert_eq!(analysis.timelines, expected);
    }
}
