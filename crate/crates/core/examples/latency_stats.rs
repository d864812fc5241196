//! Percentile statistics and overhead metrics on raw latency samples.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use layertrace::stats::{
    combined_overhead_factor, cryptographic_overhead_share, glass_delta, overhead_factor,
    relative_e2e_overhead, summarize,
};

/// Log-normal-ish latency samples around `median` ms.
fn samples(rng: &mut ChaCha8Rng, median: f64, spread: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|_| {
            let u: f64 = (0..4).map(|_| rng.random_range(-1.0..1.0)).sum::<f64>() / 2.0;
            median * (spread * u).exp()
        })
        .collect()
}

fn main() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let base_t2t = summarize(&samples(&mut rng, 0.29, 0.4, 5000)).unwrap();
    let base_tls = summarize(&samples(&mut rng, 5.5, 0.35, 5000)).unwrap();
    let pqc_t2t = summarize(&samples(&mut rng, 1.9, 0.4, 5000)).unwrap();
    let pqc_tls = summarize(&samples(&mut rng, 6.4, 0.35, 5000)).unwrap();

    for (name, s) in [("baseline tcp_to_tls", &base_t2t), ("baseline tls", &base_tls), ("pqc tcp_to_tls", &pqc_t2t), ("pqc tls", &pqc_tls)] {
        println!(
            "{name:<20} n={} mean={:.3} p50={:.3} p95={:.3} p99={:.3} sd={:.3}",
            s.count, s.mean, s.p50, s.p95, s.p99, s.sd
        );
    }

    let of = overhead_factor(pqc_t2t.p50, base_t2t.p50).unwrap();
    let of_comb = combined_overhead_factor(pqc_t2t.p50, pqc_tls.p50, base_t2t.p50, base_tls.p50).unwrap();
    let e2e_pqc = pqc_t2t.p50 + pqc_tls.p50;
    let cos = cryptographic_overhead_share(pqc_t2t.p50, pqc_tls.p50, base_t2t.p50, base_tls.p50, e2e_pqc).unwrap();
    let delta = glass_delta(pqc_t2t.p50, base_t2t.p50, base_t2t.sd).unwrap();
    let rel = relative_e2e_overhead(e2e_pqc, base_t2t.p50 + base_tls.p50).unwrap();
    println!("OF tcp_to_tls {of:.2}, OF combined {of_comb:.2}, COS {cos:.1}% of the two layers");
    println!("Glass's delta {:.2} ({})", delta.delta, delta.classification.name());
    println!("relative change of the two-layer total {rel:+.1}%");
}
