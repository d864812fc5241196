//! Per-layer latency decomposition of HTTPS-over-TLS 1.3 transactions
//! recorded in packet captures.
//!
//! A connection is cut at six wire events (SYN, SYN-ACK, ClientHello,
//! client Finished, HTTP request, HTTP response status line) into five
//! layers: TCP handshake, TCP-to-TLS delay, TLS handshake, TLS-to-App delay
//! and application response. Runs recorded with different key-exchange
//! groups are then compared through overhead factors, the cryptographic
//! overhead share and Glass's effect size.
//!
//! The pipeline is `capture` -> `tcp` -> `tls` -> `timeline` -> `stats`,
//! driven by [`analysis::analyze_capture`]. The `synth` module builds fully
//! decryptable captures with known ground truth for testing every stage.

pub mod analysis;
pub mod capture;
pub mod cli;
pub mod report;
pub mod stats;
pub mod synth;
pub mod tcp;
pub mod timeline;
pub mod tls;
