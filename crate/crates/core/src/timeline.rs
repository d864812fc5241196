//! Boundary timestamps per connection and the five layer deltas.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::tcp::TcpConnection;
use crate::tls::{CipherSuite, ClientHelloInfo, DecryptedMessage, InnerType, NamedGroup, ServerHelloInfo};

const NS_PER_MS: f64 = 1_000_000.0;

const HTTP_METHODS: [&[u8]; 7] = [
    b"GET ", b"POST ", b"PUT ", b"HEAD ", b"DELETE ", b"OPTIONS ", b"PATCH ",
];
const HTTP2_PREFACE: &[u8] = b"PRI * HTTP/2.0";

/// The five latency layers, in wire order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Layer {
    /// SYN -> SYN-ACK
    TcpHandshake,
    /// SYN-ACK -> ClientHello
    TcpToTls,
    /// ClientHello -> client Finished
    TlsHandshake,
    /// client Finished -> HTTP request
    TlsToApp,
    /// HTTP request -> HTTP response status line
    AppResponse,
}

impl Layer {
    pub const ALL: [Layer; 5] = [
        Layer::TcpHandshake,
        Layer::TcpToTls,
        Layer::TlsHandshake,
        Layer::TlsToApp,
        Layer::AppResponse,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Layer::TcpHandshake => "tcp_handshake",
            Layer::TcpToTls => "tcp_to_tls",
            Layer::TlsHandshake => "tls_handshake",
            Layer::TlsToApp => "tls_to_app",
            Layer::AppResponse => "app_response",
        }
    }

    pub fn title(self) -> &'static str {
        match self {
            Layer::TcpHandshake => "TCP handshake",
            Layer::TcpToTls => "TCP-to-TLS",
            Layer::TlsHandshake => "TLS handshake",
            Layer::TlsToApp => "TLS-to-App",
            Layer::AppResponse => "App response",
        }
    }
}

impl fmt::Display for Layer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Why a connection only contributes to a prefix of the layers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PartialReason {
    MissingSyn,
    MissingSynAck,
    NoClientHello,
    NoServerHello,
    MalformedHello,
    /// Analysis ran without a key log.
    NoDecrypt,
    /// The key log has no secrets for this client_random.
    NoKeys,
    UnsupportedSuite,
    Undecryptable,
    FinishedNotFound,
    KeyUpdate,
    NoRequest,
    NoResponse,
    /// Snap length or capture loss cut the stream before the next boundary.
    Truncated,
}

/// Why a connection is kept out of every aggregate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExcludeReason {
    /// Boundaries out of order.
    Ordering,
    HelloRetry,
    Non200,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "status", content = "reason", rename_all = "snake_case")]
pub enum Validity {
    Valid,
    Partial(PartialReason),
    Excluded(ExcludeReason),
}

impl Validity {
    pub fn is_valid(self) -> bool {
        self == Validity::Valid
    }
}

/// Six boundary timestamps plus handshake metadata for one connection.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConnectionTimeline {
    pub t_syn: Option<u64>,
    pub t_synack: Option<u64>,
    pub t_clienthello: Option<u64>,
    pub t_client_finished: Option<u64>,
    pub t_http_get: Option<u64>,
    pub t_http_200: Option<u64>,
    /// Record carrying the last response body byte, when Content-Length allowed finding it.
    pub t_last_byte: Option<u64>,
    pub http_status: Option<u16>,
    pub group: Option<NamedGroup>,
    pub client_hello_len: Option<usize>,
    pub server_hello_len: Option<usize>,
    pub key_share_len: Option<usize>,
    pub cipher_suite: Option<CipherSuite>,
    pub validity: Validity,
}

impl ConnectionTimeline {
    pub fn boundaries(&self) -> [Option<u64>; 6] {
        [
            self.t_syn,
            self.t_synack,
            self.t_clienthello,
            self.t_client_finished,
            self.t_http_get,
            self.t_http_200,
        ]
    }

    /// Layers this connection contributes samples to, with their deltas.
    /// Excluded timelines contribute nothing; partial ones contribute the
    /// layers whose boundaries form a present prefix.
    pub fn layer_samples(&self) -> Vec<(Layer, u64)> {
        if matches!(self.validity, Validity::Excluded(_)) {
            return Vec::new();
        }
        let b = self.boundaries();
        let mut out = Vec::new();
        for layer in Layer::ALL {
            let i = layer.index();
            match (b[i], b[i + 1]) {
                (Some(start), Some(end)) if end >= start => out.push((layer, end - start)),
                _ => break,
            }
        }
        out
    }
}

/// Boundaries found past the TCP handshake.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct TlsBoundaries {
    pub t_clienthello: Option<u64>,
    pub t_client_finished: Option<u64>,
    pub t_http_get: Option<u64>,
    pub response: Option<HttpResponse>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HttpResponse {
    pub status: u16,
    pub timestamp_ns: u64,
    pub last_byte_ns: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum TimelineError {
    #[error("no HTTP request in client application data")]
    NoRequestFound,
    #[error("no HTTP response in server application data")]
    NoResponseFound,
    #[error("timeline is not valid")]
    InvalidTimeline,
}

/// Assemble a timeline. `failure` names what stopped the pipeline early,
/// if anything; it is used as the partial reason when boundaries are missing.
pub fn build_timeline(
    conn: &TcpConnection,
    hello: Option<&ClientHelloInfo>,
    server_hello: Option<&ServerHelloInfo>,
    found: TlsBoundaries,
    failure: Option<PartialReason>,
) -> ConnectionTimeline {
    let mut tl = ConnectionTimeline {
        t_syn: conn.t_syn,
        t_synack: conn.t_synack,
        t_clienthello: found.t_clienthello,
        t_client_finished: found.t_client_finished,
        t_http_get: found.t_http_get,
        t_http_200: found.response.map(|r| r.timestamp_ns),
        t_last_byte: found.response.and_then(|r| r.last_byte_ns),
        http_status: found.response.map(|r| r.status),
        group: server_hello
            .map(|s| s.selected_group)
            .or_else(|| hello.and_then(|h| h.key_shares.first().map(|k| k.group))),
        client_hello_len: hello.map(|h| h.total_length),
        server_hello_len: server_hello.map(|s| s.total_length),
        key_share_len: hello.and_then(|h| {
            let chosen = server_hello.map(|s| s.selected_group);
            h.key_shares
                .iter()
                .find(|k| Some(k.group) == chosen)
                .or(h.key_shares.first())
                .map(|k| k.key_exchange_length)
        }),
        cipher_suite: server_hello.map(|s| s.cipher_suite),
        validity: Validity::Valid,
    };
    tl.validity = classify(&tl, server_hello, failure);
    tl
}

fn classify(
    tl: &ConnectionTimeline,
    server_hello: Option<&ServerHelloInfo>,
    failure: Option<PartialReason>,
) -> Validity {
    if server_hello.is_some_and(|s| s.hello_retry_request) {
        return Validity::Excluded(ExcludeReason::HelloRetry);
    }
    let present: Vec<u64> = tl.boundaries().into_iter().flatten().collect();
    if present.windows(2).any(|w| w[1] < w[0]) {
        return Validity::Excluded(ExcludeReason::Ordering);
    }
    let b = tl.boundaries();
    match b.iter().position(Option::is_none) {
        None if tl.http_status == Some(200) => Validity::Valid,
        None => Validity::Excluded(ExcludeReason::Non200),
        Some(missing) => Validity::Partial(failure.unwrap_or(match missing {
            0 => PartialReason::MissingSyn,
            1 => PartialReason::MissingSynAck,
            2 => PartialReason::NoClientHello,
            3 => PartialReason::FinishedNotFound,
            4 => PartialReason::NoRequest,
            _ => PartialReason::NoResponse,
        })),
    }
}

/// Per-connection layer latencies, held in integer nanoseconds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LayerDeltas {
    pub layers_ns: [u64; 5],
    pub e2e_ns: u64,
}

impl LayerDeltas {
    pub fn ns(&self, layer: Layer) -> u64 {
        self.layers_ns[layer.index()]
    }

    pub fn ms(&self, layer: Layer) -> f64 {
        self.ns(layer) as f64 / NS_PER_MS
    }

    pub fn tcp_handshake_ms(&self) -> f64 {
        self.ms(Layer::TcpHandshake)
    }

    pub fn tcp_to_tls_ms(&self) -> f64 {
        self.ms(Layer::TcpToTls)
    }

    pub fn tls_handshake_ms(&self) -> f64 {
        self.ms(Layer::TlsHandshake)
    }

    pub fn tls_to_app_ms(&self) -> f64 {
        self.ms(Layer::TlsToApp)
    }

    pub fn app_response_ms(&self) -> f64 {
        self.ms(Layer::AppResponse)
    }

    pub fn e2e_ms(&self) -> f64 {
        self.e2e_ns as f64 / NS_PER_MS
    }
}

pub fn compute_deltas(tl: &ConnectionTimeline) -> Result<LayerDeltas, TimelineError> {
    if !tl.validity.is_valid() {
        return Err(TimelineError::InvalidTimeline);
    }
    let b = tl.boundaries();
    let mut t = [0u64; 6];
    for (dst, src) in t.iter_mut().zip(b) {
        *dst = src.ok_or(TimelineError::InvalidTimeline)?;
    }
    let mut layers_ns = [0u64; 5];
    for i in 0..5 {
        layers_ns[i] = t[i + 1]
            .checked_sub(t[i])
            .ok_or(TimelineError::InvalidTimeline)?;
    }
    Ok(LayerDeltas {
        layers_ns,
        e2e_ns: t[5] - t[0],
    })
}

fn starts_request(p: &[u8]) -> bool {
    HTTP_METHODS.iter().any(|m| p.starts_with(m)) || p.starts_with(HTTP2_PREFACE)
}

/// Timestamp of the first client application-data record that opens an
/// HTTP request.
pub fn detect_http_request(messages: &[DecryptedMessage]) -> Result<u64, TimelineError> {
    messages
        .iter()
        .filter(|m| m.inner_type == InnerType::ApplicationData)
        .find(|m| starts_request(&m.plaintext))
        .map(|m| m.record_timestamp_ns)
        .ok_or(TimelineError::NoRequestFound)
}

fn status_code(p: &[u8]) -> Option<u16> {
    // "HTTP/1.x NNN"
    if p.len() < 12 || !p.starts_with(b"HTTP/1.") || p[8] != b' ' {
        return None;
    }
    std::str::from_utf8(&p[9..12]).ok()?.parse().ok()
}

/// First server application-data record at or after `t_request` carrying an
/// HTTP/1.x status line. The timestamp is that record's first byte; the
/// last-byte time is filled in when the headers give a Content-Length and
/// the body is fully present in `messages`.
pub fn detect_http_response(
    messages: &[DecryptedMessage],
    t_request: u64,
) -> Result<HttpResponse, TimelineError> {
    let app: Vec<&DecryptedMessage> = messages
        .iter()
        .filter(|m| m.inner_type == InnerType::ApplicationData)
        .collect();
    let (idx, status) = app
        .iter()
        .enumerate()
        .filter(|(_, m)| m.record_timestamp_ns >= t_request)
        .find_map(|(i, m)| status_code(&m.plaintext).map(|s| (i, s)))
        .ok_or(TimelineError::NoResponseFound)?;
    Ok(HttpResponse {
        status,
        timestamp_ns: app[idx].record_timestamp_ns,
        last_byte_ns: last_byte_time(&app[idx..]),
    })
}

fn last_byte_time(msgs: &[&DecryptedMessage]) -> Option<u64> {
    let mut buf = Vec::new();
    let mut needed: Option<usize> = None;
    for m in msgs {
        buf.extend_from_slice(&m.plaintext);
        if needed.is_none() {
            if let Some(end) = buf.windows(4).position(|w| w == b"\r\n\r\n") {
                let headers = std::str::from_utf8(&buf[..end]).ok()?;
                let len = headers.lines().find_map(|l| {
                    let (name, value) = l.split_once(':')?;
                    name.trim()
                        .eq_ignore_ascii_case("content-length")
                        .then(|| value.trim().parse::<usize>().ok())
                        .flatten()
                })?;
                needed = Some(end + 4 + len);
            }
        }
        if let Some(n) = needed {
            if buf.len() >= n {
                return Some(m.record_timestamp_ns);
            }
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tcp::{ConnFlags, DirectionalStream, FlowKey};

    fn app(text: &[u8], ts: u64) -> DecryptedMessage {
        DecryptedMessage {
            inner_type: InnerType::ApplicationData,
            plaintext: text.to_vec(),
            record_timestamp_ns: ts,
            stream_offset: 0,
        }
    }

    fn timeline(b: [Option<u64>; 6], status: Option<u16>) -> ConnectionTimeline {
        let conn = TcpConnection {
            key: FlowKey {
                client_ip: [10, 0, 0, 1].into(),
                client_port: 1,
                server_ip: [10, 0, 0, 2].into(),
                server_port: 443,
            },
            t_syn: b[0],
            t_synack: b[1],
            client_to_server: DirectionalStream::default(),
            server_to_client: DirectionalStream::default(),
            flags: ConnFlags::COMPLETE,
        };
        let found = TlsBoundaries {
            t_clienthello: b[2],
            t_client_finished: b[3],
            t_http_get: b[4],
            response: b[5].map(|t| HttpResponse {
                status: status.unwrap_or(200),
                timestamp_ns: t,
                last_byte_ns: None,
            }),
        };
        build_timeline(&conn, None, None, found, None)
    }

    const TABLE2_X25519_P50: [u64; 6] = [0, 360_000, 654_000, 6_201_000, 6_727_000, 15_798_000];

    #[test]
    fn x25519_median_row() {
        let tl = timeline(TABLE2_X25519_P50.map(Some), None);
        assert_eq!(tl.validity, Validity::Valid);
        let d = compute_deltas(&tl).unwrap();
        assert_eq!(d.layers_ns, [360_000, 294_000, 5_547_000, 526_000, 9_071_000]);
        assert_eq!(d.tcp_handshake_ms(), 0.360);
        assert_eq!(d.tcp_to_tls_ms(), 0.294);
        assert_eq!(d.tls_handshake_ms(), 5.547);
        assert_eq!(d.tls_to_app_ms(), 0.526);
        assert_eq!(d.app_response_ms(), 9.071);
        assert_eq!(d.e2e_ns, 15_798_000);
    }

    #[test]
    fn all_equal_boundaries() {
        let d = compute_deltas(&timeline([Some(42); 6], None)).unwrap();
        assert_eq!(d.layers_ns, [0; 5]);
        assert_eq!(d.e2e_ns, 0);
    }

    #[test]
    fn missing_finished_is_partial_prefix() {
        let mut b = TABLE2_X25519_P50.map(Some);
        b[3] = None;
        b[4] = None;
        b[5] = None;
        let tl = timeline(b, None);
        assert_eq!(tl.validity, Validity::Partial(PartialReason::FinishedNotFound));
        assert_eq!(
            tl.layer_samples(),
            vec![(Layer::TcpHandshake, 360_000), (Layer::TcpToTls, 294_000)]
        );
        assert_eq!(compute_deltas(&tl), Err(TimelineError::InvalidTimeline));
    }

    #[test]
    fn ordering_violation_is_excluded() {
        let mut b = TABLE2_X25519_P50.map(Some);
        b[4] = Some(6_000_000);
        let tl = timeline(b, None);
        assert_eq!(tl.validity, Validity::Excluded(ExcludeReason::Ordering));
        assert!(tl.layer_samples().is_empty());
    }

    #[test]
    fn non_200_is_excluded() {
        let tl = timeline(TABLE2_X25519_P50.map(Some), Some(503));
        assert_eq!(tl.validity, Validity::Excluded(ExcludeReason::Non200));
        assert_eq!(tl.http_status, Some(503));
        assert!(tl.layer_samples().is_empty());
    }

    #[test]
    fn request_detection() {
        let msgs = [
            app(b"continuation of something", 5),
            app(b"GET /customers HTTP/1.1\r\nHost: x\r\n\r\n", 9),
        ];
        assert_eq!(detect_http_request(&msgs), Ok(9));
        assert_eq!(detect_http_request(&msgs[..1]), Err(TimelineError::NoRequestFound));
        assert_eq!(detect_http_request(&[]), Err(TimelineError::NoRequestFound));
        assert_eq!(detect_http_request(&[app(b"PRI * HTTP/2.0\r\n\r\nSM", 3)]), Ok(3));
        assert_eq!(detect_http_request(&[app(b"GETX /", 3)]), Err(TimelineError::NoRequestFound));
    }

    #[test]
    fn response_detection_uses_first_record() {
        let head = b"HTTP/1.1 200 OK\r\nContent-Length: 3000\r\n\r\n";
        let mut first = head.to_vec();
        first.extend([b'a'; 1000]);
        let msgs = [
            app(b"HTTP/1.1 100 Continue\r\n\r\n", 1),
            app(&first, 10),
            app(&[b'b'; 1000], 20),
            app(&[b'c'; 1000], 30),
        ];
        let r = detect_http_response(&msgs, 5).unwrap();
        assert_eq!(r.status, 200);
        assert_eq!(r.timestamp_ns, 10);
        assert_eq!(r.last_byte_ns, Some(30));
        assert_eq!(
            detect_http_response(&msgs[..3], 5).unwrap().last_byte_ns,
            None
        );
        assert_eq!(
            detect_http_response(&msgs, 40),
            Err(TimelineError::NoResponseFound)
        );
        let r = detect_http_response(&[app(b"HTTP/1.1 503 Service Unavailable\r\n", 7)], 0).unwrap();
        assert_eq!((r.status, r.timestamp_ns), (503, 7));
    }
}
