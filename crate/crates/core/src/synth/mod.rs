//! Deterministic synthetic captures with known ground truth.
//!
//! A [`ScenarioSpec`] lists connections by their six boundary times. The
//! generator emits Ethernet/IPv4 frames for a full TLS 1.3 1-RTT exchange
//! per connection (handshake, one HTTP/1.1 request and its response), the
//! key log that decrypts them, and the timeline the analyzer should report.
//! All randomness comes from each connection's `segmentation_seed`.

mod frames;
mod hello;
mod seal;

use std::collections::BTreeSet;
use std::fs;
use std::net::Ipv4Addr;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::capture::{
    emit_capture, render_keylog, CaptureError, CaptureFormat, CapturedFrame, KeyLogStore,
    LinkType, SecretLabel, TcpFlags,
};
use crate::timeline::{compute_deltas, ConnectionTimeline, ExcludeReason, PartialReason, Validity};
use crate::tls::{
    derive_traffic_keys, expected_key_share_size, expected_server_share_size, CipherSuite,
    ClientHelloInfo, KeyShareEntry, NamedGroup, ServerHelloInfo, TlsError,
};

pub use frames::{internet_checksum, tcp_frame, Endpoint, TcpSegment};
pub use hello::{
    filler, handshake_message, render_certificate_verify, render_client_hello, render_finished,
    render_new_session_ticket, render_server_hello, render_server_parameters,
};
pub use seal::seal_record;

/// Largest TCP payload the generator puts in one segment.
pub const MSS: usize = 1448;
const MIN_SEGMENT: usize = 96;
/// Largest plaintext carried per response record.
pub const RESPONSE_RECORD_PLAINTEXT: usize = 1500;
/// Spacing between consecutive response segments.
pub const RESPONSE_SEGMENT_SPACING_NS: u64 = 10_000;
pub const RETRANSMIT_DELAY_NS: u64 = 5_000_000;
/// Captured length of each response frame under the truncate anomaly.
pub const TRUNCATED_SNAPLEN: usize = 128;
const CERT_LEN: usize = 900;
const SIGNATURE_LEN: usize = 256;
const TICKET_LEN: usize = 96;
const SERVER_PORT: u16 = 443;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid scenario: {0}")]
    InvalidSpec(String),
    #[error("cannot parse scenario: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("cannot read scenario: {0}")]
    Read(#[source] std::io::Error),
    #[error("cannot write output: {0}")]
    Write(#[source] std::io::Error),
    #[error(transparent)]
    Capture(#[from] CaptureError),
}

/// Planned departures from a clean exchange.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Anomaly {
    /// The first response segment is sent again 5 ms later.
    Retransmit,
    /// The second and third response segments arrive in swapped order.
    Reorder,
    /// No key-log lines for this connection.
    DropKeylog,
    /// Response frames are captured with a 128-byte snap length.
    Truncate,
    /// The server answers 503.
    Non200,
}

fn default_group() -> NamedGroup {
    NamedGroup::X25519
}

fn default_suite() -> CipherSuite {
    CipherSuite::Aes128GcmSha256
}

fn default_body() -> u64 {
    4096
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConnectionSpec {
    /// SYN, SYN-ACK, ClientHello, client Finished, HTTP request and HTTP
    /// response arrival times in nanoseconds.
    pub boundary_times_ns: [u64; 6],
    #[serde(default = "default_group")]
    pub group: NamedGroup,
    #[serde(default = "default_suite")]
    pub cipher_suite: CipherSuite,
    #[serde(default = "default_body")]
    pub response_body_bytes: u64,
    #[serde(default)]
    pub segmentation_seed: u64,
    #[serde(default)]
    pub anomalies: BTreeSet<Anomaly>,
}

impl ConnectionSpec {
    pub fn clean(boundary_times_ns: [u64; 6]) -> Self {
        ConnectionSpec {
            boundary_times_ns,
            group: default_group(),
            cipher_suite: default_suite(),
            response_body_bytes: default_body(),
            segmentation_seed: 0,
            anomalies: BTreeSet::new(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    #[serde(rename = "connection", default)]
    pub connections: Vec<ConnectionSpec>,
}

impl ScenarioSpec {
    pub fn from_toml(text: &str) -> Result<Self, SynthError> {
        let spec: ScenarioSpec = toml::from_str(text)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, SynthError> {
        Self::from_toml(&fs::read_to_string(path).map_err(SynthError::Read)?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario is always representable")
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        for (i, c) in self.connections.iter().enumerate() {
            if c.boundary_times_ns.windows(2).any(|w| w[1] < w[0]) {
                return Err(SynthError::InvalidSpec(format!(
                    "connection {i}: boundary times are not ordered"
                )));
            }
            expected_key_share_size(c.group).map_err(|_| {
                SynthError::InvalidSpec(format!("connection {i}: unknown group {}", c.group))
            })?;
            if c.response_body_bytes > 1 << 30 {
                return Err(SynthError::InvalidSpec(format!(
                    "connection {i}: response body too large"
                )));
            }
        }
        if self.connections.len() > 1 << 20 {
            return Err(SynthError::InvalidSpec("too many connections".into()));
        }
        Ok(())
    }
}

/// What the analyzer should report for one connection.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExpectedConnection {
    pub client_random: String,
    pub timeline: ConnectionTimeline,
    /// Five layer deltas in ns, for valid connections.
    pub layers_ns: Option<[u64; 5]>,
    pub e2e_ns: Option<u64>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub connections: Vec<ExpectedConnection>,
}

/// One protected record and what went into it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SealedRecord {
    pub connection: usize,
    pub label: SecretLabel,
    pub sequence: u64,
    pub inner_type: u8,
    pub content: Vec<u8>,
    /// Header plus ciphertext as written to the stream.
    pub wire: Vec<u8>,
}

#[derive(Debug, Clone)]
pub struct SynthOutput {
    /// Timestamp-ordered frames.
    pub frames: Vec<CapturedFrame>,
    pub keylog: KeyLogStore,
    pub truth: GroundTruth,
    pub sealed: Vec<SealedRecord>,
}

impl SynthOutput {
    pub fn keylog_text(&self) -> String {
        render_keylog(&self.keylog)
    }

    /// Write `capture.<ext>`, `keylog.txt` and `ground_truth.json` into `dir`.
    pub fn write_to_dir(&self, dir: &Path, format: CaptureFormat) -> Result<(), SynthError> {
        fs::create_dir_all(dir).map_err(SynthError::Write)?;
        emit_capture(&self.frames, dir.join(capture_file_name(format)), format)?;
        fs::write(dir.join("keylog.txt"), self.keylog_text()).map_err(SynthError::Write)?;
        let truth = serde_json::to_string_pretty(&self.truth).expect("ground truth serializes");
        fs::write(dir.join("ground_truth.json"), truth + "\n").map_err(SynthError::Write)?;
        Ok(())
    }
}

pub fn capture_file_name(format: CaptureFormat) -> &'static str {
    match format {
        CaptureFormat::PcapNg => "capture.pcapng",
        _ => "capture.pcap",
    }
}

/// Generate frames, key log and ground truth for every connection.
pub fn generate(spec: &ScenarioSpec) -> Result<SynthOutput, SynthError> {
    spec.validate()?;
    let mut frames = Vec::new();
    let mut keylog = KeyLogStore::new();
    let mut truth = GroundTruth::default();
    let mut sealed = Vec::new();
    for (i, c) in spec.connections.iter().enumerate() {
        let conn = ConnectionGenerator::new(i, c).run().map_err(|e| {
            SynthError::InvalidSpec(format!("connection {i}: {e}"))
        })?;
        frames.extend(conn.frames);
        if !c.anomalies.contains(&Anomaly::DropKeylog) {
            for (label, secret) in conn.secrets {
                keylog.insert(conn.client_random, label, secret);
            }
        }
        truth.connections.push(conn.expected);
        sealed.extend(conn.sealed);
    }
    // Stable: ties keep generation order.
    frames.sort_by_key(|f| f.timestamp_ns);
    Ok(SynthOutput {
        frames,
        keylog,
        truth,
        sealed,
    })
}

struct GeneratedConnection {
    frames: Vec<CapturedFrame>,
    client_random: [u8; 32],
    secrets: Vec<(SecretLabel, Vec<u8>)>,
    expected: ExpectedConnection,
    sealed: Vec<SealedRecord>,
}

/// A data segment sent on the wire.
struct Sent {
    frame: usize,
    /// Offset of the first payload byte within the directional stream.
    offset: usize,
    len: usize,
}

struct ConnectionGenerator<'a> {
    index: usize,
    spec: &'a ConnectionSpec,
    rng: ChaCha8Rng,
    client: Endpoint,
    server: Endpoint,
    client_isn: u32,
    server_isn: u32,
    /// Bytes sent so far in each direction.
    client_sent: usize,
    server_sent: usize,
    ip_id: u16,
    frames: Vec<CapturedFrame>,
    sealed: Vec<SealedRecord>,
}

fn midpoint(a: u64, b: u64) -> u64 {
    a + (b - a) / 2
}

impl<'a> ConnectionGenerator<'a> {
    fn new(index: usize, spec: &'a ConnectionSpec) -> Self {
        let seed = spec.segmentation_seed ^ (index as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let i = index as u32;
        let client = Endpoint {
            mac: [0x02, 0, 0, (i >> 16) as u8, (i >> 8) as u8, i as u8],
            ip: Ipv4Addr::new(10, 1 + (i >> 16) as u8, (i >> 8) as u8, i as u8),
            port: 32768 + (i % 28000) as u16,
        };
        let server = Endpoint {
            mac: [0x02, 0xff, 0, 0, 0, 1],
            ip: Ipv4Addr::new(10, 0, 0, 1),
            port: SERVER_PORT,
        };
        ConnectionGenerator {
            index,
            spec,
            client_isn: rng.random(),
            server_isn: rng.random(),
            rng,
            client,
            server,
            client_sent: 0,
            server_sent: 0,
            ip_id: 1,
            frames: Vec::new(),
            sealed: Vec::new(),
        }
    }

    fn has(&self, a: Anomaly) -> bool {
        self.spec.anomalies.contains(&a)
    }

    fn push_frame(&mut self, ts: u64, from_client: bool, seg: TcpSegment<'_>) -> usize {
        let (src, dst) = if from_client {
            (self.client, self.server)
        } else {
            (self.server, self.client)
        };
        let data = tcp_frame(&src, &dst, self.ip_id, &seg);
        self.ip_id = self.ip_id.wrapping_add(1);
        self.frames.push(CapturedFrame::new(ts, LinkType::Ethernet, data));
        self.frames.len() - 1
    }

    fn next_seq(&self, from_client: bool) -> u32 {
        if from_client {
            self.client_isn.wrapping_add(1).wrapping_add(self.client_sent as u32)
        } else {
            self.server_isn.wrapping_add(1).wrapping_add(self.server_sent as u32)
        }
    }

    fn control(&mut self, ts: u64, from_client: bool, flags: TcpFlags, options: &[u8]) {
        let syn = flags.contains(TcpFlags::SYN);
        let seq = match (from_client, syn) {
            (true, true) => self.client_isn,
            (false, true) => self.server_isn,
            _ => self.next_seq(from_client),
        };
        let ack = if flags.contains(TcpFlags::ACK) {
            self.next_seq(!from_client)
        } else {
            0
        };
        self.push_frame(ts, from_client, TcpSegment { seq, ack, flags, options, payload: &[] });
        if flags.contains(TcpFlags::FIN) {
            if from_client {
                self.client_sent += 1;
            } else {
                self.server_sent += 1;
            }
        }
    }

    /// Send `bytes` as randomly sized segments; `time_of(k)` gives the
    /// timestamp of segment `k`.
    fn send(&mut self, from_client: bool, bytes: &[u8], time_of: impl Fn(u64) -> u64) -> Vec<Sent> {
        let mut out = Vec::new();
        let mut pos = 0;
        let mut k = 0;
        while pos < bytes.len() {
            let want = self.rng.random_range(MIN_SEGMENT..=MSS);
            let len = want.min(bytes.len() - pos);
            let offset = if from_client { self.client_sent } else { self.server_sent };
            let seq = self.next_seq(from_client);
            let ack = self.next_seq(!from_client);
            let frame = self.push_frame(
                time_of(k),
                from_client,
                TcpSegment {
                    seq,
                    ack,
                    flags: TcpFlags::ACK | TcpFlags::PSH,
                    options: &[],
                    payload: &bytes[pos..pos + len],
                },
            );
            if from_client {
                self.client_sent += len;
            } else {
                self.server_sent += len;
            }
            out.push(Sent { frame, offset, len });
            pos += len;
            k += 1;
        }
        out
    }

    fn seal(
        &mut self,
        keys: &crate::tls::TrafficKeys,
        label: SecretLabel,
        counter: &mut u64,
        inner_type: u8,
        content: &[u8],
    ) -> Vec<u8> {
        let padding = self.rng.random_range(0..=8);
        let wire = seal_record(keys, *counter, inner_type, content, padding);
        self.sealed.push(SealedRecord {
            connection: self.index,
            label,
            sequence: *counter,
            inner_type,
            content: content.to_vec(),
            wire: wire.clone(),
        });
        *counter += 1;
        wire
    }

    fn run(mut self) -> Result<GeneratedConnection, TlsError> {
        let spec = self.spec;
        let [t0, t1, t2, t3, t4, t5] = spec.boundary_times_ns;
        let suite = spec.cipher_suite;
        let group = spec.group;

        let mut client_random = [0u8; 32];
        self.rng.fill(&mut client_random[..]);
        let mut server_random = [0u8; 32];
        self.rng.fill(&mut server_random[..]);
        let mut secrets = Vec::new();
        for label in SecretLabel::ALL {
            let mut s = vec![0u8; suite.hash_len()];
            self.rng.fill(&mut s[..]);
            secrets.push((label, s));
        }
        let keys = |label: SecretLabel| {
            let s = &secrets.iter().find(|(l, _)| *l == label).unwrap().1;
            derive_traffic_keys(s, suite)
        };
        let c_hs = keys(SecretLabel::ClientHandshakeTrafficSecret)?;
        let s_hs = keys(SecretLabel::ServerHandshakeTrafficSecret)?;
        let c_app = keys(SecretLabel::ClientTrafficSecret0)?;
        let s_app = keys(SecretLabel::ServerTrafficSecret0)?;

        let hello_info = ClientHelloInfo {
            client_random,
            total_length: 0,
            cipher_suites: {
                let mut v = vec![suite.code()];
                v.extend(CipherSuite::ALL.iter().map(|s| s.code()).filter(|c| *c != suite.code()));
                v
            },
            key_shares: vec![KeyShareEntry {
                group,
                key_exchange_length: expected_key_share_size(group)?,
            }],
            offered_groups: vec![group],
        };
        let client_hello = render_client_hello(&hello_info);
        let server_hello = render_server_hello(&ServerHelloInfo {
            server_random,
            selected_group: group,
            cipher_suite: suite,
            total_length: 0,
            key_exchange_length: expected_server_share_size(group)?,
            hello_retry_request: false,
        });

        // TCP handshake.
        let mss = [2, 4, 0x05, 0xb4];
        self.control(t0, true, TcpFlags::SYN, &mss);
        self.control(t1, false, TcpFlags::SYN | TcpFlags::ACK, &mss);
        self.control(midpoint(t1, t2), true, TcpFlags::ACK, &[]);

        // ClientHello.
        self.send(true, &plain_record(22, 0x0301, &client_hello), |_| t2);

        // Server flight.
        let mut s_seq = 0;
        let mut flight = plain_record(22, 0x0303, &server_hello);
        flight.extend(CCS_RECORD);
        flight.extend(self.seal(
            &s_hs,
            SecretLabel::ServerHandshakeTrafficSecret,
            &mut s_seq,
            22,
            &render_server_parameters(CERT_LEN),
        ));
        let mut tail = render_certificate_verify(SIGNATURE_LEN);
        tail.extend(render_finished(suite.hash_len(), 0x53));
        flight.extend(self.seal(&s_hs, SecretLabel::ServerHandshakeTrafficSecret, &mut s_seq, 22, &tail));
        let t_server = midpoint(t2, t3);
        self.send(false, &flight, |_| t_server);

        // Client Finished.
        let mut c_seq = 0;
        let mut flight = CCS_RECORD.to_vec();
        flight.extend(self.seal(
            &c_hs,
            SecretLabel::ClientHandshakeTrafficSecret,
            &mut c_seq,
            22,
            &render_finished(suite.hash_len(), 0x43),
        ));
        self.send(true, &flight, |_| t3);

        // Session ticket, then request.
        let mut s_app_seq = 0;
        let ticket = self.seal(
            &s_app,
            SecretLabel::ServerTrafficSecret0,
            &mut s_app_seq,
            22,
            &render_new_session_ticket(TICKET_LEN),
        );
        self.send(false, &ticket, |_| midpoint(t3, t4));
        let mut c_app_seq = 0;
        let request = self.seal(&c_app, SecretLabel::ClientTrafficSecret0, &mut c_app_seq, 23, REQUEST);
        self.send(true, &request, |_| t4);

        // Response.
        let status = if self.has(Anomaly::Non200) { 503 } else { 200 };
        let plaintext = response_plaintext(status, spec.response_body_bytes as usize);
        let response_start = self.server_sent;
        let mut wire = Vec::new();
        let mut record_offsets = Vec::new();
        for chunk in plaintext.chunks(RESPONSE_RECORD_PLAINTEXT) {
            record_offsets.push(response_start + wire.len());
            wire.extend(self.seal(&s_app, SecretLabel::ServerTrafficSecret0, &mut s_app_seq, 23, chunk));
        }
        let sent = self.send(false, &wire, |k| t5 + k * RESPONSE_SEGMENT_SPACING_NS);
        let last_response_ts = self.frames[sent.last().unwrap().frame].timestamp_ns;

        if self.has(Anomaly::Reorder) && sent.len() >= 3 {
            let (a, b) = (sent[1].frame, sent[2].frame);
            let ta = self.frames[a].timestamp_ns;
            self.frames[a].timestamp_ns = self.frames[b].timestamp_ns;
            self.frames[b].timestamp_ns = ta;
        }
        if self.has(Anomaly::Retransmit) {
            let mut dup = self.frames[sent[0].frame].clone();
            dup.timestamp_ns += RETRANSMIT_DELAY_NS;
            self.frames.push(dup);
        }
        if self.has(Anomaly::Truncate) {
            for s in &sent {
                self.frames[s.frame].data.truncate(TRUNCATED_SNAPLEN);
            }
        }
        let arrival = |offset: usize| {
            sent.iter()
                .filter(|s| (s.offset..s.offset + s.len).contains(&offset))
                .map(|s| self.frames[s.frame].timestamp_ns)
                .min()
        };
        let t_status = arrival(record_offsets[0]).expect("response was sent");
        let t_last = arrival(*record_offsets.last().unwrap()).expect("response was sent");

        // Close.
        let t_close = last_response_ts + 1_000_000;
        self.control(t_close, true, TcpFlags::FIN | TcpFlags::ACK, &[]);
        self.control(t_close + 50_000, false, TcpFlags::FIN | TcpFlags::ACK, &[]);
        self.control(t_close + 100_000, true, TcpFlags::ACK, &[]);

        let mut timeline = ConnectionTimeline {
            t_syn: Some(t0),
            t_synack: Some(t1),
            t_clienthello: Some(t2),
            t_client_finished: Some(t3),
            t_http_get: Some(t4),
            t_http_200: Some(t_status),
            t_last_byte: Some(t_last),
            http_status: Some(status),
            group: Some(group),
            client_hello_len: Some(client_hello.len()),
            server_hello_len: Some(server_hello.len()),
            key_share_len: Some(expected_key_share_size(group)?),
            cipher_suite: Some(suite),
            validity: Validity::Valid,
        };
        if self.has(Anomaly::DropKeylog) {
            timeline.t_client_finished = None;
            timeline.t_http_get = None;
            timeline.validity = Validity::Partial(PartialReason::NoKeys);
        } else if self.has(Anomaly::Truncate) {
            timeline.validity = Validity::Partial(PartialReason::Truncated);
        } else if status != 200 {
            timeline.validity = Validity::Excluded(ExcludeReason::Non200);
        }
        if matches!(timeline.validity, Validity::Partial(_)) {
            timeline.t_http_200 = None;
            timeline.t_last_byte = None;
            timeline.http_status = None;
        }
        let deltas = compute_deltas(&timeline).ok();

        Ok(GeneratedConnection {
            frames: self.frames,
            client_random,
            secrets,
            expected: ExpectedConnection {
                client_random: hex::encode(client_random),
                timeline,
                layers_ns: deltas.map(|d| d.layers_ns),
                e2e_ns: deltas.map(|d| d.e2e_ns),
            },
            sealed: self.sealed,
        })
    }
}

const CCS_RECORD: [u8; 6] = [20, 3, 3, 0, 1, 1];
const REQUEST: &[u8] =
    b"GET /customers HTTP/1.1\r\nHost: server.test\r\nUser-Agent: layertrace-synth\r\nAccept: application/json\r\n\r\n";

fn plain_record(content_type: u8, version: u16, body: &[u8]) -> Vec<u8> {
    let mut v = vec![content_type];
    v.extend_from_slice(&version.to_be_bytes());
    v.extend_from_slice(&(body.len() as u16).to_be_bytes());
    v.extend_from_slice(body);
    v
}

fn response_plaintext(status: u16, body_len: usize) -> Vec<u8> {
    let reason = if status == 200 { "OK" } else { "Service Unavailable" };
    let mut out = format!(
        "HTTP/1.1 {status} {reason}\r\nContent-Type: application/json\r\nContent-Length: {body_len}\r\n\r\n"
    )
    .into_bytes();
    out.extend((0..body_len).map(|i| b"customer-record;"[i % 16]));
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::capture::{parse_capture, write_capture};

    const ROW: [u64; 6] = [0, 360_000, 654_000, 6_201_000, 6_727_000, 15_798_000];

    fn one(spec: ConnectionSpec) -> SynthOutput {
        generate(&ScenarioSpec { connections: vec![spec] }).unwrap()
    }

    #[test]
    fn deterministic() {
        let mut c = ConnectionSpec::clean(ROW);
        c.segmentation_seed = 11;
        c.anomalies.insert(Anomaly::Reorder);
        let a = one(c.clone());
        let b = one(c);
        assert_eq!(a.frames, b.frames);
        assert_eq!(a.keylog_text(), b.keylog_text());
        assert_eq!(a.truth, b.truth);
    }

    #[test]
    fn clean_connection_truth() {
        let out = one(ConnectionSpec::clean(ROW));
        let t = &out.truth.connections[0];
        assert_eq!(t.timeline.validity, Validity::Valid);
        assert_eq!(t.layers_ns, Some([360_000, 294_000, 5_547_000, 526_000, 9_071_000]));
        assert_eq!(out.keylog.len(), 4);
        assert!(out.frames.windows(2).all(|w| w[0].timestamp_ns <= w[1].timestamp_ns));
    }

    #[test]
    fn forty_kb_body_uses_28_records() {
        let mut c = ConnectionSpec::clean(ROW);
        c.response_body_bytes = 40 * 1024;
        let out = one(c);
        let app: Vec<_> = out
            .sealed
            .iter()
            .filter(|s| s.label == SecretLabel::ServerTrafficSecret0 && s.inner_type == 23)
            .collect();
        assert_eq!(app.len(), 28);
    }

    #[test]
    fn dropped_keylog_and_anomaly_truth() {
        let mut c = ConnectionSpec::clean(ROW);
        c.anomalies.insert(Anomaly::DropKeylog);
        let out = one(c);
        assert!(out.keylog.is_empty());
        assert_eq!(
            out.truth.connections[0].timeline.validity,
            Validity::Partial(PartialReason::NoKeys)
        );
    }

    #[test]
    fn spec_validation() {
        let mut c = ConnectionSpec::clean(ROW);
        c.boundary_times_ns[3] = 1;
        assert!(matches!(
            generate(&ScenarioSpec { connections: vec![c] }),
            Err(SynthError::InvalidSpec(_))
        ));
        let mut c = ConnectionSpec::clean(ROW);
        c.group = NamedGroup::SECP256R1;
        assert!(ScenarioSpec { connections: vec![c] }.validate().is_err());
    }

    #[test]
    fn toml_round_trip() {
        let text = r#"
            [[connection]]
            boundary_times_ns = [0, 360000, 654000, 6201000, 6727000, 15798000]
            group = "x25519_mlkem768"
            cipher_suite = "TLS_CHACHA20_POLY1305_SHA256"
            response_body_bytes = 40960
            segmentation_seed = 3
            anomalies = ["truncate", "retransmit"]

            [[connection]]
            boundary_times_ns = [10, 20, 30, 40, 50, 60]
        "#;
        let spec = ScenarioSpec::from_toml(text).unwrap();
        assert_eq!(spec.connections.len(), 2);
        assert_eq!(spec.connections[0].group, NamedGroup::X25519_MLKEM768);
        assert_eq!(spec.connections[1].response_body_bytes, 4096);
        assert_eq!(ScenarioSpec::from_toml(&spec.to_toml()).unwrap(), spec);
        assert!(ScenarioSpec::from_toml("[[connection]]\nboundary_times_ns = [1]\n").is_err());
        assert!(ScenarioSpec::from_toml("[[connection]]\nbogus = 1\n").is_err());
    }

    #[test]
    fn empty_scenario_writes_header_only_capture() {
        let out = generate(&ScenarioSpec::default()).unwrap();
        let mut buf = Vec::new();
        write_capture(&out.frames, CaptureFormat::PcapNano, &mut buf).unwrap();
        assert_eq!(buf.len(), 24);
        assert!(parse_capture(&buf).unwrap().frames.is_empty());
    }
}
