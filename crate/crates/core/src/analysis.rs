//! The per-connection pipeline: reassembled TCP streams in, timelines out.

use std::fs;
use std::path::Path;

use log::{debug, warn};
use thiserror::Error;

use crate::capture::{
    decode_frame, open_capture, parse_keylog, CaptureError, CapturedFrame, Decoded, KeyLogStore,
    SecretLabel,
};
use crate::stats::RunSummary;
use crate::tcp::{assemble_connections, ConnFlags, TcpConnection};
use crate::timeline::{
    build_timeline, detect_http_request, detect_http_response, ConnectionTimeline,
    PartialReason, TlsBoundaries,
};
use crate::tls::{
    decrypt_record, derive_traffic_keys, find_client_finished, parse_client_hello_message,
    parse_records, parse_server_hello_message, ClientHelloInfo, ContentType, DecryptedMessage,
    HandshakeMessage, HandshakeReader, HandshakeType, InnerType, RecordStream, ServerHelloInfo,
    TlsError, TlsRecord, TrafficKeys,
};

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error(transparent)]
    Capture(#[from] CaptureError),
    #[error("cannot read key log {path}: {source}")]
    KeyLog {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Everything learned from one capture.
#[derive(Debug, Clone, PartialEq)]
pub struct Analysis {
    pub connections: Vec<TcpConnection>,
    /// One per connection, same order.
    pub timelines: Vec<ConnectionTimeline>,
    pub decode_errors: usize,
    pub decrypted: bool,
}

impl Analysis {
    pub fn summarize(&self, label: &str) -> RunSummary {
        RunSummary::from_timelines(label, &self.timelines)
    }
}

/// Read a capture and optional key log from disk and analyze them.
pub fn analyze_capture(
    pcap: impl AsRef<Path>,
    keylog: Option<&Path>,
    workers: usize,
) -> Result<Analysis, AnalysisError> {
    let capture = open_capture(pcap)?;
    for w in &capture.warnings {
        warn!("{w:?}");
    }
    let store = match keylog {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|source| AnalysisError::KeyLog {
                path: path.display().to_string(),
                source,
            })?;
            let store = parse_keylog(&text);
            if !store.diagnostics.malformed.is_empty() {
                warn!("{} malformed key-log lines skipped", store.diagnostics.malformed.len());
            }
            Some(store)
        }
        None => None,
    };
    Ok(analyze_frames(&capture.frames, store.as_ref(), workers))
}

/// Decode, reassemble and analyze frames. Connections are split into
/// `workers` batches processed in parallel; the result does not depend on
/// the worker count.
pub fn analyze_frames(
    frames: &[CapturedFrame],
    keylog: Option<&KeyLogStore>,
    workers: usize,
) -> Analysis {
    let mut decode_errors = 0;
    let mut packets = Vec::with_capacity(frames.len());
    for f in frames {
        match decode_frame(f) {
            Ok(Decoded::Tcp(p)) => packets.push(p),
            Ok(Decoded::NonTcp) => {}
            Err(e) => {
                debug!("frame at {} ns skipped: {e}", f.timestamp_ns);
                decode_errors += 1;
            }
        }
    }
    let connections = assemble_connections(packets);
    let timelines = analyze_connections(&connections, keylog, workers);
    Analysis {
        connections,
        timelines,
        decode_errors,
        decrypted: keylog.is_some(),
    }
}

pub fn analyze_connections(
    connections: &[TcpConnection],
    keylog: Option<&KeyLogStore>,
    workers: usize,
) -> Vec<ConnectionTimeline> {
    let workers = workers.max(1);
    if workers == 1 || connections.len() < 2 {
        return connections.iter().map(|c| analyze_connection(c, keylog)).collect();
    }
    let batch = connections.len().div_ceil(workers);
    std::thread::scope(|scope| {
        let handles: Vec<_> = connections
            .chunks(batch)
            .map(|chunk| {
                scope.spawn(move || {
                    chunk
                        .iter()
                        .map(|c| analyze_connection(c, keylog))
                        .collect::<Vec<_>>()
                })
            })
            .collect();
        handles
            .into_iter()
            .flat_map(|h| h.join().expect("analysis worker panicked"))
            .collect()
    })
}

/// Build the timeline of one connection.
pub fn analyze_connection(conn: &TcpConnection, keylog: Option<&KeyLogStore>) -> ConnectionTimeline {
    let mut trace = Trace::default();
    let failure = trace.run(conn, keylog).err();
    build_timeline(
        conn,
        trace.hello.as_ref(),
        trace.server_hello.as_ref(),
        trace.found,
        failure,
    )
}

#[derive(Default)]
struct Trace {
    found: TlsBoundaries,
    hello: Option<ClientHelloInfo>,
    server_hello: Option<ServerHelloInfo>,
}

fn is_cut(records: &RecordStream, conn: &TcpConnection) -> bool {
    records.stopped_at_gap || records.trailing_partial || conn.flags.contains(ConnFlags::SNAPPED)
}

/// First handshake message in the plaintext records at the head of a
/// stream, and the index of the record after the one completing it.
fn leading_handshake(records: &[TlsRecord]) -> Option<(HandshakeMessage, usize)> {
    let mut reader = HandshakeReader::new();
    for (i, rec) in records.iter().enumerate() {
        if rec.content_type != ContentType::Handshake {
            return None;
        }
        reader.push(&rec.body, rec.timestamp_ns);
        if let Some(msg) = reader.next_message() {
            return Some((msg, i + 1));
        }
    }
    None
}

/// Decrypted traffic of one direction after its hello.
#[derive(Default)]
struct Decrypted {
    handshake: Vec<DecryptedMessage>,
    application: Vec<DecryptedMessage>,
    key_update: bool,
    error: Option<TlsError>,
}

/// Open records with handshake keys until this side's Finished, then with
/// application keys.
fn decrypt_direction(records: &[TlsRecord], hs: TrafficKeys, app: TrafficKeys) -> Decrypted {
    let mut out = Decrypted::default();
    let mut keys = hs;
    let mut app_keys = Some(app);
    let mut reader = HandshakeReader::new();
    for rec in records {
        if rec.content_type != ContentType::ApplicationData {
            continue;
        }
        let msg = match decrypt_record(rec, &mut keys) {
            Ok(m) => m,
            Err(e) => {
                out.error = Some(e);
                break;
            }
        };
        if let Some(next) = app_keys.as_ref() {
            let mut finished = false;
            if msg.inner_type == InnerType::Handshake {
                reader.push(&msg.plaintext, msg.record_timestamp_ns);
                while let Some(h) = reader.next_message() {
                    finished |= h.msg_type == HandshakeType::Finished as u8;
                }
            }
            out.handshake.push(msg);
            if finished {
                keys = next.clone();
                app_keys = None;
            }
        } else {
            if msg.inner_type == InnerType::Handshake
                && msg.plaintext.first() == Some(&(HandshakeType::KeyUpdate as u8))
            {
                out.key_update = true;
                break;
            }
            if msg.inner_type == InnerType::Alert {
                break;
            }
            out.application.push(msg);
        }
    }
    out
}

impl Decrypted {
    fn failure(&self, cut: bool, otherwise: PartialReason) -> PartialReason {
        if self.key_update {
            PartialReason::KeyUpdate
        } else if self.error.is_some() {
            PartialReason::Undecryptable
        } else if cut {
            PartialReason::Truncated
        } else {
            otherwise
        }
    }
}

impl Trace {
    fn run(&mut self, conn: &TcpConnection, keylog: Option<&KeyLogStore>) -> Result<(), PartialReason> {
        conn.t_syn.ok_or(PartialReason::MissingSyn)?;
        conn.t_synack.ok_or(PartialReason::MissingSynAck)?;

        let client = parse_records(&conn.client_to_server).map_err(|_| PartialReason::MalformedHello)?;
        let (ch, c_next) = leading_handshake(&client.records).ok_or(if is_cut(&client, conn) {
            PartialReason::Truncated
        } else {
            PartialReason::NoClientHello
        })?;
        let hello = parse_client_hello_message(&ch.data).map_err(|_| PartialReason::MalformedHello)?;
        self.found.t_clienthello = Some(ch.timestamp_ns);
        let client_random = hello.client_random;
        self.hello = Some(hello);

        let server = parse_records(&conn.server_to_client).map_err(|_| PartialReason::Undecryptable)?;
        let (sh, s_next) = leading_handshake(&server.records).ok_or(if is_cut(&server, conn) {
            PartialReason::Truncated
        } else {
            PartialReason::NoServerHello
        })?;
        let server_hello = parse_server_hello_message(&sh.data).map_err(|e| match e {
            TlsError::UnsupportedCipherSuite(_) => PartialReason::UnsupportedSuite,
            _ => PartialReason::MalformedHello,
        })?;
        let suite = server_hello.cipher_suite;
        let retry = server_hello.hello_retry_request;
        self.server_hello = Some(server_hello);
        if retry {
            return Ok(());
        }

        let keylog = keylog.ok_or(PartialReason::NoDecrypt)?;
        let keys = |label: SecretLabel| {
            let secret = keylog.get(&client_random, label).ok_or(PartialReason::NoKeys)?;
            derive_traffic_keys(secret, suite).map_err(|_| PartialReason::Undecryptable)
        };
        let c_hs = keys(SecretLabel::ClientHandshakeTrafficSecret)?;
        let s_hs = keys(SecretLabel::ServerHandshakeTrafficSecret)?;
        let c_app = keys(SecretLabel::ClientTrafficSecret0)?;
        let s_app = keys(SecretLabel::ServerTrafficSecret0)?;

        let c = decrypt_direction(&client.records[c_next..], c_hs, c_app);
        let client_cut = is_cut(&client, conn);
        let finished = find_client_finished(&c.handshake)
            .map_err(|_| c.failure(client_cut, PartialReason::FinishedNotFound))?;
        self.found.t_client_finished = Some(finished);
        let t_request = detect_http_request(&c.application)
            .map_err(|_| c.failure(client_cut, PartialReason::NoRequest))?;
        self.found.t_http_get = Some(t_request);

        let s = decrypt_direction(&server.records[s_next..], s_hs, s_app);
        let response = detect_http_response(&s.application, t_request)
            .map_err(|_| s.failure(is_cut(&server, conn), PartialReason::NoResponse))?;
        self.found.response = Some(response);
        Ok(())
    }
}
