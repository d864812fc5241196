use serde::{Deserialize, Serialize};

use super::keys::DecryptedMessage;
use super::record::{ContentType, TlsRecord};
use super::{NamedGroup, TlsError};

const EXT_SUPPORTED_GROUPS: u16 = 10;
const EXT_KEY_SHARE: u16 = 51;

/// SHA-256("HelloRetryRequest"), sent as the ServerHello random of an HRR.
pub const HELLO_RETRY_REQUEST_RANDOM: [u8; 32] = [
    0xCF, 0x21, 0xAD, 0x74, 0xE5, 0x9A, 0x61, 0x11, 0xBE, 0x1D, 0x8C, 0x02, 0x1E, 0x65, 0xB8,
    0x91, 0xC2, 0xA2, 0x11, 0x16, 0x7A, 0xBB, 0x8C, 0x5E, 0x07, 0x9E, 0x09, 0xE2, 0xC8, 0xA8,
    0x33, 0x9C,
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum HandshakeType {
    ClientHello = 1,
    ServerHello = 2,
    NewSessionTicket = 4,
    EncryptedExtensions = 8,
    Certificate = 11,
    CertificateVerify = 15,
    Finished = 20,
    KeyUpdate = 24,
}

/// The TLS 1.3 cipher suites this toolkit can decrypt.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum CipherSuite {
    #[serde(rename = "TLS_AES_128_GCM_SHA256")]
    Aes128GcmSha256,
    #[serde(rename = "TLS_AES_256_GCM_SHA384")]
    Aes256GcmSha384,
    #[serde(rename = "TLS_CHACHA20_POLY1305_SHA256")]
    Chacha20Poly1305Sha256,
}

impl CipherSuite {
    pub const ALL: [CipherSuite; 3] = [
        CipherSuite::Aes128GcmSha256,
        CipherSuite::Aes256GcmSha384,
        CipherSuite::Chacha20Poly1305Sha256,
    ];

    pub fn code(self) -> u16 {
        match self {
            CipherSuite::Aes128GcmSha256 => 0x1301,
            CipherSuite::Aes256GcmSha384 => 0x1302,
            CipherSuite::Chacha20Poly1305Sha256 => 0x1303,
        }
    }

    pub fn from_code(code: u16) -> Result<Self, TlsError> {
        CipherSuite::ALL
            .into_iter()
            .find(|s| s.code() == code)
            .ok_or(TlsError::UnsupportedCipherSuite(code))
    }

    pub fn key_len(self) -> usize {
        match self {
            CipherSuite::Aes128GcmSha256 => 16,
            _ => 32,
        }
    }

    pub fn hash_len(self) -> usize {
        match self {
            CipherSuite::Aes256GcmSha384 => 48,
            _ => 32,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            CipherSuite::Aes128GcmSha256 => "TLS_AES_128_GCM_SHA256",
            CipherSuite::Aes256GcmSha384 => "TLS_AES_256_GCM_SHA384",
            CipherSuite::Chacha20Poly1305Sha256 => "TLS_CHACHA20_POLY1305_SHA256",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct KeyShareEntry {
    pub group: NamedGroup,
    pub key_exchange_length: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClientHelloInfo {
    pub client_random: [u8; 32],
    /// Handshake message length including its 4-byte header.
    pub total_length: usize,
    pub cipher_suites: Vec<u16>,
    pub key_shares: Vec<KeyShareEntry>,
    pub offered_groups: Vec<NamedGroup>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ServerHelloInfo {
    pub server_random: [u8; 32],
    pub selected_group: NamedGroup,
    pub cipher_suite: CipherSuite,
    pub total_length: usize,
    /// Zero for a HelloRetryRequest, which carries no share.
    pub key_exchange_length: usize,
    pub hello_retry_request: bool,
}

struct Cursor<'a> {
    buf: &'a [u8],
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], TlsError> {
        if self.buf.len() < n {
            return Err(TlsError::MalformedHello("field runs past message end"));
        }
        let (head, rest) = self.buf.split_at(n);
        self.buf = rest;
        Ok(head)
    }

    fn u8(&mut self) -> Result<u8, TlsError> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16, TlsError> {
        let b = self.take(2)?;
        Ok(u16::from_be_bytes([b[0], b[1]]))
    }

    fn vec8(&mut self) -> Result<&'a [u8], TlsError> {
        let n = usize::from(self.u8()?);
        self.take(n)
    }

    fn vec16(&mut self) -> Result<&'a [u8], TlsError> {
        let n = usize::from(self.u16()?);
        self.take(n)
    }

    fn is_empty(&self) -> bool {
        self.buf.is_empty()
    }
}

/// Split one handshake message header off `msg`, checking its type.
fn handshake_body(msg: &[u8], expected: HandshakeType) -> Result<&[u8], TlsError> {
    if msg.len() < 4 {
        return Err(TlsError::MalformedHello("short handshake header"));
    }
    if msg[0] != expected as u8 {
        return Err(TlsError::UnexpectedHandshake {
            expected: expected as u8,
            found: msg[0],
        });
    }
    let len = (usize::from(msg[1]) << 16) | (usize::from(msg[2]) << 8) | usize::from(msg[3]);
    if msg.len() - 4 < len {
        return Err(TlsError::MalformedHello("handshake length exceeds data"));
    }
    Ok(&msg[4..4 + len])
}

fn extensions(c: &mut Cursor<'_>) -> Result<Vec<(u16, Vec<u8>)>, TlsError> {
    // A hello without the extensions block is legal (and useless for 1.3).
    if c.is_empty() {
        return Ok(Vec::new());
    }
    let mut block = Cursor { buf: c.vec16()? };
    if !c.is_empty() {
        return Err(TlsError::MalformedHello("trailing bytes after extensions"));
    }
    let mut out = Vec::new();
    while !block.is_empty() {
        let ty = block.u16()?;
        let data = block.vec16()?;
        out.push((ty, data.to_vec()));
    }
    Ok(out)
}

/// Parse the ClientHello at the start of a handshake record.
pub fn parse_client_hello(record: &TlsRecord) -> Result<ClientHelloInfo, TlsError> {
    if record.content_type != ContentType::Handshake {
        return Err(TlsError::MalformedHello("not a handshake record"));
    }
    parse_client_hello_message(&record.body)
}

/// Parse a ClientHello handshake message (type + 24-bit length + body).
pub fn parse_client_hello_message(msg: &[u8]) -> Result<ClientHelloInfo, TlsError> {
    let body = handshake_body(msg, HandshakeType::ClientHello)?;
    let mut c = Cursor { buf: body };
    c.u16()?; // legacy_version
    let client_random: [u8; 32] = c.take(32)?.try_into().unwrap();
    c.vec8()?; // legacy_session_id
    let suites = c.vec16()?;
    if suites.len() % 2 != 0 {
        return Err(TlsError::MalformedHello("odd cipher_suites length"));
    }
    let cipher_suites = suites
        .chunks_exact(2)
        .map(|p| u16::from_be_bytes([p[0], p[1]]))
        .collect();
    c.vec8()?; // legacy_compression_methods

    let mut key_shares = Vec::new();
    let mut offered_groups = Vec::new();
    for (ty, data) in extensions(&mut c)? {
        match ty {
            EXT_SUPPORTED_GROUPS => {
                let mut e = Cursor { buf: &data };
                let list = e.vec16()?;
                if list.len() % 2 != 0 || !e.is_empty() {
                    return Err(TlsError::MalformedHello("bad supported_groups"));
                }
                offered_groups = list
                    .chunks_exact(2)
                    .map(|p| NamedGroup(u16::from_be_bytes([p[0], p[1]])))
                    .collect();
            }
            EXT_KEY_SHARE => {
                let mut e = Cursor { buf: &data };
                let mut list = Cursor { buf: e.vec16()? };
                if !e.is_empty() {
                    return Err(TlsError::MalformedHello("bad key_share"));
                }
                while !list.is_empty() {
                    let group = NamedGroup(list.u16()?);
                    let key = list.vec16()?;
                    key_shares.push(KeyShareEntry {
                        group,
                        key_exchange_length: key.len(),
                    });
                }
            }
            _ => {}
        }
    }
    Ok(ClientHelloInfo {
        client_random,
        total_length: 4 + body.len(),
        cipher_suites,
        key_shares,
        offered_groups,
    })
}

/// Parse the ServerHello at the start of a handshake record.
pub fn parse_server_hello(record: &TlsRecord) -> Result<ServerHelloInfo, TlsError> {
    if record.content_type != ContentType::Handshake {
        return Err(TlsError::MalformedHello("not a handshake record"));
    }
    parse_server_hello_message(&record.body)
}

pub fn parse_server_hello_message(msg: &[u8]) -> Result<ServerHelloInfo, TlsError> {
    let body = handshake_body(msg, HandshakeType::ServerHello)?;
    let mut c = Cursor { buf: body };
    c.u16()?;
    let server_random: [u8; 32] = c.take(32)?.try_into().unwrap();
    c.vec8()?;
    let suite_code = c.u16()?;
    c.u8()?; // legacy_compression_method
    let hello_retry_request = server_random == HELLO_RETRY_REQUEST_RANDOM;

    let mut share = None;
    for (ty, data) in extensions(&mut c)? {
        if ty != EXT_KEY_SHARE {
            continue;
        }
        let mut e = Cursor { buf: &data };
        let group = NamedGroup(e.u16()?);
        let len = if hello_retry_request {
            0
        } else {
            e.vec16()?.len()
        };
        if !e.is_empty() {
            return Err(TlsError::MalformedHello("bad server key_share"));
        }
        share = Some((group, len));
    }
    let cipher_suite = CipherSuite::from_code(suite_code)?;
    let (selected_group, key_exchange_length) = share.ok_or(TlsError::MissingKeyShare)?;
    Ok(ServerHelloInfo {
        server_random,
        selected_group,
        cipher_suite,
        total_length: 4 + body.len(),
        key_exchange_length,
        hello_retry_request,
    })
}

/// A complete handshake message and the arrival time of its first byte.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HandshakeMessage {
    pub msg_type: u8,
    /// Full message including the 4-byte header.
    pub data: Vec<u8>,
    pub timestamp_ns: u64,
}

/// Reassembles handshake messages that may be split across or packed into
/// records.
#[derive(Debug, Default)]
pub struct HandshakeReader {
    buf: Vec<u8>,
    /// (offset into `buf`, timestamp) for each pushed fragment.
    marks: Vec<(usize, u64)>,
}

impl HandshakeReader {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, fragment: &[u8], timestamp_ns: u64) {
        self.marks.push((self.buf.len(), timestamp_ns));
        self.buf.extend_from_slice(fragment);
    }

    /// Next complete message, if one has been fully buffered.
    pub fn next_message(&mut self) -> Option<HandshakeMessage> {
        if self.buf.len() < 4 {
            return None;
        }
        let len = (usize::from(self.buf[1]) << 16)
            | (usize::from(self.buf[2]) << 8)
            | usize::from(self.buf[3]);
        if self.buf.len() < 4 + len {
            return None;
        }
        let ts = self.marks.first().map_or(0, |m| m.1);
        let data: Vec<u8> = self.buf.drain(..4 + len).collect();
        let consumed = data.len();
        // Keep the mark covering the new first byte.
        let keep_from = self
            .marks
            .iter()
            .rposition(|(off, _)| *off <= consumed)
            .unwrap_or(0);
        self.marks.drain(..keep_from);
        for m in &mut self.marks {
            m.0 = m.0.saturating_sub(consumed);
        }
        if self.buf.is_empty() {
            self.marks.clear();
        }
        Some(HandshakeMessage {
            msg_type: data[0],
            data,
            timestamp_ns: ts,
        })
    }

    pub fn is_empty(&self) -> bool {
        self.buf.is_empty()
    }
}

/// Timestamp of the first client Finished among decrypted client records.
pub fn find_client_finished(messages: &[DecryptedMessage]) -> Result<u64, TlsError> {
    let mut reader = HandshakeReader::new();
    for m in messages {
        if m.inner_type != super::keys::InnerType::Handshake {
            continue;
        }
        reader.push(&m.plaintext, m.record_timestamp_ns);
        while let Some(hs) = reader.next_message() {
            if hs.msg_type == HandshakeType::Finished as u8 {
                return Ok(hs.timestamp_ns);
            }
        }
    }
    Err(TlsError::FinishedNotFound)
}
