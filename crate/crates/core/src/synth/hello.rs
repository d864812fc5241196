//! Wire rendering of the handshake messages the generator emits.

use crate::tls::{ClientHelloInfo, HandshakeType, NamedGroup, ServerHelloInfo, HELLO_RETRY_REQUEST_RANDOM};

const EXT_SUPPORTED_GROUPS: u16 = 10;
const EXT_SIGNATURE_ALGORITHMS: u16 = 13;
const EXT_SUPPORTED_VERSIONS: u16 = 43;
const EXT_KEY_SHARE: u16 = 51;
const TLS13: u16 = 0x0304;
const SIGNATURE_SCHEMES: [u16; 3] = [0x0804, 0x0403, 0x0805];

/// Deterministic stand-in for key-exchange material of `len` bytes.
pub fn filler(group: NamedGroup, len: usize) -> Vec<u8> {
    (0..len)
        .map(|i| ((i * 131 + usize::from(group.0)) % 251) as u8)
        .collect()
}

fn put_u16(out: &mut Vec<u8>, v: u16) {
    out.extend_from_slice(&v.to_be_bytes());
}

fn put_u24(out: &mut Vec<u8>, v: usize) {
    out.extend_from_slice(&(v as u32).to_be_bytes()[1..]);
}

fn vec16(out: &mut Vec<u8>, data: &[u8]) {
    put_u16(out, data.len() as u16);
    out.extend_from_slice(data);
}

fn extension(out: &mut Vec<u8>, ty: u16, data: &[u8]) {
    put_u16(out, ty);
    vec16(out, data);
}

/// Wrap a body in the 4-byte handshake header.
pub fn handshake_message(msg_type: u8, body: &[u8]) -> Vec<u8> {
    let mut v = Vec::with_capacity(4 + body.len());
    v.push(msg_type);
    put_u24(&mut v, body.len());
    v.extend_from_slice(body);
    v
}

/// Render a ClientHello carrying the suites, groups and key shares listed
/// in `info`. Share contents are filler bytes of the listed lengths.
/// `info.total_length` is ignored; the result's length is authoritative.
pub fn render_client_hello(info: &ClientHelloInfo) -> Vec<u8> {
    let mut body = Vec::new();
    put_u16(&mut body, 0x0303);
    body.extend_from_slice(&info.client_random);
    let session_id: Vec<u8> = info.client_random.iter().rev().copied().collect();
    body.push(session_id.len() as u8);
    body.extend_from_slice(&session_id);
    let suites: Vec<u8> = info.cipher_suites.iter().flat_map(|s| s.to_be_bytes()).collect();
    vec16(&mut body, &suites);
    body.extend_from_slice(&[1, 0]);

    let mut exts = Vec::new();
    if !info.offered_groups.is_empty() {
        let groups: Vec<u8> = info.offered_groups.iter().flat_map(|g| g.0.to_be_bytes()).collect();
        let mut data = Vec::new();
        vec16(&mut data, &groups);
        extension(&mut exts, EXT_SUPPORTED_GROUPS, &data);
    }
    let schemes: Vec<u8> = SIGNATURE_SCHEMES.iter().flat_map(|s| s.to_be_bytes()).collect();
    let mut data = Vec::new();
    vec16(&mut data, &schemes);
    extension(&mut exts, EXT_SIGNATURE_ALGORITHMS, &data);
    let [v0, v1] = TLS13.to_be_bytes();
    extension(&mut exts, EXT_SUPPORTED_VERSIONS, &[2, v0, v1]);
    if !info.key_shares.is_empty() {
        let mut list = Vec::new();
        for ks in &info.key_shares {
            put_u16(&mut list, ks.group.0);
            vec16(&mut list, &filler(ks.group, ks.key_exchange_length));
        }
        let mut data = Vec::new();
        vec16(&mut data, &list);
        extension(&mut exts, EXT_KEY_SHARE, &data);
    }
    vec16(&mut body, &exts);
    handshake_message(HandshakeType::ClientHello as u8, &body)
}

/// Render a ServerHello (or HelloRetryRequest when flagged) for `info`.
pub fn render_server_hello(info: &ServerHelloInfo) -> Vec<u8> {
    let mut body = Vec::new();
    put_u16(&mut body, 0x0303);
    if info.hello_retry_request {
        body.extend_from_slice(&HELLO_RETRY_REQUEST_RANDOM);
    } else {
        body.extend_from_slice(&info.server_random);
    }
    body.push(0);
    put_u16(&mut body, info.cipher_suite.code());
    body.push(0);

    let mut exts = Vec::new();
    extension(&mut exts, EXT_SUPPORTED_VERSIONS, &TLS13.to_be_bytes());
    let mut share = Vec::new();
    put_u16(&mut share, info.selected_group.0);
    if !info.hello_retry_request {
        vec16(&mut share, &filler(info.selected_group, info.key_exchange_length));
    }
    extension(&mut exts, EXT_KEY_SHARE, &share);
    vec16(&mut body, &exts);
    handshake_message(HandshakeType::ServerHello as u8, &body)
}

/// EncryptedExtensions followed by a Certificate holding one dummy entry.
pub fn render_server_parameters(cert_len: usize) -> Vec<u8> {
    let mut out = handshake_message(HandshakeType::EncryptedExtensions as u8, &[0, 0]);
    let cert: Vec<u8> = (0..cert_len).map(|i| (i % 256) as u8).collect();
    let mut entry = Vec::new();
    put_u24(&mut entry, cert.len());
    entry.extend_from_slice(&cert);
    put_u16(&mut entry, 0);
    let mut body = vec![0];
    put_u24(&mut body, entry.len());
    body.extend_from_slice(&entry);
    out.extend(handshake_message(HandshakeType::Certificate as u8, &body));
    out
}

pub fn render_certificate_verify(sig_len: usize) -> Vec<u8> {
    let mut body = Vec::new();
    put_u16(&mut body, 0x0804);
    vec16(&mut body, &vec![0x5c; sig_len]);
    handshake_message(HandshakeType::CertificateVerify as u8, &body)
}

pub fn render_finished(verify_len: usize, fill: u8) -> Vec<u8> {
    handshake_message(HandshakeType::Finished as u8, &vec![fill; verify_len])
}

pub fn render_new_session_ticket(ticket_len: usize) -> Vec<u8> {
    let mut body = Vec::new();
    body.extend_from_slice(&7200u32.to_be_bytes());
    body.extend_from_slice(&0x0badcafeu32.to_be_bytes());
    body.extend_from_slice(&[1, 0]);
    vec16(&mut body, &vec![0x7a; ticket_len]);
    put_u16(&mut body, 0);
    handshake_message(HandshakeType::NewSessionTicket as u8, &body)
}
