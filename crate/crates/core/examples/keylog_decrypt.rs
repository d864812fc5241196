//! Decrypt one direction of a TLS 1.3 connection with secrets from an NSS
//! key log, printing every handshake message and the HTTP response head.

use layertrace::capture::{decode_frame, parse_keylog, Decoded, SecretLabel};
use layertrace::synth::{generate, ConnectionSpec, ScenarioSpec};
use layertrace::tcp::assemble_connections;
use layertrace::tls::{
    decrypt_record, derive_traffic_keys, parse_records, parse_server_hello, ContentType,
    HandshakeReader, InnerType,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut spec = ConnectionSpec::clean([0, 400_000, 2_000_000, 8_000_000, 9_000_000, 18_000_000]);
    spec.cipher_suite = layertrace::tls::CipherSuite::Chacha20Poly1305Sha256;
    let out = generate(&ScenarioSpec { connections: vec![spec] })?;

    // Go through the text form, as a real SSLKEYLOGFILE would be read.
    let keylog = parse_keylog(&out.keylog_text());
    let packets = out.frames.iter().filter_map(|f| match decode_frame(f) {
        Ok(Decoded::Tcp(p)) => Some(p),
        _ => None,
    });
    let conn = assemble_connections(packets).remove(0);
    let client_random: [u8; 32] = hex::decode(&out.truth.connections[0].client_random)?
        .try_into()
        .map_err(|_| "client_random is 32 bytes")?;

    let server = parse_records(&conn.server_to_client)?;
    let hello = parse_server_hello(&server.records[0])?;
    println!("ServerHello: {} with {}", hello.cipher_suite.name(), hello.selected_group);

    let secret = |label| keylog.get(&client_random, label).ok_or("secret missing from key log");
    let mut keys = derive_traffic_keys(secret(SecretLabel::ServerHandshakeTrafficSecret)?, hello.cipher_suite)?;
    let mut app_keys = None;
    let mut reader = HandshakeReader::new();
    for record in server.records.iter().filter(|r| r.content_type == ContentType::ApplicationData) {
        let keys = app_keys.as_mut().unwrap_or(&mut keys);
        let msg = decrypt_record(record, keys)?;
        match msg.inner_type {
            InnerType::Handshake => {
                reader.push(&msg.plaintext, msg.record_timestamp_ns);
                while let Some(hs) = reader.next_message() {
                    println!("  {:>9} ns  handshake type {:>2}, {} bytes", hs.timestamp_ns, hs.msg_type, hs.data.len());
                    if hs.msg_type == 20 {
                        app_keys = Some(derive_traffic_keys(secret(SecretLabel::ServerTrafficSecret0)?, hello.cipher_suite)?);
                    }
                }
            }
            InnerType::ApplicationData => {
                let text = String::from_utf8_lossy(&msg.plaintext);
                if let Some(head) = text.split("\r\n\r\n").next().filter(|_| text.starts_with("HTTP/")) {
                    println!("  {:>9} ns  response head:\n{head}", msg.record_timestamp_ns);
                }
            }
            InnerType::Alert => println!("  alert {:?}", msg.plaintext),
        }
    }
    Ok(())
}
