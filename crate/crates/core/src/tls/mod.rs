//! TLS 1.3 record parsing, hello inspection, key schedule and record
//! decryption: just enough of the protocol to timestamp a 1-RTT handshake
//! from a capture and its key log.

mod groups;
mod handshake;
mod keys;
mod record;

use thiserror::Error;

pub use groups::{expected_key_share_size, expected_server_share_size, hybrid_parts, NamedGroup};
pub use handshake::{
    find_client_finished, parse_client_hello, parse_client_hello_message, parse_server_hello,
    parse_server_hello_message, CipherSuite, ClientHelloInfo, HandshakeMessage, HandshakeReader,
    HandshakeType, KeyShareEntry, ServerHelloInfo, HELLO_RETRY_REQUEST_RANDOM,
};
pub use keys::{
    decrypt_record, derive_traffic_keys, hkdf_expand_label, DecryptedMessage, InnerType, TrafficKeys,
};
pub use record::{parse_records, ContentType, RecordStream, TlsRecord, MAX_CIPHERTEXT_LEN};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TlsError {
    #[error("bad record header at stream offset {offset}")]
    BadRecordHeader { offset: u64 },
    #[error("record of {len} bytes at offset {offset} exceeds the TLS limit")]
    OversizeRecord { offset: u64, len: usize },
    #[error("malformed hello: {0}")]
    MalformedHello(&'static str),
    #[error("expected handshake type {expected}, found {found}")]
    UnexpectedHandshake { expected: u8, found: u8 },
    #[error("hello carries no key_share")]
    MissingKeyShare,
    #[error("unsupported cipher suite {0:#06x}")]
    UnsupportedCipherSuite(u16),
    #[error("secret is {got} bytes, suite needs {want}")]
    LengthMismatch { got: usize, want: usize },
    #[error("record is not protected application data")]
    NotProtected,
    #[error("AEAD authentication failed")]
    AuthFailure,
    #[error("inner plaintext is empty")]
    EmptyInnerPlaintext,
    #[error("unknown inner content type {0}")]
    BadInnerType(u8),
    #[error("client Finished not found")]
    FinishedNotFound,
    #[error("unknown key exchange group {0:#06x}")]
    UnknownGroup(u16),
}
