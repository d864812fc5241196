//! Record protection on the sending side. Written apart from the
//! analyzer's decryption path so that a round trip checks both.

use aes_gcm::aead::{AeadInOut, KeyInit};
use aes_gcm::{Aes128Gcm, Aes256Gcm};
use chacha20poly1305::ChaCha20Poly1305;

use crate::tls::{CipherSuite, TrafficKeys};

const TAG_LEN: usize = 16;

/// Build the per-record nonce from the static IV and a counter.
fn record_nonce(iv: &[u8; 12], counter: u64) -> [u8; 12] {
    let mut padded = [0u8; 12];
    padded[4..].copy_from_slice(&counter.to_be_bytes());
    let mut nonce = [0u8; 12];
    for i in 0..12 {
        nonce[i] = iv[i] ^ padded[i];
    }
    nonce
}

/// Protect `content` with inner type `inner_type` and `padding` zero bytes
/// using counter `counter`. Returns the full wire record.
pub fn seal_record(
    keys: &TrafficKeys,
    counter: u64,
    inner_type: u8,
    content: &[u8],
    padding: usize,
) -> Vec<u8> {
    let mut inner = Vec::with_capacity(content.len() + 1 + padding + TAG_LEN);
    inner.extend_from_slice(content);
    inner.push(inner_type);
    inner.resize(inner.len() + padding, 0);

    let ct_len = inner.len() + TAG_LEN;
    let header = [23, 3, 3, (ct_len >> 8) as u8, ct_len as u8];
    let nonce = record_nonce(&keys.iv, counter);
    let sealed = match keys.suite {
        CipherSuite::Aes128GcmSha256 => Aes128Gcm::new_from_slice(&keys.key)
            .expect("key length fixed by suite")
            .encrypt_in_place(&nonce.into(), &header, &mut inner),
        CipherSuite::Aes256GcmSha384 => Aes256Gcm::new_from_slice(&keys.key)
            .expect("key length fixed by suite")
            .encrypt_in_place(&nonce.into(), &header, &mut inner),
        CipherSuite::Chacha20Poly1305Sha256 => ChaCha20Poly1305::new_from_slice(&keys.key)
            .expect("key length fixed by suite")
            .encrypt_in_place(&nonce.into(), &header, &mut inner),
    };
    sealed.expect("record within AEAD limits");
    let mut out = header.to_vec();
    out.extend_from_slice(&inner);
    out
}
