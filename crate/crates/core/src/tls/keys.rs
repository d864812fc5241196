//! TLS 1.3 traffic-key derivation and record-protection removal.

use aes_gcm::aead::{AeadInOut, KeyInit};
use aes_gcm::{Aes128Gcm, Aes256Gcm};
use chacha20poly1305::ChaCha20Poly1305;
use hkdf::Hkdf;
use sha2::{Sha256, Sha384};

use super::handshake::CipherSuite;
use super::record::{ContentType, TlsRecord};
use super::TlsError;

/// HKDF-Expand-Label(secret, label, context, length) with the `"tls13 "`
/// prefix. `secret` is used directly as the PRK.
pub fn hkdf_expand_label(
    suite: CipherSuite,
    secret: &[u8],
    label: &str,
    context: &[u8],
    length: usize,
) -> Result<Vec<u8>, TlsError> {
    let full_label = format!("tls13 {label}");
    let mut info = Vec::with_capacity(4 + full_label.len() + context.len());
    info.extend_from_slice(&(length as u16).to_be_bytes());
    info.push(full_label.len() as u8);
    info.extend_from_slice(full_label.as_bytes());
    info.push(context.len() as u8);
    info.extend_from_slice(context);

    let mut okm = vec![0u8; length];
    let mismatch = TlsError::LengthMismatch {
        got: secret.len(),
        want: suite.hash_len(),
    };
    match suite.hash_len() {
        48 => Hkdf::<Sha384>::from_prk(secret)
            .map_err(|_| mismatch.clone())?
            .expand(&info, &mut okm)
            .map_err(|_| mismatch)?,
        _ => Hkdf::<Sha256>::from_prk(secret)
            .map_err(|_| mismatch.clone())?
            .expand(&info, &mut okm)
            .map_err(|_| mismatch)?,
    }
    Ok(okm)
}

/// Write key, static IV and record sequence number for one direction and
/// epoch.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrafficKeys {
    pub suite: CipherSuite,
    pub key: Vec<u8>,
    pub iv: [u8; 12],
    pub sequence: u64,
}

impl TrafficKeys {
    /// Per-record nonce: the IV XOR the 64-bit sequence number, left-padded.
    pub fn nonce(&self) -> [u8; 12] {
        let mut n = self.iv;
        for (b, s) in n[4..].iter_mut().zip(self.sequence.to_be_bytes()) {
            *b ^= s;
        }
        n
    }
}

pub fn derive_traffic_keys(secret: &[u8], suite: CipherSuite) -> Result<TrafficKeys, TlsError> {
    if secret.len() != suite.hash_len() {
        return Err(TlsError::LengthMismatch {
            got: secret.len(),
            want: suite.hash_len(),
        });
    }
    let key = hkdf_expand_label(suite, secret, "key", &[], suite.key_len())?;
    let iv = hkdf_expand_label(suite, secret, "iv", &[], 12)?;
    Ok(TrafficKeys {
        suite,
        key,
        iv: iv.try_into().unwrap(),
        sequence: 0,
    })
}

/// Real content type found at the end of a TLSInnerPlaintext.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum InnerType {
    Handshake,
    ApplicationData,
    Alert,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DecryptedMessage {
    pub inner_type: InnerType,
    /// Content without the inner type octet and padding.
    pub plaintext: Vec<u8>,
    pub record_timestamp_ns: u64,
    pub stream_offset: u64,
}

/// Open a protected record. On success the sequence number advances by one;
/// on failure it is left untouched.
pub fn decrypt_record(
    record: &TlsRecord,
    keys: &mut TrafficKeys,
) -> Result<DecryptedMessage, TlsError> {
    if record.content_type != ContentType::ApplicationData {
        return Err(TlsError::NotProtected);
    }
    let aad = record.header();
    let nonce = keys.nonce();
    let mut buf = record.body.clone();
    let opened = match keys.suite {
        CipherSuite::Aes128GcmSha256 => Aes128Gcm::new_from_slice(&keys.key)
            .map_err(|_| TlsError::AuthFailure)?
            .decrypt_in_place(&nonce.into(), &aad, &mut buf),
        CipherSuite::Aes256GcmSha384 => Aes256Gcm::new_from_slice(&keys.key)
            .map_err(|_| TlsError::AuthFailure)?
            .decrypt_in_place(&nonce.into(), &aad, &mut buf),
        CipherSuite::Chacha20Poly1305Sha256 => ChaCha20Poly1305::new_from_slice(&keys.key)
            .map_err(|_| TlsError::AuthFailure)?
            .decrypt_in_place(&nonce.into(), &aad, &mut buf),
    };
    opened.map_err(|_| TlsError::AuthFailure)?;
    keys.sequence += 1;

    let end = buf
        .iter()
        .rposition(|b| *b != 0)
        .ok_or(TlsError::EmptyInnerPlaintext)?;
    let inner_type = match buf[end] {
        22 => InnerType::Handshake,
        23 => InnerType::ApplicationData,
        21 => InnerType::Alert,
        other => return Err(TlsError::BadInnerType(other)),
    };
    buf.truncate(end);
    Ok(DecryptedMessage {
        inner_type,
        plaintext: buf,
        record_timestamp_ns: record.timestamp_ns,
        stream_offset: record.stream_offset,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    // Simple 1-RTT handshake trace, client handshake traffic secret.
    const RFC8448_C_HS_SECRET: &str =
        "b3eddb126e067f35a780b3abf45e2d8f3b1a950738f52e9600746a0e27a55a21";
    const RFC8448_C_HS_KEY: &str = "dbfaa693d1762c5b666af5d950258d01";
    const RFC8448_C_HS_IV: &str = "5bd3c71b836e0b76bb73265f";
    const RFC8448_S_HS_SECRET: &str =
        "b67b7d690cc16c4e75e54213cb2d37b4e9c912bcded9105d42befd59d391ad38";
    const RFC8448_S_HS_KEY: &str = "3fce516009c21727d0f2e4e86ee403bc";
    const RFC8448_S_HS_IV: &str = "5d313eb2671276ee13000b30";

    #[test]
    fn rfc8448_handshake_keys() {
        for (secret, key, iv) in [
            (RFC8448_C_HS_SECRET, RFC8448_C_HS_KEY, RFC8448_C_HS_IV),
            (RFC8448_S_HS_SECRET, RFC8448_S_HS_KEY, RFC8448_S_HS_IV),
        ] {
            let k = derive_traffic_keys(&hex::decode(secret).unwrap(), CipherSuite::Aes128GcmSha256)
                .unwrap();
            assert_eq!(hex::encode(&k.key), key);
            assert_eq!(hex::encode(k.iv), iv);
            assert_eq!(k.sequence, 0);
        }
    }

    #[test]
    fn secret_length_must_match_suite() {
        assert_eq!(
            derive_traffic_keys(&[0; 32], CipherSuite::Aes256GcmSha384),
            Err(TlsError::LengthMismatch { got: 32, want: 48 })
        );
        assert!(derive_traffic_keys(&[0; 48], CipherSuite::Aes128GcmSha256).is_err());
        let k = derive_traffic_keys(&[0; 48], CipherSuite::Aes256GcmSha384).unwrap();
        assert_eq!(k.key.len(), 32);
    }

    #[test]
    fn distinct_secrets_give_distinct_keys() {
        let a = derive_traffic_keys(&[1; 32], CipherSuite::Chacha20Poly1305Sha256).unwrap();
        let b = derive_traffic_keys(&[2; 32], CipherSuite::Chacha20Poly1305Sha256).unwrap();
        assert_ne!(a.key, b.key);
        assert_ne!(a.iv, b.iv);
    }

    #[test]
    fn nonce_xors_sequence_into_low_bytes() {
        let mut k = derive_traffic_keys(&[0; 32], CipherSuite::Aes128GcmSha256).unwrap();
        k.iv = [0xff; 12];
        k.sequence = 0x0102;
        assert_eq!(
            k.nonce(),
            [0xff, 0xff, 0xff, 0xff, 0xff, 0xff, 0xff, 0xff, 0xff, 0xff, 0xfe, 0xfd]
        );
    }

    #[test]
    fn non_application_records_are_rejected() {
        let mut k = derive_traffic_keys(&[0; 32], CipherSuite::Aes128GcmSha256).unwrap();
        let rec = TlsRecord {
            content_type: ContentType::Handshake,
            version: 0x0303,
            body: vec![0; 40],
            stream_offset: 0,
            timestamp_ns: 0,
        };
        assert_eq!(decrypt_record(&rec, &mut k), Err(TlsError::NotProtected));
    }
}
