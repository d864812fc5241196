use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::TlsError;

const X25519_SHARE: usize = 32;
const MLKEM512_EK: usize = 800;
const MLKEM768_EK: usize = 1184;
const MLKEM1024_EK: usize = 1568;
const MLKEM512_CT: usize = 768;
const MLKEM768_CT: usize = 1088;
const MLKEM1024_CT: usize = 1568;

/// A TLS `NamedGroup` code point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NamedGroup(pub u16);

impl NamedGroup {
    pub const SECP256R1: NamedGroup = NamedGroup(0x0017);
    pub const X25519: NamedGroup = NamedGroup(0x001D);
    pub const MLKEM512: NamedGroup = NamedGroup(0x0200);
    pub const MLKEM768: NamedGroup = NamedGroup(0x0201);
    pub const MLKEM1024: NamedGroup = NamedGroup(0x0202);
    pub const X25519_MLKEM768: NamedGroup = NamedGroup(0x11EC);
    /// No IANA assignment; this is the oqs-provider code point.
    pub const X25519_MLKEM512: NamedGroup = NamedGroup(0x2F39);

    /// Groups with a known key_share size, classical first.
    pub const KNOWN: [NamedGroup; 6] = [
        NamedGroup::X25519,
        NamedGroup::X25519_MLKEM512,
        NamedGroup::X25519_MLKEM768,
        NamedGroup::MLKEM512,
        NamedGroup::MLKEM768,
        NamedGroup::MLKEM1024,
    ];

    pub fn name(self) -> Option<&'static str> {
        Some(match self {
            NamedGroup::SECP256R1 => "secp256r1",
            NamedGroup::X25519 => "x25519",
            NamedGroup::MLKEM512 => "mlkem512",
            NamedGroup::MLKEM768 => "mlkem768",
            NamedGroup::MLKEM1024 => "mlkem1024",
            NamedGroup::X25519_MLKEM512 => "x25519_mlkem512",
            NamedGroup::X25519_MLKEM768 => "x25519_mlkem768",
            _ => return None,
        })
    }

    /// Accepts the names printed by [`NamedGroup::name`] (any case, with or
    /// without underscores) and hex code points such as `0x11ec`.
    pub fn from_name(s: &str) -> Option<Self> {
        let norm: String = s
            .chars()
            .filter(|c| *c != '_' && *c != '-')
            .flat_map(char::to_lowercase)
            .collect();
        if let Some(hex) = norm.strip_prefix("0x") {
            return u16::from_str_radix(hex, 16).ok().map(NamedGroup);
        }
        [NamedGroup::SECP256R1]
            .into_iter()
            .chain(NamedGroup::KNOWN)
            .find(|g| g.name().map(|n| n.replace('_', "")) == Some(norm.clone()))
    }
}

impl fmt::Display for NamedGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.name() {
            Some(n) => f.write_str(n),
            None => write!(f, "{:#06x}", self.0),
        }
    }
}

impl Serialize for NamedGroup {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for NamedGroup {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        NamedGroup::from_name(&s)
            .ok_or_else(|| serde::de::Error::custom(format!("unknown group `{s}`")))
    }
}

/// Classical and ML-KEM encapsulation-key sizes of a hybrid group.
pub fn hybrid_parts(group: NamedGroup) -> Option<(NamedGroup, usize)> {
    match group {
        NamedGroup::X25519_MLKEM512 => Some((NamedGroup::X25519, MLKEM512_EK)),
        NamedGroup::X25519_MLKEM768 => Some((NamedGroup::X25519, MLKEM768_EK)),
        _ => None,
    }
}

/// Size of the client's key_share payload for `group`. Fixed per group.
pub fn expected_key_share_size(group: NamedGroup) -> Result<usize, TlsError> {
    match group {
        NamedGroup::X25519 => Ok(X25519_SHARE),
        NamedGroup::MLKEM512 => Ok(MLKEM512_EK),
        NamedGroup::MLKEM768 => Ok(MLKEM768_EK),
        NamedGroup::MLKEM1024 => Ok(MLKEM1024_EK),
        NamedGroup::X25519_MLKEM512 => Ok(X25519_SHARE + MLKEM512_EK),
        NamedGroup::X25519_MLKEM768 => Ok(X25519_SHARE + MLKEM768_EK),
        other => Err(TlsError::UnknownGroup(other.0)),
    }
}

/// Size of the server's key_share payload (ML-KEM ciphertext for KEM groups).
pub fn expected_server_share_size(group: NamedGroup) -> Result<usize, TlsError> {
    match group {
        NamedGroup::X25519 => Ok(X25519_SHARE),
        NamedGroup::MLKEM512 => Ok(MLKEM512_CT),
        NamedGroup::MLKEM768 => Ok(MLKEM768_CT),
        NamedGroup::MLKEM1024 => Ok(MLKEM1024_CT),
        NamedGroup::X25519_MLKEM512 => Ok(X25519_SHARE + MLKEM512_CT),
        NamedGroup::X25519_MLKEM768 => Ok(X25519_SHARE + MLKEM768_CT),
        other => Err(TlsError::UnknownGroup(other.0)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn client_share_sizes() {
        assert_eq!(expected_key_share_size(NamedGroup::X25519), Ok(32));
        assert_eq!(expected_key_share_size(NamedGroup::X25519_MLKEM512), Ok(832));
        assert_eq!(expected_key_share_size(NamedGroup::X25519_MLKEM768), Ok(1216));
        assert_eq!(expected_key_share_size(NamedGroup::MLKEM512), Ok(800));
        assert_eq!(expected_key_share_size(NamedGroup::MLKEM1024), Ok(1568));
        assert_eq!(
            expected_key_share_size(NamedGroup::SECP256R1),
            Err(TlsError::UnknownGroup(0x17))
        );
    }

    #[test]
    fn hybrid_shares_add_up() {
        for g in NamedGroup::KNOWN {
            if let Some((classical, kem)) = hybrid_parts(g) {
                assert_eq!(
                    expected_key_share_size(g).unwrap(),
                    expected_key_share_size(classical).unwrap() + kem
                );
            }
        }
        assert_eq!(32 + 800, 832);
    }

    #[test]
    fn names_round_trip() {
        for g in NamedGroup::KNOWN {
            assert_eq!(NamedGroup::from_name(g.name().unwrap()), Some(g));
        }
        assert_eq!(
            NamedGroup::from_name("X25519MLKEM768"),
            Some(NamedGroup::X25519_MLKEM768)
        );
        assert_eq!(NamedGroup::from_name("0x11EC"), Some(NamedGroup::X25519_MLKEM768));
        assert_eq!(NamedGroup(0x1234).to_string(), "0x1234");
        assert_eq!(NamedGroup::from_name("ffdhe2048"), None);
    }
}
