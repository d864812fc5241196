//! NSS key log (`SSLKEYLOGFILE`) parsing for TLS 1.3 traffic secrets.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};

use log::warn;

pub type ClientRandom = [u8; 32];

/// The TLS 1.3 secrets this toolkit needs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum SecretLabel {
    ClientHandshakeTrafficSecret,
    ServerHandshakeTrafficSecret,
    ClientTrafficSecret0,
    ServerTrafficSecret0,
}

impl SecretLabel {
    pub const ALL: [SecretLabel; 4] = [
        SecretLabel::ClientHandshakeTrafficSecret,
        SecretLabel::ServerHandshakeTrafficSecret,
        SecretLabel::ClientTrafficSecret0,
        SecretLabel::ServerTrafficSecret0,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            SecretLabel::ClientHandshakeTrafficSecret => "CLIENT_HANDSHAKE_TRAFFIC_SECRET",
            SecretLabel::ServerHandshakeTrafficSecret => "SERVER_HANDSHAKE_TRAFFIC_SECRET",
            SecretLabel::ClientTrafficSecret0 => "CLIENT_TRAFFIC_SECRET_0",
            SecretLabel::ServerTrafficSecret0 => "SERVER_TRAFFIC_SECRET_0",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        SecretLabel::ALL.into_iter().find(|l| l.as_str() == s)
    }
}

impl fmt::Display for SecretLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A line that could not be used.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MalformedLine {
    /// 1-based line number.
    pub line: usize,
    pub reason: &'static str,
}

/// Counters for everything `parse_keylog` skipped or overrode.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct KeyLogDiagnostics {
    pub malformed: Vec<MalformedLine>,
    pub unknown_labels: usize,
    pub duplicates: usize,
}

/// Traffic secrets indexed by `(client_random, label)`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct KeyLogStore {
    secrets: BTreeMap<(ClientRandom, SecretLabel), Vec<u8>>,
    pub diagnostics: KeyLogDiagnostics,
}

impl KeyLogStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Insert a secret, returning the one it replaced.
    ///
    /// # Panics
    /// If the secret is not 32 or 48 bytes long.
    pub fn insert(
        &mut self,
        client_random: ClientRandom,
        label: SecretLabel,
        secret: Vec<u8>,
    ) -> Option<Vec<u8>> {
        assert!(
            matches!(secret.len(), 32 | 48),
            "traffic secrets are 32 or 48 bytes"
        );
        self.secrets.insert((client_random, label), secret)
    }

    pub fn get(&self, client_random: &ClientRandom, label: SecretLabel) -> Option<&[u8]> {
        self.secrets
            .get(&(*client_random, label))
            .map(Vec::as_slice)
    }

    pub fn contains_client(&self, client_random: &ClientRandom) -> bool {
        SecretLabel::ALL
            .iter()
            .any(|l| self.secrets.contains_key(&(*client_random, *l)))
    }

    pub fn len(&self) -> usize {
        self.secrets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.secrets.is_empty()
    }

    /// Entries in `(client_random, label)` order.
    pub fn iter(&self) -> impl Iterator<Item = (&ClientRandom, SecretLabel, &[u8])> {
        self.secrets
            .iter()
            .map(|((cr, label), s)| (cr, *label, s.as_slice()))
    }
}

/// Parse NSS key-log text. Never fails: bad lines are recorded in
/// [`KeyLogStore::diagnostics`] and skipped.
pub fn parse_keylog(text: &str) -> KeyLogStore {
    let mut store = KeyLogStore::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let lineno = idx + 1;
        let fields: Vec<&str> = line.split_ascii_whitespace().collect();
        let bad = |reason| MalformedLine {
            line: lineno,
            reason,
        };
        let [label, random_hex, secret_hex] = fields[..] else {
            store.diagnostics.malformed.push(bad("expected three fields"));
            continue;
        };
        let Some(label) = SecretLabel::parse(label) else {
            // CLIENT_RANDOM, EXPORTER_SECRET, early secrets ...
            store.diagnostics.unknown_labels += 1;
            continue;
        };
        let client_random: ClientRandom = match hex::decode(random_hex) {
            Ok(v) => match v.try_into() {
                Ok(cr) => cr,
                Err(_) => {
                    store
                        .diagnostics
                        .malformed
                        .push(bad("client_random is not 32 bytes"));
                    continue;
                }
            },
            Err(_) => {
                store.diagnostics.malformed.push(bad("invalid client_random hex"));
                continue;
            }
        };
        let secret = match hex::decode(secret_hex) {
            Ok(s) if matches!(s.len(), 32 | 48) => s,
            Ok(_) => {
                store
                    .diagnostics
                    .malformed
                    .push(bad("secret is not 32 or 48 bytes"));
                continue;
            }
            Err(_) => {
                store.diagnostics.malformed.push(bad("invalid secret hex"));
                continue;
            }
        };
        if store.insert(client_random, label, secret).is_some() {
            store.diagnostics.duplicates += 1;
        }
    }
    let d = &store.diagnostics;
    if !d.malformed.is_empty() || d.unknown_labels > 0 || d.duplicates > 0 {
        warn!(
            "keylog: {} malformed, {} unknown labels, {} duplicates (last wins)",
            d.malformed.len(),
            d.unknown_labels,
            d.duplicates
        );
    }
    store
}

/// Render a store back to key-log text, one line per secret.
pub fn render_keylog(store: &KeyLogStore) -> String {
    let mut out = String::new();
    for (cr, label, secret) in store.iter() {
        let _ = writeln!(out, "{label} {} {}", hex::encode(cr), hex::encode(secret));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_input() {
        let s = parse_keylog("");
        assert!(s.is_empty());
        assert_eq!(s.diagnostics, KeyLogDiagnostics::default());
    }

    #[test]
    fn single_sha384_secret() {
        let line = format!(
            "CLIENT_HANDSHAKE_TRAFFIC_SECRET {} {}\n",
            "a".repeat(64),
            "b".repeat(96)
        );
        let s = parse_keylog(&line);
        assert_eq!(s.len(), 1);
        let secret = s
            .get(&[0xaa; 32], SecretLabel::ClientHandshakeTrafficSecret)
            .unwrap();
        assert_eq!(secret, &[0xbb; 48][..]);
    }

    #[test]
    fn comments_blank_and_unknown_lines() {
        let text = format!(
            "# comment\n\nCLIENT_RANDOM {r} {s48}\nEXPORTER_SECRET {r} {s32}\nSERVER_TRAFFIC_SECRET_0 {r} {s32}\n",
            r = "01".repeat(32),
            s32 = "02".repeat(32),
            s48 = "03".repeat(48)
        );
        let s = parse_keylog(&text);
        assert_eq!(s.len(), 1);
        assert_eq!(s.diagnostics.unknown_labels, 2);
        assert!(s.diagnostics.malformed.is_empty());
    }

    #[test]
    fn malformed_lines_are_recorded() {
        let text = format!(
            "CLIENT_TRAFFIC_SECRET_0 {r}\nCLIENT_TRAFFIC_SECRET_0 {r} abc\nCLIENT_TRAFFIC_SECRET_0 {short} {s}\nCLIENT_TRAFFIC_SECRET_0 {r} {odd}\n",
            r = "00".repeat(32),
            short = "00".repeat(31),
            s = "11".repeat(32),
            odd = "1".repeat(63),
        );
        let s = parse_keylog(&text);
        assert!(s.is_empty());
        let lines: Vec<_> = s.diagnostics.malformed.iter().map(|m| m.line).collect();
        assert_eq!(lines, vec![1, 2, 3, 4]);
    }

    #[test]
    fn duplicates_last_wins_and_hex_is_case_insensitive() {
        let r = "AB".repeat(32);
        let text = format!(
            "SERVER_HANDSHAKE_TRAFFIC_SECRET {r} {}\nSERVER_HANDSHAKE_TRAFFIC_SECRET {} {}\n",
            "01".repeat(32),
            r.to_lowercase(),
            "Fe".repeat(32)
        );
        let s = parse_keylog(&text);
        assert_eq!(s.len(), 1);
        assert_eq!(s.diagnostics.duplicates, 1);
        assert_eq!(
            s.get(&[0xab; 32], SecretLabel::ServerHandshakeTrafficSecret),
            Some(&[0xfe; 32][..])
        );
    }

    #[test]
    fn render_then_parse() {
        let mut store = KeyLogStore::new();
        for i in 0..5u8 {
            for (j, label) in SecretLabel::ALL.into_iter().enumerate() {
                let len = if i % 2 == 0 { 32 } else { 48 };
                store.insert([i; 32], label, vec![i ^ j as u8; len]);
            }
        }
        let back = parse_keylog(&render_keylog(&store));
        assert_eq!(back, store);
        assert_eq!(back.len(), 20);
    }
}
