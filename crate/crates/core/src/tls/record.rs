use crate::tcp::DirectionalStream;

use super::TlsError;

/// Upper bound on a TLSCiphertext fragment: 2^14 + 256.
pub const MAX_CIPHERTEXT_LEN: usize = (1 << 14) + 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ContentType {
    ChangeCipherSpec = 20,
    Alert = 21,
    Handshake = 22,
    ApplicationData = 23,
}

impl ContentType {
    pub fn from_u8(v: u8) -> Option<Self> {
        match v {
            20 => Some(ContentType::ChangeCipherSpec),
            21 => Some(ContentType::Alert),
            22 => Some(ContentType::Handshake),
            23 => Some(ContentType::ApplicationData),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TlsRecord {
    pub content_type: ContentType,
    /// legacy_record_version from the header.
    pub version: u16,
    pub body: Vec<u8>,
    /// Offset of the header's first byte within the directional stream.
    pub stream_offset: u64,
    /// First-arrival time of that byte.
    pub timestamp_ns: u64,
}

impl TlsRecord {
    /// The 5-byte header, which is also the AEAD associated data.
    pub fn header(&self) -> [u8; 5] {
        let [v0, v1] = self.version.to_be_bytes();
        let [l0, l1] = (self.body.len() as u16).to_be_bytes();
        [self.content_type as u8, v0, v1, l0, l1]
    }
}

/// Records cut from one direction of a connection.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RecordStream {
    pub records: Vec<TlsRecord>,
    /// The stream ends inside a record.
    pub trailing_partial: bool,
    /// Parsing stopped because the next record runs into a hole.
    pub stopped_at_gap: bool,
}

/// Split a directional stream into TLS records.
pub fn parse_records(stream: &DirectionalStream) -> Result<RecordStream, TlsError> {
    let usable = stream.contiguous_len() as usize;
    let has_gap = !stream.is_gap_free();
    let bytes = &stream.bytes[..];
    let mut out = RecordStream::default();
    let mut pos = 0usize;
    while pos < usable {
        let offset = pos as u64;
        if usable - pos < 5 {
            mark_cut(&mut out, has_gap);
            break;
        }
        let h = &bytes[pos..pos + 5];
        let content_type =
            ContentType::from_u8(h[0]).ok_or(TlsError::BadRecordHeader { offset })?;
        let version = u16::from_be_bytes([h[1], h[2]]);
        if !(0x0300..=0x0304).contains(&version) {
            return Err(TlsError::BadRecordHeader { offset });
        }
        let len = usize::from(u16::from_be_bytes([h[3], h[4]]));
        if len > MAX_CIPHERTEXT_LEN {
            return Err(TlsError::OversizeRecord { offset, len });
        }
        if usable - pos - 5 < len {
            mark_cut(&mut out, has_gap);
            break;
        }
        let timestamp_ns = stream
            .timestamp_at(offset)
            .map_err(|_| TlsError::BadRecordHeader { offset })?;
        out.records.push(TlsRecord {
            content_type,
            version,
            body: bytes[pos + 5..pos + 5 + len].to_vec(),
            stream_offset: offset,
            timestamp_ns,
        });
        pos += 5 + len;
    }
    if pos == usable && has_gap {
        out.stopped_at_gap = true;
    }
    Ok(out)
}

fn mark_cut(out: &mut RecordStream, has_gap: bool) {
    if has_gap {
        out.stopped_at_gap = true;
    } else {
        out.trailing_partial = true;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeMap;

    fn record_bytes(ct: u8, len: usize) -> Vec<u8> {
        let mut v = vec![ct, 3, 3];
        v.extend_from_slice(&(len as u16).to_be_bytes());
        v.extend(std::iter::repeat_n(0x5a, len));
        v
    }

    fn stream(bytes: Vec<u8>, offsets_ts: &[(u64, u64)]) -> DirectionalStream {
        DirectionalStream {
            bytes,
            offsets_ts: offsets_ts.iter().copied().collect::<BTreeMap<_, _>>(),
            holes: vec![],
        }
    }

    #[test]
    fn empty_stream() {
        let r = parse_records(&DirectionalStream::default()).unwrap();
        assert!(r.records.is_empty());
        assert!(!r.trailing_partial);
    }

    #[test]
    fn single_handshake_record() {
        let s = stream(record_bytes(22, 512), &[(0, 11)]);
        let r = parse_records(&s).unwrap();
        assert_eq!(r.records.len(), 1);
        assert_eq!(r.records[0].content_type, ContentType::Handshake);
        assert_eq!(r.records[0].stream_offset, 0);
        assert_eq!(r.records[0].timestamp_ns, 11);
        assert_eq!(r.records[0].body.len(), 512);
        assert_eq!(r.records[0].header(), [22, 3, 3, 2, 0]);
    }

    #[test]
    fn records_take_timestamp_of_first_byte() {
        let mut bytes = record_bytes(22, 100);
        bytes.extend(record_bytes(20, 1));
        bytes.extend(record_bytes(23, 50));
        // second segment starts in the middle of record 2's header
        let s = stream(bytes, &[(0, 1), (107, 2)]);
        let r = parse_records(&s).unwrap();
        let got: Vec<_> = r.records.iter().map(|x| (x.stream_offset, x.timestamp_ns)).collect();
        assert_eq!(got, vec![(0, 1), (105, 1), (111, 2)]);
    }

    #[test]
    fn trailing_partial_record() {
        let mut bytes = record_bytes(23, 20);
        bytes.extend(&record_bytes(23, 20)[..10]);
        let r = parse_records(&stream(bytes, &[(0, 0)])).unwrap();
        assert_eq!(r.records.len(), 1);
        assert!(r.trailing_partial);
    }

    #[test]
    fn stops_at_gap() {
        let mut s = stream(record_bytes(23, 200), &[(0, 0)]);
        s.holes.push(100..150);
        s.offsets_ts.insert(150, 5);
        let r = parse_records(&s).unwrap();
        assert!(r.records.is_empty());
        assert!(r.stopped_at_gap);
    }

    #[test]
    fn bad_headers() {
        let r = parse_records(&stream(record_bytes(99, 4), &[(0, 0)]));
        assert_eq!(r, Err(TlsError::BadRecordHeader { offset: 0 }));
        let mut b = record_bytes(23, 4);
        b[1] = 9;
        assert!(parse_records(&stream(b, &[(0, 0)])).is_err());
        let big = record_bytes(23, MAX_CIPHERTEXT_LEN + 1);
        assert!(matches!(
            parse_records(&stream(big, &[(0, 0)])),
            Err(TlsError::OversizeRecord { .. })
        ));
    }
}
