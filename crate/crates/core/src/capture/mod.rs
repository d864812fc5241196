//! Capture ingestion: pcap / pcapng files, link-layer decoding down to TCP
//! segments, and NSS key-log parsing.

mod decode;
mod keylog;
mod pcap;

pub use decode::{decode_frame, DecodeError, Decoded, DecodedPacket, TcpFlags};
pub use keylog::{
    parse_keylog, render_keylog, ClientRandom, KeyLogDiagnostics, KeyLogStore, MalformedLine,
    SecretLabel,
};
pub use pcap::{
    emit_capture, open_capture, parse_capture, write_capture, Capture, CaptureError,
    CaptureFormat, CaptureWarning,
};

/// Link-layer framing of a captured frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LinkType {
    Ethernet,
    RawIp,
    LinuxSll,
}

impl LinkType {
    /// LINKTYPE_* value used in pcap and pcapng headers.
    pub fn code(self) -> u32 {
        match self {
            LinkType::Ethernet => 1,
            LinkType::RawIp => 101,
            LinkType::LinuxSll => 113,
        }
    }

    pub fn from_code(code: u32) -> Option<Self> {
        match code {
            1 => Some(LinkType::Ethernet),
            // DLT_RAW has two historical values.
            12 | 14 | 101 => Some(LinkType::RawIp),
            113 => Some(LinkType::LinuxSll),
            _ => None,
        }
    }
}

/// One record from a capture file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CapturedFrame {
    /// Nanoseconds since the Unix epoch.
    pub timestamp_ns: u64,
    pub link_type: LinkType,
    /// Captured bytes (may be shorter than `wire_len` when snapped).
    pub data: Vec<u8>,
    /// Original length of the packet on the wire.
    pub wire_len: u32,
}

impl CapturedFrame {
    pub fn new(timestamp_ns: u64, link_type: LinkType, data: Vec<u8>) -> Self {
        let wire_len = data.len() as u32;
        CapturedFrame {
            timestamp_ns,
            link_type,
            data,
            wire_len,
        }
    }

    /// True when the capture snap length cut this frame short.
    pub fn is_snapped(&self) -> bool {
        (self.data.len() as u64) < u64::from(self.wire_len)
    }
}
