use std::net::{IpAddr, Ipv4Addr, Ipv6Addr};

use bitflags::bitflags;
use thiserror::Error;

use super::{CapturedFrame, LinkType};

const ETHERTYPE_IPV4: u16 = 0x0800;
const ETHERTYPE_IPV6: u16 = 0x86DD;
const IPPROTO_TCP: u8 = 6;

bitflags! {
    /// TCP control bits this toolkit cares about.
    #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
    pub struct TcpFlags: u8 {
        const FIN = 0x01;
        const SYN = 0x02;
        const RST = 0x04;
        const PSH = 0x08;
        const ACK = 0x10;
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DecodeError {
    #[error("malformed {layer} header: {reason}")]
    MalformedHeader {
        layer: &'static str,
        reason: &'static str,
    },
}

fn malformed(layer: &'static str, reason: &'static str) -> DecodeError {
    DecodeError::MalformedHeader { layer, reason }
}

/// One TCP segment pulled out of a frame.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DecodedPacket {
    pub timestamp_ns: u64,
    pub src_ip: IpAddr,
    pub dst_ip: IpAddr,
    pub src_port: u16,
    pub dst_port: u16,
    pub tcp_flags: TcpFlags,
    pub seq: u32,
    pub ack: u32,
    /// Captured payload bytes.
    pub payload: Vec<u8>,
    /// Payload length according to the IP header. Larger than
    /// `payload.len()` when the frame was snapped.
    pub wire_payload_len: u32,
}

impl DecodedPacket {
    pub fn is_snapped(&self) -> bool {
        (self.payload.len() as u64) < u64::from(self.wire_payload_len)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Decoded {
    Tcp(DecodedPacket),
    NonTcp,
}

/// Decode a frame down to its TCP segment. Anything that is not TCP over
/// IPv4/IPv6 yields [`Decoded::NonTcp`].
pub fn decode_frame(frame: &CapturedFrame) -> Result<Decoded, DecodeError> {
    let data = &frame.data[..];
    let (ethertype, l3) = match frame.link_type {
        LinkType::Ethernet => {
            if data.len() < 14 {
                return Err(malformed("ethernet", "frame shorter than header"));
            }
            (u16::from_be_bytes([data[12], data[13]]), &data[14..])
        }
        LinkType::LinuxSll => {
            if data.len() < 16 {
                return Err(malformed("sll", "frame shorter than header"));
            }
            (u16::from_be_bytes([data[14], data[15]]), &data[16..])
        }
        LinkType::RawIp => match data.first().map(|b| b >> 4) {
            Some(4) => (ETHERTYPE_IPV4, data),
            Some(6) => (ETHERTYPE_IPV6, data),
            _ => return Ok(Decoded::NonTcp),
        },
    };
    let snapped = frame.is_snapped();
    match ethertype {
        ETHERTYPE_IPV4 => decode_ipv4(frame.timestamp_ns, l3, snapped),
        ETHERTYPE_IPV6 => decode_ipv6(frame.timestamp_ns, l3, snapped),
        _ => Ok(Decoded::NonTcp),
    }
}

fn decode_ipv4(ts: u64, ip: &[u8], snapped: bool) -> Result<Decoded, DecodeError> {
    if ip.len() < 20 {
        return Err(malformed("ipv4", "packet shorter than header"));
    }
    if ip[0] >> 4 != 4 {
        return Err(malformed("ipv4", "version is not 4"));
    }
    let ihl = usize::from(ip[0] & 0x0f) * 4;
    let total = usize::from(u16::from_be_bytes([ip[2], ip[3]]));
    if ihl < 20 || total < ihl || ip.len() < ihl {
        return Err(malformed("ipv4", "inconsistent header length"));
    }
    if total > ip.len() && !snapped {
        return Err(malformed("ipv4", "total length exceeds frame"));
    }
    // Fragments are not reassembled.
    let frag = u16::from_be_bytes([ip[6], ip[7]]);
    if ip[9] != IPPROTO_TCP || frag & 0x3fff != 0 {
        return Ok(Decoded::NonTcp);
    }
    let src = IpAddr::V4(Ipv4Addr::new(ip[12], ip[13], ip[14], ip[15]));
    let dst = IpAddr::V4(Ipv4Addr::new(ip[16], ip[17], ip[18], ip[19]));
    let captured_end = total.min(ip.len());
    decode_tcp(ts, src, dst, &ip[ihl..captured_end], total - ihl)
}

fn decode_ipv6(ts: u64, ip: &[u8], snapped: bool) -> Result<Decoded, DecodeError> {
    if ip.len() < 40 {
        return Err(malformed("ipv6", "packet shorter than header"));
    }
    if ip[0] >> 4 != 6 {
        return Err(malformed("ipv6", "version is not 6"));
    }
    let payload_len = usize::from(u16::from_be_bytes([ip[4], ip[5]]));
    if 40 + payload_len > ip.len() && !snapped {
        return Err(malformed("ipv6", "payload length exceeds frame"));
    }
    let src = IpAddr::V6(Ipv6Addr::from(<[u8; 16]>::try_from(&ip[8..24]).unwrap()));
    let dst = IpAddr::V6(Ipv6Addr::from(<[u8; 16]>::try_from(&ip[24..40]).unwrap()));

    let end = (40 + payload_len).min(ip.len());
    let mut next = ip[6];
    let mut off = 40;
    // Hop-by-hop, routing and destination options may precede TCP.
    while matches!(next, 0 | 43 | 60) {
        if end < off + 8 {
            return Err(malformed("ipv6", "truncated extension header"));
        }
        let len = (usize::from(ip[off + 1]) + 1) * 8;
        next = ip[off];
        off += len;
    }
    if next != IPPROTO_TCP || off > end {
        return Ok(Decoded::NonTcp);
    }
    decode_tcp(ts, src, dst, &ip[off..end], 40 + payload_len - off)
}

fn decode_tcp(
    ts: u64,
    src_ip: IpAddr,
    dst_ip: IpAddr,
    seg: &[u8],
    wire_len: usize,
) -> Result<Decoded, DecodeError> {
    if seg.len() < 20 {
        return Err(malformed("tcp", "segment shorter than header"));
    }
    let data_offset = usize::from(seg[12] >> 4) * 4;
    if data_offset < 20 || data_offset > wire_len {
        return Err(malformed("tcp", "bad data offset"));
    }
    if data_offset > seg.len() {
        return Err(malformed("tcp", "options cut by snap length"));
    }
    Ok(Decoded::Tcp(DecodedPacket {
        timestamp_ns: ts,
        src_ip,
        dst_ip,
        src_port: u16::from_be_bytes([seg[0], seg[1]]),
        dst_port: u16::from_be_bytes([seg[2], seg[3]]),
        tcp_flags: TcpFlags::from_bits_truncate(seg[13]),
        seq: u32::from_be_bytes([seg[4], seg[5], seg[6], seg[7]]),
        ack: u32::from_be_bytes([seg[8], seg[9], seg[10], seg[11]]),
        payload: seg[data_offset..].to_vec(),
        wire_payload_len: (wire_len - data_offset) as u32,
    }))
}
