//! Ethernet/IPv4/TCP frame assembly with valid checksums.

use std::net::Ipv4Addr;

use crate::capture::TcpFlags;

const ETH_HEADER: usize = 14;
const IPV4_HEADER: usize = 20;
const TCP_HEADER: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Endpoint {
    pub mac: [u8; 6],
    pub ip: Ipv4Addr,
    pub port: u16,
}

fn ones_complement_sum(mut acc: u32, data: &[u8]) -> u32 {
    let mut chunks = data.chunks_exact(2);
    for c in &mut chunks {
        acc += u32::from(u16::from_be_bytes([c[0], c[1]]));
    }
    if let [last] = chunks.remainder() {
        acc += u32::from(*last) << 8;
    }
    acc
}

fn fold(mut acc: u32) -> u16 {
    while acc > 0xffff {
        acc = (acc & 0xffff) + (acc >> 16);
    }
    !(acc as u16)
}

pub fn internet_checksum(data: &[u8]) -> u16 {
    fold(ones_complement_sum(0, data))
}

pub struct TcpSegment<'a> {
    pub seq: u32,
    pub ack: u32,
    pub flags: TcpFlags,
    /// Must be a multiple of 4 bytes.
    pub options: &'a [u8],
    pub payload: &'a [u8],
}

pub fn tcp_frame(src: &Endpoint, dst: &Endpoint, ip_id: u16, seg: &TcpSegment<'_>) -> Vec<u8> {
    debug_assert_eq!(seg.options.len() % 4, 0);
    let tcp_len = TCP_HEADER + seg.options.len() + seg.payload.len();
    let total = IPV4_HEADER + tcp_len;

    let mut f = Vec::with_capacity(ETH_HEADER + total);
    f.extend_from_slice(&dst.mac);
    f.extend_from_slice(&src.mac);
    f.extend_from_slice(&0x0800u16.to_be_bytes());

    let ip_start = f.len();
    f.extend_from_slice(&[0x45, 0]);
    f.extend_from_slice(&(total as u16).to_be_bytes());
    f.extend_from_slice(&ip_id.to_be_bytes());
    f.extend_from_slice(&0x4000u16.to_be_bytes());
    f.extend_from_slice(&[64, 6, 0, 0]);
    f.extend_from_slice(&src.ip.octets());
    f.extend_from_slice(&dst.ip.octets());
    let ip_sum = internet_checksum(&f[ip_start..]);
    f[ip_start + 10..ip_start + 12].copy_from_slice(&ip_sum.to_be_bytes());

    let tcp_start = f.len();
    f.extend_from_slice(&src.port.to_be_bytes());
    f.extend_from_slice(&dst.port.to_be_bytes());
    f.extend_from_slice(&seg.seq.to_be_bytes());
    f.extend_from_slice(&seg.ack.to_be_bytes());
    let offset_words = ((TCP_HEADER + seg.options.len()) / 4) as u8;
    f.push(offset_words << 4);
    f.push(seg.flags.bits());
    f.extend_from_slice(&65535u16.to_be_bytes());
    f.extend_from_slice(&[0, 0, 0, 0]);
    f.extend_from_slice(seg.options);
    f.extend_from_slice(seg.payload);

    let mut pseudo = Vec::with_capacity(12);
    pseudo.extend_from_slice(&src.ip.octets());
    pseudo.extend_from_slice(&dst.ip.octets());
    pseudo.extend_from_slice(&[0, 6]);
    pseudo.extend_from_slice(&(tcp_len as u16).to_be_bytes());
    let acc = ones_complement_sum(ones_complement_sum(0, &pseudo), &f[tcp_start..]);
    let tcp_sum = fold(acc);
    f[tcp_start + 16..tcp_start + 18].copy_from_slice(&tcp_sum.to_be_bytes());
    f
}
