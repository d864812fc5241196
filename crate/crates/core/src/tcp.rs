//! TCP connection tracking and per-direction stream reassembly.
//!
//! Streams are rebuilt purely in sequence space. Every byte keeps the
//! timestamp of the segment that carried it first, so retransmissions never
//! move a boundary later and the result does not depend on the order in
//! which segments appear in the file.

use std::collections::{BTreeMap, HashMap};
use std::net::IpAddr;
use std::ops::Range;

use bitflags::bitflags;
use log::debug;
use thiserror::Error;

use crate::capture::{DecodedPacket, TcpFlags};

/// Segments claiming an offset this far past the ISN are treated as garbage.
const MAX_STREAM_BYTES: u64 = 1 << 30;

/// Connection four-tuple, oriented so that the SYN sender is the client.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FlowKey {
    pub client_ip: IpAddr,
    pub client_port: u16,
    pub server_ip: IpAddr,
    pub server_port: u16,
}

impl FlowKey {
    fn is_client(&self, ip: IpAddr, port: u16) -> bool {
        self.client_ip == ip && self.client_port == port
    }
}

bitflags! {
    #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
    pub struct ConnFlags: u8 {
        /// SYN, SYN-ACK and gap-free data in both directions.
        const COMPLETE = 0x01;
        const PARTIAL = 0x02;
        const RESET = 0x04;
        /// At least one segment was cut by the capture snap length.
        const SNAPPED = 0x08;
        /// At least one direction has a hole.
        const GAP = 0x10;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum StreamError {
    #[error("offset {0} lies in a gap")]
    GapAtOffset(u64),
    #[error("offset {offset} is beyond the stream end ({len})")]
    OutOfRange { offset: u64, len: u64 },
}

/// One direction of a connection as a byte stream starting at ISN + 1.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DirectionalStream {
    /// Stream bytes; positions inside `holes` are zero filled.
    pub bytes: Vec<u8>,
    /// Offset -> first-arrival timestamp of the run starting there.
    pub offsets_ts: BTreeMap<u64, u64>,
    /// Byte ranges never seen in the capture, ascending.
    pub holes: Vec<Range<u64>>,
}

impl DirectionalStream {
    pub fn len(&self) -> u64 {
        self.bytes.len() as u64
    }

    pub fn is_empty(&self) -> bool {
        self.bytes.is_empty()
    }

    pub fn is_gap_free(&self) -> bool {
        self.holes.is_empty()
    }

    /// Length of the leading hole-free prefix.
    pub fn contiguous_len(&self) -> u64 {
        self.holes.first().map_or(self.len(), |h| h.start)
    }

    /// Arrival time of the segment that first carried `offset`.
    pub fn timestamp_at(&self, offset: u64) -> Result<u64, StreamError> {
        if offset >= self.len() {
            return Err(StreamError::OutOfRange {
                offset,
                len: self.len(),
            });
        }
        if self.holes.iter().any(|h| h.contains(&offset)) {
            return Err(StreamError::GapAtOffset(offset));
        }
        self.offsets_ts
            .range(..=offset)
            .next_back()
            .map(|(_, ts)| *ts)
            .ok_or(StreamError::GapAtOffset(offset))
    }
}

/// Free-function form of [`DirectionalStream::timestamp_at`].
pub fn timestamp_at(stream: &DirectionalStream, offset: u64) -> Result<u64, StreamError> {
    stream.timestamp_at(offset)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TcpConnection {
    pub key: FlowKey,
    pub t_syn: Option<u64>,
    pub t_synack: Option<u64>,
    pub client_to_server: DirectionalStream,
    pub server_to_client: DirectionalStream,
    pub flags: ConnFlags,
}

#[derive(Debug, Clone)]
struct Segment {
    seq: u32,
    ts: u64,
    data: Vec<u8>,
    wire_len: u32,
}

#[derive(Debug)]
struct Builder {
    key: FlowKey,
    client_isn: Option<u32>,
    server_isn: Option<u32>,
    t_syn: Option<u64>,
    t_synack: Option<u64>,
    closed: bool,
    flags: ConnFlags,
    c2s: Vec<Segment>,
    s2c: Vec<Segment>,
    first_ts: u64,
}

impl Builder {
    fn new(key: FlowKey, ts: u64) -> Self {
        Builder {
            key,
            client_isn: None,
            server_isn: None,
            t_syn: None,
            t_synack: None,
            closed: false,
            flags: ConnFlags::empty(),
            c2s: Vec::new(),
            s2c: Vec::new(),
            first_ts: ts,
        }
    }

    fn has_data(&self) -> bool {
        !self.c2s.is_empty() || !self.s2c.is_empty()
    }

    fn finish(self) -> TcpConnection {
        let mut flags = self.flags;
        let (c2s, f1) = build_stream(self.c2s, self.client_isn);
        let (s2c, f2) = build_stream(self.s2c, self.server_isn);
        flags |= f1 | f2;
        let complete = self.t_syn.is_some()
            && self.t_synack.is_some()
            && !c2s.is_empty()
            && !s2c.is_empty()
            && !flags.intersects(ConnFlags::PARTIAL | ConnFlags::GAP);
        if complete {
            flags |= ConnFlags::COMPLETE;
        } else {
            flags |= ConnFlags::PARTIAL;
        }
        TcpConnection {
            key: self.key,
            t_syn: self.t_syn,
            t_synack: self.t_synack,
            client_to_server: c2s,
            server_to_client: s2c,
            flags,
        }
    }
}

fn build_stream(mut segs: Vec<Segment>, isn: Option<u32>) -> (DirectionalStream, ConnFlags) {
    let mut flags = ConnFlags::empty();
    if segs.is_empty() {
        return (DirectionalStream::default(), flags);
    }
    let Some(isn) = isn else {
        // Data without a handshake to anchor it.
        return (DirectionalStream::default(), ConnFlags::PARTIAL);
    };
    let base = isn.wrapping_add(1);

    // (offset, captured bytes, wire length) relative to ISN + 1
    let mut placed: Vec<(u64, u64, &Segment, usize)> = Vec::with_capacity(segs.len());
    segs.sort_by_key(|s| s.ts);
    let mut end = 0u64;
    for seg in &segs {
        let rel = seg.seq.wrapping_sub(base);
        let (offset, skip) = if rel >= 1 << 31 {
            // Starts before the stream (keep-alive probe or overlap with SYN).
            let before = u64::from(base.wrapping_sub(seg.seq));
            if before >= u64::from(seg.wire_len) {
                continue;
            }
            (0u64, before as usize)
        } else {
            (u64::from(rel), 0usize)
        };
        let wire = u64::from(seg.wire_len) - skip as u64;
        if offset + wire > MAX_STREAM_BYTES {
            flags |= ConnFlags::PARTIAL;
            continue;
        }
        if seg.data.len() < seg.wire_len as usize {
            flags |= ConnFlags::SNAPPED;
        }
        end = end.max(offset + wire);
        placed.push((offset, wire, seg, skip));
    }

    let len = end as usize;
    let mut bytes = vec![0u8; len];
    let mut arrival = vec![u64::MAX; len];
    for (offset, _, seg, skip) in &placed {
        let data = seg.data.get(*skip..).unwrap_or(&[]);
        let start = *offset as usize;
        for (i, b) in data.iter().enumerate() {
            let pos = start + i;
            if arrival[pos] == u64::MAX {
                arrival[pos] = seg.ts;
                bytes[pos] = *b;
            } else if bytes[pos] != *b {
                flags |= ConnFlags::PARTIAL;
            }
        }
    }

    let mut offsets_ts = BTreeMap::new();
    let mut holes: Vec<Range<u64>> = Vec::new();
    let mut prev = u64::MAX;
    for (pos, ts) in arrival.iter().enumerate() {
        let pos = pos as u64;
        if *ts == u64::MAX {
            match holes.last_mut() {
                Some(h) if h.end == pos => h.end += 1,
                _ => holes.push(pos..pos + 1),
            }
        } else if *ts != prev || pos == 0 || arrival[pos as usize - 1] == u64::MAX {
            offsets_ts.insert(pos, *ts);
        }
        prev = *ts;
    }
    if !holes.is_empty() {
        flags |= ConnFlags::GAP;
    }
    (
        DirectionalStream {
            bytes,
            offsets_ts,
            holes,
        },
        flags,
    )
}

type Endpoint = (IpAddr, u16);

fn pair_key(p: &DecodedPacket) -> (Endpoint, Endpoint) {
    let a = (p.src_ip, p.src_port);
    let b = (p.dst_ip, p.dst_port);
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

/// Group segments into connections. A connection starts at a SYN (or a
/// SYN-ACK whose SYN was not captured); a new SYN after FIN/RST on the same
/// four-tuple starts a new one. Packets of flows whose handshake was never
/// seen are dropped.
pub fn assemble_connections<I>(packets: I) -> Vec<TcpConnection>
where
    I: IntoIterator<Item = DecodedPacket>,
{
    let mut groups: Vec<Vec<DecodedPacket>> = Vec::new();
    let mut index: HashMap<(Endpoint, Endpoint), usize> = HashMap::new();
    for p in packets {
        let k = pair_key(&p);
        let i = *index.entry(k).or_insert_with(|| {
            groups.push(Vec::new());
            groups.len() - 1
        });
        groups[i].push(p);
    }

    let mut out: Vec<(u64, usize, TcpConnection)> = Vec::new();
    let mut orphans = 0usize;
    for (gi, mut group) in groups.into_iter().enumerate() {
        group.sort_by_key(|p| p.timestamp_ns);
        let mut current: Option<Builder> = None;
        let mut finished: Vec<Builder> = Vec::new();
        for p in group {
            let syn = p.tcp_flags.contains(TcpFlags::SYN);
            let ack = p.tcp_flags.contains(TcpFlags::ACK);
            if syn && !ack {
                let fresh = |p: &DecodedPacket| {
                    let mut b = Builder::new(
                        FlowKey {
                            client_ip: p.src_ip,
                            client_port: p.src_port,
                            server_ip: p.dst_ip,
                            server_port: p.dst_port,
                        },
                        p.timestamp_ns,
                    );
                    b.client_isn = Some(p.seq);
                    b.t_syn = Some(p.timestamp_ns);
                    b
                };
                match current.as_mut() {
                    None => current = Some(fresh(&p)),
                    Some(b) if b.closed => {
                        if b.client_isn != Some(p.seq) {
                            finished.push(current.take().unwrap());
                            current = Some(fresh(&p));
                        }
                    }
                    Some(b) if !b.key.is_client(p.src_ip, p.src_port) => {
                        // simultaneous open
                        b.flags |= ConnFlags::PARTIAL;
                    }
                    Some(b) => match b.client_isn {
                        None => {
                            b.client_isn = Some(p.seq);
                            b.t_syn = Some(p.timestamp_ns);
                        }
                        Some(isn) if isn == p.seq => {}
                        Some(_) if b.has_data() => {
                            let mut old = current.take().unwrap();
                            old.flags |= ConnFlags::PARTIAL;
                            finished.push(old);
                            current = Some(fresh(&p));
                        }
                        Some(_) => b.flags |= ConnFlags::PARTIAL,
                    },
                }
                continue;
            }
            if syn && ack {
                let fresh = |p: &DecodedPacket| {
                    let mut b = Builder::new(
                        FlowKey {
                            client_ip: p.dst_ip,
                            client_port: p.dst_port,
                            server_ip: p.src_ip,
                            server_port: p.src_port,
                        },
                        p.timestamp_ns,
                    );
                    b.server_isn = Some(p.seq);
                    b.t_synack = Some(p.timestamp_ns);
                    b
                };
                match current.as_mut() {
                    None => current = Some(fresh(&p)),
                    Some(b) if b.key.is_client(p.src_ip, p.src_port) => {
                        b.flags |= ConnFlags::PARTIAL;
                    }
                    Some(b) => match b.server_isn {
                        None => {
                            b.server_isn = Some(p.seq);
                            b.t_synack = Some(p.timestamp_ns);
                        }
                        Some(isn) if isn == p.seq => {}
                        Some(_) if b.closed => {
                            finished.push(current.take().unwrap());
                            current = Some(fresh(&p));
                        }
                        Some(_) => b.flags |= ConnFlags::PARTIAL,
                    },
                }
                continue;
            }

            let Some(b) = current.as_mut() else {
                orphans += 1;
                continue;
            };
            if p.wire_payload_len > 0 {
                let seg = Segment {
                    seq: p.seq,
                    ts: p.timestamp_ns,
                    data: p.payload,
                    wire_len: p.wire_payload_len,
                };
                if b.key.is_client(p.src_ip, p.src_port) {
                    b.c2s.push(seg);
                } else {
                    b.s2c.push(seg);
                }
            }
            if p.tcp_flags.contains(TcpFlags::RST) {
                b.flags |= ConnFlags::RESET;
                b.closed = true;
            }
            if p.tcp_flags.contains(TcpFlags::FIN) {
                b.closed = true;
            }
        }
        finished.extend(current);
        for b in finished {
            out.push((b.first_ts, gi, b.finish()));
        }
    }
    if orphans > 0 {
        debug!("tcp: {orphans} packets without an observed handshake");
    }
    out.sort_by_key(|(ts, gi, _)| (*ts, *gi));
    out.into_iter().map(|(_, _, c)| c).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::net::Ipv4Addr;

    const C: IpAddr = IpAddr::V4(Ipv4Addr::new(10, 0, 0, 1));
    const S: IpAddr = IpAddr::V4(Ipv4Addr::new(10, 0, 0, 2));
    const CISN: u32 = 0xFFFF_FF00;
    const SISN: u32 = 77;

    fn pkt(from_client: bool, ts: u64, flags: TcpFlags, seq: u32, payload: &[u8]) -> DecodedPacket {
        let (src, dst, sp, dp) = if from_client {
            (C, S, 40000, 443)
        } else {
            (S, C, 443, 40000)
        };
        DecodedPacket {
            timestamp_ns: ts,
            src_ip: src,
            dst_ip: dst,
            src_port: sp,
            dst_port: dp,
            tcp_flags: flags,
            seq,
            ack: 0,
            payload: payload.to_vec(),
            wire_payload_len: payload.len() as u32,
        }
    }

    fn handshake(t_syn: u64, t_synack: u64) -> Vec<DecodedPacket> {
        vec![
            pkt(true, t_syn, TcpFlags::SYN, CISN, &[]),
            pkt(false, t_synack, TcpFlags::SYN | TcpFlags::ACK, SISN, &[]),
            pkt(true, t_synack + 10, TcpFlags::ACK, CISN + 1, &[]),
        ]
    }

    fn data(from_client: bool, ts: u64, offset: u32, payload: &[u8]) -> DecodedPacket {
        let isn = if from_client { CISN } else { SISN };
        pkt(
            from_client,
            ts,
            TcpFlags::ACK | TcpFlags::PSH,
            isn.wrapping_add(1).wrapping_add(offset),
            payload,
        )
    }

    #[test]
    fn handshake_only_connection() {
        let conns = assemble_connections(handshake(0, 360_000));
        assert_eq!(conns.len(), 1);
        let c = &conns[0];
        assert_eq!(c.t_syn, Some(0));
        assert_eq!(c.t_synack, Some(360_000));
        assert!(c.client_to_server.is_empty() && c.server_to_client.is_empty());
        assert!(c.flags.contains(ConnFlags::PARTIAL));
        assert!(!c.flags.contains(ConnFlags::COMPLETE));
        assert_eq!(c.key.client_port, 40000);
    }

    #[test]
    fn first_arrival_wins_over_retransmission() {
        let mut pkts = handshake(0, 100);
        pkts.push(data(true, 1_000, 0, b"hello "));
        pkts.push(data(true, 2_000, 6, b"world"));
        pkts.push(data(false, 3_000, 0, b"ok"));
        pkts.push(data(true, 5_002_000, 6, b"world"));
        let c = &assemble_connections(pkts)[0];
        assert_eq!(c.client_to_server.bytes, b"hello world");
        assert_eq!(c.client_to_server.timestamp_at(6), Ok(2_000));
        assert_eq!(c.client_to_server.timestamp_at(10), Ok(2_000));
        assert!(c.flags.contains(ConnFlags::COMPLETE));
    }

    #[test]
    fn out_of_order_and_sequence_wraparound() {
        // CISN + 1 + offset crosses 2^32 for these offsets
        let mut pkts = handshake(0, 100);
        pkts.push(data(true, 3_000, 300, &[3; 100]));
        pkts.push(data(true, 1_000, 0, &[1; 200]));
        pkts.push(data(true, 2_000, 200, &[2; 100]));
        let s = &assemble_connections(pkts)[0].client_to_server;
        assert_eq!(s.len(), 400);
        assert!(s.is_gap_free());
        assert_eq!(s.timestamp_at(0), Ok(1_000));
        assert_eq!(s.timestamp_at(199), Ok(1_000));
        assert_eq!(s.timestamp_at(200), Ok(2_000));
        assert_eq!(s.timestamp_at(399), Ok(3_000));
        assert_eq!(
            s.offsets_ts,
            BTreeMap::from([(0, 1_000), (200, 2_000), (300, 3_000)])
        );
    }

    #[test]
    fn holes_are_reported() {
        let mut pkts = handshake(0, 100);
        pkts.push(data(false, 1_000, 0, &[1; 10]));
        pkts.push(data(false, 2_000, 20, &[1; 10]));
        let c = &assemble_connections(pkts)[0];
        let s = &c.server_to_client;
        assert_eq!(s.holes, vec![10..20]);
        assert_eq!(s.contiguous_len(), 10);
        assert_eq!(s.timestamp_at(15), Err(StreamError::GapAtOffset(15)));
        assert_eq!(s.timestamp_at(25), Ok(2_000));
        assert!(matches!(
            s.timestamp_at(30),
            Err(StreamError::OutOfRange { .. })
        ));
        assert!(c.flags.contains(ConnFlags::GAP | ConnFlags::PARTIAL));
    }

    #[test]
    fn timestamp_at_boundaries() {
        let s = DirectionalStream {
            bytes: vec![0; 2000],
            offsets_ts: BTreeMap::from([(0, 7), (1000, 9)]),
            holes: vec![],
        };
        assert_eq!(timestamp_at(&s, 0), Ok(7));
        assert_eq!(timestamp_at(&s, 999), Ok(7));
        assert_eq!(timestamp_at(&s, 1000), Ok(9));
    }

    #[test]
    fn reuse_after_fin_starts_new_connection() {
        let mut pkts = handshake(0, 100);
        pkts.push(data(true, 200, 0, b"a"));
        pkts.push(pkt(true, 300, TcpFlags::FIN | TcpFlags::ACK, CISN + 2, &[]));
        let mut second = handshake(10_000, 10_100);
        second[0].seq = 5;
        pkts.extend(second);
        let conns = assemble_connections(pkts);
        assert_eq!(conns.len(), 2);
        assert_eq!(conns[1].t_syn, Some(10_000));
    }

    #[test]
    fn conflicting_syn_flags_partial() {
        let mut pkts = handshake(0, 100);
        pkts.push(pkt(true, 50, TcpFlags::SYN, 1234, &[]));
        let conns = assemble_connections(pkts);
        assert_eq!(conns.len(), 1);
        assert!(conns[0].flags.contains(ConnFlags::PARTIAL));
        assert_eq!(conns[0].t_syn, Some(0));
    }

    #[test]
    fn keepalive_before_stream_is_ignored() {
        let mut pkts = handshake(0, 100);
        pkts.push(data(true, 200, 0, b"abc"));
        pkts.push(data(false, 250, 0, b"x"));
        // keep-alive: one garbage byte at snd.nxt - 1 relative to ISN
        pkts.push(pkt(true, 900, TcpFlags::ACK, CISN, &[0]));
        let c = &assemble_connections(pkts)[0];
        assert_eq!(c.client_to_server.bytes, b"abc");
        assert!(c.flags.contains(ConnFlags::COMPLETE));
    }

    #[test]
    fn orphan_packets_are_dropped() {
        let conns = assemble_connections(vec![data(true, 5, 0, b"zz")]);
        assert!(conns.is_empty());
    }

    #[test]
    fn synack_without_syn_still_orients() {
        let mut pkts = handshake(0, 100);
        pkts.remove(0);
        let conns = assemble_connections(pkts);
        assert_eq!(conns[0].key.client_ip, C);
        assert_eq!(conns[0].t_syn, None);
    }
}
