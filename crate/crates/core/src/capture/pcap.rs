use std::fs;
use std::io::{self, Write};
use std::path::Path;

use log::warn;
use thiserror::Error;

use super::{CapturedFrame, LinkType};

const PCAP_MAGIC_US: u32 = 0xA1B2_C3D4;
const PCAP_MAGIC_NS: u32 = 0xA1B2_3C4D;
const PCAPNG_SHB: u32 = 0x0A0D_0D0A;
const PCAPNG_BYTE_ORDER: u32 = 0x1A2B_3C4D;
const PCAPNG_IDB: u32 = 0x0000_0001;
const PCAPNG_EPB: u32 = 0x0000_0006;
const IDB_OPT_TSRESOL: u16 = 9;
const DEFAULT_SNAPLEN: u32 = 262_144;

#[derive(Debug, Error)]
pub enum CaptureError {
    #[error("cannot read capture: {0}")]
    UnreadableFile(#[source] io::Error),
    #[error("not a pcap or pcapng file (magic {0:#010x})")]
    UnknownMagic(u32),
    #[error("unsupported link type {0}")]
    UnknownLinkType(u32),
    #[error("capture header is truncated")]
    TruncatedHeader,
    #[error("malformed pcapng block at offset {offset}: {reason}")]
    MalformedBlock { offset: usize, reason: &'static str },
    #[error("cannot write capture: {0}")]
    WriteFailure(#[source] io::Error),
}

/// Non-fatal conditions met while reading a capture.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CaptureWarning {
    /// A record header or body ran past the end of the file; reading stopped.
    TruncatedFrame { offset: usize },
    /// A record with zero captured bytes was dropped.
    EmptyFrame { offset: usize },
}

/// On-disk capture flavour.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CaptureFormat {
    /// Classic pcap, microsecond timestamps.
    PcapMicro,
    /// Classic pcap, nanosecond timestamps.
    PcapNano,
    PcapNg,
}

impl std::str::FromStr for CaptureFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "pcap-us" | "pcap" => Ok(CaptureFormat::PcapMicro),
            "pcap-ns" => Ok(CaptureFormat::PcapNano),
            "pcapng" => Ok(CaptureFormat::PcapNg),
            other => Err(format!("unknown capture format `{other}`")),
        }
    }
}

/// A fully read capture file.
#[derive(Debug, Clone)]
pub struct Capture {
    pub format: CaptureFormat,
    pub frames: Vec<CapturedFrame>,
    pub warnings: Vec<CaptureWarning>,
}

/// Read a pcap or pcapng file. Frames are returned in file order.
pub fn open_capture(path: impl AsRef<Path>) -> Result<Capture, CaptureError> {
    let bytes = fs::read(path.as_ref()).map_err(CaptureError::UnreadableFile)?;
    parse_capture(&bytes)
}

/// Parse an in-memory capture image.
pub fn parse_capture(bytes: &[u8]) -> Result<Capture, CaptureError> {
    if bytes.len() < 4 {
        return Err(CaptureError::TruncatedHeader);
    }
    let le = u32::from_le_bytes(bytes[..4].try_into().unwrap());
    let be = u32::from_be_bytes(bytes[..4].try_into().unwrap());
    let capture = match (le, be) {
        (PCAP_MAGIC_US, _) => parse_pcap(bytes, Endian::Little, Resolution::Pow10(6))?,
        (_, PCAP_MAGIC_US) => parse_pcap(bytes, Endian::Big, Resolution::Pow10(6))?,
        (PCAP_MAGIC_NS, _) => parse_pcap(bytes, Endian::Little, Resolution::Pow10(9))?,
        (_, PCAP_MAGIC_NS) => parse_pcap(bytes, Endian::Big, Resolution::Pow10(9))?,
        (PCAPNG_SHB, _) => parse_pcapng(bytes)?,
        _ => return Err(CaptureError::UnknownMagic(be)),
    };
    for w in &capture.warnings {
        warn!("capture: {w:?}");
    }
    Ok(capture)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Endian {
    Little,
    Big,
}

impl Endian {
    fn u16(self, b: &[u8]) -> u16 {
        let a = [b[0], b[1]];
        match self {
            Endian::Little => u16::from_le_bytes(a),
            Endian::Big => u16::from_be_bytes(a),
        }
    }

    fn u32(self, b: &[u8]) -> u32 {
        let a = [b[0], b[1], b[2], b[3]];
        match self {
            Endian::Little => u32::from_le_bytes(a),
            Endian::Big => u32::from_be_bytes(a),
        }
    }
}

/// Timestamp unit: 10^-n or 2^-n seconds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Resolution {
    Pow10(u8),
    Pow2(u8),
}

impl Resolution {
    fn from_tsresol(v: u8) -> Self {
        if v & 0x80 == 0 {
            Resolution::Pow10(v)
        } else {
            Resolution::Pow2(v & 0x7f)
        }
    }

    fn to_ns(self, ticks: u64) -> u64 {
        match self {
            Resolution::Pow10(n) if n <= 9 => ticks * 10u64.pow(u32::from(9 - n)),
            Resolution::Pow10(n) => {
                (u128::from(ticks) / 10u128.pow(u32::from(n - 9))) as u64
            }
            Resolution::Pow2(n) => ((u128::from(ticks) * 1_000_000_000) >> n) as u64,
        }
    }

    /// Seconds + fraction pair as stored by classic pcap.
    fn split_to_ns(self, secs: u32, frac: u32) -> u64 {
        let per_sec = match self {
            Resolution::Pow10(9) => 1_000_000_000,
            _ => 1_000_000,
        };
        u64::from(secs) * 1_000_000_000 + u64::from(frac) * (1_000_000_000 / per_sec)
    }
}

fn parse_pcap(bytes: &[u8], endian: Endian, res: Resolution) -> Result<Capture, CaptureError> {
    if bytes.len() < 24 {
        return Err(CaptureError::TruncatedHeader);
    }
    // Upper bits of the link-type field carry FCS information in newer files.
    let network = endian.u32(&bytes[20..24]) & 0x0FFF_FFFF;
    let link_type = LinkType::from_code(network).ok_or(CaptureError::UnknownLinkType(network))?;
    let format = match res {
        Resolution::Pow10(9) => CaptureFormat::PcapNano,
        _ => CaptureFormat::PcapMicro,
    };

    let mut frames = Vec::new();
    let mut warnings = Vec::new();
    let mut pos = 24;
    while pos < bytes.len() {
        if bytes.len() - pos < 16 {
            warnings.push(CaptureWarning::TruncatedFrame { offset: pos });
            break;
        }
        let h = &bytes[pos..pos + 16];
        let ts_sec = endian.u32(&h[0..4]);
        let ts_frac = endian.u32(&h[4..8]);
        let caplen = endian.u32(&h[8..12]) as usize;
        let wire_len = endian.u32(&h[12..16]);
        let body = pos + 16;
        if bytes.len() - body < caplen {
            warnings.push(CaptureWarning::TruncatedFrame { offset: pos });
            break;
        }
        if caplen == 0 {
            warnings.push(CaptureWarning::EmptyFrame { offset: pos });
        } else {
            frames.push(CapturedFrame {
                timestamp_ns: res.split_to_ns(ts_sec, ts_frac),
                link_type,
                data: bytes[body..body + caplen].to_vec(),
                wire_len: wire_len.max(caplen as u32),
            });
        }
        pos = body + caplen;
    }
    Ok(Capture {
        format,
        frames,
        warnings,
    })
}

struct Interface {
    link_type: LinkType,
    resolution: Resolution,
}

fn parse_pcapng(bytes: &[u8]) -> Result<Capture, CaptureError> {
    let mut frames = Vec::new();
    let mut warnings = Vec::new();
    let mut interfaces: Vec<Interface> = Vec::new();
    let mut endian = Endian::Little;
    let mut pos = 0;

    while pos < bytes.len() {
        if bytes.len() - pos < 12 {
            warnings.push(CaptureWarning::TruncatedFrame { offset: pos });
            break;
        }
        let raw_type = u32::from_le_bytes(bytes[pos..pos + 4].try_into().unwrap());
        if raw_type == PCAPNG_SHB {
            let bom = &bytes[pos + 8..pos + 12];
            endian = if u32::from_le_bytes(bom.try_into().unwrap()) == PCAPNG_BYTE_ORDER {
                Endian::Little
            } else if u32::from_be_bytes(bom.try_into().unwrap()) == PCAPNG_BYTE_ORDER {
                Endian::Big
            } else {
                return Err(CaptureError::MalformedBlock {
                    offset: pos,
                    reason: "bad byte-order magic",
                });
            };
            interfaces.clear();
        } else if pos == 0 {
            return Err(CaptureError::UnknownMagic(raw_type));
        }

        let block_type = endian.u32(&bytes[pos..pos + 4]);
        let total_len = endian.u32(&bytes[pos + 4..pos + 8]) as usize;
        if total_len < 12 || !total_len.is_multiple_of(4) {
            if pos == 0 {
                return Err(CaptureError::MalformedBlock {
                    offset: pos,
                    reason: "bad block length",
                });
            }
            warnings.push(CaptureWarning::TruncatedFrame { offset: pos });
            break;
        }
        if bytes.len() - pos < total_len {
            if pos == 0 {
                return Err(CaptureError::TruncatedHeader);
            }
            warnings.push(CaptureWarning::TruncatedFrame { offset: pos });
            break;
        }
        let body = &bytes[pos + 8..pos + total_len - 4];

        match block_type {
            PCAPNG_IDB => {
                if body.len() < 8 {
                    return Err(CaptureError::MalformedBlock {
                        offset: pos,
                        reason: "short interface description",
                    });
                }
                let code = u32::from(endian.u16(&body[0..2]));
                let link_type =
                    LinkType::from_code(code).ok_or(CaptureError::UnknownLinkType(code))?;
                let resolution = idb_resolution(&body[8..], endian);
                interfaces.push(Interface {
                    link_type,
                    resolution,
                });
            }
            PCAPNG_EPB => {
                if body.len() < 20 {
                    warnings.push(CaptureWarning::TruncatedFrame { offset: pos });
                    pos += total_len;
                    continue;
                }
                let if_id = endian.u32(&body[0..4]) as usize;
                let ts = (u64::from(endian.u32(&body[4..8])) << 32)
                    | u64::from(endian.u32(&body[8..12]));
                let caplen = endian.u32(&body[12..16]) as usize;
                let wire_len = endian.u32(&body[16..20]);
                let iface = interfaces.get(if_id).ok_or(CaptureError::MalformedBlock {
                    offset: pos,
                    reason: "packet references unknown interface",
                })?;
                if body.len() - 20 < caplen {
                    warnings.push(CaptureWarning::TruncatedFrame { offset: pos });
                } else if caplen == 0 {
                    warnings.push(CaptureWarning::EmptyFrame { offset: pos });
                } else {
                    frames.push(CapturedFrame {
                        timestamp_ns: iface.resolution.to_ns(ts),
                        link_type: iface.link_type,
                        data: body[20..20 + caplen].to_vec(),
                        wire_len: wire_len.max(caplen as u32),
                    });
                }
            }
            _ => {}
        }
        pos += total_len;
    }

    Ok(Capture {
        format: CaptureFormat::PcapNg,
        frames,
        warnings,
    })
}

fn idb_resolution(mut opts: &[u8], endian: Endian) -> Resolution {
    let mut res = Resolution::Pow10(6);
    while opts.len() >= 4 {
        let code = endian.u16(&opts[0..2]);
        let len = endian.u16(&opts[2..4]) as usize;
        if code == 0 {
            break;
        }
        let padded = (len + 3) & !3;
        if opts.len() < 4 + padded {
            break;
        }
        if code == IDB_OPT_TSRESOL && len == 1 {
            res = Resolution::from_tsresol(opts[4]);
        }
        opts = &opts[4 + padded..];
    }
    res
}

/// Serialize frames in the requested format. Microsecond pcap truncates
/// sub-microsecond digits.
pub fn write_capture<W: Write>(
    frames: &[CapturedFrame],
    format: CaptureFormat,
    mut out: W,
) -> io::Result<()> {
    match format {
        CaptureFormat::PcapMicro | CaptureFormat::PcapNano => {
            let link_type = frames.first().map_or(LinkType::Ethernet, |f| f.link_type);
            if frames.iter().any(|f| f.link_type != link_type) {
                return Err(io::Error::new(
                    io::ErrorKind::InvalidInput,
                    "classic pcap holds a single link type",
                ));
            }
            let (magic, divisor) = if format == CaptureFormat::PcapNano {
                (PCAP_MAGIC_NS, 1)
            } else {
                (PCAP_MAGIC_US, 1_000)
            };
            let mut hdr = Vec::with_capacity(24);
            hdr.extend_from_slice(&magic.to_le_bytes());
            hdr.extend_from_slice(&2u16.to_le_bytes());
            hdr.extend_from_slice(&4u16.to_le_bytes());
            hdr.extend_from_slice(&0i32.to_le_bytes());
            hdr.extend_from_slice(&0u32.to_le_bytes());
            hdr.extend_from_slice(&DEFAULT_SNAPLEN.to_le_bytes());
            hdr.extend_from_slice(&link_type.code().to_le_bytes());
            out.write_all(&hdr)?;
            for f in frames {
                let secs = f.timestamp_ns / 1_000_000_000;
                let frac = (f.timestamp_ns % 1_000_000_000) / divisor;
                let mut rec = Vec::with_capacity(16);
                rec.extend_from_slice(&(secs as u32).to_le_bytes());
                rec.extend_from_slice(&(frac as u32).to_le_bytes());
                rec.extend_from_slice(&(f.data.len() as u32).to_le_bytes());
                rec.extend_from_slice(&f.wire_len.to_le_bytes());
                out.write_all(&rec)?;
                out.write_all(&f.data)?;
            }
        }
        CaptureFormat::PcapNg => {
            // Section header: no options, unknown section length.
            let mut shb = Vec::new();
            shb.extend_from_slice(&PCAPNG_BYTE_ORDER.to_le_bytes());
            shb.extend_from_slice(&1u16.to_le_bytes());
            shb.extend_from_slice(&0u16.to_le_bytes());
            shb.extend_from_slice(&(-1i64).to_le_bytes());
            write_block(&mut out, PCAPNG_SHB, &shb)?;

            let mut link_types: Vec<LinkType> = Vec::new();
            for f in frames {
                if !link_types.contains(&f.link_type) {
                    link_types.push(f.link_type);
                }
            }
            if link_types.is_empty() {
                link_types.push(LinkType::Ethernet);
            }
            for lt in &link_types {
                let mut idb = Vec::new();
                idb.extend_from_slice(&(lt.code() as u16).to_le_bytes());
                idb.extend_from_slice(&0u16.to_le_bytes());
                idb.extend_from_slice(&DEFAULT_SNAPLEN.to_le_bytes());
                // if_tsresol = 9 (nanoseconds), then opt_endofopt.
                idb.extend_from_slice(&IDB_OPT_TSRESOL.to_le_bytes());
                idb.extend_from_slice(&1u16.to_le_bytes());
                idb.extend_from_slice(&[9, 0, 0, 0]);
                idb.extend_from_slice(&[0, 0, 0, 0]);
                write_block(&mut out, PCAPNG_IDB, &idb)?;
            }
            for f in frames {
                let if_id = link_types.iter().position(|lt| *lt == f.link_type).unwrap() as u32;
                let mut epb = Vec::with_capacity(20 + f.data.len() + 3);
                epb.extend_from_slice(&if_id.to_le_bytes());
                epb.extend_from_slice(&((f.timestamp_ns >> 32) as u32).to_le_bytes());
                epb.extend_from_slice(&(f.timestamp_ns as u32).to_le_bytes());
                epb.extend_from_slice(&(f.data.len() as u32).to_le_bytes());
                epb.extend_from_slice(&f.wire_len.to_le_bytes());
                epb.extend_from_slice(&f.data);
                while epb.len() % 4 != 0 {
                    epb.push(0);
                }
                write_block(&mut out, PCAPNG_EPB, &epb)?;
            }
        }
    }
    out.flush()
}

fn write_block<W: Write>(out: &mut W, block_type: u32, body: &[u8]) -> io::Result<()> {
    let total = (body.len() + 12) as u32;
    out.write_all(&block_type.to_le_bytes())?;
    out.write_all(&total.to_le_bytes())?;
    out.write_all(body)?;
    out.write_all(&total.to_le_bytes())
}

/// Write frames to `path`.
pub fn emit_capture(
    frames: &[CapturedFrame],
    path: impl AsRef<Path>,
    format: CaptureFormat,
) -> Result<(), CaptureError> {
    let file = fs::File::create(path.as_ref()).map_err(CaptureError::WriteFailure)?;
    write_capture(frames, format, io::BufWriter::new(file)).map_err(CaptureError::WriteFailure)
}
