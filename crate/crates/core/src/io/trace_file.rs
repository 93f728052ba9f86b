//! Binary two-channel trace container.
//!
//! Little-endian header (`COSHTRC1`, schema, sample rate, sample count,
//! channel count, bits, full scale, heterodyne, delay, seed, label) followed
//! by channel-interleaved `i16` codes spanning `±full_scale/2`. Codes of
//! digitizers narrower than 16 bit are left-aligned.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{format_err, io_err};
use crate::error::{CoshError, Result};
use crate::trace::{TraceMeta, TraceRecord};

pub const TRACE_MAGIC: &[u8; 8] = b"COSHTRC1";
pub const TRACE_SCHEMA_VERSION: u16 = 1;

const N_CHANNELS: u8 = 2;
const CODE_SPAN: f64 = 65536.0;
const MAX_LABEL_BYTES: u32 = 1 << 20;

fn to_code(v: f64, full_scale: f64) -> Option<i16> {
    let c = v / full_scale * CODE_SPAN;
    if c.fract() != 0.0 || c < i16::MIN as f64 || c > i16::MAX as f64 {
        return None;
    }
    Some(c as i16)
}

fn from_code(c: i16, full_scale: f64) -> f64 {
    c as f64 * (full_scale / CODE_SPAN)
}

pub fn write_trace(path: &Path, trace: &TraceRecord) -> Result<()> {
    let file = File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(file);
    write_trace_to(&mut w, trace, path)?;
    w.flush().map_err(io_err(path))
}

/// Serializes `trace`; `path` only labels error messages.
///
/// Fails when the digitizer has more than 16 bits or a sample is not on the
/// 16-bit code grid.
pub fn write_trace_to<W: Write>(w: &mut W, trace: &TraceRecord, path: &Path) -> Result<()> {
    trace.validate()?;
    let m = &trace.meta;
    if m.bits == 0 || m.bits > 16 {
        return Err(CoshError::usage(format!(
            "{}: trace files store at most 16-bit codes, digitizer has {} bits",
            path.display(),
            m.bits
        )));
    }
    let label = m.label.as_bytes();
    if label.len() as u64 > MAX_LABEL_BYTES as u64 {
        return Err(CoshError::usage("trace label too long"));
    }
    let mut header = Vec::with_capacity(80 + label.len());
    header.extend_from_slice(TRACE_MAGIC);
    header.extend_from_slice(&TRACE_SCHEMA_VERSION.to_le_bytes());
    header.extend_from_slice(&m.sample_rate_hz.to_le_bytes());
    header.extend_from_slice(&(trace.len() as u64).to_le_bytes());
    header.push(N_CHANNELS);
    header.push(m.bits);
    header.extend_from_slice(&m.full_scale_v.to_le_bytes());
    header.extend_from_slice(&m.heterodyne_hz.to_le_bytes());
    header.extend_from_slice(&m.delay_s.to_le_bytes());
    header.extend_from_slice(&m.seed.to_le_bytes());
    header.extend_from_slice(&(label.len() as u32).to_le_bytes());
    header.extend_from_slice(label);
    w.write_all(&header).map_err(io_err(path))?;

    let [a, b] = &trace.channels;
    let mut buf = Vec::with_capacity(4 * 8192);
    for (i, (&x, &y)) in a.iter().zip(b).enumerate() {
        for (c, v) in [(0, x), (1, y)] {
            let code = to_code(v, m.full_scale_v).ok_or_else(|| {
                CoshError::usage(format!(
                    "{}: channel {c} sample {i} = {v} V is not on the 16-bit code grid",
                    path.display()
                ))
            })?;
            buf.extend_from_slice(&code.to_le_bytes());
        }
        if buf.len() >= 4 * 8192 {
            w.write_all(&buf).map_err(io_err(path))?;
            buf.clear();
        }
    }
    w.write_all(&buf).map_err(io_err(path))
}

pub fn read_trace(path: &Path) -> Result<TraceRecord> {
    let file = File::open(path).map_err(io_err(path))?;
    read_trace_from(BufReader::new(file), path)
}

struct Header<R> {
    r: R,
}

impl<R: Read> Header<R> {
    fn bytes<const N: usize>(&mut self, path: &Path, what: &str) -> Result<[u8; N]> {
        let mut b = [0u8; N];
        self.r.read_exact(&mut b).map_err(|e| match e.kind() {
            std::io::ErrorKind::UnexpectedEof => format_err(path, format!("truncated header reading {what}")),
            _ => io_err(path)(e),
        })?;
        Ok(b)
    }

    fn f64(&mut self, path: &Path, what: &str) -> Result<f64> {
        Ok(f64::from_le_bytes(self.bytes(path, what)?))
    }

    fn u64(&mut self, path: &Path, what: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.bytes(path, what)?))
    }
}

/// Parses a trace; `path` only labels error messages.
pub fn read_trace_from<R: Read>(r: R, path: &Path) -> Result<TraceRecord> {
    let mut h = Header { r };
    let magic: [u8; 8] = h.bytes(path, "magic")?;
    if &magic != TRACE_MAGIC {
        return Err(format_err(
            path,
            format!(
                "not a trace file: expected magic \"COSHTRC1\", found {:?}",
                String::from_utf8_lossy(&magic)
            ),
        ));
    }
    let version = u16::from_le_bytes(h.bytes(path, "schema_version")?);
    if version != TRACE_SCHEMA_VERSION {
        return Err(format_err(
            path,
            format!("unsupported trace schema_version {version} (expected {TRACE_SCHEMA_VERSION})"),
        ));
    }
    let fs = h.f64(path, "sample_rate_hz")?;
    let n = h.u64(path, "n_samples")?;
    let [n_channels, bits] = h.bytes(path, "n_channels/bits")?;
    if n_channels != N_CHANNELS {
        return Err(format_err(path, format!("expected 2 channels, header declares {n_channels}")));
    }
    if bits == 0 || bits > 16 {
        return Err(format_err(path, format!("invalid bit depth {bits}")));
    }
    let full_scale = h.f64(path, "full_scale_v")?;
    let fh = h.f64(path, "heterodyne_hz")?;
    let delay = h.f64(path, "delay_s")?;
    let seed = h.u64(path, "seed")?;
    let label_len = u32::from_le_bytes(h.bytes(path, "label length")?);
    if label_len > MAX_LABEL_BYTES {
        return Err(format_err(path, format!("label length {label_len} exceeds limit")));
    }
    let mut label = vec![0u8; label_len as usize];
    h.r.read_exact(&mut label)
        .map_err(|_| format_err(path, "truncated header reading label"))?;
    let label = String::from_utf8(label).map_err(|_| format_err(path, "label is not valid UTF-8"))?;

    let n = usize::try_from(n).map_err(|_| format_err(path, "sample count too large"))?;
    let payload_len = n
        .checked_mul(2 * N_CHANNELS as usize)
        .ok_or_else(|| format_err(path, "sample count too large"))?;
    let mut payload = Vec::new();
    h.r.read_to_end(&mut payload).map_err(io_err(path))?;
    if payload.len() != payload_len {
        return Err(format_err(
            path,
            format!("payload is {} bytes, header implies {payload_len}", payload.len()),
        ));
    }
    let mut a = Vec::with_capacity(n);
    let mut b = Vec::with_capacity(n);
    for frame in payload.chunks_exact(4) {
        a.push(from_code(i16::from_le_bytes([frame[0], frame[1]]), full_scale));
        b.push(from_code(i16::from_le_bytes([frame[2], frame[3]]), full_scale));
    }
    drop(payload);

    let mut meta = TraceMeta::new(fs, bits, full_scale, fh, delay);
    meta.seed = seed;
    meta.label = label;
    TraceRecord::new(meta, a, b).map_err(|e| format_err(path, e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::path::PathBuf;

    fn sample_trace(bits: u8) -> TraceRecord {
        let fs_v = 2.0;
        let q = fs_v / 2f64.powi(bits as i32);
        let half = 1i64 << (bits - 1);
        let a: Vec<f64> = (0..1000).map(|i| ((i * 37) % (2 * half) - half) as f64 * q).collect();
        let b: Vec<f64> = (0..1000).map(|i| ((i * 91 + 5) % (2 * half) - half) as f64 * q).collect();
        let mut meta = TraceMeta::new(312.5e6, bits, fs_v, 80e6, 5.44e-6);
        meta.seed = 0xDEAD_BEEF_0000_0001;
        meta.label = "delay line 1 km, µ-test".into();
        TraceRecord::new(meta, a, b).unwrap()
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let p = PathBuf::from("mem");
        for bits in [8u8, 10, 12, 16] {
            let t = sample_trace(bits);
            let mut buf = Vec::new();
            write_trace_to(&mut buf, &t, &p).unwrap();
            assert_eq!(buf.len(), 8 + 2 + 8 + 8 + 2 + 8 * 4 + 4 + t.meta.label.len() + 4 * t.len());
            let back = read_trace_from(buf.as_slice(), &p).unwrap();
            assert_eq!(back.meta, t.meta);
            for c in 0..2 {
                assert!(back.channels[c]
                    .iter()
                    .zip(&t.channels[c])
                    .all(|(x, y)| x.to_bits() == y.to_bits()));
            }
            let mut again = Vec::new();
            write_trace_to(&mut again, &back, &p).unwrap();
            assert_eq!(again, buf);
        }
    }

    #[test]
    fn left_aligned_codes() {
        let t = sample_trace(10);
        let mut buf = Vec::new();
        write_trace_to(&mut buf, &t, Path::new("x")).unwrap();
        let header = buf.len() - 4 * t.len();
        for pair in buf[header..].chunks_exact(2) {
            assert_eq!(i16::from_le_bytes([pair[0], pair[1]]) % 64, 0);
        }
    }

    #[test]
    fn rejects_bad_magic_and_truncation() {
        let t = sample_trace(10);
        let mut buf = Vec::new();
        write_trace_to(&mut buf, &t, Path::new("x")).unwrap();
        let mut bad = buf.clone();
        bad[0] = b'X';
        let err = read_trace_from(bad.as_slice(), Path::new("run.trc")).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("run.trc") && msg.contains("COSHTRC1"), "{msg}");
        assert!(matches!(err, CoshError::Format { .. }));
        let short = &buf[..buf.len() - 3];
        assert!(matches!(read_trace_from(short, Path::new("x")), Err(CoshError::Format { .. })));
        let mut ver = buf.clone();
        ver[8] = 9;
        assert!(matches!(read_trace_from(ver.as_slice(), Path::new("x")), Err(CoshError::Format { .. })));
        assert!(read_trace_from(&buf[..5], Path::new("x")).is_err());
    }

    #[test]
    fn rejects_wide_or_off_grid_samples() {
        let mut t = sample_trace(10);
        t.meta.bits = 24;
        assert!(write_trace_to(&mut Vec::new(), &t, Path::new("x")).is_err());
        let mut t = sample_trace(10);
        t.channels[0][3] = 1e-7;
        assert!(write_trace_to(&mut Vec::new(), &t, Path::new("x")).is_err());
    }
}
