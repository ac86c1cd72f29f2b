//! The "EEGB" container: a 24-byte little-endian header
//! (`magic "EEGB"`, `version u32 = 1`, `n_trials u32`, `n_channels u32`,
//! `n_samples u32`, `dtype u32 = 0` for `f32`) followed by the trial-major,
//! row-major payload. Metadata lives in a JSON-lines sidecar next to the
//! container, named `<file>.meta.jsonl`.
//!
//! Epoch sets write one [`TrialMeta`] per line. Raw recordings are stored
//! as a single-trial container (`channels × samples`) whose sidecar starts
//! with a [`RawHeader`] line followed by one [`RawEvent`] per onset.

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{EpochSet, TrialMeta};
use crate::error::{Error, Result};
use crate::signal::RawRecording;

pub const CONTAINER_MAGIC: [u8; 4] = *b"EEGB";
pub const CONTAINER_VERSION: u32 = 1;
pub const DTYPE_F32: u32 = 0;
const HEADER_LEN: usize = 24;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ContainerHeader {
    pub n_trials: u32,
    pub n_channels: u32,
    pub n_samples: u32,
}

impl ContainerHeader {
    fn payload_values(&self) -> usize {
        self.n_trials as usize * self.n_channels as usize * self.n_samples as usize
    }
}

fn sidecar(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".meta.jsonl");
    PathBuf::from(s)
}

fn u32_at(bytes: &[u8], at: usize) -> u32 {
    u32::from_le_bytes(bytes[at..at + 4].try_into().expect("4-byte slice"))
}

fn write_container(path: &Path, header: ContainerHeader, values: &[f32]) -> Result<()> {
    debug_assert_eq!(values.len(), header.payload_values());
    let mut bytes = Vec::with_capacity(HEADER_LEN + 4 * values.len());
    bytes.extend_from_slice(&CONTAINER_MAGIC);
    for v in [CONTAINER_VERSION, header.n_trials, header.n_channels, header.n_samples, DTYPE_F32] {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    for v in values {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// Parses a container from memory; errors distinguish bad magic, version
/// mismatch and truncated payloads.
pub fn parse_container(bytes: &[u8]) -> Result<(ContainerHeader, Vec<f32>)> {
    if bytes.len() < 4 {
        return Err(Error::Truncated {
            expected: HEADER_LEN,
            found: bytes.len(),
        });
    }
    let found: [u8; 4] = bytes[..4].try_into().expect("4-byte slice");
    if found != CONTAINER_MAGIC {
        return Err(Error::BadMagic {
            expected: CONTAINER_MAGIC,
            found,
        });
    }
    if bytes.len() < HEADER_LEN {
        return Err(Error::Truncated {
            expected: HEADER_LEN,
            found: bytes.len(),
        });
    }
    let version = u32_at(bytes, 4);
    if version != CONTAINER_VERSION {
        return Err(Error::VersionMismatch {
            expected: CONTAINER_VERSION,
            found: version,
        });
    }
    let dtype = u32_at(bytes, 20);
    if dtype != DTYPE_F32 {
        return Err(Error::UnsupportedDtype(dtype));
    }
    let header = ContainerHeader {
        n_trials: u32_at(bytes, 8),
        n_channels: u32_at(bytes, 12),
        n_samples: u32_at(bytes, 16),
    };
    let expected = HEADER_LEN + 4 * header.payload_values();
    if bytes.len() < expected {
        return Err(Error::Truncated {
            expected,
            found: bytes.len(),
        });
    }
    if bytes.len() > expected {
        return Err(Error::TrailingBytes {
            expected,
            found: bytes.len(),
        });
    }
    let values = bytes[HEADER_LEN..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().expect("4-byte chunk")))
        .collect();
    Ok((header, values))
}

fn read_container(path: &Path) -> Result<(ContainerHeader, Vec<f32>)> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_container(&bytes)
}

fn write_lines<T: Serialize>(path: &Path, first: Option<String>, rows: &[T]) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let io = |e| Error::io(path, e);
    if let Some(line) = first {
        writeln!(w, "{line}").map_err(io)?;
    }
    for r in rows {
        let line = serde_json::to_string(r).expect("metadata serializes");
        writeln!(w, "{line}").map_err(io)?;
    }
    w.flush().map_err(io)
}

fn read_lines(path: &Path) -> Result<Vec<String>> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    BufReader::new(file)
        .lines()
        .filter(|l| !matches!(l, Ok(s) if s.trim().is_empty()))
        .collect::<std::io::Result<_>>()
        .map_err(|e| Error::io(path, e))
}

fn parse_line<T: for<'de> Deserialize<'de>>(path: &Path, lineno: usize, line: &str) -> Result<T> {
    serde_json::from_str(line).map_err(|e| Error::Malformed {
        path: path.to_path_buf(),
        reason: format!("line {}: {e}", lineno + 1),
    })
}

/// Writes the container and its metadata sidecar.
pub fn save_epochs(set: &EpochSet, path: &Path) -> Result<()> {
    set.validate()?;
    let header = ContainerHeader {
        n_trials: set.len() as u32,
        n_channels: set.n_channels as u32,
        n_samples: set.n_samples as u32,
    };
    write_container(path, header, &set.data)?;
    write_lines(&sidecar(path), None, &set.meta)
}

pub fn load_epochs(path: &Path) -> Result<EpochSet> {
    let (header, data) = read_container(path)?;
    let side = sidecar(path);
    let lines = read_lines(&side)?;
    if lines.len() != header.n_trials as usize {
        return Err(Error::LengthMismatch {
            meta: lines.len(),
            tensor: header.n_trials as usize,
        });
    }
    let meta = lines
        .iter()
        .enumerate()
        .map(|(i, l)| parse_line::<TrialMeta>(&side, i, l))
        .collect::<Result<_>>()?;
    EpochSet::new(header.n_channels as usize, header.n_samples as usize, data, meta)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RawHeader {
    pub sample_rate: u32,
    pub channel_names: Vec<String>,
}

/// One stimulus onset with the trial it starts.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RawEvent {
    pub onset: usize,
    #[serde(flatten)]
    pub meta: TrialMeta,
}

/// Writes a raw recording; `meta[i]` describes `rec.events[i]`.
pub fn save_raw(rec: &RawRecording, meta: &[TrialMeta], path: &Path) -> Result<()> {
    rec.validate()?;
    if meta.len() != rec.events.len() {
        return Err(Error::LengthMismatch {
            meta: meta.len(),
            tensor: rec.events.len(),
        });
    }
    let header = ContainerHeader {
        n_trials: 1,
        n_channels: rec.data.len() as u32,
        n_samples: rec.n_samples() as u32,
    };
    let values: Vec<f32> = rec.data.iter().flatten().map(|&v| v as f32).collect();
    write_container(path, header, &values)?;
    let events: Vec<RawEvent> = rec
        .events
        .iter()
        .zip(meta)
        .map(|(&(onset, _), m)| RawEvent { onset, meta: m.clone() })
        .collect();
    let head = RawHeader {
        sample_rate: rec.sample_rate,
        channel_names: rec.channel_names.clone(),
    };
    write_lines(&sidecar(path), Some(serde_json::to_string(&head).expect("header serializes")), &events)
}

pub fn load_raw(path: &Path) -> Result<(RawRecording, Vec<TrialMeta>)> {
    let (header, values) = read_container(path)?;
    if header.n_trials != 1 {
        return Err(Error::Malformed {
            path: path.to_path_buf(),
            reason: format!("raw recording container holds {} trials, expected 1", header.n_trials),
        });
    }
    let side = sidecar(path);
    let lines = read_lines(&side)?;
    let Some((first, rest)) = lines.split_first() else {
        return Err(Error::Malformed {
            path: side,
            reason: "missing header line".into(),
        });
    };
    let head: RawHeader = parse_line(&side, 0, first)?;
    if head.channel_names.len() != header.n_channels as usize {
        return Err(Error::LengthMismatch {
            meta: head.channel_names.len(),
            tensor: header.n_channels as usize,
        });
    }
    let events: Vec<RawEvent> = rest
        .iter()
        .enumerate()
        .map(|(i, l)| parse_line(&side, i + 1, l))
        .collect::<Result<_>>()?;
    let ns = header.n_samples as usize;
    let data = values.chunks(ns.max(1)).map(|c| c.iter().map(|&v| v as f64).collect()).collect();
    let rec = RawRecording::new(
        data,
        head.channel_names,
        head.sample_rate,
        events.iter().map(|e| (e.onset, e.meta.trial_id)).collect(),
    )?;
    Ok((rec, events.into_iter().map(|e| e.meta).collect()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn header_bytes(magic: &[u8; 4], version: u32, n: u32) -> Vec<u8> {
        let mut b = magic.to_vec();
        for v in [version, n, 2, 2, 0] {
            b.extend_from_slice(&v.to_le_bytes());
        }
        b
    }

    #[test]
    fn distinct_header_errors() {
        let mut ok = header_bytes(b"EEGB", 1, 1);
        ok.extend_from_slice(&[0u8; 16]);
        assert!(parse_container(&ok).is_ok());
        assert!(matches!(parse_container(&header_bytes(b"EEGX", 1, 1)), Err(Error::BadMagic { .. })));
        assert!(matches!(
            parse_container(&header_bytes(b"EEGB", 2, 1)),
            Err(Error::VersionMismatch { found: 2, .. })
        ));
        assert!(matches!(parse_container(&ok[..30]), Err(Error::Truncated { .. })));
        assert!(matches!(parse_container(&ok[..10]), Err(Error::Truncated { .. })));
    }
}
