//! Time-tag streams and their on-disk formats.
//!
//! Binary layout (little endian):
//!
//! ```text
//! header  : b"PTAG" | version: u16 | 10 reserved zero bytes      (16 bytes)
//! record  : channel: u8 | timestamp_ps: u64                       (9 bytes)
//! ```
//!
//! Records from both channels are interleaved in time order. The CSV form
//! has a `channel,timestamp_ps` header and one record per line, with the
//! channel written as its numeric code (0 signal, 1 idler).

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"PTAG";
pub const FORMAT_VERSION: u16 = 1;
pub const HEADER_LEN: usize = 16;
pub const RECORD_LEN: usize = 9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
#[repr(u8)]
pub enum Channel {
    Signal = 0,
    Idler = 1,
}

impl Channel {
    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(Channel::Signal),
            1 => Some(Channel::Idler),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Channel::Signal => "signal",
            Channel::Idler => "idler",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct TimeTag {
    pub channel: Channel,
    /// Picoseconds since the start of the scan.
    pub timestamp: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct StreamMeta {
    pub duration_ps: u64,
    pub seed: u64,
    pub scenario: String,
}

/// Detection times of one channel, nondecreasing.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TimeTagStream {
    pub channel: Channel,
    timestamps: Vec<u64>,
    pub meta: StreamMeta,
}

impl TimeTagStream {
    /// Wraps already ordered timestamps; fails on the first inversion.
    pub fn new(channel: Channel, timestamps: Vec<u64>, meta: StreamMeta) -> Result<Self> {
        if let Some(i) = first_inversion(&timestamps) {
            return Err(Error::UnsortedStream {
                channel: channel.name(),
                index: i,
            });
        }
        Ok(TimeTagStream {
            channel,
            timestamps,
            meta,
        })
    }

    pub fn from_unsorted(channel: Channel, mut timestamps: Vec<u64>, meta: StreamMeta) -> Self {
        timestamps.sort_unstable();
        TimeTagStream {
            channel,
            timestamps,
            meta,
        }
    }

    pub fn timestamps(&self) -> &[u64] {
        &self.timestamps
    }

    pub fn len(&self) -> usize {
        self.timestamps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.timestamps.is_empty()
    }

    pub fn duration_s(&self) -> f64 {
        crate::scalar::ps_to_seconds(self.meta.duration_ps)
    }

    /// Mean count rate over the stream duration.
    pub fn rate(&self) -> f64 {
        if self.meta.duration_ps == 0 {
            return 0.0;
        }
        self.len() as f64 / self.duration_s()
    }

    pub fn into_timestamps(self) -> Vec<u64> {
        self.timestamps
    }
}

pub(crate) fn first_inversion(ts: &[u64]) -> Option<usize> {
    ts.windows(2).position(|w| w[1] < w[0]).map(|i| i + 1)
}

/// Time-ordered merge of two channels; ties put the signal first.
pub fn interleave(signal: &[u64], idler: &[u64]) -> Vec<TimeTag> {
    let mut out = Vec::with_capacity(signal.len() + idler.len());
    let (mut i, mut j) = (0, 0);
    while i < signal.len() || j < idler.len() {
        let take_signal = j >= idler.len() || (i < signal.len() && signal[i] <= idler[j]);
        if take_signal {
            out.push(TimeTag {
                channel: Channel::Signal,
                timestamp: signal[i],
            });
            i += 1;
        } else {
            out.push(TimeTag {
                channel: Channel::Idler,
                timestamp: idler[j],
            });
            j += 1;
        }
    }
    out
}

/// Splits tags into per-channel timestamp lists, keeping file order.
pub fn split_channels(tags: &[TimeTag]) -> (Vec<u64>, Vec<u64>) {
    let mut s = Vec::new();
    let mut i = Vec::new();
    for t in tags {
        match t.channel {
            Channel::Signal => s.push(t.timestamp),
            Channel::Idler => i.push(t.timestamp),
        }
    }
    (s, i)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TagFormat {
    #[default]
    Binary,
    Csv,
}

pub fn write_binary<W: Write>(mut w: W, tags: &[TimeTag]) -> std::io::Result<()> {
    let mut header = [0u8; HEADER_LEN];
    header[..4].copy_from_slice(MAGIC);
    header[4..6].copy_from_slice(&FORMAT_VERSION.to_le_bytes());
    w.write_all(&header)?;
    let mut rec = [0u8; RECORD_LEN];
    for t in tags {
        rec[0] = t.channel.code();
        rec[1..].copy_from_slice(&t.timestamp.to_le_bytes());
        w.write_all(&rec)?;
    }
    w.flush()
}

pub fn read_binary<R: Read>(mut r: R) -> std::result::Result<Vec<TimeTag>, String> {
    let mut header = [0u8; HEADER_LEN];
    r.read_exact(&mut header)
        .map_err(|e| format!("short header: {e}"))?;
    if &header[..4] != MAGIC {
        return Err("bad magic, expected PTAG".into());
    }
    let version = u16::from_le_bytes([header[4], header[5]]);
    if version != FORMAT_VERSION {
        return Err(format!("unsupported version {version}"));
    }
    let mut body = Vec::new();
    r.read_to_end(&mut body).map_err(|e| e.to_string())?;
    if body.len() % RECORD_LEN != 0 {
        return Err(format!(
            "truncated record: {} trailing bytes",
            body.len() % RECORD_LEN
        ));
    }
    body.chunks_exact(RECORD_LEN)
        .enumerate()
        .map(|(k, rec)| {
            let channel = Channel::from_code(rec[0])
                .ok_or_else(|| format!("record {k}: unknown channel {}", rec[0]))?;
            let mut ts = [0u8; 8];
            ts.copy_from_slice(&rec[1..]);
            Ok(TimeTag {
                channel,
                timestamp: u64::from_le_bytes(ts),
            })
        })
        .collect()
}

pub fn write_csv<W: Write>(mut w: W, tags: &[TimeTag]) -> std::io::Result<()> {
    writeln!(w, "channel,timestamp_ps")?;
    for t in tags {
        writeln!(w, "{},{}", t.channel.code(), t.timestamp)?;
    }
    w.flush()
}

pub fn read_csv<R: BufRead>(r: R) -> std::result::Result<Vec<TimeTag>, String> {
    let mut out = Vec::new();
    for (n, line) in r.lines().enumerate() {
        let line = line.map_err(|e| e.to_string())?;
        let line = line.trim();
        if n == 0 {
            if line != "channel,timestamp_ps" {
                return Err(format!("unexpected header `{line}`"));
            }
            continue;
        }
        if line.is_empty() {
            continue;
        }
        let (ch, ts) = line
            .split_once(',')
            .ok_or_else(|| format!("line {}: expected two fields", n + 1))?;
        let channel = match ch.trim() {
            "0" | "signal" => Channel::Signal,
            "1" | "idler" => Channel::Idler,
            other => return Err(format!("line {}: unknown channel `{other}`", n + 1)),
        };
        let timestamp = ts
            .trim()
            .parse::<u64>()
            .map_err(|e| format!("line {}: {e}", n + 1))?;
        out.push(TimeTag { channel, timestamp });
    }
    Ok(out)
}

/// Writes both channels to `path` in the requested format.
pub fn write_tag_file(path: &Path, signal: &[u64], idler: &[u64], format: TagFormat) -> Result<()> {
    let tags = interleave(signal, idler);
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let w = BufWriter::new(file);
    match format {
        TagFormat::Binary => write_binary(w, &tags),
        TagFormat::Csv => write_csv(w, &tags),
    }
    .map_err(|e| Error::io(path, e))
}

/// Reads a tag file, detecting the format from its first bytes.
pub fn read_tag_file(path: &Path) -> Result<Vec<TimeTag>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = BufReader::new(file);
    let is_binary = r
        .fill_buf()
        .map_err(|e| Error::io(path, e))?
        .starts_with(MAGIC);
    let parsed = if is_binary {
        read_binary(r)
    } else {
        read_csv(r)
    };
    parsed.map_err(|m| Error::parse(path.display().to_string(), m))
}
