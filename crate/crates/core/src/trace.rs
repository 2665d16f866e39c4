//! Binned count series and their CSV form (`bin_index,bin_start_s,counts`).

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FringeTrace {
    pub counts: Vec<u64>,
    /// Width of one bin, s.
    pub bin_duration: f64,
    /// Trombone stage velocity during the scan, m/s, when known.
    pub stage_velocity: Option<f64>,
    pub label: String,
}

impl FringeTrace {
    pub fn new(counts: Vec<u64>, bin_duration: f64) -> Self {
        FringeTrace {
            counts,
            bin_duration,
            stage_velocity: None,
            label: String::new(),
        }
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn with_stage_velocity(mut self, v: f64) -> Self {
        self.stage_velocity = Some(v);
        self
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn mean(&self) -> f64 {
        if self.counts.is_empty() {
            return 0.0;
        }
        self.total() as f64 / self.counts.len() as f64
    }

    pub fn as_f64(&self) -> Vec<f64> {
        self.counts.iter().map(|&c| c as f64).collect()
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "bin_index,bin_start_s,counts")?;
        for (k, c) in self.counts.iter().enumerate() {
            writeln!(w, "{},{:.9},{}", k, k as f64 * self.bin_duration, c)?;
        }
        w.flush()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let f = File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(BufWriter::new(f))
            .map_err(|e| Error::io(path, e))
    }

    pub fn read_csv<R: BufRead>(r: R) -> std::result::Result<Self, String> {
        let mut counts = Vec::new();
        let mut starts = Vec::new();
        for (n, line) in r.lines().enumerate() {
            let line = line.map_err(|e| e.to_string())?;
            let line = line.trim();
            if n == 0 {
                if line != "bin_index,bin_start_s,counts" {
                    return Err(format!("unexpected header `{line}`"));
                }
                continue;
            }
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() != 3 {
                return Err(format!("line {}: expected 3 fields", n + 1));
            }
            let idx: usize = fields[0]
                .parse()
                .map_err(|e| format!("line {}: bin_index: {e}", n + 1))?;
            if idx != counts.len() {
                return Err(format!("line {}: bin_index {idx} out of sequence", n + 1));
            }
            let start: f64 = fields[1]
                .parse()
                .map_err(|e| format!("line {}: bin_start_s: {e}", n + 1))?;
            let c: u64 = fields[2]
                .parse()
                .map_err(|e| format!("line {}: counts: {e}", n + 1))?;
            starts.push(start);
            counts.push(c);
        }
        if counts.len() < 2 {
            return Err("at least two bins are needed to infer the bin width".into());
        }
        let width = (starts[starts.len() - 1] - starts[0]) / (starts.len() - 1) as f64;
        if !(width > 0.0) {
            return Err("bin starts are not increasing".into());
        }
        // Bin starts are written with nanosecond precision.
        let width = (width * 1e9).round() / 1e9;
        Ok(FringeTrace::new(counts, width))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let f = File::open(path).map_err(|e| Error::io(path, e))?;
        let label = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        Self::read_csv(BufReader::new(f))
            .map(|t| t.with_label(label))
            .map_err(|m| Error::parse(path.display().to_string(), m))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip() {
        let t = FringeTrace::new(vec![3, 0, 17, 4], 0.07);
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(
            text.starts_with("bin_index,bin_start_s,counts\n0,0.000000000,3\n1,0.070000000,0\n")
        );
        let back = FringeTrace::read_csv(&buf[..]).unwrap();
        assert_eq!(back.counts, t.counts);
        assert_eq!(back.bin_duration, 0.07);
    }

    #[test]
    fn malformed_csv() {
        assert!(FringeTrace::read_csv("a,b,c\n".as_bytes()).is_err());
        assert!(FringeTrace::read_csv("bin_index,bin_start_s,counts\n0,0,1\n".as_bytes()).is_err());
        assert!(
            FringeTrace::read_csv("bin_index,bin_start_s,counts\n0,0,1\n2,0.1,1\n".as_bytes())
                .is_err()
        );
        assert!(
            FringeTrace::read_csv("bin_index,bin_start_s,counts\n0,0,1\n1,0.1,x\n".as_bytes())
                .is_err()
        );
        assert!(
            FringeTrace::read_csv("bin_index,bin_start_s,counts\n0,0,1\n1,0.1\n".as_bytes())
                .is_err()
        );
    }
}
