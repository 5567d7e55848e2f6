//! Frame-wise class probability matrices and their on-disk formats.
//!
//! Two encodings are accepted, distinguished by the first four bytes:
//!
//! - binary: `b"CDPM" | version u32 | T u32 | C u32`, all little-endian,
//!   followed by `T * C` little-endian `f32` values in row-major order;
//! - CSV: `T` lines of `C` comma-separated decimal floats.

use std::path::Path;

use crate::error::{Error, Result};

pub const BINARY_MAGIC: [u8; 4] = *b"CDPM";
pub const BINARY_VERSION: u32 = 1;
const HEADER_LEN: usize = 16;

/// A `T x C` matrix of non-negative per-frame class scores.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameProbMatrix {
    data: Vec<f64>,
    frames: usize,
    classes: usize,
}

impl FrameProbMatrix {
    /// Builds a matrix from row-major data, validating every entry.
    pub fn new(data: Vec<f64>, frames: usize, classes: usize) -> Result<Self> {
        if frames == 0 || classes == 0 {
            return Err(Error::InvalidArgument(
                "probability matrix must have at least one frame and one class".into(),
            ));
        }
        if data.len() != frames * classes {
            return Err(Error::DimensionMismatch {
                what: "probability entries",
                expected: frames * classes,
                found: data.len(),
            });
        }
        for (t, row) in data.chunks_exact(classes).enumerate() {
            if let Some(c) = row.iter().position(|p| !p.is_finite() || *p < 0.0) {
                return Err(Error::InvalidArgument(format!(
                    "entry ({t}, {c}) = {} is not a finite non-negative number",
                    row[c]
                )));
            }
            if !row.iter().any(|&p| p > 0.0) {
                return Err(Error::InvalidArgument(format!("row {t} has no positive entry")));
            }
        }
        Ok(Self { data, frames, classes })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let classes = rows.first().map_or(0, Vec::len);
        if let Some(r) = rows.iter().find(|r| r.len() != classes) {
            return Err(Error::DimensionMismatch {
                what: "row length",
                expected: classes,
                found: r.len(),
            });
        }
        Self::new(rows.concat(), rows.len(), classes)
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn get(&self, t: usize, c: usize) -> f64 {
        self.data[t * self.classes + c]
    }

    pub fn row(&self, t: usize) -> &[f64] {
        &self.data[t * self.classes..(t + 1) * self.classes]
    }

    pub fn rows(&self) -> std::slice::ChunksExact<'_, f64> {
        self.data.chunks_exact(self.classes)
    }

    /// `ln(max(p, floor))` for every entry, row-major.
    pub fn log_floored(&self, floor: f64) -> Vec<f64> {
        self.data.iter().map(|&p| p.max(floor).ln()).collect()
    }

    /// Per-frame argmax, lowest class on ties.
    pub fn argmax_labels(&self) -> Vec<usize> {
        self.rows()
            .map(|row| {
                row.iter()
                    .enumerate()
                    .fold(
                        (0, f64::NEG_INFINITY),
                        |best, (c, &p)| {
                            if p > best.1 {
                                (c, p)
                            } else {
                                best
                            }
                        },
                    )
                    .0
            })
            .collect()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for row in self.rows() {
            let line: Vec<String> = row.iter().map(|p| p.to_string()).collect();
            out.push_str(&line.join(","));
            out.push('\n');
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut rows = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let row = line
                .split(',')
                .enumerate()
                .map(|(j, field)| {
                    field
                        .trim()
                        .parse::<f64>()
                        .map_err(|e| Error::parse(format!("line {}, column {}", i + 1, j + 1), e.to_string()))
                })
                .collect::<Result<Vec<f64>>>()?;
            if let Some(first) = rows.first() {
                let first: &Vec<f64> = first;
                if row.len() != first.len() {
                    return Err(Error::parse(
                        format!("line {}", i + 1),
                        format!("expected {} columns, found {}", first.len(), row.len()),
                    ));
                }
            }
            rows.push(row);
        }
        if rows.is_empty() {
            return Err(Error::parse("line 1", "no rows"));
        }
        Self::from_rows(&rows).map_err(|e| match e {
            Error::InvalidArgument(m) => Error::parse("matrix", m),
            other => other,
        })
    }

    /// Encodes as the binary format. Values are narrowed to `f32`.
    pub fn to_binary(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_LEN + 4 * self.data.len());
        out.extend_from_slice(&BINARY_MAGIC);
        out.extend_from_slice(&BINARY_VERSION.to_le_bytes());
        out.extend_from_slice(&(self.frames as u32).to_le_bytes());
        out.extend_from_slice(&(self.classes as u32).to_le_bytes());
        for &p in &self.data {
            out.extend_from_slice(&(p as f32).to_le_bytes());
        }
        out
    }

    pub fn from_binary(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < HEADER_LEN || bytes[..4] != BINARY_MAGIC {
            return Err(Error::parse("header", "missing binary magic"));
        }
        let word = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().unwrap());
        let version = word(4);
        if version != BINARY_VERSION {
            return Err(Error::SchemaVersionMismatch {
                expected: BINARY_VERSION,
                found: version,
            });
        }
        let frames = word(8) as usize;
        let classes = word(12) as usize;
        let payload = &bytes[HEADER_LEN..];
        let expected = frames
            .checked_mul(classes)
            .and_then(|n| n.checked_mul(4))
            .ok_or_else(|| Error::parse("header", "matrix dimensions overflow"))?;
        if payload.len() != expected {
            return Err(Error::parse(
                "payload",
                format!(
                    "expected {expected} bytes for {frames}x{classes}, found {}",
                    payload.len()
                ),
            ));
        }
        let data = payload
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes(b.try_into().unwrap()) as f64)
            .collect();
        Self::new(data, frames, classes).map_err(|e| match e {
            Error::InvalidArgument(m) => Error::parse("payload", m),
            other => other,
        })
    }

    /// Decodes either format, detected by the magic bytes.
    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.starts_with(&BINARY_MAGIC) {
            Self::from_binary(bytes)
        } else {
            let text = std::str::from_utf8(bytes).map_err(|e| Error::parse("csv", format!("not UTF-8: {e}")))?;
            Self::from_csv(text)
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes).map_err(|e| match e {
            Error::Parse { location, message } => Error::Parse {
                location: format!("{}: {location}", path.display()),
                message,
            },
            other => other,
        })
    }
}
