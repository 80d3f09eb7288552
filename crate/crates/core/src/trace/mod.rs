//! Trace records, the text and binary trace formats, and synthetic workloads.
//!
//! A record is `bubbles` non-memory instructions followed by at most one read
//! and at most one write. Text grammar, one record per line:
//!
//! ```text
//! <bubbles> [R:<hex-addr>] [W:<hex-addr>]
//! ```
//!
//! Lines starting with `#` are comments. Hex addresses may omit the `0x`
//! prefix.

mod binary;
mod synthetic;

use std::fmt;
use std::fs::File;
use std::io::{self, BufRead, BufReader, Read};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use binary::{BinaryTraceReader, BinaryTraceWriter, BINARY_MAGIC, BINARY_VERSION};
pub use synthetic::{generate_synthetic, PatternKind, SyntheticPattern, SyntheticTrace};

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("line {line}: malformed record at `{token}`: {reason}")]
    Malformed {
        line: usize,
        token: String,
        reason: &'static str,
    },
    #[error("line {line}: negative bubble count `{token}`")]
    NegativeBubbles { line: usize, token: String },
    #[error("line {line}: record has no bubbles and no memory access")]
    EmptyRecord { line: usize },
    #[error("binary trace: {0}")]
    Binary(String),
    #[error("invalid synthetic pattern: {0}")]
    InvalidPattern(String),
    #[error("trace i/o: {0}")]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TraceRecord {
    pub bubbles: u64,
    pub read: Option<u64>,
    pub write: Option<u64>,
}

impl TraceRecord {
    pub fn bubbles(n: u64) -> Self {
        Self {
            bubbles: n,
            read: None,
            write: None,
        }
    }

    pub fn read(bubbles: u64, addr: u64) -> Self {
        Self {
            bubbles,
            read: Some(addr),
            write: None,
        }
    }

    pub fn write(bubbles: u64, addr: u64) -> Self {
        Self {
            bubbles,
            read: None,
            write: Some(addr),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.bubbles == 0 && self.read.is_none() && self.write.is_none()
    }

    /// Instructions this record contributes: bubbles plus one per access.
    pub fn instructions(&self) -> u64 {
        self.bubbles + self.read.is_some() as u64 + self.write.is_some() as u64
    }

    pub fn memory_accesses(&self) -> u64 {
        self.read.is_some() as u64 + self.write.is_some() as u64
    }

    /// Parses one record line. `line_no` is only used for error reporting.
    pub fn parse(line: &str, line_no: usize) -> Result<Self, TraceError> {
        let mut tokens = line.split_whitespace();
        let first = tokens.next().ok_or(TraceError::EmptyRecord { line: line_no })?;
        let bubbles = parse_bubbles(first, line_no)?;
        let mut record = TraceRecord::bubbles(bubbles);
        for token in tokens {
            let (tag, hex) = token.split_once(':').ok_or_else(|| TraceError::Malformed {
                line: line_no,
                token: token.to_string(),
                reason: "expected R:<hex> or W:<hex>",
            })?;
            let addr = parse_hex(hex).ok_or_else(|| TraceError::Malformed {
                line: line_no,
                token: token.to_string(),
                reason: "bad hex address",
            })?;
            let slot = match tag {
                "R" | "r" => &mut record.read,
                "W" | "w" => &mut record.write,
                _ => {
                    return Err(TraceError::Malformed {
                        line: line_no,
                        token: token.to_string(),
                        reason: "unknown field tag",
                    })
                }
            };
            if slot.replace(addr).is_some() {
                return Err(TraceError::Malformed {
                    line: line_no,
                    token: token.to_string(),
                    reason: "duplicate field",
                });
            }
        }
        if record.is_empty() {
            return Err(TraceError::EmptyRecord { line: line_no });
        }
        Ok(record)
    }
}

fn parse_bubbles(token: &str, line: usize) -> Result<u64, TraceError> {
    if token.starts_with('-') && token[1..].bytes().all(|b| b.is_ascii_digit()) && token.len() > 1 {
        return Err(TraceError::NegativeBubbles {
            line,
            token: token.to_string(),
        });
    }
    if token.is_empty() || !token.bytes().all(|b| b.is_ascii_digit()) {
        return Err(TraceError::Malformed {
            line,
            token: token.to_string(),
            reason: "expected bubble count",
        });
    }
    token.parse().map_err(|_| TraceError::Malformed {
        line,
        token: token.to_string(),
        reason: "bubble count out of range",
    })
}

fn parse_hex(s: &str) -> Option<u64> {
    let digits = s
        .strip_prefix("0x")
        .or_else(|| s.strip_prefix("0X"))
        .unwrap_or(s);
    if digits.is_empty() {
        return None;
    }
    u64::from_str_radix(digits, 16).ok()
}

/// Canonical form: single spaces, `0x` prefix, uppercase hex digits.
impl fmt::Display for TraceRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.bubbles)?;
        if let Some(a) = self.read {
            write!(f, " R:0x{a:X}")?;
        }
        if let Some(a) = self.write {
            write!(f, " W:0x{a:X}")?;
        }
        Ok(())
    }
}

/// Lazily parses a text trace, skipping blank and `#` comment lines.
pub struct TextTraceReader<R> {
    lines: io::Lines<R>,
    line_no: usize,
}

impl<R: BufRead> TextTraceReader<R> {
    pub fn new(reader: R) -> Self {
        Self {
            lines: reader.lines(),
            line_no: 0,
        }
    }
}

impl<R: BufRead> Iterator for TextTraceReader<R> {
    type Item = Result<TraceRecord, TraceError>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            let line = match self.lines.next()? {
                Ok(l) => l,
                Err(e) => return Some(Err(TraceError::Io(e))),
            };
            self.line_no += 1;
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            return Some(TraceRecord::parse(trimmed, self.line_no));
        }
    }
}

/// Streams records from any byte source of text records.
pub fn stream_trace<R: Read>(source: R) -> TextTraceReader<BufReader<R>> {
    TextTraceReader::new(BufReader::new(source))
}

pub type RecordStream = Box<dyn Iterator<Item = Result<TraceRecord, TraceError>> + Send>;

/// Opens a trace file, picking the binary or text decoder from the magic bytes.
pub fn open_trace(path: &Path) -> Result<RecordStream, TraceError> {
    let mut file = BufReader::new(File::open(path)?);
    let head = file.fill_buf()?;
    if head.starts_with(BINARY_MAGIC) {
        Ok(Box::new(BinaryTraceReader::new(file)?))
    } else {
        Ok(Box::new(TextTraceReader::new(file)))
    }
}
