//! Length-prefixed binary trace encoding.
//!
//! Layout: `DLTR`, one version byte, then per record a LEB128 bubble count,
//! a flags byte (bit 0 read present, bit 1 write present) and the present
//! addresses as 8-byte little-endian words, read first.

use std::io::{self, BufRead, Write};

use super::{TraceError, TraceRecord};

pub const BINARY_MAGIC: &[u8; 4] = b"DLTR";
pub const BINARY_VERSION: u8 = 1;

const FLAG_READ: u8 = 1;
const FLAG_WRITE: u8 = 2;

pub struct BinaryTraceWriter<W: Write> {
    out: W,
}

impl<W: Write> BinaryTraceWriter<W> {
    pub fn new(mut out: W) -> io::Result<Self> {
        out.write_all(BINARY_MAGIC)?;
        out.write_all(&[BINARY_VERSION])?;
        Ok(Self { out })
    }

    pub fn write_record(&mut self, rec: &TraceRecord) -> io::Result<()> {
        let mut v = rec.bubbles;
        loop {
            let byte = (v & 0x7f) as u8;
            v >>= 7;
            if v == 0 {
                self.out.write_all(&[byte])?;
                break;
            }
            self.out.write_all(&[byte | 0x80])?;
        }
        let flags = rec.read.map_or(0, |_| FLAG_READ) | rec.write.map_or(0, |_| FLAG_WRITE);
        self.out.write_all(&[flags])?;
        if let Some(a) = rec.read {
            self.out.write_all(&a.to_le_bytes())?;
        }
        if let Some(a) = rec.write {
            self.out.write_all(&a.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn finish(mut self) -> io::Result<W> {
        self.out.flush()?;
        Ok(self.out)
    }
}

pub struct BinaryTraceReader<R> {
    input: R,
    index: usize,
    failed: bool,
}

impl<R: BufRead> BinaryTraceReader<R> {
    pub fn new(mut input: R) -> Result<Self, TraceError> {
        let mut header = [0u8; 5];
        input
            .read_exact(&mut header)
            .map_err(|_| TraceError::Binary("truncated header".into()))?;
        if &header[..4] != BINARY_MAGIC {
            return Err(TraceError::Binary("bad magic".into()));
        }
        if header[4] != BINARY_VERSION {
            return Err(TraceError::Binary(format!("unsupported version {}", header[4])));
        }
        Ok(Self {
            input,
            index: 0,
            failed: false,
        })
    }

    fn read_byte(&mut self) -> Result<Option<u8>, TraceError> {
        let buf = self.input.fill_buf()?;
        if buf.is_empty() {
            return Ok(None);
        }
        let b = buf[0];
        self.input.consume(1);
        Ok(Some(b))
    }

    fn truncated(&self) -> TraceError {
        TraceError::Binary(format!("record {} truncated", self.index))
    }

    fn read_record(&mut self) -> Result<Option<TraceRecord>, TraceError> {
        let mut bubbles = 0u64;
        let mut shift = 0;
        let mut first = true;
        loop {
            let b = match self.read_byte()? {
                Some(b) => b,
                None if first => return Ok(None),
                None => return Err(self.truncated()),
            };
            first = false;
            if shift >= 64 {
                return Err(TraceError::Binary(format!("record {}: varint overflow", self.index)));
            }
            bubbles |= u64::from(b & 0x7f) << shift;
            shift += 7;
            if b & 0x80 == 0 {
                break;
            }
        }
        let flags = self.read_byte()?.ok_or_else(|| self.truncated())?;
        if flags & !(FLAG_READ | FLAG_WRITE) != 0 {
            return Err(TraceError::Binary(format!("record {}: bad flags {flags:#x}", self.index)));
        }
        let mut rec = TraceRecord::bubbles(bubbles);
        let mut word = [0u8; 8];
        if flags & FLAG_READ != 0 {
            self.input.read_exact(&mut word).map_err(|_| self.truncated())?;
            rec.read = Some(u64::from_le_bytes(word));
        }
        if flags & FLAG_WRITE != 0 {
            self.input.read_exact(&mut word).map_err(|_| self.truncated())?;
            rec.write = Some(u64::from_le_bytes(word));
        }
        if rec.is_empty() {
            return Err(TraceError::EmptyRecord { line: self.index + 1 });
        }
        Ok(Some(rec))
    }
}

impl<R: BufRead> Iterator for BinaryTraceReader<R> {
    type Item = Result<TraceRecord, TraceError>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.failed {
            return None;
        }
        match self.read_record() {
            Ok(Some(r)) => {
                self.index += 1;
                Some(Ok(r))
            }
            Ok(None) => None,
            Err(e) => {
                self.failed = true;
                Some(Err(e))
            }
        }
    }
}
