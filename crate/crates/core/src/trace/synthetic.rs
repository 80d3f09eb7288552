//! Seeded synthetic workloads with controllable locality, intensity and burstiness.

use std::str::FromStr;

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{TraceError, TraceRecord};

const LINE: u64 = 64;
const MAX_CHASE_LINES: u64 = 1 << 26;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PatternKind {
    Stream,
    Random,
    PointerChase,
    Bursty,
}

impl FromStr for PatternKind {
    type Err = TraceError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "stream" => Ok(Self::Stream),
            "random" => Ok(Self::Random),
            "pointer_chase" | "chase" => Ok(Self::PointerChase),
            "bursty" => Ok(Self::Bursty),
            other => Err(TraceError::InvalidPattern(format!("unknown kind `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticPattern {
    pub kind: PatternKind,
    pub footprint_bytes: u64,
    /// Target memory records per thousand instructions.
    pub requests_per_kilo_instruction: f64,
    #[serde(default = "default_burst")]
    pub burst_length: u32,
    /// Minimum bubble-only instructions between bursts.
    #[serde(default)]
    pub inter_burst_gap: u64,
    #[serde(default = "default_stride")]
    pub stride_bytes: u64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub start_addr: u64,
    /// Probability that a memory record is a write rather than a read.
    #[serde(default)]
    pub write_fraction: f64,
}

fn default_burst() -> u32 {
    8
}

fn default_stride() -> u64 {
    LINE
}

impl SyntheticPattern {
    pub fn new(kind: PatternKind, footprint_bytes: u64, rpki: f64) -> Self {
        Self {
            kind,
            footprint_bytes,
            requests_per_kilo_instruction: rpki,
            burst_length: default_burst(),
            inter_burst_gap: 0,
            stride_bytes: default_stride(),
            seed: 0,
            start_addr: 0,
            write_fraction: 0.0,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_stride(mut self, stride: u64) -> Self {
        self.stride_bytes = stride;
        self
    }

    pub fn with_write_fraction(mut self, fraction: f64) -> Self {
        self.write_fraction = fraction;
        self
    }

    pub fn with_burst(mut self, length: u32, gap: u64) -> Self {
        self.burst_length = length;
        self.inter_burst_gap = gap;
        self
    }

    pub fn validate(&self) -> Result<(), TraceError> {
        let bad = |m: String| Err(TraceError::InvalidPattern(m));
        if self.footprint_bytes == 0 {
            return bad("zero footprint".into());
        }
        if self.footprint_bytes < LINE {
            return bad(format!("footprint {} smaller than one line", self.footprint_bytes));
        }
        let rpki = self.requests_per_kilo_instruction;
        if !(rpki > 0.0 && rpki <= 1000.0) {
            return bad(format!("request density {rpki} outside (0, 1000]"));
        }
        if !(0.0..=1.0).contains(&self.write_fraction) {
            return bad(format!("write fraction {} outside [0, 1]", self.write_fraction));
        }
        match self.kind {
            PatternKind::Stream => {
                if self.stride_bytes == 0 {
                    return bad("zero stride".into());
                }
                if self.stride_bytes > self.footprint_bytes {
                    return bad(format!(
                        "stride {} larger than footprint {}",
                        self.stride_bytes, self.footprint_bytes
                    ));
                }
            }
            PatternKind::PointerChase => {
                if self.footprint_bytes / LINE > MAX_CHASE_LINES {
                    return bad("pointer-chase footprint too large".into());
                }
            }
            PatternKind::Bursty => {
                if self.burst_length == 0 {
                    return bad("zero burst length".into());
                }
                let period = self.burst_length as f64 * 1000.0 / rpki;
                let min_gap = (period + 1e-9).floor() - self.burst_length as f64;
                if min_gap < self.inter_burst_gap as f64 {
                    return bad(format!(
                        "density {rpki} leaves only {min_gap} bubbles between bursts, below the gap {}",
                        self.inter_burst_gap
                    ));
                }
            }
            PatternKind::Random => {}
        }
        Ok(())
    }
}

/// `kind:key=value,...`, e.g. `stream:footprint=4MiB,stride=64,rpki=20,seed=1`.
impl FromStr for SyntheticPattern {
    type Err = TraceError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (kind, rest) = s.split_once(':').unwrap_or((s, ""));
        let mut p = SyntheticPattern::new(kind.trim().parse()?, 0, 0.0);
        for kv in rest.split(',').map(str::trim).filter(|t| !t.is_empty()) {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| TraceError::InvalidPattern(format!("expected key=value, got `{kv}`")))?;
            let int = || parse_size(v).ok_or_else(|| TraceError::InvalidPattern(format!("bad value `{v}` for {k}")));
            match k.trim() {
                "footprint" | "footprint_bytes" => p.footprint_bytes = int()?,
                "rpki" | "requests_per_kilo_instruction" | "mpki" => {
                    p.requests_per_kilo_instruction = v
                        .parse()
                        .map_err(|_| TraceError::InvalidPattern(format!("bad density `{v}`")))?
                }
                "burst" | "burst_length" => p.burst_length = int()? as u32,
                "gap" | "inter_burst_gap" => p.inter_burst_gap = int()?,
                "stride" | "stride_bytes" => p.stride_bytes = int()?,
                "seed" => p.seed = int()?,
                "start" | "start_addr" => p.start_addr = int()?,
                "writes" | "write_fraction" => {
                    p.write_fraction = v
                        .parse()
                        .map_err(|_| TraceError::InvalidPattern(format!("bad write fraction `{v}`")))?
                }
                other => return Err(TraceError::InvalidPattern(format!("unknown key `{other}`"))),
            }
        }
        Ok(p)
    }
}

fn parse_size(v: &str) -> Option<u64> {
    let v = v.trim();
    let (num, mul) = if let Some(n) = v.strip_suffix("GiB") {
        (n, 1 << 30)
    } else if let Some(n) = v.strip_suffix("MiB") {
        (n, 1 << 20)
    } else if let Some(n) = v.strip_suffix("KiB") {
        (n, 1 << 10)
    } else {
        (v, 1)
    };
    let n = num.trim();
    let value = match n.strip_prefix("0x") {
        Some(h) => u64::from_str_radix(h, 16).ok()?,
        None => n.parse::<u64>().ok()?,
    };
    value.checked_mul(mul)
}

enum AddressGen {
    Stream { next: u64 },
    Random,
    Chase { order: Vec<u32>, pos: usize },
}

/// Lazy, deterministic record sequence for one pattern.
pub struct SyntheticTrace {
    pattern: SyntheticPattern,
    total: u64,
    emitted: u64,
    requests: u64,
    rng: ChaCha8Rng,
    addrs: AddressGen,
    burst_left: u32,
    bursts: u64,
}

/// Builds the generator for `pattern` covering exactly `total_instructions`.
pub fn generate_synthetic(
    pattern: &SyntheticPattern,
    total_instructions: u64,
) -> Result<SyntheticTrace, TraceError> {
    if total_instructions == 0 {
        return Err(TraceError::InvalidPattern("total_instructions must be positive".into()));
    }
    pattern.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(pattern.seed);
    let addrs = match pattern.kind {
        PatternKind::Stream => AddressGen::Stream { next: 0 },
        PatternKind::Random | PatternKind::Bursty => AddressGen::Random,
        PatternKind::PointerChase => {
            let n = (pattern.footprint_bytes / LINE) as usize;
            let mut order: Vec<u32> = (0..n as u32).collect();
            // Sattolo: a single cycle through every line.
            for i in (1..n).rev() {
                let j = rng.random_range(0..i);
                order.swap(i, j);
            }
            AddressGen::Chase { order, pos: 0 }
        }
    };
    Ok(SyntheticTrace {
        pattern: pattern.clone(),
        total: total_instructions,
        emitted: 0,
        requests: 0,
        rng,
        addrs,
        burst_left: 0,
        bursts: 0,
    })
}

impl SyntheticTrace {
    fn next_addr(&mut self) -> u64 {
        let p = &self.pattern;
        let offset = match &mut self.addrs {
            AddressGen::Stream { next } => {
                let a = *next;
                *next = (*next + p.stride_bytes) % p.footprint_bytes;
                a
            }
            AddressGen::Random => self.rng.random_range(0..p.footprint_bytes / LINE) * LINE,
            AddressGen::Chase { order, pos } => {
                let line = order[*pos];
                *pos = line as usize;
                line as u64 * LINE
            }
        };
        p.start_addr.wrapping_add(offset)
    }

    fn access(&mut self, bubbles: u64) -> TraceRecord {
        let addr = self.next_addr();
        // Only draw when writes are requested so read-only traces are
        // unaffected by the option.
        let wf = self.pattern.write_fraction;
        if wf > 0.0 && self.rng.random_bool(wf) {
            TraceRecord::write(bubbles, addr)
        } else {
            TraceRecord::read(bubbles, addr)
        }
    }

    /// Instruction index at which the k-th request (1-based) ends.
    fn request_end(&self, k: u64) -> u64 {
        let interval = 1000.0 / self.pattern.requests_per_kilo_instruction;
        (k as f64 * interval + 1e-9).floor() as u64
    }

    fn burst_end(&self, j: u64) -> u64 {
        let period = self.pattern.burst_length as f64 * 1000.0 / self.pattern.requests_per_kilo_instruction;
        (j as f64 * period + 1e-9).floor() as u64
    }
}

impl Iterator for SyntheticTrace {
    type Item = TraceRecord;

    fn next(&mut self) -> Option<TraceRecord> {
        let remaining = self.total - self.emitted;
        if remaining == 0 {
            return None;
        }
        let record = if self.pattern.kind == PatternKind::Bursty {
            if self.burst_left > 0 {
                self.burst_left -= 1;
                self.requests += 1;
                self.access(0)
            } else if self.bursts > 0 && self.emitted < self.burst_end(self.bursts) {
                // gap closing the current burst period
                TraceRecord::bubbles((self.burst_end(self.bursts) - self.emitted).min(remaining))
            } else {
                self.bursts += 1;
                self.burst_left = self.pattern.burst_length - 1;
                self.requests += 1;
                self.access(0)
            }
        } else {
            let end = self.request_end(self.requests + 1);
            if end > self.total {
                TraceRecord::bubbles(remaining)
            } else {
                self.requests += 1;
                self.access(end - self.emitted - 1)
            }
        };
        self.emitted += record.instructions();
        Some(record)
    }
}
