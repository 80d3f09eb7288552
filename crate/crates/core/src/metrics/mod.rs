//! Characterization metrics and their offline recomputation from event logs.

// `!(x > 0.0)` is deliberate: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod bpu;
pub mod offline;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use bpu::{BpuCounters, BpuTracker};

use crate::controller::LocalityClass;

/// MPKI above which a workload counts as memory intensive.
pub const HIGH_INTENSITY_MPKI: f64 = 15.0;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("activity sample at cycle {0} has no active bank")]
    IdleSample(u64),
    #[error("request {0} is unclassified")]
    Unclassified(u64),
    #[error("instruction count is zero")]
    ZeroInstructions,
    #[error("cycle count is zero")]
    ZeroCycles,
    #[error("length mismatch: {0} shared vs {1} alone")]
    LengthMismatch(usize, usize),
    #[error("alone IPC of core {0} is not positive")]
    ZeroAloneIpc(usize),
    #[error("execution time must be positive")]
    NonPositiveTime,
    #[error("duration must be positive")]
    ZeroDuration,
    #[error("no completed requests")]
    Empty,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BankActivitySample {
    pub cycle: u64,
    pub active_bank_count: u32,
}

/// Mean active-bank count over samples that each cover one active cycle.
pub fn bpu(samples: &[BankActivitySample]) -> Result<f64, MetricsError> {
    if let Some(s) = samples.iter().find(|s| s.active_bank_count == 0) {
        return Err(MetricsError::IdleSample(s.cycle));
    }
    if samples.is_empty() {
        return Ok(0.0);
    }
    let sum: u64 = samples.iter().map(|s| s.active_bank_count as u64).sum();
    Ok(sum as f64 / samples.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct LocalityBreakdown {
    pub hits: u64,
    pub misses: u64,
    pub conflicts: u64,
}

impl LocalityBreakdown {
    pub fn record(&mut self, class: LocalityClass) {
        match class {
            LocalityClass::Hit => self.hits += 1,
            LocalityClass::Miss => self.misses += 1,
            LocalityClass::Conflict => self.conflicts += 1,
        }
    }

    pub fn total(&self) -> u64 {
        self.hits + self.misses + self.conflicts
    }

    fn frac(&self, n: u64) -> f64 {
        match self.total() {
            0 => 0.0,
            t => n as f64 / t as f64,
        }
    }

    pub fn hit_fraction(&self) -> f64 {
        self.frac(self.hits)
    }

    pub fn miss_fraction(&self) -> f64 {
        self.frac(self.misses)
    }

    pub fn conflict_fraction(&self) -> f64 {
        self.frac(self.conflicts)
    }

    pub fn since(&self, earlier: &LocalityBreakdown) -> LocalityBreakdown {
        LocalityBreakdown {
            hits: self.hits - earlier.hits,
            misses: self.misses - earlier.misses,
            conflicts: self.conflicts - earlier.conflicts,
        }
    }
}

/// Counts classes of `(request id, class)` pairs; every request must be classified.
pub fn locality_breakdown<I>(requests: I) -> Result<LocalityBreakdown, MetricsError>
where
    I: IntoIterator<Item = (u64, Option<LocalityClass>)>,
{
    let mut b = LocalityBreakdown::default();
    for (id, class) in requests {
        b.record(class.ok_or(MetricsError::Unclassified(id))?);
    }
    Ok(b)
}

pub fn mpki(llc_misses: u64, instructions: u64) -> Result<f64, MetricsError> {
    if instructions == 0 {
        return Err(MetricsError::ZeroInstructions);
    }
    Ok(llc_misses as f64 * 1000.0 / instructions as f64)
}

pub fn is_memory_intensive(mpki: f64) -> bool {
    mpki > HIGH_INTENSITY_MPKI
}

pub fn ipc(instructions: u64, cycles: u64) -> Result<f64, MetricsError> {
    if cycles == 0 {
        return Err(MetricsError::ZeroCycles);
    }
    Ok(instructions as f64 / cycles as f64)
}

pub fn weighted_speedup(shared: &[f64], alone: &[f64]) -> Result<f64, MetricsError> {
    if shared.len() != alone.len() {
        return Err(MetricsError::LengthMismatch(shared.len(), alone.len()));
    }
    if let Some(i) = alone.iter().position(|a| !(*a > 0.0)) {
        return Err(MetricsError::ZeroAloneIpc(i));
    }
    Ok(shared.iter().zip(alone).map(|(s, a)| s / a).sum())
}

pub fn parallel_speedup(t1: f64, tn: f64) -> Result<f64, MetricsError> {
    if !(t1 > 0.0 && tn > 0.0) {
        return Err(MetricsError::NonPositiveTime);
    }
    Ok(t1 / tn)
}

/// GB/s (10^9 bytes per second).
pub fn sustained_bandwidth(bytes: u64, seconds: f64) -> Result<f64, MetricsError> {
    if !(seconds > 0.0) {
        return Err(MetricsError::ZeroDuration);
    }
    Ok(bytes as f64 / seconds / 1e9)
}

/// Share of total latency spent before the first DRAM command.
pub fn queuing_fraction(queuing_cycles: u64, service_cycles: u64) -> Result<f64, MetricsError> {
    let total = queuing_cycles + service_cycles;
    if total == 0 {
        return Err(MetricsError::Empty);
    }
    Ok(queuing_cycles as f64 / total as f64)
}
