//! Trace-driven, cycle-level DRAM timing and energy simulation.
//!
//! The pipeline runs trace records through a simple out-of-order core model
//! and cache hierarchy, sends last-level misses to per-channel FR-FCFS
//! controllers (or an HMC link and vault model), and folds the resulting
//! command stream into bank-parallelism, row-locality, latency, bandwidth
//! and energy metrics.

pub mod audit;
pub mod clock;
pub mod controller;
pub mod cpu;
pub mod dram;
pub mod energy;
pub mod eventlog;
pub mod harness;
pub mod metrics;
pub mod trace;
