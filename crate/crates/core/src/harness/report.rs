use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::config::Mode;
use super::HarnessError;
use crate::controller::CommandCounts;
use crate::energy::EnergyReport;
use crate::metrics::LocalityBreakdown;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetadata {
    pub tool: String,
    pub version: String,
    pub spec: String,
    pub mode: Mode,
    pub seed: u64,
    pub config_hash: String,
    pub warmup_instructions: u64,
    /// Some core finished before every core passed warmup, so statistics
    /// cover the whole run.
    pub warmup_incomplete: bool,
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoreReport {
    pub core: usize,
    pub instructions: u64,
    pub cycles: u64,
    pub ipc: f64,
    pub llc_misses: u64,
    pub mpki: f64,
    pub memory_intensive: bool,
    /// IPC of the same trace running alone (bundle mode).
    pub alone_ipc: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct LatencyReport {
    pub requests: u64,
    pub avg_total_ns: f64,
    pub avg_queuing_ns: f64,
    pub avg_service_ns: f64,
    pub avg_read_ns: f64,
    pub queuing_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct MemoryReport {
    pub cycles: u64,
    pub elapsed_ns: f64,
    pub reads_completed: u64,
    pub writes_completed: u64,
    pub commands: CommandCounts,
    pub bpu: f64,
    pub bpu_per_channel: f64,
    pub locality: LocalityBreakdown,
    pub hit_fraction: f64,
    pub miss_fraction: f64,
    pub conflict_fraction: f64,
    pub latency: LatencyReport,
    pub sustained_bandwidth_gbps: f64,
    pub peak_bandwidth_gbps: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingPoint {
    pub threads: usize,
    pub execution_ns: f64,
    pub parallel_speedup: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    pub metadata: RunMetadata,
    pub cores: Vec<CoreReport>,
    pub weighted_speedup: Option<f64>,
    /// Multithreaded mode; the rest of the report describes the largest set.
    pub scaling: Vec<ScalingPoint>,
    pub memory: MemoryReport,
    pub energy: Option<EnergyReport>,
    pub cache_accesses: u64,
    /// Injector cycles lost to the in-flight limit (network mode).
    pub throttle_stalls: u64,
}

const CSV_HEADER: &str = "row,core,instructions,cycles,ipc,llc_misses,mpki,alone_ipc,weighted_speedup,bpu,\
hit_fraction,miss_fraction,conflict_fraction,queuing_fraction,avg_latency_ns,sustained_bandwidth_gbps,\
peak_bandwidth_gbps,energy_total_j";

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

impl SimReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, HarnessError> {
        serde_json::from_str(text).map_err(|e| HarnessError::Report(e.to_string()))
    }

    /// One row per core followed by a single aggregate row.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        out.push_str(CSV_HEADER);
        out.push('\n');
        for c in &self.cores {
            let _ = writeln!(
                out,
                "core,{},{},{},{},{},{},{},,,,,,,,,,",
                c.core,
                c.instructions,
                c.cycles,
                c.ipc,
                c.llc_misses,
                c.mpki,
                opt(c.alone_ipc)
            );
        }
        let m = &self.memory;
        let instructions: u64 = self.cores.iter().map(|c| c.instructions).sum();
        let misses: u64 = self.cores.iter().map(|c| c.llc_misses).sum();
        let _ = writeln!(
            out,
            "aggregate,,{},,,{},,,{},{},{},{},{},{},{},{},{},{}",
            instructions,
            misses,
            opt(self.weighted_speedup),
            m.bpu,
            m.hit_fraction,
            m.miss_fraction,
            m.conflict_fraction,
            m.latency.queuing_fraction,
            m.latency.avg_total_ns,
            m.sustained_bandwidth_gbps,
            m.peak_bandwidth_gbps,
            opt(self.energy.map(|e| e.total_j))
        );
        out
    }
}
