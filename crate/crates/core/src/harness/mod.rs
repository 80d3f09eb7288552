//! Experiment orchestration: configuration, the simulation engine for each
//! mode, and report emission.

mod config;
mod engine;
mod report;

use thiserror::Error;

pub use config::{
    resolve_spec, spec_dir_from_env, CpuSettings, ExperimentConfig, Mode, NetworkSettings, ThreadSet, TraceSource,
    SPEC_DIR_ENV,
};
pub use engine::{run_bundle, run_experiment, run_multithreaded, run_network, run_single, RunOptions};
pub use report::{CoreReport, LatencyReport, MemoryReport, RunMetadata, ScalingPoint, SimReport};

use crate::cpu::CpuError;
use crate::dram::DramError;
use crate::energy::EnergyError;
use crate::trace::TraceError;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Dram(#[from] DramError),
    #[error(transparent)]
    Trace(#[from] TraceError),
    #[error(transparent)]
    Cpu(#[from] CpuError),
    #[error(transparent)]
    Energy(#[from] EnergyError),
    #[error("report: {0}")]
    Report(String),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

impl HarnessError {
    /// Process exit status: 3 for unreadable or malformed traces, 2 for
    /// everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Trace(_) | HarnessError::Cpu(CpuError::Trace(_)) => 3,
            _ => 2,
        }
    }
}
