//! Front end: trace-replaying cores, the cache hierarchy, address
//! translation and the miss path that feeds the memory controller.

mod cache;
mod core;
mod translate;
mod uncore;

use thiserror::Error;

pub use self::core::{Core, CoreConfig, LoadStatus, MemoryPort};
pub use cache::{AccessOutcome, Cache, CacheHierarchy, CacheLevelConfig, Eviction, HierarchyConfig, HitLevel};
pub use translate::{PageTable, TranslationMode};
pub use uncore::{OutgoingRequest, Uncore, UncoreConfig};

use crate::trace::TraceError;

#[derive(Debug, Error)]
pub enum CpuError {
    #[error("physical memory exhausted ({frames} frames)")]
    OutOfMemory { frames: u64 },
    #[error("invalid cache geometry: {0}")]
    InvalidCache(String),
    #[error("invalid core configuration: {0}")]
    InvalidCore(String),
    #[error(transparent)]
    Trace(#[from] TraceError),
}
