//! DRAM type parameters, derived controller timing and address mapping.

mod mapping;
mod spec;
mod timing;

use thiserror::Error;

pub use mapping::{map_address, AddressMapper, DramCoordinates, InterleaveMode};
pub use spec::{
    builtin_by_name, builtin_spec, load_spec_file, parse_spec_overrides, peak_bandwidth, DramKind, DramTypeSpec,
    TimingOverrides, DEFAULT_CAPACITY_BYTES, LINE_BYTES,
};
pub use timing::{derive_timings, TimingClocks, TimingSet};

#[derive(Debug, Error)]
pub enum DramError {
    #[error("unknown DRAM type `{0}`")]
    UnknownType(String),
    #[error("invalid DRAM spec: {0}")]
    InvalidSpec(String),
    #[error("spec file: {0}")]
    SpecFile(String),
    #[error("address {addr:#x} outside capacity {capacity:#x}")]
    AddressOutOfRange { addr: u64, capacity: u64 },
    #[error("illegal interleave mode: {0}")]
    IllegalMode(String),
}
