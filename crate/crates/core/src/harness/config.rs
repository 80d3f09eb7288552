use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize};
use sha2::{Digest, Sha256};

use super::HarnessError;
use crate::cpu::{CoreConfig, UncoreConfig};
use crate::dram::{builtin_by_name, load_spec_file, DramTypeSpec};
use crate::energy::EnergyParams;
use crate::controller::MemorySystemConfig;
use crate::trace::{generate_synthetic, open_trace, RecordStream, SyntheticPattern, TraceError};

/// Environment variable naming a directory of spec override files.
pub const SPEC_DIR_ENV: &str = "DRAMCHAR_SPEC_DIR";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    #[default]
    Single,
    Bundle,
    Network,
    Multithreaded,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Single => "single",
            Mode::Bundle => "bundle",
            Mode::Network => "network",
            Mode::Multithreaded => "multithreaded",
        })
    }
}

impl FromStr for Mode {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "single" => Ok(Mode::Single),
            "bundle" => Ok(Mode::Bundle),
            "network" => Ok(Mode::Network),
            "multithreaded" | "mt" => Ok(Mode::Multithreaded),
            other => Err(HarnessError::Config(format!("unknown mode `{other}`"))),
        }
    }
}

/// Where a core's (or injector's) records come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TraceSource {
    File { path: PathBuf },
    Synthetic { pattern: SyntheticPattern, instructions: u64 },
}

impl TraceSource {
    pub fn file(path: impl Into<PathBuf>) -> Self {
        TraceSource::File { path: path.into() }
    }

    pub fn synthetic(pattern: SyntheticPattern, instructions: u64) -> Self {
        TraceSource::Synthetic { pattern, instructions }
    }

    /// A fresh cursor at the start of the trace.
    pub fn open(&self) -> Result<RecordStream, TraceError> {
        match self {
            TraceSource::File { path } => open_trace(path),
            TraceSource::Synthetic { pattern, instructions } => {
                Ok(Box::new(generate_synthetic(pattern, *instructions)?.map(Ok)))
            }
        }
    }

    pub fn is_synthetic_bursty(&self) -> bool {
        matches!(self, TraceSource::Synthetic { pattern, .. } if pattern.kind == crate::trace::PatternKind::Bursty)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CpuSettings {
    /// Defaults to 4000 MHz, or 2200 MHz in multithreaded mode.
    pub core_mhz: Option<u64>,
    pub core: CoreConfig,
    pub uncore: UncoreConfig,
}


#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetworkSettings {
    pub max_inflight: usize,
    /// Consecutive cache lines requested per trace access.
    pub packet_lines: u32,
    /// Requests an injector may issue per cycle.
    pub issue_width: u32,
}

impl Default for NetworkSettings {
    fn default() -> Self {
        Self {
            max_inflight: 50,
            packet_lines: 1,
            issue_width: 4,
        }
    }
}

/// One thread count of a multithreaded scaling experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThreadSet {
    pub traces: Vec<TraceSource>,
}

fn default_warmup() -> u64 {
    1_000_000
}

/// Everything needed to reproduce one experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// A builtin or spec-directory name, or a full table.
    #[serde(deserialize_with = "spec_by_name_or_table")]
    pub dram: DramTypeSpec,
    #[serde(default)]
    pub mode: Mode,
    /// One per core (or per injector in network mode).
    #[serde(default)]
    pub traces: Vec<TraceSource>,
    /// Multithreaded mode only, one entry per thread count.
    #[serde(default)]
    pub thread_sets: Vec<ThreadSet>,
    #[serde(default)]
    pub memory: MemorySystemConfig,
    #[serde(default)]
    pub cpu: CpuSettings,
    #[serde(default)]
    pub network: NetworkSettings,
    /// Instructions every core retires before statistics start.
    #[serde(default = "default_warmup")]
    pub warmup_instructions: u64,
    /// Seeds physical frame allocation.
    #[serde(default)]
    pub seed: u64,
    /// Defaults to the shipped parameters for the DRAM type, if any.
    #[serde(default)]
    pub energy: Option<EnergyParams>,
}

fn spec_by_name_or_table<'de, D: Deserializer<'de>>(d: D) -> Result<DramTypeSpec, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Either {
        Name(String),
        Spec(Box<DramTypeSpec>),
    }
    match Either::deserialize(d)? {
        Either::Name(n) => resolve_spec(&n, spec_dir_from_env().as_deref()).map_err(serde::de::Error::custom),
        Either::Spec(s) => Ok(*s),
    }
}

pub fn spec_dir_from_env() -> Option<PathBuf> {
    std::env::var_os(SPEC_DIR_ENV).map(PathBuf::from)
}

/// Looks `name` up in the `*.toml` files of `spec_dir` (in file-name
/// order, later files winning), then among the builtins.
pub fn resolve_spec(name: &str, spec_dir: Option<&Path>) -> Result<DramTypeSpec, HarnessError> {
    if let Some(dir) = spec_dir {
        let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
            .map_err(|e| HarnessError::Config(format!("spec directory {}: {e}", dir.display())))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "toml"))
            .collect();
        files.sort();
        let mut found = None;
        for f in files {
            let specs = load_spec_file(&f)?;
            if let Some(s) = specs.into_iter().find(|(k, _)| k.eq_ignore_ascii_case(name)) {
                found = Some(s.1);
            }
        }
        if let Some(s) = found {
            return Ok(s);
        }
    }
    Ok(builtin_by_name(name)?)
}

impl ExperimentConfig {
    pub fn new(dram: DramTypeSpec, mode: Mode, traces: Vec<TraceSource>) -> Self {
        Self {
            dram,
            mode,
            traces,
            thread_sets: Vec::new(),
            memory: MemorySystemConfig::default(),
            cpu: CpuSettings::default(),
            network: NetworkSettings::default(),
            warmup_instructions: default_warmup(),
            seed: 0,
            energy: None,
        }
    }

    pub fn from_toml(text: &str) -> Result<Self, HarnessError> {
        toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn core_mhz(&self) -> u64 {
        self.cpu.core_mhz.unwrap_or(match self.mode {
            Mode::Multithreaded => 2200,
            _ => 4000,
        })
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: &str| Err(HarnessError::Config(m.to_string()));
        self.dram.validate()?;
        self.cpu.core.validate()?;
        if self.core_mhz() == 0 {
            return bad("core frequency must be positive");
        }
        if self.memory.drain_low >= self.memory.drain_high {
            return bad("drain_low must be below drain_high");
        }
        if let Some(e) = &self.energy {
            e.validate()?;
        }
        match self.mode {
            Mode::Single if self.traces.len() != 1 => bad("single mode takes exactly one trace"),
            Mode::Bundle if self.traces.len() < 2 => bad("bundle mode needs at least two traces"),
            Mode::Network if self.traces.is_empty() => bad("network mode needs a trace"),
            Mode::Network if self.network.max_inflight == 0 => bad("max_inflight must be positive"),
            Mode::Network if self.network.packet_lines == 0 || self.network.issue_width == 0 => {
                bad("packet_lines and issue_width must be positive")
            }
            Mode::Multithreaded if self.thread_sets.is_empty() => bad("multithreaded mode needs thread sets"),
            Mode::Multithreaded if self.thread_sets.iter().any(|s| s.traces.is_empty()) => {
                bad("every thread set needs at least one trace")
            }
            Mode::Multithreaded if !self.thread_sets.iter().any(|s| s.traces.len() == 1) => {
                bad("multithreaded mode needs a one-thread set as the speedup baseline")
            }
            _ => Ok(()),
        }
    }

    /// SHA-256 over the canonical JSON form of the resolved config.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(&json))
    }
}
