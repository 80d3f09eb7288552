use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::DramError;
use crate::clock::Clock;

pub const LINE_BYTES: u64 = 64;
pub const DEFAULT_CAPACITY_BYTES: u64 = 4 << 30;

/// The nine builtin DRAM types.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum DramKind {
    Ddr3,
    Ddr4,
    Gddr5,
    Hbm,
    Hmc,
    Lpddr3,
    Lpddr4,
    WideIo,
    WideIo2,
}

impl DramKind {
    pub const ALL: [DramKind; 9] = [
        DramKind::Ddr3,
        DramKind::Ddr4,
        DramKind::Gddr5,
        DramKind::Hbm,
        DramKind::Hmc,
        DramKind::Lpddr3,
        DramKind::Lpddr4,
        DramKind::WideIo,
        DramKind::WideIo2,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            DramKind::Ddr3 => "DDR3",
            DramKind::Ddr4 => "DDR4",
            DramKind::Gddr5 => "GDDR5",
            DramKind::Hbm => "HBM",
            DramKind::Hmc => "HMC",
            DramKind::Lpddr3 => "LPDDR3",
            DramKind::Lpddr4 => "LPDDR4",
            DramKind::WideIo => "WideIO",
            DramKind::WideIo2 => "WideIO2",
        }
    }
}

impl fmt::Display for DramKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DramKind {
    type Err = DramError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm: String = s
            .chars()
            .filter(|c| c.is_ascii_alphanumeric())
            .collect::<String>()
            .to_ascii_uppercase();
        DramKind::ALL
            .into_iter()
            .find(|k| k.name().to_ascii_uppercase() == norm)
            .ok_or_else(|| DramError::UnknownType(s.to_string()))
    }
}

/// Optional datasheet-style constraints. All absent by default, which keeps
/// timing attributable to the hit/miss/conflict latencies alone.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimingOverrides {
    pub tras_ns: Option<f64>,
    pub trrd_ns: Option<f64>,
    pub tfaw_ns: Option<f64>,
    pub twr_ns: Option<f64>,
    pub twtr_ns: Option<f64>,
    pub trefi_ns: Option<f64>,
    pub trfc_ns: Option<f64>,
    /// Same-group CAS spacing as a multiple of the other-group spacing.
    pub bank_group_ccd_ratio: Option<u64>,
}

impl TimingOverrides {
    pub fn is_empty(&self) -> bool {
        *self == TimingOverrides::default()
    }
}

/// Full parameterization of one DRAM type.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DramTypeSpec {
    pub name: String,
    pub data_rate_mtps: u32,
    pub clock_mhz: u32,
    pub max_bandwidth_gbps: f64,
    pub channels: u32,
    pub ranks_per_channel: u32,
    pub banks_per_rank: u32,
    #[serde(default = "one")]
    pub bank_groups_per_rank: u32,
    /// HMC only; 0 for externally scheduled types.
    #[serde(default)]
    pub vaults: u32,
    pub channel_width_bits: u32,
    /// Bursts needed per channel-width transfer; 2 for half-width chips.
    #[serde(default = "one")]
    pub burst_multiplier: u32,
    pub row_bytes: u64,
    pub hit_ns: f64,
    pub miss_ns: f64,
    pub conflict_min_ns: f64,
    #[serde(default = "queue_depth")]
    pub queue_depth_read: usize,
    #[serde(default = "queue_depth")]
    pub queue_depth_write: usize,
    #[serde(default = "capacity")]
    pub capacity_bytes: u64,
    #[serde(default, skip_serializing_if = "TimingOverrides::is_empty")]
    pub timing: TimingOverrides,
}

fn one() -> u32 {
    1
}
fn queue_depth() -> usize {
    32
}
fn capacity() -> u64 {
    DEFAULT_CAPACITY_BYTES
}

#[allow(clippy::too_many_arguments)]
fn table_column(
    name: &str,
    data_rate_mtps: u32,
    clock_mhz: u32,
    max_bandwidth_gbps: f64,
    (channels, ranks_per_channel): (u32, u32),
    banks_per_rank: u32,
    channel_width_bits: u32,
    row_bytes: u64,
    (hit_ns, miss_ns): (f64, f64),
    conflict_min_ns: f64,
) -> DramTypeSpec {
    DramTypeSpec {
        name: name.to_string(),
        data_rate_mtps,
        clock_mhz,
        max_bandwidth_gbps,
        channels,
        ranks_per_channel,
        banks_per_rank,
        bank_groups_per_rank: 1,
        vaults: 0,
        channel_width_bits,
        burst_multiplier: 1,
        row_bytes,
        hit_ns,
        miss_ns,
        conflict_min_ns,
        queue_depth_read: queue_depth(),
        queue_depth_write: queue_depth(),
        capacity_bytes: DEFAULT_CAPACITY_BYTES,
        timing: TimingOverrides::default(),
    }
}

/// Builtin parameters for `kind`.
pub fn builtin_spec(kind: DramKind) -> DramTypeSpec {
    use DramKind::*;
    let n = kind.name();
    match kind {
        Ddr3 => table_column(n, 2133, 1067, 68.3, (4, 1), 8, 64, 8192, (15.0, 26.3), 37.5),
        Ddr4 => DramTypeSpec {
            bank_groups_per_rank: 4,
            ..table_column(n, 3200, 1600, 102.4, (4, 1), 16, 64, 8192, (16.7, 30.0), 43.3)
        },
        Gddr5 => DramTypeSpec {
            bank_groups_per_rank: 4,
            ..table_column(n, 7000, 1750, 224.0, (4, 1), 16, 64, 8192, (13.1, 25.1), 37.1)
        },
        Hbm => table_column(n, 1000, 500, 128.0, (8, 1), 16, 128, 2048, (18.0, 32.0), 46.0),
        Hmc => DramTypeSpec {
            vaults: 32,
            ..table_column(n, 2500, 1250, 320.0, (1, 1), 256, 32, 256, (16.8, 30.4), 44.0)
        },
        Lpddr3 => table_column(n, 2133, 1067, 68.3, (4, 1), 8, 64, 8192, (21.6, 40.3), 59.1),
        // Half-width chips: each 64 B line takes twice the bursts.
        Lpddr4 => DramTypeSpec {
            burst_multiplier: 2,
            ..table_column(n, 3200, 1600, 51.2, (4, 1), 16, 64, 4096, (26.9, 45.0), 61.9)
        },
        WideIo => table_column(n, 266, 266, 17.0, (4, 1), 4, 128, 2048, (30.1, 38.9), 67.7),
        WideIo2 => table_column(n, 1067, 533, 34.1, (4, 2), 8, 64, 4096, (22.5, 41.3), 60.0),
    }
}

/// Looks up a builtin by name (case and punctuation insensitive, so
/// `Wide I/O 2` resolves to `WideIO2`).
pub fn builtin_by_name(name: &str) -> Result<DramTypeSpec, DramError> {
    Ok(builtin_spec(name.parse()?))
}

impl DramTypeSpec {
    pub fn is_hmc(&self) -> bool {
        self.vaults > 0
    }

    pub fn kind(&self) -> Option<DramKind> {
        self.name.parse().ok()
    }

    pub fn total_ranks(&self) -> u32 {
        self.channels * self.ranks_per_channel
    }

    pub fn total_banks(&self) -> u32 {
        self.total_ranks() * self.banks_per_rank
    }

    pub fn banks_per_vault(&self) -> u32 {
        if self.is_hmc() {
            self.banks_per_rank / self.vaults
        } else {
            self.banks_per_rank
        }
    }

    /// Independently scheduled units: channels, or vaults for HMC.
    pub fn units(&self) -> u32 {
        if self.is_hmc() {
            self.vaults
        } else {
            self.channels
        }
    }

    pub fn beats_per_clock(&self) -> u32 {
        ((self.data_rate_mtps as f64 / self.clock_mhz as f64).round() as u32).max(1)
    }

    /// Command clock, derived from the data rate so that one line transfer
    /// takes a whole number of clocks at exactly the rated bandwidth.
    pub fn dram_clock(&self) -> Clock {
        Clock::from_khz(self.data_rate_mtps as u64 * 1000 / self.beats_per_clock() as u64)
    }

    pub fn lines_per_row(&self) -> u64 {
        self.row_bytes / LINE_BYTES
    }

    pub fn rows_per_bank(&self) -> u64 {
        self.capacity_bytes / (self.total_banks() as u64 * self.row_bytes)
    }

    /// Beats to move one cache line over one channel (or vault TSV bus).
    pub fn beats_per_line(&self) -> u64 {
        LINE_BYTES / (self.channel_width_bits as u64 / 8) * self.burst_multiplier as u64
    }

    pub fn validate(&self) -> Result<(), DramError> {
        let bad = |m: String| Err(DramError::InvalidSpec(format!("{}: {m}", self.name)));
        if !(self.hit_ns > 0.0 && self.hit_ns < self.miss_ns && self.miss_ns < self.conflict_min_ns) {
            return bad("latencies must satisfy 0 < hit < miss < conflict".into());
        }
        for (field, v) in [
            ("channels", self.channels),
            ("ranks_per_channel", self.ranks_per_channel),
            ("banks_per_rank", self.banks_per_rank),
            ("bank_groups_per_rank", self.bank_groups_per_rank),
            ("data_rate_mtps", self.data_rate_mtps),
            ("clock_mhz", self.clock_mhz),
            ("burst_multiplier", self.burst_multiplier),
        ] {
            if v == 0 {
                return bad(format!("{field} must be positive"));
            }
        }
        if !self.banks_per_rank.is_multiple_of(self.bank_groups_per_rank) {
            return bad("banks_per_rank not divisible by bank_groups_per_rank".into());
        }
        if !self.channel_width_bits.is_multiple_of(8) || self.channel_width_bits == 0 || self.channel_width_bits > 512 {
            return bad("channel width must be a positive multiple of 8 bits".into());
        }
        if self.is_hmc() {
            if self.channels != 1 || self.ranks_per_channel != 1 {
                return bad("vaulted devices are modeled as one channel and one rank".into());
            }
            if !self.banks_per_rank.is_multiple_of(self.vaults) {
                return bad("banks not divisible across vaults".into());
            }
        }
        if self.queue_depth_read == 0 || self.queue_depth_write == 0 {
            return bad("queue depths must be positive".into());
        }
        let pow2 = [
            ("channels", self.channels as u64),
            ("ranks_per_channel", self.ranks_per_channel as u64),
            ("banks_per_rank", self.banks_per_rank as u64),
            ("bank_groups_per_rank", self.bank_groups_per_rank as u64),
            ("row_bytes", self.row_bytes),
            ("capacity_bytes", self.capacity_bytes),
        ];
        for (field, v) in pow2 {
            if !v.is_power_of_two() {
                return bad(format!("{field} = {v} is not a power of two"));
            }
        }
        if self.row_bytes < LINE_BYTES {
            return bad("row smaller than a cache line".into());
        }
        if self.rows_per_bank() == 0 {
            return bad("capacity too small for topology".into());
        }
        let derived_mhz = self.dram_clock().khz() as f64 / 1000.0;
        if (derived_mhz - self.clock_mhz as f64).abs() > 1.0 {
            return bad(format!(
                "clock {} MHz inconsistent with data rate {} MT/s",
                self.clock_mhz, self.data_rate_mtps
            ));
        }
        Ok(())
    }
}

/// Rated peak bandwidth in GB/s. Vaulted devices report their link figure.
pub fn peak_bandwidth(spec: &DramTypeSpec) -> f64 {
    if spec.is_hmc() {
        return spec.max_bandwidth_gbps;
    }
    spec.data_rate_mtps as f64 * (spec.channel_width_bits as f64 / 8.0) * spec.channels as f64
        / spec.burst_multiplier as f64
        / 1000.0
}

/// Parses a spec override file: one `[section]` per type, `key = value` lines.
/// A section named after a builtin starts from that builtin; other sections
/// must provide every required field.
pub fn parse_spec_overrides(text: &str) -> Result<BTreeMap<String, DramTypeSpec>, DramError> {
    let table: toml::Table = text.parse().map_err(|e: toml::de::Error| DramError::SpecFile(e.to_string()))?;
    let mut out = BTreeMap::new();
    for (section, value) in table {
        let toml::Value::Table(fields) = value else {
            return Err(DramError::SpecFile(format!("`{section}` is not a section")));
        };
        let mut merged = match builtin_by_name(&section) {
            Ok(base) => toml::Value::try_from(&base).map_err(|e| DramError::SpecFile(e.to_string()))?,
            Err(_) => toml::Value::Table(toml::Table::new()),
        };
        let toml::Value::Table(base) = &mut merged else { unreachable!() };
        base.insert("name".into(), toml::Value::String(section.clone()));
        for (k, v) in fields {
            if k == "timing" {
                if let (Some(toml::Value::Table(dst)), toml::Value::Table(src)) = (base.get_mut("timing"), &v) {
                    dst.extend(src.clone());
                    continue;
                }
            }
            base.insert(k, v);
        }
        let spec: DramTypeSpec = merged
            .try_into()
            .map_err(|e: toml::de::Error| DramError::SpecFile(format!("[{section}]: {e}")))?;
        spec.validate()?;
        out.insert(section, spec);
    }
    Ok(out)
}

pub fn load_spec_file(path: &Path) -> Result<BTreeMap<String, DramTypeSpec>, DramError> {
    let text = std::fs::read_to_string(path).map_err(|e| DramError::SpecFile(format!("{}: {e}", path.display())))?;
    parse_spec_overrides(&text)
}
