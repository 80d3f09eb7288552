//! Physical address to DRAM coordinate decoding.
//!
//! Fields are bit slices taken low to high above the 6 line-offset bits:
//!
//! | mode                   | order (low → high)                  |
//! |------------------------|-------------------------------------|
//! | `CachelineInterleave`  | channel, bank, rank, column, row    |
//! | `HmcDefault`           | vault, bank, column, row            |
//! | `HmcAlt`               | vault, column, bank, row            |
//!
//! The bank-group index is the low bits of the bank index, so consecutive
//! lines within a channel alternate bank groups.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::spec::{DramTypeSpec, LINE_BYTES};
use super::DramError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InterleaveMode {
    CachelineInterleave,
    HmcDefault,
    HmcAlt,
}

impl InterleaveMode {
    pub fn default_for(spec: &DramTypeSpec) -> Self {
        if spec.is_hmc() {
            InterleaveMode::HmcDefault
        } else {
            InterleaveMode::CachelineInterleave
        }
    }
}

impl fmt::Display for InterleaveMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            InterleaveMode::CachelineInterleave => "cacheline_interleave",
            InterleaveMode::HmcDefault => "hmc_default",
            InterleaveMode::HmcAlt => "hmc_alt",
        })
    }
}

impl FromStr for InterleaveMode {
    type Err = DramError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "cacheline_interleave" | "cacheline" => Ok(Self::CachelineInterleave),
            "hmc_default" | "hmc" => Ok(Self::HmcDefault),
            "hmc_alt" => Ok(Self::HmcAlt),
            other => Err(DramError::IllegalMode(format!("unknown interleave mode `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct DramCoordinates {
    pub channel: u32,
    pub rank: u32,
    pub bank_group: u32,
    /// Bank within its rank, or within its vault for HMC.
    pub bank: u32,
    pub vault: u32,
    pub row: u64,
    pub column: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Field {
    Channel,
    Vault,
    Bank,
    Rank,
    Column,
}

#[derive(Debug, Clone)]
pub struct AddressMapper {
    mode: InterleaveMode,
    layout: Vec<(Field, u32)>,
    row_shift: u32,
    capacity: u64,
    groups: u32,
    ranks: u32,
    banks_per_unit_rank: u32,
}

fn log2(v: u64) -> u32 {
    debug_assert!(v.is_power_of_two());
    v.trailing_zeros()
}

impl AddressMapper {
    pub fn new(spec: &DramTypeSpec, mode: InterleaveMode) -> Result<Self, DramError> {
        let hmc = spec.is_hmc();
        let legal = match mode {
            InterleaveMode::CachelineInterleave => !hmc,
            InterleaveMode::HmcDefault | InterleaveMode::HmcAlt => hmc,
        };
        if !legal {
            return Err(DramError::IllegalMode(format!("{mode} is not available for {}", spec.name)));
        }
        let banks = spec.banks_per_vault() as u64;
        let layout = match mode {
            InterleaveMode::CachelineInterleave => vec![
                (Field::Channel, log2(spec.channels as u64)),
                (Field::Bank, log2(banks)),
                (Field::Rank, log2(spec.ranks_per_channel as u64)),
                (Field::Column, log2(spec.lines_per_row())),
            ],
            InterleaveMode::HmcDefault => vec![
                (Field::Vault, log2(spec.vaults as u64)),
                (Field::Bank, log2(banks)),
                (Field::Column, log2(spec.lines_per_row())),
            ],
            InterleaveMode::HmcAlt => vec![
                (Field::Vault, log2(spec.vaults as u64)),
                (Field::Column, log2(spec.lines_per_row())),
                (Field::Bank, log2(banks)),
            ],
        };
        let row_shift = log2(LINE_BYTES) + layout.iter().map(|(_, w)| w).sum::<u32>();
        Ok(Self {
            mode,
            layout,
            row_shift,
            capacity: spec.capacity_bytes,
            groups: if hmc { 1 } else { spec.bank_groups_per_rank },
            ranks: spec.ranks_per_channel,
            banks_per_unit_rank: banks as u32,
        })
    }

    pub fn mode(&self) -> InterleaveMode {
        self.mode
    }

    pub fn capacity(&self) -> u64 {
        self.capacity
    }

    pub fn map(&self, paddr: u64) -> Result<DramCoordinates, DramError> {
        if paddr >= self.capacity {
            return Err(DramError::AddressOutOfRange {
                addr: paddr,
                capacity: self.capacity,
            });
        }
        let mut c = DramCoordinates::default();
        let mut bits = paddr >> log2(LINE_BYTES);
        for &(field, width) in &self.layout {
            let v = (bits & ((1u64 << width) - 1)) as u32;
            bits >>= width;
            match field {
                Field::Channel => c.channel = v,
                Field::Vault => c.vault = v,
                Field::Bank => c.bank = v,
                Field::Rank => c.rank = v,
                Field::Column => c.column = v,
            }
        }
        c.row = paddr >> self.row_shift;
        c.bank_group = c.bank % self.groups;
        Ok(c)
    }

    /// Inverse of [`map`](Self::map) for line-aligned addresses.
    pub fn compose(&self, c: &DramCoordinates) -> u64 {
        let mut addr = c.row << self.row_shift;
        let mut shift = log2(LINE_BYTES);
        for &(field, width) in &self.layout {
            let v = match field {
                Field::Channel => c.channel,
                Field::Vault => c.vault,
                Field::Bank => c.bank,
                Field::Rank => c.rank,
                Field::Column => c.column,
            } as u64;
            addr |= v << shift;
            shift += width;
        }
        addr
    }

    /// Index of the independently scheduled unit (channel or vault).
    pub fn unit_of(&self, c: &DramCoordinates) -> u32 {
        match self.mode {
            InterleaveMode::CachelineInterleave => c.channel,
            _ => c.vault,
        }
    }

    pub fn banks_per_unit(&self) -> u32 {
        self.ranks * self.banks_per_unit_rank
    }

    /// Bank index within its unit.
    pub fn bank_in_unit(&self, c: &DramCoordinates) -> u32 {
        c.rank * self.banks_per_unit_rank + c.bank
    }

    /// Globally unique bank index.
    pub fn flat_bank(&self, c: &DramCoordinates) -> u32 {
        self.unit_of(c) * self.banks_per_unit() + self.bank_in_unit(c)
    }
}

/// Decodes `paddr` under `mode` for `spec`.
pub fn map_address(paddr: u64, spec: &DramTypeSpec, mode: InterleaveMode) -> Result<DramCoordinates, DramError> {
    AddressMapper::new(spec, mode)?.map(paddr)
}
