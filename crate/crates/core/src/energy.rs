//! Command and background DRAM energy.
//!
//! Command energy is a count of each command kind times its per-command
//! cost. Background energy charges every rank standby power for the whole
//! run, at the active-standby rate while any of its banks is busy.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::clock::Clock;
use crate::controller::{CommandCounts, CommandKind};
use crate::dram::DramKind;
use crate::eventlog::EventLog;
use crate::metrics::offline::summarize_log;

#[derive(Debug, Error)]
pub enum EnergyError {
    #[error("energy parameters: {0}")]
    Params(String),
    #[error("no energy parameters ship for {0}")]
    NoBuiltin(String),
    #[error("baseline {0} energy is zero, cannot normalize")]
    ZeroBaseline(&'static str),
    #[error("energy parameter file: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnergyParams {
    pub e_activate_nj: f64,
    pub e_precharge_nj: f64,
    pub e_read_per_line_nj: f64,
    pub e_write_per_line_nj: f64,
    pub p_standby_mw_per_rank: f64,
    pub p_active_standby_mw_per_rank: f64,
    /// Per rank, charged only when refresh is modeled.
    #[serde(default)]
    pub p_refresh_mw: f64,
}

const BUILTIN: [(DramKind, &str); 5] = [
    (DramKind::Ddr3, include_str!("../params/ddr3.toml")),
    (DramKind::Ddr4, include_str!("../params/ddr4.toml")),
    (DramKind::Gddr5, include_str!("../params/gddr5.toml")),
    (DramKind::Lpddr3, include_str!("../params/lpddr3.toml")),
    (DramKind::Lpddr4, include_str!("../params/lpddr4.toml")),
];

impl EnergyParams {
    pub fn parse(text: &str) -> Result<Self, EnergyError> {
        let p: Self = toml::from_str(text).map_err(|e| EnergyError::Params(e.to_string()))?;
        p.validate()?;
        Ok(p)
    }

    pub fn load(path: &Path) -> Result<Self, EnergyError> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    /// Shipped placeholder parameters; `None` for types without public
    /// power data (HBM, HMC and the Wide I/O family).
    pub fn builtin(kind: DramKind) -> Option<Self> {
        BUILTIN
            .iter()
            .find(|(k, _)| *k == kind)
            .map(|(_, text)| Self::parse(text).expect("builtin energy parameters parse"))
    }

    pub fn validate(&self) -> Result<(), EnergyError> {
        let all = [
            self.e_activate_nj,
            self.e_precharge_nj,
            self.e_read_per_line_nj,
            self.e_write_per_line_nj,
            self.p_standby_mw_per_rank,
            self.p_active_standby_mw_per_rank,
            self.p_refresh_mw,
        ];
        if all.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(EnergyError::Params("values must be finite and non-negative".into()));
        }
        Ok(())
    }

    fn command_nj(&self, kind: CommandKind) -> f64 {
        match kind {
            CommandKind::Act => self.e_activate_nj,
            CommandKind::Pre => self.e_precharge_nj,
            CommandKind::Rd => self.e_read_per_line_nj,
            CommandKind::Wr => self.e_write_per_line_nj,
            // Refresh is charged as background power.
            CommandKind::Ref => 0.0,
        }
    }
}

/// Exact command tallies; energies are formed once at report time.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnergyAccumulator {
    pub commands: CommandCounts,
}

pub fn account_command(kind: CommandKind, acc: &mut EnergyAccumulator) {
    acc.commands.record(kind);
}

/// Standby energy of `ranks` fully idle ranks over `seconds`.
pub fn background_energy(seconds: f64, ranks: u32, params: &EnergyParams) -> f64 {
    params.p_standby_mw_per_rank * 1e-3 * ranks as f64 * seconds
}

/// What the energy model needs from a run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyInputs {
    pub commands: CommandCounts,
    pub ranks: u32,
    pub cycles: u64,
    /// Sum over ranks of cycles with at least one busy bank.
    pub rank_active_cycles: u64,
    pub clock: Clock,
    pub refresh_enabled: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct EnergyFractions {
    pub activate_precharge: f64,
    pub read_write: f64,
    pub standby: f64,
    pub refresh: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct EnergyReport {
    pub activate_precharge_j: f64,
    pub read_write_j: f64,
    pub standby_j: f64,
    pub refresh_j: f64,
    pub total_j: f64,
    pub fractions: EnergyFractions,
}

impl EnergyReport {
    fn from_categories(activate_precharge_j: f64, read_write_j: f64, standby_j: f64, refresh_j: f64) -> Self {
        let total_j = activate_precharge_j + read_write_j + standby_j + refresh_j;
        let frac = |x: f64| if total_j > 0.0 { x / total_j } else { 0.0 };
        Self {
            activate_precharge_j,
            read_write_j,
            standby_j,
            refresh_j,
            total_j,
            fractions: EnergyFractions {
                activate_precharge: frac(activate_precharge_j),
                read_write: frac(read_write_j),
                standby: frac(standby_j),
                refresh: frac(refresh_j),
            },
        }
    }

    /// Category-by-category ratio to `baseline`. A category that is zero in
    /// both reports normalizes to 1.
    pub fn normalized_to(&self, baseline: &EnergyReport) -> Result<EnergyRatios, EnergyError> {
        let ratio = |name, x: f64, b: f64| {
            if b > 0.0 {
                Ok(x / b)
            } else if x == 0.0 {
                Ok(1.0)
            } else {
                Err(EnergyError::ZeroBaseline(name))
            }
        };
        Ok(EnergyRatios {
            activate_precharge: ratio("activate/precharge", self.activate_precharge_j, baseline.activate_precharge_j)?,
            read_write: ratio("read/write", self.read_write_j, baseline.read_write_j)?,
            standby: ratio("standby", self.standby_j, baseline.standby_j)?,
            refresh: ratio("refresh", self.refresh_j, baseline.refresh_j)?,
            total: ratio("total", self.total_j, baseline.total_j)?,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyRatios {
    pub activate_precharge: f64,
    pub read_write: f64,
    pub standby: f64,
    pub refresh: f64,
    pub total: f64,
}

pub fn energy_report(inputs: &EnergyInputs, params: &EnergyParams) -> EnergyReport {
    let c = &inputs.commands;
    let nj = |k: CommandKind| c.get(k) as f64 * params.command_nj(k);
    let activate_precharge_j = (nj(CommandKind::Act) + nj(CommandKind::Pre)) * 1e-9;
    let read_write_j = (nj(CommandKind::Rd) + nj(CommandKind::Wr)) * 1e-9;

    let rank_cycles = inputs.cycles * inputs.ranks as u64;
    let active = inputs.rank_active_cycles.min(rank_cycles);
    let secs = |cycles: u64| inputs.clock.cycles_to_seconds(cycles);
    let standby_j = params.p_active_standby_mw_per_rank * 1e-3 * secs(active)
        + params.p_standby_mw_per_rank * 1e-3 * secs(rank_cycles - active);
    let refresh_j = if inputs.refresh_enabled {
        params.p_refresh_mw * 1e-3 * secs(rank_cycles)
    } else {
        0.0
    };
    EnergyReport::from_categories(activate_precharge_j, read_write_j, standby_j, refresh_j)
}

/// Energy over the measured window of a saved command log.
pub fn energy_from_log(log: &EventLog, params: &EnergyParams) -> EnergyReport {
    let s = summarize_log(log);
    let h = &log.header;
    energy_report(
        &EnergyInputs {
            commands: s.commands,
            ranks: h.units * h.ranks_per_unit,
            cycles: s.window_end - s.window_start,
            rank_active_cycles: s.bpu.rank_active_cycles.iter().sum(),
            clock: Clock::from_khz(h.clock_khz),
            refresh_enabled: h.timing.refresh_enabled(),
        },
        params,
    )
}
