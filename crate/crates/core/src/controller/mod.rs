//! Memory controllers: per-channel FR-FCFS scheduling, the HMC link and
//! vault model, and the memory system that ties them to a front end.

// Full queues hand the request back to the caller by value.
#![allow(clippy::result_large_err)]

mod hmc;
mod request;
mod system;
mod unit;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use hmc::{HmcDevice, HmcLinkConfig};
pub use request::{classify, LatencyDecomposition, LocalityClass, MemoryRequest, RequestId};
pub use system::{CommandCounts, FixedLatencyMemory, MemoryBackend, MemoryStats, MemorySystem, MemorySystemConfig};
pub use unit::{BankState, DrainMode, PagePolicy, UnitConfig, UnitController};

#[derive(Debug, Error)]
pub enum ControllerError {
    #[error("request {0} classified twice")]
    DoubleClassification(RequestId),
    #[error("request {0} has not completed")]
    Incomplete(RequestId),
    #[error("unknown command kind `{0}`")]
    UnknownCommand(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum CommandKind {
    Act,
    Pre,
    Rd,
    Wr,
    Ref,
}

impl CommandKind {
    pub const ALL: [CommandKind; 5] = [Self::Act, Self::Pre, Self::Rd, Self::Wr, Self::Ref];

    pub fn mnemonic(&self) -> &'static str {
        match self {
            Self::Act => "ACT",
            Self::Pre => "PRE",
            Self::Rd => "RD",
            Self::Wr => "WR",
            Self::Ref => "REF",
        }
    }

    pub fn index(&self) -> usize {
        *self as usize
    }

    pub fn is_column(&self) -> bool {
        matches!(self, Self::Rd | Self::Wr)
    }
}

impl fmt::Display for CommandKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.mnemonic())
    }
}

impl FromStr for CommandKind {
    type Err = ControllerError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|k| k.mnemonic().eq_ignore_ascii_case(s))
            .ok_or_else(|| ControllerError::UnknownCommand(s.to_string()))
    }
}

/// One DRAM command as issued by a unit controller.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IssuedCommand {
    pub cycle: u64,
    pub kind: CommandKind,
    pub unit: u32,
    pub rank: u32,
    /// Bank index within the unit; for REF the first bank of the rank.
    pub bank: u32,
    pub bank_group: u32,
    pub row: u64,
    pub column: u32,
    /// Request on whose behalf the command issued; `None` for refresh
    /// housekeeping and closed-page precharges.
    pub request: Option<RequestId>,
    /// First command of its request, which fixes the request's locality.
    pub first_for_request: bool,
}

/// Receives every command a controller issues.
pub trait CommandSink {
    fn command(&mut self, cmd: &IssuedCommand);
}

impl CommandSink for Vec<IssuedCommand> {
    fn command(&mut self, cmd: &IssuedCommand) {
        self.push(*cmd);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mnemonics_round_trip() {
        for k in CommandKind::ALL {
            assert_eq!(k.mnemonic().parse::<CommandKind>().unwrap(), k);
        }
        assert!("NOP".parse::<CommandKind>().is_err());
    }
}
