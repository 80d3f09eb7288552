use std::fmt;

use serde::{Deserialize, Serialize};

use super::ControllerError;
use crate::dram::DramCoordinates;

pub type RequestId = u64;

/// Row-buffer outcome of a request, fixed by its first DRAM command.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LocalityClass {
    Hit,
    Miss,
    Conflict,
}

impl LocalityClass {
    pub fn as_str(&self) -> &'static str {
        match self {
            LocalityClass::Hit => "hit",
            LocalityClass::Miss => "miss",
            LocalityClass::Conflict => "conflict",
        }
    }
}

impl fmt::Display for LocalityClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Open matching row is a hit, no open row a miss, any other open row a conflict.
pub fn classify(open_row: Option<u64>, row: u64) -> LocalityClass {
    match open_row {
        Some(r) if r == row => LocalityClass::Hit,
        None => LocalityClass::Miss,
        Some(_) => LocalityClass::Conflict,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MemoryRequest {
    pub id: RequestId,
    pub core_id: u32,
    pub is_write: bool,
    pub paddr: u64,
    pub coords: DramCoordinates,
    /// Cycle the request reached the memory system.
    pub arrival_cycle: u64,
    /// Cycle it entered its channel or vault queue.
    pub unit_arrival_cycle: u64,
    /// Waiting outside the unit queue (link FIFOs); zero for direct channels.
    pub link_wait_cycles: u64,
    pub first_command_cycle: Option<u64>,
    /// First data beat (reads) or write command issue.
    pub data_cycle: Option<u64>,
    pub completion_cycle: Option<u64>,
    pub locality: Option<LocalityClass>,
}

/// Split of a request's end-to-end latency.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LatencyDecomposition {
    pub queuing_cycles: u64,
    pub service_cycles: u64,
}

impl LatencyDecomposition {
    pub fn total_cycles(&self) -> u64 {
        self.queuing_cycles + self.service_cycles
    }
}

impl MemoryRequest {
    pub fn new(id: RequestId, core_id: u32, is_write: bool, paddr: u64) -> Self {
        Self {
            id,
            core_id,
            is_write,
            paddr,
            coords: DramCoordinates::default(),
            arrival_cycle: 0,
            unit_arrival_cycle: 0,
            link_wait_cycles: 0,
            first_command_cycle: None,
            data_cycle: None,
            completion_cycle: None,
            locality: None,
        }
    }

    pub fn set_locality(&mut self, class: LocalityClass) -> Result<(), ControllerError> {
        if self.locality.is_some() {
            return Err(ControllerError::DoubleClassification(self.id));
        }
        self.locality = Some(class);
        Ok(())
    }

    /// Command-to-first-data latency in DRAM cycles.
    pub fn access_cycles(&self) -> Option<u64> {
        Some(self.data_cycle? - self.first_command_cycle?)
    }

    /// Queuing runs from arrival to the first DRAM command, excluding link
    /// transit; service is everything else, so the two sum to the total.
    pub fn decomposition(&self) -> Result<LatencyDecomposition, ControllerError> {
        let (Some(first), Some(done)) = (self.first_command_cycle, self.completion_cycle) else {
            return Err(ControllerError::Incomplete(self.id));
        };
        let total = done - self.arrival_cycle;
        let queuing = self.link_wait_cycles + (first - self.unit_arrival_cycle);
        Ok(LatencyDecomposition {
            queuing_cycles: queuing,
            service_cycles: total - queuing,
        })
    }
}
