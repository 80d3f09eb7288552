//! Metrics re-derived from a saved event log.

use serde::{Deserialize, Serialize};

use super::{BpuCounters, BpuTracker, LocalityBreakdown};
use crate::controller::{CommandCounts, CommandKind, LocalityClass};
use crate::eventlog::{EventLog, LogEvent};

pub const WARMUP_MARK: &str = "warmup";
pub const END_MARK: &str = "end";

/// Metric totals over the measured window of a log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogSummary {
    pub window_start: u64,
    pub window_end: u64,
    pub bpu: BpuCounters,
    pub locality: LocalityBreakdown,
    pub commands: CommandCounts,
    pub reads_completed: u64,
    pub writes_completed: u64,
    pub queuing_cycles: u64,
    pub total_cycles: u64,
}

/// Replays a log. The window starts at the last warmup mark (or cycle 0)
/// and ends at the end mark (or the last event).
pub fn summarize_log(log: &EventLog) -> LogSummary {
    let h = &log.header;
    let mark = |label: &str| {
        log.events.iter().rev().find_map(|e| match e {
            LogEvent::Mark { cycle, label: l } if l == label => Some(*cycle),
            _ => None,
        })
    };
    let start = mark(WARMUP_MARK).unwrap_or(0);
    let last = log.events.iter().map(|e| e.cycle() + 1).max().unwrap_or(0);
    let end = mark(END_MARK).unwrap_or(last);

    let mut tracker = BpuTracker::new(h.units, h.banks_per_unit(), h.banks_per_rank);
    let mut s = LogSummary {
        window_start: start,
        window_end: end,
        bpu: BpuCounters::default(),
        locality: LocalityBreakdown::default(),
        commands: CommandCounts::default(),
        reads_completed: 0,
        writes_completed: 0,
        queuing_cycles: 0,
        total_cycles: 0,
    };
    let mut at_start = None;
    for e in &log.events {
        match e {
            LogEvent::Command(c) => {
                if at_start.is_none() && c.cycle >= start {
                    at_start = Some(tracker.counters_at(start));
                }
                let span = h.timing.occupancy(c.kind);
                if c.kind == CommandKind::Ref {
                    let first = c.rank * h.banks_per_rank;
                    for b in first..first + h.banks_per_rank {
                        tracker.occupy(c.unit, b, c.cycle, c.cycle + span);
                    }
                } else {
                    tracker.occupy(c.unit, c.bank, c.cycle, c.cycle + span);
                }
                if c.cycle < start {
                    continue;
                }
                s.commands.record(c.kind);
                if c.first_for_request {
                    s.locality.record(match c.kind {
                        CommandKind::Rd | CommandKind::Wr => LocalityClass::Hit,
                        CommandKind::Act => LocalityClass::Miss,
                        _ => LocalityClass::Conflict,
                    });
                }
            }
            LogEvent::Done {
                cycle,
                is_write,
                queuing,
                total,
                ..
            } if *cycle >= start => {
                if *is_write {
                    s.writes_completed += 1;
                } else {
                    s.reads_completed += 1;
                }
                s.queuing_cycles += queuing;
                s.total_cycles += total;
            }
            _ => {}
        }
    }
    let at_start = at_start.unwrap_or_else(|| tracker.counters_at(start));
    s.bpu = tracker.counters_at(end.max(start)).since(&at_start);
    s
}
