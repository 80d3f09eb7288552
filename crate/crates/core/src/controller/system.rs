use std::collections::VecDeque;
use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use super::hmc::{HmcDevice, HmcLinkConfig};
use super::request::MemoryRequest;
use super::unit::{PagePolicy, UnitConfig, UnitController};
use super::{CommandKind, CommandSink, IssuedCommand};
use crate::clock::Clock;
use crate::dram::{derive_timings, AddressMapper, DramError, DramTypeSpec, InterleaveMode, TimingSet, LINE_BYTES};
use crate::eventlog::{EventLogWriter, LogHeader};
use crate::metrics::offline::END_MARK;
use crate::metrics::{BpuCounters, BpuTracker, LocalityBreakdown};

/// Anything that accepts line requests and completes them on its own clock.
pub trait MemoryBackend {
    fn clock(&self) -> Clock;
    /// Accepts the request at `cycle` or hands it back when full.
    fn try_enqueue(&mut self, req: MemoryRequest, cycle: u64) -> Result<(), MemoryRequest>;
    /// Advances one cycle, appending finished requests to `done`.
    fn tick(&mut self, cycle: u64, done: &mut Vec<MemoryRequest>);
    fn outstanding(&self) -> usize;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct CommandCounts {
    pub act: u64,
    pub pre: u64,
    pub rd: u64,
    pub wr: u64,
    pub refresh: u64,
}

impl CommandCounts {
    pub fn record(&mut self, kind: CommandKind) {
        *self.slot(kind) += 1;
    }

    fn slot(&mut self, kind: CommandKind) -> &mut u64 {
        match kind {
            CommandKind::Act => &mut self.act,
            CommandKind::Pre => &mut self.pre,
            CommandKind::Rd => &mut self.rd,
            CommandKind::Wr => &mut self.wr,
            CommandKind::Ref => &mut self.refresh,
        }
    }

    pub fn get(&self, kind: CommandKind) -> u64 {
        let mut c = *self;
        *c.slot(kind)
    }

    pub fn total(&self) -> u64 {
        self.act + self.pre + self.rd + self.wr + self.refresh
    }

    pub fn since(&self, e: &CommandCounts) -> CommandCounts {
        CommandCounts {
            act: self.act - e.act,
            pre: self.pre - e.pre,
            rd: self.rd - e.rd,
            wr: self.wr - e.wr,
            refresh: self.refresh - e.refresh,
        }
    }
}

/// Memory-side totals over `[start_cycle, end_cycle)`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct MemoryStats {
    pub start_cycle: u64,
    pub end_cycle: u64,
    pub commands: CommandCounts,
    pub locality: LocalityBreakdown,
    pub reads_completed: u64,
    pub writes_completed: u64,
    pub queuing_cycles: u64,
    pub total_latency_cycles: u64,
    pub read_latency_cycles: u64,
    pub bpu: BpuCounters,
}

impl MemoryStats {
    pub fn cycles(&self) -> u64 {
        self.end_cycle - self.start_cycle
    }

    pub fn requests_completed(&self) -> u64 {
        self.reads_completed + self.writes_completed
    }

    pub fn since(&self, e: &MemoryStats) -> MemoryStats {
        MemoryStats {
            start_cycle: e.end_cycle,
            end_cycle: self.end_cycle,
            commands: self.commands.since(&e.commands),
            locality: self.locality.since(&e.locality),
            reads_completed: self.reads_completed - e.reads_completed,
            writes_completed: self.writes_completed - e.writes_completed,
            queuing_cycles: self.queuing_cycles - e.queuing_cycles,
            total_latency_cycles: self.total_latency_cycles - e.total_latency_cycles,
            read_latency_cycles: self.read_latency_cycles - e.read_latency_cycles,
            bpu: self.bpu.since(&e.bpu),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MemorySystemConfig {
    /// Defaults to cache-line interleaving, or the default HMC mapping.
    pub interleave: Option<InterleaveMode>,
    /// Defaults to open pages on host channels and closed pages in vaults.
    pub page_policy: Option<PagePolicy>,
    pub drain_high: usize,
    pub drain_low: usize,
    pub hmc_link: HmcLinkConfig,
}

impl Default for MemorySystemConfig {
    fn default() -> Self {
        Self {
            interleave: None,
            page_policy: None,
            drain_high: 28,
            drain_low: 16,
            hmc_link: HmcLinkConfig::default(),
        }
    }
}

struct Recorder {
    timing: crate::dram::TimingClocks,
    banks_per_rank: u32,
    tracker: BpuTracker,
    commands: CommandCounts,
    locality: LocalityBreakdown,
    log: Option<EventLogWriter>,
    observer: Option<Vec<IssuedCommand>>,
}

impl CommandSink for Recorder {
    fn command(&mut self, c: &IssuedCommand) {
        let span = self.timing.occupancy(c.kind);
        if c.kind == CommandKind::Ref {
            let first = c.rank * self.banks_per_rank;
            for b in first..first + self.banks_per_rank {
                self.tracker.occupy(c.unit, b, c.cycle, c.cycle + span);
            }
        } else {
            self.tracker.occupy(c.unit, c.bank, c.cycle, c.cycle + span);
        }
        self.commands.record(c.kind);
        if c.first_for_request {
            self.locality.record(match c.kind {
                CommandKind::Rd | CommandKind::Wr => super::LocalityClass::Hit,
                CommandKind::Act => super::LocalityClass::Miss,
                _ => super::LocalityClass::Conflict,
            });
        }
        if let Some(log) = &mut self.log {
            log.command(c);
        }
        if let Some(obs) = &mut self.observer {
            obs.push(*c);
        }
    }
}

enum Backend {
    Channels(Vec<UnitController>),
    Hmc(HmcDevice),
}

/// The DRAM side of a simulation: address decoding, controllers and
/// statistics.
pub struct MemorySystem {
    spec: DramTypeSpec,
    timing: TimingSet,
    mapper: AddressMapper,
    clock: Clock,
    backend: Backend,
    rec: Recorder,
    outstanding: usize,
    next_cycle: u64,
    scratch: Vec<MemoryRequest>,
    reads_completed: u64,
    writes_completed: u64,
    queuing_cycles: u64,
    total_latency_cycles: u64,
    read_latency_cycles: u64,
}

impl std::fmt::Debug for MemorySystem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("MemorySystem")
            .field("spec", &self.spec.name)
            .field("outstanding", &self.outstanding)
            .field("next_cycle", &self.next_cycle)
            .finish()
    }
}

impl MemorySystem {
    pub fn new(spec: &DramTypeSpec, cfg: &MemorySystemConfig) -> Result<Self, DramError> {
        spec.validate()?;
        let mode = cfg.interleave.unwrap_or_else(|| InterleaveMode::default_for(spec));
        let mapper = AddressMapper::new(spec, mode)?;
        let timing = derive_timings(spec);
        let clock = spec.dram_clock();
        let hmc = spec.is_hmc();
        let policy = cfg
            .page_policy
            .unwrap_or(if hmc { PagePolicy::Closed } else { PagePolicy::Open });
        let (ranks, banks_per_rank, groups) = if hmc {
            (1, spec.banks_per_vault(), 1)
        } else {
            (spec.ranks_per_channel, spec.banks_per_rank, spec.bank_groups_per_rank)
        };
        let units: Vec<UnitController> = (0..spec.units())
            .map(|unit| {
                UnitController::new(UnitConfig {
                    unit,
                    ranks,
                    banks_per_rank,
                    bank_groups: groups,
                    timing: timing.clocks,
                    policy,
                    read_queue: spec.queue_depth_read,
                    write_queue: spec.queue_depth_write,
                    drain_high: cfg.drain_high,
                    drain_low: cfg.drain_low,
                })
            })
            .collect();
        let backend = if hmc {
            Backend::Hmc(HmcDevice::new(cfg.hmc_link, clock, LINE_BYTES, units))
        } else {
            Backend::Channels(units)
        };
        let rec = Recorder {
            timing: timing.clocks,
            banks_per_rank,
            tracker: BpuTracker::new(spec.units(), ranks * banks_per_rank, banks_per_rank),
            commands: CommandCounts::default(),
            locality: LocalityBreakdown::default(),
            log: None,
            observer: None,
        };
        Ok(Self {
            spec: spec.clone(),
            timing,
            mapper,
            clock,
            backend,
            rec,
            outstanding: 0,
            next_cycle: 0,
            scratch: Vec::new(),
            reads_completed: 0,
            writes_completed: 0,
            queuing_cycles: 0,
            total_latency_cycles: 0,
            read_latency_cycles: 0,
        })
    }

    pub fn log_header(&self) -> LogHeader {
        let (ranks, banks, groups) = if self.spec.is_hmc() {
            (1, self.spec.banks_per_vault(), 1)
        } else {
            (
                self.spec.ranks_per_channel,
                self.spec.banks_per_rank,
                self.spec.bank_groups_per_rank,
            )
        };
        LogHeader {
            spec: self.spec.name.clone(),
            units: self.spec.units(),
            ranks_per_unit: ranks,
            banks_per_rank: banks,
            bank_groups: groups,
            clock_khz: self.clock.khz(),
            timing: self.timing.clocks,
        }
    }

    /// Streams every event to `out`.
    pub fn enable_log(&mut self, out: Box<dyn Write>) {
        let header = self.log_header();
        self.rec.log = Some(EventLogWriter::new(out, &header));
    }

    /// Keeps issued commands in memory; drained by [`take_commands`](Self::take_commands).
    pub fn observe_commands(&mut self) {
        self.rec.observer = Some(Vec::new());
    }

    pub fn take_commands(&mut self) -> Vec<IssuedCommand> {
        self.rec.observer.as_mut().map(std::mem::take).unwrap_or_default()
    }

    pub fn spec(&self) -> &DramTypeSpec {
        &self.spec
    }

    pub fn timing(&self) -> &TimingSet {
        &self.timing
    }

    pub fn mapper(&self) -> &AddressMapper {
        &self.mapper
    }

    /// First cycle not yet simulated.
    pub fn now(&self) -> u64 {
        self.next_cycle
    }

    pub fn units(&self) -> &[UnitController] {
        match &self.backend {
            Backend::Channels(u) => u,
            Backend::Hmc(d) => d.vaults(),
        }
    }

    /// Totals over `[0, now)`.
    pub fn stats(&self) -> MemoryStats {
        MemoryStats {
            start_cycle: 0,
            end_cycle: self.next_cycle,
            commands: self.rec.commands,
            locality: self.rec.locality,
            reads_completed: self.reads_completed,
            writes_completed: self.writes_completed,
            queuing_cycles: self.queuing_cycles,
            total_latency_cycles: self.total_latency_cycles,
            read_latency_cycles: self.read_latency_cycles,
            bpu: self.rec.tracker.counters_at(self.next_cycle),
        }
    }

    pub fn mark(&mut self, label: &str) {
        let now = self.next_cycle;
        if let Some(log) = &mut self.rec.log {
            log.mark(now, label);
        }
    }

    /// Writes the end mark and flushes the log.
    pub fn finish(&mut self) -> io::Result<()> {
        self.mark(END_MARK);
        match &mut self.rec.log {
            Some(log) => log.finish(),
            None => Ok(()),
        }
    }
}

impl MemoryBackend for MemorySystem {
    fn clock(&self) -> Clock {
        self.clock
    }

    fn try_enqueue(&mut self, mut req: MemoryRequest, cycle: u64) -> Result<(), MemoryRequest> {
        req.coords = self
            .mapper
            .map(req.paddr)
            .expect("front ends only issue addresses inside DRAM capacity");
        req.arrival_cycle = cycle;
        let unit = self.mapper.unit_of(&req.coords) as usize;
        let id = (req.id, req.core_id, req.is_write, req.paddr);
        let accepted = match &mut self.backend {
            Backend::Channels(units) => units[unit].enqueue(req, cycle),
            Backend::Hmc(d) => d.enqueue(req, cycle),
        };
        if accepted.is_ok() {
            self.outstanding += 1;
            if let Some(log) = &mut self.rec.log {
                let mut r = MemoryRequest::new(id.0, id.1, id.2, id.3);
                r.arrival_cycle = cycle;
                log.arrival(cycle, &r);
            }
        }
        accepted
    }

    fn tick(&mut self, cycle: u64, done: &mut Vec<MemoryRequest>) {
        self.scratch.clear();
        match &mut self.backend {
            Backend::Channels(units) => {
                for u in units.iter_mut() {
                    u.tick(cycle, &mut self.rec, &mut self.scratch);
                }
            }
            Backend::Hmc(d) => d.tick(cycle, &mut self.rec, &mut self.scratch),
        }
        self.next_cycle = cycle + 1;
        self.scratch.sort_by_key(|r| (r.completion_cycle, r.id));
        for r in self.scratch.drain(..) {
            let d = r.decomposition().expect("completed request has a decomposition");
            self.outstanding -= 1;
            self.queuing_cycles += d.queuing_cycles;
            self.total_latency_cycles += d.total_cycles();
            if r.is_write {
                self.writes_completed += 1;
            } else {
                self.reads_completed += 1;
                self.read_latency_cycles += d.total_cycles();
            }
            if let Some(log) = &mut self.rec.log {
                log.done(r.completion_cycle.expect("completed"), &r, d.queuing_cycles);
            }
            done.push(r);
        }
    }

    fn outstanding(&self) -> usize {
        self.outstanding
    }
}

/// Completes every request a fixed number of cycles after arrival.
#[derive(Debug, Clone)]
pub struct FixedLatencyMemory {
    clock: Clock,
    latency: u64,
    capacity: usize,
    pending: VecDeque<MemoryRequest>,
}

impl FixedLatencyMemory {
    pub fn new(clock: Clock, latency: u64, capacity: usize) -> Self {
        Self {
            clock,
            latency,
            capacity,
            pending: VecDeque::new(),
        }
    }
}

impl MemoryBackend for FixedLatencyMemory {
    fn clock(&self) -> Clock {
        self.clock
    }

    fn try_enqueue(&mut self, mut req: MemoryRequest, cycle: u64) -> Result<(), MemoryRequest> {
        if self.pending.len() >= self.capacity {
            return Err(req);
        }
        req.arrival_cycle = cycle;
        req.unit_arrival_cycle = cycle;
        req.first_command_cycle = Some(cycle);
        req.completion_cycle = Some(cycle + self.latency);
        self.pending.push_back(req);
        Ok(())
    }

    fn tick(&mut self, cycle: u64, done: &mut Vec<MemoryRequest>) {
        while self.pending.front().is_some_and(|r| r.completion_cycle <= Some(cycle)) {
            done.push(self.pending.pop_front().expect("front exists"));
        }
    }

    fn outstanding(&self) -> usize {
        self.pending.len()
    }
}
