use std::cmp::Ordering;
use std::collections::{BinaryHeap, VecDeque};

use serde::{Deserialize, Serialize};

use super::request::{classify, MemoryRequest, RequestId};
use super::{CommandKind, CommandSink, IssuedCommand};
use crate::dram::TimingClocks;

/// Row-buffer management. Host channels keep rows open; vault controllers
/// close a row once no queued request wants it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PagePolicy {
    #[default]
    Open,
    Closed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DrainMode {
    ReadPriority,
    WriteDrain,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnitConfig {
    pub unit: u32,
    pub ranks: u32,
    pub banks_per_rank: u32,
    pub bank_groups: u32,
    pub timing: TimingClocks,
    pub policy: PagePolicy,
    pub read_queue: usize,
    pub write_queue: usize,
    pub drain_high: usize,
    pub drain_low: usize,
}

/// Per-bank row state and earliest legal cycle for each command class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct BankState {
    pub open_row: Option<u64>,
    pub act_ready: u64,
    pub col_ready: u64,
    pub pre_ready: u64,
}

#[derive(Debug, Clone, Default)]
struct RankState {
    last_act: Option<u64>,
    act_window: VecDeque<u64>,
    wtr_ready: u64,
    refresh_due: u64,
    refreshing: bool,
}

#[derive(Debug)]
struct InFlight(MemoryRequest);

impl InFlight {
    fn key(&self) -> (u64, RequestId) {
        (self.0.completion_cycle.unwrap_or(0), self.0.id)
    }
}

impl PartialEq for InFlight {
    fn eq(&self, other: &Self) -> bool {
        self.key() == other.key()
    }
}
impl Eq for InFlight {}
impl PartialOrd for InFlight {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for InFlight {
    // Reversed so the max-heap pops the earliest completion first.
    fn cmp(&self, other: &Self) -> Ordering {
        other.key().cmp(&self.key())
    }
}

#[derive(Debug, Clone, Copy)]
struct Choice {
    write_queue: bool,
    index: usize,
    kind: CommandKind,
}

/// FR-FCFS controller for one channel (or one HMC vault).
#[derive(Debug)]
pub struct UnitController {
    cfg: UnitConfig,
    banks: Vec<BankState>,
    ranks: Vec<RankState>,
    group_cas_ready: Vec<u64>,
    cas_ready: u64,
    read_q: Vec<MemoryRequest>,
    write_q: Vec<MemoryRequest>,
    mode: DrainMode,
    inflight: BinaryHeap<InFlight>,
    hit_pending: Vec<bool>,
}

impl UnitController {
    pub fn new(cfg: UnitConfig) -> Self {
        let banks = (cfg.ranks * cfg.banks_per_rank) as usize;
        let t = cfg.timing;
        let ranks = (0..cfg.ranks)
            .map(|_| RankState {
                refresh_due: if t.refresh_enabled() { t.refi } else { u64::MAX },
                ..Default::default()
            })
            .collect();
        Self {
            banks: vec![BankState::default(); banks],
            ranks,
            group_cas_ready: vec![0; (cfg.ranks * cfg.bank_groups.max(1)) as usize],
            cas_ready: 0,
            read_q: Vec::with_capacity(cfg.read_queue),
            write_q: Vec::with_capacity(cfg.write_queue),
            mode: DrainMode::ReadPriority,
            inflight: BinaryHeap::new(),
            hit_pending: vec![false; banks],
            cfg,
        }
    }

    pub fn config(&self) -> &UnitConfig {
        &self.cfg
    }

    pub fn bank_state(&self, bank_in_unit: u32) -> &BankState {
        &self.banks[bank_in_unit as usize]
    }

    pub fn drain_mode(&self) -> DrainMode {
        self.mode
    }

    pub fn read_queue_len(&self) -> usize {
        self.read_q.len()
    }

    pub fn write_queue_len(&self) -> usize {
        self.write_q.len()
    }

    pub fn inflight_len(&self) -> usize {
        self.inflight.len()
    }

    pub fn is_idle(&self) -> bool {
        self.read_q.is_empty() && self.write_q.is_empty() && self.inflight.is_empty()
    }

    pub fn can_accept(&self, is_write: bool) -> bool {
        if is_write {
            self.write_q.len() < self.cfg.write_queue
        } else {
            self.read_q.len() < self.cfg.read_queue
        }
    }

    /// Queues a decoded request; hands it back when the target queue is full.
    pub fn enqueue(&mut self, mut req: MemoryRequest, cycle: u64) -> Result<(), MemoryRequest> {
        if !self.can_accept(req.is_write) {
            return Err(req);
        }
        req.unit_arrival_cycle = cycle;
        if req.is_write {
            self.write_q.push(req);
        } else {
            self.read_q.push(req);
        }
        Ok(())
    }

    /// Advances one DRAM clock: retires finished requests into `done`, then
    /// issues at most one command.
    pub fn tick(&mut self, cycle: u64, sink: &mut dyn CommandSink, done: &mut Vec<MemoryRequest>) {
        while self.inflight.peek().is_some_and(|f| f.key().0 <= cycle) {
            done.push(self.inflight.pop().expect("peeked").0);
        }
        self.update_drain_mode();
        if self.cfg.timing.refresh_enabled() && self.refresh_step(cycle, sink) {
            return;
        }
        if let Some(choice) = self.select(cycle) {
            self.issue(choice, cycle, sink);
            return;
        }
        if self.cfg.policy == PagePolicy::Closed {
            self.auto_precharge(cycle, sink);
        }
    }

    /// The request command FR-FCFS would issue at `cycle`, without issuing it.
    pub fn peek(&mut self, cycle: u64) -> Option<(CommandKind, RequestId)> {
        self.update_drain_mode();
        let c = self.select(cycle)?;
        let q = if c.write_queue { &self.write_q } else { &self.read_q };
        Some((c.kind, q[c.index].id))
    }

    fn update_drain_mode(&mut self) {
        let w = self.write_q.len();
        self.mode = match self.mode {
            DrainMode::ReadPriority if w >= self.cfg.drain_high => DrainMode::WriteDrain,
            DrainMode::WriteDrain if w <= self.cfg.drain_low => DrainMode::ReadPriority,
            m => m,
        };
    }

    fn bank_index(&self, r: &MemoryRequest) -> usize {
        (r.coords.rank * self.cfg.banks_per_rank + r.coords.bank) as usize
    }

    fn group_index(&self, rank: u32, group: u32) -> usize {
        (rank * self.cfg.bank_groups.max(1) + group) as usize
    }

    fn select(&mut self, cycle: u64) -> Option<Choice> {
        let serve_writes =
            (self.mode == DrainMode::WriteDrain && !self.write_q.is_empty()) || self.read_q.is_empty();
        let queue = if serve_writes { &self.write_q } else { &self.read_q };
        if queue.is_empty() {
            return None;
        }
        self.hit_pending.fill(false);
        for r in queue {
            let b = self.bank_index(r);
            if self.banks[b].open_row == Some(r.coords.row) {
                self.hit_pending[b] = true;
            }
        }
        let mut best: Option<((u8, u64, RequestId), Choice)> = None;
        for (index, r) in queue.iter().enumerate() {
            if self.ranks[r.coords.rank as usize].refreshing {
                continue;
            }
            let b = self.bank_index(r);
            let kind = match self.banks[b].open_row {
                Some(row) if row == r.coords.row => {
                    if r.is_write {
                        CommandKind::Wr
                    } else {
                        CommandKind::Rd
                    }
                }
                None => CommandKind::Act,
                // A row with queued hits stays open until they drain.
                Some(_) if self.hit_pending[b] => continue,
                Some(_) => CommandKind::Pre,
            };
            if !self.can_issue(kind, r.coords.rank, b, r.coords.bank_group, cycle) {
                continue;
            }
            let key = (u8::from(!kind.is_column()), r.unit_arrival_cycle, r.id);
            if best.as_ref().is_none_or(|(k, _)| key < *k) {
                best = Some((
                    key,
                    Choice {
                        write_queue: serve_writes,
                        index,
                        kind,
                    },
                ));
            }
        }
        best.map(|(_, c)| c)
    }

    fn can_issue(&self, kind: CommandKind, rank: u32, bank: usize, group: u32, cycle: u64) -> bool {
        let b = &self.banks[bank];
        let t = &self.cfg.timing;
        let rs = &self.ranks[rank as usize];
        match kind {
            CommandKind::Act => {
                let rrd_ok = t.rrd == 0 || rs.last_act.is_none_or(|l| cycle >= l + t.rrd);
                let faw_ok = t.faw == 0 || rs.act_window.len() < 4 || cycle >= rs.act_window[0] + t.faw;
                b.open_row.is_none() && cycle >= b.act_ready && rrd_ok && faw_ok
            }
            CommandKind::Pre => b.open_row.is_some() && cycle >= b.pre_ready,
            CommandKind::Rd | CommandKind::Wr => {
                let wtr_ok = kind == CommandKind::Wr || cycle >= rs.wtr_ready;
                cycle >= b.col_ready
                    && cycle >= self.cas_ready
                    && cycle >= self.group_cas_ready[self.group_index(rank, group)]
                    && wtr_ok
            }
            CommandKind::Ref => false,
        }
    }

    fn issue(&mut self, c: Choice, cycle: u64, sink: &mut dyn CommandSink) {
        let t = self.cfg.timing;
        let queue = if c.write_queue { &mut self.write_q } else { &mut self.read_q };
        let req = &mut queue[c.index];
        let rank = req.coords.rank;
        let bank = (rank * self.cfg.banks_per_rank + req.coords.bank) as usize;
        let first = req.first_command_cycle.is_none();
        if first {
            req.first_command_cycle = Some(cycle);
            let class = classify(self.banks[bank].open_row, req.coords.row);
            req.set_locality(class).expect("first command classifies once");
        }
        let cmd = IssuedCommand {
            cycle,
            kind: c.kind,
            unit: self.cfg.unit,
            rank,
            bank: bank as u32,
            bank_group: req.coords.bank_group,
            row: req.coords.row,
            column: req.coords.column,
            request: Some(req.id),
            first_for_request: first,
        };
        let b = &mut self.banks[bank];
        match c.kind {
            CommandKind::Act => {
                b.open_row = Some(req.coords.row);
                b.col_ready = cycle + t.rcd;
                b.pre_ready = cycle + t.ras;
                let rs = &mut self.ranks[rank as usize];
                rs.last_act = Some(cycle);
                rs.act_window.push_back(cycle);
                if rs.act_window.len() > 4 {
                    rs.act_window.pop_front();
                }
            }
            CommandKind::Pre => {
                b.open_row = None;
                b.act_ready = b.act_ready.max(cycle + t.rp);
            }
            CommandKind::Rd | CommandKind::Wr => {
                let g = (rank * self.cfg.bank_groups.max(1) + req.coords.bank_group) as usize;
                self.cas_ready = cycle + t.ccd_other_group;
                self.group_cas_ready[g] = cycle + t.ccd_same_group;
                if c.kind == CommandKind::Rd {
                    b.pre_ready = b.pre_ready.max(cycle + t.burst);
                    req.data_cycle = Some(cycle + t.cas);
                    req.completion_cycle = Some(cycle + t.cas + t.burst);
                } else {
                    b.pre_ready = b.pre_ready.max(cycle + t.cas + t.burst + t.wr);
                    if t.wtr > 0 {
                        let rs = &mut self.ranks[rank as usize];
                        rs.wtr_ready = rs.wtr_ready.max(cycle + t.cas + t.burst + t.wtr);
                    }
                    req.data_cycle = Some(cycle);
                    req.completion_cycle = Some(cycle + t.burst);
                }
                let done = queue.remove(c.index);
                self.inflight.push(InFlight(done));
            }
            CommandKind::Ref => unreachable!("refresh is not a request command"),
        }
        sink.command(&cmd);
    }

    fn housekeeping(&self, kind: CommandKind, cycle: u64, rank: u32, bank: usize, row: u64) -> IssuedCommand {
        IssuedCommand {
            cycle,
            kind,
            unit: self.cfg.unit,
            rank,
            bank: bank as u32,
            bank_group: (bank as u32 % self.cfg.banks_per_rank) % self.cfg.bank_groups.max(1),
            row,
            column: 0,
            request: None,
            first_for_request: false,
        }
    }

    fn precharge_unattributed(&mut self, bank: usize, cycle: u64, sink: &mut dyn CommandSink) {
        let rank = bank as u32 / self.cfg.banks_per_rank;
        let row = self.banks[bank].open_row.expect("precharging an open bank");
        let cmd = self.housekeeping(CommandKind::Pre, cycle, rank, bank, row);
        let b = &mut self.banks[bank];
        b.open_row = None;
        b.act_ready = b.act_ready.max(cycle + self.cfg.timing.rp);
        sink.command(&cmd);
    }

    /// Closes banks and refreshes ranks whose interval has elapsed. Returns
    /// true when it used this cycle's command slot.
    fn refresh_step(&mut self, cycle: u64, sink: &mut dyn CommandSink) -> bool {
        let t = self.cfg.timing;
        let per_rank = self.cfg.banks_per_rank as usize;
        for rank in 0..self.ranks.len() {
            let rs = &mut self.ranks[rank];
            if !rs.refreshing && cycle >= rs.refresh_due {
                rs.refreshing = true;
            }
            if !rs.refreshing {
                continue;
            }
            let span = rank * per_rank..(rank + 1) * per_rank;
            if let Some(b) = span
                .clone()
                .find(|&b| self.banks[b].open_row.is_some() && cycle >= self.banks[b].pre_ready)
            {
                self.precharge_unattributed(b, cycle, sink);
                return true;
            }
            let ready = self.banks[span.clone()]
                .iter()
                .all(|b| b.open_row.is_none() && cycle >= b.act_ready);
            if ready {
                for b in &mut self.banks[span.clone()] {
                    b.act_ready = cycle + t.rfc;
                }
                let rs = &mut self.ranks[rank];
                rs.refreshing = false;
                rs.refresh_due += t.refi;
                let cmd = self.housekeeping(CommandKind::Ref, cycle, rank as u32, span.start, 0);
                sink.command(&cmd);
                return true;
            }
        }
        false
    }

    fn auto_precharge(&mut self, cycle: u64, sink: &mut dyn CommandSink) {
        let wanted = |b: usize, row: u64, q: &[MemoryRequest]| {
            q.iter().any(|r| self.bank_index(r) == b && r.coords.row == row)
        };
        let victim = (0..self.banks.len()).find(|&b| {
            let s = &self.banks[b];
            match s.open_row {
                Some(row) => {
                    cycle >= s.pre_ready && !wanted(b, row, &self.read_q) && !wanted(b, row, &self.write_q)
                }
                None => false,
            }
        });
        if let Some(b) = victim {
            self.precharge_unattributed(b, cycle, sink);
        }
    }
}
