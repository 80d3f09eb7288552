use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::CpuError;
use crate::trace::{RecordStream, TraceRecord};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CoreConfig {
    pub window: usize,
    /// Instructions issued and retired per cycle.
    pub issue_width: u32,
}

impl Default for CoreConfig {
    fn default() -> Self {
        Self {
            window: 128,
            issue_width: 4,
        }
    }
}

impl CoreConfig {
    pub fn validate(&self) -> Result<(), CpuError> {
        if self.window == 0 || self.issue_width == 0 {
            return Err(CpuError::InvalidCore("window and issue width must be positive".into()));
        }
        Ok(())
    }
}

/// Result of presenting a load to the memory hierarchy.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LoadStatus {
    /// Data available at this core cycle.
    Ready(u64),
    /// Data arrives later through [`Core::complete_load`].
    Pending,
}

/// What a core sees of everything below it.
pub trait MemoryPort {
    /// False while the core's path to memory is backed up.
    fn can_issue(&self, core: usize) -> bool;
    fn load(&mut self, core: usize, vaddr: u64, cycle: u64, seq: u64) -> Result<LoadStatus, CpuError>;
    fn store(&mut self, core: usize, vaddr: u64, cycle: u64) -> Result<(), CpuError>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Slot {
    /// A run of non-memory instructions, compressed.
    Bubbles(u64),
    Load { seq: u64, ready: Option<u64> },
    Store,
}

/// In-order issue and retirement through a fixed window. Reads hold their
/// slot until data returns; writes retire as soon as they reach the head.
pub struct Core {
    id: usize,
    cfg: CoreConfig,
    trace: RecordStream,
    current: Option<TraceRecord>,
    trace_done: bool,
    window: VecDeque<Slot>,
    occupancy: usize,
    retired: u64,
    next_seq: u64,
    cycle: u64,
}

impl std::fmt::Debug for Core {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Core")
            .field("id", &self.id)
            .field("cycle", &self.cycle)
            .field("retired", &self.retired)
            .field("occupancy", &self.occupancy)
            .finish_non_exhaustive()
    }
}

impl Core {
    pub fn new(id: usize, cfg: CoreConfig, trace: RecordStream) -> Result<Self, CpuError> {
        cfg.validate()?;
        Ok(Self {
            id,
            cfg,
            trace,
            current: None,
            trace_done: false,
            window: VecDeque::new(),
            occupancy: 0,
            retired: 0,
            next_seq: 0,
            cycle: 0,
        })
    }

    pub fn id(&self) -> usize {
        self.id
    }

    /// Next cycle to simulate, which is also the number of cycles elapsed.
    pub fn cycle(&self) -> u64 {
        self.cycle
    }

    pub fn retired(&self) -> u64 {
        self.retired
    }

    pub fn window_occupancy(&self) -> usize {
        self.occupancy
    }

    pub fn pending_loads(&self) -> usize {
        self.window
            .iter()
            .filter(|s| matches!(s, Slot::Load { ready: None, .. }))
            .count()
    }

    /// Trace exhausted and window drained.
    pub fn is_finished(&self) -> bool {
        self.trace_done && self.current.is_none() && self.window.is_empty()
    }

    /// Starts the trace over; only legal once the previous pass finished.
    pub fn restart(&mut self, trace: RecordStream) {
        assert!(self.is_finished(), "restart before the trace drained");
        self.trace = trace;
        self.trace_done = false;
    }

    /// Delivers data for an outstanding load, usable from `ready_cycle`.
    pub fn complete_load(&mut self, seq: u64, ready_cycle: u64) {
        for slot in self.window.iter_mut() {
            if let Slot::Load { seq: s, ready } = slot {
                if *s == seq {
                    debug_assert!(ready.is_none(), "load completed twice");
                    *ready = Some(ready_cycle);
                    return;
                }
            }
        }
        debug_assert!(false, "completion for unknown load {seq}");
    }

    /// Earliest cycle at which ticking can change state, or `None` when the
    /// core is waiting on memory. Returns `cycle()` when the next tick is
    /// not known to be idle.
    pub fn next_active_cycle(&self) -> Option<u64> {
        let can_fetch = !self.trace_done || self.current.is_some();
        if can_fetch && self.occupancy < self.cfg.window {
            return Some(self.cycle);
        }
        match self.window.front() {
            None => Some(self.cycle),
            Some(Slot::Load { ready: None, .. }) => None,
            Some(Slot::Load { ready: Some(r), .. }) => Some((*r).max(self.cycle)),
            Some(_) => Some(self.cycle),
        }
    }

    /// Jumps over cycles that [`Self::next_active_cycle`] showed to be idle.
    pub fn skip_to(&mut self, cycle: u64) {
        debug_assert!(cycle >= self.cycle);
        self.cycle = cycle;
    }

    fn fetch(&mut self) -> Result<bool, CpuError> {
        if self.current.is_none() && !self.trace_done {
            match self.trace.next() {
                Some(r) => self.current = Some(r?),
                None => self.trace_done = true,
            }
        }
        Ok(self.current.is_some())
    }

    pub fn tick(&mut self, port: &mut dyn MemoryPort) -> Result<(), CpuError> {
        let cycle = self.cycle;
        let width = self.cfg.issue_width as u64;

        let mut budget = width;
        while budget > 0 && self.occupancy < self.cfg.window && self.fetch()? {
            let rec = self.current.as_mut().expect("fetched");
            if rec.bubbles > 0 {
                let room = (self.cfg.window - self.occupancy) as u64;
                let n = rec.bubbles.min(budget).min(room);
                rec.bubbles -= n;
                budget -= n;
                self.occupancy += n as usize;
                match self.window.back_mut() {
                    Some(Slot::Bubbles(run)) => *run += n,
                    _ => self.window.push_back(Slot::Bubbles(n)),
                }
            } else if let Some(addr) = rec.read {
                if !port.can_issue(self.id) {
                    break;
                }
                let seq = self.next_seq;
                let ready = match port.load(self.id, addr, cycle, seq)? {
                    LoadStatus::Ready(c) => Some(c),
                    LoadStatus::Pending => None,
                };
                self.current.as_mut().expect("fetched").read = None;
                self.next_seq += 1;
                self.window.push_back(Slot::Load { seq, ready });
                self.occupancy += 1;
                budget -= 1;
            } else if let Some(addr) = rec.write {
                if !port.can_issue(self.id) {
                    break;
                }
                port.store(self.id, addr, cycle)?;
                self.current.as_mut().expect("fetched").write = None;
                self.window.push_back(Slot::Store);
                self.occupancy += 1;
                budget -= 1;
            } else {
                self.current = None;
            }
        }

        let mut budget = width;
        while budget > 0 {
            match self.window.front_mut() {
                Some(Slot::Bubbles(run)) => {
                    let n = (*run).min(budget);
                    *run -= n;
                    budget -= n;
                    self.retired += n;
                    self.occupancy -= n as usize;
                    if *run == 0 {
                        self.window.pop_front();
                    }
                }
                Some(Slot::Load { ready: Some(r), .. }) if *r <= cycle => {
                    self.window.pop_front();
                    budget -= 1;
                    self.retired += 1;
                    self.occupancy -= 1;
                }
                Some(Slot::Store) => {
                    self.window.pop_front();
                    budget -= 1;
                    self.retired += 1;
                    self.occupancy -= 1;
                }
                _ => break,
            }
        }
        // A record whose parts were all issued is done. Looking ahead one
        // record lets the core notice the end of its trace on this cycle.
        if self.current.is_some_and(|r| r.is_empty()) {
            self.current = None;
        }
        self.fetch()?;
        self.cycle += 1;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trace::TraceRecord;

    /// Every load takes a fixed number of cycles; records issue order.
    struct FixedPort {
        latency: Option<u64>,
        issued: Vec<(u64, u64)>,
    }

    impl MemoryPort for FixedPort {
        fn can_issue(&self, _core: usize) -> bool {
            true
        }
        fn load(&mut self, _core: usize, _vaddr: u64, cycle: u64, seq: u64) -> Result<LoadStatus, CpuError> {
            self.issued.push((cycle, seq));
            Ok(match self.latency {
                Some(l) => LoadStatus::Ready(cycle + l),
                None => LoadStatus::Pending,
            })
        }
        fn store(&mut self, _core: usize, _vaddr: u64, _cycle: u64) -> Result<(), CpuError> {
            Ok(())
        }
    }

    fn stream(recs: Vec<TraceRecord>) -> RecordStream {
        Box::new(recs.into_iter().map(Ok))
    }

    fn run(core: &mut Core, port: &mut FixedPort, limit: u64) {
        while !core.is_finished() && core.cycle() < limit {
            core.tick(port).unwrap();
        }
    }

    #[test]
    fn bubbles_retire_at_full_width() {
        let mut core = Core::new(0, CoreConfig::default(), stream(vec![TraceRecord::bubbles(400)])).unwrap();
        let mut port = FixedPort {
            latency: Some(1),
            issued: vec![],
        };
        run(&mut core, &mut port, 1000);
        assert_eq!(core.retired(), 400);
        assert_eq!(core.cycle(), 100);
    }

    #[test]
    fn single_read_is_latency_bound() {
        let mut core = Core::new(0, CoreConfig::default(), stream(vec![TraceRecord::read(0, 64)])).unwrap();
        let mut port = FixedPort {
            latency: Some(200),
            issued: vec![],
        };
        run(&mut core, &mut port, 10_000);
        assert_eq!(core.retired(), 1);
        assert_eq!(core.cycle(), 201);
    }

    #[test]
    fn window_caps_outstanding_reads() {
        let recs: Vec<_> = (0..300).map(|i| TraceRecord::read(0, i * 64)).collect();
        let mut core = Core::new(0, CoreConfig::default(), stream(recs)).unwrap();
        let mut port = FixedPort {
            latency: None,
            issued: vec![],
        };
        for _ in 0..500 {
            core.tick(&mut port).unwrap();
            assert!(core.window_occupancy() <= 128);
        }
        assert_eq!(port.issued.len(), 128);
        assert_eq!(core.pending_loads(), 128);
        assert_eq!(core.next_active_cycle(), None);
        core.complete_load(0, 600);
        assert_eq!(core.next_active_cycle(), Some(600));
    }

    #[test]
    fn writes_do_not_block() {
        let recs: Vec<_> = (0..100).map(|i| TraceRecord::write(3, i * 64)).collect();
        let mut core = Core::new(0, CoreConfig::default(), stream(recs)).unwrap();
        let mut port = FixedPort {
            latency: None,
            issued: vec![],
        };
        run(&mut core, &mut port, 10_000);
        assert_eq!(core.retired(), 400);
        assert_eq!(core.cycle(), 100);
    }

    #[test]
    fn restart_replays_trace() {
        let mut core = Core::new(0, CoreConfig::default(), stream(vec![TraceRecord::bubbles(8)])).unwrap();
        let mut port = FixedPort {
            latency: Some(1),
            issued: vec![],
        };
        run(&mut core, &mut port, 100);
        core.restart(stream(vec![TraceRecord::bubbles(8)]));
        run(&mut core, &mut port, 100);
        assert_eq!(core.retired(), 16);
        assert_eq!(core.cycle(), 4);
    }
}
