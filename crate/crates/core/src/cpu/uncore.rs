use std::collections::{HashMap, VecDeque};

use serde::{Deserialize, Serialize};

use super::cache::{CacheHierarchy, HierarchyConfig, HitLevel};
use super::core::{LoadStatus, MemoryPort};
use super::translate::{PageTable, TranslationMode};
use super::CpuError;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct UncoreConfig {
    pub caches: HierarchyConfig,
    pub page_bytes: u64,
    pub translation_mode: TranslationMode,
    /// Memory requests a core may have waiting for controller admission
    /// before it stops issuing.
    pub out_queue: usize,
}

impl Default for UncoreConfig {
    fn default() -> Self {
        Self {
            caches: HierarchyConfig::default(),
            page_bytes: 4096,
            translation_mode: TranslationMode::Random,
            out_queue: 16,
        }
    }
}

/// A line request that left the last-level cache and waits for the
/// memory controller to accept it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OutgoingRequest {
    /// Core cycle at which the request reaches the controller.
    pub ready_cycle: u64,
    pub core: usize,
    pub is_write: bool,
    pub paddr: u64,
}

/// Caches, translation and miss tracking shared by all cores. Misses to a
/// line already in flight wait on the existing request.
#[derive(Debug)]
pub struct Uncore {
    caches: CacheHierarchy,
    pages: PageTable,
    asids: Vec<u32>,
    line_bytes: u64,
    miss_latency: u64,
    /// Line address to the (core, load sequence) pairs waiting on it.
    mshr: HashMap<u64, Vec<(usize, u64)>>,
    out: Vec<VecDeque<OutgoingRequest>>,
    out_capacity: usize,
    llc_misses: Vec<u64>,
    accesses: u64,
}

impl Uncore {
    /// `asids[i]` is the address space of core `i`; `seed` drives frame
    /// allocation.
    pub fn new(cfg: &UncoreConfig, asids: Vec<u32>, capacity_bytes: u64, seed: u64) -> Result<Self, CpuError> {
        let cores = asids.len();
        if cfg.out_queue == 0 {
            return Err(CpuError::InvalidCore("out_queue must be positive".into()));
        }
        if !cfg.page_bytes.is_power_of_two() || cfg.page_bytes < cfg.caches.l3.line_bytes {
            return Err(CpuError::InvalidCore("page size must be a power of two of at least one line".into()));
        }
        Ok(Self {
            caches: CacheHierarchy::new(&cfg.caches, cores)?,
            pages: PageTable::new(cfg.page_bytes, capacity_bytes, cfg.translation_mode, seed),
            asids,
            line_bytes: cfg.caches.l3.line_bytes,
            miss_latency: cfg.caches.l3.latency_cycles,
            mshr: HashMap::new(),
            out: vec![VecDeque::new(); cores],
            out_capacity: cfg.out_queue,
            llc_misses: vec![0; cores],
            accesses: 0,
        })
    }

    pub fn cores(&self) -> usize {
        self.asids.len()
    }

    /// Demand misses and write-allocate fills sent to memory by `core`.
    pub fn llc_misses(&self, core: usize) -> u64 {
        self.llc_misses[core]
    }

    pub fn cache_accesses(&self) -> u64 {
        self.accesses
    }

    pub fn outstanding_lines(&self) -> usize {
        self.mshr.len()
    }

    pub fn front(&self, core: usize) -> Option<&OutgoingRequest> {
        self.out[core].front()
    }

    pub fn pop_front(&mut self, core: usize) -> Option<OutgoingRequest> {
        self.out[core].pop_front()
    }

    pub fn has_outgoing(&self) -> bool {
        self.out.iter().any(|q| !q.is_empty())
    }

    fn line_of(&self, paddr: u64) -> u64 {
        paddr - paddr % self.line_bytes
    }

    /// Read data for `paddr` arrived; returns the loads it satisfies.
    pub fn complete_read(&mut self, paddr: u64) -> Vec<(usize, u64)> {
        let line = self.line_of(paddr);
        self.mshr.remove(&line).unwrap_or_default()
    }

    fn send(&mut self, core: usize, cycle: u64, is_write: bool, paddr: u64) {
        self.out[core].push_back(OutgoingRequest {
            ready_cycle: cycle + self.miss_latency,
            core,
            is_write,
            paddr,
        });
    }

    fn access(&mut self, core: usize, vaddr: u64, cycle: u64, is_write: bool) -> Result<(u64, Option<u64>), CpuError> {
        self.accesses += 1;
        let paddr = self.pages.translate(self.asids[core], vaddr)?;
        let line = self.line_of(paddr);
        if self.mshr.contains_key(&line) {
            if is_write {
                // The line was allocated when the miss went out; only the
                // dirty bit changes.
                let out = self.caches.access(core, paddr, true);
                for wb in out.writebacks {
                    self.send(core, cycle, true, wb);
                }
            }
            return Ok((line, None));
        }
        let out = self.caches.access(core, paddr, is_write);
        for wb in out.writebacks {
            self.send(core, cycle, true, wb);
        }
        if out.level == HitLevel::Memory {
            self.llc_misses[core] += 1;
            self.mshr.insert(line, Vec::new());
            self.send(core, cycle, false, line);
            return Ok((line, None));
        }
        Ok((line, Some(cycle + out.latency)))
    }
}

impl MemoryPort for Uncore {
    fn can_issue(&self, core: usize) -> bool {
        self.out[core].len() < self.out_capacity
    }

    fn load(&mut self, core: usize, vaddr: u64, cycle: u64, seq: u64) -> Result<LoadStatus, CpuError> {
        let (line, ready) = self.access(core, vaddr, cycle, false)?;
        Ok(match ready {
            Some(c) => LoadStatus::Ready(c),
            None => {
                self.mshr.get_mut(&line).expect("miss registered").push((core, seq));
                LoadStatus::Pending
            }
        })
    }

    fn store(&mut self, core: usize, vaddr: u64, cycle: u64) -> Result<(), CpuError> {
        self.access(core, vaddr, cycle, true).map(|_| ())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn uncore(cores: usize) -> Uncore {
        let cfg = UncoreConfig {
            translation_mode: TranslationMode::Identity,
            ..Default::default()
        };
        Uncore::new(&cfg, (0..cores as u32).collect(), 1 << 30, 0).unwrap()
    }

    #[test]
    fn cold_load_goes_to_memory_then_hits() {
        let mut u = uncore(1);
        assert_eq!(u.load(0, 0x100, 10, 0).unwrap(), LoadStatus::Pending);
        let req = *u.front(0).unwrap();
        assert_eq!(req.ready_cycle, 48);
        assert!(!req.is_write);
        assert_eq!(req.paddr, 0x100);
        assert_eq!(u.llc_misses(0), 1);
        // A second load to the same line merges with the outstanding miss.
        assert_eq!(u.load(0, 0x108, 11, 1).unwrap(), LoadStatus::Pending);
        assert_eq!(u.pop_front(0), Some(req));
        assert!(u.front(0).is_none());
        assert_eq!(u.complete_read(0x100), vec![(0, 0), (0, 1)]);
        assert_eq!(u.load(0, 0x110, 100, 2).unwrap(), LoadStatus::Ready(104));
        assert_eq!(u.cache_accesses(), 3);
    }

    #[test]
    fn store_miss_fetches_line_and_retires() {
        let mut u = uncore(1);
        u.store(0, 0x4000, 0).unwrap();
        assert_eq!(u.llc_misses(0), 1);
        assert!(!u.front(0).unwrap().is_write);
        assert_eq!(u.complete_read(0x4000), vec![]);
    }

    #[test]
    fn separate_address_spaces_get_separate_lines() {
        let mut u = uncore(2);
        u.load(0, 0x0, 0, 0).unwrap();
        u.load(1, 0x0, 0, 0).unwrap();
        assert_ne!(u.front(0).unwrap().paddr, u.front(1).unwrap().paddr);
        assert_eq!(u.outstanding_lines(), 2);
    }

    #[test]
    fn out_queue_applies_backpressure() {
        let mut u = uncore(1);
        for i in 0..16 {
            assert!(u.can_issue(0));
            u.load(0, i * 4096, 0, i).unwrap();
        }
        assert!(!u.can_issue(0));
    }
}
