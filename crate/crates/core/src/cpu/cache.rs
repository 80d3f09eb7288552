use serde::{Deserialize, Serialize};

use super::CpuError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CacheLevelConfig {
    pub capacity_bytes: u64,
    pub associativity: u32,
    #[serde(default = "default_line")]
    pub line_bytes: u64,
    pub latency_cycles: u64,
    #[serde(default)]
    pub shared: bool,
}

fn default_line() -> u64 {
    64
}

impl CacheLevelConfig {
    pub fn sets(&self) -> u64 {
        self.capacity_bytes / (self.associativity as u64 * self.line_bytes)
    }

    pub fn validate(&self, name: &str) -> Result<(), CpuError> {
        let bad = |m: &str| Err(CpuError::InvalidCache(format!("{name}: {m}")));
        if self.associativity == 0 || self.line_bytes == 0 {
            return bad("associativity and line size must be positive");
        }
        if !self.capacity_bytes.is_multiple_of(self.associativity as u64 * self.line_bytes) {
            return bad("capacity is not a multiple of associativity × line size");
        }
        // Sets are indexed modulo the count, so any positive count works;
        // a shared level sized per core need not be a power of two.
        if self.sets() == 0 {
            return bad("capacity is smaller than one set");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Eviction {
    pub line_addr: u64,
    pub dirty: bool,
}

#[derive(Debug, Clone, Copy, Default)]
struct Way {
    line: u64,
    valid: bool,
    dirty: bool,
    last_use: u64,
}

/// One set-associative, write-back LRU cache.
#[derive(Debug, Clone)]
pub struct Cache {
    cfg: CacheLevelConfig,
    sets: u64,
    ways: Vec<Way>,
    clock: u64,
}

impl Cache {
    pub fn new(cfg: CacheLevelConfig) -> Result<Self, CpuError> {
        cfg.validate("cache")?;
        let sets = cfg.sets();
        Ok(Self {
            cfg,
            sets,
            ways: vec![Way::default(); (sets * cfg.associativity as u64) as usize],
            clock: 0,
        })
    }

    pub fn config(&self) -> &CacheLevelConfig {
        &self.cfg
    }

    pub fn set_index(&self, paddr: u64) -> u64 {
        (paddr / self.cfg.line_bytes) % self.sets
    }

    fn set(&mut self, line: u64) -> &mut [Way] {
        let a = self.cfg.associativity as usize;
        let s = (line % self.sets) as usize;
        &mut self.ways[s * a..(s + 1) * a]
    }

    pub fn contains(&self, paddr: u64) -> bool {
        let line = paddr / self.cfg.line_bytes;
        let a = self.cfg.associativity as usize;
        let s = (line % self.sets) as usize;
        self.ways[s * a..(s + 1) * a].iter().any(|w| w.valid && w.line == line)
    }

    /// Looks the line up, refreshing LRU state and marking it dirty on a
    /// write hit. Returns whether it hit.
    pub fn access(&mut self, paddr: u64, is_write: bool) -> bool {
        self.clock += 1;
        let now = self.clock;
        let line = paddr / self.cfg.line_bytes;
        match self.set(line).iter_mut().find(|w| w.valid && w.line == line) {
            Some(w) => {
                w.last_use = now;
                w.dirty |= is_write;
                true
            }
            None => false,
        }
    }

    /// Installs a line (or merges dirtiness into a resident copy) and returns
    /// the LRU victim if one was displaced.
    pub fn fill(&mut self, paddr: u64, dirty: bool) -> Option<Eviction> {
        self.clock += 1;
        let now = self.clock;
        let line_bytes = self.cfg.line_bytes;
        let line = paddr / line_bytes;
        let set = self.set(line);
        if let Some(w) = set.iter_mut().find(|w| w.valid && w.line == line) {
            w.dirty |= dirty;
            w.last_use = now;
            return None;
        }
        let victim = match set.iter_mut().find(|w| !w.valid) {
            Some(w) => w,
            None => set.iter_mut().min_by_key(|w| w.last_use).expect("non-empty set"),
        };
        let evicted = victim.valid.then_some(Eviction {
            line_addr: victim.line * line_bytes,
            dirty: victim.dirty,
        });
        *victim = Way {
            line,
            valid: true,
            dirty,
            last_use: now,
        };
        evicted
    }
}

/// Where an access was satisfied.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum HitLevel {
    L1,
    L2,
    L3,
    Memory,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AccessOutcome {
    pub level: HitLevel,
    /// Core cycles until data is available (or until the miss leaves the
    /// last level for memory).
    pub latency: u64,
    /// Dirty lines pushed out of the last level.
    pub writebacks: Vec<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HierarchyConfig {
    pub l1: CacheLevelConfig,
    pub l2: CacheLevelConfig,
    /// Last level; capacity is per core and multiplied by the core count.
    pub l3: CacheLevelConfig,
}

impl Default for HierarchyConfig {
    fn default() -> Self {
        let level = |kib: u64, assoc, lat, shared| CacheLevelConfig {
            capacity_bytes: kib * 1024,
            associativity: assoc,
            line_bytes: 64,
            latency_cycles: lat,
            shared,
        };
        Self {
            l1: level(64, 4, 4, false),
            l2: level(256, 4, 12, false),
            l3: level(2048, 8, 38, true),
        }
    }
}

/// Private L1/L2 per core over one shared last level. Non-inclusive,
/// write-back and write-allocate; dirty victims move one level down.
#[derive(Debug, Clone)]
pub struct CacheHierarchy {
    l1: Vec<Cache>,
    l2: Vec<Cache>,
    l3: Cache,
    accesses: u64,
}

impl CacheHierarchy {
    pub fn new(cfg: &HierarchyConfig, cores: usize) -> Result<Self, CpuError> {
        cfg.l1.validate("l1")?;
        cfg.l2.validate("l2")?;
        let mut l3 = cfg.l3;
        l3.capacity_bytes *= cores as u64;
        l3.validate("l3")?;
        Ok(Self {
            l1: (0..cores).map(|_| Cache::new(cfg.l1)).collect::<Result<_, _>>()?,
            l2: (0..cores).map(|_| Cache::new(cfg.l2)).collect::<Result<_, _>>()?,
            l3: Cache::new(l3)?,
            accesses: 0,
        })
    }

    pub fn accesses(&self) -> u64 {
        self.accesses
    }

    pub fn l1(&self, core: usize) -> &Cache {
        &self.l1[core]
    }

    pub fn l3(&self) -> &Cache {
        &self.l3
    }

    fn spill_l2(&mut self, ev: Option<Eviction>, wb: &mut Vec<u64>) {
        if let Some(e) = ev.filter(|e| e.dirty) {
            if let Some(v) = self.l3.fill(e.line_addr, true).filter(|v| v.dirty) {
                wb.push(v.line_addr);
            }
        }
    }

    fn spill_l1(&mut self, core: usize, ev: Option<Eviction>, wb: &mut Vec<u64>) {
        if let Some(e) = ev.filter(|e| e.dirty) {
            let v = self.l2[core].fill(e.line_addr, true);
            self.spill_l2(v, wb);
        }
    }

    pub fn access(&mut self, core: usize, paddr: u64, is_write: bool) -> AccessOutcome {
        self.accesses += 1;
        let mut writebacks = Vec::new();
        let (level, latency) = if self.l1[core].access(paddr, is_write) {
            (HitLevel::L1, self.l1[core].config().latency_cycles)
        } else if self.l2[core].access(paddr, false) {
            let v = self.l1[core].fill(paddr, is_write);
            self.spill_l1(core, v, &mut writebacks);
            (HitLevel::L2, self.l2[core].config().latency_cycles)
        } else {
            let level = if self.l3.access(paddr, false) {
                HitLevel::L3
            } else {
                if let Some(v) = self.l3.fill(paddr, false).filter(|v| v.dirty) {
                    writebacks.push(v.line_addr);
                }
                HitLevel::Memory
            };
            let v = self.l2[core].fill(paddr, false);
            self.spill_l2(v, &mut writebacks);
            let v = self.l1[core].fill(paddr, is_write);
            self.spill_l1(core, v, &mut writebacks);
            (level, self.l3.config().latency_cycles)
        };
        AccessOutcome {
            level,
            latency,
            writebacks,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn l1() -> Cache {
        Cache::new(HierarchyConfig::default().l1).unwrap()
    }

    #[test]
    fn set_index_stride() {
        let c = l1();
        assert_eq!(c.config().sets(), 256);
        assert_eq!(c.set_index(0x1000), c.set_index(0x1000 + 16384));
        assert_ne!(c.set_index(0x1000), c.set_index(0x1040));
    }

    #[test]
    fn five_way_conflict_defeats_lru() {
        let mut c = l1();
        let addrs: Vec<u64> = (0..5).map(|i| i * 16384).collect();
        let mut hits = 0;
        for _ in 0..10 {
            for &a in &addrs {
                if c.access(a, false) {
                    hits += 1;
                } else {
                    c.fill(a, false);
                }
            }
        }
        assert_eq!(hits, 0);
    }

    #[test]
    fn lru_keeps_recent_lines() {
        let mut c = l1();
        for i in 0..4 {
            c.fill(i * 16384, false);
        }
        assert!(c.access(0, false));
        let ev = c.fill(4 * 16384, false).unwrap();
        assert_eq!(ev.line_addr, 16384);
        assert!(c.contains(0));
    }

    #[test]
    fn cold_miss_then_l1_hit() {
        let mut h = CacheHierarchy::new(&HierarchyConfig::default(), 1).unwrap();
        assert_eq!(h.access(0, 0x4000, false).level, HitLevel::Memory);
        let again = h.access(0, 0x4010, false);
        assert_eq!(again.level, HitLevel::L1);
        assert_eq!(again.latency, 4);
        assert_eq!(h.accesses(), 2);
    }

    #[test]
    fn dirty_lines_cascade_to_memory() {
        let cfg = HierarchyConfig {
            l1: CacheLevelConfig {
                capacity_bytes: 64,
                associativity: 1,
                line_bytes: 64,
                latency_cycles: 1,
                shared: false,
            },
            l2: CacheLevelConfig {
                capacity_bytes: 64,
                associativity: 1,
                line_bytes: 64,
                latency_cycles: 2,
                shared: false,
            },
            l3: CacheLevelConfig {
                capacity_bytes: 64,
                associativity: 1,
                line_bytes: 64,
                latency_cycles: 3,
                shared: true,
            },
        };
        let mut h = CacheHierarchy::new(&cfg, 1).unwrap();
        h.access(0, 0, true);
        let mut wbs = Vec::new();
        for i in 1..4 {
            wbs.extend(h.access(0, i * 64, false).writebacks);
        }
        assert_eq!(wbs, vec![0]);
    }

    #[test]
    fn rejects_bad_geometry() {
        let mut cfg = HierarchyConfig::default().l1;
        cfg.capacity_bytes = 1000;
        assert!(cfg.validate("l1").is_err());
        cfg.capacity_bytes = 0;
        assert!(cfg.validate("l1").is_err());
        cfg.capacity_bytes = 3 * cfg.associativity as u64 * 64;
        assert!(cfg.validate("l1").is_ok());
    }
}
