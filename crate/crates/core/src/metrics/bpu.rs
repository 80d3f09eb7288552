use serde::{Deserialize, Serialize};

/// Length of a union of intervals whose starts arrive in non-decreasing order.
#[derive(Debug, Clone, Copy, Default)]
struct IntervalUnion {
    busy_until: u64,
    total: u64,
}

impl IntervalUnion {
    fn add(&mut self, start: u64, end: u64) {
        if end <= start {
            return;
        }
        if start >= self.busy_until {
            self.total += end - start;
        } else if end > self.busy_until {
            self.total += end - self.busy_until;
        }
        self.busy_until = self.busy_until.max(end);
    }

    /// Covered cycles strictly before `cycle`, valid once every start is ≤ `cycle`.
    fn before(&self, cycle: u64) -> u64 {
        self.total - self.busy_until.saturating_sub(cycle)
    }
}

/// Bank-activity totals over a window of DRAM cycles.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct BpuCounters {
    /// Sum over cycles of the number of active banks.
    pub bank_cycles: u64,
    /// Cycles with at least one active bank anywhere.
    pub active_cycles: u64,
    /// Sum over units of cycles with at least one active bank in that unit.
    pub unit_active_cycles: u64,
    /// Cycles each rank had at least one active bank.
    pub rank_active_cycles: Vec<u64>,
}

impl BpuCounters {
    /// Mean active banks over globally active cycles; zero when idle.
    pub fn bpu(&self) -> f64 {
        if self.active_cycles == 0 {
            0.0
        } else {
            self.bank_cycles as f64 / self.active_cycles as f64
        }
    }

    /// Same numerator over per-unit active cycles.
    pub fn bpu_per_channel(&self) -> f64 {
        if self.unit_active_cycles == 0 {
            0.0
        } else {
            self.bank_cycles as f64 / self.unit_active_cycles as f64
        }
    }

    pub fn since(&self, earlier: &BpuCounters) -> BpuCounters {
        BpuCounters {
            bank_cycles: self.bank_cycles - earlier.bank_cycles,
            active_cycles: self.active_cycles - earlier.active_cycles,
            unit_active_cycles: self.unit_active_cycles - earlier.unit_active_cycles,
            // An empty earlier snapshot counts as all zeros.
            rank_active_cycles: self
                .rank_active_cycles
                .iter()
                .enumerate()
                .map(|(i, a)| a - earlier.rank_active_cycles.get(i).copied().unwrap_or(0))
                .collect(),
        }
    }
}

/// Incremental bank-occupancy accounting fed by issued commands.
#[derive(Debug, Clone)]
pub struct BpuTracker {
    banks_per_unit: u32,
    banks_per_rank: u32,
    banks: Vec<IntervalUnion>,
    units: Vec<IntervalUnion>,
    ranks: Vec<IntervalUnion>,
    global: IntervalUnion,
}

impl BpuTracker {
    pub fn new(units: u32, banks_per_unit: u32, banks_per_rank: u32) -> Self {
        let banks = (units * banks_per_unit) as usize;
        Self {
            banks_per_unit,
            banks_per_rank,
            banks: vec![IntervalUnion::default(); banks],
            units: vec![IntervalUnion::default(); units as usize],
            ranks: vec![IntervalUnion::default(); banks / banks_per_rank as usize],
            global: IntervalUnion::default(),
        }
    }

    pub fn total_banks(&self) -> usize {
        self.banks.len()
    }

    /// Marks `bank_in_unit` busy over `[start, end)`.
    pub fn occupy(&mut self, unit: u32, bank_in_unit: u32, start: u64, end: u64) {
        let flat = (unit * self.banks_per_unit + bank_in_unit) as usize;
        self.banks[flat].add(start, end);
        self.units[unit as usize].add(start, end);
        self.ranks[flat / self.banks_per_rank as usize].add(start, end);
        self.global.add(start, end);
    }

    /// Totals over `[0, cycle)`.
    pub fn counters_at(&self, cycle: u64) -> BpuCounters {
        BpuCounters {
            bank_cycles: self.banks.iter().map(|b| b.before(cycle)).sum(),
            active_cycles: self.global.before(cycle),
            unit_active_cycles: self.units.iter().map(|u| u.before(cycle)).sum(),
            rank_active_cycles: self.ranks.iter().map(|r| r.before(cycle)).collect(),
        }
    }

    /// Totals including every interval recorded so far.
    pub fn counters_final(&self) -> BpuCounters {
        let end = self.banks.iter().map(|b| b.busy_until).max().unwrap_or(0);
        self.counters_at(end)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overlapping_intervals_count_once_per_bank() {
        let mut t = BpuTracker::new(1, 2, 2);
        t.occupy(0, 0, 0, 10);
        t.occupy(0, 0, 5, 12);
        t.occupy(0, 1, 6, 8);
        let c = t.counters_final();
        assert_eq!(c.bank_cycles, 14);
        assert_eq!(c.active_cycles, 12);
        assert_eq!(c.rank_active_cycles, vec![12]);
    }

    #[test]
    fn split_at_cycle() {
        let mut t = BpuTracker::new(2, 1, 1);
        t.occupy(0, 0, 0, 4);
        t.occupy(1, 0, 2, 10);
        let early = t.counters_at(5);
        assert_eq!((early.bank_cycles, early.active_cycles), (7, 5));
        assert_eq!(early.unit_active_cycles, 7);
        let all = t.counters_final();
        let late = all.since(&early);
        assert_eq!((late.bank_cycles, late.active_cycles), (5, 5));
        assert!((all.bpu() - 12.0 / 10.0).abs() < 1e-12);
        assert!((all.bpu_per_channel() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn gaps_are_not_active() {
        let mut t = BpuTracker::new(1, 1, 1);
        t.occupy(0, 0, 0, 3);
        t.occupy(0, 0, 10, 13);
        t.occupy(0, 0, 20, 20);
        assert_eq!(t.counters_final().active_cycles, 6);
        assert_eq!(t.counters_final().bpu(), 1.0);
    }
}
