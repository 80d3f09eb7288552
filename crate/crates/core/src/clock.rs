//! Clock domains on a shared picosecond timebase.
//!
//! Cycle `n` of a domain running at `f` kHz starts at `floor(n * 1e9 / f)` ps.
//! Times are always recomputed from the cycle index, so there is no
//! cumulative drift between domains with non-integer period ratios.

use serde::{Deserialize, Serialize};

const PS_PER_KHZ_CYCLE: u128 = 1_000_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Clock {
    khz: u64,
}

impl Clock {
    pub fn from_khz(khz: u64) -> Self {
        assert!(khz > 0 && (khz as u128) < PS_PER_KHZ_CYCLE, "clock frequency out of range");
        Self { khz }
    }

    pub fn from_mhz(mhz: u64) -> Self {
        Self::from_khz(mhz * 1000)
    }

    pub fn khz(&self) -> u64 {
        self.khz
    }

    pub fn period_ns(&self) -> f64 {
        1.0e6 / self.khz as f64
    }

    /// Start time of `cycle`, in picoseconds.
    pub fn time_ps(&self, cycle: u64) -> u64 {
        (cycle as u128 * PS_PER_KHZ_CYCLE / self.khz as u128) as u64
    }

    /// First cycle whose start time is at or after `ps`.
    pub fn cycle_at_or_after(&self, ps: u64) -> u64 {
        let num = ps as u128 * self.khz as u128;
        num.div_ceil(PS_PER_KHZ_CYCLE) as u64
    }

    pub fn cycles_to_ns(&self, cycles: u64) -> f64 {
        cycles as f64 * self.period_ns()
    }

    pub fn cycles_to_seconds(&self, cycles: u64) -> f64 {
        cycles as f64 / (self.khz as f64 * 1000.0)
    }

    /// Smallest whole number of cycles covering `ns`.
    pub fn ns_to_cycles_ceil(&self, ns: f64) -> u64 {
        let exact = ns / self.period_ns();
        (exact - 1e-9).ceil().max(0.0) as u64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn core_clock_period() {
        let c = Clock::from_mhz(4000);
        assert_eq!(c.time_ps(1), 250);
        assert_eq!(c.time_ps(400), 100_000);
        assert_eq!(c.cycle_at_or_after(251), 2);
        assert_eq!(c.cycle_at_or_after(250), 1);
    }

    #[test]
    fn ceil_conversion_tolerates_float_noise() {
        let c = Clock::from_mhz(500);
        assert_eq!(c.ns_to_cycles_ceil(18.0), 9);
        assert_eq!(c.ns_to_cycles_ceil(18.1), 10);
        assert_eq!(c.ns_to_cycles_ceil(0.0), 0);
    }

    proptest! {
        #[test]
        fn time_and_cycle_are_inverse(khz in 1_000u64..8_000_000, n in 0u64..10_000_000_000) {
            let c = Clock::from_khz(khz);
            prop_assert_eq!(c.cycle_at_or_after(c.time_ps(n)), n);
        }
    }
}
