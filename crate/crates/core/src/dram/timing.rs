use serde::{Deserialize, Serialize};

use super::spec::DramTypeSpec;
use crate::clock::Clock;

/// Controller timing in whole DRAM clocks.
///
/// Disabled optional constraints are zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimingClocks {
    pub cas: u64,
    pub rcd: u64,
    pub rp: u64,
    pub ras: u64,
    pub burst: u64,
    /// CAS-to-CAS spacing within one bank group.
    pub ccd_same_group: u64,
    /// CAS-to-CAS spacing across bank groups (and for types without groups).
    pub ccd_other_group: u64,
    pub rrd: u64,
    pub faw: u64,
    pub wr: u64,
    pub wtr: u64,
    pub refi: u64,
    pub rfc: u64,
}

impl TimingClocks {
    pub fn refresh_enabled(&self) -> bool {
        self.refi > 0 && self.rfc > 0
    }

    /// Cycles a bank is busy for each command kind.
    pub fn occupancy(&self, kind: crate::controller::CommandKind) -> u64 {
        use crate::controller::CommandKind::*;
        match kind {
            Act => self.rcd,
            Pre => self.rp,
            Rd => self.cas + self.burst,
            Wr => self.burst,
            Ref => self.rfc,
        }
    }
}

/// Timing parameters in nanoseconds together with their clock forms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingSet {
    pub tck_ns: f64,
    pub tcas_ns: f64,
    pub trcd_ns: f64,
    pub trp_ns: f64,
    pub tras_ns: f64,
    pub burst_ns: f64,
    pub tccd_same_group_ns: Option<f64>,
    pub tccd_other_group_ns: Option<f64>,
    pub clocks: TimingClocks,
}

/// Decomposes the three published latencies into CAS, RCD and RP.
///
/// Clock forms round the cumulative latencies up and take differences, so
/// hit, miss and conflict each land within one clock of the published value.
pub fn derive_timings(spec: &DramTypeSpec) -> TimingSet {
    let clock: Clock = spec.dram_clock();
    let tck = clock.period_ns();
    let hit = clock.ns_to_cycles_ceil(spec.hit_ns);
    let miss = clock.ns_to_cycles_ceil(spec.miss_ns).max(hit + 1);
    let conflict = clock.ns_to_cycles_ceil(spec.conflict_min_ns).max(miss + 1);

    let burst = spec.beats_per_line().div_ceil(spec.beats_per_clock() as u64);
    let burst_ns = spec.beats_per_line() as f64 * 1000.0 / spec.data_rate_mtps as f64;
    let (cas, rcd, rp) = (hit, miss - hit, conflict - miss);

    let ov = &spec.timing;
    let opt = |ns: Option<f64>| ns.map_or(0, |v| clock.ns_to_cycles_ceil(v));
    let ras = ov.tras_ns.map_or(rcd + cas + burst, |v| clock.ns_to_cycles_ceil(v));
    let grouped = spec.bank_groups_per_rank > 1;
    let ratio = ov.bank_group_ccd_ratio.unwrap_or(2).max(1);
    let ccd_same_group = if grouped { burst * ratio } else { burst };

    let clocks = TimingClocks {
        cas,
        rcd,
        rp,
        ras,
        burst,
        ccd_same_group,
        ccd_other_group: burst,
        rrd: opt(ov.trrd_ns),
        faw: opt(ov.tfaw_ns),
        wr: opt(ov.twr_ns),
        wtr: opt(ov.twtr_ns),
        refi: opt(ov.trefi_ns),
        rfc: opt(ov.trfc_ns),
    };
    TimingSet {
        tck_ns: tck,
        tcas_ns: spec.hit_ns,
        trcd_ns: spec.miss_ns - spec.hit_ns,
        trp_ns: spec.conflict_min_ns - spec.miss_ns,
        tras_ns: ov.tras_ns.unwrap_or(spec.miss_ns + burst_ns),
        burst_ns,
        tccd_same_group_ns: grouped.then_some(burst_ns * ratio as f64),
        tccd_other_group_ns: grouped.then_some(burst_ns),
        clocks,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dram::{builtin_spec, DramKind};

    #[test]
    fn ddr3_decomposition() {
        let t = derive_timings(&builtin_spec(DramKind::Ddr3));
        assert!((t.trcd_ns - 11.3).abs() < 1e-9);
        assert!((t.trp_ns - 11.2).abs() < 1e-9);
        assert!((t.burst_ns - 8.0 / 2.133).abs() < 1e-9);
        assert!((t.burst_ns - 3.75).abs() < 0.01);
        assert_eq!(t.clocks.burst, 4);
        assert_eq!(t.tccd_same_group_ns, None);
    }

    #[test]
    fn ddr4_decomposition() {
        let t = derive_timings(&builtin_spec(DramKind::Ddr4));
        assert!((t.trcd_ns - 13.3).abs() < 1e-9);
        assert!((t.trp_ns - 13.3).abs() < 1e-9);
        assert_eq!(t.clocks.ccd_same_group, 2 * t.clocks.ccd_other_group);
        assert_eq!(t.clocks.ccd_other_group, t.clocks.burst);
    }

    #[test]
    fn clock_forms_stay_within_one_clock() {
        for k in DramKind::ALL {
            let s = builtin_spec(k);
            let t = derive_timings(&s);
            let c = &t.clocks;
            assert!(c.cas > 0 && c.rcd > 0 && c.rp > 0);
            for (clk, ns) in [
                (c.cas, s.hit_ns),
                (c.cas + c.rcd, s.miss_ns),
                (c.cas + c.rcd + c.rp, s.conflict_min_ns),
            ] {
                let err = clk as f64 * t.tck_ns - ns;
                assert!((0.0..t.tck_ns).contains(&(err + 1e-9)), "{k}: {clk} clocks vs {ns} ns");
            }
            assert_eq!(c.ras, c.rcd + c.cas + c.burst);
            assert!(!c.refresh_enabled());
        }
    }

    #[test]
    fn burst_clocks_per_type() {
        let b = |k| derive_timings(&builtin_spec(k)).clocks.burst;
        assert_eq!(b(DramKind::Gddr5), 2);
        assert_eq!(b(DramKind::Hbm), 2);
        assert_eq!(b(DramKind::Hmc), 8);
        assert_eq!(b(DramKind::Lpddr4), 8);
        assert_eq!(b(DramKind::WideIo), 4);
    }

    #[test]
    fn overrides_enable_optional_constraints() {
        let mut s = builtin_spec(DramKind::Ddr3);
        s.timing.trefi_ns = Some(7800.0);
        s.timing.trfc_ns = Some(160.0);
        s.timing.trrd_ns = Some(5.0);
        let c = derive_timings(&s).clocks;
        assert!(c.refresh_enabled());
        assert_eq!(c.rrd, 6);
    }
}
