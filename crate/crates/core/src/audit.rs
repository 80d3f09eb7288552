//! Replays a command log against the timing rules and reports every
//! command that issued too early or in an illegal bank state.

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::controller::CommandKind;
use crate::eventlog::{EventLog, LogEvent, LoggedCommand};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub cycle: u64,
    pub unit: u32,
    pub bank: u32,
    pub kind: CommandKind,
    pub rule: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "cycle {} unit {} bank {} {}: {}",
            self.cycle, self.unit, self.bank, self.kind, self.rule
        )
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditReport {
    pub commands_checked: u64,
    pub violations: Vec<Violation>,
}

impl AuditReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }
}

#[derive(Default, Clone)]
struct Bank {
    open: Option<u64>,
    last_act: Option<u64>,
    last_pre: Option<u64>,
    last_rd: Option<u64>,
    last_wr: Option<u64>,
    last_ref: Option<u64>,
}

#[derive(Default)]
struct Rank {
    acts: Vec<u64>,
    last_wr: Option<u64>,
}

#[derive(Default)]
struct Unit {
    last_cmd: Option<u64>,
    last_cas: Option<u64>,
    group_cas: HashMap<(u32, u32), u64>,
}

pub fn audit_log(log: &EventLog) -> AuditReport {
    let cmds = log.events.iter().filter_map(|e| match e {
        LogEvent::Command(c) => Some(c),
        _ => None,
    });
    audit_commands(log, cmds)
}

fn audit_commands<'a>(log: &EventLog, cmds: impl Iterator<Item = &'a LoggedCommand>) -> AuditReport {
    let h = &log.header;
    let t = h.timing;
    let per_unit = h.banks_per_unit() as usize;
    let mut banks = vec![Bank::default(); h.total_banks() as usize];
    let mut ranks: HashMap<(u32, u32), Rank> = HashMap::new();
    let mut units: HashMap<u32, Unit> = HashMap::new();
    let mut report = AuditReport::default();

    let since = |last: Option<u64>, now: u64, gap: u64| last.is_none_or(|l| now >= l + gap);

    for c in cmds {
        report.commands_checked += 1;
        let mut bad = |rule: String| {
            report.violations.push(Violation {
                cycle: c.cycle,
                unit: c.unit,
                bank: c.bank,
                kind: c.kind,
                rule,
            })
        };
        if c.unit >= h.units || c.bank as usize >= per_unit || c.rank >= h.ranks_per_unit {
            bad("coordinates outside the configured geometry".into());
            continue;
        }
        let u = units.entry(c.unit).or_default();
        if u.last_cmd == Some(c.cycle) {
            bad("second command on the unit in one cycle".into());
        }
        if u.last_cmd.is_some_and(|l| c.cycle < l) {
            bad("command out of time order".into());
        }
        u.last_cmd = Some(c.cycle);
        let rank = ranks.entry((c.unit, c.rank)).or_default();
        let flat = c.unit as usize * per_unit + c.bank as usize;

        match c.kind {
            CommandKind::Act => {
                let b = &banks[flat];
                if b.open.is_some() {
                    bad("activate to a bank with an open row".into());
                }
                if !since(b.last_pre, c.cycle, t.rp) {
                    bad(format!("tRP: activate {} cycles after precharge", c.cycle - b.last_pre.unwrap()));
                }
                if !since(b.last_ref, c.cycle, t.rfc) {
                    bad("tRFC: activate during refresh".into());
                }
                if t.rrd > 0 && !since(rank.acts.last().copied(), c.cycle, t.rrd) {
                    bad("tRRD".into());
                }
                if t.faw > 0 && rank.acts.len() >= 4 && c.cycle < rank.acts[rank.acts.len() - 4] + t.faw {
                    bad("tFAW".into());
                }
                rank.acts.push(c.cycle);
                if rank.acts.len() > 4 {
                    rank.acts.remove(0);
                }
                let b = &mut banks[flat];
                b.open = Some(c.row);
                b.last_act = Some(c.cycle);
            }
            CommandKind::Pre => {
                let b = &banks[flat];
                if b.open.is_none() {
                    bad("precharge of a closed bank".into());
                }
                if !since(b.last_act, c.cycle, t.ras) {
                    bad("tRAS".into());
                }
                if !since(b.last_rd, c.cycle, t.burst) {
                    bad("read-to-precharge".into());
                }
                if !since(b.last_wr, c.cycle, t.cas + t.burst + t.wr) {
                    bad("write recovery".into());
                }
                let b = &mut banks[flat];
                b.open = None;
                b.last_pre = Some(c.cycle);
            }
            CommandKind::Rd | CommandKind::Wr => {
                let b = &banks[flat];
                if b.open != Some(c.row) {
                    bad(format!("column access to row {} while {:?} is open", c.row, b.open));
                }
                if !since(b.last_act, c.cycle, t.rcd) {
                    bad("tRCD".into());
                }
                if !since(u.last_cas, c.cycle, t.ccd_other_group) {
                    bad("tCCD".into());
                }
                if !since(u.group_cas.get(&(c.rank, c.bank_group)).copied(), c.cycle, t.ccd_same_group) {
                    bad("tCCD within bank group".into());
                }
                if c.kind == CommandKind::Rd && t.wtr > 0 && !since(rank.last_wr, c.cycle, t.cas + t.burst + t.wtr) {
                    bad("tWTR".into());
                }
                u.last_cas = Some(c.cycle);
                u.group_cas.insert((c.rank, c.bank_group), c.cycle);
                let b = &mut banks[flat];
                if c.kind == CommandKind::Rd {
                    b.last_rd = Some(c.cycle);
                } else {
                    b.last_wr = Some(c.cycle);
                    rank.last_wr = Some(c.cycle);
                }
            }
            CommandKind::Ref => {
                let first = c.unit as usize * per_unit + (c.rank * h.banks_per_rank) as usize;
                let span = first..first + h.banks_per_rank as usize;
                if banks[span.clone()].iter().any(|b| b.open.is_some()) {
                    bad("refresh with open rows".into());
                }
                if banks[span.clone()].iter().any(|b| !since(b.last_pre, c.cycle, t.rp)) {
                    bad("refresh before precharge completed".into());
                }
                for b in &mut banks[span] {
                    b.last_ref = Some(c.cycle);
                }
            }
        }
    }
    report
}
