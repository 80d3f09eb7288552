//! Line-oriented event log: `<cycle> <KIND> key=value ...`.
//!
//! `#` lines carry the geometry and clock-form timing needed to audit and
//! re-derive metrics offline.

use std::collections::BTreeMap;
use std::io::{self, BufRead, Write};

use thiserror::Error;

use crate::controller::{CommandKind, IssuedCommand, LocalityClass, MemoryRequest};
use crate::dram::TimingClocks;

pub const LOG_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum LogError {
    #[error("log line {line}: {reason}")]
    Malformed { line: usize, reason: String },
    #[error("log header lacks `{0}`")]
    MissingHeader(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Geometry and timing recorded at the top of a log.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LogHeader {
    pub spec: String,
    pub units: u32,
    pub ranks_per_unit: u32,
    pub banks_per_rank: u32,
    pub bank_groups: u32,
    pub clock_khz: u64,
    pub timing: TimingClocks,
}

impl LogHeader {
    pub fn banks_per_unit(&self) -> u32 {
        self.ranks_per_unit * self.banks_per_rank
    }

    pub fn total_banks(&self) -> u32 {
        self.units * self.banks_per_unit()
    }

    fn lines(&self) -> [String; 3] {
        let t = &self.timing;
        [
            format!("# dramchar-log version={LOG_VERSION} spec={}", self.spec),
            format!(
                "# geometry units={} ranks={} banks={} groups={} clock_khz={}",
                self.units, self.ranks_per_unit, self.banks_per_rank, self.bank_groups, self.clock_khz
            ),
            format!(
                "# timing cas={} rcd={} rp={} ras={} burst={} ccd_same={} ccd_other={} rrd={} faw={} wr={} wtr={} refi={} rfc={}",
                t.cas, t.rcd, t.rp, t.ras, t.burst, t.ccd_same_group, t.ccd_other_group, t.rrd, t.faw, t.wr, t.wtr,
                t.refi, t.rfc
            ),
        ]
    }

    fn from_fields(f: &BTreeMap<String, String>) -> Result<Self, LogError> {
        let get = |k: &str| f.get(k).ok_or_else(|| LogError::MissingHeader(k.to_string()));
        let num = |k: &str| -> Result<u64, LogError> {
            get(k)?.parse().map_err(|_| LogError::Malformed {
                line: 0,
                reason: format!("header `{k}` is not a number"),
            })
        };
        Ok(Self {
            spec: get("spec")?.clone(),
            units: num("units")? as u32,
            ranks_per_unit: num("ranks")? as u32,
            banks_per_rank: num("banks")? as u32,
            bank_groups: num("groups")? as u32,
            clock_khz: num("clock_khz")?,
            timing: TimingClocks {
                cas: num("cas")?,
                rcd: num("rcd")?,
                rp: num("rp")?,
                ras: num("ras")?,
                burst: num("burst")?,
                ccd_same_group: num("ccd_same")?,
                ccd_other_group: num("ccd_other")?,
                rrd: num("rrd")?,
                faw: num("faw")?,
                wr: num("wr")?,
                wtr: num("wtr")?,
                refi: num("refi")?,
                rfc: num("rfc")?,
            },
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LoggedCommand {
    pub cycle: u64,
    pub kind: CommandKind,
    pub unit: u32,
    pub rank: u32,
    pub bank_group: u32,
    pub bank: u32,
    pub row: u64,
    pub column: u32,
    pub request: Option<u64>,
    pub first_for_request: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LogEvent {
    Arrival {
        cycle: u64,
        id: u64,
        core: u32,
        is_write: bool,
        addr: u64,
    },
    Command(LoggedCommand),
    Done {
        cycle: u64,
        id: u64,
        is_write: bool,
        queuing: u64,
        total: u64,
        class: LocalityClass,
    },
    Mark {
        cycle: u64,
        label: String,
    },
}

impl LogEvent {
    pub fn cycle(&self) -> u64 {
        match self {
            LogEvent::Arrival { cycle, .. }
            | LogEvent::Done { cycle, .. }
            | LogEvent::Mark { cycle, .. } => *cycle,
            LogEvent::Command(c) => c.cycle,
        }
    }
}

/// Event-log writer that remembers the first I/O failure instead of
/// interrupting the simulation.
pub struct EventLogWriter {
    out: Box<dyn Write>,
    error: Option<io::Error>,
}

impl std::fmt::Debug for EventLogWriter {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("EventLogWriter").field("error", &self.error).finish()
    }
}

fn op(is_write: bool) -> char {
    if is_write {
        'W'
    } else {
        'R'
    }
}

impl EventLogWriter {
    pub fn new(out: Box<dyn Write>, header: &LogHeader) -> Self {
        let mut w = Self { out, error: None };
        for line in header.lines() {
            w.line(format_args!("{line}"));
        }
        w
    }

    fn line(&mut self, args: std::fmt::Arguments<'_>) {
        if self.error.is_none() {
            if let Err(e) = self.out.write_fmt(args).and_then(|_| self.out.write_all(b"\n")) {
                self.error = Some(e);
            }
        }
    }

    pub fn arrival(&mut self, cycle: u64, r: &MemoryRequest) {
        self.line(format_args!(
            "{cycle} ARR id={} core={} op={} addr={:#X}",
            r.id,
            r.core_id,
            op(r.is_write),
            r.paddr
        ));
    }

    pub fn command(&mut self, c: &IssuedCommand) {
        let req = c.request.map_or_else(|| "-".to_string(), |r| r.to_string());
        self.line(format_args!(
            "{} {} unit={} rank={} group={} bank={} row={} col={} req={} first={}",
            c.cycle,
            c.kind,
            c.unit,
            c.rank,
            c.bank_group,
            c.bank,
            c.row,
            c.column,
            req,
            u8::from(c.first_for_request)
        ));
    }

    pub fn done(&mut self, cycle: u64, r: &MemoryRequest, queuing: u64) {
        let class = r.locality.map_or("-", |c| c.as_str());
        self.line(format_args!(
            "{cycle} DONE id={} op={} q={} total={} class={}",
            r.id,
            op(r.is_write),
            queuing,
            cycle - r.arrival_cycle,
            class
        ));
    }

    pub fn mark(&mut self, cycle: u64, label: &str) {
        self.line(format_args!("{cycle} MARK {label}"));
    }

    pub fn finish(&mut self) -> io::Result<()> {
        if let Some(e) = self.error.take() {
            return Err(e);
        }
        self.out.flush()
    }
}

#[derive(Debug, Clone)]
pub struct EventLog {
    pub header: LogHeader,
    pub events: Vec<LogEvent>,
}

fn fields<'a>(tokens: impl Iterator<Item = &'a str>, line: usize) -> Result<BTreeMap<&'a str, &'a str>, LogError> {
    tokens
        .map(|t| {
            t.split_once('=').ok_or_else(|| LogError::Malformed {
                line,
                reason: format!("expected key=value, found `{t}`"),
            })
        })
        .collect()
}

fn field<'a>(f: &BTreeMap<&str, &'a str>, k: &str, line: usize) -> Result<&'a str, LogError> {
    f.get(k).copied().ok_or_else(|| LogError::Malformed {
        line,
        reason: format!("missing `{k}`"),
    })
}

fn number<T: std::str::FromStr>(f: &BTreeMap<&str, &str>, k: &str, line: usize) -> Result<T, LogError> {
    let v = field(f, k, line)?;
    v.parse().map_err(|_| LogError::Malformed {
        line,
        reason: format!("`{k}={v}` is not a number"),
    })
}

fn parse_op(f: &BTreeMap<&str, &str>, line: usize) -> Result<bool, LogError> {
    match field(f, "op", line)? {
        "R" => Ok(false),
        "W" => Ok(true),
        v => Err(LogError::Malformed {
            line,
            reason: format!("bad op `{v}`"),
        }),
    }
}

/// Reads a complete log into memory.
pub fn read_event_log<R: BufRead>(input: R) -> Result<EventLog, LogError> {
    let mut header_fields = BTreeMap::new();
    let mut events = Vec::new();
    for (i, text) in input.lines().enumerate() {
        let text = text?;
        let line = i + 1;
        let text = text.trim();
        if text.is_empty() {
            continue;
        }
        if let Some(rest) = text.strip_prefix('#') {
            for kv in rest.split_whitespace().filter_map(|t| t.split_once('=')) {
                header_fields.insert(kv.0.to_string(), kv.1.to_string());
            }
            continue;
        }
        let mut tok = text.split_whitespace();
        let bad = |reason: &str| LogError::Malformed {
            line,
            reason: reason.to_string(),
        };
        let cycle: u64 = tok
            .next()
            .and_then(|c| c.parse().ok())
            .ok_or_else(|| bad("missing cycle"))?;
        let kind = tok.next().ok_or_else(|| bad("missing event kind"))?;
        let event = match kind {
            "MARK" => LogEvent::Mark {
                cycle,
                label: tok.collect::<Vec<_>>().join(" "),
            },
            "ARR" => {
                let f = fields(tok, line)?;
                let addr = field(&f, "addr", line)?;
                let addr = u64::from_str_radix(addr.trim_start_matches("0x").trim_start_matches("0X"), 16)
                    .map_err(|_| bad("bad addr"))?;
                LogEvent::Arrival {
                    cycle,
                    id: number(&f, "id", line)?,
                    core: number(&f, "core", line)?,
                    is_write: parse_op(&f, line)?,
                    addr,
                }
            }
            "DONE" => {
                let f = fields(tok, line)?;
                let class = match field(&f, "class", line)? {
                    "hit" => LocalityClass::Hit,
                    "miss" => LocalityClass::Miss,
                    "conflict" => LocalityClass::Conflict,
                    _ => return Err(bad("bad class")),
                };
                LogEvent::Done {
                    cycle,
                    id: number(&f, "id", line)?,
                    is_write: parse_op(&f, line)?,
                    queuing: number(&f, "q", line)?,
                    total: number(&f, "total", line)?,
                    class,
                }
            }
            other => {
                let kind: CommandKind = other.parse().map_err(|_| bad(&format!("unknown event `{other}`")))?;
                let f = fields(tok, line)?;
                let request = match field(&f, "req", line)? {
                    "-" => None,
                    _ => Some(number(&f, "req", line)?),
                };
                LogEvent::Command(LoggedCommand {
                    cycle,
                    kind,
                    unit: number(&f, "unit", line)?,
                    rank: number(&f, "rank", line)?,
                    bank_group: number(&f, "group", line)?,
                    bank: number(&f, "bank", line)?,
                    row: number(&f, "row", line)?,
                    column: number(&f, "col", line)?,
                    request,
                    first_for_request: number::<u8>(&f, "first", line)? == 1,
                })
            }
        };
        events.push(event);
    }
    Ok(EventLog {
        header: LogHeader::from_fields(&header_fields)?,
        events,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::{Arc, Mutex};

    #[derive(Clone, Default)]
    struct Shared(Arc<Mutex<Vec<u8>>>);

    impl Write for Shared {
        fn write(&mut self, buf: &[u8]) -> io::Result<usize> {
            self.0.lock().unwrap().write(buf)
        }
        fn flush(&mut self) -> io::Result<()> {
            Ok(())
        }
    }

    fn header() -> LogHeader {
        LogHeader {
            spec: "DDR3".into(),
            units: 4,
            ranks_per_unit: 1,
            banks_per_rank: 8,
            bank_groups: 1,
            clock_khz: 1_066_500,
            timing: TimingClocks {
                cas: 16,
                rcd: 13,
                rp: 12,
                ras: 33,
                burst: 4,
                ccd_same_group: 4,
                ccd_other_group: 4,
                rrd: 0,
                faw: 0,
                wr: 0,
                wtr: 0,
                refi: 0,
                rfc: 0,
            },
        }
    }

    #[test]
    fn writer_output_parses_back() {
        let buf = Shared::default();
        let mut w = EventLogWriter::new(Box::new(buf.clone()), &header());
        let mut r = MemoryRequest::new(7, 1, false, 0x1C0);
        r.arrival_cycle = 3;
        r.locality = Some(LocalityClass::Miss);
        w.arrival(3, &r);
        let cmd = IssuedCommand {
            cycle: 4,
            kind: CommandKind::Act,
            unit: 3,
            rank: 0,
            bank: 2,
            bank_group: 0,
            row: 9,
            column: 1,
            request: Some(7),
            first_for_request: true,
        };
        w.command(&cmd);
        w.command(&IssuedCommand {
            request: None,
            first_for_request: false,
            kind: CommandKind::Pre,
            cycle: 50,
            ..cmd
        });
        w.done(40, &r, 1);
        w.mark(41, "warmup end");
        w.finish().unwrap();

        let text = String::from_utf8(buf.0.lock().unwrap().clone()).unwrap();
        let log = read_event_log(text.as_bytes()).unwrap();
        assert_eq!(log.header, header());
        assert_eq!(log.events.len(), 5);
        assert_eq!(
            log.events[0],
            LogEvent::Arrival {
                cycle: 3,
                id: 7,
                core: 1,
                is_write: false,
                addr: 0x1C0
            }
        );
        match &log.events[1] {
            LogEvent::Command(c) => {
                assert_eq!((c.kind, c.unit, c.bank, c.row, c.request), (CommandKind::Act, 3, 2, 9, Some(7)));
                assert!(c.first_for_request);
            }
            e => panic!("{e:?}"),
        }
        assert!(matches!(&log.events[2], LogEvent::Command(c) if c.request.is_none()));
        assert_eq!(
            log.events[3],
            LogEvent::Done {
                cycle: 40,
                id: 7,
                is_write: false,
                queuing: 1,
                total: 37,
                class: LocalityClass::Miss
            }
        );
        assert_eq!(log.events[4], LogEvent::Mark { cycle: 41, label: "warmup end".into() });
    }

    #[test]
    fn malformed_lines_report_position() {
        let text = "# spec=X\n5 ACT unit=0\n";
        match read_event_log(text.as_bytes()) {
            Err(LogError::Malformed { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
        assert!(matches!(read_event_log("1 MARK x\n".as_bytes()), Err(LogError::MissingHeader(_))));
    }
}
