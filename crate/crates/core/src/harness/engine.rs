//! The simulation loop. Cores and memory advance on one picosecond
//! timeline; when a core cycle and a memory cycle start at the same
//! instant, memory goes first so completions are visible to the core.

use std::collections::VecDeque;
use std::io::Write;

use super::config::{ExperimentConfig, Mode, TraceSource};
use super::report::{CoreReport, LatencyReport, MemoryReport, RunMetadata, ScalingPoint, SimReport};
use super::HarnessError;
use crate::clock::Clock;
use crate::controller::{MemoryBackend, MemoryRequest, MemoryStats, MemorySystem};
use crate::cpu::{Core, Uncore};
use crate::dram::{peak_bandwidth, LINE_BYTES};
use crate::energy::{energy_report, EnergyInputs, EnergyParams, EnergyReport};
use crate::metrics::offline::WARMUP_MARK;
use crate::metrics::{self, is_memory_intensive};
use crate::trace::{RecordStream, TraceRecord};

/// Per-run outputs that are not part of the configuration.
#[derive(Default)]
pub struct RunOptions {
    /// Receives the command log of the primary run.
    pub command_log: Option<Box<dyn Write + Send>>,
}

pub fn run_experiment(cfg: &ExperimentConfig, opts: RunOptions) -> Result<SimReport, HarnessError> {
    cfg.validate()?;
    match cfg.mode {
        Mode::Single => run_single(cfg, opts),
        Mode::Bundle => run_bundle(cfg, opts),
        Mode::Network => run_network(cfg, opts),
        Mode::Multithreaded => run_multithreaded(cfg, opts),
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct CoreSnapshot {
    retired: u64,
    cycle: u64,
    llc_misses: u64,
}

struct CpuRun {
    cores: Vec<(CoreSnapshot, CoreSnapshot)>,
    memory: MemoryStats,
    warmup_incomplete: bool,
    cache_accesses: u64,
    /// Core cycles from the start of measurement to the last core's end.
    measured_cycles: u64,
}

fn mem_clock(mem: &MemorySystem) -> Clock {
    MemoryBackend::clock(mem)
}

/// Replays `traces` one per core. With `restart`, a finished trace starts
/// over until every core has finished once; each core's statistics stop at
/// its first finish.
fn simulate_cpu(
    cfg: &ExperimentConfig,
    traces: &[TraceSource],
    asids: Vec<u32>,
    restart: bool,
    log: Option<Box<dyn Write + Send>>,
) -> Result<CpuRun, HarnessError> {
    let n = traces.len();
    let mut mem = MemorySystem::new(&cfg.dram, &cfg.memory)?;
    if let Some(w) = log {
        mem.enable_log(w);
    }
    let mclock = mem_clock(&mem);
    let cclock = Clock::from_mhz(cfg.core_mhz());
    let mut cores = traces
        .iter()
        .enumerate()
        .map(|(i, t)| Ok(Core::new(i, cfg.cpu.core, t.open()?)?))
        .collect::<Result<Vec<_>, HarnessError>>()?;
    let mut uncore = Uncore::new(&cfg.cpu.uncore, asids, cfg.dram.capacity_bytes, cfg.seed)?;

    let snap = |c: &Core, u: &Uncore, cycle: u64| CoreSnapshot {
        retired: c.retired(),
        cycle,
        llc_misses: u.llc_misses(c.id()),
    };
    let mut first_done: Vec<Option<CoreSnapshot>> = vec![None; n];
    let mut warm: Option<(Vec<CoreSnapshot>, MemoryStats)> = None;
    let mut warmup_failed = false;
    if cfg.warmup_instructions == 0 {
        warm = Some((vec![CoreSnapshot::default(); n], mem.stats()));
        mem.mark(WARMUP_MARK);
    }

    let mut core_now = 0u64;
    let mut next_id = 0u64;
    let mut rr = 0usize;
    let mut done: Vec<MemoryRequest> = Vec::new();

    // One memory cycle: admit ready misses round-robin across cores, tick,
    // and wake the loads waiting on finished reads.
    let mut mem_step = |mem: &mut MemorySystem,
                        uncore: &mut Uncore,
                        cores: &mut [Core],
                        core_now: u64|
     -> Result<(), HarnessError> {
        let m = mem.now();
        let tm = mclock.time_ps(m);
        for k in 0..n {
            let c = (rr + k) % n;
            while let Some(f) = uncore.front(c) {
                if cclock.time_ps(f.ready_cycle) > tm {
                    break;
                }
                let req = MemoryRequest::new(next_id, c as u32, f.is_write, f.paddr);
                if mem.try_enqueue(req, m).is_err() {
                    break;
                }
                next_id += 1;
                uncore.pop_front(c);
            }
        }
        rr = (rr + 1) % n;
        done.clear();
        mem.tick(m, &mut done);
        for r in &done {
            if r.is_write {
                continue;
            }
            let at = mclock.time_ps(r.completion_cycle.expect("completed"));
            let ready = cclock.cycle_at_or_after(at).max(core_now);
            for (core, seq) in uncore.complete_read(r.paddr) {
                cores[core].complete_load(seq, ready);
            }
        }
        Ok(())
    };

    while first_done.iter().any(Option::is_none) {
        let next_core = cores
            .iter()
            .filter(|c| !c.is_finished())
            .filter_map(|c| c.next_active_cycle())
            .map(|c| c.max(core_now))
            .min();
        let tm = mclock.time_ps(mem.now());
        match next_core {
            Some(cc) if cclock.time_ps(cc) < tm => {
                for i in 0..n {
                    let c = &mut cores[i];
                    if c.is_finished() || c.next_active_cycle().map(|x| x.max(core_now)) != Some(cc) {
                        continue;
                    }
                    c.skip_to(cc);
                    c.tick(&mut uncore)?;
                    if c.is_finished() {
                        if first_done[i].is_none() {
                            first_done[i] = Some(snap(c, &uncore, cc + 1));
                        }
                        if restart && first_done.iter().any(Option::is_none) {
                            c.restart(traces[i].open()?);
                        }
                    }
                }
                core_now = cc + 1;
                if warm.is_none() && !warmup_failed {
                    if first_done.iter().any(Option::is_some) {
                        warmup_failed = true;
                    } else if cores.iter().all(|c| c.retired() >= cfg.warmup_instructions) {
                        let s = cores.iter().map(|c| snap(c, &uncore, core_now)).collect();
                        warm = Some((s, mem.stats()));
                        mem.mark(WARMUP_MARK);
                    }
                }
            }
            _ => {
                if next_core.is_none() && mem.outstanding() == 0 && !uncore.has_outgoing() {
                    return Err(HarnessError::Report("cores wait on memory that has nothing in flight".into()));
                }
                mem_step(&mut mem, &mut uncore, &mut cores, core_now)?;
            }
        }
    }
    if !restart {
        while mem.outstanding() > 0 || uncore.has_outgoing() {
            mem_step(&mut mem, &mut uncore, &mut cores, core_now)?;
        }
    }

    let end_mem = mem.stats();
    mem.finish()?;
    let (start, start_mem, warmup_incomplete) = match warm {
        Some((s, m)) if !warmup_failed => (s, m, false),
        _ => (vec![CoreSnapshot::default(); n], MemoryStats::default(), true),
    };
    let ends: Vec<CoreSnapshot> = first_done.into_iter().map(|s| s.expect("every core finished")).collect();
    let measured_cycles = ends.iter().map(|e| e.cycle).max().unwrap_or(0) - start.first().map_or(0, |s| s.cycle);
    Ok(CpuRun {
        cores: start.into_iter().zip(ends).collect(),
        memory: end_mem.since(&start_mem),
        warmup_incomplete,
        cache_accesses: uncore.cache_accesses(),
        measured_cycles,
    })
}

fn core_reports(run: &CpuRun) -> Vec<CoreReport> {
    run.cores
        .iter()
        .enumerate()
        .map(|(i, (s, e))| {
            let instructions = e.retired - s.retired;
            let cycles = e.cycle - s.cycle;
            let llc_misses = e.llc_misses - s.llc_misses;
            let mpki = metrics::mpki(llc_misses, instructions).unwrap_or(0.0);
            CoreReport {
                core: i,
                instructions,
                cycles,
                ipc: metrics::ipc(instructions, cycles).unwrap_or(0.0),
                llc_misses,
                mpki,
                memory_intensive: is_memory_intensive(mpki),
                alone_ipc: None,
            }
        })
        .collect()
}

fn memory_report(cfg: &ExperimentConfig, stats: &MemoryStats) -> MemoryReport {
    let clock = cfg.dram.dram_clock();
    let cycles = stats.cycles();
    let requests = stats.requests_completed();
    let per = |c: u64, n: u64| if n == 0 { 0.0 } else { clock.cycles_to_ns(c) / n as f64 };
    let service = stats.total_latency_cycles - stats.queuing_cycles;
    let seconds = clock.cycles_to_seconds(cycles);
    MemoryReport {
        cycles,
        elapsed_ns: clock.cycles_to_ns(cycles),
        reads_completed: stats.reads_completed,
        writes_completed: stats.writes_completed,
        commands: stats.commands,
        bpu: stats.bpu.bpu(),
        bpu_per_channel: stats.bpu.bpu_per_channel(),
        locality: stats.locality,
        hit_fraction: stats.locality.hit_fraction(),
        miss_fraction: stats.locality.miss_fraction(),
        conflict_fraction: stats.locality.conflict_fraction(),
        latency: LatencyReport {
            requests,
            avg_total_ns: per(stats.total_latency_cycles, requests),
            avg_queuing_ns: per(stats.queuing_cycles, requests),
            avg_service_ns: per(service, requests),
            avg_read_ns: per(stats.read_latency_cycles, stats.reads_completed),
            queuing_fraction: metrics::queuing_fraction(stats.queuing_cycles, service).unwrap_or(0.0),
        },
        sustained_bandwidth_gbps: metrics::sustained_bandwidth(requests * LINE_BYTES, seconds).unwrap_or(0.0),
        peak_bandwidth_gbps: peak_bandwidth(&cfg.dram),
    }
}

fn energy(cfg: &ExperimentConfig, stats: &MemoryStats) -> Option<EnergyReport> {
    let params = cfg.energy.or_else(|| cfg.dram.kind().and_then(EnergyParams::builtin))?;
    let timing = crate::dram::derive_timings(&cfg.dram);
    Some(energy_report(
        &EnergyInputs {
            commands: stats.commands,
            ranks: cfg.dram.total_ranks(),
            cycles: stats.cycles(),
            rank_active_cycles: stats.bpu.rank_active_cycles.iter().sum(),
            clock: cfg.dram.dram_clock(),
            refresh_enabled: timing.clocks.refresh_enabled(),
        },
        &params,
    ))
}

fn metadata(cfg: &ExperimentConfig, warmup_incomplete: bool) -> RunMetadata {
    let mut notes = Vec::new();
    if cfg.traces.iter().any(TraceSource::is_synthetic_bursty) {
        notes.push("bursty synthetic trace stands in for captured network traffic".to_string());
    }
    if cfg.energy.is_none() && cfg.dram.kind().and_then(EnergyParams::builtin).is_some() {
        notes.push("energy uses shipped placeholder parameters; absolute joules are not authoritative".to_string());
    }
    RunMetadata {
        tool: env!("CARGO_PKG_NAME").to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        spec: cfg.dram.name.clone(),
        mode: cfg.mode,
        seed: cfg.seed,
        config_hash: cfg.hash(),
        warmup_instructions: cfg.warmup_instructions,
        warmup_incomplete,
        notes,
    }
}

fn cpu_report(cfg: &ExperimentConfig, run: &CpuRun) -> SimReport {
    SimReport {
        metadata: metadata(cfg, run.warmup_incomplete),
        cores: core_reports(run),
        weighted_speedup: None,
        scaling: Vec::new(),
        memory: memory_report(cfg, &run.memory),
        energy: energy(cfg, &run.memory),
        cache_accesses: run.cache_accesses,
        throttle_stalls: 0,
    }
}

pub fn run_single(cfg: &ExperimentConfig, opts: RunOptions) -> Result<SimReport, HarnessError> {
    let run = simulate_cpu(cfg, &cfg.traces[..1], vec![0], false, opts.command_log)?;
    Ok(cpu_report(cfg, &run))
}

/// Shared run with restarts, then one solo run per trace (same seed and
/// warmup) for the alone IPCs.
pub fn run_bundle(cfg: &ExperimentConfig, opts: RunOptions) -> Result<SimReport, HarnessError> {
    let traces = &cfg.traces;
    let (shared, solos) = std::thread::scope(|s| {
        let solo_handles: Vec<_> = traces
            .iter()
            .map(|t| s.spawn(move || simulate_cpu(cfg, std::slice::from_ref(t), vec![0], false, None)))
            .collect();
        let asids = (0..traces.len() as u32).collect();
        let shared = simulate_cpu(cfg, traces, asids, true, opts.command_log);
        let solos: Vec<_> = solo_handles.into_iter().map(|h| h.join().expect("solo run panicked")).collect();
        (shared, solos)
    });
    let shared = shared?;
    let mut report = cpu_report(cfg, &shared);
    let mut alone = Vec::new();
    for (core, solo) in report.cores.iter_mut().zip(solos) {
        let solo = solo?;
        let ipc = core_reports(&solo)[0].ipc;
        core.alone_ipc = Some(ipc);
        alone.push(ipc);
        report.metadata.warmup_incomplete |= solo.warmup_incomplete;
    }
    let shared_ipc: Vec<f64> = report.cores.iter().map(|c| c.ipc).collect();
    report.weighted_speedup = Some(
        metrics::weighted_speedup(&shared_ipc, &alone).map_err(|e| HarnessError::Report(e.to_string()))?,
    );
    Ok(report)
}

/// Runs every thread set; threads share one address space. Speedups are
/// relative to the one-thread set, and the rest of the report describes
/// the largest set.
pub fn run_multithreaded(cfg: &ExperimentConfig, mut opts: RunOptions) -> Result<SimReport, HarnessError> {
    let sets = &cfg.thread_sets;
    let largest = (0..sets.len()).max_by_key(|&i| (sets[i].traces.len(), i)).expect("validated non-empty");
    let runs: Vec<Result<CpuRun, HarnessError>> = std::thread::scope(|s| {
        let handles: Vec<_> = sets
            .iter()
            .enumerate()
            .map(|(i, set)| {
                let log = if i == largest { opts.command_log.take() } else { None };
                s.spawn(move || simulate_cpu(cfg, &set.traces, vec![0; set.traces.len()], false, log))
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("thread-set run panicked")).collect()
    });
    let runs = runs.into_iter().collect::<Result<Vec<_>, _>>()?;
    let cclock = Clock::from_mhz(cfg.core_mhz());
    let times: Vec<f64> = runs.iter().map(|r| cclock.cycles_to_ns(r.measured_cycles)).collect();
    let base = sets.iter().position(|s| s.traces.len() == 1).expect("validated one-thread set");
    let mut report = cpu_report(cfg, &runs[largest]);
    report.metadata.warmup_incomplete = runs.iter().any(|r| r.warmup_incomplete);
    report.scaling = sets
        .iter()
        .zip(&times)
        .map(|(set, &t)| {
            Ok(ScalingPoint {
                threads: set.traces.len(),
                execution_ns: t,
                parallel_speedup: metrics::parallel_speedup(times[base], t)
                    .map_err(|e| HarnessError::Report(e.to_string()))?,
            })
        })
        .collect::<Result<_, HarnessError>>()?;
    Ok(report)
}

/// Feeds one trace straight to the controller. Bubbles are idle cycles;
/// each access becomes `packet_lines` consecutive line requests.
struct Injector {
    trace: RecordStream,
    current: Option<TraceRecord>,
    pending: VecDeque<(bool, u64)>,
    exhausted: bool,
}

impl Injector {
    fn is_done(&self) -> bool {
        self.exhausted && self.current.is_none() && self.pending.is_empty()
    }
}

pub fn run_network(cfg: &ExperimentConfig, opts: RunOptions) -> Result<SimReport, HarnessError> {
    let net = cfg.network;
    let mut mem = MemorySystem::new(&cfg.dram, &cfg.memory)?;
    if let Some(w) = opts.command_log {
        mem.enable_log(w);
    }
    let mclock = mem_clock(&mem);
    let cclock = Clock::from_mhz(cfg.core_mhz());
    let capacity = cfg.dram.capacity_bytes;
    let mut inj = cfg
        .traces
        .iter()
        .map(|t| {
            Ok(Injector {
                trace: t.open()?,
                current: None,
                pending: VecDeque::new(),
                exhausted: false,
            })
        })
        .collect::<Result<Vec<_>, HarnessError>>()?;
    mem.mark(WARMUP_MARK);

    let n = inj.len();
    let mut done = Vec::new();
    let mut next_id = 0u64;
    let mut throttle_stalls = 0u64;
    let mut rr = 0;
    let mut cycle = 0u64;
    loop {
        let tc = cclock.time_ps(cycle);
        while mclock.time_ps(mem.now()) <= tc {
            done.clear();
            mem.tick(mem.now(), &mut done);
        }
        if inj.iter().all(Injector::is_done) {
            break;
        }
        for k in 0..n {
            let i = (rr + k) % n;
            let j = &mut inj[i];
            let mut budget = net.issue_width;
            let mut throttled = false;
            while budget > 0 {
                if let Some(&(is_write, addr)) = j.pending.front() {
                    if mem.outstanding() >= net.max_inflight {
                        throttled = true;
                        break;
                    }
                    let req = MemoryRequest::new(next_id, i as u32, is_write, addr);
                    if mem.try_enqueue(req, mem.now()).is_err() {
                        break;
                    }
                    next_id += 1;
                    j.pending.pop_front();
                    budget -= 1;
                    continue;
                }
                if j.current.is_none() && !j.exhausted {
                    match j.trace.next() {
                        Some(r) => j.current = Some(r?),
                        None => j.exhausted = true,
                    }
                }
                let Some(rec) = j.current.as_mut() else { break };
                if rec.bubbles > 0 {
                    rec.bubbles -= 1;
                    break;
                }
                for (is_write, a) in [(false, rec.read), (true, rec.write)] {
                    if let Some(a) = a {
                        let base = (a % capacity) / LINE_BYTES * LINE_BYTES;
                        for l in 0..net.packet_lines as u64 {
                            j.pending.push_back((is_write, (base + l * LINE_BYTES) % capacity));
                        }
                    }
                }
                j.current = None;
            }
            throttle_stalls += throttled as u64;
        }
        rr = (rr + 1) % n;
        cycle += 1;
    }
    while mem.outstanding() > 0 {
        done.clear();
        mem.tick(mem.now(), &mut done);
    }
    let stats = mem.stats();
    mem.finish()?;
    Ok(SimReport {
        metadata: metadata(cfg, false),
        cores: Vec::new(),
        weighted_speedup: None,
        scaling: Vec::new(),
        memory: memory_report(cfg, &stats),
        energy: energy(cfg, &stats),
        cache_accesses: 0,
        throttle_stalls,
    })
}
