//! The `reqlens` command line.
//!
//! Subcommands:
//!
//! - `simulate`: sweep request rates through the simulator and the full
//!   pipeline, then compare measured metrics with ground truth.
//! - `replay`: match a captured trace file and print per-request records.
//! - `watch`: poll the metrics API at a fixed interval while a simulated
//!   workload runs, the way a resource manager would.
//! - `live`: in-kernel capture; reports that the backend is not built.
//!
//! Exit codes are 0 on success, 1 on runtime errors and 2 on usage errors.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use thiserror::Error;

use crate::disambiguator::{DisambiguatorConfig, MatchStats, ProtocolPattern};
use crate::event::{RequestRecord, WIRE_RECORD_LEN};
use crate::metrics::{nearest_rank, MetricsEngine, MetricsError, TracingOptions};
use crate::pipeline::{measure, Measurement};
use crate::sim::{simulate, sweep, GroundTruthLog, ServiceTime, SimConfig, SimError, Stop};
use crate::trace_io::{self, TraceError};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error(transparent)]
    Trace(#[from] TraceError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("writing report: {0}")]
    Report(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            _ => 1,
        }
    }

    fn io(path: &Path, source: io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        CliError::Usage(e.to_string())
    }
}

#[derive(Debug, Parser)]
#[command(name = "reqlens", version, about = "Per-request latency and throughput from syscall traces")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sweep request rates through a simulated server and compare with ground truth.
    Simulate(SimulateArgs),
    /// Match a captured trace and print per-request records.
    Replay(ReplayArgs),
    /// Print metrics at a fixed interval while a simulated workload runs.
    Watch(WatchArgs),
    /// Attach to a running process with in-kernel capture.
    Live(LiveArgs),
}

#[derive(Debug, Clone, Args)]
pub struct SimFlags {
    /// TOML file with simulator settings; the flags below override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Server protocol to simulate.
    #[arg(long, value_parser = parse_pattern)]
    pub protocol: Option<ProtocolPattern>,
    /// Arrival horizon, e.g. `10s` or `500ms`.
    #[arg(long, value_parser = parse_nanos)]
    pub duration: Option<u64>,
    /// Stop after this many requests instead of a fixed duration.
    #[arg(long, conflicts_with = "duration")]
    pub requests: Option<usize>,
    #[arg(long)]
    pub workers: Option<usize>,
    /// Median service time, e.g. `5ms`.
    #[arg(long, value_parser = parse_nanos)]
    pub service_median: Option<u64>,
    /// Lognormal shape of service times; 0 makes them constant.
    #[arg(long)]
    pub service_sigma: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Maximum out-of-order delivery of events, e.g. `2ms`.
    #[arg(long, value_parser = parse_nanos)]
    pub jitter: Option<u64>,
    /// Constant network delay added to client-side latency.
    #[arg(long, value_parser = parse_nanos)]
    pub client_offset: Option<u64>,
}

#[derive(Debug, Clone, Args)]
pub struct MatchFlags {
    /// Matching pattern; `auto` detects it from the first events. Defaults
    /// to the simulated protocol for simulated sources and `auto` for replay.
    #[arg(long, value_parser = parse_pattern)]
    pub pattern: Option<ProtocolPattern>,
    /// How long to hold events back for reordering, e.g. `10ms`.
    #[arg(long, value_parser = parse_nanos, default_value = "10ms")]
    pub reorder_window: u64,
}

impl MatchFlags {
    fn config(&self, fallback: ProtocolPattern) -> DisambiguatorConfig {
        DisambiguatorConfig {
            reorder_window_ns: self.reorder_window,
            ..DisambiguatorConfig::with_pattern(self.pattern.unwrap_or(fallback))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TraceFormat {
    Text,
    Binary,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    /// Comma-separated request rates, one run each, e.g. `50,100,200`.
    #[arg(long, value_delimiter = ',', num_args = 1.., required = true)]
    pub rates: Vec<f64>,
    #[command(flatten)]
    pub sim: SimFlags,
    #[command(flatten)]
    pub matching: MatchFlags,
    /// Write the report as CSV.
    #[arg(long)]
    pub csv: Option<PathBuf>,
    /// Write gnuplot data files and a plot script into this directory.
    #[arg(long)]
    pub plot_dir: Option<PathBuf>,
    /// Write each run's generated trace into this directory.
    #[arg(long)]
    pub trace_dir: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "text")]
    pub trace_format: TraceFormat,
}

#[derive(Debug, Clone, Args)]
pub struct ReplayArgs {
    /// Trace file to read.
    pub trace: PathBuf,
    #[command(flatten)]
    pub matching: MatchFlags,
    #[arg(long, value_enum, default_value = "text")]
    pub format: TraceFormat,
    /// Print only the summary, not every record.
    #[arg(long)]
    pub summary_only: bool,
}

#[derive(Debug, Clone, Args)]
pub struct WatchArgs {
    /// Watch a running process. Needs the live capture backend.
    #[arg(long)]
    pub pid: Option<u32>,
    /// Request rate of the simulated workload.
    #[arg(long, default_value_t = 100.0)]
    pub rate: f64,
    /// Time between metric lines, e.g. `1s`.
    #[arg(long, value_parser = parse_nanos, default_value = "1s")]
    pub interval: u64,
    /// Percentile to report.
    #[arg(long, default_value_t = 99.0)]
    pub percentile: f64,
    /// Pace output in wall-clock time instead of printing as fast as possible.
    #[arg(long)]
    pub realtime: bool,
    #[command(flatten)]
    pub sim: SimFlags,
    #[command(flatten)]
    pub matching: MatchFlags,
}

#[derive(Debug, Clone, Args)]
pub struct LiveArgs {
    #[arg(long)]
    pub pid: u32,
}

fn parse_pattern(s: &str) -> Result<ProtocolPattern, String> {
    s.parse().map_err(|_| {
        let names: Vec<_> = ProtocolPattern::CONCRETE
            .iter()
            .map(|p| p.as_str())
            .chain(["auto"])
            .collect();
        format!("unknown pattern `{s}`, expected one of: {}", names.join(", "))
    })
}

fn parse_nanos(s: &str) -> Result<u64, String> {
    let d = humantime::parse_duration(s).map_err(|e| e.to_string())?;
    u64::try_from(d.as_nanos()).map_err(|_| "duration too large".to_string())
}

/// Build a simulator config from an optional file plus flag overrides.
pub fn sim_config(flags: &SimFlags) -> Result<SimConfig, CliError> {
    let mut cfg = match &flags.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
            SimConfig::from_toml(&text)?
        }
        None => SimConfig::default(),
    };
    if let Some(p) = flags.protocol {
        cfg.protocol = p;
    }
    if let Some(ns) = flags.duration {
        cfg.stop = Stop::Duration { ns };
    }
    if let Some(count) = flags.requests {
        cfg.stop = Stop::Requests { count };
    }
    if let Some(w) = flags.workers {
        cfg.workers = w;
    }
    if flags.service_median.is_some() || flags.service_sigma.is_some() {
        let (median, sigma) = match cfg.service {
            ServiceTime::Constant { ns } => (ns, 0.0),
            ServiceTime::LogNormal { median_ns, sigma } => (median_ns, sigma),
        };
        let median = flags.service_median.unwrap_or(median);
        let sigma = flags.service_sigma.unwrap_or(sigma);
        cfg.service = if sigma == 0.0 {
            ServiceTime::Constant { ns: median }
        } else {
            ServiceTime::LogNormal { median_ns: median, sigma }
        };
    }
    if let Some(seed) = flags.seed {
        cfg.seed = seed;
    }
    if let Some(j) = flags.jitter {
        cfg.jitter_ns = j;
    }
    if let Some(o) = flags.client_offset {
        cfg.client_offset_ns = o;
    }
    Ok(cfg)
}

/// One row of a rate sweep.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunRow {
    pub configured_rps: f64,
    pub requests: usize,
    pub measured_rps: Option<f64>,
    pub truth_rps: Option<f64>,
    pub p50_ns: Option<u64>,
    pub p95_ns: Option<u64>,
    pub p99_ns: Option<u64>,
    pub truth_p50_ns: Option<u64>,
    pub truth_p95_ns: Option<u64>,
    pub truth_p99_ns: Option<u64>,
    pub client_p99_ns: Option<u64>,
    pub matched: u64,
    pub unmatched_end: u64,
    pub duplicate_start: u64,
    pub dropped_reorder: u64,
    pub evicted: u64,
    pub ring_drops: u64,
}

impl RunRow {
    pub fn new(configured_rps: f64, m: &Measurement, truth: &GroundTruthLog) -> Self {
        let mut lat: Vec<u64> = truth.entries.iter().map(|e| e.latency()).collect();
        lat.sort_unstable();
        let mut client = truth.client_latencies();
        client.sort_unstable();
        RunRow {
            configured_rps,
            requests: truth.len(),
            measured_rps: m.rps.clone().ok(),
            truth_rps: truth.rate(),
            p50_ns: m.p50.clone().ok(),
            p95_ns: m.p95.clone().ok(),
            p99_ns: m.p99.clone().ok(),
            truth_p50_ns: sorted_percentile(&lat, 50.0),
            truth_p95_ns: sorted_percentile(&lat, 95.0),
            truth_p99_ns: sorted_percentile(&lat, 99.0),
            client_p99_ns: sorted_percentile(&client, 99.0),
            matched: m.stats.matched,
            unmatched_end: m.stats.unmatched_end,
            duplicate_start: m.stats.duplicate_start,
            dropped_reorder: m.stats.dropped_reorder,
            evicted: m.stats.evicted,
            ring_drops: m.ring_drops,
        }
    }
}

/// Nearest-rank percentile of an ascending slice.
pub fn sorted_percentile(sorted: &[u64], p: f64) -> Option<u64> {
    (!sorted.is_empty()).then(|| sorted[nearest_rank(p, sorted.len()) - 1])
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunReport {
    pub protocol: ProtocolPattern,
    pub pattern: ProtocolPattern,
    pub rows: Vec<RunRow>,
}

fn ms(ns: Option<u64>) -> String {
    ns.map_or_else(|| "-".into(), |v| format!("{:.3}", v as f64 / 1e6))
}

fn rate(r: Option<f64>) -> String {
    r.map_or_else(|| "-".into(), |v| format!("{v:.2}"))
}

impl RunReport {
    pub fn to_csv(&self) -> Result<String, CliError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for row in &self.rows {
            w.serialize(row).map_err(|e| CliError::Report(e.to_string()))?;
        }
        let bytes = w.into_inner().map_err(|e| CliError::Report(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| CliError::Report(e.to_string()))
    }

    pub fn table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "protocol {}  matcher {}", self.protocol, self.pattern);
        let _ = writeln!(
            s,
            "{:>9} {:>8} {:>10} {:>10} {:>9} {:>9} {:>9} {:>9} {:>8} {:>9} {:>6}",
            "rps", "requests", "measured", "truth", "p50 ms", "p99 ms", "true p50", "true p99", "matched", "unmatched", "drops"
        );
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{:>9.1} {:>8} {:>10} {:>10} {:>9} {:>9} {:>9} {:>9} {:>8} {:>9} {:>6}",
                r.configured_rps,
                r.requests,
                rate(r.measured_rps),
                rate(r.truth_rps),
                ms(r.p50_ns),
                ms(r.p99_ns),
                ms(r.truth_p50_ns),
                ms(r.truth_p99_ns),
                r.matched,
                r.unmatched_end,
                r.ring_drops
            );
        }
        s
    }

    /// Data for latency-vs-load and measured-vs-true throughput plots, plus a
    /// gnuplot script that renders both.
    pub fn write_plot_data(&self, dir: &Path) -> Result<(), CliError> {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        let mut latency = String::from("# truth_rps engine_p50_ms engine_p99_ms truth_p99_ms client_p99_ms\n");
        let mut throughput = String::from("# truth_rps measured_rps\n");
        for r in &self.rows {
            let _ = writeln!(
                latency,
                "{} {} {} {} {}",
                rate(r.truth_rps),
                ms(r.p50_ns),
                ms(r.p99_ns),
                ms(r.truth_p99_ns),
                ms(r.client_p99_ns)
            );
            let _ = writeln!(throughput, "{} {}", rate(r.truth_rps), rate(r.measured_rps));
        }
        let script = "\
set terminal pngcairo size 800,500
set datafile missing '-'
set output 'latency_vs_rps.png'
set xlabel 'throughput (RPS)'
set ylabel 'latency (ms)'
plot 'latency_vs_rps.dat' using 1:3 with linespoints title 'measured p99', \\
     '' using 1:5 with linespoints title 'client p99', \\
     '' using 1:4 with lines dashtype 2 title 'true p99'
set output 'throughput.png'
set xlabel 'true throughput (RPS)'
set ylabel 'measured throughput (RPS)'
plot 'throughput.dat' using 1:2 with points title 'measured', x with lines title 'y = x'
";
        for (name, body) in [
            ("latency_vs_rps.dat", latency.as_str()),
            ("throughput.dat", throughput.as_str()),
            ("plot.gp", script),
        ] {
            let path = dir.join(name);
            fs::write(&path, body).map_err(|e| CliError::io(&path, e))?;
        }
        Ok(())
    }
}

/// Run a sweep through simulator, matcher, ring and engine.
pub fn cmd_simulate(args: &SimulateArgs) -> Result<RunReport, CliError> {
    if args.rates.is_empty() {
        return Err(CliError::Usage("--rates needs at least one rate".into()));
    }
    let cfg = sim_config(&args.sim)?;
    let runs = sweep(&cfg, &args.rates)?;
    let mut rows = Vec::with_capacity(runs.len());
    for (rate, out) in runs {
        if let Some(dir) = &args.trace_dir {
            write_trace_file(dir, rate, args.trace_format, &out.events)?;
        }
        log::info!("rate {rate}: {} events, {} requests", out.events.len(), out.truth.len());
        let m = measure(cfg.pid, args.matching.config(cfg.protocol), out.events)?;
        rows.push(RunRow::new(rate, &m, &out.truth));
    }
    let report = RunReport {
        protocol: cfg.protocol,
        pattern: args.matching.pattern.unwrap_or(cfg.protocol),
        rows,
    };
    if let Some(path) = &args.csv {
        fs::write(path, report.to_csv()?).map_err(|e| CliError::io(path, e))?;
    }
    if let Some(dir) = &args.plot_dir {
        report.write_plot_data(dir)?;
    }
    Ok(report)
}

fn write_trace_file(
    dir: &Path,
    rate: f64,
    format: TraceFormat,
    events: &[crate::event::TraceEvent],
) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let ext = match format {
        TraceFormat::Text => "trace",
        TraceFormat::Binary => "bin",
    };
    let path = dir.join(format!("sim_{rate}rps.{ext}"));
    let file = fs::File::create(&path).map_err(|e| CliError::io(&path, e))?;
    let w = io::BufWriter::new(file);
    match format {
        TraceFormat::Text => trace_io::write_trace(w, events),
        TraceFormat::Binary => trace_io::write_binary(w, events),
    }
    .map_err(|e| CliError::io(&path, e))
}

/// Per-process outcome of a replay.
#[derive(Clone, Debug)]
pub struct ReplayTarget {
    pub records: Vec<RequestRecord>,
    pub measurement: Measurement,
}

#[derive(Clone, Debug, Default)]
pub struct ReplayReport {
    pub targets: Vec<ReplayTarget>,
}

impl ReplayReport {
    /// Total requests recovered across all processes.
    pub fn n(&self) -> usize {
        self.targets.iter().map(|t| t.records.len()).sum()
    }

    pub fn stats(&self) -> MatchStats {
        self.targets.iter().fold(MatchStats::default(), |mut acc, t| {
            let s = t.measurement.stats;
            acc.matched += s.matched;
            acc.unmatched_end += s.unmatched_end;
            acc.duplicate_start += s.duplicate_start;
            acc.dropped_reorder += s.dropped_reorder;
            acc.pattern_switches += s.pattern_switches;
            acc.evicted += s.evicted;
            acc
        })
    }

    pub fn render(&self, with_records: bool) -> String {
        let mut s = String::new();
        if self.targets.is_empty() {
            s.push_str("no events\n");
        }
        for t in &self.targets {
            let m = &t.measurement;
            let pattern = m.pattern.map_or("-", |p| p.as_str());
            let _ = writeln!(s, "pid {} pattern {}", m.pid, pattern);
            if with_records {
                for r in &t.records {
                    let _ = writeln!(s, "  start={}.{:09} latency_ms={}", r.start_ts / 1_000_000_000, r.start_ts % 1_000_000_000, ms(Some(r.latency)));
                }
            }
            let st = m.stats;
            let _ = writeln!(
                s,
                "  n={} matched={} unmatched_end={} duplicate_start={} dropped_reorder={} evicted={} rps={} avg_ms={} p50_ms={} p95_ms={} p99_ms={}",
                t.records.len(),
                st.matched,
                st.unmatched_end,
                st.duplicate_start,
                st.dropped_reorder,
                st.evicted,
                rate(m.rps.clone().ok()),
                m.average.clone().map_or_else(|_| "-".into(), |a| format!("{:.3}", a / 1e6)),
                ms(m.p50.clone().ok()),
                ms(m.p95.clone().ok()),
                ms(m.p99.clone().ok()),
            );
        }
        s
    }
}

/// Match a trace file, one engine target per process found in it.
pub fn cmd_replay(args: &ReplayArgs) -> Result<ReplayReport, CliError> {
    let path = &args.trace;
    let events = match args.format {
        TraceFormat::Text => {
            let file = fs::File::open(path).map_err(|e| CliError::io(path, e))?;
            trace_io::read_trace(io::BufReader::new(file))?
        }
        TraceFormat::Binary => {
            let bytes = fs::read(path).map_err(|e| CliError::io(path, e))?;
            trace_io::read_binary(&bytes)?
        }
    };
    let mut by_pid: BTreeMap<u32, Vec<_>> = BTreeMap::new();
    for ev in events {
        by_pid.entry(ev.pid).or_default().push(ev);
    }
    let mut report = ReplayReport::default();
    for (pid, events) in by_pid {
        let measurement = measure(pid, args.matching.config(ProtocolPattern::Auto), events)?;
        let records = measurement
            .state
            .history()
            .map(|(start, latency)| RequestRecord::new(start, latency, pid))
            .collect();
        report.targets.push(ReplayTarget { records, measurement });
    }
    Ok(report)
}

/// One polled sample of the metrics API.
#[derive(Clone, Debug, PartialEq)]
pub struct WatchLine {
    pub t_ns: u64,
    pub rps: Option<f64>,
    pub average_ns: Option<f64>,
    pub percentile: f64,
    pub percentile_ns: Option<u64>,
}

impl WatchLine {
    pub fn render(&self) -> String {
        format!(
            "t={:.3}s rps={} avg_ms={} p{}_ms={}",
            self.t_ns as f64 / 1e9,
            rate(self.rps),
            self.average_ns.map_or_else(|| "-".into(), |a| format!("{:.3}", a / 1e6)),
            self.percentile,
            ms(self.percentile_ns)
        )
    }
}

/// Poll the engine every `interval` of simulated time while feeding a
/// generated workload, writing one line per poll to `out`.
pub fn cmd_watch(args: &WatchArgs, out: &mut dyn Write) -> Result<Vec<WatchLine>, CliError> {
    if let Some(pid) = args.pid {
        return Err(MetricsError::Capability(format!("cannot watch pid {pid}: {}", crate::live::unavailable_reason())).into());
    }
    if args.interval == 0 {
        return Err(CliError::Usage("--interval must be positive".into()));
    }
    if !(args.percentile > 0.0 && args.percentile <= 100.0) {
        return Err(CliError::Usage("--percentile must be in (0, 100]".into()));
    }
    let mut cfg = sim_config(&args.sim)?;
    cfg.arrival = crate::sim::Arrival::Open { rate: args.rate };
    let sim = simulate(&cfg)?;
    let horizon = match cfg.stop {
        Stop::Duration { ns } => ns,
        Stop::Requests { .. } => sim.events.last().map_or(0, |e| e.timestamp),
    };
    let ticks = horizon.div_ceil(args.interval).max(1);

    let engine = MetricsEngine::new();
    let pid = cfg.pid;
    let opts = TracingOptions {
        matcher: args.matching.config(cfg.protocol),
        maintained_percentile: args.percentile,
        ..Default::default()
    };
    let mut tracer = engine.start_tracing_with(pid, opts)?;
    let high_water = (engine.ring_capacity() / WIRE_RECORD_LEN / 2).max(1);
    let mut events = sim.events.into_iter().peekable();
    let mut lines = Vec::new();
    for k in 1..=ticks {
        let boundary = k * args.interval;
        let last = k == ticks;
        while let Some(ev) = events.next_if(|e| last || e.timestamp < boundary) {
            tracer.feed(ev);
            if tracer.ring_len() >= high_water {
                engine.poll_loop_step(pid)?;
            }
        }
        if last {
            tracer.finish_with(|| {
                let _ = engine.poll_loop_step(pid);
            });
        }
        while tracer.ring_len() > 0 {
            engine.poll_loop_step(pid)?;
        }
        let line = WatchLine {
            t_ns: boundary,
            rps: engine.get_rps(pid).ok(),
            average_ns: engine.get_average_latency(pid).ok(),
            percentile: args.percentile,
            percentile_ns: engine.get_latency_percentile(pid, args.percentile).ok(),
        };
        writeln!(out, "{}", line.render()).map_err(|e| CliError::io(Path::new("<stdout>"), e))?;
        lines.push(line);
        if args.realtime && !last {
            std::thread::sleep(Duration::from_nanos(args.interval));
        }
    }
    engine.stop_tracing(pid)?;
    Ok(lines)
}

pub fn cmd_live(args: &LiveArgs) -> Result<(), CliError> {
    let support = crate::live::detect();
    log::info!("kernel release: {}", support.release.as_deref().unwrap_or("unknown"));
    Err(MetricsError::Capability(format!("cannot attach to pid {}: {}", args.pid, crate::live::unavailable_reason())).into())
}

/// Parse `argv`, run the subcommand, and return the process exit code.
pub fn run<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let text = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{text}");
                    0
                }
                _ => {
                    let _ = write!(err, "{text}");
                    2
                }
            };
        }
    };
    match dispatch(&cli.command, out) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(command: &Command, out: &mut dyn Write) -> Result<(), CliError> {
    let stdout = |e| CliError::io(Path::new("<stdout>"), e);
    match command {
        Command::Simulate(args) => {
            let report = cmd_simulate(args)?;
            write!(out, "{}", report.table()).map_err(stdout)
        }
        Command::Replay(args) => {
            let report = cmd_replay(args)?;
            write!(out, "{}", report.render(!args.summary_only)).map_err(stdout)
        }
        Command::Watch(args) => cmd_watch(args, out).map(|_| ()),
        Command::Live(args) => cmd_live(args),
    }
}
