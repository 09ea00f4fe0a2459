//! `tcpsim`: run scenarios and sweeps, analyze traces, plot results.
//!
//! Exit codes: 0 success, 1 invalid configuration, usage or input, 2 a
//! protocol fault during simulation.

mod plot;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Parser, Subcommand, ValueEnum};
use tcpsim::metrics::{self, cwnd_csv, cwnd_trace, throughput_csv, throughput_series};
use tcpsim::scenario::SweepError;
use tcpsim::{run_scenario, run_sweep, ScenarioConfig, SimError, TcpVariant, TraceLog};

use plot::Series;

#[derive(Parser, Debug)]
#[command(name = "tcpsim", version, about = "TCP Tahoe/Reno over a lossy dumbbell")]
struct Cli {
    /// Omit the version/timestamp header from written files.
    #[arg(long, global = true)]
    no_banner: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run one scenario; writes trace.log, summary.txt and config.echo.
    Simulate {
        config: PathBuf,
        #[arg(short, long, default_value = ".")]
        out_dir: PathBuf,
        /// Replaces experiment.seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run every loss rate x variant x seed; writes sweep.csv and sweep_summary.csv.
    Sweep {
        config: PathBuf,
        /// Comma-separated loss rates.
        #[arg(long, default_value = "0,0.01,0.1,0.2,0.3")]
        loss: String,
        #[arg(long, default_value = "tahoe,reno")]
        variants: String,
        /// Comma-separated seeds; `a-b` expands to an inclusive range.
        #[arg(long, default_value = "1")]
        seeds: String,
        #[arg(short, long, default_value = ".")]
        out_dir: PathBuf,
    },
    /// Summarize a saved trace; optionally export throughput and cwnd CSVs.
    Analyze {
        trace: PathBuf,
        /// Only this flow (default: every flow in the trace).
        #[arg(long)]
        flow: Option<u32>,
        #[arg(long, default_value_t = 1.0)]
        window: f64,
        /// Transfer size, for completion time of a bounded flow.
        #[arg(long)]
        total_bytes: Option<u64>,
        /// Averaging interval for rates (default: time of the last record).
        #[arg(long)]
        duration: Option<f64>,
        #[arg(short, long)]
        out_dir: Option<PathBuf>,
    },
    /// Render a trace or CSV as SVG.
    Plot {
        input: PathBuf,
        #[arg(long, value_enum)]
        kind: PlotKind,
        #[arg(short, long)]
        out: PathBuf,
        /// Second input for `compare`.
        #[arg(long)]
        with: Option<PathBuf>,
        /// Legend labels for `compare`.
        #[arg(long, default_value = "tahoe,reno")]
        labels: String,
        /// Quantity overlaid by `compare`.
        #[arg(long, value_enum, default_value_t = Metric::Throughput)]
        metric: Metric,
        #[arg(long, default_value_t = 1)]
        flow: u32,
        #[arg(long, default_value_t = 1.0)]
        window: f64,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, ValueEnum)]
enum PlotKind {
    Throughput,
    Cwnd,
    Compare,
}

#[derive(Clone, Copy, Debug, PartialEq, ValueEnum)]
enum Metric {
    Throughput,
    Cwnd,
}

#[derive(Debug)]
enum Failure {
    /// Exit 1.
    Invalid(String),
    /// Exit 2.
    Runtime(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Invalid(_) => 1,
            Failure::Runtime(_) => 2,
        }
    }
}

fn invalid(e: impl std::fmt::Display) -> Failure {
    Failure::Invalid(e.to_string())
}

fn banner(enabled: bool) -> Option<String> {
    enabled.then(|| {
        let ts = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs());
        format!("tcpsim {} generated_unix={ts}", env!("CARGO_PKG_VERSION"))
    })
}

fn with_banner(banner: &Option<String>, body: &str) -> String {
    match banner {
        Some(b) => format!("# {b}\n{body}"),
        None => body.to_string(),
    }
}

fn write(path: &Path, contents: &str) -> Result<(), Failure> {
    fs::write(path, contents).map_err(|e| invalid(format!("cannot write {}: {e}", path.display())))
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| invalid(format!("cannot read {}: {e}", path.display())))
}

fn load_config(path: &Path) -> Result<ScenarioConfig, Failure> {
    ScenarioConfig::from_toml_str(&read(path)?).map_err(|e| invalid(format!("{}: {e}", path.display())))
}

fn out_dir(dir: &Path) -> Result<(), Failure> {
    fs::create_dir_all(dir).map_err(|e| invalid(format!("cannot create {}: {e}", dir.display())))
}

fn simulate(config: &Path, dir: &Path, seed: Option<u64>, banner: Option<String>) -> Result<(), Failure> {
    let mut cfg = load_config(config)?;
    if let Some(s) = seed {
        cfg.experiment.seed = s;
    }
    out_dir(dir)?;
    match run_scenario(&cfg) {
        Ok(run) => {
            write(&dir.join("trace.log"), &with_banner(&banner, &run.trace.to_text()))?;
            write(&dir.join("summary.txt"), &with_banner(&banner, &run.summary_text()))?;
            write(
                &dir.join("config.echo"),
                &with_banner(&banner, &run.config_echo.to_toml_string()),
            )?;
            for s in &run.summaries {
                println!(
                    "flow {}: goodput {:.0} bps, throughput {:.0} bps, {} retransmissions, {} timeouts",
                    s.flow_id, s.goodput_bps, s.throughput_bps, s.retransmissions, s.rto_count
                );
            }
            Ok(())
        }
        Err(f) => match f.error {
            SimError::Config(e) => Err(invalid(e)),
            other => {
                // keep what was recorded up to the fault
                write(&dir.join("trace.log"), &with_banner(&banner, &f.trace.to_text()))?;
                Err(Failure::Runtime(other.to_string()))
            }
        },
    }
}

fn parse_list<T>(raw: &str, what: &str, item: impl Fn(&str) -> Result<Vec<T>, String>) -> Result<Vec<T>, Failure> {
    let mut out = Vec::new();
    for part in raw.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        out.extend(item(part).map_err(|e| invalid(format!("bad {what} `{part}`: {e}")))?);
    }
    if out.is_empty() {
        return Err(invalid(format!("{what} list is empty")));
    }
    Ok(out)
}

fn parse_seeds(raw: &str) -> Result<Vec<u64>, Failure> {
    parse_list(raw, "seed", |p| match p.split_once('-') {
        Some((a, b)) => {
            let (a, b): (u64, u64) = (
                a.trim().parse().map_err(|e| format!("{e}"))?,
                b.trim().parse().map_err(|e| format!("{e}"))?,
            );
            if a > b {
                return Err("range start exceeds end".into());
            }
            Ok((a..=b).collect())
        }
        None => Ok(vec![p.parse().map_err(|e| format!("{e}"))?]),
    })
}

fn sweep(config: &Path, loss: &str, variants: &str, seeds: &str, dir: &Path) -> Result<(), Failure> {
    let cfg = load_config(config)?;
    let losses = parse_list(loss, "loss rate", |p| {
        p.parse::<f64>().map(|v| vec![v]).map_err(|e| e.to_string())
    })?;
    let variants = parse_list(variants, "variant", |p| {
        p.parse::<TcpVariant>().map(|v| vec![v]).map_err(|e| e.to_string())
    })?;
    let seeds = parse_seeds(seeds)?;
    out_dir(dir)?;
    let table = run_sweep(&cfg, &losses, &variants, &seeds).map_err(|e| match e {
        SweepError::Runs(failures) => {
            for f in &failures {
                eprintln!("failed: {f}");
            }
            Failure::Runtime(format!("{} of the sweep runs failed", failures.len()))
        }
        other => invalid(other),
    })?;
    write(&dir.join("sweep.csv"), &table.rows_csv())?;
    write(&dir.join("sweep_summary.csv"), &table.summary_csv())?;
    println!(
        "{} runs, {} cells written to {}",
        table.rows.len(),
        table.cells.len(),
        dir.display()
    );
    Ok(())
}

fn load_trace(path: &Path) -> Result<TraceLog, Failure> {
    TraceLog::parse(&read(path)?).map_err(|e| invalid(format!("{}: {e}", path.display())))
}

fn analyze(
    path: &Path,
    flow: Option<u32>,
    window: f64,
    total_bytes: Option<u64>,
    duration: Option<f64>,
    dir: Option<&Path>,
    banner: Option<String>,
) -> Result<(), Failure> {
    let trace = load_trace(path)?;
    let flows: Vec<u32> = match flow {
        Some(f) => vec![f],
        None => {
            let mut ids: Vec<u32> = trace.records().iter().map(|r| r.flow).collect();
            ids.sort_unstable();
            ids.dedup();
            ids
        }
    };
    if flows.is_empty() {
        return Err(invalid(format!("{}: trace has no records", path.display())));
    }
    let duration = duration.unwrap_or(trace.last_time());
    if duration <= 0.0 || !duration.is_finite() {
        return Err(invalid(format!("duration must be positive, got {duration}")));
    }
    if let Some(d) = dir {
        out_dir(d)?;
    }
    let mut text = String::new();
    for id in flows {
        let total = total_bytes.filter(|_| trace.flow(id).any(|r| r.kind == tcpsim::TraceKind::Cwnd));
        let s = metrics::flow_summary(&trace, id, duration, total).map_err(invalid)?;
        s.write_kv(&mut text);
        if let Some(d) = dir {
            let series = throughput_series(&trace, id, window, Some(duration)).map_err(invalid)?;
            write(&d.join(format!("throughput_{id}.csv")), &throughput_csv(&series))?;
            let cw = cwnd_trace(&trace, id);
            if !cw.is_empty() {
                write(&d.join(format!("cwnd_{id}.csv")), &cwnd_csv(&cw))?;
            }
        }
    }
    print!("{}", with_banner(&banner, &text));
    Ok(())
}

fn parse_csv(text: &str, path: &Path) -> Result<Vec<(f64, f64)>, Failure> {
    let mut lines = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'));
    let header = lines
        .next()
        .ok_or_else(|| invalid(format!("{}: empty input", path.display())))?;
    if header.split(',').count() < 2 {
        return Err(invalid(format!(
            "{}: expected at least two CSV columns",
            path.display()
        )));
    }
    lines
        .enumerate()
        .map(|(i, l)| {
            let mut cols = l.split(',').map(|c| c.trim().parse::<f64>());
            match (cols.next(), cols.next()) {
                (Some(Ok(x)), Some(Ok(y))) => Ok((x, y)),
                _ => Err(invalid(format!(
                    "{}: row {} is not numeric: `{l}`",
                    path.display(),
                    i + 2
                ))),
            }
        })
        .collect()
}

fn load_series(path: &Path, metric: Metric, flow: u32, window: f64) -> Result<Vec<(f64, f64)>, Failure> {
    let text = read(path)?;
    let first = text
        .lines()
        .map(str::trim)
        .find(|l| !l.is_empty() && !l.starts_with('#'));
    if !first.is_some_and(|l| l.starts_with("t=")) {
        return parse_csv(&text, path);
    }
    let trace = TraceLog::parse(&text).map_err(|e| invalid(format!("{}: {e}", path.display())))?;
    match metric {
        Metric::Throughput => match throughput_series(&trace, flow, window, Some(trace.last_time())) {
            Ok(s) => Ok(s),
            Err(metrics::MetricsError::UnknownFlow(_)) => Ok(Vec::new()),
            Err(e) => Err(invalid(e)),
        },
        Metric::Cwnd => Ok(cwnd_trace(&trace, flow)),
    }
}

#[allow(clippy::too_many_arguments)]
fn plot_cmd(
    input: &Path,
    kind: PlotKind,
    out: &Path,
    with: Option<&Path>,
    labels: &str,
    metric: Metric,
    flow: u32,
    window: f64,
    banner: Option<String>,
) -> Result<(), Failure> {
    let metric = match kind {
        PlotKind::Throughput => Metric::Throughput,
        PlotKind::Cwnd => Metric::Cwnd,
        PlotKind::Compare => metric,
    };
    let mut series = vec![Series {
        label: input.display().to_string(),
        points: load_series(input, metric, flow, window)?,
    }];
    if kind == PlotKind::Compare {
        let other = with.ok_or_else(|| invalid("compare needs a second input (--with)"))?;
        series.push(Series {
            label: other.display().to_string(),
            points: load_series(other, metric, flow, window)?,
        });
        let names: Vec<&str> = labels.split(',').map(str::trim).collect();
        if names.len() != 2 {
            return Err(invalid("--labels needs exactly two comma-separated names"));
        }
        for (s, n) in series.iter_mut().zip(names) {
            s.label = n.to_string();
        }
    }
    let y_label = match metric {
        Metric::Throughput => "throughput (bps)",
        Metric::Cwnd => "cwnd (MSS)",
    };
    let title = match kind {
        PlotKind::Compare => format!("{} vs {}", series[0].label, series[1].label),
        _ => format!(
            "flow {flow} {}",
            if metric == Metric::Cwnd {
                "congestion window"
            } else {
                "throughput"
            }
        ),
    };
    let svg = plot::render(&title, y_label, &series, banner.as_deref()).map_err(invalid)?;
    write(out, &svg)
}

fn run(cli: Cli) -> Result<(), Failure> {
    let b = banner(!cli.no_banner);
    match cli.command {
        Command::Simulate { config, out_dir, seed } => simulate(&config, &out_dir, seed, b),
        Command::Sweep {
            config,
            loss,
            variants,
            seeds,
            out_dir,
        } => sweep(&config, &loss, &variants, &seeds, &out_dir),
        Command::Analyze {
            trace,
            flow,
            window,
            total_bytes,
            duration,
            out_dir,
        } => analyze(&trace, flow, window, total_bytes, duration, out_dir.as_deref(), b),
        Command::Plot {
            input,
            kind,
            out,
            with,
            labels,
            metric,
            flow,
            window,
        } => plot_cmd(&input, kind, &out, with.as_deref(), &labels, metric, flow, window, b),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            let (Failure::Invalid(m) | Failure::Runtime(m)) = &f;
            eprintln!("error: {m}");
            ExitCode::from(f.code())
        }
    }
}
