//! Trace log and the measurements derived from it.
//!
//! Every metric here is a pure function of a [`TraceLog`]. Record times and
//! `aux` values are rounded to microseconds when recorded, so a log written to
//! disk and parsed back yields bit-identical analysis results.
//!
//! Line format (fixed field order, newline terminated):
//!
//! ```text
//! t=0.014000 ev=recv node=4 flow=1 pkt=1 size=536 seq=0 aux=0.000000
//! ```

use std::collections::{BTreeMap, HashMap};
use std::fmt::{self, Write as _};
use std::io::{self, BufRead, Write};
use std::str::FromStr;

use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TraceKind {
    Send,
    Recv,
    Enq,
    Deq,
    DropQueue,
    DropLoss,
    /// An ACK reached the TCP sender; `seq` is the ack number and `aux` the
    /// RTT sample (0 when Karn's rule withheld one).
    Ack,
    /// `aux` is the effective congestion window in MSS.
    Cwnd,
    RtoFire,
    Retransmit,
}

impl TraceKind {
    pub fn as_str(self) -> &'static str {
        match self {
            TraceKind::Send => "send",
            TraceKind::Recv => "recv",
            TraceKind::Enq => "enq",
            TraceKind::Deq => "deq",
            TraceKind::DropQueue => "drop_queue",
            TraceKind::DropLoss => "drop_loss",
            TraceKind::Ack => "ack",
            TraceKind::Cwnd => "cwnd",
            TraceKind::RtoFire => "rto_fire",
            TraceKind::Retransmit => "retransmit",
        }
    }
}

impl FromStr for TraceKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        Ok(match s {
            "send" => TraceKind::Send,
            "recv" => TraceKind::Recv,
            "enq" => TraceKind::Enq,
            "deq" => TraceKind::Deq,
            "drop_queue" => TraceKind::DropQueue,
            "drop_loss" => TraceKind::DropLoss,
            "ack" => TraceKind::Ack,
            "cwnd" => TraceKind::Cwnd,
            "rto_fire" => TraceKind::RtoFire,
            "retransmit" => TraceKind::Retransmit,
            other => return Err(format!("unknown event kind `{other}`")),
        })
    }
}

impl fmt::Display for TraceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Rounds to the 6-decimal grid used by the text format.
pub fn quantize(x: f64) -> f64 {
    (x * 1e6).round() / 1e6
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRecord {
    pub t: f64,
    pub kind: TraceKind,
    pub node: u32,
    pub flow: u32,
    /// 0 for records not tied to a packet (`cwnd`, `rto_fire`).
    pub pkt: u64,
    pub size: u32,
    pub seq: u64,
    pub aux: f64,
}

impl TraceRecord {
    #[allow(clippy::too_many_arguments)]
    pub fn new(t: f64, kind: TraceKind, node: u32, flow: u32, pkt: u64, size: u32, seq: u64, aux: f64) -> Self {
        Self {
            t: quantize(t),
            kind,
            node,
            flow,
            pkt,
            size,
            seq,
            aux: quantize(aux),
        }
    }
}

impl fmt::Display for TraceRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "t={:.6} ev={} node={} flow={} pkt={} size={} seq={} aux={:.6}",
            self.t, self.kind, self.node, self.flow, self.pkt, self.size, self.seq, self.aux
        )
    }
}

#[derive(Debug, Error)]
pub enum TraceParseError {
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] io::Error),
}

const FIELDS: [&str; 8] = ["t", "ev", "node", "flow", "pkt", "size", "seq", "aux"];

impl FromStr for TraceRecord {
    type Err = String;
    fn from_str(line: &str) -> Result<Self, String> {
        let mut values = [""; 8];
        let mut parts = line.split_ascii_whitespace();
        for (slot, key) in values.iter_mut().zip(FIELDS) {
            let part = parts.next().ok_or_else(|| format!("missing field `{key}`"))?;
            let (k, v) = part
                .split_once('=')
                .ok_or_else(|| format!("expected `{key}=<value>`, found `{part}`"))?;
            if k != key {
                return Err(format!("expected field `{key}`, found `{k}`"));
            }
            *slot = v;
        }
        if let Some(extra) = parts.next() {
            return Err(format!("unexpected trailing field `{extra}`"));
        }
        fn num<T: FromStr>(key: &str, v: &str) -> Result<T, String> {
            v.parse().map_err(|_| format!("bad value `{v}` for `{key}`"))
        }
        Ok(TraceRecord {
            t: num("t", values[0])?,
            kind: values[1].parse()?,
            node: num("node", values[2])?,
            flow: num("flow", values[3])?,
            pkt: num("pkt", values[4])?,
            size: num("size", values[5])?,
            seq: num("seq", values[6])?,
            aux: num("aux", values[7])?,
        })
    }
}

/// Ordered event records of one run.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TraceLog {
    records: Vec<TraceRecord>,
}

impl TraceLog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, rec: TraceRecord) {
        debug_assert!(self.records.last().is_none_or(|last| last.t <= rec.t));
        self.records.push(rec);
    }

    pub fn records(&self) -> &[TraceRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn last_time(&self) -> f64 {
        self.records.last().map_or(0.0, |r| r.t)
    }

    pub fn flow(&self, flow: u32) -> impl Iterator<Item = &TraceRecord> {
        self.records.iter().filter(move |r| r.flow == flow)
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> io::Result<()> {
        let mut line = String::with_capacity(96);
        for r in &self.records {
            line.clear();
            writeln!(line, "{r}").expect("string write");
            w.write_all(line.as_bytes())?;
        }
        w.flush()
    }

    pub fn to_text(&self) -> String {
        let mut out = Vec::new();
        self.write_to(&mut out).expect("in-memory write");
        String::from_utf8(out).expect("ascii")
    }

    /// Parses the text format. Blank lines and `#` comments are skipped.
    pub fn read_from<R: BufRead>(r: R) -> Result<Self, TraceParseError> {
        let mut log = TraceLog::new();
        for (i, line) in r.lines().enumerate() {
            let line = line?;
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let rec = trimmed
                .parse()
                .map_err(|message| TraceParseError::Malformed { line: i + 1, message })?;
            log.records.push(rec);
        }
        Ok(log)
    }

    pub fn parse(text: &str) -> Result<Self, TraceParseError> {
        Self::read_from(text.as_bytes())
    }

    /// Checks that every packet's first record is its `send` and that it has
    /// at most one terminal record (`recv`, `ack`, `drop_*`) coming after it.
    pub fn check_lifecycles(&self) -> Result<(), String> {
        let mut state: HashMap<u64, bool> = HashMap::new();
        for r in &self.records {
            if r.pkt == 0 {
                continue;
            }
            match r.kind {
                TraceKind::Send => {
                    if state.insert(r.pkt, false).is_some() {
                        return Err(format!("pkt {} sent twice", r.pkt));
                    }
                }
                TraceKind::Recv | TraceKind::Ack | TraceKind::DropQueue | TraceKind::DropLoss => {
                    match state.get_mut(&r.pkt) {
                        None => return Err(format!("pkt {} {} before send", r.pkt, r.kind)),
                        Some(done) if *done => return Err(format!("pkt {} has a second terminal record", r.pkt)),
                        Some(done) => *done = true,
                    }
                }
                _ => {
                    if state.get(&r.pkt).is_none_or(|done| *done) {
                        return Err(format!("pkt {} {} outside its lifetime", r.pkt, r.kind));
                    }
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum MetricsError {
    #[error("flow {0} does not appear in the trace")]
    UnknownFlow(u32),
    #[error("window length must be positive, got {0}")]
    BadWindow(f64),
    #[error("flow {0} is unbounded; completion time needs a transfer size")]
    UnboundedFlow(u32),
}

fn flow_source(trace: &TraceLog, flow: u32) -> Result<u32, MetricsError> {
    trace
        .flow(flow)
        .find(|r| r.kind == TraceKind::Send)
        .map(|r| r.node)
        .ok_or(MetricsError::UnknownFlow(flow))
}

fn ensure_flow(trace: &TraceLog, flow: u32) -> Result<(), MetricsError> {
    if trace.flow(flow).next().is_none() {
        return Err(MetricsError::UnknownFlow(flow));
    }
    Ok(())
}

// packets delivered at the flow's sink
fn sink_arrivals(trace: &TraceLog, flow: u32) -> impl Iterator<Item = &TraceRecord> {
    trace.flow(flow).filter(|r| r.kind == TraceKind::Recv)
}

/// Received bits per second in half-open windows `[k·w, (k+1)·w)` covering
/// `[0, until)`; empty windows report 0.
pub fn throughput_series(
    trace: &TraceLog,
    flow: u32,
    window_s: f64,
    until: Option<f64>,
) -> Result<Vec<(f64, f64)>, MetricsError> {
    if window_s.is_nan() || window_s <= 0.0 {
        return Err(MetricsError::BadWindow(window_s));
    }
    ensure_flow(trace, flow)?;
    let until = until.unwrap_or_else(|| trace.last_time());
    let mut bytes: Vec<u64> = vec![0; (until / window_s).ceil().max(1.0) as usize];
    for r in sink_arrivals(trace, flow) {
        let k = (r.t / window_s).floor() as usize;
        if k >= bytes.len() {
            bytes.resize(k + 1, 0);
        }
        bytes[k] += r.size as u64;
    }
    Ok(bytes
        .into_iter()
        .enumerate()
        .map(|(k, b)| (k as f64 * window_s, b as f64 * 8.0 / window_s))
        .collect())
}

/// `(t, cwnd)` samples in trace order.
pub fn cwnd_trace(trace: &TraceLog, flow: u32) -> Vec<(f64, f64)> {
    trace
        .flow(flow)
        .filter(|r| r.kind == TraceKind::Cwnd)
        .map(|r| (r.t, r.aux))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RttStats {
    pub min: f64,
    pub min_pkt: u64,
    pub max: f64,
    pub max_pkt: u64,
    pub avg: f64,
    pub samples: usize,
}

/// RTT statistics over the sender's samples; `None` when there are none.
pub fn rtt_stats(trace: &TraceLog, flow: u32) -> Option<RttStats> {
    let mut stats: Option<RttStats> = None;
    let mut sum = 0.0;
    for r in trace.flow(flow).filter(|r| r.kind == TraceKind::Ack && r.aux > 0.0) {
        sum += r.aux;
        let s = stats.get_or_insert(RttStats {
            min: r.aux,
            min_pkt: r.pkt,
            max: r.aux,
            max_pkt: r.pkt,
            avg: 0.0,
            samples: 0,
        });
        s.samples += 1;
        if r.aux < s.min {
            s.min = r.aux;
            s.min_pkt = r.pkt;
        }
        if r.aux > s.max {
            s.max = r.aux;
            s.max_pkt = r.pkt;
        }
    }
    stats.map(|mut s| {
        s.avg = sum / s.samples as f64;
        s
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DelayStats {
    pub min: f64,
    pub max: f64,
    pub avg: f64,
    pub samples: usize,
}

/// One-way delay from `send` at the source to `recv` at the sink.
pub fn e2e_delay_stats(trace: &TraceLog, flow: u32) -> Option<DelayStats> {
    let src = flow_source(trace, flow).ok()?;
    let mut sent_at: HashMap<u64, f64> = HashMap::new();
    let mut stats: Option<DelayStats> = None;
    let mut sum = 0.0;
    for r in trace.flow(flow) {
        match r.kind {
            TraceKind::Send if r.node == src => {
                sent_at.insert(r.pkt, r.t);
            }
            TraceKind::Recv => {
                let Some(t0) = sent_at.remove(&r.pkt) else {
                    continue;
                };
                let d = r.t - t0;
                sum += d;
                let s = stats.get_or_insert(DelayStats {
                    min: d,
                    max: d,
                    avg: 0.0,
                    samples: 0,
                });
                s.samples += 1;
                s.min = s.min.min(d);
                s.max = s.max.max(d);
            }
            _ => {}
        }
    }
    stats.map(|mut s| {
        s.avg = sum / s.samples as f64;
        s
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PacketCounts {
    pub generated: u64,
    pub received: u64,
    pub avg_size_src: f64,
    pub avg_size_sink: f64,
}

pub fn packet_counts(trace: &TraceLog, flow: u32) -> Result<PacketCounts, MetricsError> {
    let src = flow_source(trace, flow)?;
    let (mut gen, mut gen_bytes, mut rcv, mut rcv_bytes) = (0u64, 0u64, 0u64, 0u64);
    for r in trace.flow(flow) {
        match r.kind {
            TraceKind::Send if r.node == src => {
                gen += 1;
                gen_bytes += r.size as u64;
            }
            TraceKind::Recv => {
                rcv += 1;
                rcv_bytes += r.size as u64;
            }
            _ => {}
        }
    }
    let avg = |b: u64, n: u64| if n == 0 { 0.0 } else { b as f64 / n as f64 };
    Ok(PacketCounts {
        generated: gen,
        received: rcv,
        avg_size_src: avg(gen_bytes, gen),
        avg_size_sink: avg(rcv_bytes, rcv),
    })
}

/// Bytes of distinct sequence ranges delivered at the sink; duplicate
/// deliveries of retransmitted data count once. TCP `seq` is a byte offset,
/// CBR `seq` an emission index; a flow whose sink sends (ACKs) is TCP.
pub fn distinct_bytes_delivered(trace: &TraceLog, flow: u32) -> u64 {
    let mut sinks = sink_arrivals(trace, flow).map(|r| r.node);
    let Some(sink) = sinks.next() else { return 0 };
    let acked = trace.flow(flow).any(|r| r.kind == TraceKind::Send && r.node == sink);
    if !acked {
        let mut seen = std::collections::HashSet::new();
        return sink_arrivals(trace, flow)
            .filter(|r| seen.insert(r.seq))
            .map(|r| r.size as u64)
            .sum();
    }
    let mut ranges: BTreeMap<u64, u64> = BTreeMap::new();
    let mut total = 0u64;
    for r in sink_arrivals(trace, flow) {
        let (mut start, mut end) = (r.seq, r.seq + r.size as u64);
        let overlapping: Vec<(u64, u64)> = ranges
            .range(..=end)
            .rev()
            .take_while(|(_, &e)| e >= start)
            .map(|(&s, &e)| (s, e))
            .collect();
        let mut covered = 0;
        for (s, e) in overlapping {
            covered += e.min(end).saturating_sub(s.max(start));
            start = start.min(s);
            end = end.max(e);
            ranges.remove(&s);
        }
        total += r.size as u64 - covered;
        ranges.insert(start, end);
    }
    total
}

pub fn bytes_delivered(trace: &TraceLog, flow: u32) -> u64 {
    sink_arrivals(trace, flow).map(|r| r.size as u64).sum()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Completion {
    At(f64),
    Incomplete,
}

impl Completion {
    pub fn time(self) -> Option<f64> {
        match self {
            Completion::At(t) => Some(t),
            Completion::Incomplete => None,
        }
    }
}

/// Time the sender saw the ACK covering byte `total_bytes`.
pub fn completion_time(trace: &TraceLog, flow: u32, total_bytes: Option<u64>) -> Result<Completion, MetricsError> {
    let total = total_bytes.ok_or(MetricsError::UnboundedFlow(flow))?;
    ensure_flow(trace, flow)?;
    Ok(trace
        .flow(flow)
        .find(|r| r.kind == TraceKind::Ack && r.seq >= total)
        .map_or(Completion::Incomplete, |r| Completion::At(r.t)))
}

/// Relative time saved by `faster` against `slower`, in percent.
pub fn time_saving_percent(faster: f64, slower: f64) -> f64 {
    (slower - faster) / slower * 100.0
}

/// Packet fates per flow, counted from the trace.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct PacketLedger {
    pub sent: u64,
    pub delivered: u64,
    pub dropped_queue: u64,
    pub dropped_loss: u64,
}

impl PacketLedger {
    /// Packets with no terminal record yet.
    pub fn unresolved(&self) -> u64 {
        self.sent - self.delivered - self.dropped_queue - self.dropped_loss
    }
}

pub fn packet_ledger(trace: &TraceLog, flow: u32) -> PacketLedger {
    let mut l = PacketLedger::default();
    for r in trace.flow(flow) {
        match r.kind {
            TraceKind::Send => l.sent += 1,
            TraceKind::Recv | TraceKind::Ack => l.delivered += 1,
            TraceKind::DropQueue => l.dropped_queue += 1,
            TraceKind::DropLoss => l.dropped_loss += 1,
            _ => {}
        }
    }
    l
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlowSummary {
    pub flow_id: u32,
    pub generated_pkts: u64,
    pub received_pkts: u64,
    pub avg_pkt_size_src: f64,
    pub avg_pkt_size_sink: f64,
    pub rtt: Option<RttStats>,
    pub e2e_delay: Option<DelayStats>,
    pub throughput_bps: f64,
    pub goodput_bps: f64,
    pub completion_time_s: Option<f64>,
    pub retransmissions: u64,
    pub rto_count: u64,
    pub dropped_queue: u64,
    pub dropped_loss: u64,
}

/// Summarizes one flow over `[0, duration_s)`. `total_bytes` is the size of a
/// bounded TCP transfer, `None` otherwise.
pub fn flow_summary(
    trace: &TraceLog,
    flow: u32,
    duration_s: f64,
    total_bytes: Option<u64>,
) -> Result<FlowSummary, MetricsError> {
    let counts = packet_counts(trace, flow)?;
    let ledger = packet_ledger(trace, flow);
    let count = |kind| trace.flow(flow).filter(|r| r.kind == kind).count() as u64;
    let rate = |bytes: u64| {
        if duration_s > 0.0 {
            bytes as f64 * 8.0 / duration_s
        } else {
            0.0
        }
    };
    let completion_time_s = match total_bytes {
        Some(_) => completion_time(trace, flow, total_bytes)?.time(),
        None => None,
    };
    Ok(FlowSummary {
        flow_id: flow,
        generated_pkts: counts.generated,
        received_pkts: counts.received,
        avg_pkt_size_src: counts.avg_size_src,
        avg_pkt_size_sink: counts.avg_size_sink,
        rtt: rtt_stats(trace, flow),
        e2e_delay: e2e_delay_stats(trace, flow),
        throughput_bps: rate(bytes_delivered(trace, flow)),
        goodput_bps: rate(distinct_bytes_delivered(trace, flow)),
        completion_time_s,
        retransmissions: count(TraceKind::Retransmit),
        rto_count: count(TraceKind::RtoFire),
        dropped_queue: ledger.dropped_queue,
        dropped_loss: ledger.dropped_loss,
    })
}

impl FlowSummary {
    /// Flat `key=value` lines, keys prefixed with `flow.<id>.`.
    pub fn write_kv(&self, out: &mut String) {
        let p = format!("flow.{}.", self.flow_id);
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(out, "{p}{k}={v}");
        };
        let opt = |v: Option<f64>| v.map_or_else(|| "none".to_string(), |x| x.to_string());
        kv("generated_pkts", self.generated_pkts.to_string());
        kv("received_pkts", self.received_pkts.to_string());
        kv("avg_pkt_size_src", self.avg_pkt_size_src.to_string());
        kv("avg_pkt_size_sink", self.avg_pkt_size_sink.to_string());
        kv("throughput_bps", self.throughput_bps.to_string());
        kv("goodput_bps", self.goodput_bps.to_string());
        kv("completion_time_s", opt(self.completion_time_s));
        kv("retransmissions", self.retransmissions.to_string());
        kv("rto_count", self.rto_count.to_string());
        kv("dropped_queue", self.dropped_queue.to_string());
        kv("dropped_loss", self.dropped_loss.to_string());
        kv("rtt_min_s", opt(self.rtt.map(|r| r.min)));
        kv("rtt_min_pkt", self.rtt.map_or("none".into(), |r| r.min_pkt.to_string()));
        kv("rtt_max_s", opt(self.rtt.map(|r| r.max)));
        kv("rtt_max_pkt", self.rtt.map_or("none".into(), |r| r.max_pkt.to_string()));
        kv("rtt_avg_s", opt(self.rtt.map(|r| r.avg)));
        kv("e2e_delay_min_s", opt(self.e2e_delay.map(|d| d.min)));
        kv("e2e_delay_max_s", opt(self.e2e_delay.map(|d| d.max)));
        kv("e2e_delay_avg_s", opt(self.e2e_delay.map(|d| d.avg)));
    }
}

pub fn throughput_csv(series: &[(f64, f64)]) -> String {
    let mut out = String::from("window_start_s,throughput_bps\n");
    for (t, bps) in series {
        let _ = writeln!(out, "{t:.6},{bps:.3}");
    }
    out
}

pub fn cwnd_csv(series: &[(f64, f64)]) -> String {
    let mut out = String::from("t_s,cwnd_mss\n");
    for (t, c) in series {
        let _ = writeln!(out, "{t:.6},{c:.6}");
    }
    out
}
