//! Experiment descriptions and the run orchestrator.
//!
//! A [`ScenarioConfig`] is a complete, serializable description of one run:
//! directed links, FTP/TCP and CBR/UDP flows, duration and seed. The config
//! document is TOML with four sections (`topology`, `links`, `flows`,
//! `experiment`); unknown keys are rejected.
//!
//! ```toml
//! [topology]
//! nodes = 6
//!
//! [[links]]
//! from = 2
//! to = 3
//! bandwidth_bps = 2000000.0
//! prop_delay_s = 0.01
//! loss_rate = 0.1
//! queue_capacity = 50
//!
//! [[flows.ftp]]
//! id = 1
//! src = 0
//! dst = 4
//! variant = "reno"
//! total_bytes = 100000      # omit for an endless transfer
//!
//! [flows.ftp.tcp]           # optional, see TcpParams
//! awnd_mss = 64
//!
//! [[flows.cbr]]
//! id = 2
//! src = 1
//! dst = 5
//! rate_bps = 500000.0
//! packet_bytes = 210
//!
//! [experiment]
//! duration_s = 141.0
//! seed = 1
//! lossy_link = [2, 3]
//! scripted_losses = [{ flow = 1, segment = 60 }]
//! ```

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::{EventHandle, EventQueue, RandomSource, SimTime};
use crate::error::{ConfigError, ProtocolFault, SimError};
use crate::metrics::{self, FlowSummary, TraceKind, TraceLog, TraceRecord};
use crate::netmodel::{EnqueueOutcome, Link, LinkId, Network, NodeId, Packet, PacketKind, Route, TxOutcome};
use crate::tcp::{SenderAction, TcpParams, TcpReceiver, TcpSender, TcpVariant};
use crate::traffic::{CbrSource, FtpSource};

pub const DEFAULT_QUEUE_CAPACITY: usize = 100;
pub const DEFAULT_DURATION_S: f64 = 141.0;
/// Loss levels of the standard sweep, including the 1 % case.
pub const SWEEP_LOSS_RATES: [f64; 5] = [0.0, 0.01, 0.10, 0.20, 0.30];

fn default_queue_capacity() -> usize {
    DEFAULT_QUEUE_CAPACITY
}

fn default_true() -> bool {
    true
}

fn default_window() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TopologySpec {
    pub nodes: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkSpec {
    pub from: u32,
    pub to: u32,
    pub bandwidth_bps: f64,
    pub prop_delay_s: f64,
    #[serde(default)]
    pub loss_rate: f64,
    #[serde(default = "default_queue_capacity")]
    pub queue_capacity: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FtpFlowSpec {
    pub id: u32,
    pub src: u32,
    pub dst: u32,
    pub variant: TcpVariant,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub total_bytes: Option<u64>,
    #[serde(default)]
    pub tcp: TcpParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CbrFlowSpec {
    pub id: u32,
    pub src: u32,
    pub dst: u32,
    pub rate_bps: f64,
    pub packet_bytes: u32,
    #[serde(default)]
    pub start_s: f64,
    /// Defaults to the experiment duration.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stop_s: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlowsSpec {
    #[serde(default)]
    pub ftp: Vec<FtpFlowSpec>,
    #[serde(default)]
    pub cbr: Vec<CbrFlowSpec>,
}

/// Drops the first crossing of data segment `segment` (0-based, in MSS
/// units) of `flow` on the experiment's lossy link.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScriptedLoss {
    pub flow: u32,
    pub segment: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub duration_s: f64,
    pub seed: u64,
    /// The directed link whose loss rate sweeps vary and on which scripted
    /// losses happen.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lossy_link: Option<[u32; 2]>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub scripted_losses: Vec<ScriptedLoss>,
    /// End the run once every bounded FTP transfer is acknowledged.
    #[serde(default = "default_true")]
    pub stop_on_completion: bool,
    #[serde(default = "default_window")]
    pub throughput_window_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub topology: TopologySpec,
    pub links: Vec<LinkSpec>,
    #[serde(default)]
    pub flows: FlowsSpec,
    pub experiment: ExperimentSpec,
}

fn check(cond: bool, field: impl Into<String>, message: impl Into<String>) -> Result<(), ConfigError> {
    if cond {
        Ok(())
    } else {
        Err(ConfigError::new(field, message))
    }
}

fn check_tcp(p: &TcpParams, at: &str) -> Result<(), ConfigError> {
    let f = |name: &str| format!("{at}.tcp.{name}");
    check(p.mss_bytes > 0, f("mss_bytes"), "must be positive")?;
    check(p.ack_bytes > 0, f("ack_bytes"), "must be positive")?;
    check(p.awnd_mss >= 1, f("awnd_mss"), "must be at least 1")?;
    check(
        p.init_cwnd_mss >= 1.0 && p.init_cwnd_mss.is_finite(),
        f("init_cwnd_mss"),
        "must be at least 1",
    )?;
    check(
        p.init_ssthresh_mss >= 2.0 && p.init_ssthresh_mss.is_finite(),
        f("init_ssthresh_mss"),
        "must be at least 2",
    )?;
    check(p.dup_ack_threshold >= 1, f("dup_ack_threshold"), "must be at least 1")?;
    check(
        p.rto_min_s > 0.0 && p.rto_min_s.is_finite(),
        f("rto_min_s"),
        "must be positive",
    )?;
    check(
        p.rto_max_s >= p.rto_min_s && p.rto_max_s.is_finite(),
        f("rto_max_s"),
        "must be >= rto_min_s",
    )?;
    check(
        p.rto_initial_s > 0.0 && p.rto_initial_s.is_finite(),
        f("rto_initial_s"),
        "must be positive",
    )?;
    check(p.max_backoff >= 1, f("max_backoff"), "must be at least 1")
}

impl ScenarioConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        let cfg: ScenarioConfig = toml::from_str(text).map_err(|e| {
            let field = e
                .span()
                .map(|s| {
                    let before = &text[..s.start];
                    format!("line {}", before.matches('\n').count() + 1)
                })
                .unwrap_or_else(|| "document".to_string());
            ConfigError::new(field, e.message().to_string())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config is always representable as TOML")
    }

    pub fn ftp_flow(&self, id: u32) -> Option<&FtpFlowSpec> {
        self.flows.ftp.iter().find(|f| f.id == id)
    }

    pub fn find_link(&self, from: u32, to: u32) -> Option<usize> {
        self.links.iter().position(|l| l.from == from && l.to == to)
    }

    pub fn lossy_link_index(&self) -> Option<usize> {
        let [a, b] = self.experiment.lossy_link?;
        self.find_link(a, b)
    }

    /// Sets the loss rate of the experiment's lossy link.
    pub fn set_loss_rate(&mut self, loss_rate: f64) -> Result<(), ConfigError> {
        let idx = self
            .lossy_link_index()
            .ok_or_else(|| ConfigError::new("experiment.lossy_link", "a lossy link is required to set a loss rate"))?;
        check(
            (0.0..=1.0).contains(&loss_rate),
            "experiment.loss_rate",
            format!("{loss_rate} is outside [0, 1]"),
        )?;
        self.links[idx].loss_rate = loss_rate;
        Ok(())
    }

    pub fn set_variant(&mut self, variant: TcpVariant) {
        for f in &mut self.flows.ftp {
            f.variant = variant;
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let nodes = self.topology.nodes;
        check(nodes >= 2, "topology.nodes", "at least two nodes are required")?;
        let mut seen = HashSet::new();
        for (i, l) in self.links.iter().enumerate() {
            let f = |name: &str| format!("links[{i}].{name}");
            check(l.from < nodes, f("from"), format!("node {} does not exist", l.from))?;
            check(l.to < nodes, f("to"), format!("node {} does not exist", l.to))?;
            check(l.from != l.to, f("to"), "self-loop")?;
            check(
                l.bandwidth_bps > 0.0 && l.bandwidth_bps.is_finite(),
                f("bandwidth_bps"),
                "must be positive",
            )?;
            check(
                l.prop_delay_s > 0.0 && l.prop_delay_s.is_finite(),
                f("prop_delay_s"),
                "must be positive",
            )?;
            check(
                (0.0..=1.0).contains(&l.loss_rate),
                f("loss_rate"),
                format!("{} is outside [0, 1]", l.loss_rate),
            )?;
            check(l.queue_capacity > 0, f("queue_capacity"), "must be positive")?;
            check(seen.insert((l.from, l.to)), f("to"), "duplicate directed link")?;
        }

        let e = &self.experiment;
        check(
            e.duration_s > 0.0 && e.duration_s.is_finite(),
            "experiment.duration_s",
            "must be positive",
        )?;
        check(
            e.throughput_window_s > 0.0 && e.throughput_window_s.is_finite(),
            "experiment.throughput_window_s",
            "must be positive",
        )?;

        let net = self.build_network()?;
        let mut ids = HashSet::new();
        for (i, f) in self.flows.ftp.iter().enumerate() {
            let at = format!("flows.ftp[{i}]");
            check(
                ids.insert(f.id),
                format!("{at}.id"),
                format!("duplicate flow id {}", f.id),
            )?;
            check(
                f.src < nodes,
                format!("{at}.src"),
                format!("node {} does not exist", f.src),
            )?;
            check(
                f.dst < nodes,
                format!("{at}.dst"),
                format!("node {} does not exist", f.dst),
            )?;
            check(f.src != f.dst, format!("{at}.dst"), "source and destination coincide")?;
            check(
                f.total_bytes != Some(0),
                format!("{at}.total_bytes"),
                "must be positive",
            )?;
            check_tcp(&f.tcp, &at)?;
            net.require_path(NodeId(f.src), NodeId(f.dst), &format!("{at}.dst"))?;
            net.require_path(NodeId(f.dst), NodeId(f.src), &format!("{at}.src"))?;
        }
        for (i, c) in self.flows.cbr.iter().enumerate() {
            let at = format!("flows.cbr[{i}]");
            check(
                ids.insert(c.id),
                format!("{at}.id"),
                format!("duplicate flow id {}", c.id),
            )?;
            check(
                c.src < nodes,
                format!("{at}.src"),
                format!("node {} does not exist", c.src),
            )?;
            check(
                c.dst < nodes,
                format!("{at}.dst"),
                format!("node {} does not exist", c.dst),
            )?;
            check(c.src != c.dst, format!("{at}.dst"), "source and destination coincide")?;
            check(
                c.rate_bps > 0.0 && c.rate_bps.is_finite(),
                format!("{at}.rate_bps"),
                "must be positive",
            )?;
            check(c.packet_bytes > 0, format!("{at}.packet_bytes"), "must be positive")?;
            check(
                c.start_s >= 0.0 && c.start_s.is_finite(),
                format!("{at}.start_s"),
                "must be non-negative",
            )?;
            if let Some(stop) = c.stop_s {
                check(
                    stop > c.start_s && stop.is_finite(),
                    format!("{at}.stop_s"),
                    "must be after start_s",
                )?;
            }
            net.require_path(NodeId(c.src), NodeId(c.dst), &format!("{at}.dst"))?;
        }

        if let Some([a, b]) = e.lossy_link {
            check(
                self.find_link(a, b).is_some(),
                "experiment.lossy_link",
                format!("no link n{a}->n{b}"),
            )?;
        }
        if !e.scripted_losses.is_empty() {
            let idx = self
                .lossy_link_index()
                .ok_or_else(|| ConfigError::new("experiment.lossy_link", "scripted losses need a lossy link"))?;
            check(
                self.links[idx].loss_rate == 0.0,
                "experiment.scripted_losses",
                "scripted losses and a random loss rate cannot share the lossy link",
            )?;
            for (i, s) in e.scripted_losses.iter().enumerate() {
                check(
                    self.ftp_flow(s.flow).is_some(),
                    format!("experiment.scripted_losses[{i}].flow"),
                    format!("no FTP flow with id {}", s.flow),
                )?;
            }
        }
        Ok(())
    }

    fn build_network(&self) -> Result<Network, ConfigError> {
        let links = self
            .links
            .iter()
            .map(|l| {
                Link::new(
                    NodeId(l.from),
                    NodeId(l.to),
                    l.bandwidth_bps,
                    l.prop_delay_s,
                    l.loss_rate,
                    l.queue_capacity,
                )
            })
            .collect();
        Network::new(self.topology.nodes as usize, links)
    }
}

/// Knobs for [`build_paper_topology`]; `None` keeps the default.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PaperOverrides {
    pub seed: Option<u64>,
    pub duration_s: Option<f64>,
    pub queue_capacity: Option<usize>,
    pub access_bandwidth_bps: Option<f64>,
    pub access_delay_s: Option<f64>,
    pub shared_bandwidth_bps: Option<f64>,
    pub shared_delay_s: Option<f64>,
    /// Rate of the CBR flow; `Some(0.0)` removes it.
    pub cbr_rate_bps: Option<f64>,
    pub cbr_packet_bytes: Option<u32>,
    pub ftp_total_bytes: Option<u64>,
    pub tcp: Option<TcpParams>,
    pub scripted_losses: Vec<ScriptedLoss>,
    pub stop_on_completion: Option<bool>,
    pub throughput_window_s: Option<f64>,
}

pub const FTP_FLOW_ID: u32 = 1;
pub const CBR_FLOW_ID: u32 = 2;

/// The six-node dumbbell: sources n0 (FTP) and n1 (CBR) attach to router n2,
/// sinks n4 and n5 to router n3, and n2->n3 is the shared link carrying the
/// noise. Every link is duplex, 2 Mbps / 10 ms by default.
pub fn build_paper_topology(
    loss_rate: f64,
    variant: TcpVariant,
    overrides: &PaperOverrides,
) -> Result<ScenarioConfig, ConfigError> {
    check(
        (0.0..=1.0).contains(&loss_rate),
        "loss_rate",
        format!("{loss_rate} is outside [0, 1]"),
    )?;
    let o = overrides;
    let positive = |v: Option<f64>, name: &str| match v {
        Some(x) if !(x > 0.0 && x.is_finite()) => {
            Err(ConfigError::new(format!("overrides.{name}"), "must be positive"))
        }
        _ => Ok(()),
    };
    positive(o.duration_s, "duration_s")?;
    positive(o.access_bandwidth_bps, "access_bandwidth_bps")?;
    positive(o.access_delay_s, "access_delay_s")?;
    positive(o.shared_bandwidth_bps, "shared_bandwidth_bps")?;
    positive(o.shared_delay_s, "shared_delay_s")?;
    positive(o.throughput_window_s, "throughput_window_s")?;
    check(
        o.queue_capacity != Some(0),
        "overrides.queue_capacity",
        "must be positive",
    )?;
    check(
        o.cbr_packet_bytes != Some(0),
        "overrides.cbr_packet_bytes",
        "must be positive",
    )?;
    check(
        o.ftp_total_bytes != Some(0),
        "overrides.ftp_total_bytes",
        "must be positive",
    )?;
    if let Some(r) = o.cbr_rate_bps {
        check(
            r >= 0.0 && r.is_finite(),
            "overrides.cbr_rate_bps",
            "must be non-negative",
        )?;
    }
    if !o.scripted_losses.is_empty() {
        check(
            loss_rate == 0.0,
            "overrides.scripted_losses",
            "scripted losses need a zero random loss rate on the shared link",
        )?;
    }

    let duration_s = o.duration_s.unwrap_or(DEFAULT_DURATION_S);
    let cap = o.queue_capacity.unwrap_or(DEFAULT_QUEUE_CAPACITY);
    let access = (o.access_bandwidth_bps.unwrap_or(2e6), o.access_delay_s.unwrap_or(0.010));
    let shared = (o.shared_bandwidth_bps.unwrap_or(2e6), o.shared_delay_s.unwrap_or(0.010));

    let mut links = Vec::new();
    let mut duplex = |a: u32, b: u32, (bw, delay): (f64, f64), forward_loss: f64| {
        for (from, to, loss) in [(a, b, forward_loss), (b, a, 0.0)] {
            links.push(LinkSpec {
                from,
                to,
                bandwidth_bps: bw,
                prop_delay_s: delay,
                loss_rate: loss,
                queue_capacity: cap,
            });
        }
    };
    duplex(0, 2, access, 0.0);
    duplex(1, 2, access, 0.0);
    duplex(2, 3, shared, loss_rate);
    duplex(3, 4, access, 0.0);
    duplex(3, 5, access, 0.0);

    let mut flows = FlowsSpec {
        ftp: vec![FtpFlowSpec {
            id: FTP_FLOW_ID,
            src: 0,
            dst: 4,
            variant,
            total_bytes: o.ftp_total_bytes,
            tcp: o.tcp.clone().unwrap_or_default(),
        }],
        cbr: Vec::new(),
    };
    let cbr_rate = o.cbr_rate_bps.unwrap_or(0.5e6);
    if cbr_rate > 0.0 {
        flows.cbr.push(CbrFlowSpec {
            id: CBR_FLOW_ID,
            src: 1,
            dst: 5,
            rate_bps: cbr_rate,
            packet_bytes: o.cbr_packet_bytes.unwrap_or(210),
            start_s: 0.0,
            stop_s: None,
        });
    }

    let cfg = ScenarioConfig {
        topology: TopologySpec { nodes: 6 },
        links,
        flows,
        experiment: ExperimentSpec {
            duration_s,
            seed: o.seed.unwrap_or(1),
            lossy_link: Some([2, 3]),
            scripted_losses: o.scripted_losses.clone(),
            stop_on_completion: o.stop_on_completion.unwrap_or(true),
            throughput_window_s: o.throughput_window_s.unwrap_or(1.0),
        },
    };
    cfg.validate()?;
    Ok(cfg)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub trace: TraceLog,
    /// One entry per flow, in flow-id order.
    pub summaries: Vec<FlowSummary>,
    pub config_echo: ScenarioConfig,
    pub seed: u64,
    pub end_time_s: f64,
    /// Packets still queued, in service or propagating when the run ended,
    /// counted from network state.
    pub in_flight_at_end: BTreeMap<u32, u64>,
}

impl RunResult {
    pub fn summary(&self, flow: u32) -> Option<&FlowSummary> {
        self.summaries.iter().find(|s| s.flow_id == flow)
    }

    /// Flat `key=value` document describing the run.
    pub fn summary_text(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("seed={}\n", self.seed));
        out.push_str(&format!("end_time_s={}\n", self.end_time_s));
        out.push_str(&format!("trace_records={}\n", self.trace.len()));
        for s in &self.summaries {
            s.write_kv(&mut out);
        }
        out
    }
}

/// A failed run with the trace recorded up to the fault.
#[derive(Debug, Error)]
#[error("{error}")]
pub struct RunFailure {
    #[source]
    pub error: SimError,
    pub trace: TraceLog,
}

impl From<ConfigError> for RunFailure {
    fn from(e: ConfigError) -> Self {
        RunFailure {
            error: e.into(),
            trace: TraceLog::new(),
        }
    }
}

#[derive(Debug)]
enum Event {
    TxDone { link: LinkId, pkt: Packet },
    Arrive { node: NodeId, pkt: Packet },
    Rto { flow: usize },
    CbrEmit { flow: usize },
    FtpStart { flow: usize },
}

struct TcpFlow {
    sender: TcpSender,
    receiver: TcpReceiver,
    src: NodeId,
    dst: NodeId,
    timer: Option<EventHandle>,
    last_window: f64,
}

struct CbrFlow {
    source: CbrSource,
    src: NodeId,
    dst: NodeId,
}

struct World {
    net: Network,
    rng: RandomSource,
    trace: TraceLog,
    next_pkt_id: u64,
    tcp: Vec<TcpFlow>,
    tcp_by_id: HashMap<u32, usize>,
    cbr: Vec<CbrFlow>,
    unfinished_bounded: usize,
    stop_on_completion: bool,
}

impl World {
    fn record(&mut self, now: SimTime, kind: TraceKind, node: NodeId, pkt: &Packet, aux: f64) {
        self.trace.push(TraceRecord::new(
            now.secs(),
            kind,
            node.0,
            pkt.flow_id,
            pkt.pkt_id,
            pkt.size_bytes,
            pkt.seq_no,
            aux,
        ));
    }

    #[allow(clippy::too_many_arguments)]
    fn new_packet(
        &mut self,
        flow_id: u32,
        src: NodeId,
        dst: NodeId,
        kind: PacketKind,
        size: u32,
        seq: u64,
        now: SimTime,
    ) -> Packet {
        self.next_pkt_id += 1;
        Packet {
            pkt_id: self.next_pkt_id,
            flow_id,
            src,
            dst,
            size_bytes: size,
            kind,
            seq_no: seq,
            created_at: now,
        }
    }

    fn schedule(q: &mut EventQueue<Event>, at: SimTime, ev: Event) -> EventHandle {
        q.schedule(at, ev).expect("events are never scheduled before the clock")
    }

    fn originate(&mut self, q: &mut EventQueue<Event>, pkt: Packet, retransmission: bool) {
        let now = q.now();
        self.record(now, TraceKind::Send, pkt.src, &pkt, 0.0);
        if retransmission {
            self.record(now, TraceKind::Retransmit, pkt.src, &pkt, 0.0);
        }
        let node = pkt.src;
        self.forward(q, node, pkt);
    }

    fn forward(&mut self, q: &mut EventQueue<Event>, node: NodeId, pkt: Packet) {
        let now = q.now();
        let link = match self.net.route(node, &pkt) {
            Some(Route::Via(l)) => l,
            Some(Route::Local) => return self.deliver(q, node, pkt),
            // paths are checked when the config is validated
            None => unreachable!("no route from {node} to {}", pkt.dst),
        };
        let from = self.net.link(link).from;
        match self.net.link_mut(link).enqueue(pkt.clone()) {
            EnqueueOutcome::Accepted { start_now } => {
                self.record(now, TraceKind::Enq, from, &pkt, 0.0);
                if start_now {
                    self.start_tx(q, link);
                }
            }
            EnqueueOutcome::DroppedQueue => self.record(now, TraceKind::DropQueue, from, &pkt, 0.0),
        }
    }

    fn start_tx(&mut self, q: &mut EventQueue<Event>, link: LinkId) {
        let now = q.now();
        if let Some((pkt, done)) = self.net.link_mut(link).start_transmission(now) {
            let from = self.net.link(link).from;
            self.record(now, TraceKind::Deq, from, &pkt, 0.0);
            Self::schedule(q, done, Event::TxDone { link, pkt });
        }
    }

    fn deliver(&mut self, q: &mut EventQueue<Event>, node: NodeId, pkt: Packet) {
        let now = q.now();
        match pkt.kind {
            PacketKind::UdpCbr => self.record(now, TraceKind::Recv, node, &pkt, 0.0),
            PacketKind::TcpData => {
                self.record(now, TraceKind::Recv, node, &pkt, 0.0);
                let idx = self.tcp_by_id[&pkt.flow_id];
                let ack_no = self.tcp[idx].receiver.on_segment(pkt.seq_no, pkt.size_bytes);
                let ack_bytes = self.tcp[idx].sender.params().ack_bytes;
                let ack = self.new_packet(pkt.flow_id, node, pkt.src, PacketKind::TcpAck, ack_bytes, ack_no, now);
                self.originate(q, ack, false);
            }
            PacketKind::TcpAck => unreachable!("ACKs are delivered through on_ack"),
        }
    }

    fn on_ack_arrival(&mut self, q: &mut EventQueue<Event>, node: NodeId, pkt: Packet) -> Result<(), ProtocolFault> {
        let now = q.now();
        let idx = self.tcp_by_id[&pkt.flow_id];
        let result = self.tcp[idx].sender.on_ack(pkt.seq_no, now);
        let sample = self.tcp[idx].sender.last_rtt_sample().unwrap_or(0.0);
        self.record(now, TraceKind::Ack, node, &pkt, sample);
        let actions = result?;
        self.apply(q, idx, actions);
        Ok(())
    }

    fn apply(&mut self, q: &mut EventQueue<Event>, idx: usize, actions: Vec<SenderAction>) {
        let now = q.now();
        // the sender has already updated its window; log it ahead of the sends it allows
        self.record_window(now, idx, false);
        for action in actions {
            match action {
                SenderAction::Transmit(seg) => {
                    let (flow_id, src, dst) = {
                        let f = &self.tcp[idx];
                        (f.sender.flow_id(), f.src, f.dst)
                    };
                    let pkt = self.new_packet(flow_id, src, dst, PacketKind::TcpData, seg.len, seg.seq, now);
                    self.originate(q, pkt, seg.retransmission);
                }
                SenderAction::ArmTimer { at } => {
                    if let Some(h) = self.tcp[idx].timer.take() {
                        q.cancel(h);
                    }
                    self.tcp[idx].timer = Some(Self::schedule(q, at, Event::Rto { flow: idx }));
                }
                SenderAction::CancelTimer => {
                    if let Some(h) = self.tcp[idx].timer.take() {
                        q.cancel(h);
                    }
                }
                SenderAction::Completed => {
                    self.unfinished_bounded -= 1;
                    if self.unfinished_bounded == 0 && self.stop_on_completion {
                        q.halt();
                    }
                }
            }
        }
    }

    fn record_window(&mut self, now: SimTime, idx: usize, force: bool) {
        let f = &mut self.tcp[idx];
        let w = metrics::quantize(f.sender.effective_window());
        if force || w != f.last_window {
            f.last_window = w;
            let rec = TraceRecord::new(
                now.secs(),
                TraceKind::Cwnd,
                f.src.0,
                f.sender.flow_id(),
                0,
                0,
                f.sender.snd_una(),
                w,
            );
            self.trace.push(rec);
        }
    }

    fn handle(&mut self, q: &mut EventQueue<Event>, ev: Event) -> Result<(), ProtocolFault> {
        let now = q.now();
        match ev {
            Event::TxDone { link, pkt } => {
                let outcome = self.net.link_mut(link).finish_transmission(&pkt, now, &mut self.rng);
                match outcome {
                    TxOutcome::Lost => {
                        let from = self.net.link(link).from;
                        self.record(now, TraceKind::DropLoss, from, &pkt, 0.0);
                    }
                    TxOutcome::Delivered { to, arrive_at } => {
                        Self::schedule(q, arrive_at, Event::Arrive { node: to, pkt });
                    }
                }
                self.start_tx(q, link);
            }
            Event::Arrive { node, pkt } => {
                if node != pkt.dst {
                    self.forward(q, node, pkt);
                } else if pkt.kind == PacketKind::TcpAck {
                    self.on_ack_arrival(q, node, pkt)?;
                } else {
                    self.deliver(q, node, pkt);
                }
            }
            Event::Rto { flow } => {
                self.tcp[flow].timer = None;
                let f = &self.tcp[flow];
                let rec = TraceRecord::new(
                    now.secs(),
                    TraceKind::RtoFire,
                    f.src.0,
                    f.sender.flow_id(),
                    0,
                    0,
                    f.sender.snd_una(),
                    0.0,
                );
                self.trace.push(rec);
                let actions = self.tcp[flow].sender.on_timeout(now);
                self.apply(q, flow, actions);
            }
            Event::CbrEmit { flow } => {
                let (src, dst) = (self.cbr[flow].src, self.cbr[flow].dst);
                if let Some((index, next)) = self.cbr[flow].source.emit(now) {
                    let c = &self.cbr[flow].source;
                    let (id, size) = (c.flow_id, c.packet_bytes);
                    let pkt = self.new_packet(id, src, dst, PacketKind::UdpCbr, size, index, now);
                    self.originate(q, pkt, false);
                    if let Some(at) = next {
                        Self::schedule(q, at, Event::CbrEmit { flow });
                    }
                }
            }
            Event::FtpStart { flow } => {
                self.record_window(now, flow, true);
                let actions = self.tcp[flow].sender.try_send(now);
                self.apply(q, flow, actions);
            }
        }
        Ok(())
    }

    fn in_flight(&self, q: &EventQueue<Event>) -> BTreeMap<u32, u64> {
        let mut counts: BTreeMap<u32, u64> = BTreeMap::new();
        for link in self.net.links() {
            for p in link.queue().iter() {
                *counts.entry(p.flow_id).or_default() += 1;
            }
        }
        for ev in q.pending() {
            if let Event::TxDone { pkt, .. } | Event::Arrive { pkt, .. } = ev {
                *counts.entry(pkt.flow_id).or_default() += 1;
            }
        }
        counts
    }
}

/// Runs one scenario to its duration (or to completion of every bounded
/// transfer when `stop_on_completion` is set). Identical configs produce
/// identical traces.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<RunResult, RunFailure> {
    cfg.validate()?;
    let mut net = cfg.build_network()?;
    let duration = SimTime::from_secs(cfg.experiment.duration_s);

    if let Some(idx) = cfg.lossy_link_index() {
        for s in &cfg.experiment.scripted_losses {
            let mss = cfg.ftp_flow(s.flow).expect("validated").tcp.mss_bytes as u64;
            net.link_mut(LinkId(idx)).script_drop(s.flow, s.segment * mss);
        }
    }

    let mut q = EventQueue::new();
    let mut tcp = Vec::new();
    let mut tcp_by_id = HashMap::new();
    for (i, f) in cfg.flows.ftp.iter().enumerate() {
        let source = match f.total_bytes {
            Some(n) => FtpSource::bounded(f.id, n),
            None => FtpSource::unbounded(f.id),
        };
        tcp.push(TcpFlow {
            sender: TcpSender::new(f.id, f.variant, f.tcp.clone(), source),
            receiver: TcpReceiver::new(),
            src: NodeId(f.src),
            dst: NodeId(f.dst),
            timer: None,
            last_window: f64::NAN,
        });
        tcp_by_id.insert(f.id, i);
        World::schedule(&mut q, SimTime::ZERO, Event::FtpStart { flow: i });
    }
    let mut cbr = Vec::new();
    for (i, c) in cfg.flows.cbr.iter().enumerate() {
        let stop = c.stop_s.unwrap_or(cfg.experiment.duration_s);
        let source = CbrSource::new(
            c.id,
            c.rate_bps,
            c.packet_bytes,
            SimTime::from_secs(c.start_s),
            SimTime::from_secs(stop),
        );
        if let Some(first) = source.next_emission() {
            World::schedule(&mut q, first, Event::CbrEmit { flow: i });
        }
        cbr.push(CbrFlow {
            source,
            src: NodeId(c.src),
            dst: NodeId(c.dst),
        });
    }

    let unfinished_bounded = cfg.flows.ftp.iter().filter(|f| f.total_bytes.is_some()).count();
    let mut world = World {
        net,
        rng: RandomSource::new(cfg.experiment.seed),
        trace: TraceLog::new(),
        next_pkt_id: 0,
        tcp,
        tcp_by_id,
        cbr,
        unfinished_bounded,
        stop_on_completion: cfg.experiment.stop_on_completion && unfinished_bounded > 0,
    };

    if let Err(e) = q.run_until(duration, |q, ev| world.handle(q, ev)) {
        return Err(RunFailure {
            error: SimError::Protocol {
                at: e.fire_at,
                fault: e.source,
            },
            trace: world.trace,
        });
    }

    // reported at trace resolution so it compares equal to record times
    let end_time_s = metrics::quantize(q.now().secs());
    let in_flight_at_end = world.in_flight(&q);
    let mut ids: Vec<(u32, Option<u64>)> = cfg
        .flows
        .ftp
        .iter()
        .map(|f| (f.id, f.total_bytes))
        .chain(cfg.flows.cbr.iter().map(|c| (c.id, None)))
        .collect();
    ids.sort();
    let mut summaries = Vec::new();
    for (id, total) in ids {
        match metrics::flow_summary(&world.trace, id, end_time_s, total) {
            Ok(s) => summaries.push(s),
            // a flow that never sent (e.g. CBR starting after the end)
            Err(metrics::MetricsError::UnknownFlow(_)) => {}
            Err(e) => unreachable!("summary of a bounded flow: {e}"),
        }
    }

    Ok(RunResult {
        trace: world.trace,
        summaries,
        config_echo: cfg.clone(),
        seed: cfg.experiment.seed,
        end_time_s,
        in_flight_at_end,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct MeanStd {
    pub mean: f64,
    /// Sample standard deviation; 0 for a single value.
    pub std: f64,
    pub n: usize,
}

impl MeanStd {
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let n = values.len();
        let mean = values.iter().sum::<f64>() / n as f64;
        let std = if n > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        } else {
            0.0
        };
        Some(Self { mean, std, n })
    }

    pub fn std_error(&self) -> f64 {
        self.std / (self.n as f64).sqrt()
    }
}

/// Per-run outcome for the sweep's measured flow (the first FTP flow).
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub loss_rate: f64,
    pub variant: TcpVariant,
    pub seed: u64,
    pub summary: FlowSummary,
    pub conservation_ok: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepCell {
    pub loss_rate: f64,
    pub variant: TcpVariant,
    pub runs: usize,
    pub goodput_bps: MeanStd,
    pub throughput_bps: MeanStd,
    /// Over the runs that completed; `None` if none did or the flow is
    /// unbounded.
    pub completion_s: Option<MeanStd>,
    pub retransmissions: MeanStd,
    pub rto_count: MeanStd,
    pub generated_pkts: MeanStd,
    pub received_pkts: MeanStd,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepTable {
    pub rows: Vec<SweepRow>,
    pub cells: Vec<SweepCell>,
}

#[derive(Debug, Error)]
pub enum SweepError {
    #[error("sweep needs at least one {0}")]
    Empty(&'static str),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{} sweep run(s) failed: {}", .0.len(), .0.iter().map(|c| c.to_string()).collect::<Vec<_>>().join("; "))]
    Runs(Vec<CellFailure>),
}

#[derive(Debug, Error)]
#[error("loss={loss_rate} variant={variant} seed={seed}: {error}")]
pub struct CellFailure {
    pub loss_rate: f64,
    pub variant: TcpVariant,
    pub seed: u64,
    #[source]
    pub error: SimError,
}

impl fmt::Display for SweepRow {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = &self.summary;
        write!(
            f,
            "{},{},{},{:.3},{:.3},{},{},{}",
            self.loss_rate,
            self.variant,
            self.seed,
            s.goodput_bps,
            s.throughput_bps,
            s.completion_time_s.map_or(String::new(), |c| format!("{c:.6}")),
            s.retransmissions,
            s.rto_count
        )
    }
}

/// Every combination of loss rate, variant and seed, run independently
/// (in parallel where cores allow) and aggregated per (loss, variant).
pub fn run_sweep(
    base: &ScenarioConfig,
    loss_rates: &[f64],
    variants: &[TcpVariant],
    seeds: &[u64],
) -> Result<SweepTable, SweepError> {
    if loss_rates.is_empty() {
        return Err(SweepError::Empty("loss rate"));
    }
    if variants.is_empty() {
        return Err(SweepError::Empty("variant"));
    }
    if seeds.is_empty() {
        return Err(SweepError::Empty("seed"));
    }
    let flow = base
        .flows
        .ftp
        .first()
        .ok_or_else(|| ConfigError::new("flows.ftp", "a sweep measures the first FTP flow; none defined"))?
        .id;

    let mut jobs = Vec::new();
    for &loss in loss_rates {
        for &variant in variants {
            for &seed in seeds {
                let mut cfg = base.clone();
                cfg.set_loss_rate(loss)?;
                cfg.set_variant(variant);
                cfg.experiment.seed = seed;
                cfg.validate()?;
                jobs.push((loss, variant, seed, cfg));
            }
        }
    }

    let results: Vec<Result<SweepRow, CellFailure>> = jobs
        .into_par_iter()
        .map(|(loss_rate, variant, seed, cfg)| {
            let run = run_scenario(&cfg).map_err(|f| CellFailure {
                loss_rate,
                variant,
                seed,
                error: f.error,
            })?;
            let conservation_ok = conservation_holds(&run);
            let summary = run.summary(flow).cloned().expect("ftp flow always sends");
            Ok(SweepRow {
                loss_rate,
                variant,
                seed,
                summary,
                conservation_ok,
            })
        })
        .collect();
    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for r in results {
        match r {
            Ok(row) => rows.push(row),
            Err(f) => failures.push(f),
        }
    }
    if !failures.is_empty() {
        return Err(SweepError::Runs(failures));
    }

    let mut cells = Vec::new();
    for &loss_rate in loss_rates {
        for &variant in variants {
            let mut group: Vec<&SweepRow> = rows
                .iter()
                .filter(|r| r.loss_rate == loss_rate && r.variant == variant)
                .collect();
            // fixed summation order: aggregates must not depend on the seed list order
            group.sort_by_key(|r| r.seed);
            let col = |f: &dyn Fn(&FlowSummary) -> f64| {
                MeanStd::of(&group.iter().map(|r| f(&r.summary)).collect::<Vec<_>>()).expect("non-empty")
            };
            let completions: Vec<f64> = group.iter().filter_map(|r| r.summary.completion_time_s).collect();
            cells.push(SweepCell {
                loss_rate,
                variant,
                runs: group.len(),
                goodput_bps: col(&|s| s.goodput_bps),
                throughput_bps: col(&|s| s.throughput_bps),
                completion_s: MeanStd::of(&completions),
                retransmissions: col(&|s| s.retransmissions as f64),
                rto_count: col(&|s| s.rto_count as f64),
                generated_pkts: col(&|s| s.generated_pkts as f64),
                received_pkts: col(&|s| s.received_pkts as f64),
            });
        }
    }
    Ok(SweepTable { rows, cells })
}

impl SweepTable {
    pub fn cell(&self, loss_rate: f64, variant: TcpVariant) -> Option<&SweepCell> {
        self.cells
            .iter()
            .find(|c| c.loss_rate == loss_rate && c.variant == variant)
    }

    pub fn rows_csv(&self) -> String {
        let mut out =
            String::from("loss_rate,variant,seed,goodput_bps,throughput_bps,completion_s,retransmissions,rto_count\n");
        for r in &self.rows {
            out.push_str(&r.to_string());
            out.push('\n');
        }
        out
    }

    pub fn summary_csv(&self) -> String {
        let mut out = String::from(
            "loss_rate,variant,runs,goodput_mean_bps,goodput_std_bps,throughput_mean_bps,throughput_std_bps,\
             completion_mean_s,completion_std_s,retransmissions_mean,retransmissions_std,rto_count_mean,rto_count_std\n",
        );
        for c in &self.cells {
            let (cm, cs) = c.completion_s.map_or((String::new(), String::new()), |m| {
                (format!("{:.6}", m.mean), format!("{:.6}", m.std))
            });
            out.push_str(&format!(
                "{},{},{},{:.3},{:.3},{:.3},{:.3},{},{},{:.3},{:.3},{:.3},{:.3}\n",
                c.loss_rate,
                c.variant,
                c.runs,
                c.goodput_bps.mean,
                c.goodput_bps.std,
                c.throughput_bps.mean,
                c.throughput_bps.std,
                cm,
                cs,
                c.retransmissions.mean,
                c.retransmissions.std,
                c.rto_count.mean,
                c.rto_count.std
            ));
        }
        out
    }
}

/// `sent = delivered + dropped_queue + dropped_loss + in_flight` for every
/// flow, with in-flight counted from the network rather than the trace.
pub fn conservation_holds(run: &RunResult) -> bool {
    let mut flows: Vec<u32> = run.summaries.iter().map(|s| s.flow_id).collect();
    flows.extend(run.in_flight_at_end.keys());
    flows.into_iter().all(|flow| {
        let l = metrics::packet_ledger(&run.trace, flow);
        let in_flight = run.in_flight_at_end.get(&flow).copied().unwrap_or(0);
        l.sent == l.delivered + l.dropped_queue + l.dropped_loss + in_flight
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn paper(loss: f64, variant: TcpVariant) -> ScenarioConfig {
        build_paper_topology(loss, variant, &PaperOverrides::default()).unwrap()
    }

    #[test]
    fn only_the_shared_forward_link_is_lossy() {
        let cfg = paper(0.10, TcpVariant::Tahoe);
        let lossy: Vec<_> = cfg.links.iter().filter(|l| l.loss_rate > 0.0).collect();
        assert_eq!(lossy.len(), 1);
        assert_eq!((lossy[0].from, lossy[0].to), (2, 3));
        assert_eq!(lossy[0].loss_rate, 0.10);
        assert_eq!(cfg.links.len(), 10);
        assert_eq!(cfg.experiment.duration_s, 141.0);
    }

    #[test]
    fn out_of_range_loss_is_rejected() {
        let err = build_paper_topology(1.5, TcpVariant::Tahoe, &PaperOverrides::default()).unwrap_err();
        assert_eq!(err.field, "loss_rate");
    }

    #[test]
    fn bad_override_names_the_field() {
        let o = PaperOverrides {
            queue_capacity: Some(0),
            ..Default::default()
        };
        let err = build_paper_topology(0.0, TcpVariant::Reno, &o).unwrap_err();
        assert_eq!(err.field, "overrides.queue_capacity");
    }

    #[test]
    fn toml_round_trip() {
        let cfg = paper(0.2, TcpVariant::Reno);
        let text = cfg.to_toml_string();
        assert_eq!(ScenarioConfig::from_toml_str(&text).unwrap(), cfg);
    }

    #[test]
    fn unknown_keys_are_errors() {
        let mut text = paper(0.0, TcpVariant::Reno).to_toml_string();
        text = text.replace("[experiment]\n", "[experiment]\nwarp_factor = 9\n");
        let err = ScenarioConfig::from_toml_str(&text).unwrap_err();
        assert!(err.message.contains("warp_factor"), "{err}");
    }

    #[test]
    fn validation_names_fields() {
        let mut cfg = paper(0.0, TcpVariant::Reno);
        cfg.links[3].loss_rate = -0.1;
        assert_eq!(cfg.validate().unwrap_err().field, "links[3].loss_rate");

        let mut cfg = paper(0.0, TcpVariant::Reno);
        cfg.flows.cbr[0].id = 1;
        assert_eq!(cfg.validate().unwrap_err().field, "flows.cbr[0].id");

        let mut cfg = paper(0.0, TcpVariant::Reno);
        cfg.flows.ftp[0].dst = 9;
        assert_eq!(cfg.validate().unwrap_err().field, "flows.ftp[0].dst");

        let mut cfg = paper(0.0, TcpVariant::Reno);
        cfg.experiment.duration_s = 0.0;
        assert_eq!(cfg.validate().unwrap_err().field, "experiment.duration_s");
    }

    #[test]
    fn unreachable_flow_is_rejected_at_build_time() {
        let mut cfg = paper(0.0, TcpVariant::Reno);
        // remove n3 -> n2 so ACKs from n4 have no way back
        cfg.links.retain(|l| !(l.from == 3 && l.to == 2));
        let err = cfg.validate().unwrap_err();
        assert_eq!(err.field, "flows.ftp[0].src");
    }

    #[test]
    fn scripted_losses_conflict_with_random_loss() {
        let mut cfg = paper(0.1, TcpVariant::Reno);
        cfg.experiment
            .scripted_losses
            .push(ScriptedLoss { flow: 1, segment: 3 });
        assert_eq!(cfg.validate().unwrap_err().field, "experiment.scripted_losses");
    }

    #[test]
    fn lossless_run_never_draws_for_fate() {
        let mut a = paper(0.0, TcpVariant::Reno);
        a.experiment.duration_s = 5.0;
        let mut b = a.clone();
        b.experiment.seed = 999;
        let ra = run_scenario(&a).unwrap();
        let rb = run_scenario(&b).unwrap();
        assert_eq!(ra.trace, rb.trace);
    }

    fn single_packet_cfg(bytes: u64) -> ScenarioConfig {
        let o = PaperOverrides {
            cbr_rate_bps: Some(0.0),
            ftp_total_bytes: Some(bytes),
            tcp: Some(TcpParams {
                mss_bytes: 1000,
                ..Default::default()
            }),
            duration_s: Some(10.0),
            ..Default::default()
        };
        build_paper_topology(0.0, TcpVariant::Reno, &o).unwrap()
    }

    #[test]
    fn first_hop_timing() {
        let run = run_scenario(&single_packet_cfg(1000)).unwrap();
        let arrival_at_n2 = run
            .trace
            .records()
            .iter()
            .find(|r| r.kind == TraceKind::Enq && r.node == 2)
            .unwrap();
        assert!((arrival_at_n2.t - 0.014).abs() < 1e-9);
    }

    #[test]
    fn single_segment_e2e_and_completion() {
        let run = run_scenario(&single_packet_cfg(1000)).unwrap();
        let s = run.summary(FTP_FLOW_ID).unwrap();
        let d = s.e2e_delay.unwrap();
        assert_eq!(d.samples, 1);
        assert!((d.avg - 3.0 * (0.004 + 0.010)).abs() < 1e-9);
        // data 3 x (4 ms + 10 ms), 40-byte ack 3 x (0.16 ms + 10 ms)
        let expected = 0.042 + 3.0 * (40.0 * 8.0 / 2e6 + 0.010);
        assert!((s.completion_time_s.unwrap() - expected).abs() < 1e-6);
        assert!((run.end_time_s - expected).abs() < 1e-6);
    }

    #[test]
    fn queued_behind_an_equal_packet() {
        // two back-to-back 1000 B segments: the second waits 4 ms on the first hop
        let mut cfg = single_packet_cfg(2000);
        cfg.flows.ftp[0].tcp.init_cwnd_mss = 2.0;
        let run = run_scenario(&cfg).unwrap();
        let d = run.summary(FTP_FLOW_ID).unwrap().e2e_delay.unwrap();
        assert!((d.min - 0.042).abs() < 1e-9);
        assert!((d.max - 0.046).abs() < 1e-9);
    }

    #[test]
    fn unfinished_transfer_is_incomplete() {
        let mut cfg = single_packet_cfg(1_000_000);
        cfg.experiment.duration_s = 0.5;
        let run = run_scenario(&cfg).unwrap();
        assert_eq!(run.summary(FTP_FLOW_ID).unwrap().completion_time_s, None);
        assert_eq!(run.end_time_s, 0.5);
    }

    #[test]
    fn sweep_counts_and_single_seed_std() {
        let base = build_paper_topology(
            0.0,
            TcpVariant::Tahoe,
            &PaperOverrides {
                duration_s: Some(3.0),
                ..Default::default()
            },
        )
        .unwrap();
        let table = run_sweep(&base, &[0.0, 0.1], &TcpVariant::ALL, &[7]).unwrap();
        assert_eq!(table.rows.len(), 4);
        assert_eq!(table.cells.len(), 4);
        for c in &table.cells {
            assert_eq!(c.runs, 1);
            assert_eq!(c.goodput_bps.std, 0.0);
        }
        assert!(table.rows.iter().all(|r| r.conservation_ok));
        assert_eq!(table.rows_csv().lines().count(), 5);
    }

    #[test]
    fn sweep_rejects_empty_lists() {
        let base = paper(0.0, TcpVariant::Tahoe);
        assert!(matches!(
            run_sweep(&base, &[0.0], &TcpVariant::ALL, &[]),
            Err(SweepError::Empty("seed"))
        ));
        assert!(matches!(
            run_sweep(&base, &[], &TcpVariant::ALL, &[1]),
            Err(SweepError::Empty(_))
        ));
    }

    #[test]
    fn mean_std() {
        let m = MeanStd::of(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(m.mean, 2.5);
        assert!((m.std - 1.2909944487).abs() < 1e-9);
        assert_eq!(MeanStd::of(&[5.0]).unwrap().std, 0.0);
        assert!(MeanStd::of(&[]).is_none());
    }
}
