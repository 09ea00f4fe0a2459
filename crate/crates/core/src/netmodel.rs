//! Nodes, directed point-to-point links, DropTail queues, per-link Bernoulli
//! loss and static shortest-path routing.

use std::collections::{BTreeSet, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::engine::{RandomSource, SimTime};
use crate::error::ConfigError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub u32);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "n{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LinkId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PacketKind {
    TcpData,
    TcpAck,
    UdpCbr,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Packet {
    pub pkt_id: u64,
    pub flow_id: u32,
    pub src: NodeId,
    pub dst: NodeId,
    pub size_bytes: u32,
    pub kind: PacketKind,
    /// First byte of the segment for TCP data, the cumulative ack number for
    /// TCP ACKs, the emission index for CBR.
    pub seq_no: u64,
    pub created_at: SimTime,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EnqueueOutcome {
    /// `start_now` is set when the transmitter was idle and the caller must
    /// begin serializing the head packet immediately.
    Accepted {
        start_now: bool,
    },
    DroppedQueue,
}

/// Bounded FIFO. Capacity counts waiting packets; the packet being
/// serialized is held by the link, not the queue.
#[derive(Debug, Clone)]
pub struct DropTailQueue {
    capacity_pkts: usize,
    buffer: VecDeque<Packet>,
}

impl DropTailQueue {
    pub fn new(capacity_pkts: usize) -> Self {
        assert!(capacity_pkts > 0, "queue capacity must be positive");
        Self {
            capacity_pkts,
            buffer: VecDeque::with_capacity(capacity_pkts),
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity_pkts
    }

    pub fn len(&self) -> usize {
        self.buffer.len()
    }

    pub fn is_empty(&self) -> bool {
        self.buffer.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.buffer.len() >= self.capacity_pkts
    }

    /// Hands the packet back when the queue is full.
    pub fn push(&mut self, pkt: Packet) -> Result<(), Packet> {
        if self.is_full() {
            return Err(pkt);
        }
        self.buffer.push_back(pkt);
        Ok(())
    }

    pub fn pop(&mut self) -> Option<Packet> {
        self.buffer.pop_front()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Packet> {
        self.buffer.iter()
    }
}

/// Result of serializing one packet onto a link.
#[derive(Debug, Clone, PartialEq)]
pub enum TxOutcome {
    Delivered { to: NodeId, arrive_at: SimTime },
    Lost,
}

/// Unidirectional link. A duplex link is two `Link`s with identical
/// parameters.
#[derive(Debug, Clone)]
pub struct Link {
    pub from: NodeId,
    pub to: NodeId,
    pub bandwidth_bps: f64,
    pub prop_delay_s: f64,
    pub loss_rate: f64,
    queue: DropTailQueue,
    busy: bool,
    // (flow, seq) of TCP data segments whose first crossing is dropped
    scripted: BTreeSet<(u32, u64)>,
}

impl Link {
    pub fn new(
        from: NodeId,
        to: NodeId,
        bandwidth_bps: f64,
        prop_delay_s: f64,
        loss_rate: f64,
        queue_capacity: usize,
    ) -> Self {
        assert!(bandwidth_bps > 0.0 && bandwidth_bps.is_finite());
        assert!(prop_delay_s > 0.0 && prop_delay_s.is_finite());
        assert!((0.0..=1.0).contains(&loss_rate));
        Self {
            from,
            to,
            bandwidth_bps,
            prop_delay_s,
            loss_rate,
            queue: DropTailQueue::new(queue_capacity),
            busy: false,
            scripted: BTreeSet::new(),
        }
    }

    pub fn queue(&self) -> &DropTailQueue {
        &self.queue
    }

    pub fn is_busy(&self) -> bool {
        self.busy
    }

    pub fn serialization_s(&self, size_bytes: u32) -> f64 {
        size_bytes as f64 * 8.0 / self.bandwidth_bps
    }

    /// Drop the first crossing of the TCP data segment starting at `seq`.
    pub fn script_drop(&mut self, flow_id: u32, seq: u64) {
        self.scripted.insert((flow_id, seq));
    }

    pub fn enqueue(&mut self, pkt: Packet) -> EnqueueOutcome {
        let start_now = !self.busy && self.queue.is_empty();
        match self.queue.push(pkt) {
            Ok(()) => EnqueueOutcome::Accepted { start_now },
            Err(_) => EnqueueOutcome::DroppedQueue,
        }
    }

    /// Takes the head packet into service; returns it with the time its last
    /// bit leaves the transmitter.
    pub fn start_transmission(&mut self, now: SimTime) -> Option<(Packet, SimTime)> {
        if self.busy {
            return None;
        }
        let pkt = self.queue.pop()?;
        self.busy = true;
        let done = now + self.serialization_s(pkt.size_bytes);
        Some((pkt, done))
    }

    /// Ends serialization of `pkt` and decides its fate. The uniform draw is
    /// taken only on links with a non-zero loss rate.
    pub fn finish_transmission(&mut self, pkt: &Packet, now: SimTime, rng: &mut RandomSource) -> TxOutcome {
        self.busy = false;
        if pkt.kind == PacketKind::TcpData && self.scripted.remove(&(pkt.flow_id, pkt.seq_no)) {
            return TxOutcome::Lost;
        }
        if self.loss_rate > 0.0 && rng.next_uniform() < self.loss_rate {
            return TxOutcome::Lost;
        }
        TxOutcome::Delivered {
            to: self.to,
            arrive_at: now + self.prop_delay_s,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Route {
    Local,
    Via(LinkId),
}

/// Next-hop table, `next_hop[node][dst]`.
#[derive(Debug, Clone)]
pub struct RoutingTable {
    next_hop: Vec<Vec<Option<LinkId>>>,
}

impl RoutingTable {
    /// Breadth-first shortest paths over the directed links. Ties go to the
    /// lower link index, so the table is a pure function of the link list.
    pub fn shortest_paths(node_count: usize, links: &[Link]) -> Self {
        let mut next_hop = vec![vec![None; node_count]; node_count];
        let mut out: Vec<Vec<usize>> = vec![Vec::new(); node_count];
        for (i, l) in links.iter().enumerate() {
            out[l.from.0 as usize].push(i);
        }
        for src in 0..node_count {
            let mut seen = vec![false; node_count];
            seen[src] = true;
            let mut frontier = VecDeque::new();
            for &li in &out[src] {
                let to = links[li].to.0 as usize;
                if !seen[to] {
                    seen[to] = true;
                    next_hop[src][to] = Some(LinkId(li));
                    frontier.push_back((to, li));
                }
            }
            while let Some((node, first)) = frontier.pop_front() {
                for &li in &out[node] {
                    let to = links[li].to.0 as usize;
                    if !seen[to] {
                        seen[to] = true;
                        next_hop[src][to] = Some(LinkId(first));
                        frontier.push_back((to, first));
                    }
                }
            }
        }
        Self { next_hop }
    }

    pub fn route(&self, node: NodeId, dst: NodeId) -> Option<Route> {
        if node == dst {
            return Some(Route::Local);
        }
        self.next_hop.get(node.0 as usize)?.get(dst.0 as usize)?.map(Route::Via)
    }
}

#[derive(Debug, Clone)]
pub struct Network {
    node_count: usize,
    links: Vec<Link>,
    routes: RoutingTable,
}

impl Network {
    pub fn new(node_count: usize, links: Vec<Link>) -> Result<Self, ConfigError> {
        for (i, l) in links.iter().enumerate() {
            for end in [l.from, l.to] {
                if end.0 as usize >= node_count {
                    return Err(ConfigError::new(
                        format!("links[{i}]"),
                        format!("node {end} does not exist ({node_count} nodes)"),
                    ));
                }
            }
            if l.from == l.to {
                return Err(ConfigError::new(format!("links[{i}]"), "self-loop link"));
            }
        }
        let routes = RoutingTable::shortest_paths(node_count, &links);
        Ok(Self {
            node_count,
            links,
            routes,
        })
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn links(&self) -> &[Link] {
        &self.links
    }

    pub fn link(&self, id: LinkId) -> &Link {
        &self.links[id.0]
    }

    pub fn link_mut(&mut self, id: LinkId) -> &mut Link {
        &mut self.links[id.0]
    }

    pub fn find_link(&self, from: NodeId, to: NodeId) -> Option<LinkId> {
        self.links.iter().position(|l| l.from == from && l.to == to).map(LinkId)
    }

    /// Fails when `dst` cannot be reached; callers check every flow's path at
    /// build time so `route` never fails mid-run.
    pub fn require_path(&self, src: NodeId, dst: NodeId, field: &str) -> Result<(), ConfigError> {
        let mut node = src;
        for _ in 0..=self.node_count {
            match self.routes.route(node, dst) {
                Some(Route::Local) => return Ok(()),
                Some(Route::Via(l)) => node = self.links[l.0].to,
                None => break,
            }
        }
        Err(ConfigError::new(field, format!("{dst} is unreachable from {src}")))
    }

    pub fn route(&self, node: NodeId, pkt: &Packet) -> Option<Route> {
        self.routes.route(node, pkt.dst)
    }

    /// Sum of serialization and propagation along the routed path for a
    /// packet of `size_bytes`, ignoring queueing.
    pub fn path_floor_s(&self, src: NodeId, dst: NodeId, size_bytes: u32) -> Option<f64> {
        let mut node = src;
        let mut total = 0.0;
        for _ in 0..=self.node_count {
            match self.routes.route(node, dst)? {
                Route::Local => return Some(total),
                Route::Via(l) => {
                    let link = &self.links[l.0];
                    total += link.serialization_s(size_bytes) + link.prop_delay_s;
                    node = link.to;
                }
            }
        }
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pkt(id: u64, size: u32) -> Packet {
        Packet {
            pkt_id: id,
            flow_id: 1,
            src: NodeId(0),
            dst: NodeId(4),
            size_bytes: size,
            kind: PacketKind::TcpData,
            seq_no: 0,
            created_at: SimTime::ZERO,
        }
    }

    fn link(loss: f64, cap: usize) -> Link {
        Link::new(NodeId(2), NodeId(3), 2e6, 0.010, loss, cap)
    }

    fn dumbbell() -> Network {
        let pairs = [(0, 2), (1, 2), (2, 3), (3, 4), (3, 5)];
        let mut links = Vec::new();
        for (a, b) in pairs {
            links.push(Link::new(NodeId(a), NodeId(b), 2e6, 0.01, 0.0, 50));
            links.push(Link::new(NodeId(b), NodeId(a), 2e6, 0.01, 0.0, 50));
        }
        Network::new(6, links).unwrap()
    }

    #[test]
    fn full_queue_tail_drops() {
        let mut l = link(0.0, 20);
        l.enqueue(pkt(0, 100));
        l.start_transmission(SimTime::ZERO).unwrap();
        for i in 1..=20 {
            assert_eq!(l.enqueue(pkt(i, 100)), EnqueueOutcome::Accepted { start_now: false });
        }
        assert_eq!(l.queue().len(), 20);
        assert_eq!(l.enqueue(pkt(21, 100)), EnqueueOutcome::DroppedQueue);
    }

    #[test]
    fn idle_link_starts_immediately() {
        let mut l = link(0.0, 20);
        assert_eq!(l.enqueue(pkt(1, 100)), EnqueueOutcome::Accepted { start_now: true });
    }

    #[test]
    fn in_service_packet_takes_no_slot() {
        let mut l = link(0.0, 1);
        assert_eq!(l.enqueue(pkt(1, 100)), EnqueueOutcome::Accepted { start_now: true });
        l.start_transmission(SimTime::ZERO).unwrap();
        assert_eq!(l.enqueue(pkt(2, 100)), EnqueueOutcome::Accepted { start_now: false });
        assert_eq!(l.enqueue(pkt(3, 100)), EnqueueOutcome::DroppedQueue);
    }

    #[test]
    fn serialization_and_propagation() {
        let mut l = link(0.0, 5);
        let mut rng = RandomSource::new(1);
        l.enqueue(pkt(1, 1000));
        let (p, done) = l.start_transmission(SimTime::from_secs(1.0)).unwrap();
        assert!((done.secs() - 1.004).abs() < 1e-12);
        match l.finish_transmission(&p, done, &mut rng) {
            TxOutcome::Delivered { to, arrive_at } => {
                assert_eq!(to, NodeId(3));
                assert!((arrive_at.secs() - 1.014).abs() < 1e-12);
            }
            TxOutcome::Lost => panic!("lossless link dropped"),
        }
        assert!(!l.is_busy());
    }

    #[test]
    fn lossless_link_draws_nothing() {
        let mut l = link(0.0, 5);
        let mut rng = RandomSource::new(3);
        let mut untouched = RandomSource::new(3);
        for i in 0..100 {
            l.enqueue(pkt(i, 10));
            let (p, done) = l.start_transmission(SimTime::ZERO).unwrap();
            l.finish_transmission(&p, done, &mut rng);
        }
        assert_eq!(rng.next_uniform(), untouched.next_uniform());
    }

    #[test]
    fn total_loss_drops_everything() {
        let mut l = link(1.0, 5);
        let mut rng = RandomSource::new(3);
        for i in 0..1000 {
            l.enqueue(pkt(i, 10));
            let (p, done) = l.start_transmission(SimTime::ZERO).unwrap();
            assert_eq!(l.finish_transmission(&p, done, &mut rng), TxOutcome::Lost);
        }
    }

    #[test]
    fn ten_percent_loss_calibration() {
        let mut l = link(0.1, 5);
        let mut rng = RandomSource::new(2024);
        let mut lost = 0;
        let n = 100_000;
        for i in 0..n {
            l.enqueue(pkt(i, 10));
            let (p, done) = l.start_transmission(SimTime::ZERO).unwrap();
            if l.finish_transmission(&p, done, &mut rng) == TxOutcome::Lost {
                lost += 1;
            }
        }
        let frac = lost as f64 / n as f64;
        assert!((frac - 0.1).abs() <= 0.005, "drop fraction {frac}");
    }

    #[test]
    fn scripted_drop_hits_first_crossing_only() {
        let mut l = link(0.0, 5);
        let mut rng = RandomSource::new(0);
        l.script_drop(1, 0);
        for expect_lost in [true, false] {
            l.enqueue(pkt(1, 10));
            let (p, done) = l.start_transmission(SimTime::ZERO).unwrap();
            assert_eq!(
                l.finish_transmission(&p, done, &mut rng) == TxOutcome::Lost,
                expect_lost
            );
        }
    }

    #[test]
    fn dumbbell_routes() {
        let net = dumbbell();
        let p = pkt(1, 10);
        let via = |node: u32| match net.route(NodeId(node), &p).unwrap() {
            Route::Via(l) => (net.link(l).from, net.link(l).to),
            Route::Local => (NodeId(node), NodeId(node)),
        };
        assert_eq!(via(0), (NodeId(0), NodeId(2)));
        assert_eq!(via(2), (NodeId(2), NodeId(3)));
        assert_eq!(via(3), (NodeId(3), NodeId(4)));
        assert_eq!(net.route(NodeId(4), &p), Some(Route::Local));
        // reverse path
        assert_eq!(
            net.routes.route(NodeId(4), NodeId(0)),
            Some(Route::Via(net.find_link(NodeId(4), NodeId(3)).unwrap()))
        );
    }

    #[test]
    fn unreachable_destination_is_a_config_error() {
        let links = vec![Link::new(NodeId(0), NodeId(1), 1e6, 0.01, 0.0, 5)];
        let net = Network::new(3, links).unwrap();
        assert!(net.require_path(NodeId(0), NodeId(1), "flows[0]").is_ok());
        let err = net.require_path(NodeId(1), NodeId(0), "flows[0]").unwrap_err();
        assert_eq!(err.field, "flows[0]");
        assert!(net.require_path(NodeId(0), NodeId(2), "flows[1]").is_err());
    }

    #[test]
    fn path_floor_over_three_hops() {
        let net = dumbbell();
        let floor = net.path_floor_s(NodeId(0), NodeId(4), 1000).unwrap();
        assert!((floor - 0.042).abs() < 1e-12);
    }
}
