//! TCP endpoints: cumulative-ACK receiver and a window-based sender that
//! runs either the Tahoe or the Reno congestion-control policy.
//!
//! Windows are kept in MSS units (`cwnd`, `ssthresh`, `awnd`); sequence
//! numbers are byte offsets. Slow start adds one MSS per new ACK and
//! congestion avoidance adds `1/cwnd` per new ACK.
//!
//! Loss reactions:
//!
//! * **Tahoe**: three duplicate ACKs trigger a fast retransmit, `cwnd`
//!   collapses to one segment and the sender goes back to `snd_una`,
//!   slow-starting through the rest of the window. Further duplicates are
//!   ignored until new data is acknowledged.
//! * **Reno**: three duplicate ACKs halve the window and enter fast
//!   recovery. Each further duplicate inflates the usable window by one
//!   segment; an ACK at or beyond the recovery point deflates it back to
//!   `ssthresh`. Partial ACKs leave the sender in recovery with the inflation
//!   cleared, so a second loss in the same window needs three fresh
//!   duplicates (another halving) or a timeout.
//!
//! Both variants go back to `snd_una` with `cwnd = 1` on a retransmission
//! timeout.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::engine::SimTime;
use crate::error::ProtocolFault;
use crate::traffic::{Available, FtpSource};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TcpVariant {
    Tahoe,
    Reno,
}

impl TcpVariant {
    pub const ALL: [TcpVariant; 2] = [TcpVariant::Tahoe, TcpVariant::Reno];

    pub fn as_str(self) -> &'static str {
        match self {
            TcpVariant::Tahoe => "tahoe",
            TcpVariant::Reno => "reno",
        }
    }
}

impl fmt::Display for TcpVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TcpVariant {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "tahoe" => Ok(TcpVariant::Tahoe),
            "reno" => Ok(TcpVariant::Reno),
            other => Err(format!("unknown TCP variant `{other}` (expected tahoe or reno)")),
        }
    }
}

/// Sender parameters. Window sizes are in MSS.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TcpParams {
    pub mss_bytes: u32,
    pub ack_bytes: u32,
    pub awnd_mss: u32,
    pub init_cwnd_mss: f64,
    pub init_ssthresh_mss: f64,
    pub dup_ack_threshold: u32,
    pub rto_initial_s: f64,
    pub rto_min_s: f64,
    pub rto_max_s: f64,
    pub max_backoff: u32,
}

impl Default for TcpParams {
    fn default() -> Self {
        Self {
            mss_bytes: 536,
            ack_bytes: 40,
            awnd_mss: 64,
            init_cwnd_mss: 1.0,
            init_ssthresh_mss: 32.0,
            dup_ack_threshold: 3,
            rto_initial_s: 3.0,
            rto_min_s: 1.0,
            rto_max_s: 64.0,
            max_backoff: 64,
        }
    }
}

/// Jacobson/Karels mean-deviation estimator with clamped RTO.
#[derive(Debug, Clone, PartialEq)]
pub struct RttEstimator {
    srtt: Option<f64>,
    rttvar: f64,
    rto: f64,
    rto_min: f64,
    rto_max: f64,
}

impl RttEstimator {
    pub fn new(initial_rto: f64, rto_min: f64, rto_max: f64) -> Self {
        Self {
            srtt: None,
            rttvar: 0.0,
            rto: initial_rto,
            rto_min,
            rto_max,
        }
    }

    pub fn srtt(&self) -> Option<f64> {
        self.srtt
    }

    pub fn rttvar(&self) -> f64 {
        self.rttvar
    }

    pub fn rto(&self) -> f64 {
        self.rto
    }

    /// Feeds one sample; returns `(srtt, rttvar, rto)`.
    pub fn update(&mut self, sample_s: f64) -> Result<(f64, f64, f64), ProtocolFault> {
        if sample_s <= 0.0 || !sample_s.is_finite() {
            return Err(ProtocolFault::BadRttSample(sample_s));
        }
        let srtt = match self.srtt {
            None => {
                self.rttvar = sample_s / 2.0;
                sample_s
            }
            Some(srtt) => {
                self.rttvar = 0.75 * self.rttvar + 0.25 * (srtt - sample_s).abs();
                0.875 * srtt + 0.125 * sample_s
            }
        };
        self.srtt = Some(srtt);
        self.rto = (srtt + 4.0 * self.rttvar).clamp(self.rto_min, self.rto_max);
        Ok((srtt, self.rttvar, self.rto))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Segment {
    pub seq: u64,
    pub len: u32,
    pub retransmission: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SenderAction {
    Transmit(Segment),
    /// (Re)start the retransmission timer to fire at `at`.
    ArmTimer {
        at: SimTime,
    },
    CancelTimer,
    /// The final byte of a bounded transfer has been acknowledged.
    Completed,
}

#[derive(Debug, Clone, Copy)]
struct SentSegment {
    len: u32,
    sent_at: SimTime,
    retransmitted: bool,
}

#[derive(Debug, Clone)]
pub struct TcpSender {
    flow_id: u32,
    variant: TcpVariant,
    params: TcpParams,
    source: FtpSource,

    cwnd: f64,
    ssthresh: f64,
    dup_acks: u32,
    snd_una: u64,
    snd_nxt: u64,
    snd_max: u64,
    in_fast_recovery: bool,
    recovery_point: u64,
    // duplicates are not counted until new data is acked
    ignore_dups: bool,

    rtt: RttEstimator,
    rto_backoff: u32,
    timer_deadline: Option<SimTime>,
    last_rtt_sample: Option<f64>,
    segments: BTreeMap<u64, SentSegment>,

    segments_sent: u64,
    retransmissions: u64,
    rto_count: u64,
    completed_at: Option<SimTime>,
}

impl TcpSender {
    pub fn new(flow_id: u32, variant: TcpVariant, params: TcpParams, source: FtpSource) -> Self {
        let rtt = RttEstimator::new(params.rto_initial_s, params.rto_min_s, params.rto_max_s);
        Self {
            flow_id,
            variant,
            cwnd: params.init_cwnd_mss.max(1.0),
            ssthresh: params.init_ssthresh_mss,
            params,
            source,
            dup_acks: 0,
            snd_una: 0,
            snd_nxt: 0,
            snd_max: 0,
            in_fast_recovery: false,
            recovery_point: 0,
            ignore_dups: false,
            rtt,
            rto_backoff: 1,
            timer_deadline: None,
            last_rtt_sample: None,
            segments: BTreeMap::new(),
            segments_sent: 0,
            retransmissions: 0,
            rto_count: 0,
            completed_at: None,
        }
    }

    pub fn flow_id(&self) -> u32 {
        self.flow_id
    }
    pub fn variant(&self) -> TcpVariant {
        self.variant
    }
    pub fn params(&self) -> &TcpParams {
        &self.params
    }
    pub fn cwnd(&self) -> f64 {
        self.cwnd
    }
    pub fn ssthresh(&self) -> f64 {
        self.ssthresh
    }
    pub fn dup_acks(&self) -> u32 {
        self.dup_acks
    }
    pub fn snd_una(&self) -> u64 {
        self.snd_una
    }
    pub fn snd_nxt(&self) -> u64 {
        self.snd_nxt
    }
    pub fn snd_max(&self) -> u64 {
        self.snd_max
    }
    pub fn in_fast_recovery(&self) -> bool {
        self.in_fast_recovery
    }
    pub fn rtt(&self) -> &RttEstimator {
        &self.rtt
    }
    pub fn rto_backoff(&self) -> u32 {
        self.rto_backoff
    }
    pub fn timer_deadline(&self) -> Option<SimTime> {
        self.timer_deadline
    }
    pub fn segments_sent(&self) -> u64 {
        self.segments_sent
    }
    pub fn retransmissions(&self) -> u64 {
        self.retransmissions
    }
    pub fn rto_count(&self) -> u64 {
        self.rto_count
    }
    pub fn completed_at(&self) -> Option<SimTime> {
        self.completed_at
    }
    /// RTT sample taken by the most recent ACK, if Karn's rule allowed one.
    pub fn last_rtt_sample(&self) -> Option<f64> {
        self.last_rtt_sample
    }

    fn flight_bytes(&self) -> u64 {
        self.snd_nxt - self.snd_una
    }

    fn flight_mss(&self) -> f64 {
        self.flight_bytes() as f64 / self.params.mss_bytes as f64
    }

    fn inflation(&self) -> u32 {
        if self.variant == TcpVariant::Reno && self.in_fast_recovery && self.dup_acks >= self.params.dup_ack_threshold {
            self.dup_acks
        } else {
            0
        }
    }

    /// `cwnd` plus fast-recovery inflation, in MSS.
    pub fn effective_window(&self) -> f64 {
        self.cwnd + self.inflation() as f64
    }

    /// Bytes that may still be put in flight:
    /// `min(awnd, cwnd + ndup) * mss - (snd_nxt - snd_una)`, floored at zero.
    pub fn usable_window(&self) -> u64 {
        let window_mss = (self.params.awnd_mss as f64).min(self.effective_window());
        let window = (window_mss * self.params.mss_bytes as f64).floor() as u64;
        window.saturating_sub(self.flight_bytes())
    }

    fn current_rto(&self) -> f64 {
        (self.rtt.rto() * self.rto_backoff as f64).min(self.params.rto_max_s)
    }

    fn arm_timer(&mut self, now: SimTime, actions: &mut Vec<SenderAction>) {
        let at = now + self.current_rto();
        self.timer_deadline = Some(at);
        actions.push(SenderAction::ArmTimer { at });
    }

    fn halve_ssthresh(&mut self) {
        self.ssthresh = (self.flight_mss() / 2.0).max(2.0);
    }

    /// Dispatches an arriving cumulative ACK.
    pub fn on_ack(&mut self, ack_no: u64, now: SimTime) -> Result<Vec<SenderAction>, ProtocolFault> {
        self.last_rtt_sample = None;
        if ack_no > self.snd_max {
            return Err(ProtocolFault::AckBeyondSent {
                flow: self.flow_id,
                ack_no,
                snd_max: self.snd_max,
            });
        }
        if ack_no > self.snd_una {
            self.on_new_ack(ack_no, now)
        } else if ack_no == self.snd_una && self.snd_max > self.snd_una {
            Ok(self.on_dup_ack(now))
        } else {
            Ok(Vec::new())
        }
    }

    pub fn on_new_ack(&mut self, ack_no: u64, now: SimTime) -> Result<Vec<SenderAction>, ProtocolFault> {
        debug_assert!(ack_no > self.snd_una);
        if ack_no > self.snd_max {
            return Err(ProtocolFault::AckBeyondSent {
                flow: self.flow_id,
                ack_no,
                snd_max: self.snd_max,
            });
        }
        let mut actions = Vec::new();

        // Karn: sample only when nothing in the acked range was resent
        let acked: Vec<u64> = self.segments.range(..ack_no).map(|(&s, _)| s).collect();
        let clean = acked.iter().all(|s| !self.segments[s].retransmitted);
        if clean {
            if let Some(&newest) = acked.last() {
                let sample = now - self.segments[&newest].sent_at;
                self.rtt.update(sample)?;
                self.last_rtt_sample = Some(sample);
            }
        }
        for s in acked {
            self.segments.remove(&s);
        }

        self.snd_una = ack_no;
        if self.snd_nxt < ack_no {
            // the receiver already held data we were about to resend
            self.snd_nxt = ack_no;
        }
        self.dup_acks = 0;
        self.ignore_dups = false;
        self.rto_backoff = 1;

        if self.in_fast_recovery && ack_no >= self.recovery_point {
            self.in_fast_recovery = false;
            self.cwnd = self.ssthresh;
        } else if self.cwnd < self.ssthresh {
            self.cwnd += 1.0;
        } else {
            self.cwnd += 1.0 / self.cwnd;
        }

        if self.source.is_complete(ack_no) && self.completed_at.is_none() {
            self.completed_at = Some(now);
            actions.push(SenderAction::Completed);
        }

        if self.snd_max > self.snd_una {
            self.arm_timer(now, &mut actions);
        } else if self.timer_deadline.take().is_some() {
            actions.push(SenderAction::CancelTimer);
        }

        actions.extend(self.try_send(now));
        Ok(actions)
    }

    pub fn on_dup_ack(&mut self, now: SimTime) -> Vec<SenderAction> {
        let mut actions = Vec::new();
        if self.ignore_dups {
            return actions;
        }
        self.dup_acks += 1;
        let threshold = self.params.dup_ack_threshold;
        if self.dup_acks == threshold {
            self.halve_ssthresh();
            match self.variant {
                TcpVariant::Tahoe => {
                    self.cwnd = 1.0;
                    self.dup_acks = 0;
                    self.ignore_dups = true;
                    self.snd_nxt = self.snd_una;
                    self.arm_timer(now, &mut actions);
                    // cwnd = 1 lets exactly the segment at snd_una out
                    actions.extend(self.try_send(now));
                }
                TcpVariant::Reno => {
                    self.cwnd = self.ssthresh;
                    self.in_fast_recovery = true;
                    self.recovery_point = self.snd_nxt;
                    let seg = self.resend_at_una(now);
                    actions.push(SenderAction::Transmit(seg));
                    self.arm_timer(now, &mut actions);
                    actions.extend(self.try_send(now));
                }
            }
        } else if self.dup_acks > threshold && self.in_fast_recovery {
            actions.extend(self.try_send(now));
        }
        actions
    }

    fn resend_at_una(&mut self, now: SimTime) -> Segment {
        let seq = self.snd_una;
        let len = self
            .segments
            .get(&seq)
            .map(|s| s.len)
            .unwrap_or_else(|| (self.snd_max - seq).min(self.params.mss_bytes as u64) as u32);
        self.segments.insert(
            seq,
            SentSegment {
                len,
                sent_at: now,
                retransmitted: true,
            },
        );
        self.segments_sent += 1;
        self.retransmissions += 1;
        Segment {
            seq,
            len,
            retransmission: true,
        }
    }

    pub fn on_timeout(&mut self, now: SimTime) -> Vec<SenderAction> {
        let mut actions = Vec::new();
        self.timer_deadline = None;
        if self.snd_max == self.snd_una {
            return actions;
        }
        self.rto_count += 1;
        self.halve_ssthresh();
        self.cwnd = 1.0;
        self.dup_acks = 0;
        self.in_fast_recovery = false;
        self.ignore_dups = true;
        self.rto_backoff = (self.rto_backoff * 2).min(self.params.max_backoff);
        self.snd_nxt = self.snd_una;
        self.arm_timer(now, &mut actions);
        actions.extend(self.try_send(now));
        actions
    }

    /// Emits whole segments while the usable window and the source allow.
    /// A short segment is sent only as the final piece of a bounded transfer.
    pub fn try_send(&mut self, now: SimTime) -> Vec<SenderAction> {
        let mut actions = Vec::new();
        if self.completed_at.is_some() {
            return actions;
        }
        let mss = self.params.mss_bytes as u64;
        loop {
            let len = match self.source.available(self.snd_nxt) {
                Available::Unlimited => mss,
                Available::Bytes(0) => break,
                Available::Bytes(n) => n.min(mss),
            };
            if self.usable_window() < len {
                break;
            }
            let seq = self.snd_nxt;
            let retransmission = seq < self.snd_max;
            let entry = self.segments.entry(seq).or_insert(SentSegment {
                len: len as u32,
                sent_at: now,
                retransmitted: false,
            });
            entry.sent_at = now;
            entry.retransmitted |= retransmission;
            self.snd_nxt += len;
            self.snd_max = self.snd_max.max(self.snd_nxt);
            self.segments_sent += 1;
            if retransmission {
                self.retransmissions += 1;
            }
            actions.push(SenderAction::Transmit(Segment {
                seq,
                len: len as u32,
                retransmission,
            }));
        }
        if self.timer_deadline.is_none() && self.snd_max > self.snd_una {
            self.arm_timer(now, &mut actions);
        }
        actions
    }
}

/// Cumulative-ACK receiver with an out-of-order reassembly buffer.
#[derive(Debug, Clone, Default)]
pub struct TcpReceiver {
    rcv_nxt: u64,
    // start -> end of buffered out-of-order ranges
    ooo: BTreeMap<u64, u64>,
}

impl TcpReceiver {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn rcv_nxt(&self) -> u64 {
        self.rcv_nxt
    }

    pub fn buffered_ranges(&self) -> impl Iterator<Item = (u64, u64)> + '_ {
        self.ooo.iter().map(|(&s, &e)| (s, e))
    }

    /// Absorbs `[seq, seq + len)` and returns the ack number to send.
    pub fn on_segment(&mut self, seq: u64, len: u32) -> u64 {
        let end = seq + len as u64;
        if end <= self.rcv_nxt {
            return self.rcv_nxt;
        }
        if seq <= self.rcv_nxt {
            self.rcv_nxt = end;
            while let Some((&s, &e)) = self.ooo.iter().next() {
                if s > self.rcv_nxt {
                    break;
                }
                self.rcv_nxt = self.rcv_nxt.max(e);
                self.ooo.remove(&s);
            }
        } else {
            let slot = self.ooo.entry(seq).or_insert(end);
            *slot = (*slot).max(end);
        }
        self.rcv_nxt
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MSS: u64 = 536;

    fn t(s: f64) -> SimTime {
        SimTime::from_secs(s)
    }

    fn sender(variant: TcpVariant) -> TcpSender {
        TcpSender::new(1, variant, TcpParams::default(), FtpSource::unbounded(1))
    }

    /// A sender with `flight` segments outstanding and the given windows.
    fn loaded(variant: TcpVariant, cwnd: f64, ssthresh: f64, flight: u64) -> TcpSender {
        let mut s = sender(variant);
        s.cwnd = flight as f64;
        s.try_send(t(0.0));
        assert_eq!(s.flight_bytes(), flight * MSS);
        s.cwnd = cwnd;
        s.ssthresh = ssthresh;
        s
    }

    fn transmits(actions: &[SenderAction]) -> Vec<Segment> {
        actions
            .iter()
            .filter_map(|a| match a {
                SenderAction::Transmit(s) => Some(*s),
                _ => None,
            })
            .collect()
    }

    #[test]
    fn usable_window_full() {
        let s = loaded(TcpVariant::Reno, 8.0, 32.0, 8);
        assert_eq!(s.usable_window(), 0);
    }

    #[test]
    fn usable_window_with_inflation() {
        let mut s = loaded(TcpVariant::Reno, 4.0, 4.0, 8);
        s.in_fast_recovery = true;
        s.dup_acks = 6;
        assert_eq!(s.usable_window(), 2 * MSS);
    }

    #[test]
    fn tahoe_never_inflates() {
        let mut s = loaded(TcpVariant::Tahoe, 8.0, 4.0, 4);
        s.dup_acks = 5;
        assert_eq!(s.effective_window(), 8.0);
        assert_eq!(s.usable_window(), 4 * MSS);
    }

    #[test]
    fn awnd_caps_the_window() {
        let mut s = loaded(TcpVariant::Tahoe, 100.0, 200.0, 0);
        s.params.awnd_mss = 10;
        assert_eq!(s.usable_window(), 10 * MSS);
    }

    #[test]
    fn slow_start_adds_one_per_ack() {
        let mut s = loaded(TcpVariant::Reno, 1.0, 32.0, 1);
        s.on_ack(MSS, t(0.1)).unwrap();
        assert_eq!(s.cwnd(), 2.0);
    }

    #[test]
    fn congestion_avoidance_adds_inverse_cwnd() {
        let mut s = loaded(TcpVariant::Tahoe, 10.0, 8.0, 10);
        s.on_ack(MSS, t(0.1)).unwrap();
        assert!((s.cwnd() - 10.1).abs() < 1e-12);
    }

    #[test]
    fn recovery_ack_exits_fast_recovery() {
        let mut s = loaded(TcpVariant::Reno, 8.0, 32.0, 8);
        for _ in 0..3 {
            s.on_ack(0, t(0.1)).unwrap();
        }
        assert!(s.in_fast_recovery());
        assert_eq!(s.ssthresh(), 4.0);
        let recovery = s.recovery_point;
        s.on_ack(recovery, t(0.2)).unwrap();
        assert_eq!(s.cwnd(), 4.0);
        assert!(!s.in_fast_recovery());
    }

    #[test]
    fn partial_ack_stays_in_recovery() {
        let mut s = loaded(TcpVariant::Reno, 8.0, 32.0, 8);
        for _ in 0..3 {
            s.on_ack(0, t(0.1)).unwrap();
        }
        s.on_ack(2 * MSS, t(0.2)).unwrap();
        assert!(s.in_fast_recovery());
        assert_eq!(s.dup_acks(), 0);
        assert!((s.cwnd() - 4.25).abs() < 1e-12);
    }

    #[test]
    fn reno_third_dup_ack_halves_and_retransmits() {
        let mut s = loaded(TcpVariant::Reno, 8.0, 32.0, 8);
        assert!(s.on_ack(0, t(0.1)).unwrap().is_empty());
        s.on_ack(0, t(0.1)).unwrap();
        let actions = s.on_ack(0, t(0.1)).unwrap();
        let sent = transmits(&actions);
        assert_eq!(
            sent,
            vec![Segment {
                seq: 0,
                len: MSS as u32,
                retransmission: true
            }]
        );
        assert_eq!(s.ssthresh(), 4.0);
        assert_eq!(s.cwnd(), 4.0);
        assert!(s.in_fast_recovery());
        assert_eq!(s.retransmissions(), 1);
        assert_eq!(s.snd_nxt(), 8 * MSS);
    }

    #[test]
    fn tahoe_third_dup_ack_collapses_window() {
        let mut s = loaded(TcpVariant::Tahoe, 8.0, 32.0, 8);
        s.on_ack(0, t(0.1)).unwrap();
        s.on_ack(0, t(0.1)).unwrap();
        let sent = transmits(&s.on_ack(0, t(0.1)).unwrap());
        assert_eq!(
            sent,
            vec![Segment {
                seq: 0,
                len: MSS as u32,
                retransmission: true
            }]
        );
        assert_eq!(s.ssthresh(), 4.0);
        assert_eq!(s.cwnd(), 1.0);
        assert_eq!(s.dup_acks(), 0);
        assert!(!s.in_fast_recovery());
        // later duplicates are ignored
        for _ in 0..5 {
            assert!(transmits(&s.on_ack(0, t(0.15)).unwrap()).is_empty());
        }
        assert_eq!(s.dup_acks(), 0);
        // recovery is slow start: the ack of the resent segment opens cwnd to 2
        s.on_ack(MSS, t(0.2)).unwrap();
        assert_eq!(s.cwnd(), 2.0);
    }

    #[test]
    fn reno_inflation_releases_new_data_at_fifth_dup() {
        let mut s = loaded(TcpVariant::Reno, 8.0, 32.0, 8);
        for _ in 0..3 {
            s.on_ack(0, t(0.1)).unwrap();
        }
        assert_eq!(s.ssthresh(), 4.0);
        assert!(transmits(&s.on_ack(0, t(0.1)).unwrap()).is_empty()); // 4th
        let fifth = transmits(&s.on_ack(0, t(0.1)).unwrap());
        assert_eq!(fifth.len(), 1);
        assert_eq!(fifth[0].seq, 8 * MSS);
        assert!(!fifth[0].retransmission);
        assert_eq!(transmits(&s.on_ack(0, t(0.1)).unwrap()).len(), 1); // 6th
        assert_eq!(transmits(&s.on_ack(0, t(0.1)).unwrap()).len(), 1); // 7th
    }

    #[test]
    fn timeout_collapses_and_goes_back() {
        let mut s = loaded(TcpVariant::Reno, 16.0, 32.0, 16);
        let sent = transmits(&s.on_timeout(t(3.0)));
        assert_eq!(s.ssthresh(), 8.0);
        assert_eq!(s.cwnd(), 1.0);
        assert_eq!(sent.len(), 1);
        assert_eq!(sent[0].seq, 0);
        assert!(sent[0].retransmission);
        assert_eq!(s.rto_count(), 1);
    }

    #[test]
    fn timeout_ssthresh_floor() {
        let mut s = loaded(TcpVariant::Tahoe, 3.0, 32.0, 3);
        s.on_timeout(t(3.0));
        assert_eq!(s.ssthresh(), 2.0);
    }

    #[test]
    fn consecutive_timeouts_back_off() {
        let mut s = loaded(TcpVariant::Tahoe, 4.0, 32.0, 4);
        let rto = s.rtt().rto();
        assert_eq!(s.timer_deadline(), Some(t(rto)));
        let mut now = t(rto);
        for factor in [2.0, 4.0, 8.0] {
            s.on_timeout(now);
            let next = s.timer_deadline().unwrap();
            assert!((next - now - factor * rto).abs() < 1e-9);
            now = next;
        }
        assert_eq!(s.rto_backoff(), 8);
    }

    #[test]
    fn backoff_is_capped() {
        let mut s = loaded(TcpVariant::Tahoe, 4.0, 32.0, 4);
        for _ in 0..20 {
            s.on_timeout(t(1.0));
        }
        assert_eq!(s.rto_backoff(), 64);
        let at = s.timer_deadline().unwrap();
        assert!((at - t(1.0) - 64.0).abs() < 1e-9);
    }

    #[test]
    fn new_ack_resets_backoff_and_cancels_idle_timer() {
        let mut s = loaded(TcpVariant::Reno, 1.0, 32.0, 1);
        s.on_timeout(t(3.0));
        assert_eq!(s.rto_backoff(), 2);
        s.source = FtpSource::bounded(1, MSS);
        let actions = s.on_ack(MSS, t(3.1)).unwrap();
        assert_eq!(s.rto_backoff(), 1);
        assert!(actions.contains(&SenderAction::CancelTimer));
        assert!(actions.contains(&SenderAction::Completed));
        assert_eq!(s.timer_deadline(), None);
    }

    #[test]
    fn karn_skips_retransmitted_samples() {
        let mut s = loaded(TcpVariant::Reno, 2.0, 32.0, 2);
        s.on_ack(MSS, t(0.5)).unwrap();
        assert_eq!(s.last_rtt_sample(), Some(0.5));
        s.on_timeout(t(2.0));
        s.on_ack(2 * MSS, t(2.3)).unwrap();
        assert_eq!(s.last_rtt_sample(), None);
        assert_eq!(s.rtt().srtt(), Some(0.5));
    }

    #[test]
    fn ack_beyond_sent_is_a_fault() {
        let mut s = loaded(TcpVariant::Reno, 2.0, 32.0, 2);
        let err = s.on_ack(5 * MSS, t(0.1)).unwrap_err();
        assert!(matches!(err, ProtocolFault::AckBeyondSent { ack_no, .. } if ack_no == 5 * MSS));
    }

    #[test]
    fn rtt_first_sample() {
        let mut e = RttEstimator::new(3.0, 1.0, 64.0);
        let (srtt, rttvar, rto) = e.update(0.2).unwrap();
        assert_eq!(srtt, 0.2);
        assert_eq!(rttvar, 0.1);
        assert_eq!(rto, 1.0);
    }

    #[test]
    fn rtt_second_equal_sample() {
        let mut e = RttEstimator::new(3.0, 1.0, 64.0);
        e.update(0.2).unwrap();
        let (srtt, rttvar, _) = e.update(0.2).unwrap();
        assert!((rttvar - 0.075).abs() < 1e-15);
        assert!((srtt - 0.2).abs() < 1e-15);
    }

    #[test]
    fn rtt_constant_samples_fixed_point() {
        let mut e = RttEstimator::new(3.0, 1.0, 64.0);
        for _ in 0..500 {
            e.update(0.3).unwrap();
        }
        assert!((e.srtt().unwrap() - 0.3).abs() < 1e-12);
        assert!(e.rttvar() < 1e-12);
        assert_eq!(e.rto(), 1.0);
    }

    #[test]
    fn rtt_rejects_non_positive() {
        let mut e = RttEstimator::new(3.0, 1.0, 64.0);
        assert!(e.update(0.0).is_err());
        assert!(e.update(-1.0).is_err());
    }

    #[test]
    fn try_send_whole_segments_only() {
        let mut s = sender(TcpVariant::Tahoe);
        s.cwnd = 3.0;
        assert_eq!(transmits(&s.try_send(t(0.0))).len(), 3);
        assert!(transmits(&s.try_send(t(0.0))).is_empty());

        let mut s = sender(TcpVariant::Tahoe);
        s.cwnd = 1.5;
        assert_eq!(transmits(&s.try_send(t(0.0))).len(), 1);
    }

    #[test]
    fn try_send_arms_timer_once() {
        let mut s = sender(TcpVariant::Reno);
        s.cwnd = 2.0;
        let actions = s.try_send(t(0.0));
        let arms = actions
            .iter()
            .filter(|a| matches!(a, SenderAction::ArmTimer { .. }))
            .count();
        assert_eq!(arms, 1);
        s.cwnd = 4.0;
        let actions = s.try_send(t(0.01));
        assert!(!actions.iter().any(|a| matches!(a, SenderAction::ArmTimer { .. })));
    }

    #[test]
    fn bounded_transfer_ends_with_short_segment() {
        let mut s = TcpSender::new(1, TcpVariant::Reno, TcpParams::default(), FtpSource::bounded(1, 1500));
        s.cwnd = 10.0;
        let lens: Vec<u32> = transmits(&s.try_send(t(0.0))).iter().map(|g| g.len).collect();
        assert_eq!(lens, vec![536, 536, 428]);
    }

    #[test]
    fn receiver_in_order() {
        let mut r = TcpReceiver {
            rcv_nxt: 1000,
            ..Default::default()
        };
        assert_eq!(r.on_segment(1000, 1000), 2000);
    }

    #[test]
    fn receiver_gap_repeats_ack() {
        let mut r = TcpReceiver {
            rcv_nxt: 1000,
            ..Default::default()
        };
        assert_eq!(r.on_segment(2000, 1000), 1000);
        assert_eq!(r.buffered_ranges().collect::<Vec<_>>(), vec![(2000, 3000)]);
    }

    #[test]
    fn receiver_fills_gap() {
        let mut r = TcpReceiver {
            rcv_nxt: 1000,
            ..Default::default()
        };
        r.on_segment(2000, 1000);
        assert_eq!(r.on_segment(1000, 1000), 3000);
        assert_eq!(r.buffered_ranges().count(), 0);
    }

    #[test]
    fn receiver_duplicate_segment() {
        let mut r = TcpReceiver::new();
        r.on_segment(0, 500);
        assert_eq!(r.on_segment(0, 500), 500);
    }

    #[test]
    fn variant_parse() {
        assert_eq!("Reno".parse::<TcpVariant>().unwrap(), TcpVariant::Reno);
        assert!("vegas".parse::<TcpVariant>().is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn receiver_acks_are_monotone_and_complete(order in Just((0..20u64).collect::<Vec<_>>()).prop_shuffle()) {
                let mut r = TcpReceiver::new();
                let mut last = 0;
                for &i in &order {
                    let ack = r.on_segment(i * 100, 100);
                    prop_assert!(ack >= last);
                    last = ack;
                }
                prop_assert_eq!(last, 2000);
            }

            #[test]
            fn sender_invariants_hold_under_random_acks(
                variant in prop_oneof![Just(TcpVariant::Tahoe), Just(TcpVariant::Reno)],
                steps in proptest::collection::vec((0u8..4, 0u64..4), 1..200),
            ) {
                let mut s = sender(variant);
                s.try_send(t(0.0));
                let mut now = 0.0;
                for (kind, adv) in steps {
                    now += 0.01;
                    match kind {
                        0 => { s.on_timeout(t(now)); }
                        1 => { let una = s.snd_una(); s.on_ack(una, t(now)).unwrap(); }
                        _ => {
                            let ack = (s.snd_una() + adv * MSS).min(s.snd_max());
                            s.on_ack(ack, t(now)).unwrap();
                        }
                    }
                    prop_assert!(s.snd_una() <= s.snd_nxt());
                    prop_assert!(s.snd_nxt() <= s.snd_max());
                    prop_assert!(s.cwnd() >= 1.0);
                    if s.in_fast_recovery() {
                        prop_assert_eq!(s.variant(), TcpVariant::Reno);
                    }
                }
            }
        }
    }
}
