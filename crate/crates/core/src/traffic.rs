//! Application sources: a greedy FTP transfer and a constant-bit-rate UDP
//! stream.

use crate::engine::SimTime;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Available {
    Unlimited,
    Bytes(u64),
}

/// Greedy bulk source: hands TCP as much data as the window permits.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FtpSource {
    pub flow_id: u32,
    /// `None` for an endless transfer.
    pub total_bytes: Option<u64>,
}

impl FtpSource {
    pub fn unbounded(flow_id: u32) -> Self {
        Self {
            flow_id,
            total_bytes: None,
        }
    }

    pub fn bounded(flow_id: u32, total_bytes: u64) -> Self {
        Self {
            flow_id,
            total_bytes: Some(total_bytes),
        }
    }

    pub fn available(&self, already_sent: u64) -> Available {
        match self.total_bytes {
            None => Available::Unlimited,
            Some(total) => Available::Bytes(total.saturating_sub(already_sent)),
        }
    }

    /// True once `acked` covers the final byte of a bounded transfer.
    pub fn is_complete(&self, acked: u64) -> bool {
        self.total_bytes.is_some_and(|total| acked >= total)
    }
}

/// Strictly periodic source active on `[start, stop)`.
///
/// Emission `k` happens at `start + k * period`; times are computed from the
/// index rather than accumulated so long runs do not drift.
#[derive(Debug, Clone, PartialEq)]
pub struct CbrSource {
    pub flow_id: u32,
    pub rate_bps: f64,
    pub packet_bytes: u32,
    pub start: SimTime,
    pub stop: SimTime,
    emitted: u64,
}

impl CbrSource {
    pub fn new(flow_id: u32, rate_bps: f64, packet_bytes: u32, start: SimTime, stop: SimTime) -> Self {
        assert!(rate_bps > 0.0 && packet_bytes > 0);
        Self {
            flow_id,
            rate_bps,
            packet_bytes,
            start,
            stop,
            emitted: 0,
        }
    }

    pub fn period_s(&self) -> f64 {
        self.packet_bytes as f64 * 8.0 / self.rate_bps
    }

    pub fn emitted(&self) -> u64 {
        self.emitted
    }

    /// Time of the next emission, or `None` once the source is past `stop`.
    pub fn next_emission(&self) -> Option<SimTime> {
        let at = self.emission_time(self.emitted);
        (at < self.stop.secs()).then(|| SimTime::from_secs(at))
    }

    /// Records an emission at `now`, returning its index and the time of the
    /// following one. `None` outside the active interval.
    pub fn emit(&mut self, now: SimTime) -> Option<(u64, Option<SimTime>)> {
        if now < self.start || now >= self.stop {
            return None;
        }
        let index = self.emitted;
        self.emitted += 1;
        Some((index, self.next_emission()))
    }

    fn emission_time(&self, k: u64) -> f64 {
        self.start.secs() + k as f64 * self.period_s()
    }

    // smallest k with emission_time(k) >= x
    fn first_index_at_or_after(&self, x: f64) -> u64 {
        let mut k = ((x - self.start.secs()) / self.period_s()).ceil().max(0.0) as u64;
        while k > 0 && self.emission_time(k - 1) >= x {
            k -= 1;
        }
        while self.emission_time(k) < x {
            k += 1;
        }
        k
    }

    /// Number of emissions a source produces inside `[t1, t2)`.
    pub fn emissions_in(&self, t1: f64, t2: f64) -> u64 {
        let lo = t1.max(self.start.secs());
        let hi = t2.min(self.stop.secs());
        if hi <= lo {
            return 0;
        }
        self.first_index_at_or_after(hi) - self.first_index_at_or_after(lo)
    }
}
