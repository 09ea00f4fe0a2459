//! Discrete-event core: simulated clock, a cancellable priority event queue
//! and the seeded random source that drives every stochastic decision.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashSet};
use std::fmt;
use std::ops::{Add, Sub};

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use thiserror::Error;

/// Simulated time in seconds.
#[derive(Debug, Clone, Copy, Default, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(transparent)]
pub struct SimTime(f64);

impl SimTime {
    pub const ZERO: SimTime = SimTime(0.0);

    /// Panics on negative or non-finite input; simulated time starts at zero.
    pub fn from_secs(secs: f64) -> Self {
        assert!(
            secs.is_finite() && secs >= 0.0,
            "simulated time must be finite and non-negative, got {secs}"
        );
        SimTime(secs)
    }

    pub fn secs(self) -> f64 {
        self.0
    }
}

impl Eq for SimTime {}

impl PartialOrd for SimTime {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for SimTime {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0)
    }
}

impl Add<f64> for SimTime {
    type Output = SimTime;
    fn add(self, rhs: f64) -> SimTime {
        SimTime::from_secs(self.0 + rhs)
    }
}

impl Sub for SimTime {
    type Output = f64;
    fn sub(self, rhs: SimTime) -> f64 {
        self.0 - rhs.0
    }
}

impl fmt::Display for SimTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.6}", self.0)
    }
}

/// Opaque handle returned by [`EventQueue::schedule`], used to cancel timers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct EventHandle(u64);

impl EventHandle {
    pub fn seq_no(self) -> u64 {
        self.0
    }
}

struct Entry<P> {
    fire_at: SimTime,
    seq_no: u64,
    payload: P,
}

impl<P> PartialEq for Entry<P> {
    fn eq(&self, other: &Self) -> bool {
        self.fire_at == other.fire_at && self.seq_no == other.seq_no
    }
}

impl<P> Eq for Entry<P> {}

impl<P> PartialOrd for Entry<P> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<P> Ord for Entry<P> {
    // reversed: BinaryHeap is a max-heap
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .fire_at
            .cmp(&self.fire_at)
            .then_with(|| other.seq_no.cmp(&self.seq_no))
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum EngineError {
    #[error("cannot schedule event at t={at} before the current clock t={now}")]
    ScheduleInPast { at: SimTime, now: SimTime },
}

/// A handler fault, tagged with the event that raised it.
#[derive(Debug, Error)]
#[error("handler failed on event #{seq_no} at t={fire_at}: {source}")]
pub struct RunError<E: std::error::Error + 'static> {
    pub fire_at: SimTime,
    pub seq_no: u64,
    #[source]
    pub source: E,
}

/// Priority queue of pending events ordered by `(fire_at, seq_no)`.
///
/// Owns the simulation clock. Handlers receive `&mut EventQueue` so they can
/// schedule follow-up events while the queue is being drained.
pub struct EventQueue<P> {
    heap: BinaryHeap<Entry<P>>,
    // scheduled, not yet fired or cancelled
    live: HashSet<u64>,
    now: SimTime,
    next_seq: u64,
    halted: bool,
}

impl<P> Default for EventQueue<P> {
    fn default() -> Self {
        Self::new()
    }
}

impl<P> EventQueue<P> {
    pub fn new() -> Self {
        Self {
            heap: BinaryHeap::new(),
            live: HashSet::new(),
            now: SimTime::ZERO,
            next_seq: 0,
            halted: false,
        }
    }

    pub fn now(&self) -> SimTime {
        self.now
    }

    /// Number of live (not cancelled) pending events.
    pub fn len(&self) -> usize {
        self.live.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn schedule(&mut self, at: SimTime, payload: P) -> Result<EventHandle, EngineError> {
        if at < self.now {
            return Err(EngineError::ScheduleInPast { at, now: self.now });
        }
        let seq_no = self.next_seq;
        self.next_seq += 1;
        self.live.insert(seq_no);
        self.heap.push(Entry {
            fire_at: at,
            seq_no,
            payload,
        });
        Ok(EventHandle(seq_no))
    }

    /// Cancels a pending event. Returns false if it already fired or was
    /// cancelled before.
    pub fn cancel(&mut self, handle: EventHandle) -> bool {
        self.live.remove(&handle.0)
    }

    /// Stops [`run_until`](Self::run_until) after the current handler returns.
    pub fn halt(&mut self) {
        self.halted = true;
    }

    /// Live pending payloads, in no particular order.
    pub fn pending(&self) -> impl Iterator<Item = &P> {
        self.heap
            .iter()
            .filter(|e| self.live.contains(&e.seq_no))
            .map(|e| &e.payload)
    }

    fn pop_live(&mut self, t_end: SimTime) -> Option<Entry<P>> {
        loop {
            let head = self.heap.peek()?;
            if head.fire_at > t_end {
                return None;
            }
            let entry = self.heap.pop().expect("peeked");
            if self.live.remove(&entry.seq_no) {
                return Some(entry);
            }
        }
    }

    /// Executes every event with `fire_at <= t_end` in `(fire_at, seq_no)`
    /// order and returns how many ran. The clock ends at `t_end`, or at the
    /// last fired event when a handler called [`halt`](Self::halt).
    pub fn run_until<E, F>(&mut self, t_end: SimTime, mut handler: F) -> Result<usize, RunError<E>>
    where
        E: std::error::Error + 'static,
        F: FnMut(&mut Self, P) -> Result<(), E>,
    {
        self.halted = false;
        let mut executed = 0;
        while let Some(entry) = self.pop_live(t_end) {
            self.now = entry.fire_at;
            executed += 1;
            handler(self, entry.payload).map_err(|source| RunError {
                fire_at: entry.fire_at,
                seq_no: entry.seq_no,
                source,
            })?;
            if self.halted {
                return Ok(executed);
            }
        }
        if t_end > self.now {
            self.now = t_end;
        }
        Ok(executed)
    }
}

/// Seeded pseudo-random source (ChaCha8, seeded via `seed_from_u64`).
///
/// Uniform draws take the top 53 bits of each 64-bit output, so a stream is
/// reproducible across platforms for a given seed.
#[derive(Debug, Clone)]
pub struct RandomSource {
    seed: u64,
    rng: ChaCha8Rng,
}

impl RandomSource {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Uniform real in `[0, 1)`.
    pub fn next_uniform(&mut self) -> f64 {
        (self.rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }
}
