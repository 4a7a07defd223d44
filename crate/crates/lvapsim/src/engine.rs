//! Discrete-event kernel: a monotonic microsecond clock, a priority queue of
//! scheduled events with lazy cancellation, and per-node deterministic RNG
//! streams.

use std::collections::{BinaryHeap, HashSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

/// Simulation time in integer microseconds since t=0.
pub type SimTime = u64;

pub const US_PER_MS: u64 = 1_000;
pub const US_PER_SEC: u64 = 1_000_000;

/// Convert a non-negative millisecond quantity to microseconds, rounding to
/// nearest.
pub fn ms_to_us(ms: f64) -> SimTime {
    debug_assert!(ms >= 0.0 && ms.is_finite());
    (ms * 1_000.0).round() as SimTime
}

pub fn us_to_ms(us: SimTime) -> f64 {
    us as f64 / 1_000.0
}

/// Identifier of a simulated node (AP, station or the controller).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum NodeId {
    Controller,
    Ap(u32),
    Sta(u32),
}

impl std::fmt::Display for NodeId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            NodeId::Controller => write!(f, "ctrl"),
            NodeId::Ap(i) => write!(f, "ap{i}"),
            NodeId::Sta(i) => write!(f, "sta{i}"),
        }
    }
}

/// Handle for a scheduled event, usable for cancellation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EventId(u64);

#[derive(Debug)]
struct Scheduled<P> {
    fire_at: SimTime,
    seq: u64,
    payload: P,
}

// BinaryHeap is a max-heap; invert the (fire_at, seq) order to pop the
// earliest event, ties broken by insertion order.
impl<P> PartialEq for Scheduled<P> {
    fn eq(&self, other: &Self) -> bool {
        self.fire_at == other.fire_at && self.seq == other.seq
    }
}
impl<P> Eq for Scheduled<P> {}
impl<P> PartialOrd for Scheduled<P> {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl<P> Ord for Scheduled<P> {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        (other.fire_at, other.seq).cmp(&(self.fire_at, self.seq))
    }
}

/// Event queue plus clock. `P` is the payload dispatched to the caller.
#[derive(Debug)]
pub struct Kernel<P> {
    now: SimTime,
    next_seq: u64,
    heap: BinaryHeap<Scheduled<P>>,
    pending: HashSet<u64>,
}

impl<P> Default for Kernel<P> {
    fn default() -> Self {
        Kernel {
            now: 0,
            next_seq: 0,
            heap: BinaryHeap::new(),
            pending: HashSet::new(),
        }
    }
}

impl<P> Kernel<P> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn now(&self) -> SimTime {
        self.now
    }

    pub fn pending_len(&self) -> usize {
        self.pending.len()
    }

    /// Schedule `payload` to fire at absolute time `fire_at`. Scheduling in
    /// the past is a logic error.
    pub fn schedule_at(&mut self, fire_at: SimTime, payload: P) -> EventId {
        assert!(
            fire_at >= self.now,
            "schedule_at {} before now {}",
            fire_at,
            self.now
        );
        let seq = self.next_seq;
        self.next_seq += 1;
        self.heap.push(Scheduled {
            fire_at,
            seq,
            payload,
        });
        self.pending.insert(seq);
        EventId(seq)
    }

    pub fn schedule_in(&mut self, delay: SimTime, payload: P) -> EventId {
        self.schedule_at(self.now + delay, payload)
    }

    /// Cancel a scheduled event. Returns false if it already fired or was
    /// already cancelled. O(1): the heap entry is dropped lazily on pop.
    pub fn cancel(&mut self, id: EventId) -> bool {
        self.pending.remove(&id.0)
    }

    /// Pop the next live event at or before `limit`, advancing the clock to
    /// its fire time. Returns None when nothing is due.
    pub fn pop_due(&mut self, limit: SimTime) -> Option<(SimTime, P)> {
        while let Some(top) = self.heap.peek() {
            if top.fire_at > limit {
                return None;
            }
            let ev = self.heap.pop().unwrap();
            if !self.pending.remove(&ev.seq) {
                continue;
            }
            debug_assert!(ev.fire_at >= self.now);
            self.now = ev.fire_at;
            return Some((ev.fire_at, ev.payload));
        }
        None
    }

    /// Advance the clock to `t` without dispatching. Used at end of run.
    pub fn advance_to(&mut self, t: SimTime) {
        assert!(t >= self.now);
        self.now = t;
    }
}

/// Deterministic per-node random stream. Seeding mixes the scenario seed
/// with a stable stream id so adding a node never perturbs the draws seen
/// by existing nodes.
#[derive(Debug, Clone)]
pub struct RngStream {
    rng: ChaCha12Rng,
}

impl RngStream {
    pub fn new(global_seed: u64, stream_id: u64) -> Self {
        let mut rng = ChaCha12Rng::seed_from_u64(global_seed);
        rng.set_stream(stream_id);
        RngStream { rng }
    }

    /// Uniform draw in [0, 1).
    pub fn next_unit(&mut self) -> f64 {
        self.rng.gen::<f64>()
    }

    /// Bernoulli trial with probability `p` of returning true.
    pub fn chance(&mut self, p: f64) -> bool {
        debug_assert!((0.0..=1.0).contains(&p));
        if p <= 0.0 {
            // Keep the draw count identical across loss settings.
            self.next_unit();
            return false;
        }
        self.next_unit() < p
    }

    /// Uniform draw in [lo, hi).
    pub fn range(&mut self, lo: f64, hi: f64) -> f64 {
        debug_assert!(lo <= hi);
        if lo == hi {
            return lo;
        }
        self.rng.gen_range(lo..hi)
    }
}

// Stable stream ids per node role. Controller gets 0, APs 1..=1000,
// stations 1001 and up.
pub fn stream_id_for(node: NodeId) -> u64 {
    match node {
        NodeId::Controller => 0,
        NodeId::Ap(i) => 1 + i as u64,
        NodeId::Sta(i) => 1_001 + i as u64,
    }
}
