//! Deterministic discrete-event core.
//!
//! Pending events are totally ordered by `(fire_at, seq)`, where `seq` is the
//! insertion counter, so simultaneous events run in the order they were scheduled.
//! Randomness comes from one root seed; every entity derives its own stream from
//! a stable hash of its name so that adding an entity never perturbs the draws of
//! another.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Result, SimError};
use crate::time::SimTime;

/// Identifier returned by [`Scheduler::schedule`]; equal to the event's sequence number.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EventId(pub u64);

#[derive(Debug)]
pub struct Event<P> {
    pub fire_at: SimTime,
    pub seq: u64,
    pub payload: P,
}

impl<P> PartialEq for Event<P> {
    fn eq(&self, other: &Self) -> bool {
        self.fire_at == other.fire_at && self.seq == other.seq
    }
}

impl<P> Eq for Event<P> {}

impl<P> Ord for Event<P> {
    // reversed: BinaryHeap is a max-heap
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .fire_at
            .cmp(&self.fire_at)
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

impl<P> PartialOrd for Event<P> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Something that reacts to events popped from a [`Scheduler`].
pub trait Handler<P> {
    fn handle(&mut self, sched: &mut Scheduler<P>, event: Event<P>) -> Result<()>;
}

/// Clock plus ordered pending-event set.
#[derive(Debug)]
pub struct Scheduler<P> {
    now: SimTime,
    next_seq: u64,
    queue: BinaryHeap<Event<P>>,
    executed: u64,
    digest: u64,
}

impl<P> Default for Scheduler<P> {
    fn default() -> Self {
        Self::new()
    }
}

impl<P> Scheduler<P> {
    pub fn new() -> Self {
        Scheduler {
            now: SimTime::ZERO,
            next_seq: 0,
            queue: BinaryHeap::new(),
            executed: 0,
            digest: FNV_OFFSET,
        }
    }

    pub fn now(&self) -> SimTime {
        self.now
    }

    pub fn pending(&self) -> usize {
        self.queue.len()
    }

    pub fn scheduled_total(&self) -> u64 {
        self.next_seq
    }

    pub fn executed_total(&self) -> u64 {
        self.executed
    }

    /// Running hash over `(fire_at, seq)` of every executed event.
    pub fn trace_digest(&self) -> u64 {
        self.digest
    }

    pub fn schedule(&mut self, fire_at: SimTime, payload: P) -> Result<EventId> {
        if fire_at < self.now {
            return Err(SimError::config(format!(
                "cannot schedule at {fire_at}: clock is already at {}",
                self.now
            )));
        }
        let seq = self.next_seq;
        self.next_seq += 1;
        self.queue.push(Event {
            fire_at,
            seq,
            payload,
        });
        Ok(EventId(seq))
    }

    pub fn schedule_in(&mut self, delay: SimTime, payload: P) -> Result<EventId> {
        let at = self
            .now
            .checked_add(delay)
            .ok_or_else(|| SimError::config("event time overflows SimTime"))?;
        self.schedule(at, payload)
    }

    /// Payloads of pending events, in no particular order.
    pub fn pending_payloads(&self) -> impl Iterator<Item = &P> {
        self.queue.iter().map(|e| &e.payload)
    }

    pub fn peek_time(&self) -> Option<SimTime> {
        self.queue.peek().map(|e| e.fire_at)
    }

    /// Executes every event with `fire_at <= t_end` and leaves the clock at `t_end`.
    pub fn run_until<H: Handler<P>>(&mut self, t_end: SimTime, handler: &mut H) -> Result<u64> {
        if t_end < self.now {
            return Err(SimError::config(format!(
                "run_until({t_end}) is behind the clock ({})",
                self.now
            )));
        }
        let mut count = 0;
        while self.queue.peek().is_some_and(|e| e.fire_at <= t_end) {
            let event = self.queue.pop().expect("peeked");
            debug_assert!(event.fire_at >= self.now);
            self.now = event.fire_at;
            self.digest = fnv_mix(fnv_mix(self.digest, event.fire_at.as_nanos()), event.seq);
            self.executed += 1;
            count += 1;
            handler.handle(self, event)?;
        }
        self.now = t_end;
        Ok(count)
    }
}

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

fn fnv_mix(mut h: u64, v: u64) -> u64 {
    for b in v.to_le_bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(FNV_PRIME);
    }
    h
}

/// FNV-1a over a byte string; stable across platforms and toolchains.
pub fn stable_hash(bytes: &[u8]) -> u64 {
    let mut h = FNV_OFFSET;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(FNV_PRIME);
    }
    h
}

/// Per-entity random stream: ChaCha8 keyed by `root_seed` and the FNV-1a hash of
/// the entity name.
pub fn entity_rng(root_seed: u64, entity: &str) -> ChaCha8Rng {
    let mut seed = [0u8; 32];
    seed[..8].copy_from_slice(&root_seed.to_le_bytes());
    seed[8..16].copy_from_slice(&stable_hash(entity.as_bytes()).to_le_bytes());
    ChaCha8Rng::from_seed(seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    struct Recorder(Vec<(SimTime, u32)>);

    impl Handler<u32> for Recorder {
        fn handle(&mut self, _s: &mut Scheduler<u32>, ev: Event<u32>) -> Result<()> {
            self.0.push((ev.fire_at, ev.payload));
            Ok(())
        }
    }

    struct Ticker {
        period: SimTime,
        stop: SimTime,
        ticks: u64,
    }

    impl Handler<()> for Ticker {
        fn handle(&mut self, s: &mut Scheduler<()>, ev: Event<()>) -> Result<()> {
            if ev.fire_at < self.stop {
                self.ticks += 1;
                s.schedule_in(self.period, ())?;
            }
            Ok(())
        }
    }

    #[test]
    fn event_at_zero_runs_first() {
        let mut s = Scheduler::new();
        s.schedule(SimTime::from_micros(5), 1).unwrap();
        s.schedule(SimTime::ZERO, 0).unwrap();
        let mut r = Recorder(vec![]);
        s.run_until(SimTime::from_micros(10), &mut r).unwrap();
        assert_eq!(r.0[0], (SimTime::ZERO, 0));
    }

    #[test]
    fn ties_break_by_insertion() {
        let mut s = Scheduler::new();
        for i in 0..5 {
            s.schedule(SimTime::from_micros(3), i).unwrap();
        }
        let mut r = Recorder(vec![]);
        s.run_until(SimTime::from_micros(3), &mut r).unwrap();
        assert_eq!(r.0.iter().map(|e| e.1).collect::<Vec<_>>(), vec![0, 1, 2, 3, 4]);
    }

    #[test]
    fn scheduling_in_the_past_fails() {
        let mut s: Scheduler<u32> = Scheduler::new();
        let mut r = Recorder(vec![]);
        s.run_until(SimTime::from_micros(10), &mut r).unwrap();
        assert!(s.schedule(SimTime::from_micros(9), 0).is_err());
        assert!(s.schedule(SimTime::from_micros(10), 0).is_ok());
    }

    #[test]
    fn empty_run_advances_clock() {
        let mut s: Scheduler<u32> = Scheduler::new();
        let mut r = Recorder(vec![]);
        let n = s.run_until(SimTime::from_secs(1), &mut r).unwrap();
        assert_eq!(n, 0);
        assert_eq!(s.now(), SimTime::from_secs(1));
        assert!(s.run_until(SimTime::from_millis(1), &mut r).is_err());
    }

    #[test]
    fn periodic_generator_tick_count() {
        let mut s = Scheduler::new();
        s.schedule(SimTime::ZERO, ()).unwrap();
        let mut t = Ticker {
            period: SimTime::from_micros(400),
            stop: SimTime::from_millis(4),
            ticks: 0,
        };
        // emits at 0, 400us, ..., 3.6ms; the wake-up at 4ms is the stop boundary
        s.run_until(SimTime::from_millis(4), &mut t).unwrap();
        assert_eq!(t.ticks, 10);
        assert_eq!(s.executed_total() + s.pending() as u64, s.scheduled_total());
    }

    #[test]
    fn entity_streams_are_stable_and_independent() {
        let a1: Vec<u64> = (0..4).map({
            let mut r = entity_rng(7, "sensor-1");
            move |_| r.random()
        }).collect();
        let a2: Vec<u64> = (0..4).map({
            let mut r = entity_rng(7, "sensor-1");
            move |_| r.random()
        }).collect();
        let b: Vec<u64> = (0..4).map({
            let mut r = entity_rng(7, "sensor-2");
            move |_| r.random()
        }).collect();
        assert_eq!(a1, a2);
        assert_ne!(a1, b);
    }
}
