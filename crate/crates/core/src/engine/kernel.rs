use std::cmp::Ordering;
use std::collections::BinaryHeap;

use super::EngineError;

struct Entry<E> {
    time: f64,
    seq: u64,
    payload: E,
}

impl<E> PartialEq for Entry<E> {
    fn eq(&self, other: &Self) -> bool {
        self.seq == other.seq
    }
}
impl<E> Eq for Entry<E> {}
impl<E> PartialOrd for Entry<E> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl<E> Ord for Entry<E> {
    // earliest (time, seq) on top of the max-heap
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .time
            .total_cmp(&self.time)
            .then(other.seq.cmp(&self.seq))
    }
}

/// Future-event list ordered by virtual time, ties by insertion order.
pub struct EventQueue<E> {
    heap: BinaryHeap<Entry<E>>,
    now: f64,
    next_seq: u64,
    dispatched: u64,
}

impl<E> Default for EventQueue<E> {
    fn default() -> Self {
        Self::new()
    }
}

impl<E> EventQueue<E> {
    pub fn new() -> Self {
        Self {
            heap: BinaryHeap::new(),
            now: 0.0,
            next_seq: 0,
            dispatched: 0,
        }
    }

    pub fn now(&self) -> f64 {
        self.now
    }

    pub fn len(&self) -> usize {
        self.heap.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }

    pub fn dispatched(&self) -> u64 {
        self.dispatched
    }

    pub fn schedule(&mut self, time: f64, payload: E) -> Result<(), EngineError> {
        if !(time >= self.now) || !time.is_finite() {
            return Err(EngineError::PastEvent {
                at: time,
                now: self.now,
            });
        }
        self.heap.push(Entry {
            time,
            seq: self.next_seq,
            payload,
        });
        self.next_seq += 1;
        Ok(())
    }

    pub fn schedule_in(&mut self, delay: f64, payload: E) -> Result<(), EngineError> {
        self.schedule(self.now + delay, payload)
    }

    pub fn peek_time(&self) -> Option<f64> {
        self.heap.peek().map(|e| e.time)
    }

    /// Pops the next event if it is due no later than `t_end`.
    pub fn pop_until(&mut self, t_end: f64) -> Option<(f64, E)> {
        if self.heap.peek()?.time > t_end {
            return None;
        }
        let e = self.heap.pop()?;
        self.now = e.time;
        self.dispatched += 1;
        Some((e.time, e.payload))
    }

    /// Dispatches every event due by `t_end` and returns how many ran. The
    /// handler may schedule more events.
    pub fn run_until<F>(&mut self, t_end: f64, mut handler: F) -> Result<u64, EngineError>
    where
        F: FnMut(&mut Self, f64, E) -> Result<(), EngineError>,
    {
        let mut count = 0;
        while let Some((t, e)) = self.pop_until(t_end) {
            handler(self, t, e)?;
            count += 1;
        }
        if t_end > self.now {
            self.now = t_end;
        }
        Ok(count)
    }
}
