use std::collections::VecDeque;

use super::EngineError;

#[derive(Debug, Clone, PartialEq)]
pub struct Bundle<T> {
    pub id: u64,
    pub bytes: u64,
    pub created_at: f64,
    pub payload: T,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, serde::Serialize)]
pub struct DtnCounters {
    pub stored: u64,
    pub released: u64,
    pub dropped_overflow: u64,
}

/// Byte-bounded store-and-forward buffer. Overflow evicts the oldest
/// bundles, never the one being admitted.
#[derive(Debug, Clone)]
pub struct DtnBuffer<T> {
    capacity_bytes: u64,
    used_bytes: u64,
    queue: VecDeque<Bundle<T>>,
    counters: DtnCounters,
}

impl<T> DtnBuffer<T> {
    pub fn new(capacity_bytes: u64) -> Self {
        Self {
            capacity_bytes,
            used_bytes: 0,
            queue: VecDeque::new(),
            counters: DtnCounters::default(),
        }
    }

    /// Stores a bundle and returns whatever had to be evicted to fit it.
    pub fn store(&mut self, bundle: Bundle<T>) -> Result<Vec<Bundle<T>>, EngineError> {
        if bundle.bytes > self.capacity_bytes {
            return Err(EngineError::BundleTooLarge {
                bytes: bundle.bytes,
                capacity: self.capacity_bytes,
            });
        }
        let mut evicted = Vec::new();
        while self.used_bytes + bundle.bytes > self.capacity_bytes {
            let old = self.queue.pop_front().expect("used bytes imply a bundle");
            self.used_bytes -= old.bytes;
            self.counters.dropped_overflow += 1;
            evicted.push(old);
        }
        self.used_bytes += bundle.bytes;
        self.counters.stored += 1;
        self.queue.push_back(bundle);
        Ok(evicted)
    }

    pub fn front(&self) -> Option<&Bundle<T>> {
        self.queue.front()
    }

    /// Removes the head bundle once the backbone has carried it.
    pub fn release(&mut self) -> Option<Bundle<T>> {
        let b = self.queue.pop_front()?;
        self.used_bytes -= b.bytes;
        self.counters.released += 1;
        Some(b)
    }

    pub fn len(&self) -> usize {
        self.queue.len()
    }

    pub fn is_empty(&self) -> bool {
        self.queue.is_empty()
    }

    pub fn used_bytes(&self) -> u64 {
        self.used_bytes
    }

    pub fn counters(&self) -> DtnCounters {
        self.counters
    }
}
