use rand::Rng;

use super::{Bundle, DtnBuffer, EngineError, NvisLink};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TxStart {
    pub done_at: f64,
    pub token: u64,
}

#[derive(Debug, Clone, Copy)]
struct Transmission {
    token: u64,
    bundle_id: u64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, serde::Serialize)]
pub struct BackboneCounters {
    pub transmissions: u64,
    pub interrupted: u64,
    pub delivered: u64,
    pub lost_channel: u64,
    /// Releases that happened while the link was DOWN; must stay zero.
    pub released_while_down: u64,
}

/// One concentrator's uplink: a DTN buffer drained over an NVIS link, one
/// bundle at a time, only while the link is UP. A transmission cut by a DOWN
/// transition leaves the bundle at the head of the buffer.
#[derive(Debug, Clone)]
pub struct Backbone<T> {
    pub link: NvisLink,
    pub buffer: DtnBuffer<T>,
    tx: Option<Transmission>,
    next_token: u64,
    counters: BackboneCounters,
}

impl<T> Backbone<T> {
    pub fn new(link: NvisLink, buffer: DtnBuffer<T>) -> Self {
        Self {
            link,
            buffer,
            tx: None,
            next_token: 0,
            counters: BackboneCounters::default(),
        }
    }

    pub fn counters(&self) -> BackboneCounters {
        self.counters
    }

    pub fn busy(&self) -> bool {
        self.tx.is_some()
    }

    fn try_start(&mut self, now: f64) -> Option<TxStart> {
        if self.tx.is_some() || !self.link.is_up() {
            return None;
        }
        let head = self.buffer.front()?;
        let token = self.next_token;
        self.next_token += 1;
        self.tx = Some(Transmission {
            token,
            bundle_id: head.id,
        });
        self.counters.transmissions += 1;
        Some(TxStart {
            done_at: now + self.link.transmission_time(head.bytes),
            token,
        })
    }

    /// Buffers a bundle; returns evicted bundles and a transmission to
    /// schedule if the link was idle.
    pub fn store(
        &mut self,
        now: f64,
        bundle: Bundle<T>,
    ) -> Result<(Vec<Bundle<T>>, Option<TxStart>), EngineError> {
        let evicted = self.buffer.store(bundle)?;
        if let Some(tx) = self.tx {
            if evicted.iter().any(|b| b.id == tx.bundle_id) {
                self.tx = None;
                self.counters.interrupted += 1;
            }
        }
        Ok((evicted, self.try_start(now)))
    }

    /// Applies a scheduled state flip. Returns the next flip instant and a
    /// transmission to schedule.
    pub fn toggle<R: Rng + ?Sized>(&mut self, now: f64, rng: &mut R) -> (Option<f64>, Option<TxStart>) {
        let next = self.link.toggle(now, rng);
        if !self.link.is_up() && self.tx.take().is_some() {
            self.counters.interrupted += 1;
        }
        (next, self.try_start(now))
    }

    /// Completes transmission `token` if it is still current. Returns the
    /// released bundle with a loss flag, plus the next transmission.
    pub fn complete<R: Rng + ?Sized>(
        &mut self,
        now: f64,
        token: u64,
        rng: &mut R,
    ) -> (Option<(Bundle<T>, bool)>, Option<TxStart>) {
        let current = matches!(self.tx, Some(tx) if tx.token == token);
        if !current {
            return (None, None);
        }
        let tx = self.tx.take().expect("checked");
        if !self.link.is_up() {
            self.counters.released_while_down += 1;
        }
        let released = match self.buffer.front() {
            Some(b) if b.id == tx.bundle_id => self.buffer.release(),
            _ => None,
        };
        let out = released.map(|b| {
            let lost = self.link.bundle_lost(rng);
            if lost {
                self.counters.lost_channel += 1;
            } else {
                self.counters.delivered += 1;
            }
            (b, lost)
        });
        (out, self.try_start(now))
    }
}
