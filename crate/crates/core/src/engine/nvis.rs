use rand::Rng;
use rand_distr::{Distribution, Exp};

use super::EngineError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NvisState {
    Up,
    Down,
}

/// Two-state availability process with exponential sojourns. The DOWN mean
/// is derived from the UP mean so the stationary UP fraction equals `p_up`.
#[derive(Debug, Clone)]
pub struct NvisLink {
    p_up: f64,
    mean_up_s: f64,
    mean_down_s: f64,
    bitrate_bps: f64,
    bundle_error: f64,
    state: NvisState,
    since: f64,
    up_time: f64,
}

impl NvisLink {
    pub fn new(
        p_up: f64,
        mean_up_s: f64,
        bitrate_bps: f64,
        bundle_error: f64,
    ) -> Result<Self, EngineError> {
        if !(0.0..=1.0).contains(&p_up) {
            return Err(EngineError::Param(format!("p_up {p_up} outside [0,1]")));
        }
        if !(mean_up_s > 0.0) || !(bitrate_bps > 0.0) {
            return Err(EngineError::Param(
                "NVIS sojourn mean and bitrate must be positive".into(),
            ));
        }
        if !(0.0..=1.0).contains(&bundle_error) {
            return Err(EngineError::Param(format!(
                "bundle error probability {bundle_error} outside [0,1]"
            )));
        }
        let mean_down_s = if p_up > 0.0 {
            mean_up_s * (1.0 - p_up) / p_up
        } else {
            f64::INFINITY
        };
        Ok(Self {
            p_up,
            mean_up_s,
            mean_down_s,
            bitrate_bps,
            bundle_error,
            state: NvisState::Up,
            since: 0.0,
            up_time: 0.0,
        })
    }

    pub fn p_up(&self) -> f64 {
        self.p_up
    }

    pub fn mean_down_s(&self) -> f64 {
        self.mean_down_s
    }

    pub fn state(&self) -> NvisState {
        self.state
    }

    pub fn is_up(&self) -> bool {
        self.state == NvisState::Up
    }

    pub fn bitrate(&self) -> f64 {
        self.bitrate_bps
    }

    pub fn transmission_time(&self, bytes: u64) -> f64 {
        8.0 * bytes as f64 / self.bitrate_bps
    }

    pub fn bundle_lost<R: Rng + ?Sized>(&self, rng: &mut R) -> bool {
        self.bundle_error > 0.0 && rng.random::<f64>() < self.bundle_error
    }

    /// Draws the initial state from the stationary distribution.
    pub fn start<R: Rng + ?Sized>(&mut self, now: f64, rng: &mut R) {
        self.state = if rng.random::<f64>() < self.p_up {
            NvisState::Up
        } else {
            NvisState::Down
        };
        self.since = now;
    }

    /// Time until the current sojourn ends, or `None` if the state is
    /// absorbing.
    pub fn sojourn<R: Rng + ?Sized>(&self, rng: &mut R) -> Option<f64> {
        let mean = match self.state {
            NvisState::Up => {
                if self.p_up >= 1.0 {
                    return None;
                }
                self.mean_up_s
            }
            NvisState::Down => {
                if self.p_up <= 0.0 {
                    return None;
                }
                self.mean_down_s
            }
        };
        let exp = Exp::new(1.0 / mean).expect("positive mean");
        Some(exp.sample(rng))
    }

    /// Flips the state at `now` and returns when it flips back.
    pub fn toggle<R: Rng + ?Sized>(&mut self, now: f64, rng: &mut R) -> Option<f64> {
        self.account(now);
        self.state = match self.state {
            NvisState::Up => NvisState::Down,
            NvisState::Down => NvisState::Up,
        };
        self.sojourn(rng).map(|d| now + d)
    }

    fn account(&mut self, now: f64) {
        if self.state == NvisState::Up {
            self.up_time += now - self.since;
        }
        self.since = now;
    }

    /// Fraction of `[0, now]` spent UP.
    pub fn up_fraction(&self, now: f64) -> f64 {
        let open = if self.state == NvisState::Up {
            now - self.since
        } else {
            0.0
        };
        if now <= 0.0 {
            return if self.is_up() { 1.0 } else { 0.0 };
        }
        (self.up_time + open) / now
    }
}

/// Runs the availability process alone for `horizon_s` and reports the UP
/// fraction.
pub fn simulate_up_fraction<R: Rng + ?Sized>(link: &mut NvisLink, horizon_s: f64, rng: &mut R) -> f64 {
    link.start(0.0, rng);
    let mut next = link.sojourn(rng);
    while let Some(t) = next {
        if t >= horizon_s {
            break;
        }
        next = link.toggle(t, rng);
    }
    link.up_fraction(horizon_s)
}
