//! Constant-expected-round agreement driven by a shared entangled coin. This
//! is a cost model: rounds, sessions and broadcast frames are accounted
//! exactly, while the coin is read from measured Bell pairs.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::eig::f_max;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuantumAgreementParams {
    /// Probability that a round ends the protocol.
    pub round_success: f64,
    pub max_rounds: u32,
    /// Sessions per member pair per round.
    pub pairs_per_round: u32,
}

impl Default for QuantumAgreementParams {
    fn default() -> Self {
        Self {
            round_success: 0.5,
            max_rounds: 8,
            pairs_per_round: 1,
        }
    }
}

impl QuantumAgreementParams {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.round_success > 0.0 && self.round_success <= 1.0) {
            return Err("round_success must be in (0,1]".into());
        }
        if self.max_rounds == 0 {
            return Err("max_rounds must be positive".into());
        }
        if self.pairs_per_round == 0 {
            return Err("pairs_per_round must be positive".into());
        }
        Ok(())
    }

    /// Rounds until the first successful one; `None` past the cap.
    pub fn draw_rounds<R: Rng + ?Sized>(&self, rng: &mut R) -> Option<u32> {
        (1..=self.max_rounds)
            .find(|_| self.round_success >= 1.0 || rng.random::<f64>() < self.round_success)
    }
}

/// Member pairs that share a session each round.
pub fn session_pairs(members: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::with_capacity(members * members.saturating_sub(1) / 2);
    for a in 0..members {
        for b in (a + 1)..members {
            out.push((a, b));
        }
    }
    out
}

#[derive(Debug, Clone)]
pub struct QuantumRun {
    n: usize,
    f: usize,
    values: Vec<Option<bool>>,
    locked: Vec<Option<bool>>,
    rounds_done: u32,
}

impl QuantumRun {
    /// `inputs[i] = None` marks a crashed member.
    pub fn new(inputs: Vec<Option<bool>>) -> Self {
        let n = inputs.len();
        Self {
            n,
            f: f_max(n),
            locked: vec![None; n],
            values: inputs,
            rounds_done: 0,
        }
    }

    pub fn members(&self) -> usize {
        self.n
    }

    pub fn rounds_done(&self) -> u32 {
        self.rounds_done
    }

    pub fn value(&self, member: usize) -> Option<bool> {
        self.values[member]
    }

    pub fn sends(&self, member: usize) -> bool {
        self.values[member].is_some()
    }

    /// One broadcast round. `heard(from, to)` says whether the broadcast of
    /// `from` reached `to`; `sent(from, to)` gives the value a member put on
    /// the air for that receiver. Members that see n-f support lock the
    /// value, those with f+1 support adopt it, the rest take the coin.
    #[allow(clippy::needless_range_loop)]
    pub fn round<H, S>(&mut self, mut heard: H, mut sent: S, coin: bool)
    where
        H: FnMut(usize, usize) -> bool,
        S: FnMut(usize, usize) -> Option<bool>,
    {
        let n = self.n;
        let mut next = self.values.clone();
        for i in 0..n {
            if self.values[i].is_none() {
                continue;
            }
            let (mut ones, mut zeros) = (0usize, 0usize);
            for j in 0..n {
                if j != i && !heard(j, i) {
                    continue;
                }
                let v = if j == i { self.values[i] } else { sent(j, i) };
                match v {
                    Some(true) => ones += 1,
                    Some(false) => zeros += 1,
                    None => {}
                }
            }
            let lock = n - self.f;
            let adopt = self.f + 1;
            self.locked[i] = if ones >= lock {
                Some(true)
            } else if zeros >= lock {
                Some(false)
            } else {
                None
            };
            next[i] = Some(match self.locked[i] {
                Some(v) => v,
                None if ones >= adopt && ones > zeros => true,
                None if zeros >= adopt && zeros > ones => false,
                None => coin,
            });
        }
        self.values = next;
        self.rounds_done += 1;
    }

    /// Decision after the final round: the value locked in that round.
    pub fn decide(&self, member: usize) -> Option<bool> {
        self.locked[member]
    }
}
