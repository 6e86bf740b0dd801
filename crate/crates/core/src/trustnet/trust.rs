use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrustParams {
    /// EMA weight of the newest observation.
    pub weight: f64,
    pub threshold: f64,
    pub hysteresis: f64,
    pub probe_period_s: f64,
    pub initial_score: f64,
}

impl Default for TrustParams {
    fn default() -> Self {
        Self {
            weight: 0.1,
            threshold: 0.5,
            hysteresis: 0.1,
            probe_period_s: 86_400.0,
            initial_score: 0.75,
        }
    }
}

impl TrustParams {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.weight > 0.0 && self.weight <= 1.0) {
            return Err("trust weight must be in (0,1]".into());
        }
        if !(0.0..=1.0).contains(&self.threshold) {
            return Err("trust threshold must be in [0,1]".into());
        }
        if !(self.hysteresis >= 0.0 && self.threshold + self.hysteresis <= 1.0) {
            return Err("threshold + hysteresis must stay within [0,1]".into());
        }
        if !(self.probe_period_s > 0.0) {
            return Err("probe period must be positive".into());
        }
        if !(0.0..=1.0).contains(&self.initial_score) {
            return Err("initial trust score must be in [0,1]".into());
        }
        Ok(())
    }

    /// Consecutive failures that take a perfect score below the threshold.
    pub fn failures_to_ostracize(&self) -> u32 {
        (self.threshold.ln() / (1.0 - self.weight).ln()).ceil() as u32
    }
}

/// Pairwise trust inside one measuring spot plus a per-node reputation
/// built from the outcome of that node's exchanges.
#[derive(Debug, Clone)]
pub struct TrustLedger {
    n: usize,
    params: TrustParams,
    score: Vec<f64>,
    flagged: Vec<bool>,
    ostracized: Vec<bool>,
    excluded: Vec<bool>,
    reputation: Vec<f64>,
    tally_ok: Vec<u32>,
    tally_all: Vec<u32>,
}

impl TrustLedger {
    pub fn new(n: usize, params: TrustParams) -> Self {
        Self {
            n,
            params,
            score: vec![params.initial_score; n * n],
            flagged: vec![false; n * n],
            ostracized: vec![false; n],
            excluded: vec![false; n * n],
            reputation: vec![params.initial_score; n],
            tally_ok: vec![0; n],
            tally_all: vec![0; n],
        }
    }

    pub fn members(&self) -> usize {
        self.n
    }

    pub fn params(&self) -> &TrustParams {
        &self.params
    }

    pub fn score(&self, observer: usize, subject: usize) -> f64 {
        self.score[observer * self.n + subject]
    }

    /// Whether `observer` has stopped exchanging data with `subject`.
    pub fn flagged(&self, observer: usize, subject: usize) -> bool {
        self.flagged[observer * self.n + subject]
    }

    pub fn is_ostracized(&self, node: usize) -> bool {
        self.ostracized[node]
    }

    pub fn reputation(&self, node: usize) -> f64 {
        self.reputation[node]
    }

    pub fn reputations(&self) -> &[f64] {
        &self.reputation
    }

    /// Removes every exchange between the two nodes, both directions.
    pub fn exclude_pair(&mut self, a: usize, b: usize) {
        self.excluded[a * self.n + b] = true;
        self.excluded[b * self.n + a] = true;
    }

    pub fn is_excluded(&self, observer: usize, subject: usize) -> bool {
        self.excluded[observer * self.n + subject]
    }

    /// Whether an exchange from `subject` to `observer` counts right now.
    pub fn exchanges(&self, observer: usize, subject: usize, probe_due: bool) -> bool {
        observer != subject
            && !self.is_excluded(observer, subject)
            && !self.ostracized[observer]
            && (probe_due || !self.flagged(observer, subject))
    }

    /// EMA step for one observed exchange; returns the new score.
    pub fn update_trust(&mut self, observer: usize, subject: usize, ok: bool) -> f64 {
        let k = observer * self.n + subject;
        let w = self.params.weight;
        let s = ((1.0 - w) * self.score[k] + if ok { w } else { 0.0 }).clamp(0.0, 1.0);
        self.score[k] = s;
        if self.flagged[k] {
            if s > self.params.threshold + self.params.hysteresis {
                self.flagged[k] = false;
            }
        } else if s < self.params.threshold {
            self.flagged[k] = true;
        }
        // both ends of the exchange inherit its outcome
        for node in [observer, subject] {
            self.tally_all[node] += 1;
            self.tally_ok[node] += ok as u32;
        }
        s
    }

    /// Closes an evaluation period: folds each node's success fraction into
    /// its reputation and recomputes spot-level ostracism by majority of the
    /// observers that still take part.
    pub fn end_period(&mut self) {
        let w = self.params.weight;
        for node in 0..self.n {
            if self.tally_all[node] > 0 {
                let frac = self.tally_ok[node] as f64 / self.tally_all[node] as f64;
                self.reputation[node] = (1.0 - w) * self.reputation[node] + w * frac;
            }
            self.tally_ok[node] = 0;
            self.tally_all[node] = 0;
        }
        let mut next = vec![false; self.n];
        for (subject, slot) in next.iter_mut().enumerate() {
            let mut voters = 0;
            let mut against = 0;
            for observer in 0..self.n {
                if observer == subject || self.is_excluded(observer, subject) {
                    continue;
                }
                voters += 1;
                against += self.flagged(observer, subject) as usize;
            }
            *slot = voters > 0 && 2 * against > voters;
        }
        if next.iter().all(|&o| o) {
            // keep the most trusted member so the spot still reports
            let keep = (0..self.n)
                .max_by(|&a, &b| self.reputation[a].total_cmp(&self.reputation[b]).then(b.cmp(&a)))
                .unwrap_or(0);
            next[keep] = false;
        }
        self.ostracized = next;
    }

    pub fn active_members(&self) -> Vec<usize> {
        (0..self.n).filter(|&i| !self.ostracized[i]).collect()
    }

    /// Node whose report the control center should prefer.
    pub fn most_trusted<I: IntoIterator<Item = usize>>(&self, candidates: I) -> Option<usize> {
        candidates
            .into_iter()
            .max_by(|&a, &b| self.reputation[a].total_cmp(&self.reputation[b]).then(b.cmp(&a)))
    }
}
