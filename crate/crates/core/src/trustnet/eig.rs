//! Exponential information gathering with f+1 synchronous rounds. `None`
//! stands for a missing value and for a node without a strict majority.

use std::sync::{Arc, Mutex, OnceLock};

use rand::Rng;

/// Label layout of the EIG tree for a given (n, levels). Level r holds every
/// sequence of r distinct members.
#[derive(Debug)]
pub struct EigShape {
    pub n: usize,
    pub levels: usize,
    /// Per level: (parent index at the level above, last member).
    nodes: Vec<Vec<(u32, u8)>>,
    /// Per level below the last: first child index and child count.
    children: Vec<Vec<(u32, u8)>>,
    /// Per level: member set of each label as a bitmask.
    members: Vec<Vec<u16>>,
}

impl EigShape {
    pub fn new(n: usize, levels: usize) -> Self {
        assert!(n <= 16 && levels >= 1 && levels <= n);
        let mut nodes: Vec<Vec<(u32, u8)>> = Vec::with_capacity(levels);
        let mut members: Vec<Vec<u16>> = Vec::with_capacity(levels);
        let mut children = Vec::with_capacity(levels);
        nodes.push((0..n).map(|j| (0, j as u8)).collect());
        members.push((0..n).map(|j| 1u16 << j).collect());
        for r in 1..levels {
            let mut next = Vec::new();
            let mut next_mask = Vec::new();
            let mut kids = Vec::with_capacity(nodes[r - 1].len());
            for (p, &mask) in members[r - 1].iter().enumerate() {
                let first = next.len() as u32;
                for j in 0..n {
                    if mask & (1 << j) == 0 {
                        next.push((p as u32, j as u8));
                        next_mask.push(mask | (1 << j));
                    }
                }
                kids.push((first, (next.len() as u32 - first) as u8));
            }
            children.push(kids);
            nodes.push(next);
            members.push(next_mask);
        }
        Self {
            n,
            levels,
            nodes,
            children,
            members,
        }
    }

    /// Shared, lazily built shape.
    pub fn cached(n: usize, levels: usize) -> Arc<EigShape> {
        static CACHE: OnceLock<Mutex<Vec<Arc<EigShape>>>> = OnceLock::new();
        let cache = CACHE.get_or_init(|| Mutex::new(Vec::new()));
        let mut guard = cache.lock().expect("shape cache poisoned");
        if let Some(s) = guard.iter().find(|s| s.n == n && s.levels == levels) {
            return s.clone();
        }
        let s = Arc::new(EigShape::new(n, levels));
        guard.push(s.clone());
        s
    }

    /// Member set of label `idx` at `level`, as a bitmask.
    pub fn label_members(&self, level: usize, idx: usize) -> u16 {
        self.members[level][idx]
    }

    pub fn level_len(&self, level: usize) -> usize {
        self.nodes[level].len()
    }

    /// Values relayed per message in round `r` (1-based).
    pub fn entries_in_round(n: usize, r: usize) -> usize {
        (1..r).map(|k| n - k).product()
    }
}

pub fn f_max(n: usize) -> usize {
    n.saturating_sub(1) / 3
}

fn majority(values: impl Iterator<Item = Option<bool>>) -> Option<bool> {
    let (mut ones, mut zeros, mut total) = (0usize, 0usize, 0usize);
    for v in values {
        total += 1;
        match v {
            Some(true) => ones += 1,
            Some(false) => zeros += 1,
            None => {}
        }
    }
    if 2 * ones > total {
        Some(true)
    } else if 2 * zeros > total {
        Some(false)
    } else {
        None
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Behavior {
    /// Follows the protocol with its own input.
    Honest,
    /// Sends nothing from round `from_round` on.
    Crash { from_round: usize },
    /// Sends random values, chosen independently per receiver and label.
    Byzantine,
}

/// Full EIG run with arbitrary member behavior. Returns every member's
/// decision. `delivered(round, from, to)` reports whether that message
/// arrived; self-delivery is implicit.
pub fn run_general<R: Rng + ?Sized, D: FnMut(usize, usize, usize) -> bool>(
    inputs: &[bool],
    behaviors: &[Behavior],
    rounds: usize,
    mut delivered: D,
    rng: &mut R,
) -> Vec<Option<bool>> {
    let n = inputs.len();
    assert_eq!(behaviors.len(), n);
    let shape = EigShape::cached(n, rounds);
    // vals[i][level][label]
    let mut vals: Vec<Vec<Vec<Option<bool>>>> = vec![Vec::with_capacity(rounds); n];
    for r in 0..rounds {
        let round = r + 1;
        let mut arrived = vec![false; n * n];
        for j in 0..n {
            let silent = matches!(behaviors[j], Behavior::Crash { from_round } if round >= from_round);
            for i in 0..n {
                arrived[j * n + i] = !silent && (i == j || delivered(round, j, i));
            }
        }
        let mut level_vals = Vec::with_capacity(n);
        for i in 0..n {
            let row: Vec<Option<bool>> = shape.nodes[r]
                .iter()
                .map(|&(parent, last)| {
                    let j = last as usize;
                    if !arrived[j * n + i] {
                        return None;
                    }
                    match behaviors[j] {
                        Behavior::Byzantine if i != j => Some(rng.random()),
                        _ if r == 0 => Some(inputs[j]),
                        _ => vals[j][r - 1][parent as usize],
                    }
                })
                .collect();
            level_vals.push(row);
        }
        for (i, row) in level_vals.into_iter().enumerate() {
            vals[i].push(row);
        }
    }
    (0..n).map(|i| resolve_tree(&shape, &vals[i])).collect()
}

fn resolve_tree(shape: &EigShape, vals: &[Vec<Option<bool>>]) -> Option<bool> {
    let last = shape.levels - 1;
    let mut resolved = vals[last].clone();
    for level in (0..last).rev() {
        let kids = &shape.children[level];
        resolved = kids
            .iter()
            .map(|&(first, count)| {
                let first = first as usize;
                majority(resolved[first..first + count as usize].iter().copied())
            })
            .collect();
    }
    majority(resolved.into_iter())
}

/// Classical agreement among members that relay honestly; faults are wrong
/// inputs (soft) or silence (crash). Delivery bitmasks are filled in round
/// by round, then any member's decision is resolved from the delivery
/// pattern alone without materialising the tree.
#[derive(Debug, Clone)]
pub struct ClassicalRun {
    n: usize,
    rounds: usize,
    inputs: Vec<Option<bool>>,
    /// delivered[round][from] = receiver bitmask.
    delivered: Vec<Vec<u16>>,
    lossless_after_first: bool,
}

impl ClassicalRun {
    /// `inputs[i] = None` marks a crashed member.
    pub fn new(inputs: Vec<Option<bool>>) -> Self {
        let n = inputs.len();
        assert!((1..=16).contains(&n));
        let rounds = f_max(n) + 1;
        Self {
            n,
            rounds,
            inputs,
            delivered: vec![vec![0; n]; rounds],
            lossless_after_first: true,
        }
    }

    pub fn members(&self) -> usize {
        self.n
    }

    pub fn rounds(&self) -> usize {
        self.rounds
    }

    pub fn sends(&self, member: usize) -> bool {
        self.inputs[member].is_some()
    }

    /// Bytes of one round-`r` message.
    pub fn message_bytes(&self, r: usize, header: u32, entry: u32) -> u32 {
        header + entry * EigShape::entries_in_round(self.n, r) as u32
    }

    pub fn record(&mut self, r: usize, from: usize, to: usize, ok: bool) {
        if ok {
            self.delivered[r - 1][from] |= 1 << to;
        } else if r > 1 && self.sends(from) {
            self.lossless_after_first = false;
        }
    }

    fn arrived(&self, r: usize, from: usize, to: usize) -> bool {
        from == to || self.delivered[r - 1][from] & (1 << to) != 0
    }

    /// Decision of `member`, or `None` when its tree has no majority.
    pub fn decide(&self, member: usize) -> Option<bool> {
        let n = self.n;
        let others = |mask: u16| (0..n).filter(move |j| mask & (1 << j) == 0);
        if self.rounds > 1 && self.lossless_after_first && self.inputs.iter().all(Option::is_some) {
            // every chain past round one is intact, so a first-level
            // subtree resolves to the origin's input iff a strict majority
            // of its children heard that input in round one
            return majority((0..n).map(|j| {
                let heard = others(1 << j).filter(|&k| self.arrived(1, j, k)).count();
                if 2 * heard > n - 1 {
                    self.inputs[j]
                } else {
                    None
                }
            }));
        }
        majority((0..n).map(|j| self.resolve(member, j, 1 << j, j, 1)))
    }

    // Resolved value at `member` of a label with member set `mask` whose
    // first element is `origin` and last element `last`; `depth` is its
    // length. The value is defined only if the relay chain was intact up to
    // `last`.
    fn resolve(&self, member: usize, origin: usize, mask: u16, last: usize, depth: usize) -> Option<bool> {
        let input = self.inputs[origin]?;
        if depth == self.rounds {
            return self.arrived(depth, last, member).then_some(input);
        }
        let mut total = 0;
        let mut agree = 0;
        for k in (0..self.n).filter(|j| mask & (1 << j) == 0) {
            total += 1;
            // child label ends in k: `last` must have reached k this round
            if !self.arrived(depth, last, k) || self.inputs[k].is_none() {
                continue;
            }
            // honest relays only ever carry the origin's input
            if self.resolve(member, origin, mask | (1 << k), k, depth + 1).is_some() {
                agree += 1;
            }
        }
        (2 * agree > total).then_some(input)
    }
}
