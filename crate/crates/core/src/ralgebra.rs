//! Lexicographic routing algebra over (hops, Bell pairs/s, overhead) with a
//! generalized Dijkstra solver and an exhaustive oracle.

use std::cmp::Ordering;
use std::collections::{BTreeSet, BinaryHeap};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub u32);

impl std::fmt::Display for NodeId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Error)]
pub enum RoutingError {
    #[error("node {0} is not part of the topology")]
    UnknownNode(NodeId),
    #[error("no path from {src} to {dst}")]
    Unreachable { src: NodeId, dst: NodeId },
    #[error("oracle enumeration limited to {max} nodes, topology has {nodes}")]
    TooLarge { nodes: usize, max: usize },
    #[error("self-loop on node {0}")]
    SelfLoop(NodeId),
    #[error("invalid link label: {0}")]
    InvalidLabel(String),
    #[error("topology file: {0}")]
    Io(#[from] std::io::Error),
    #[error("topology JSON at {path}: {source}")]
    Json {
        path: String,
        source: serde_json::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkLabel {
    pub bell_pairs_per_s: f64,
    pub overhead: f64,
}

impl LinkLabel {
    pub fn new(bell_pairs_per_s: f64, overhead: f64) -> Result<Self, RoutingError> {
        if !(bell_pairs_per_s > 0.0 && bell_pairs_per_s.is_finite()) {
            return Err(RoutingError::InvalidLabel(format!(
                "bell_pairs_per_s must be positive, got {bell_pairs_per_s}"
            )));
        }
        if !(overhead >= 0.0 && overhead.is_finite()) {
            return Err(RoutingError::InvalidLabel(format!(
                "overhead must be non-negative, got {overhead}"
            )));
        }
        Ok(Self {
            bell_pairs_per_s,
            overhead,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PathSignature {
    pub hops: u32,
    pub bell_pairs: f64,
    pub overhead: f64,
}

impl PathSignature {
    pub const EMPTY: PathSignature = PathSignature {
        hops: 0,
        bell_pairs: 0.0,
        overhead: 0.0,
    };
}

impl std::fmt::Display for PathSignature {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "<{}, {}, {}>", self.hops, self.bell_pairs, self.overhead)
    }
}

pub fn extend(label: LinkLabel, sig: PathSignature) -> PathSignature {
    PathSignature {
        hops: sig.hops + 1,
        bell_pairs: label.bell_pairs_per_s + sig.bell_pairs,
        overhead: label.overhead + sig.overhead,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preference {
    ALessPreferred,
    Equal,
    AMorePreferred,
}

/// Smaller components win, compared hops first.
pub fn prefer(a: &PathSignature, b: &PathSignature) -> Preference {
    match cost_order(a, b) {
        Ordering::Less => Preference::AMorePreferred,
        Ordering::Equal => Preference::Equal,
        Ordering::Greater => Preference::ALessPreferred,
    }
}

fn cost_order(a: &PathSignature, b: &PathSignature) -> Ordering {
    a.hops
        .cmp(&b.hops)
        .then(a.bell_pairs.total_cmp(&b.bell_pairs))
        .then(a.overhead.total_cmp(&b.overhead))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuantumLink {
    pub from: NodeId,
    pub to: NodeId,
    #[serde(flatten)]
    pub label: LinkLabel,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuantumTopology {
    nodes: BTreeSet<NodeId>,
    links: Vec<QuantumLink>,
    #[serde(skip)]
    incoming: Vec<Vec<usize>>,
    #[serde(skip)]
    outgoing: Vec<Vec<usize>>,
    #[serde(skip)]
    index: Vec<NodeId>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Route {
    pub path: Vec<NodeId>,
    pub signature: PathSignature,
}

impl Route {
    fn key_cmp(&self, other: &Route) -> Ordering {
        cost_order(&self.signature, &other.signature).then_with(|| self.path.cmp(&other.path))
    }
}

pub const ORACLE_MAX_NODES: usize = 12;

impl QuantumTopology {
    pub fn new(
        nodes: impl IntoIterator<Item = NodeId>,
        links: Vec<QuantumLink>,
    ) -> Result<Self, RoutingError> {
        let mut topo = QuantumTopology {
            nodes: nodes.into_iter().collect(),
            links,
            ..Default::default()
        };
        topo.rebuild()?;
        Ok(topo)
    }

    pub fn from_json_str(text: &str, origin: &str) -> Result<Self, RoutingError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let mut topo: QuantumTopology =
            serde_path_to_error::deserialize(de).map_err(|e| RoutingError::Json {
                path: format!("{origin}: {}", e.path()),
                source: e.into_inner(),
            })?;
        topo.rebuild()?;
        Ok(topo)
    }

    pub fn load(path: &Path) -> Result<Self, RoutingError> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json_str(&text, &path.display().to_string())
    }

    fn rebuild(&mut self) -> Result<(), RoutingError> {
        self.index = self.nodes.iter().copied().collect();
        self.incoming = vec![Vec::new(); self.index.len()];
        self.outgoing = vec![Vec::new(); self.index.len()];
        for (k, link) in self.links.iter().enumerate() {
            if link.from == link.to {
                return Err(RoutingError::SelfLoop(link.from));
            }
            LinkLabel::new(link.label.bell_pairs_per_s, link.label.overhead)?;
            let from = self.slot(link.from)?;
            let to = self.slot(link.to)?;
            self.outgoing[from].push(k);
            self.incoming[to].push(k);
        }
        Ok(())
    }

    fn slot(&self, node: NodeId) -> Result<usize, RoutingError> {
        self.index
            .binary_search(&node)
            .map_err(|_| RoutingError::UnknownNode(node))
    }

    pub fn nodes(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.nodes.iter().copied()
    }

    pub fn links(&self) -> &[QuantumLink] {
        &self.links
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }
}

struct Frontier(Route, usize);

impl PartialEq for Frontier {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Frontier {}
impl PartialOrd for Frontier {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Frontier {
    // reversed so the max-heap pops the most preferred route
    fn cmp(&self, other: &Self) -> Ordering {
        other.0.key_cmp(&self.0)
    }
}

/// Most preferred loop-free path. The search grows routes backwards from the
/// destination, extending signatures the same way routing updates propagate.
/// Exact ties go to the smaller node-id sequence.
pub fn best_path(topo: &QuantumTopology, src: NodeId, dst: NodeId) -> Result<Route, RoutingError> {
    let s = topo.slot(src)?;
    let d = topo.slot(dst)?;
    let mut best: Vec<Option<Route>> = vec![None; topo.index.len()];
    let mut settled = vec![false; topo.index.len()];
    let mut heap = BinaryHeap::new();
    let start = Route {
        path: vec![dst],
        signature: PathSignature::EMPTY,
    };
    best[d] = Some(start.clone());
    heap.push(Frontier(start, d));
    while let Some(Frontier(route, u)) = heap.pop() {
        if settled[u] {
            continue;
        }
        settled[u] = true;
        if u == s {
            return Ok(route);
        }
        for &k in &topo.incoming[u] {
            let link = &topo.links[k];
            let v = topo.slot(link.from)?;
            if settled[v] {
                continue;
            }
            let mut path = Vec::with_capacity(route.path.len() + 1);
            path.push(link.from);
            path.extend_from_slice(&route.path);
            let cand = Route {
                path,
                signature: extend(link.label, route.signature),
            };
            let better = match &best[v] {
                None => true,
                Some(cur) => cand.key_cmp(cur) == Ordering::Less,
            };
            if better {
                best[v] = Some(cand.clone());
                heap.push(Frontier(cand, v));
            }
        }
    }
    Err(RoutingError::Unreachable { src, dst })
}

/// Every simple path from `src` to `dst`, one entry per distinct link
/// sequence, signatures folded from the destination end.
pub fn enumerate_paths_oracle(
    topo: &QuantumTopology,
    src: NodeId,
    dst: NodeId,
) -> Result<Vec<Route>, RoutingError> {
    if topo.node_count() > ORACLE_MAX_NODES {
        return Err(RoutingError::TooLarge {
            nodes: topo.node_count(),
            max: ORACLE_MAX_NODES,
        });
    }
    let s = topo.slot(src)?;
    topo.slot(dst)?;
    let mut out = Vec::new();
    if src == dst {
        out.push(Route {
            path: vec![src],
            signature: PathSignature::EMPTY,
        });
        return Ok(out);
    }
    let mut visited = vec![false; topo.index.len()];
    let mut links = Vec::new();
    visited[s] = true;
    walk(topo, s, dst, &mut visited, &mut links, &mut out);
    Ok(out)
}

fn walk(
    topo: &QuantumTopology,
    at: usize,
    dst: NodeId,
    visited: &mut [bool],
    links: &mut Vec<usize>,
    out: &mut Vec<Route>,
) {
    for &k in &topo.outgoing[at] {
        let link = topo.links[k];
        let next = topo.slot(link.to).expect("validated");
        if visited[next] {
            continue;
        }
        links.push(k);
        if link.to == dst {
            let signature = links
                .iter()
                .rev()
                .fold(PathSignature::EMPTY, |sig, &l| extend(topo.links[l].label, sig));
            let mut path = vec![topo.links[links[0]].from];
            path.extend(links.iter().map(|&l| topo.links[l].to));
            out.push(Route { path, signature });
        } else {
            visited[next] = true;
            walk(topo, next, dst, visited, links, out);
            visited[next] = false;
        }
        links.pop();
    }
}

/// Oracle answer: the most preferred enumerated route.
pub fn oracle_best(routes: &[Route]) -> Option<&Route> {
    routes.iter().min_by(|a, b| a.key_cmp(b))
}
