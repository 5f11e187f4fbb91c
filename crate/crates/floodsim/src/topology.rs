//! Overlay graph generation and replica placement.
//!
//! The overlay is an undirected simple graph with a uniform degree
//! distribution, built with a configuration model (stub pairing with
//! bounded re-pairing, then connectivity repair). Replicas are placed
//! uniformly at random, exactly `replication` distinct holders per object.

use std::collections::HashSet;
use std::io::{self, BufRead, Write};

use num_rational::Ratio;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::{NodeId, ObjectId};

/// Retries to re-pair a conflicting stub pair before dropping it.
const STUB_REPAIR_RETRIES: usize = 32;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TopologyError {
    #[error("degree spec infeasible: max degree {max_degree} must be < node count {node_count}")]
    InfeasibleDegrees { max_degree: u32, node_count: u32 },
    #[error("node count {0} too small, need at least 2")]
    TooFewNodes(u32),
    #[error("min degree must be >= 1")]
    ZeroMinDegree,
    #[error("min degree {min} exceeds max degree {max}")]
    DegreeOrder { min: u32, max: u32 },
    #[error("replication {replication} exceeds node count {node_count}")]
    ReplicationExceedsNodes { replication: u32, node_count: u32 },
    #[error("replication must be >= 1")]
    ZeroReplication,
    #[error("invalid edge list: {0}")]
    InvalidEdgeList(String),
    #[error("invalid placement: {0}")]
    InvalidPlacement(String),
    #[error("edge list i/o: {0}")]
    Io(String),
}

/// Inclusive degree range for the uniform degree distribution.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DegreeSpec {
    min_degree: u32,
    max_degree: u32,
}

impl DegreeSpec {
    pub fn new(min_degree: u32, max_degree: u32) -> Result<Self, TopologyError> {
        if min_degree == 0 {
            return Err(TopologyError::ZeroMinDegree);
        }
        if min_degree > max_degree {
            return Err(TopologyError::DegreeOrder {
                min: min_degree,
                max: max_degree,
            });
        }
        Ok(Self {
            min_degree,
            max_degree,
        })
    }

    pub fn min_degree(&self) -> u32 {
        self.min_degree
    }

    pub fn max_degree(&self) -> u32 {
        self.max_degree
    }
}

/// Immutable undirected overlay graph over dense node ids.
///
/// Adjacency lists are sorted ascending; the graph is simple (no self
/// loops, no parallel edges) and connected.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OverlayGraph {
    adjacency: Vec<Vec<NodeId>>,
    edge_count: usize,
    repair_edge_count: usize,
    dropped_stub_pairs: usize,
}

impl OverlayGraph {
    /// Builds a graph from an explicit edge list, validating simplicity,
    /// symmetry and connectivity.
    pub fn from_edges(node_count: u32, edges: &[(NodeId, NodeId)]) -> Result<Self, TopologyError> {
        if node_count < 2 {
            return Err(TopologyError::TooFewNodes(node_count));
        }
        let n = node_count as usize;
        let mut adjacency = vec![Vec::new(); n];
        let mut seen = HashSet::with_capacity(edges.len());
        for &(u, v) in edges {
            if u == v {
                return Err(TopologyError::InvalidEdgeList(format!("self loop at {u}")));
            }
            if u as usize >= n || v as usize >= n {
                return Err(TopologyError::InvalidEdgeList(format!(
                    "edge ({u}, {v}) out of range for {node_count} nodes"
                )));
            }
            if !seen.insert((u.min(v), u.max(v))) {
                return Err(TopologyError::InvalidEdgeList(format!(
                    "duplicate edge ({u}, {v})"
                )));
            }
            adjacency[u as usize].push(v);
            adjacency[v as usize].push(u);
        }
        for list in &mut adjacency {
            list.sort_unstable();
        }
        let graph = Self {
            adjacency,
            edge_count: seen.len(),
            repair_edge_count: 0,
            dropped_stub_pairs: 0,
        };
        if !graph.is_connected() {
            return Err(TopologyError::InvalidEdgeList(
                "graph is not connected".into(),
            ));
        }
        Ok(graph)
    }

    pub fn node_count(&self) -> u32 {
        self.adjacency.len() as u32
    }

    pub fn edge_count(&self) -> usize {
        self.edge_count
    }

    /// Neighbors of `node`, sorted ascending.
    pub fn neighbors(&self, node: NodeId) -> &[NodeId] {
        &self.adjacency[node as usize]
    }

    pub fn degree(&self, node: NodeId) -> usize {
        self.adjacency[node as usize].len()
    }

    /// Edges added by the connectivity repair pass.
    pub fn repair_edge_count(&self) -> usize {
        self.repair_edge_count
    }

    /// Stub pairs discarded during configuration-model pairing.
    pub fn dropped_stub_pairs(&self) -> usize {
        self.dropped_stub_pairs
    }

    /// All edges as `(u, v)` with `u < v`, ascending.
    pub fn edges(&self) -> impl Iterator<Item = (NodeId, NodeId)> + '_ {
        self.adjacency.iter().enumerate().flat_map(|(u, list)| {
            let u = u as NodeId;
            list.iter()
                .copied()
                .filter(move |&v| u < v)
                .map(move |v| (u, v))
        })
    }

    /// BFS from node 0 reaches every node.
    pub fn is_connected(&self) -> bool {
        let n = self.adjacency.len();
        if n == 0 {
            return false;
        }
        let mut visited = vec![false; n];
        let mut queue = std::collections::VecDeque::new();
        visited[0] = true;
        queue.push_back(0u32);
        let mut reached = 1usize;
        while let Some(u) = queue.pop_front() {
            for &v in &self.adjacency[u as usize] {
                if !visited[v as usize] {
                    visited[v as usize] = true;
                    reached += 1;
                    queue.push_back(v);
                }
            }
        }
        reached == n
    }

    /// Writes the edge list as text: a `nodes=N` header, then one `u v`
    /// pair per line with `u < v`.
    pub fn write_edge_list<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "nodes={}", self.node_count())?;
        for (u, v) in self.edges() {
            writeln!(w, "{u} {v}")?;
        }
        Ok(())
    }

    /// Reads a graph in the `write_edge_list` format.
    pub fn read_edge_list<R: BufRead>(r: R) -> Result<Self, TopologyError> {
        let mut lines = r.lines();
        let header = lines
            .next()
            .ok_or_else(|| TopologyError::InvalidEdgeList("empty file".into()))?
            .map_err(|e| TopologyError::Io(e.to_string()))?;
        let node_count: u32 = header
            .strip_prefix("nodes=")
            .and_then(|s| s.trim().parse().ok())
            .ok_or_else(|| {
                TopologyError::InvalidEdgeList(format!("bad header line {header:?}"))
            })?;
        let mut edges = Vec::new();
        for line in lines {
            let line = line.map_err(|e| TopologyError::Io(e.to_string()))?;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let mut it = line.split_whitespace();
            let (u, v) = match (it.next(), it.next(), it.next()) {
                (Some(u), Some(v), None) => (u, v),
                _ => {
                    return Err(TopologyError::InvalidEdgeList(format!(
                        "bad edge line {line:?}"
                    )))
                }
            };
            let u: u32 = u
                .parse()
                .map_err(|_| TopologyError::InvalidEdgeList(format!("bad node id {u:?}")))?;
            let v: u32 = v
                .parse()
                .map_err(|_| TopologyError::InvalidEdgeList(format!("bad node id {v:?}")))?;
            edges.push((u, v));
        }
        Self::from_edges(node_count, &edges)
    }
}

/// Generates a connected random overlay with degrees drawn uniformly from
/// the given range. Deterministic in `(node_count, degrees, rng_seed)`.
///
/// Construction: draw per-node target degrees, fix parity, pair stubs
/// configuration-model style (conflicting pairs are re-paired a bounded
/// number of times, then dropped), then join remaining components with
/// extra edges between uniformly chosen nodes until connected.
pub fn generate_graph(
    node_count: u32,
    degrees: DegreeSpec,
    rng_seed: u64,
) -> Result<OverlayGraph, TopologyError> {
    if node_count < 2 {
        return Err(TopologyError::TooFewNodes(node_count));
    }
    if degrees.max_degree >= node_count {
        return Err(TopologyError::InfeasibleDegrees {
            max_degree: degrees.max_degree,
            node_count,
        });
    }
    let n = node_count as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);

    let mut targets: Vec<u32> = (0..n)
        .map(|_| rng.random_range(degrees.min_degree..=degrees.max_degree))
        .collect();
    if targets.iter().map(|&d| d as u64).sum::<u64>() % 2 == 1 {
        let pick = rng.random_range(0..n);
        if targets[pick] < degrees.max_degree {
            targets[pick] += 1;
        } else {
            targets[pick] -= 1;
        }
    }

    let mut stubs: Vec<NodeId> = Vec::with_capacity(targets.iter().map(|&d| d as usize).sum());
    for (node, &d) in targets.iter().enumerate() {
        stubs.extend(std::iter::repeat_n(node as NodeId, d as usize));
    }
    stubs.shuffle(&mut rng);

    let mut edge_set: HashSet<(NodeId, NodeId)> = HashSet::with_capacity(stubs.len() / 2);
    let mut adjacency = vec![Vec::new(); n];
    let mut dropped_stub_pairs = 0usize;
    let mut i = 0;
    while i + 1 < stubs.len() {
        let mut accepted = false;
        for _ in 0..=STUB_REPAIR_RETRIES {
            let u = stubs[i];
            let v = stubs[i + 1];
            let key = (u.min(v), u.max(v));
            if u != v && !edge_set.contains(&key) {
                edge_set.insert(key);
                adjacency[u as usize].push(v);
                adjacency[v as usize].push(u);
                accepted = true;
                break;
            }
            if i + 2 >= stubs.len() {
                break; // nothing left to swap with
            }
            let j = rng.random_range(i + 2..stubs.len());
            stubs.swap(i + 1, j);
        }
        if !accepted {
            dropped_stub_pairs += 1;
        }
        i += 2;
    }

    // Join components with extra edges until the graph is connected.
    let mut repair_edge_count = 0usize;
    loop {
        let comp = component_labels(&adjacency);
        let max_label = *comp.iter().max().unwrap();
        if max_label == 0 {
            break;
        }
        let u = rng.random_range(0..n) as NodeId;
        let others: Vec<NodeId> = (0..n as NodeId)
            .filter(|&v| comp[v as usize] != comp[u as usize])
            .collect();
        let v = others[rng.random_range(0..others.len())];
        edge_set.insert((u.min(v), u.max(v)));
        adjacency[u as usize].push(v);
        adjacency[v as usize].push(u);
        repair_edge_count += 1;
    }

    for list in &mut adjacency {
        list.sort_unstable();
    }
    Ok(OverlayGraph {
        adjacency,
        edge_count: edge_set.len(),
        repair_edge_count,
        dropped_stub_pairs,
    })
}

/// Connected-component label per node, labels dense from 0 in node order.
fn component_labels(adjacency: &[Vec<NodeId>]) -> Vec<u32> {
    let n = adjacency.len();
    let mut label = vec![u32::MAX; n];
    let mut next = 0u32;
    let mut queue = std::collections::VecDeque::new();
    for start in 0..n {
        if label[start] != u32::MAX {
            continue;
        }
        label[start] = next;
        queue.push_back(start as NodeId);
        while let Some(u) = queue.pop_front() {
            for &v in &adjacency[u as usize] {
                if label[v as usize] == u32::MAX {
                    label[v as usize] = next;
                    queue.push_back(v);
                }
            }
        }
        next += 1;
    }
    label
}

/// Replica placement: exactly `replication` distinct holders per object,
/// chosen uniformly without replacement, plus the inverse per-node store.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReplicaPlacement {
    object_count: u32,
    replication: u32,
    holders: Vec<Vec<NodeId>>,
    store: Vec<Vec<ObjectId>>,
}

impl ReplicaPlacement {
    /// Builds a placement from explicit holder sets, one per object. All
    /// sets must have the same size (the replication factor) and contain
    /// distinct in-range nodes. Mostly useful for tests and imports.
    pub fn from_holders(
        node_count: u32,
        holders: Vec<Vec<NodeId>>,
    ) -> Result<Self, TopologyError> {
        let replication = holders.first().map_or(0, |h| h.len()) as u32;
        if replication == 0 {
            return Err(TopologyError::ZeroReplication);
        }
        if replication > node_count {
            return Err(TopologyError::ReplicationExceedsNodes {
                replication,
                node_count,
            });
        }
        let mut holders = holders;
        let mut store = vec![Vec::new(); node_count as usize];
        for (object, set) in holders.iter_mut().enumerate() {
            set.sort_unstable();
            if set.len() as u32 != replication || set.windows(2).any(|w| w[0] == w[1]) {
                return Err(TopologyError::InvalidPlacement(format!(
                    "object {object} needs {replication} distinct holders"
                )));
            }
            if set.last().is_some_and(|&n| n >= node_count) {
                return Err(TopologyError::InvalidPlacement(format!(
                    "object {object} has an out-of-range holder"
                )));
            }
            for &node in set.iter() {
                store[node as usize].push(object as ObjectId);
            }
        }
        Ok(Self {
            object_count: holders.len() as u32,
            replication,
            holders,
            store,
        })
    }

    pub fn object_count(&self) -> u32 {
        self.object_count
    }

    pub fn replication(&self) -> u32 {
        self.replication
    }

    /// Holder nodes of `object`, sorted ascending.
    pub fn holders(&self, object: ObjectId) -> &[NodeId] {
        &self.holders[object as usize]
    }

    /// Objects stored at `node`, sorted ascending.
    pub fn store(&self, node: NodeId) -> &[ObjectId] {
        &self.store[node as usize]
    }

    pub fn holds(&self, node: NodeId, object: ObjectId) -> bool {
        self.holders[object as usize].binary_search(&node).is_ok()
    }

    /// Writes one `object_id: node_id,node_id,...` line per object.
    pub fn write_holders<W: Write>(&self, mut w: W) -> io::Result<()> {
        for (object, holders) in self.holders.iter().enumerate() {
            let list: Vec<String> = holders.iter().map(|n| n.to_string()).collect();
            writeln!(w, "{object}: {}", list.join(","))?;
        }
        Ok(())
    }
}

/// Places `object_count` objects on the overlay, each on `replication`
/// distinct uniformly chosen holders. Deterministic in the inputs.
pub fn place_replicas(
    graph: &OverlayGraph,
    object_count: u32,
    replication: u32,
    rng_seed: u64,
) -> Result<ReplicaPlacement, TopologyError> {
    if replication == 0 {
        return Err(TopologyError::ZeroReplication);
    }
    if replication > graph.node_count() {
        return Err(TopologyError::ReplicationExceedsNodes {
            replication,
            node_count: graph.node_count(),
        });
    }
    let n = graph.node_count() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut holders = Vec::with_capacity(object_count as usize);
    let mut store = vec![Vec::new(); n];
    for object in 0..object_count {
        let mut chosen: Vec<NodeId> = rand::seq::index::sample(&mut rng, n, replication as usize)
            .iter()
            .map(|i| i as NodeId)
            .collect();
        chosen.sort_unstable();
        for &node in &chosen {
            store[node as usize].push(object);
        }
        holders.push(chosen);
    }
    Ok(ReplicaPlacement {
        object_count,
        replication,
        holders,
        store,
    })
}

/// Expected per-node store size: `object_count * replication / node_count`,
/// kept exact as a rational.
pub fn expected_store_size(object_count: u32, replication: u32, node_count: u32) -> Ratio<u64> {
    assert!(node_count > 0, "node_count must be positive");
    Ratio::new(
        object_count as u64 * replication as u64,
        node_count as u64,
    )
}
