//! Brute-force reference results for single queries.
//!
//! Under duplicate suppression and synchronous hop rounds, the set of
//! nodes a flood reaches is exactly a pruned breadth-first ball around
//! the origin: replica holders are absorbing (reached and counted, never
//! expanded), every other node expands until the TTL budget runs out.
//! This module recomputes per-query outcomes that way, sharing no
//! traversal code with the engine, so each can catch the other's bugs.

use crate::topology::{OverlayGraph, ReplicaPlacement};
use crate::{NodeId, ObjectId};

/// Reference outcome of one query.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OracleResult {
    pub success: bool,
    /// Holder nodes reached, sorted ascending.
    pub hit_nodes: Vec<NodeId>,
    /// BFS depth of the shallowest holder reached.
    pub min_hit_distance: Option<u32>,
    /// Every node that processed the query (origin included), sorted.
    pub processed_nodes: Vec<NodeId>,
}

struct Ball {
    hit_nodes: Vec<NodeId>,
    min_hit_distance: Option<u32>,
    processed_nodes: Vec<NodeId>,
    forwarded: u64,
}

/// Level-by-level pruned BFS. Layer `d` holds the non-holder nodes first
/// reached at depth `d`; holders enter `hit_nodes` instead and are never
/// expanded. The origin always expands (it is not a hit even if it holds
/// the object). Transmission counting mirrors the flooding rule: an
/// expanding node sends to every neighbor except the one it was first
/// reached from — degree copies for the origin, degree − 1 otherwise —
/// and copies toward already-visited nodes still count as sent.
fn pruned_ball(
    graph: &OverlayGraph,
    placement: &ReplicaPlacement,
    origin: NodeId,
    object: ObjectId,
    initial_ttl: u32,
) -> Ball {
    let n = graph.node_count() as usize;
    let mut visited = vec![false; n];
    visited[origin as usize] = true;
    let mut processed_nodes = vec![origin];
    let mut hit_nodes = Vec::new();
    let mut min_hit_distance = None;
    let mut forwarded = 0u64;
    let mut layer = vec![origin];

    for depth in 0..initial_ttl {
        let mut next_layer = Vec::new();
        for &u in &layer {
            forwarded += graph.degree(u) as u64 - u64::from(u != origin);
            for &v in graph.neighbors(u) {
                if visited[v as usize] {
                    continue;
                }
                visited[v as usize] = true;
                processed_nodes.push(v);
                if placement.holds(v, object) {
                    hit_nodes.push(v);
                    min_hit_distance.get_or_insert(depth + 1);
                } else {
                    next_layer.push(v);
                }
            }
        }
        layer = next_layer;
        if layer.is_empty() {
            break;
        }
    }

    hit_nodes.sort_unstable();
    processed_nodes.sort_unstable();
    Ball {
        hit_nodes,
        min_hit_distance,
        processed_nodes,
        forwarded,
    }
}

/// Computes the reference outcome of a single query by pruned BFS.
pub fn oracle_query(
    graph: &OverlayGraph,
    placement: &ReplicaPlacement,
    origin: NodeId,
    object: ObjectId,
    initial_ttl: u32,
) -> OracleResult {
    let ball = pruned_ball(graph, placement, origin, object, initial_ttl);
    OracleResult {
        success: !ball.hit_nodes.is_empty(),
        hit_nodes: ball.hit_nodes,
        min_hit_distance: ball.min_hit_distance,
        processed_nodes: ball.processed_nodes,
    }
}

/// Exact number of link transmissions the query causes under synchronous
/// semantics, duplicates included.
pub fn oracle_forwarded_count(
    graph: &OverlayGraph,
    placement: &ReplicaPlacement,
    origin: NodeId,
    object: ObjectId,
    initial_ttl: u32,
) -> u64 {
    pruned_ball(graph, placement, origin, object, initial_ttl).forwarded
}
