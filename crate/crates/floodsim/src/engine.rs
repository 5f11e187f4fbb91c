//! Query execution in deterministic synchronous hop rounds.
//!
//! Round 0 originates the query; round k delivers every copy sent in
//! round k − 1, processing each node's arrivals in ascending sender
//! order (a canonical tie-break — the metrics are order-independent,
//! the canonical order makes traces bit-identical everywhere). A query
//! ends when no copies remain in flight, after at most `initial_ttl`
//! rounds.
//!
//! Queries never interact: duplicate-suppression state is per query, so
//! a workload may execute them in any order or in parallel without
//! changing a single outcome.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use thiserror::Error;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

use crate::protocol::{self, NodeState, QueryPacket, ReceiveAction};
use crate::topology::{OverlayGraph, ReplicaPlacement};
use crate::{NodeId, ObjectId, QueryId};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum EngineError {
    #[error("origin node {origin} out of range for {node_count} nodes")]
    InvalidOrigin { origin: NodeId, node_count: u32 },
    #[error("object {object} out of range for {object_count} objects")]
    InvalidObject {
        object: ObjectId,
        object_count: u32,
    },
    #[error("workload needs at least one query")]
    EmptyWorkload,
    #[error("workload needs at least one generator node")]
    NoGenerators,
    #[error("generator nodes must be distinct and in range")]
    BadGenerators,
    #[error("poisson rate must be positive and finite")]
    BadRate,
    #[error("placement has no objects to query")]
    NoObjects,
}

/// Knobs that change search semantics (not scale).
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SearchOptions {
    /// Let the originator satisfy the query from its own store: holding
    /// the object means instant success, zero hops, no flooding. Off by
    /// default — a query always floods, the origin never hits.
    pub origin_local_hit: bool,
}

/// Everything one query did.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QueryOutcome {
    pub query_id: QueryId,
    pub origin: NodeId,
    pub object: ObjectId,
    pub initial_ttl: u32,
    /// Nodes where the query scored a hit, sorted ascending.
    pub hit_nodes: Vec<NodeId>,
    /// Hop count of the earliest hit.
    pub first_hit_hops: Option<u32>,
    /// Sum of hop counts over all hits (for per-hit averages).
    pub hit_hops_total: u64,
    /// Link transmissions this query caused, duplicates included.
    pub forwarded_packets: u64,
    /// Rounds until no copies remained in flight (flood depth).
    pub rounds_elapsed: u32,
}

impl QueryOutcome {
    pub fn success(&self) -> bool {
        !self.hit_nodes.is_empty()
    }

    pub fn hits(&self) -> u32 {
        self.hit_nodes.len() as u32
    }
}

/// Query generation plan: who floods, how often, how much.
#[derive(Debug, Clone, PartialEq)]
pub struct WorkloadSpec {
    pub generator_nodes: Vec<NodeId>,
    /// Queries per unit time per generator.
    pub poisson_rate: f64,
    pub total_queries: u32,
    pub initial_ttl: u32,
    pub options: SearchOptions,
}

/// One sampled query arrival.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Arrival {
    pub timestamp: f64,
    pub origin: NodeId,
    pub object: ObjectId,
}

/// Workload output; both vectors are indexed by query id.
#[derive(Debug, Clone, PartialEq)]
pub struct WorkloadResult {
    pub arrivals: Vec<Arrival>,
    pub outcomes: Vec<QueryOutcome>,
}

/// One copy of the query on one overlay link, about to be delivered.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Delivery {
    pub(crate) to: NodeId,
    pub(crate) from: NodeId,
    pub(crate) packet: QueryPacket,
}

/// Per-run working memory, reusable across queries. Node states need no
/// reset between queries: query ids are unique, and `NodeState` treats a
/// stale id as unseen.
pub(crate) struct Scratch {
    states: Vec<NodeState>,
    inbox: Vec<Delivery>,
    outbox: Vec<Delivery>,
}

impl Scratch {
    pub(crate) fn for_graph(graph: &OverlayGraph) -> Self {
        Scratch {
            states: vec![NodeState::new(); graph.node_count() as usize],
            inbox: Vec::new(),
            outbox: Vec::new(),
        }
    }
}

/// Delivery order within a round. `Canonical` is ascending (receiver,
/// sender); `Reversed` exists so tests can show outcomes don't depend on
/// the tie-break.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum DeliveryOrder {
    Canonical,
    #[allow(dead_code)] // exercised by the tie-break tests only
    Reversed,
}

/// Observer for the flood's internals; the engine itself runs with the
/// no-op implementation, the verify harness plugs in a line recorder.
pub(crate) trait Tracer {
    fn on_originate(&mut self, _origin: NodeId, _emitted: &[(NodeId, QueryPacket)]) {}
    fn on_delivery(&mut self, _round: u32, _delivery: &Delivery, _action: &ReceiveAction) {}
}

pub(crate) struct NoTrace;

impl Tracer for NoTrace {}

/// Records one human-readable line per protocol event.
#[derive(Default)]
pub(crate) struct LineTrace {
    pub(crate) lines: Vec<String>,
}

impl Tracer for LineTrace {
    fn on_originate(&mut self, origin: NodeId, emitted: &[(NodeId, QueryPacket)]) {
        let targets: Vec<String> = emitted.iter().map(|(v, _)| v.to_string()).collect();
        let ttl = emitted.first().map(|(_, p)| p.ttl);
        self.lines.push(match ttl {
            Some(ttl) => format!(
                "round 0: originate at {origin}, send ttl={ttl} to [{}]",
                targets.join(",")
            ),
            None => format!("round 0: originate at {origin}, zero budget, nothing sent"),
        });
    }

    fn on_delivery(&mut self, round: u32, d: &Delivery, action: &ReceiveAction) {
        let verdict = match action {
            ReceiveAction::Duplicate => "duplicate".to_string(),
            ReceiveAction::Hit => "HIT".to_string(),
            ReceiveAction::Expired => "expired".to_string(),
            ReceiveAction::Forward { packets } => {
                let targets: Vec<String> = packets.iter().map(|(v, _)| v.to_string()).collect();
                format!("forward to [{}]", targets.join(","))
            }
        };
        self.lines.push(format!(
            "round {round}: {} -> {} ttl={} => {verdict}",
            d.from, d.to, d.packet.ttl
        ));
    }
}

/// The flood itself. Everything else in this module is plumbing around
/// this loop.
#[allow(clippy::too_many_arguments)]
pub(crate) fn flood<T: Tracer>(
    graph: &OverlayGraph,
    placement: &ReplicaPlacement,
    origin: NodeId,
    object: ObjectId,
    initial_ttl: u32,
    query_id: QueryId,
    options: SearchOptions,
    order: DeliveryOrder,
    scratch: &mut Scratch,
    tracer: &mut T,
) -> QueryOutcome {
    debug_assert_eq!(scratch.states.len(), graph.node_count() as usize);
    let mut outcome = QueryOutcome {
        query_id,
        origin,
        object,
        initial_ttl,
        hit_nodes: Vec::new(),
        first_hit_hops: None,
        hit_hops_total: 0,
        forwarded_packets: 0,
        rounds_elapsed: 0,
    };

    if options.origin_local_hit && placement.holds(origin, object) {
        scratch.states[origin as usize].mark_seen(query_id);
        outcome.hit_nodes.push(origin);
        outcome.first_hit_hops = Some(0);
        return outcome;
    }

    let (_, emitted) = protocol::originate(
        &mut scratch.states[origin as usize],
        origin,
        graph.neighbors(origin),
        object,
        initial_ttl,
        query_id,
    );
    tracer.on_originate(origin, &emitted);
    outcome.forwarded_packets = emitted.len() as u64;
    scratch.inbox.clear();
    scratch.outbox.clear();
    scratch.outbox.extend(emitted.into_iter().map(|(to, packet)| Delivery {
        to,
        from: origin,
        packet,
    }));

    let mut round = 0u32;
    while !scratch.outbox.is_empty() {
        round += 1;
        std::mem::swap(&mut scratch.inbox, &mut scratch.outbox);
        scratch.outbox.clear();
        match order {
            DeliveryOrder::Canonical => scratch.inbox.sort_unstable_by_key(|d| (d.to, d.from)),
            DeliveryOrder::Reversed => scratch
                .inbox
                .sort_unstable_by_key(|d| std::cmp::Reverse((d.to, d.from))),
        }
        for i in 0..scratch.inbox.len() {
            let d = scratch.inbox[i];
            let holds = placement.holds(d.to, d.packet.object);
            let action = protocol::receive(
                &mut scratch.states[d.to as usize],
                d.to,
                d.from,
                &d.packet,
                graph.neighbors(d.to),
                holds,
            );
            tracer.on_delivery(round, &d, &action);
            match action {
                ReceiveAction::Duplicate | ReceiveAction::Expired => {}
                ReceiveAction::Hit => {
                    let hops = protocol::hop_count(initial_ttl, d.packet.ttl);
                    outcome.hit_nodes.push(d.to);
                    outcome.hit_hops_total += u64::from(hops);
                    outcome.first_hit_hops.get_or_insert(hops);
                }
                ReceiveAction::Forward { packets } => {
                    outcome.forwarded_packets += packets.len() as u64;
                    scratch
                        .outbox
                        .extend(packets.into_iter().map(|(to, packet)| Delivery {
                            to,
                            from: d.to,
                            packet,
                        }));
                }
            }
        }
    }
    outcome.rounds_elapsed = round;
    outcome.hit_nodes.sort_unstable();
    outcome
}

/// Runs the flood once and also returns the per-event trace lines.
pub(crate) fn flood_traced(
    graph: &OverlayGraph,
    placement: &ReplicaPlacement,
    origin: NodeId,
    object: ObjectId,
    initial_ttl: u32,
    query_id: QueryId,
    options: SearchOptions,
) -> (QueryOutcome, Vec<String>) {
    let mut scratch = Scratch::for_graph(graph);
    let mut tracer = LineTrace::default();
    let outcome = flood(
        graph,
        placement,
        origin,
        object,
        initial_ttl,
        query_id,
        options,
        DeliveryOrder::Canonical,
        &mut scratch,
        &mut tracer,
    );
    (outcome, tracer.lines)
}

fn check_query(
    graph: &OverlayGraph,
    placement: &ReplicaPlacement,
    origin: NodeId,
    object: ObjectId,
) -> Result<(), EngineError> {
    if origin >= graph.node_count() {
        return Err(EngineError::InvalidOrigin {
            origin,
            node_count: graph.node_count(),
        });
    }
    if object >= placement.object_count() {
        return Err(EngineError::InvalidObject {
            object,
            object_count: placement.object_count(),
        });
    }
    Ok(())
}

/// Runs a single query under default options.
pub fn run_query(
    graph: &OverlayGraph,
    placement: &ReplicaPlacement,
    origin: NodeId,
    object: ObjectId,
    initial_ttl: u32,
    query_id: QueryId,
) -> Result<QueryOutcome, EngineError> {
    run_query_with(
        graph,
        placement,
        origin,
        object,
        initial_ttl,
        query_id,
        SearchOptions::default(),
    )
}

/// Runs a single query with explicit options.
pub fn run_query_with(
    graph: &OverlayGraph,
    placement: &ReplicaPlacement,
    origin: NodeId,
    object: ObjectId,
    initial_ttl: u32,
    query_id: QueryId,
    options: SearchOptions,
) -> Result<QueryOutcome, EngineError> {
    check_query(graph, placement, origin, object)?;
    let mut scratch = Scratch::for_graph(graph);
    Ok(flood(
        graph,
        placement,
        origin,
        object,
        initial_ttl,
        query_id,
        options,
        DeliveryOrder::Canonical,
        &mut scratch,
        &mut NoTrace,
    ))
}

fn check_workload(
    graph: &OverlayGraph,
    placement: &ReplicaPlacement,
    spec: &WorkloadSpec,
) -> Result<(), EngineError> {
    if spec.total_queries == 0 {
        return Err(EngineError::EmptyWorkload);
    }
    if spec.generator_nodes.is_empty() {
        return Err(EngineError::NoGenerators);
    }
    let mut sorted = spec.generator_nodes.clone();
    sorted.sort_unstable();
    let distinct = sorted.windows(2).all(|w| w[0] < w[1]);
    let in_range = sorted.last().is_none_or(|&g| g < graph.node_count());
    if !distinct || !in_range {
        return Err(EngineError::BadGenerators);
    }
    if !(spec.poisson_rate.is_finite() && spec.poisson_rate > 0.0) {
        return Err(EngineError::BadRate);
    }
    if placement.object_count() == 0 {
        return Err(EngineError::NoObjects);
    }
    Ok(())
}

/// Samples the merged arrival trace: one exponential clock per generator,
/// always emitting the globally earliest next arrival. Draw order (and so
/// the RNG stream) is: one initial gap per generator in list order, then
/// per emitted query an object id followed by the emitting generator's
/// next gap.
fn sample_arrivals(spec: &WorkloadSpec, object_count: u32, rng: &mut ChaCha8Rng) -> Vec<Arrival> {
    let exp = Exp::new(spec.poisson_rate).expect("rate validated");
    let mut next_at: Vec<f64> = spec
        .generator_nodes
        .iter()
        .map(|_| exp.sample(rng))
        .collect();
    let mut arrivals = Vec::with_capacity(spec.total_queries as usize);
    for _ in 0..spec.total_queries {
        let mut g = 0;
        for i in 1..next_at.len() {
            if next_at[i] < next_at[g] {
                g = i;
            }
        }
        let object = rng.random_range(0..object_count);
        arrivals.push(Arrival {
            timestamp: next_at[g],
            origin: spec.generator_nodes[g],
            object,
        });
        next_at[g] += exp.sample(rng);
    }
    arrivals
}

fn run_queries_seq(
    graph: &OverlayGraph,
    placement: &ReplicaPlacement,
    arrivals: &[Arrival],
    initial_ttl: u32,
    options: SearchOptions,
) -> Vec<QueryOutcome> {
    let mut scratch = Scratch::for_graph(graph);
    arrivals
        .iter()
        .enumerate()
        .map(|(id, a)| {
            flood(
                graph,
                placement,
                a.origin,
                a.object,
                initial_ttl,
                id as QueryId,
                options,
                DeliveryOrder::Canonical,
                &mut scratch,
                &mut NoTrace,
            )
        })
        .collect()
}

#[cfg(feature = "parallel")]
fn run_queries_par(
    graph: &OverlayGraph,
    placement: &ReplicaPlacement,
    arrivals: &[Arrival],
    initial_ttl: u32,
    options: SearchOptions,
) -> Vec<QueryOutcome> {
    arrivals
        .par_iter()
        .enumerate()
        .map_init(
            || Scratch::for_graph(graph),
            |scratch, (id, a)| {
                flood(
                    graph,
                    placement,
                    a.origin,
                    a.object,
                    initial_ttl,
                    id as QueryId,
                    options,
                    DeliveryOrder::Canonical,
                    scratch,
                    &mut NoTrace,
                )
            },
        )
        .collect()
}

/// Samples the arrival trace and runs every query. Outcomes come back in
/// query-id order whatever the execution order, so the result is a pure
/// function of the inputs. Uses the thread pool when the `parallel`
/// feature is on.
pub fn run_workload(
    graph: &OverlayGraph,
    placement: &ReplicaPlacement,
    spec: &WorkloadSpec,
    rng_seed: u64,
) -> Result<WorkloadResult, EngineError> {
    check_workload(graph, placement, spec)?;
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let arrivals = sample_arrivals(spec, placement.object_count(), &mut rng);
    #[cfg(feature = "parallel")]
    let outcomes = run_queries_par(graph, placement, &arrivals, spec.initial_ttl, spec.options);
    #[cfg(not(feature = "parallel"))]
    let outcomes = run_queries_seq(graph, placement, &arrivals, spec.initial_ttl, spec.options);
    Ok(WorkloadResult { arrivals, outcomes })
}

/// Like [`run_workload`] but always single-threaded; the benchmark suite
/// compares this against the parallel path, and the test suite checks
/// they agree outcome-for-outcome.
pub fn run_workload_sequential(
    graph: &OverlayGraph,
    placement: &ReplicaPlacement,
    spec: &WorkloadSpec,
    rng_seed: u64,
) -> Result<WorkloadResult, EngineError> {
    check_workload(graph, placement, spec)?;
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let arrivals = sample_arrivals(spec, placement.object_count(), &mut rng);
    let outcomes = run_queries_seq(graph, placement, &arrivals, spec.initial_ttl, spec.options);
    Ok(WorkloadResult { arrivals, outcomes })
}
