//! Flooding protocol rules: what a node does with a search query packet.
//!
//! Evaluation order at a receiving node is fixed:
//!
//! 1. duplicate check — a node that already processed this query id
//!    discards the copy (and never re-hits);
//! 2. hit check — if the node holds the object, record a hit; a packet
//!    arriving with ttl 0 still scores here;
//! 3. ttl check — ttl 0 stops propagation;
//! 4. forward — send a copy with ttl − 1 to every neighbor except the
//!    node the packet came from, in ascending neighbor order.
//!
//! A hit node does not forward: replica holders absorb the flood. The
//! originator does not consult its own store; a query always floods
//! (the engine exposes an opt-in switch for local satisfaction).

use crate::{NodeId, ObjectId, QueryId};

/// The 4-field search query: id, originator, object, hop budget.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct QueryPacket {
    pub query_id: QueryId,
    pub source: NodeId,
    pub object: ObjectId,
    pub ttl: u32,
}

/// Per-node protocol memory: the query id this node last processed.
/// Query ids are unique per run, so one slot works as an epoch-stamped
/// seen-set — state from a previous query can never match a fresh id.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct NodeState {
    seen: Option<QueryId>,
}

impl NodeState {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn has_seen(&self, query_id: QueryId) -> bool {
        self.seen == Some(query_id)
    }

    pub fn mark_seen(&mut self, query_id: QueryId) {
        self.seen = Some(query_id);
    }

    pub fn clear(&mut self) {
        self.seen = None;
    }
}

/// Decision a node makes for one incoming packet copy.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ReceiveAction {
    /// Query id already processed here: drop, no hit, no forward.
    Duplicate,
    /// Node holds the object: hit recorded, flood absorbed here.
    Hit,
    /// TTL exhausted at a non-holder: drop.
    Expired,
    /// Copies to send, ascending by neighbor id, each with ttl − 1.
    Forward { packets: Vec<(NodeId, QueryPacket)> },
}

/// Starts a query at `origin`: marks it seen there and emits one copy per
/// neighbor with ttl − 1 (the decrement happens on the link). A zero
/// budget emits nothing and the query is dead on arrival. Returns the
/// packet as created plus the outgoing copies.
pub fn originate(
    state: &mut NodeState,
    origin: NodeId,
    neighbors: &[NodeId],
    object: ObjectId,
    initial_ttl: u32,
    query_id: QueryId,
) -> (QueryPacket, Vec<(NodeId, QueryPacket)>) {
    state.mark_seen(query_id);
    let packet = QueryPacket {
        query_id,
        source: origin,
        object,
        ttl: initial_ttl,
    };
    let outgoing = if initial_ttl == 0 {
        Vec::new()
    } else {
        neighbors
            .iter()
            .map(|&v| {
                (
                    v,
                    QueryPacket {
                        ttl: initial_ttl - 1,
                        ..packet
                    },
                )
            })
            .collect()
    };
    (packet, outgoing)
}

/// Applies the receive rules at `node` for a packet arriving from the
/// neighbor `from`. `neighbors` must be the node's full adjacency,
/// sorted ascending; `holds` says whether this node stores the queried
/// object. Any first contact marks the query as seen.
pub fn receive(
    state: &mut NodeState,
    node: NodeId,
    from: NodeId,
    packet: &QueryPacket,
    neighbors: &[NodeId],
    holds: bool,
) -> ReceiveAction {
    debug_assert!(neighbors.windows(2).all(|w| w[0] < w[1]));
    debug_assert!(node != from);
    if state.has_seen(packet.query_id) {
        return ReceiveAction::Duplicate;
    }
    state.mark_seen(packet.query_id);
    if holds {
        return ReceiveAction::Hit;
    }
    if packet.ttl == 0 {
        return ReceiveAction::Expired;
    }
    let copy = QueryPacket {
        ttl: packet.ttl - 1,
        ..*packet
    };
    let packets = neighbors
        .iter()
        .filter(|&&v| v != from)
        .map(|&v| (v, copy))
        .collect();
    ReceiveAction::Forward { packets }
}

/// Hops a packet has travelled: the TTL budget it has spent so far.
pub fn hop_count(initial_ttl: u32, remaining_ttl: u32) -> u32 {
    debug_assert!(remaining_ttl <= initial_ttl);
    initial_ttl - remaining_ttl
}
