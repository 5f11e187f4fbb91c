//! Randomized cross-validation of the engine against the oracle.
//!
//! Each case draws a fresh small graph, placement and query, runs both
//! implementations, and compares success flag, hit set, first-hit
//! distance and forwarded-packet count. The first disagreement stops the
//! run and is reported with the engine's full per-round trace.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::engine::{self, run_query, QueryOutcome, SearchOptions};
use crate::oracle::{oracle_forwarded_count, oracle_query, OracleResult};
use crate::topology::{generate_graph, place_replicas, DegreeSpec, OverlayGraph, ReplicaPlacement};
use crate::{NodeId, ObjectId, QueryId};

/// Shape of the randomized case space.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VerifyConfig {
    pub cases: u32,
    pub min_nodes: u32,
    pub max_nodes: u32,
    /// Pin every case to this TTL instead of drawing from 0..=8.
    pub fixed_ttl: Option<u32>,
    pub seed: u64,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig {
            cases: 1000,
            min_nodes: 20,
            max_nodes: 200,
            fixed_ttl: None,
            seed: 7,
        }
    }
}

/// The random draw behind one case, enough to reproduce it exactly.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CaseSpec {
    pub nodes: u32,
    pub deg_min: u32,
    pub deg_max: u32,
    pub graph_seed: u64,
    pub objects: u32,
    pub replication: u32,
    pub placement_seed: u64,
    pub origin: NodeId,
    pub object: ObjectId,
    pub ttl: u32,
}

/// A case where engine and oracle disagreed.
#[derive(Debug, Clone, PartialEq)]
pub struct Mismatch {
    pub case_index: u32,
    pub spec: CaseSpec,
    pub engine: QueryOutcome,
    pub oracle: OracleResult,
    pub oracle_forwarded: u64,
    /// Per-round trace of the real engine on the failing query.
    pub trace: Vec<String>,
}

impl fmt::Display for Mismatch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = &self.spec;
        writeln!(f, "engine/oracle mismatch at case {}", self.case_index)?;
        writeln!(
            f,
            "  graph: {} nodes, degrees [{}, {}], seed {:#018x}",
            s.nodes, s.deg_min, s.deg_max, s.graph_seed
        )?;
        writeln!(
            f,
            "  placement: {} objects, replication {}, seed {:#018x}",
            s.objects, s.replication, s.placement_seed
        )?;
        writeln!(
            f,
            "  query: origin {}, object {}, ttl {}",
            s.origin, s.object, s.ttl
        )?;
        writeln!(
            f,
            "  engine: success={} hits={:?} first_hit={:?} forwarded={}",
            self.engine.success(),
            self.engine.hit_nodes,
            self.engine.first_hit_hops,
            self.engine.forwarded_packets
        )?;
        writeln!(
            f,
            "  oracle: success={} hits={:?} min_dist={:?} forwarded={}",
            self.oracle.success,
            self.oracle.hit_nodes,
            self.oracle.min_hit_distance,
            self.oracle_forwarded
        )?;
        writeln!(f, "  engine trace:")?;
        for line in &self.trace {
            writeln!(f, "    {line}")?;
        }
        Ok(())
    }
}

/// Outcome of a verification run.
#[derive(Debug, Clone, PartialEq)]
pub struct VerifyReport {
    pub cases_run: u32,
    pub mismatch: Option<Box<Mismatch>>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.mismatch.is_none()
    }
}

impl fmt::Display for VerifyReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.mismatch {
            None => write!(f, "verify: {} cases, engine == oracle on all", self.cases_run),
            Some(m) => write!(f, "verify: FAILED after {} cases\n{m}", self.cases_run),
        }
    }
}

/// Runs one query the way a (possibly corrupted) engine would; used to
/// inject faulty implementations in negative-control tests.
pub type QueryRunner<'a> = dyn Fn(&OverlayGraph, &ReplicaPlacement, NodeId, ObjectId, u32, QueryId) -> QueryOutcome
    + 'a;

/// Cross-validates the real engine against the oracle.
pub fn run_verification(config: &VerifyConfig) -> VerifyReport {
    run_verification_with(config, &|g, p, origin, object, ttl, qid| {
        run_query(g, p, origin, object, ttl, qid).expect("generated case is valid")
    })
}

/// Same case generator, custom engine. The trace attached to a mismatch
/// always comes from the real engine, as the diagnostic of record.
pub fn run_verification_with(config: &VerifyConfig, runner: &QueryRunner) -> VerifyReport {
    assert!(config.min_nodes >= 3 && config.min_nodes <= config.max_nodes);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    for case_index in 0..config.cases {
        let nodes = rng.random_range(config.min_nodes..=config.max_nodes);
        let deg_min = 2.min(nodes - 1);
        let deg_max = rng.random_range(deg_min..=8.min(nodes - 1));
        let graph_seed: u64 = rng.random();
        let objects = rng.random_range(1..=40);
        let replication = rng.random_range(1..=nodes);
        let placement_seed: u64 = rng.random();
        let origin = rng.random_range(0..nodes);
        let object = rng.random_range(0..objects);
        let ttl = config.fixed_ttl.unwrap_or_else(|| rng.random_range(0..=8));
        let spec = CaseSpec {
            nodes,
            deg_min,
            deg_max,
            graph_seed,
            objects,
            replication,
            placement_seed,
            origin,
            object,
            ttl,
        };

        let graph = generate_graph(nodes, DegreeSpec::new(deg_min, deg_max).unwrap(), graph_seed)
            .expect("case space keeps degree specs feasible");
        let placement = place_replicas(&graph, objects, replication, placement_seed)
            .expect("case space keeps replication feasible");

        let got = runner(&graph, &placement, origin, object, ttl, QueryId::from(case_index));
        let want = oracle_query(&graph, &placement, origin, object, ttl);
        let want_forwarded = oracle_forwarded_count(&graph, &placement, origin, object, ttl);

        let agree = got.success() == want.success
            && got.hit_nodes == want.hit_nodes
            && got.first_hit_hops == want.min_hit_distance
            && got.forwarded_packets == want_forwarded;
        if !agree {
            let (_, trace) = engine::flood_traced(
                &graph,
                &placement,
                origin,
                object,
                ttl,
                QueryId::from(case_index),
                SearchOptions::default(),
            );
            return VerifyReport {
                cases_run: case_index + 1,
                mismatch: Some(Box::new(Mismatch {
                    case_index,
                    spec,
                    engine: got,
                    oracle: want,
                    oracle_forwarded: want_forwarded,
                    trace,
                })),
            };
        }
    }
    VerifyReport {
        cases_run: config.cases,
        mismatch: None,
    }
}
