//! The full experiment: one overlay per master seed, a placement per
//! replication value, and paired-seed workloads across the TTL axis.
//!
//! Seed discipline: every random stream (topology, placement, workload)
//! gets its own seed derived from the master seed with a splitmix64
//! mixer. Placement and workload seeds depend on the replication value
//! but never on TTL, so within one replication the TTL axis replays the
//! same placement and the same query arrivals — success and flood size
//! can then be compared query-by-query across TTL, not just on average.

use std::io::{self, Write};

use thiserror::Error;

use crate::engine::{
    run_workload, EngineError, SearchOptions, WorkloadResult, WorkloadSpec,
};
use crate::metrics::{
    aggregate, aggregate_local, summarize_sweep, LocalMetricSet, MetricSet, MetricsError,
    SweepTable,
};
use crate::topology::{generate_graph, place_replicas, DegreeSpec, TopologyError};
use crate::{NodeId, ObjectId, QueryId};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Topology(#[from] TopologyError),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("config: {0}")]
    Config(String),
}

/// Full description of one experiment run. Defaults reproduce the
/// reference setup: 1000 nodes with degrees uniform in [2, 8], 500
/// objects, replication swept over {2, 8, 32, 128, 512}, TTL swept over
/// 1..=8, ten Poisson generators, 10000 queries per cell.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub nodes: u32,
    pub objects: u32,
    pub deg_min: u32,
    pub deg_max: u32,
    pub replication_set: Vec<u32>,
    pub ttl_set: Vec<u32>,
    pub generators: u32,
    pub queries: u32,
    pub poisson_rate: f64,
    pub seed: u64,
    /// Nodes whose per-origin statistics are reported; `None` watches
    /// the three lowest-id generators.
    pub selected_local_nodes: Option<Vec<NodeId>>,
    pub origin_local_hit: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            nodes: 1000,
            objects: 500,
            deg_min: 2,
            deg_max: 8,
            replication_set: vec![2, 8, 32, 128, 512],
            ttl_set: (1..=8).collect(),
            generators: 10,
            queries: 10_000,
            poisson_rate: 1.0,
            seed: 42,
            selected_local_nodes: None,
            origin_local_hit: false,
        }
    }
}

impl ExperimentConfig {
    /// Query generators are the lowest node ids.
    pub fn generator_nodes(&self) -> Vec<NodeId> {
        (0..self.generators).collect()
    }

    /// The watched nodes: explicit selection, or the three lowest-id
    /// generators.
    pub fn local_nodes(&self) -> Vec<NodeId> {
        match &self.selected_local_nodes {
            Some(nodes) => nodes.clone(),
            None => (0..self.generators.min(3)).collect(),
        }
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        let cfg = |msg: String| ExperimentError::Config(msg);
        if self.nodes < 2 {
            return Err(cfg(format!("nodes = {} is below 2", self.nodes)));
        }
        if self.objects == 0 {
            return Err(cfg("objects must be at least 1".into()));
        }
        let degrees = DegreeSpec::new(self.deg_min, self.deg_max)?;
        if degrees.max_degree() >= self.nodes {
            return Err(cfg(format!(
                "max degree {} needs more than {} nodes",
                self.deg_max, self.nodes
            )));
        }
        if self.replication_set.is_empty() {
            return Err(cfg("replication set is empty".into()));
        }
        for &rp in &self.replication_set {
            if rp == 0 || rp > self.nodes {
                return Err(cfg(format!(
                    "replication {rp} not in [1, {}]",
                    self.nodes
                )));
            }
        }
        if self.ttl_set.is_empty() {
            return Err(cfg("ttl set is empty".into()));
        }
        if self.generators == 0 || self.generators > self.nodes {
            return Err(cfg(format!(
                "generators {} not in [1, {}]",
                self.generators, self.nodes
            )));
        }
        if self.queries == 0 {
            return Err(cfg("queries must be at least 1".into()));
        }
        if !(self.poisson_rate.is_finite() && self.poisson_rate > 0.0) {
            return Err(cfg(format!(
                "poisson rate {} must be positive and finite",
                self.poisson_rate
            )));
        }
        let generators = self.generator_nodes();
        for &node in &self.local_nodes() {
            if !generators.contains(&node) {
                return Err(cfg(format!(
                    "local-stats node {node} is not a generator (generators are 0..{})",
                    self.generators
                )));
            }
        }
        Ok(())
    }
}

/// The independent random streams of a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeedStream {
    Topology = 1,
    Placement = 2,
    Workload = 3,
}

// splitmix64: Steele, Lea & Flood's fixed-increment generator; `MIX_*`
// are its output-scramble multipliers, GAMMA its increment.
const GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;
const MIX_A: u64 = 0xBF58_476D_1CE4_E5B9;
const MIX_B: u64 = 0x94D0_49BB_1331_11EB;

fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(MIX_A);
    z = (z ^ (z >> 27)).wrapping_mul(MIX_B);
    z ^ (z >> 31)
}

/// Derives the seed of one stream from the master seed. `param`
/// distinguishes instances within a stream (the replication value for
/// placement and workload streams; 0 for topology). TTL is deliberately
/// not an input: see the module docs.
pub fn derive_seed(master: u64, stream: SeedStream, param: u64) -> u64 {
    let s = mix64(master.wrapping_add(GAMMA.wrapping_mul(stream as u64)));
    mix64(s.wrapping_add(GAMMA.wrapping_mul(param)))
}

/// One per-query line of the trace CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub query_id: QueryId,
    pub timestamp: f64,
    pub origin: NodeId,
    pub object: ObjectId,
    pub ttl: u32,
    pub success: bool,
    pub hits: u32,
    pub first_hit_hops: Option<u32>,
    pub forwarded_packets: u64,
}

/// Flattens a workload result into trace rows.
pub fn trace_rows(result: &WorkloadResult) -> Vec<TraceRow> {
    result
        .arrivals
        .iter()
        .zip(&result.outcomes)
        .map(|(a, o)| TraceRow {
            query_id: o.query_id,
            timestamp: a.timestamp,
            origin: o.origin,
            object: o.object,
            ttl: o.initial_ttl,
            success: o.success(),
            hits: o.hits(),
            first_hit_hops: o.first_hit_hops,
            forwarded_packets: o.forwarded_packets,
        })
        .collect()
}

/// Trace CSV header, fixed.
pub const TRACE_CSV_HEADER: &str =
    "query_id,timestamp,origin,object,ttl,success,hits,first_hit_hops,forwarded_packets";

/// Writes one workload's per-query trace.
pub fn write_trace_csv<W: Write>(mut w: W, rows: &[TraceRow]) -> io::Result<()> {
    writeln!(w, "{TRACE_CSV_HEADER}")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{}",
            r.query_id,
            r.timestamp,
            r.origin,
            r.object,
            r.ttl,
            u8::from(r.success),
            r.hits,
            r.first_hit_hops.map(|h| h.to_string()).unwrap_or_default(),
            r.forwarded_packets
        )?;
    }
    Ok(())
}

/// Results of one (replication, ttl) sweep cell.
#[derive(Debug, Clone, PartialEq)]
pub struct CellResult {
    pub replication: u32,
    pub ttl: u32,
    pub metrics: MetricSet,
    pub locals: Vec<LocalMetricSet>,
    /// Present when the run was asked to keep per-query traces.
    pub trace: Option<Vec<TraceRow>>,
}

/// Everything a run produces, cells ordered by (replication, ttl).
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResult {
    pub cells: Vec<CellResult>,
    pub sweep: SweepTable,
}

/// Runs the whole sweep. The topology is generated once from the master
/// seed; each replication value draws its own placement and arrival
/// trace; each TTL replays them. Cells come back sorted by
/// (replication, ttl).
pub fn run_experiment(
    config: &ExperimentConfig,
    keep_traces: bool,
) -> Result<ExperimentResult, ExperimentError> {
    config.validate()?;
    let graph = generate_graph(
        config.nodes,
        DegreeSpec::new(config.deg_min, config.deg_max)?,
        derive_seed(config.seed, SeedStream::Topology, 0),
    )?;
    let generator_nodes = config.generator_nodes();
    let local_nodes = config.local_nodes();

    let mut replications = config.replication_set.clone();
    replications.sort_unstable();
    replications.dedup();
    let mut ttls = config.ttl_set.clone();
    ttls.sort_unstable();
    ttls.dedup();

    let mut cells = Vec::with_capacity(replications.len() * ttls.len());
    for &rp in &replications {
        let placement = place_replicas(
            &graph,
            config.objects,
            rp,
            derive_seed(config.seed, SeedStream::Placement, u64::from(rp)),
        )?;
        let workload_seed = derive_seed(config.seed, SeedStream::Workload, u64::from(rp));
        for &ttl in &ttls {
            let spec = WorkloadSpec {
                generator_nodes: generator_nodes.clone(),
                poisson_rate: config.poisson_rate,
                total_queries: config.queries,
                initial_ttl: ttl,
                options: SearchOptions {
                    origin_local_hit: config.origin_local_hit,
                },
            };
            let result = run_workload(&graph, &placement, &spec, workload_seed)?;
            let metrics = aggregate(&result.outcomes)?;
            let locals = aggregate_local(&result.outcomes, &local_nodes);
            let trace = keep_traces.then(|| trace_rows(&result));
            cells.push(CellResult {
                replication: rp,
                ttl,
                metrics,
                locals,
                trace,
            });
        }
    }
    let sweep = summarize_sweep(
        cells
            .iter()
            .map(|c| ((c.replication, c.ttl), c.metrics.clone())),
    )?;
    Ok(ExperimentResult { cells, sweep })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_config() -> ExperimentConfig {
        ExperimentConfig {
            nodes: 40,
            objects: 20,
            deg_min: 2,
            deg_max: 6,
            replication_set: vec![2, 8],
            ttl_set: vec![1, 2, 4],
            generators: 5,
            queries: 60,
            seed: 33,
            ..ExperimentConfig::default()
        }
    }

    #[test]
    fn default_config_matches_reference_setup() {
        let c = ExperimentConfig::default();
        assert_eq!(c.nodes, 1000);
        assert_eq!(c.objects, 500);
        assert_eq!((c.deg_min, c.deg_max), (2, 8));
        assert_eq!(c.replication_set, vec![2, 8, 32, 128, 512]);
        assert_eq!(c.ttl_set, vec![1, 2, 3, 4, 5, 6, 7, 8]);
        assert_eq!(c.generators, 10);
        assert_eq!(c.queries, 10_000);
        assert_eq!(c.local_nodes(), vec![0, 1, 2]);
        assert!(c.validate().is_ok());
    }

    #[test]
    fn seed_streams_are_separated() {
        let master = 42;
        let topo = derive_seed(master, SeedStream::Topology, 0);
        let p2 = derive_seed(master, SeedStream::Placement, 2);
        let p8 = derive_seed(master, SeedStream::Placement, 8);
        let w2 = derive_seed(master, SeedStream::Workload, 2);
        let all = [topo, p2, p8, w2];
        for (i, a) in all.iter().enumerate() {
            for b in &all[i + 1..] {
                assert_ne!(a, b);
            }
        }
        assert_ne!(derive_seed(41, SeedStream::Topology, 0), topo);
        assert_eq!(derive_seed(master, SeedStream::Placement, 2), p2);
    }

    #[test]
    fn sweep_produces_one_cell_per_combination() {
        let result = run_experiment(&small_config(), false).unwrap();
        assert_eq!(result.cells.len(), 6);
        assert!(result.sweep.require_rectangular().is_ok());
        let keys: Vec<(u32, u32)> = result
            .cells
            .iter()
            .map(|c| (c.replication, c.ttl))
            .collect();
        assert_eq!(keys, vec![(2, 1), (2, 2), (2, 4), (8, 1), (8, 2), (8, 4)]);
        for c in &result.cells {
            assert_eq!(c.metrics.total_queries, 60);
            assert_eq!(c.locals.len(), 3);
            assert!(c.trace.is_none());
        }
    }

    #[test]
    fn runs_are_reproducible() {
        let a = run_experiment(&small_config(), true).unwrap();
        let b = run_experiment(&small_config(), true).unwrap();
        assert_eq!(a, b);
        let mut other = small_config();
        other.seed += 1;
        assert_ne!(run_experiment(&other, true).unwrap(), a);
    }

    #[test]
    fn ttl_axis_replays_the_same_arrivals() {
        let result = run_experiment(&small_config(), true).unwrap();
        for rp in [2, 8] {
            let cells: Vec<&CellResult> = result
                .cells
                .iter()
                .filter(|c| c.replication == rp)
                .collect();
            let base = cells[0].trace.as_ref().unwrap();
            for cell in &cells[1..] {
                let trace = cell.trace.as_ref().unwrap();
                for (lo, hi) in base.iter().zip(trace) {
                    assert_eq!(lo.timestamp, hi.timestamp);
                    assert_eq!(lo.origin, hi.origin);
                    assert_eq!(lo.object, hi.object);
                    assert!(
                        !lo.success || hi.success,
                        "query {} lost its hit when ttl rose from {} to {}",
                        lo.query_id,
                        lo.ttl,
                        hi.ttl
                    );
                    assert!(lo.forwarded_packets <= hi.forwarded_packets);
                }
            }
        }
    }

    #[test]
    fn trace_csv_round_trips_the_rows() {
        let result = run_experiment(&small_config(), true).unwrap();
        let rows = result.cells[0].trace.as_ref().unwrap();
        let mut buf = Vec::new();
        write_trace_csv(&mut buf, rows).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], TRACE_CSV_HEADER);
        assert_eq!(lines.len(), rows.len() + 1);
        let first: Vec<&str> = lines[1].split(',').collect();
        assert_eq!(first.len(), 9);
        assert_eq!(first[0], "0");
    }

    #[test]
    fn bad_configs_are_rejected_before_any_work() {
        let mut c = small_config();
        c.replication_set = vec![2, 41];
        assert!(matches!(
            run_experiment(&c, false),
            Err(ExperimentError::Config(_))
        ));
        let mut c = small_config();
        c.deg_max = 40;
        assert!(matches!(
            run_experiment(&c, false),
            Err(ExperimentError::Config(_))
        ));
        let mut c = small_config();
        c.selected_local_nodes = Some(vec![30]);
        assert!(matches!(
            run_experiment(&c, false),
            Err(ExperimentError::Config(_))
        ));
        let mut c = small_config();
        c.queries = 0;
        assert!(matches!(
            run_experiment(&c, false),
            Err(ExperimentError::Config(_))
        ));
    }
}
