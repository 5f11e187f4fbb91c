//! Deterministic simulator of flooding search over unstructured P2P
//! overlay networks.
//!
//! A query floods from its originator to every neighbor except the
//! sender, bounded by a TTL hop budget and per-node duplicate
//! suppression; replica holders absorb the flood and count as hits. The
//! crate generates random overlays and replica placements, drives
//! TTL × replication parameter sweeps, and aggregates the four classic
//! search metrics (success rate, hits per query, average hops, forwarded
//! packets) at global and per-origin scope.
//!
//! Module map:
//!
//! - [`topology`] — overlay graph generation (configuration model with
//!   repair) and uniform replica placement;
//! - [`protocol`] — the per-node receive/forward rules;
//! - [`engine`] — synchronous hop-round execution of single queries and
//!   Poisson workloads;
//! - [`oracle`] — independent pruned-BFS reference implementation used
//!   to cross-check the engine;
//! - [`metrics`] — exact aggregation, sweep tables, CSV and plot-data
//!   rendering;
//! - [`experiment`] — the full sweep driver with per-stream seed
//!   derivation;
//! - [`verify`] — randomized engine-vs-oracle equivalence harness.
//!
//! Everything is a pure function of its inputs and seeds: the same
//! configuration produces bit-identical results on every platform, with
//! or without the `parallel` feature.

pub mod engine;
pub mod experiment;
pub mod metrics;
pub mod oracle;
pub mod protocol;
pub mod topology;
pub mod verify;

/// Dense node identifier in `0..node_count`.
pub type NodeId = u32;
/// Dense object identifier in `0..object_count`.
pub type ObjectId = u32;
/// Globally unique query identifier within one run.
pub type QueryId = u64;

pub use engine::{
    run_query, run_query_with, run_workload, run_workload_sequential, Arrival, EngineError,
    QueryOutcome, SearchOptions, WorkloadResult, WorkloadSpec,
};
pub use experiment::{
    derive_seed, run_experiment, trace_rows, write_trace_csv, CellResult, ExperimentConfig,
    ExperimentError, ExperimentResult, SeedStream, TraceRow, TRACE_CSV_HEADER,
};
pub use metrics::{
    aggregate, aggregate_local, render_plot_data, summarize_sweep, write_local_csv,
    LocalMetricSet, MetricSet, MetricsError, PlotMetric, SweepCell, SweepTable, LOCAL_CSV_HEADER,
    SWEEP_CSV_HEADER,
};
pub use oracle::{oracle_forwarded_count, oracle_query, OracleResult};
pub use protocol::{hop_count, originate, receive, NodeState, QueryPacket, ReceiveAction};
pub use topology::{
    expected_store_size, generate_graph, place_replicas, DegreeSpec, OverlayGraph,
    ReplicaPlacement, TopologyError,
};
pub use verify::{
    run_verification, run_verification_with, CaseSpec, Mismatch, VerifyConfig, VerifyReport,
};
