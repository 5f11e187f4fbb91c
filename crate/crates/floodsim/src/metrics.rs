//! Aggregation of per-query outcomes into the experiment metrics.
//!
//! Everything is accumulated as integer sums first and divided once at
//! the end, so aggregation is exact, permutation-invariant, and
//! bit-reproducible regardless of how the outcomes were produced.

use std::io::{self, Write};

use thiserror::Error;

use crate::engine::QueryOutcome;
use crate::NodeId;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MetricsError {
    #[error("cannot aggregate zero outcomes (rates are undefined)")]
    NoOutcomes,
    #[error("sweep cell ({replication}, {ttl}) appears twice")]
    DuplicateCell { replication: u32, ttl: u32 },
    #[error("sweep table is empty")]
    EmptySweep,
    #[error("sweep table is ragged: cell ({replication}, {ttl}) missing")]
    MissingCell { replication: u32, ttl: u32 },
}

/// The metric bundle for one set of queries.
///
/// `avg_hops` is the mean flood depth of successful queries: how many
/// hop-rounds the search ran before every copy died. The first and
/// per-hit discovery distances are kept alongside it.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricSet {
    pub total_queries: u64,
    pub successful_queries: u64,
    pub total_hits: u64,
    /// successful_queries / total_queries.
    pub success_rate: f64,
    /// total_hits / total_queries.
    pub hits_per_query: f64,
    /// total_hits / successful_queries; absent with zero successes.
    pub hits_per_success: Option<f64>,
    /// Mean rounds a successful search travelled; absent with zero
    /// successes.
    pub avg_hops: Option<f64>,
    /// Mean hop distance over every individual hit; absent with zero
    /// hits.
    pub avg_hops_all_hits: Option<f64>,
    /// Mean hop distance of the first hit per successful query.
    pub avg_first_hit_hops: Option<f64>,
    /// Sum of forwarded packets / total_queries.
    pub forwarded_per_query: f64,
}

fn aggregate_slice(outcomes: &[QueryOutcome]) -> Option<MetricSet> {
    if outcomes.is_empty() {
        return None;
    }
    let total = outcomes.len() as u64;
    let mut successes = 0u64;
    let mut hits = 0u64;
    let mut first_hops = 0u64;
    let mut all_hit_hops = 0u64;
    let mut depth = 0u64;
    let mut forwarded = 0u64;
    for o in outcomes {
        forwarded += o.forwarded_packets;
        hits += o.hit_nodes.len() as u64;
        all_hit_hops += o.hit_hops_total;
        if let Some(h) = o.first_hit_hops {
            successes += 1;
            first_hops += u64::from(h);
            depth += u64::from(o.rounds_elapsed);
        }
    }
    let ratio = |num: u64, den: u64| num as f64 / den as f64;
    Some(MetricSet {
        total_queries: total,
        successful_queries: successes,
        total_hits: hits,
        success_rate: ratio(successes, total),
        hits_per_query: ratio(hits, total),
        hits_per_success: (successes > 0).then(|| ratio(hits, successes)),
        avg_hops: (successes > 0).then(|| ratio(depth, successes)),
        avg_hops_all_hits: (hits > 0).then(|| ratio(all_hit_hops, hits)),
        avg_first_hit_hops: (successes > 0).then(|| ratio(first_hops, successes)),
        forwarded_per_query: ratio(forwarded, total),
    })
}

/// Aggregates outcomes into one [`MetricSet`]. Rejects an empty list —
/// every rate would be 0/0.
pub fn aggregate(outcomes: &[QueryOutcome]) -> Result<MetricSet, MetricsError> {
    aggregate_slice(outcomes).ok_or(MetricsError::NoOutcomes)
}

/// Per-origin statistics for one watched node. `metrics` is `None` when
/// the node originated nothing in this run (flagged empty, not
/// zero-filled).
#[derive(Debug, Clone, PartialEq)]
pub struct LocalMetricSet {
    pub node_id: NodeId,
    pub metrics: Option<MetricSet>,
}

/// Restricts the aggregate to queries originated by each selected node.
pub fn aggregate_local(outcomes: &[QueryOutcome], selected_nodes: &[NodeId]) -> Vec<LocalMetricSet> {
    selected_nodes
        .iter()
        .map(|&node_id| {
            let mine: Vec<QueryOutcome> = outcomes
                .iter()
                .filter(|o| o.origin == node_id)
                .cloned()
                .collect();
            LocalMetricSet {
                node_id,
                metrics: aggregate_slice(&mine),
            }
        })
        .collect()
}

/// One sweep cell: the metrics of a (replication, ttl) configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepCell {
    pub replication: u32,
    pub ttl: u32,
    pub metrics: MetricSet,
}

/// The grid behind the experiment figures, sorted by (replication, ttl).
#[derive(Debug, Clone, PartialEq)]
pub struct SweepTable {
    cells: Vec<SweepCell>,
}

/// Collects per-cell metrics into a [`SweepTable`], rejecting duplicate
/// (replication, ttl) keys.
pub fn summarize_sweep(
    cells: impl IntoIterator<Item = ((u32, u32), MetricSet)>,
) -> Result<SweepTable, MetricsError> {
    let mut cells: Vec<SweepCell> = cells
        .into_iter()
        .map(|((replication, ttl), metrics)| SweepCell {
            replication,
            ttl,
            metrics,
        })
        .collect();
    if cells.is_empty() {
        return Err(MetricsError::EmptySweep);
    }
    cells.sort_by_key(|c| (c.replication, c.ttl));
    if let Some(w) = cells
        .windows(2)
        .find(|w| (w[0].replication, w[0].ttl) == (w[1].replication, w[1].ttl))
    {
        return Err(MetricsError::DuplicateCell {
            replication: w[0].replication,
            ttl: w[0].ttl,
        });
    }
    Ok(SweepTable { cells })
}

impl SweepTable {
    pub fn cells(&self) -> &[SweepCell] {
        &self.cells
    }

    /// Distinct replication values, ascending.
    pub fn replications(&self) -> Vec<u32> {
        let mut v: Vec<u32> = self.cells.iter().map(|c| c.replication).collect();
        v.dedup();
        v
    }

    /// Distinct ttl values, ascending.
    pub fn ttls(&self) -> Vec<u32> {
        let mut v: Vec<u32> = self.cells.iter().map(|c| c.ttl).collect();
        v.sort_unstable();
        v.dedup();
        v
    }

    pub fn get(&self, replication: u32, ttl: u32) -> Option<&MetricSet> {
        self.cells
            .binary_search_by_key(&(replication, ttl), |c| (c.replication, c.ttl))
            .ok()
            .map(|i| &self.cells[i].metrics)
    }

    /// Errors unless every (replication, ttl) combination is present.
    pub fn require_rectangular(&self) -> Result<(), MetricsError> {
        for &rp in &self.replications() {
            for &ttl in &self.ttls() {
                if self.get(rp, ttl).is_none() {
                    return Err(MetricsError::MissingCell {
                        replication: rp,
                        ttl,
                    });
                }
            }
        }
        Ok(())
    }

    /// Writes the sweep in the pinned CSV schema.
    pub fn write_csv<W: Write>(&self, mut w: W, run_id: &str) -> io::Result<()> {
        writeln!(w, "{SWEEP_CSV_HEADER}")?;
        for c in &self.cells {
            writeln!(
                w,
                "{run_id},{},{},{}",
                c.replication,
                c.ttl,
                metric_fields(&c.metrics)
            )?;
        }
        Ok(())
    }
}

/// Sweep CSV header, fixed.
pub const SWEEP_CSV_HEADER: &str = "run_id,replication,ttl,queries,success_rate,hits_per_query,\
hits_per_success,avg_hops,avg_hops_all_hits,forwarded_per_query";

/// Local-statistics CSV header: the sweep schema plus the watched node.
pub const LOCAL_CSV_HEADER: &str = "run_id,node_id,replication,ttl,queries,success_rate,\
hits_per_query,hits_per_success,avg_hops,avg_hops_all_hits,forwarded_per_query";

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// The queries..forwarded_per_query field group shared by both schemas.
fn metric_fields(m: &MetricSet) -> String {
    format!(
        "{},{},{},{},{},{},{}",
        m.total_queries,
        m.success_rate,
        m.hits_per_query,
        fmt_opt(m.hits_per_success),
        fmt_opt(m.avg_hops),
        fmt_opt(m.avg_hops_all_hits),
        m.forwarded_per_query
    )
}

/// Writes per-node local statistics, one row per (cell, watched node).
/// A node with no originated queries gets an empty-metrics row.
pub fn write_local_csv<'a, W: Write>(
    mut w: W,
    run_id: &str,
    rows: impl IntoIterator<Item = (u32, u32, &'a LocalMetricSet)>,
) -> io::Result<()> {
    writeln!(w, "{LOCAL_CSV_HEADER}")?;
    for (replication, ttl, local) in rows {
        match &local.metrics {
            Some(m) => writeln!(
                w,
                "{run_id},{},{replication},{ttl},{}",
                local.node_id,
                metric_fields(m)
            )?,
            None => writeln!(
                w,
                "{run_id},{},{replication},{ttl},0,,,,,,",
                local.node_id
            )?,
        }
    }
    Ok(())
}

/// The four plottable data series.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlotMetric {
    SuccessRate,
    HitsPerQuery,
    AvgHops,
    ForwardedPerQuery,
}

impl PlotMetric {
    pub const ALL: [PlotMetric; 4] = [
        PlotMetric::SuccessRate,
        PlotMetric::HitsPerQuery,
        PlotMetric::AvgHops,
        PlotMetric::ForwardedPerQuery,
    ];

    pub fn file_stem(self) -> &'static str {
        match self {
            PlotMetric::SuccessRate => "success_rate",
            PlotMetric::HitsPerQuery => "hits_per_query",
            PlotMetric::AvgHops => "avg_hops",
            PlotMetric::ForwardedPerQuery => "forwarded_per_query",
        }
    }

    fn extract(self, m: &MetricSet) -> f64 {
        match self {
            PlotMetric::SuccessRate => m.success_rate,
            PlotMetric::HitsPerQuery => m.hits_per_query,
            PlotMetric::AvgHops => m.avg_hops.unwrap_or(f64::NAN),
            PlotMetric::ForwardedPerQuery => m.forwarded_per_query,
        }
    }
}

/// Renders one metric as whitespace-separated plot data: rows are TTL
/// values ascending, the first column is the TTL, then one column per
/// replication value ascending. Requires a rectangular sweep.
pub fn render_plot_data(table: &SweepTable, metric: PlotMetric) -> Result<String, MetricsError> {
    table.require_rectangular()?;
    let rps = table.replications();
    let mut out = String::new();
    out.push_str(&format!(
        "# {} by ttl; columns: ttl{}\n",
        metric.file_stem(),
        rps.iter()
            .map(|rp| format!(" rp={rp}"))
            .collect::<String>()
    ));
    for ttl in table.ttls() {
        out.push_str(&ttl.to_string());
        for &rp in &rps {
            let m = table.get(rp, ttl).expect("rectangular");
            out.push(' ');
            out.push_str(&metric.extract(m).to_string());
        }
        out.push('\n');
    }
    Ok(out)
}
