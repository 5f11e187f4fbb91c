//! `floodsim`: run flooding-search sweeps over random peer-to-peer
//! overlays, check the engine against its oracle, and export the data
//! behind the plots.

mod config;
mod output;

use std::path::PathBuf;

use anyhow::{anyhow, bail, Result};
use clap::{Args, Parser, Subcommand};
use floodsim::{
    derive_seed, generate_graph, place_replicas, render_plot_data, run_experiment,
    run_verification, write_local_csv, write_trace_csv, DegreeSpec, PlotMetric, SeedStream,
    VerifyConfig,
};

use config::{parse_node_list, parse_u32_list, RunSettings};
use output::OutFile;

#[derive(Parser)]
#[command(name = "floodsim", version, about = "Flooding search over random peer-to-peer overlays")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the replication x TTL sweep and write all artifacts.
    Run(RunArgs),
    /// Replay randomized queries on both the engine and the exhaustive
    /// oracle; fail on the first divergence.
    Verify(VerifyArgs),
    /// Rebuild the per-metric plot data files from a sweep CSV.
    PlotData(PlotDataArgs),
    /// Generate an overlay graph (and optionally a replica placement)
    /// and export it.
    Topology(TopologyArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Settings file (flat key=value); flags below override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    nodes: Option<u32>,
    #[arg(long)]
    objects: Option<u32>,
    #[arg(long)]
    deg_min: Option<u32>,
    #[arg(long)]
    deg_max: Option<u32>,
    /// Comma-separated replication levels, e.g. 2,8,32.
    #[arg(long)]
    replication_set: Option<String>,
    /// Comma-separated TTL values, e.g. 1,2,3,4.
    #[arg(long)]
    ttl_set: Option<String>,
    #[arg(long)]
    generators: Option<u32>,
    /// Queries per sweep cell.
    #[arg(long)]
    queries: Option<u32>,
    #[arg(long)]
    poisson_rate: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Comma-separated generator nodes to report local statistics for.
    #[arg(long)]
    local_nodes: Option<String>,
    /// Let originators satisfy queries from their own store.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    origin_local_hit: Option<bool>,
    /// Write a per-query trace CSV for every sweep cell.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    traces: Option<bool>,
    /// Tag written into the run_id CSV column.
    #[arg(long)]
    run_id: Option<String>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long, default_value_t = 1000)]
    cases: u32,
    #[arg(long, default_value_t = 20)]
    min_nodes: u32,
    #[arg(long, default_value_t = 200)]
    max_nodes: u32,
    /// Pin every case to this TTL instead of drawing from 0..=8.
    #[arg(long)]
    ttl: Option<u32>,
    #[arg(long, default_value_t = 7)]
    seed: u64,
}

#[derive(Args)]
struct PlotDataArgs {
    /// Sweep CSV produced by the run subcommand.
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
}

#[derive(Args)]
struct TopologyArgs {
    #[arg(long, default_value_t = 1000)]
    nodes: u32,
    #[arg(long, default_value_t = 2)]
    deg_min: u32,
    #[arg(long, default_value_t = 8)]
    deg_max: u32,
    /// Master seed; the exported graph is the one a run with this seed
    /// would use.
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Edge-list output path.
    #[arg(long)]
    out: PathBuf,
    /// Also place this many objects (requires --replication and
    /// --placement-out).
    #[arg(long, requires_all = ["replication", "placement_out"])]
    objects: Option<u32>,
    #[arg(long, requires_all = ["objects", "placement_out"])]
    replication: Option<u32>,
    /// Holder-list output path, one `object: nodes` line per object.
    #[arg(long, requires_all = ["objects", "replication"])]
    placement_out: Option<PathBuf>,
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Run(args) => cmd_run(args),
        Command::Verify(args) => cmd_verify(args),
        Command::PlotData(args) => cmd_plot_data(args),
        Command::Topology(args) => cmd_topology(args),
    }
}

fn cmd_run(args: RunArgs) -> Result<()> {
    let mut settings = RunSettings::default();
    if let Some(path) = &args.config {
        settings.apply_file(path)?;
    }
    apply_run_flags(&mut settings, &args)?;

    let run_id = settings.resolved_run_id();
    let result = run_experiment(&settings.experiment, settings.traces)?;

    let mut files = vec![OutFile::new("manifest.txt", settings.manifest())];
    let mut sweep = Vec::new();
    result.sweep.write_csv(&mut sweep, &run_id)?;
    files.push(OutFile::new("sweep.csv", sweep));
    let mut local = Vec::new();
    write_local_csv(
        &mut local,
        &run_id,
        result
            .cells
            .iter()
            .flat_map(|c| c.locals.iter().map(move |l| (c.replication, c.ttl, l))),
    )?;
    files.push(OutFile::new("local_stats.csv", local));
    for metric in PlotMetric::ALL {
        files.push(OutFile::new(
            format!("{}.dat", metric.file_stem()),
            render_plot_data(&result.sweep, metric)?,
        ));
    }
    if settings.traces {
        for c in &result.cells {
            let mut buf = Vec::new();
            write_trace_csv(&mut buf, c.trace.as_deref().expect("traces were requested"))?;
            files.push(OutFile::new(
                format!("trace_rp{}_ttl{}.csv", c.replication, c.ttl),
                buf,
            ));
        }
    }
    output::write_all_atomic(&settings.out_dir, &files)?;
    println!(
        "run {run_id}: {} cells, {} files in {}",
        result.cells.len(),
        files.len(),
        settings.out_dir.display()
    );
    Ok(())
}

fn apply_run_flags(settings: &mut RunSettings, args: &RunArgs) -> Result<()> {
    let exp = &mut settings.experiment;
    if let Some(v) = args.nodes {
        exp.nodes = v;
    }
    if let Some(v) = args.objects {
        exp.objects = v;
    }
    if let Some(v) = args.deg_min {
        exp.deg_min = v;
    }
    if let Some(v) = args.deg_max {
        exp.deg_max = v;
    }
    if let Some(v) = &args.replication_set {
        exp.replication_set = parse_u32_list(v).map_err(|e| anyhow!("--replication-set: {e}"))?;
    }
    if let Some(v) = &args.ttl_set {
        exp.ttl_set = parse_u32_list(v).map_err(|e| anyhow!("--ttl-set: {e}"))?;
    }
    if let Some(v) = args.generators {
        exp.generators = v;
    }
    if let Some(v) = args.queries {
        exp.queries = v;
    }
    if let Some(v) = args.poisson_rate {
        exp.poisson_rate = v;
    }
    if let Some(v) = args.seed {
        exp.seed = v;
    }
    if let Some(v) = &args.local_nodes {
        exp.selected_local_nodes =
            Some(parse_node_list(v).map_err(|e| anyhow!("--local-nodes: {e}"))?);
    }
    if let Some(v) = args.origin_local_hit {
        exp.origin_local_hit = v;
    }
    if let Some(v) = args.traces {
        settings.traces = v;
    }
    if let Some(v) = &args.run_id {
        settings.run_id = Some(v.clone());
    }
    if let Some(v) = &args.out_dir {
        settings.out_dir = v.clone();
    }
    Ok(())
}

fn cmd_verify(args: VerifyArgs) -> Result<()> {
    if args.min_nodes < 2 || args.min_nodes > args.max_nodes {
        bail!(
            "--min-nodes {} and --max-nodes {} do not form a valid range",
            args.min_nodes,
            args.max_nodes
        );
    }
    let config = VerifyConfig {
        cases: args.cases,
        min_nodes: args.min_nodes,
        max_nodes: args.max_nodes,
        fixed_ttl: args.ttl,
        seed: args.seed,
    };
    let report = run_verification(&config);
    println!("{report}");
    if !report.passed() {
        bail!("engine and oracle disagree");
    }
    Ok(())
}

fn cmd_plot_data(args: PlotDataArgs) -> Result<()> {
    let table = output::load_sweep_csv(&args.input)?;
    let mut files = Vec::new();
    for metric in PlotMetric::ALL {
        files.push(OutFile::new(
            format!("{}.dat", metric.file_stem()),
            render_plot_data(&table, metric)?,
        ));
    }
    output::write_all_atomic(&args.out_dir, &files)?;
    println!(
        "plot data for {} cells in {}",
        table.cells().len(),
        args.out_dir.display()
    );
    Ok(())
}

fn cmd_topology(args: TopologyArgs) -> Result<()> {
    let degrees = DegreeSpec::new(args.deg_min, args.deg_max)?;
    let graph = generate_graph(
        args.nodes,
        degrees,
        derive_seed(args.seed, SeedStream::Topology, 0),
    )?;
    let mut edges = Vec::new();
    graph.write_edge_list(&mut edges)?;
    output::write_file_atomic(&args.out, &edges)?;
    println!(
        "{} nodes, {} edges ({} from connectivity repair) -> {}",
        graph.node_count(),
        graph.edge_count(),
        graph.repair_edge_count(),
        args.out.display()
    );
    if let (Some(objects), Some(replication), Some(path)) =
        (args.objects, args.replication, &args.placement_out)
    {
        let placement = place_replicas(
            &graph,
            objects,
            replication,
            derive_seed(args.seed, SeedStream::Placement, u64::from(replication)),
        )?;
        let mut holders = Vec::new();
        placement.write_holders(&mut holders)?;
        output::write_file_atomic(path, &holders)?;
        println!(
            "{objects} objects on {replication} holders each -> {}",
            path.display()
        );
    }
    Ok(())
}
