//! Run settings: defaults, the flat `key=value` settings file, and the
//! manifest that records what a run actually used.
//!
//! Precedence is defaults, then the settings file, then command-line
//! flags. Keys are flag names without the leading dashes, so a manifest
//! written by one run can be fed back through `--config` to reproduce
//! it.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context, Result};
use floodsim::{ExperimentConfig, NodeId};

/// Everything the `run` subcommand needs beyond the experiment itself.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSettings {
    pub experiment: ExperimentConfig,
    pub out_dir: PathBuf,
    /// Tag for the run_id CSV column; defaults to `seed<master seed>`.
    pub run_id: Option<String>,
    /// Keep and write per-query trace CSVs.
    pub traces: bool,
}

impl Default for RunSettings {
    fn default() -> Self {
        RunSettings {
            experiment: ExperimentConfig::default(),
            out_dir: PathBuf::from("out"),
            run_id: None,
            traces: false,
        }
    }
}

impl RunSettings {
    /// Applies a settings file: one `key=value` per line, `#` comments
    /// and blank lines ignored, unknown keys rejected.
    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading settings file {}", path.display()))?;
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| anyhow!("{}:{}: expected key=value", path.display(), idx + 1))?;
            self.apply_kv(key.trim(), value.trim())
                .map_err(|e| anyhow!("{}:{}: {e}", path.display(), idx + 1))?;
        }
        Ok(())
    }

    /// Applies one setting by its flag name (without dashes).
    pub fn apply_kv(&mut self, key: &str, value: &str) -> Result<(), String> {
        let exp = &mut self.experiment;
        match key {
            "nodes" => exp.nodes = parse_num(key, value)?,
            "objects" => exp.objects = parse_num(key, value)?,
            "deg-min" => exp.deg_min = parse_num(key, value)?,
            "deg-max" => exp.deg_max = parse_num(key, value)?,
            "replication-set" => exp.replication_set = parse_u32_list(value)?,
            "ttl-set" => exp.ttl_set = parse_u32_list(value)?,
            "generators" => exp.generators = parse_num(key, value)?,
            "queries" => exp.queries = parse_num(key, value)?,
            "poisson-rate" => exp.poisson_rate = parse_num(key, value)?,
            "seed" => exp.seed = parse_num(key, value)?,
            "local-nodes" => exp.selected_local_nodes = Some(parse_node_list(value)?),
            "origin-local-hit" => exp.origin_local_hit = parse_bool(key, value)?,
            "traces" => self.traces = parse_bool(key, value)?,
            "run-id" => self.run_id = Some(value.to_string()),
            "out-dir" => self.out_dir = PathBuf::from(value),
            _ => return Err(format!("unknown key `{key}`")),
        }
        Ok(())
    }

    pub fn resolved_run_id(&self) -> String {
        self.run_id
            .clone()
            .unwrap_or_else(|| format!("seed{}", self.experiment.seed))
    }

    /// Renders the manifest: the fully resolved settings in the same
    /// `key=value` format the `--config` flag accepts.
    pub fn manifest(&self) -> String {
        let exp = &self.experiment;
        let mut out = String::new();
        let _ = writeln!(
            out,
            "# floodsim {} run manifest; load with --config to reproduce",
            env!("CARGO_PKG_VERSION")
        );
        let _ = writeln!(out, "nodes={}", exp.nodes);
        let _ = writeln!(out, "objects={}", exp.objects);
        let _ = writeln!(out, "deg-min={}", exp.deg_min);
        let _ = writeln!(out, "deg-max={}", exp.deg_max);
        let _ = writeln!(out, "replication-set={}", join(&exp.replication_set));
        let _ = writeln!(out, "ttl-set={}", join(&exp.ttl_set));
        let _ = writeln!(out, "generators={}", exp.generators);
        let _ = writeln!(out, "queries={}", exp.queries);
        let _ = writeln!(out, "poisson-rate={}", exp.poisson_rate);
        let _ = writeln!(out, "seed={}", exp.seed);
        let _ = writeln!(out, "local-nodes={}", join(&exp.local_nodes()));
        let _ = writeln!(out, "origin-local-hit={}", exp.origin_local_hit);
        let _ = writeln!(out, "traces={}", self.traces);
        let _ = writeln!(out, "run-id={}", self.resolved_run_id());
        let _ = writeln!(out, "out-dir={}", self.out_dir.display());
        out
    }
}

fn join<T: ToString>(values: &[T]) -> String {
    values
        .iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join(",")
}

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, String>
where
    T::Err: std::fmt::Display,
{
    value
        .parse()
        .map_err(|e| format!("bad value `{value}` for {key}: {e}"))
}

fn parse_bool(key: &str, value: &str) -> Result<bool, String> {
    match value {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(format!("bad value `{value}` for {key}: expected true or false")),
    }
}

/// Parses a comma-separated list like `2,8,32`.
pub fn parse_u32_list(value: &str) -> Result<Vec<u32>, String> {
    let items: Result<Vec<u32>, String> = value
        .split(',')
        .map(|s| {
            s.trim()
                .parse()
                .map_err(|e| format!("bad list item `{}`: {e}", s.trim()))
        })
        .collect();
    let items = items?;
    if items.is_empty() {
        return Err("empty list".into());
    }
    Ok(items)
}

pub fn parse_node_list(value: &str) -> Result<Vec<NodeId>, String> {
    parse_u32_list(value)
}
