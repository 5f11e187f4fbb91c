//! Artifact I/O: all-or-nothing output writing and reading a sweep CSV
//! back into a table.
//!
//! Writes are staged as temporary files in the destination directory
//! and renamed into place only after every artifact has been fully
//! written, so an aborted run leaves no partial outputs behind.

use std::path::Path;

use anyhow::{bail, Context, Result};
use floodsim::{summarize_sweep, MetricSet, SweepTable, SWEEP_CSV_HEADER};
use tempfile::NamedTempFile;

/// One finished artifact waiting to be written.
pub struct OutFile {
    pub name: String,
    pub bytes: Vec<u8>,
}

impl OutFile {
    pub fn new(name: impl Into<String>, bytes: impl Into<Vec<u8>>) -> Self {
        OutFile {
            name: name.into(),
            bytes: bytes.into(),
        }
    }
}

/// Writes every artifact into `dir`, atomically and all-or-nothing:
/// everything is staged before the first rename, and staging files are
/// cleaned up if anything fails.
pub fn write_all_atomic(dir: &Path, files: &[OutFile]) -> Result<()> {
    std::fs::create_dir_all(dir)
        .with_context(|| format!("creating output directory {}", dir.display()))?;
    let mut staged = Vec::with_capacity(files.len());
    for f in files {
        let mut tmp = NamedTempFile::new_in(dir)
            .with_context(|| format!("staging {} in {}", f.name, dir.display()))?;
        std::io::Write::write_all(&mut tmp, &f.bytes)
            .with_context(|| format!("writing staged {}", f.name))?;
        staged.push((tmp, dir.join(&f.name)));
    }
    for (tmp, path) in staged {
        tmp.persist(&path)
            .with_context(|| format!("moving staged file to {}", path.display()))?;
    }
    Ok(())
}

/// Atomically writes one file at an arbitrary path.
pub fn write_file_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let parent = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(parent)
        .with_context(|| format!("creating directory {}", parent.display()))?;
    let mut tmp = NamedTempFile::new_in(parent)
        .with_context(|| format!("staging next to {}", path.display()))?;
    std::io::Write::write_all(&mut tmp, bytes)
        .with_context(|| format!("writing staged {}", path.display()))?;
    tmp.persist(path)
        .with_context(|| format!("moving staged file to {}", path.display()))?;
    Ok(())
}

fn req_field<T: std::str::FromStr>(raw: &str, what: &str, line: usize) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    raw.parse()
        .map_err(|e| anyhow::anyhow!("sweep CSV line {line}: bad {what} `{raw}`: {e}"))
}

fn opt_field(raw: &str, what: &str, line: usize) -> Result<Option<f64>> {
    if raw.is_empty() {
        Ok(None)
    } else {
        req_field(raw, what, line).map(Some)
    }
}

/// Reads a sweep CSV (the `run` subcommand's schema) back into a table.
/// The first-hit average is not part of the schema and comes back as
/// absent; the plot metrics do not use it.
pub fn load_sweep_csv(path: &Path) -> Result<SweepTable> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading sweep CSV {}", path.display()))?;
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header == SWEEP_CSV_HEADER => {}
        Some((_, header)) => bail!("unexpected sweep CSV header `{header}`"),
        None => bail!("sweep CSV {} is empty", path.display()),
    }
    let mut cells = Vec::new();
    for (idx, raw) in lines {
        if raw.is_empty() {
            continue;
        }
        let line = idx + 1;
        let fields: Vec<&str> = raw.split(',').collect();
        if fields.len() != 10 {
            bail!("sweep CSV line {line}: expected 10 fields, got {}", fields.len());
        }
        let replication: u32 = req_field(fields[1], "replication", line)?;
        let ttl: u32 = req_field(fields[2], "ttl", line)?;
        let total_queries: u64 = req_field(fields[3], "queries", line)?;
        let success_rate: f64 = req_field(fields[4], "success_rate", line)?;
        let hits_per_query: f64 = req_field(fields[5], "hits_per_query", line)?;
        let metrics = MetricSet {
            total_queries,
            successful_queries: (success_rate * total_queries as f64).round() as u64,
            total_hits: (hits_per_query * total_queries as f64).round() as u64,
            success_rate,
            hits_per_query,
            hits_per_success: opt_field(fields[6], "hits_per_success", line)?,
            avg_hops: opt_field(fields[7], "avg_hops", line)?,
            avg_hops_all_hits: opt_field(fields[8], "avg_hops_all_hits", line)?,
            avg_first_hit_hops: None,
            forwarded_per_query: req_field(fields[9], "forwarded_per_query", line)?,
        };
        cells.push(((replication, ttl), metrics));
    }
    summarize_sweep(cells).context("assembling sweep table from CSV")
}

#[cfg(test)]
mod tests {
    use super::*;
    use floodsim::{render_plot_data, PlotMetric};

    fn sample_metrics(seed: u64) -> MetricSet {
        let successes = seed % 7;
        MetricSet {
            total_queries: 10,
            successful_queries: successes,
            total_hits: successes * 2,
            success_rate: successes as f64 / 10.0,
            hits_per_query: successes as f64 / 5.0,
            hits_per_success: (successes > 0).then_some(2.0),
            avg_hops: (successes > 0).then_some(1.0 + (seed % 3) as f64),
            avg_hops_all_hits: (successes > 0).then_some(2.5),
            avg_first_hit_hops: None,
            forwarded_per_query: 3.0 + seed as f64,
        }
    }

    fn sample_table() -> SweepTable {
        let mut cells = Vec::new();
        for rp in [2u32, 8] {
            for ttl in 1..=3 {
                cells.push(((rp, ttl), sample_metrics(u64::from(rp * 10 + ttl))));
            }
        }
        summarize_sweep(cells).unwrap()
    }

    #[test]
    fn sweep_csv_round_trips_through_load() {
        let table = sample_table();
        let mut csv = Vec::new();
        table.write_csv(&mut csv, "trip").unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sweep.csv");
        std::fs::write(&path, &csv).unwrap();

        let loaded = load_sweep_csv(&path).unwrap();
        for metric in PlotMetric::ALL {
            assert_eq!(
                render_plot_data(&loaded, metric).unwrap(),
                render_plot_data(&table, metric).unwrap(),
                "{} diverged after the round trip",
                metric.file_stem()
            );
        }
    }

    #[test]
    fn load_rejects_foreign_headers() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sweep.csv");
        std::fs::write(&path, "a,b,c\n1,2,3\n").unwrap();
        let err = load_sweep_csv(&path).unwrap_err();
        assert!(err.to_string().contains("header"), "{err}");
    }

    #[test]
    fn load_reports_the_offending_line() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sweep.csv");
        std::fs::write(&path, format!("{SWEEP_CSV_HEADER}\nx,1,1,10,0.5,1,2,3,3,8\n")).unwrap();
        // run_id is ignored, so this line is fine; break a numeric field
        load_sweep_csv(&path).unwrap();
        std::fs::write(&path, format!("{SWEEP_CSV_HEADER}\nr,1,one,10,0.5,1,2,3,3,8\n")).unwrap();
        let err = load_sweep_csv(&path).unwrap_err();
        assert!(err.to_string().contains("line 2"), "{err}");
        assert!(err.to_string().contains("ttl"), "{err}");
    }

    #[test]
    fn failed_staging_leaves_no_outputs() {
        let dir = tempfile::tempdir().unwrap();
        // a directory squatting on the target name makes the final
        // rename fail after staging succeeded
        std::fs::create_dir(dir.path().join("sweep.csv")).unwrap();
        let files = [
            OutFile::new("other.txt", "ok"),
            OutFile::new("sweep.csv", "data"),
        ];
        assert!(write_all_atomic(dir.path(), &files).is_err());
        let leftovers: Vec<_> = std::fs::read_dir(dir.path())
            .unwrap()
            .map(|e| e.unwrap().file_name().into_string().unwrap())
            .filter(|name| name != "sweep.csv")
            .collect();
        // "other.txt" may or may not have been renamed before the
        // failure, but no staging files survive
        assert!(
            leftovers.iter().all(|n| n == "other.txt"),
            "staging residue: {leftovers:?}"
        );
    }

    #[test]
    fn atomic_single_file_write_lands_intact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("nested").join("edges.txt");
        write_file_atomic(&path, b"nodes=2\n0 1\n").unwrap();
        assert_eq!(std::fs::read(&path).unwrap(), b"nodes=2\n0 1\n");
    }
}
