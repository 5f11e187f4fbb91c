//! End-to-end tests driving the compiled binary.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::time::Instant;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_floodsim"))
}

fn run_ok(args: &[&str]) -> Output {
    let out = bin().args(args).output().expect("spawn floodsim");
    assert!(
        out.status.success(),
        "floodsim {args:?} failed\nstdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn run_err(args: &[&str]) -> Output {
    let out = bin().args(args).output().expect("spawn floodsim");
    assert!(!out.status.success(), "floodsim {args:?} unexpectedly passed");
    out
}

fn smoke_args(out_dir: &Path, seed: &str) -> Vec<String> {
    [
        "run",
        "--nodes",
        "50",
        "--objects",
        "20",
        "--deg-min",
        "2",
        "--deg-max",
        "5",
        "--replication-set",
        "2,8",
        "--ttl-set",
        "1,2,3",
        "--generators",
        "5",
        "--queries",
        "100",
        "--seed",
        seed,
        "--traces",
        "--out-dir",
    ]
    .iter()
    .map(|s| s.to_string())
    .chain([out_dir.display().to_string()])
    .collect()
}

fn read(dir: &Path, name: &str) -> Vec<u8> {
    std::fs::read(dir.join(name)).unwrap_or_else(|e| panic!("missing {name}: {e}"))
}

const ARTIFACTS: [&str; 7] = [
    "manifest.txt",
    "sweep.csv",
    "local_stats.csv",
    "success_rate.dat",
    "hits_per_query.dat",
    "avg_hops.dat",
    "forwarded_per_query.dat",
];

#[test]
fn smoke_run_writes_every_artifact_quickly() {
    let dir = tempfile::tempdir().unwrap();
    let args = smoke_args(dir.path(), "3");
    let started = Instant::now();
    run_ok(&args.iter().map(String::as_str).collect::<Vec<_>>());
    let took = started.elapsed();
    assert!(took.as_secs_f64() < 1.0, "smoke run took {took:.2?}");

    for name in ARTIFACTS {
        assert!(dir.path().join(name).exists(), "{name} missing");
    }
    let sweep = String::from_utf8(read(dir.path(), "sweep.csv")).unwrap();
    assert_eq!(sweep.lines().count(), 1 + 2 * 3, "header + one row per cell");
    assert!(sweep.starts_with("run_id,replication,ttl,queries,"));
    let local = String::from_utf8(read(dir.path(), "local_stats.csv")).unwrap();
    assert_eq!(local.lines().count(), 1 + 2 * 3 * 3, "three watched nodes per cell");
    for rp in [2, 8] {
        for ttl in 1..=3 {
            assert!(
                dir.path().join(format!("trace_rp{rp}_ttl{ttl}.csv")).exists(),
                "trace for ({rp}, {ttl}) missing"
            );
        }
    }
    // plot files: header plus one row per TTL, one column per RP
    let dat = String::from_utf8(read(dir.path(), "success_rate.dat")).unwrap();
    let rows: Vec<&str> = dat.lines().collect();
    assert_eq!(rows.len(), 1 + 3);
    assert!(rows[0].starts_with('#'));
    for row in &rows[1..] {
        let cols: Vec<&str> = row.split_whitespace().collect();
        assert_eq!(cols.len(), 1 + 2);
        for value in &cols[1..] {
            let v: f64 = value.parse().unwrap();
            assert!((0.0..=1.0).contains(&v), "success rate {v} out of range");
        }
    }
}

#[test]
fn identical_seeds_reproduce_byte_identical_artifacts() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args_a = smoke_args(a.path(), "11");
    let args_b = smoke_args(b.path(), "11");
    run_ok(&args_a.iter().map(String::as_str).collect::<Vec<_>>());
    run_ok(&args_b.iter().map(String::as_str).collect::<Vec<_>>());

    let mut compared = 0;
    for entry in std::fs::read_dir(a.path()).unwrap() {
        let name = entry.unwrap().file_name().into_string().unwrap();
        if name == "manifest.txt" {
            continue; // records the differing out-dir paths
        }
        assert_eq!(
            read(a.path(), &name),
            read(b.path(), &name),
            "{name} differs between identical runs"
        );
        compared += 1;
    }
    assert_eq!(compared, ARTIFACTS.len() - 1 + 6, "artifact set changed");

    let c = tempfile::tempdir().unwrap();
    let args_c = smoke_args(c.path(), "12");
    run_ok(&args_c.iter().map(String::as_str).collect::<Vec<_>>());
    assert_ne!(
        read(a.path(), "sweep.csv"),
        read(c.path(), "sweep.csv"),
        "different seeds gave identical sweeps"
    );
}

#[test]
fn config_file_applies_and_flags_override_it() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("settings.cfg");
    std::fs::write(
        &cfg,
        "# smoke settings\nnodes=60\nobjects=24\ndeg-min=2\ndeg-max=5\n\
         replication-set=2,8\nttl-set=1,2\ngenerators=5\nqueries=120\nseed=11\n",
    )
    .unwrap();
    let out1 = dir.path().join("first");
    run_ok(&[
        "run",
        "--config",
        cfg.to_str().unwrap(),
        "--queries",
        "90",
        "--out-dir",
        out1.to_str().unwrap(),
    ]);
    let manifest = String::from_utf8(read(&out1, "manifest.txt")).unwrap();
    assert!(manifest.contains("nodes=60"), "file value lost:\n{manifest}");
    assert!(manifest.contains("queries=90"), "flag override lost:\n{manifest}");
    assert!(manifest.contains("run-id=seed11"), "default run id wrong:\n{manifest}");
    let sweep = String::from_utf8(read(&out1, "sweep.csv")).unwrap();
    assert!(sweep.lines().nth(1).unwrap().contains(",90,"), "cell size is not 90");

    // the manifest itself is a loadable settings file that reproduces
    // the run
    let out2 = dir.path().join("second");
    run_ok(&[
        "run",
        "--config",
        out1.join("manifest.txt").to_str().unwrap(),
        "--out-dir",
        out2.to_str().unwrap(),
    ]);
    assert_eq!(
        read(&out1, "sweep.csv"),
        read(&out2, "sweep.csv"),
        "manifest replay diverged"
    );
}

#[test]
fn plot_data_regenerates_the_run_files() {
    let dir = tempfile::tempdir().unwrap();
    let args = smoke_args(dir.path(), "7");
    run_ok(&args.iter().map(String::as_str).collect::<Vec<_>>());

    let plots = tempfile::tempdir().unwrap();
    run_ok(&[
        "plot-data",
        "--input",
        dir.path().join("sweep.csv").to_str().unwrap(),
        "--out-dir",
        plots.path().to_str().unwrap(),
    ]);
    for name in [
        "success_rate.dat",
        "hits_per_query.dat",
        "avg_hops.dat",
        "forwarded_per_query.dat",
    ] {
        assert_eq!(
            read(dir.path(), name),
            read(plots.path(), name),
            "{name} differs from the run's own output"
        );
    }

    let bad = dir.path().join("not-a-sweep.csv");
    std::fs::write(&bad, "run_id,nope\nx,1\n").unwrap();
    let out = run_err(&[
        "plot-data",
        "--input",
        bad.to_str().unwrap(),
        "--out-dir",
        plots.path().to_str().unwrap(),
    ]);
    assert!(
        String::from_utf8_lossy(&out.stderr).contains("header"),
        "missing header diagnostic"
    );
}

#[test]
fn verify_passes_and_pins_ttl_zero() {
    let out = run_ok(&["verify", "--cases", "150", "--max-nodes", "60", "--seed", "5"]);
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(
        stdout.contains("150 cases, engine == oracle on all"),
        "unexpected report: {stdout}"
    );
    run_ok(&["verify", "--cases", "40", "--max-nodes", "40", "--ttl", "0"]);
    run_err(&["verify", "--min-nodes", "50", "--max-nodes", "20"]);
}

#[test]
fn topology_exports_match_the_run_seed() {
    let dir = tempfile::tempdir().unwrap();
    let edges = dir.path().join("edges.txt");
    let holders = dir.path().join("holders.txt");
    run_ok(&[
        "topology",
        "--nodes",
        "40",
        "--deg-min",
        "2",
        "--deg-max",
        "6",
        "--seed",
        "5",
        "--out",
        edges.to_str().unwrap(),
        "--objects",
        "10",
        "--replication",
        "3",
        "--placement-out",
        holders.to_str().unwrap(),
    ]);

    let edge_text = std::fs::read_to_string(&edges).unwrap();
    let mut lines = edge_text.lines();
    assert_eq!(lines.next(), Some("nodes=40"));
    for line in lines {
        let mut parts = line.split(' ');
        let u: u32 = parts.next().unwrap().parse().unwrap();
        let v: u32 = parts.next().unwrap().parse().unwrap();
        assert!(u < v && v < 40, "bad edge line {line}");
        assert_eq!(parts.next(), None);
    }

    let holder_text = std::fs::read_to_string(&holders).unwrap();
    assert_eq!(holder_text.lines().count(), 10);
    for (object, line) in holder_text.lines().enumerate() {
        let (id, list) = line.split_once(": ").unwrap();
        assert_eq!(id.parse::<usize>().unwrap(), object);
        let nodes: Vec<u32> = list.split(',').map(|n| n.parse().unwrap()).collect();
        assert_eq!(nodes.len(), 3);
        assert!(nodes.windows(2).all(|w| w[0] < w[1]), "holders unsorted: {line}");
    }

    // the same seed exports the same graph again
    let again = dir.path().join("edges2.txt");
    run_ok(&[
        "topology", "--nodes", "40", "--deg-min", "2", "--deg-max", "6", "--seed", "5",
        "--out", again.to_str().unwrap(),
    ]);
    assert_eq!(std::fs::read(&edges).unwrap(), std::fs::read(&again).unwrap());

    run_err(&["topology", "--nodes", "40", "--out", edges.to_str().unwrap(), "--objects", "5"]);
}

#[test]
fn infeasible_configs_fail_without_leaving_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let target: PathBuf = dir.path().join("never");
    let out = run_err(&[
        "run",
        "--nodes",
        "5",
        "--deg-max",
        "8",
        "--out-dir",
        target.to_str().unwrap(),
    ]);
    assert!(
        String::from_utf8_lossy(&out.stderr).contains("max degree 8"),
        "missing diagnostic"
    );
    assert!(!target.exists(), "failed run left outputs behind");

    let cfg = dir.path().join("bad.cfg");
    std::fs::write(&cfg, "nodes=50\nbogus=1\n").unwrap();
    let out = run_err(&["run", "--config", cfg.to_str().unwrap()]);
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("bogus") && stderr.contains(":2"), "bad key diagnostic: {stderr}");
}
