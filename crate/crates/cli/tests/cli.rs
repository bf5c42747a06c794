use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use warmtrend_core::grid::write_grid_csv;
use warmtrend_core::simulation::{synthetic_grid, synthetic_series, SyntheticCell};

fn warmtrend(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_warmtrend"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = warmtrend(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn text(path: &Path) -> String {
    fs::read_to_string(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

fn write_grid(path: &Path, rows: usize, cols: usize, years: usize, extra_missing_cell: bool) {
    let mut ds = synthetic_grid(rows, cols, 1951, years, &SyntheticCell::default(), 11).unwrap();
    if extra_missing_cell {
        let holes = SyntheticCell { missing_fraction: 1.0, ..Default::default() };
        ds.series.insert("r0c0".into(), synthetic_series(1951, years, &holes, 0).unwrap());
    }
    write_grid_csv(&ds, fs::File::create(path).unwrap()).unwrap();
}

#[test]
fn help_lists_config_keys() {
    let out = ok(&["--help"]);
    let help = String::from_utf8(out.stdout).unwrap();
    for needle in ["[pipeline]", "[table1]", "[table2]", "[bootstrap]", "missing_threshold =", "k_compare =", "block_length =", "innovation_sd ="] {
        assert!(help.contains(needle), "missing {needle}");
    }
    for cmd in ["simulate-table1", "simulate-table2", "analyze", "cluster", "bootstrap", "block-length"] {
        assert!(help.contains(cmd), "missing {cmd}");
    }
}

#[test]
fn unknown_config_keys_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(&cfg, "[pipeline]\nspan = 0.3\nwindow = 4\n").unwrap();
    let out = warmtrend(&["--config", cfg.to_str().unwrap(), "simulate-table2", "--outer", "1"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("window"));
}

#[test]
fn table1_smoke_is_well_formed_and_reproducible() {
    let args = ["--seed", "3", "simulate-table1", "--outer", "10", "--inner", "10"];
    let first = ok(&args).stdout;
    let second = ok(&["--threads", "1", "--seed", "3", "simulate-table1", "--outer", "10", "--inner", "10"]).stdout;
    assert_eq!(first, second);
    let table = String::from_utf8(first).unwrap();
    let lines: Vec<&str> = table.lines().collect();
    assert_eq!(lines.len(), 5);
    assert_eq!(lines[0], "method,q0.025,q0.05,q0.25,q0.5,q0.75,q0.95,q0.975");
    for line in &lines[1..] {
        let fields: Vec<&str> = line.split(',').collect();
        assert_eq!(fields.len(), 8);
        let qs: Vec<f64> = fields[1..].iter().map(|f| f.parse().unwrap()).collect();
        assert!(qs.windows(2).all(|w| w[0] <= w[1]), "{line}");
    }
    assert!(lines[1].starts_with("AR(1) process,"));
}

#[test]
fn table2_smoke() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("t2.csv");
    ok(&["--seed", "1", "simulate-table2", "--outer", "3", "--inner", "20", "--out", out.to_str().unwrap()]);
    let csv = text(&out);
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "years,n,percent_negative,mean_weight_r");
    assert_eq!(lines.len(), 4);
    assert!(lines[1].starts_with("10,3650,"));
    assert!(lines[3].starts_with("60,21900,"));
}

const OUTPUTS: [&str; 6] = ["cells.csv", "curves.csv", "replicates.csv", "bic.csv", "clusters.csv", "manifest.txt"];

#[test]
fn analyze_smoke_grid_is_complete_and_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let grid = dir.path().join("grid.csv");
    write_grid(&grid, 3, 3, 66, false);
    let cfg = dir.path().join("run.toml");
    fs::write(&cfg, "seed = 5\n[pipeline]\nreplicates = 50\n").unwrap();
    let run = |name: &str| {
        let out = dir.path().join(name);
        ok(&["--config", cfg.to_str().unwrap(), "analyze", "--grid", grid.to_str().unwrap(), "--out-dir", out.to_str().unwrap(), "--format", "geojson"]);
        out
    };
    let a = run("a");
    let b = run("b");
    for name in OUTPUTS.iter().chain(&["cells.geojson"]) {
        assert_eq!(fs::read(a.join(name)).unwrap(), fs::read(b.join(name)).unwrap(), "{name} differs");
    }
    let manifest = text(&a.join("manifest.txt"));
    assert!(manifest.contains("seed = 5\n"));
    assert!(manifest.contains("pipeline.replicates = 50\n"));
    assert!(manifest.contains("pipeline.k_compare = 20,30\n"));
    assert!(manifest.contains("cells = 9\n"));
    let cells = text(&a.join("cells.csv"));
    assert_eq!(cells.lines().count(), 10);
    assert_eq!(text(&a.join("curves.csv")).lines().count(), 1 + 9 * 30);
    assert_eq!(text(&a.join("replicates.csv")).lines().count(), 1 + 9 * 2 * 50);
}

#[test]
fn all_missing_cell_is_excluded_and_the_run_succeeds() {
    let dir = tempfile::tempdir().unwrap();
    let grid = dir.path().join("grid.csv");
    write_grid(&grid, 3, 3, 30, true);
    let cfg = dir.path().join("run.toml");
    fs::write(&cfg, "[pipeline]\nk_max = 3\nk_compare = [1, 3]\nreplicates = 20\ncluster_k_max = 2\nfamilies = [\"EII\", \"VII\"]\n").unwrap();
    let out = dir.path().join("out");
    ok(&["--config", cfg.to_str().unwrap(), "analyze", "--grid", grid.to_str().unwrap(), "--out-dir", out.to_str().unwrap()]);
    for name in OUTPUTS {
        assert!(out.join(name).exists(), "{name}");
    }
    let manifest = text(&out.join("manifest.txt"));
    assert!(manifest.contains("excluded = r0c0\n"), "{manifest}");
    assert!(manifest.contains("failed = \n"));
    assert!(manifest.contains("clustering = K="), "{manifest}");
    let cells = text(&out.join("cells.csv"));
    let row = cells.lines().find(|l| l.starts_with("r0c0,")).unwrap();
    assert!(row.ends_with(",,,,,"), "{row}");
    let clusters = text(&out.join("clusters.csv"));
    assert_eq!(clusters.lines().count(), 1 + 8);
    assert!(!clusters.contains("r0c0"));
}

#[test]
fn failing_cells_are_listed_and_exit_non_zero() {
    let dir = tempfile::tempdir().unwrap();
    let grid = dir.path().join("grid.csv");
    // five years cannot support thirty sliding start years
    write_grid(&grid, 1, 2, 5, false);
    let out = warmtrend(&["analyze", "--grid", grid.to_str().unwrap(), "--out-dir", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("r0c0") && stderr.contains("r0c1"), "{stderr}");
}

#[test]
fn cluster_command_separates_curve_groups() {
    let dir = tempfile::tempdir().unwrap();
    let curves = dir.path().join("curves.csv");
    let mut body = String::from("cell_id,k,slope,r_squared\n");
    let mut state = 1u64;
    let mut jitter = || {
        state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        ((state >> 11) as f64 / (1u64 << 53) as f64 - 0.5) * 1e-6
    };
    for g in 0..3 {
        for i in 0..15 {
            for k in 0..2 {
                let centre = [[1e-5, 1e-5], [5e-5, 1e-5], [1e-5, 5e-5]][g][k];
                body.push_str(&format!("g{g}_{i:02},{k},{:e},0.1\n", centre + jitter()));
            }
        }
    }
    fs::write(&curves, body).unwrap();
    let out = dir.path().join("out");
    ok(&["--seed", "2", "cluster", "--curves", curves.to_str().unwrap(), "--out-dir", out.to_str().unwrap(), "--k-max", "5", "--kmeans", "3"]);
    let clusters = text(&out.join("clusters.csv"));
    let labels: Vec<(String, String)> = clusters
        .lines()
        .skip(1)
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            (f[0][..2].to_owned(), f[1].to_owned())
        })
        .collect();
    assert_eq!(labels.len(), 45);
    for g in ["g0", "g1", "g2"] {
        let mut set: Vec<&String> = labels.iter().filter(|(id, _)| id == g).map(|(_, l)| l).collect();
        set.dedup();
        assert_eq!(set.len(), 1, "group {g} split");
    }
    assert!(text(&out.join("bic.csv")).starts_with("K,family,bic,loglik,converged\n"));
    assert_eq!(text(&out.join("kmeans.csv")).lines().count(), 46);
}

fn write_series(path: &Path, years: usize, r: f64) {
    let spec = SyntheticCell { trend: 1e-4, r, innovation_sd: 1.0, ..Default::default() };
    let series = synthetic_series(1950, years, &spec, 4).unwrap();
    series.write_csv(fs::File::create(path).unwrap()).unwrap();
}

#[test]
fn bootstrap_command_writes_quantiles_and_replicates() {
    let dir = tempfile::tempdir().unwrap();
    let series = dir.path().join("s.csv");
    write_series(&series, 8, 0.5);
    for method in ["efron", "wild", "wild_normal", "dep_wild_ar1", "dep_wild_kernel", "moving_block"] {
        let dump = dir.path().join(format!("{method}.csv"));
        let args = ["--seed", "9", "bootstrap", "--input", series.to_str().unwrap(), "--method", method, "--replicates", "100", "--replicates-out", dump.to_str().unwrap()];
        let first = ok(&args).stdout;
        let dump_first = fs::read(&dump).unwrap();
        assert_eq!(first, ok(&args).stdout, "{method}");
        assert_eq!(dump_first, fs::read(&dump).unwrap(), "{method}");
        let table = String::from_utf8(first).unwrap();
        let lines: Vec<&str> = table.lines().collect();
        assert_eq!(lines[0], "method,level,quantile_value");
        assert_eq!(lines.len(), 8);
        assert!(lines[4].starts_with(&format!("{method},0.5,")));
        let dump = String::from_utf8(dump_first).unwrap();
        assert!(dump.starts_with("replicate,slope\n"));
        assert_eq!(dump.lines().count(), 101);
    }
    let bad = warmtrend(&["bootstrap", "--input", series.to_str().unwrap(), "--method", "pairs"]);
    assert!(!bad.status.success());
}

#[test]
fn block_length_command() {
    let dir = tempfile::tempdir().unwrap();
    let series = dir.path().join("s.csv");
    write_series(&series, 27, 0.9);
    let out = String::from_utf8(ok(&["block-length", "--input", series.to_str().unwrap()]).stdout).unwrap();
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines[0], "n,block_length");
    let b: usize = lines[1].split(',').nth(1).unwrap().parse().unwrap();
    assert!(b > 5, "b = {b}");
}
