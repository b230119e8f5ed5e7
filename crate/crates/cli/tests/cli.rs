//! End-to-end runs of the `cfslope` binary.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::time::{Duration, Instant};

use cfslope::data::{load_dataset, VariableRoles};
use cfslope::eif::{self, EstimationSpec};
use cfslope::inference::run_ge;
use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_cfslope"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = run(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn generate(dir: &Path, dgp: &str, n: usize, seed: u64) -> PathBuf {
    let path = dir.join(format!("{dgp}_{n}_{seed}.csv"));
    ok(&[
        "generate",
        "--dgp",
        dgp,
        "--n",
        &n.to_string(),
        "--seed",
        &seed.to_string(),
        "--out",
        path.to_str().unwrap(),
    ]);
    path
}

fn read(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let mut r = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_path(path)
        .unwrap();
    let header = r.headers().unwrap().iter().map(String::from).collect();
    let rows = r
        .records()
        .map(|rec| rec.unwrap().iter().map(String::from).collect())
        .collect();
    (header, rows)
}

fn col(header: &[String], name: &str) -> usize {
    header.iter().position(|h| h == name).unwrap_or_else(|| panic!("no column {name}"))
}

fn row_for<'a>(header: &[String], rows: &'a [Vec<String>], key: &str, value: &str) -> &'a [String] {
    let k = col(header, key);
    rows.iter().find(|r| r[k] == value).unwrap_or_else(|| panic!("no row {value}"))
}

fn field(header: &[String], row: &[String], name: &str) -> f64 {
    row[col(header, name)].parse().unwrap()
}

fn ge_args<'a>(input: &'a str, out: &'a str) -> Vec<&'a str> {
    vec![
        "analyze", "--input", input, "--y", "y", "--d", "d", "--g", "g", "--x", "z", "--analysis", "ge",
        "--seed", "1", "--out", out,
    ]
}

#[test]
fn ge_selection_free_recovers_the_fixture_value() {
    let dir = TempDir::new().unwrap();
    let input = generate(dir.path(), "A_continuous", 20_000, 7);
    let out = dir.path().join("out");
    ok(&ge_args(input.to_str().unwrap(), out.to_str().unwrap()));
    let (h, rows) = read(&out.join("tests.csv"));
    let sf = row_for(&h, &rows, "test", "GE_selection_free");
    let point = field(&h, sf, "point");
    assert!((point - 0.20).abs() < 0.05, "GE selection-free {point}");
    let (h, rows) = read(&out.join("estimates.csv"));
    assert_eq!(rows.len(), 4);
    assert_eq!(
        h,
        ["estimand", "point", "se", "ci_low", "ci_high", "p", "n"].map(String::from)
    );
    let log = fs::read_to_string(out.join("run.log")).unwrap();
    assert!(log.contains("seed=1"));
}

#[test]
fn cli_adds_no_numerics() {
    let dir = TempDir::new().unwrap();
    let input = generate(dir.path(), "A_continuous", 3000, 3);
    let out = dir.path().join("out");
    ok(&ge_args(input.to_str().unwrap(), out.to_str().unwrap()));

    let roles = VariableRoles::new("y", "d", "g", &["z"]);
    let (data, _) = load_dataset(&input, &roles).unwrap();
    let spec = EstimationSpec {
        seed: 1,
        ..EstimationSpec::parametric()
    };
    let pair = run_ge(&data, &spec).unwrap();
    let (h, rows) = read(&out.join("tests.csv"));
    for t in [&pair.descriptive, &pair.selection_free] {
        let row = row_for(&h, &rows, "test", t.name.label());
        assert_eq!(field(&h, row, "point"), t.point);
        assert_eq!(field(&h, row, "se"), t.se);
        assert_eq!(field(&h, row, "p"), t.p_value);
    }
    let (h, rows) = read(&out.join("estimates.csv"));
    for s in pair.slopes() {
        let direct = eif::estimate(&data, s.estimand, &spec).unwrap();
        let row = row_for(&h, &rows, "estimand", &s.estimand.label());
        assert_eq!(field(&h, row, "point"), direct.point);
        assert_eq!(field(&h, row, "se"), direct.se);
    }
}

#[test]
fn conditional_alt_without_prior_column_fails() {
    let dir = TempDir::new().unwrap();
    let input = generate(dir.path(), "C_sequential", 500, 1);
    let out = dir.path().join("out");
    let res = run(&[
        "analyze", "--input", input.to_str().unwrap(), "--y", "y", "--d", "d", "--g", "g", "--x", "z",
        "--analysis", "st", "--st-formulation", "conditional_alt", "--seed", "1", "--out",
        out.to_str().unwrap(),
    ]);
    assert!(!res.status.success());
    assert!(String::from_utf8_lossy(&res.stderr).contains("conditional_alt"));
}

#[test]
fn neural_backend_requires_cross_fitting() {
    let dir = TempDir::new().unwrap();
    let input = generate(dir.path(), "A_continuous", 300, 1);
    let out = dir.path().join("out");
    let mut args = ge_args(input.to_str().unwrap(), out.to_str().unwrap());
    args.extend(["--backend", "neural"]);
    let res = run(&args);
    assert!(!res.status.success());
    assert!(String::from_utf8_lossy(&res.stderr).contains("cross-fit"));
}

#[test]
fn st_options_are_rejected_for_ge() {
    let dir = TempDir::new().unwrap();
    let input = generate(dir.path(), "A_continuous", 300, 1);
    let out = dir.path().join("out");
    let mut args = ge_args(input.to_str().unwrap(), out.to_str().unwrap());
    args.extend(["--st-formulation", "linear_alt"]);
    assert!(!run(&args).status.success());
}

#[test]
fn unknown_dgp_lists_valid_names() {
    let dir = TempDir::new().unwrap();
    let res = run(&[
        "simulate", "--dgp", "nope", "--n", "100", "--reps", "1", "--seed", "1", "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(!res.status.success());
    let err = String::from_utf8_lossy(&res.stderr);
    for name in ["A_continuous", "B_binary", "C_sequential", "null_GE", "null_ST"] {
        assert!(err.contains(name), "{err}");
    }
}

#[test]
fn plot_data_series_span_the_observed_background() {
    let dir = TempDir::new().unwrap();
    let input = generate(dir.path(), "C_sequential", 2000, 4);
    let roles = VariableRoles::new("y", "d", "g", &["z"]);
    let (data, _) = load_dataset(&input, &roles).unwrap();
    let lo = data.g().iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = data.g().iter().cloned().fold(f64::NEG_INFINITY, f64::max);

    for (analysis, count) in [("ge", 4), ("st", 3)] {
        let out = dir.path().join(analysis);
        ok(&[
            "plot-data", "--input", input.to_str().unwrap(), "--y", "y", "--d", "d", "--g", "g", "--x", "z",
            "--analysis", analysis, "--seed", "2", "--grid", "11", "--out", out.to_str().unwrap(),
        ]);
        let (h, rows) = read(&out.join("lines.csv"));
        let s = col(&h, "series");
        let mut series: Vec<&str> = rows.iter().map(|r| r[s].as_str()).collect();
        series.dedup();
        assert_eq!(series.len(), count, "{analysis}: {series:?}");
        assert_eq!(rows.len(), 11 * count);
        let gs: Vec<f64> = rows.iter().map(|r| field(&h, r, "g")).collect();
        assert_eq!(gs[0], lo);
        assert_eq!(gs[10], hi);
    }
}

#[test]
fn randomized_transition_gives_matching_lines() {
    let dir = TempDir::new().unwrap();
    let input = generate(dir.path(), "randomized", 5000, 8);
    let out = dir.path().join("out");
    ok(&[
        "plot-data", "--input", input.to_str().unwrap(), "--y", "y", "--d", "d", "--g", "g", "--x", "z",
        "--analysis", "ge", "--seed", "2", "--grid", "21", "--out", out.to_str().unwrap(),
    ]);
    let (h, rows) = read(&out.join("lines.csv"));
    let pick = |label: &str| -> Vec<(f64, f64)> {
        rows.iter()
            .filter(|r| r[col(&h, "series")] == label)
            .map(|r| (field(&h, r, "value"), field(&h, r, "se")))
            .collect()
    };
    let cf = pick("Y1|G");
    let fac = pick("Y|G,D=1");
    assert_eq!(cf.len(), 21);
    for ((a, sa), (b, sb)) in cf.iter().zip(&fac) {
        assert!((a - b).abs() < 2.0 * (sa + sb), "{a} vs {b}");
    }
}

#[test]
fn simulate_writes_summary_schema() {
    let dir = TempDir::new().unwrap();
    ok(&[
        "simulate", "--dgp", "A_continuous", "--n", "500", "--reps", "5", "--seed", "3", "--out",
        dir.path().to_str().unwrap(),
    ]);
    let (h, rows) = read(&dir.path().join("summary.csv"));
    for c in ["estimand", "truth", "mean_est", "bias", "emp_sd", "mean_se", "coverage"] {
        col(&h, c);
    }
    assert!(!rows.is_empty());
    let (h, rows) = read(&dir.path().join("replications.csv"));
    col(&h, "seed");
    assert_eq!(rows.len(), 5 * 6);
    let text = fs::read_to_string(dir.path().join("summary.csv")).unwrap();
    assert!(text.starts_with("# cfslope"));
    assert!(text.contains("seed=3"));
}

#[test]
fn repeated_runs_are_byte_identical() {
    let dir = TempDir::new().unwrap();
    let input = generate(dir.path(), "A_continuous", 2000, 5);
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for out in [&a, &b] {
        ok(&ge_args(input.to_str().unwrap(), out.to_str().unwrap()));
    }
    for f in ["estimates.csv", "tests.csv", "run.log"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn smoke_simulation_finishes_quickly() {
    let dir = TempDir::new().unwrap();
    let start = Instant::now();
    ok(&[
        "simulate", "--dgp", "A_continuous", "--n", "2000", "--reps", "50", "--seed", "9", "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(start.elapsed() < Duration::from_secs(120));
    let (_, rows) = read(&dir.path().join("replications.csv"));
    assert_eq!(rows.len(), 50 * 6);
}
