use std::collections::BTreeSet;
use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use canonical_region_cli::{load_problem, ProblemFile};
use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_canonical-region"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn records(path: &Path) -> Vec<Value> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect()
}

fn keys(v: &Value) -> BTreeSet<&str> {
    v.as_object().unwrap().keys().map(String::as_str).collect()
}

fn set(names: &[&'static str]) -> BTreeSet<&'static str> {
    names.iter().copied().collect()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn h2(p: f64) -> f64 {
    -p * p.log2() - (1.0 - p) * (1.0 - p).log2()
}

const HEADER: &[&str] = &["record", "command", "problem", "origin", "seed", "config", "warnings"];
const SUMMARY: &[&str] = &["record", "command", "passed", "items", "failures"];

fn tiny_problem(pmf: &str) -> String {
    format!(
        r#"{{"M": 1, "J": 0, "L": 1, "alphabets": {{"X": [2], "S": 1, "V": 2, "Vhat": [2]}},
           "pmf": {pmf}, "distortions": [[["0", "1"], ["1", "0"]]]}}"#
    )
}

#[test]
fn serialized_problems_reload_equal() {
    let dir = tempfile::tempdir().unwrap();
    for name in ["dsbs.json", "bwz.json", "helper3.json"] {
        let p = load_problem(name).unwrap();
        let path = dir.path().join(name);
        fs::write(&path, ProblemFile::from_spec(&p.spec, Some(p.name.clone())).to_json()).unwrap();
        let q = load_problem(path.to_str().unwrap()).unwrap();
        assert_eq!(q.spec, p.spec);
        assert_eq!(q.name, p.name);
        assert_eq!(q.origin, path.to_str().unwrap());
    }
}

#[test]
fn mass_outside_tolerance_is_an_input_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("short.json");
    fs::write(&path, tiny_problem(r#"["0.4", "0", "0", "0.5"]"#)).unwrap();
    let o = run(&["extreme-points", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).starts_with("error[mass]"), "{}", stderr(&o));
}

#[test]
fn small_mass_excess_is_renormalized_with_a_warning() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("over.json");
    fs::write(&path, tiny_problem(r#"["0.50000001", "0", "0", "0.5"]"#)).unwrap();
    let out = dir.path().join("r.jsonl");
    let o = run(&["extreme-points", path.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stderr(&o).contains("renormalized"));
    let recs = records(&out);
    assert_eq!(recs[0]["warnings"].as_array().unwrap().len(), 1);
}

#[test]
fn parse_errors_carry_line_numbers() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("broken.json");
    fs::write(&path, "{\n  \"M\": 1,\n  \"J\": ,\n}").unwrap();
    let o = run(&["extreme-points", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let e = stderr(&o);
    assert!(e.starts_with("error[parse]") && e.contains("line 3"), "{e}");
}

#[test]
fn missing_problem_file_is_an_input_error() {
    let o = run(&["extreme-points", "/nonexistent/nothing.json"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).starts_with("error[io]"));
}

#[test]
fn argument_errors_and_help() {
    assert_eq!(run(&["--help"]).status.code(), Some(0));
    assert_eq!(run(&["frobnicate", "dsbs.json"]).status.code(), Some(2));
    assert_eq!(run(&["verify", "everything", "dsbs.json"]).status.code(), Some(2));
    assert_eq!(
        run(&["extreme-points", "dsbs.json", "--grid", "x"]).status.code(),
        Some(2)
    );
}

#[test]
fn extreme_point_records() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("ep.jsonl");
    let o = run(&[
        "extreme-points",
        "helper3.json",
        "--seed",
        "5",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let recs = records(&out);
    assert_eq!(recs.len(), 8);
    assert_eq!(keys(&recs[0]), set(HEADER));
    assert_eq!(
        keys(&recs[0]["config"]),
        set(&[
            "tol",
            "grid",
            "sweeps",
            "candidates",
            "restarts",
            "trials",
            "instances",
            "budget"
        ])
    );
    assert_eq!(recs[0]["seed"], 5);
    for c in &recs[1..7] {
        assert_eq!(
            keys(c),
            set(&[
                "record",
                "index",
                "order",
                "rates",
                "sum_rate",
                "member",
                "worst_slack",
                "active",
                "chain"
            ])
        );
        assert_eq!(c["record"], "corner");
        assert_eq!(c["active"].as_array().unwrap().len(), 3);
        assert_eq!(c["chain"], true);
    }
    let s = &recs[7];
    let mut want = set(SUMMARY);
    want.extend([
        "distinct",
        "min_gap",
        "sum_rate_spread",
        "joint_information",
        "degenerate",
    ]);
    assert_eq!(keys(s), want);
    assert_eq!(s["distinct"], 6);
    assert_eq!(s["degenerate"], false);
    assert!(s["sum_rate_spread"].as_f64().unwrap() < 1e-9);
}

#[test]
fn constant_channels_are_flagged_degenerate() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("c.jsonl");
    let o = run(&[
        "extreme-points",
        "dsbs.json",
        "--channels",
        "constant",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    let s = records(&out).pop().unwrap();
    assert_eq!(s["distinct"], 1);
    assert_eq!(s["degenerate"], true);
    assert_eq!(s["min_gap"], 0.0);
}

#[test]
fn identity_channels_give_conditional_entropy_chains() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("i.jsonl");
    let o = run(&[
        "extreme-points",
        "dsbs.json",
        "--channels",
        "identity",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    let recs = records(&out);
    // uniform X1, X2 = X1 through a BSC(0.1): H(X1) = 1, H(X2 | X1) = h(0.1)
    let first: Vec<f64> = serde_json::from_value(recs[1]["rates"].clone()).unwrap();
    let second: Vec<f64> = serde_json::from_value(recs[2]["rates"].clone()).unwrap();
    assert!((first[0] - 1.0).abs() < 1e-12 && (first[1] - h2(0.1)).abs() < 1e-12);
    assert!((second[0] - h2(0.1)).abs() < 1e-12 && (second[1] - 1.0).abs() < 1e-12);
}

#[test]
fn channel_files_are_accepted() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("ch.json");
    fs::write(
        &path,
        r#"{"channels": [{"source": 1, "rows": [[0.9, 0.1], [0.2, 0.8]]}, {"source": 2, "rows": [[1, 0, 0], [0, 0.5, 0.5]]}]}"#,
    )
    .unwrap();
    let o = run(&["extreme-points", "dsbs.json", "--channels", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    fs::write(
        &path,
        r#"{"channels": [{"source": 1, "rows": [[0.9, 0.2], [0.2, 0.8]]}]}"#,
    )
    .unwrap();
    assert_eq!(
        run(&["extreme-points", "dsbs.json", "--channels", path.to_str().unwrap()])
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn verification_suites_pass_with_frozen_fields() {
    let dir = tempfile::tempdir().unwrap();
    let cases: [(&str, &str, &[&str], &[&str]); 4] = [
        (
            "identities",
            "helper3.json",
            &["record", "instance", "identity", "checks", "worst", "passed"],
            &["worst"],
        ),
        (
            "noncrossing",
            "helper3.json",
            &[
                "record",
                "instance",
                "corners",
                "members",
                "chains",
                "min_slack",
                "passed",
            ],
            &["worst"],
        ),
        (
            "decomposition",
            "dsbs.json",
            &[
                "record",
                "draw",
                "z_sizes",
                "direction",
                "objective",
                "max_residual",
                "passed",
            ],
            &["worst"],
        ),
        (
            "alphabet-bound",
            "bwz.json",
            &[
                "record",
                "index",
                "direction",
                "enlarged",
                "capped",
                "capped_oracle",
                "reduced",
                "grid",
                "capped_grid",
                "passed",
            ],
            &["worst"],
        ),
    ];
    for (suite, problem, fields, extra) in cases {
        let out = dir.path().join(format!("{suite}.jsonl"));
        let o = run(&[
            "verify",
            suite,
            problem,
            "--trials",
            "20",
            "--out",
            out.to_str().unwrap(),
        ]);
        assert_eq!(o.status.code(), Some(0), "{suite}: {}", stderr(&o));
        let recs = records(&out);
        assert_eq!(keys(&recs[0]), set(HEADER));
        for r in &recs[1..recs.len() - 1] {
            assert_eq!(keys(r), set(fields), "{suite}");
            assert_eq!(r["passed"], true);
        }
        let mut want = set(SUMMARY);
        want.extend(extra.iter().copied());
        let s = recs.last().unwrap();
        assert_eq!(keys(s), want);
        assert_eq!(s["command"], format!("verify {suite}"));
        assert_eq!(s["passed"], true);
    }
}

#[test]
fn decomposition_below_float_precision_fails_with_counterexamples() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("d.jsonl");
    let o = run(&[
        "verify",
        "decomposition",
        "helper3.json",
        "--tol",
        "1e-15",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(1));
    let recs = records(&out);
    let dumps: Vec<&Value> = recs.iter().filter(|r| r["record"] == "counterexample").collect();
    assert!(!dumps.is_empty());
    assert_eq!(
        keys(dumps[0]),
        set(&["record", "suite", "detail", "problem", "channels"])
    );
    // the dump is a loadable problem file
    let dumped = serde_json::to_string(&dumps[0]["problem"]).unwrap();
    let p = canonical_region_cli::parse_problem(&dumped, "dump").unwrap();
    assert_eq!(p.spec, load_problem("helper3.json").unwrap().spec);
    assert_eq!(recs.last().unwrap()["passed"], false);
}

#[test]
fn oracle_over_budget_is_refused() {
    let o = run(&["verify", "alphabet-bound", "dsbs.json", "--budget", "1000"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).starts_with("error[budget]"));
}

#[test]
fn quarter_circle_sweep_traces_a_monotone_frontier() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("t.jsonl");
    let csv = dir.path().join("t.csv");
    let o = run(&[
        "trace",
        "bwz.json",
        "--sweep",
        "R1,D1",
        "--out",
        out.to_str().unwrap(),
        "--csv",
        csv.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let recs = records(&out);
    let rows: Vec<&Value> = recs.iter().filter(|r| r["record"] == "trace").collect();
    assert_eq!(rows.len(), 17);
    assert_eq!(
        keys(rows[0]),
        set(&[
            "record",
            "index",
            "direction",
            "rates",
            "distortions",
            "objective",
            "z_sizes",
            "sweeps"
        ])
    );
    let mut pts: Vec<(f64, f64)> = rows
        .iter()
        .map(|r| (r["rates"][0].as_f64().unwrap(), r["distortions"][0].as_f64().unwrap()))
        .collect();
    pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    assert!(pts.windows(2).all(|w| w[1].1 <= w[0].1 + 1e-9), "{pts:?}");
    // the pure-distortion direction reaches zero distortion, the pure-rate one zero rate
    assert!(rows[16]["distortions"][0].as_f64().unwrap() < 1e-6);
    assert!(rows[0]["rates"][0].as_f64().unwrap() < 1e-9);
    let mut want = set(SUMMARY);
    want.extend(["coordinates", "order"]);
    assert_eq!(keys(recs.last().unwrap()), want);
    assert_eq!(fs::read_to_string(&csv).unwrap().lines().count(), 18);
}

#[test]
fn single_distortion_direction_gives_one_row() {
    let dir = tempfile::tempdir().unwrap();
    let dirs = dir.path().join("dirs.txt");
    fs::write(&dirs, "# R1 R2 D1\n0 0 1\n").unwrap();
    let out = dir.path().join("t.jsonl");
    let o = run(&[
        "trace",
        "dsbs.json",
        "--directions",
        dirs.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let recs = records(&out);
    assert_eq!(recs.iter().filter(|r| r["record"] == "trace").count(), 1);
    assert!(recs[1]["distortions"][0].as_f64().unwrap() < 1e-9);
}

#[test]
fn bad_direction_files() {
    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("empty.txt");
    fs::write(&empty, "# nothing here\n\n").unwrap();
    let o = run(&["trace", "dsbs.json", "--directions", empty.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).starts_with("error[usage]"));

    let bad = dir.path().join("bad.txt");
    fs::write(&bad, "1 0 0\n0 -1 1\n").unwrap();
    let o = run(&["trace", "dsbs.json", "--directions", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("direction row 2"), "{}", stderr(&o));

    assert_eq!(run(&["trace", "dsbs.json"]).status.code(), Some(2));
    assert_eq!(run(&["trace", "dsbs.json", "--sweep", "R1,R9"]).status.code(), Some(2));
    assert_eq!(
        run(&["trace", "dsbs.json", "--sweep", "R1,D1", "--perm", "1,1"])
            .status
            .code(),
        Some(2)
    );
}
