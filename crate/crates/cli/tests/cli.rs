use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use gnpr::clustering::adjusted_rand;
use serde_json::Value;

fn gnpr(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gnpr"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn synth(dir: &Path, extra: &[&str]) -> PathBuf {
    let panel = dir.join("panel.csv");
    let mut args = vec!["synth", "-q", "-o", path_str(&panel)];
    args.extend_from_slice(extra);
    let out = gnpr(&args);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    panel
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

/// Every file under `dir`, keyed by relative path.
fn read_tree(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    fn walk(root: &Path, dir: &Path, out: &mut BTreeMap<PathBuf, Vec<u8>>) {
        for entry in fs::read_dir(dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                walk(root, &path, out);
            } else {
                out.insert(path.strip_prefix(root).unwrap().to_path_buf(), fs::read(&path).unwrap());
            }
        }
    }
    let mut out = BTreeMap::new();
    walk(dir, dir, &mut out);
    out
}

#[test]
fn malformed_csv_is_an_input_error() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.csv");
    fs::write(&bad, "t,a,b\n1,1,2\n2,oops,3\n3,4,5\n").unwrap();
    let out = gnpr(&["cluster", "-i", path_str(&bad)]);
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("line 3, column 2"), "{stderr}");
    assert!(stderr.contains("error[input]"), "{stderr}");
}

#[test]
fn json_error_report() {
    let out = gnpr(&["cluster", "--json-logs", "-i", "/nonexistent/panel.csv"]);
    assert_eq!(out.status.code(), Some(2));
    let line = String::from_utf8_lossy(&out.stderr);
    let v: Value = serde_json::from_str(line.lines().last().unwrap()).unwrap();
    assert_eq!(v["kind"], "input");
    assert_eq!(v["exit_code"], 2);
}

#[test]
fn bad_parameters_are_config_errors() {
    let dir = tempfile::tempdir().unwrap();
    let panel = synth(dir.path(), &["--blocks", "2x3", "--m", "50"]);
    for args in [
        vec!["cluster", "-i", path_str(&panel), "--theta", "1.5"],
        vec!["cluster", "-i", path_str(&panel), "--k-range", "2..9"],
        vec!["cluster", "-i", path_str(&panel), "--subsample", "0.3"],
        vec!["cluster", "-i", path_str(&panel), "--bin-rule", "width"],
        vec!["cluster", "-i", path_str(&panel), "--no-such-flag"],
        vec!["pipeline", "-i", path_str(&panel), "-o", "/proc/forbidden/out"],
    ] {
        let out = gnpr(&args);
        assert_eq!(out.status.code(), Some(3), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    }
}

#[test]
fn help_succeeds() {
    let out = gnpr(&["--help"]);
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    for cmd in ["represent", "distances", "cluster", "stability", "synth", "pipeline"] {
        assert!(text.contains(cmd), "{cmd}");
    }
    assert!(gnpr(&["pipeline", "--help"]).status.success());
}

#[test]
fn pipeline_identical_across_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let panel = synth(dir.path(), &["--blocks", "3x5", "--m", "300", "--seed", "3"]);
    let run = |threads: &str, name: &str| {
        let out_dir = dir.path().join(name);
        let out = gnpr(&[
            "pipeline",
            "-q",
            "--threads",
            threads,
            "--seed",
            "11",
            "--theta-sweep",
            "--stability-runs",
            "8",
            "-i",
            path_str(&panel),
            "-o",
            path_str(&out_dir),
        ]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        read_tree(&out_dir)
    };
    let one = run("1", "one");
    let eight = run("8", "eight");
    assert!(one.len() > 10);
    assert_eq!(one, eight);
}

#[test]
fn extreme_thetas_both_partition_every_series() {
    let dir = tempfile::tempdir().unwrap();
    let panel = synth(dir.path(), &["--blocks", "2x6", "--m", "400", "--seed", "4"]);
    for theta in ["0", "1"] {
        let summary = dir.path().join(format!("summary-{theta}.csv"));
        let assignment = dir.path().join(format!("assignment-{theta}.json"));
        let out = gnpr(&[
            "cluster",
            "-q",
            "--theta",
            theta,
            "--stability-runs",
            "6",
            "-i",
            path_str(&panel),
            "--summary",
            path_str(&summary),
            "-o",
            path_str(&assignment),
        ]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        let text = fs::read_to_string(&summary).unwrap();
        let sizes = text.lines().find(|l| l.starts_with("Size,")).unwrap();
        let total: usize = sizes.split(',').skip(1).map(|v| v.parse::<usize>().unwrap()).sum();
        assert_eq!(total, 12, "theta {theta}");
        let doc = json(&assignment);
        assert_eq!(doc["labels"].as_object().unwrap().len(), 12);
        assert!(doc["stability"]["selected_k"].is_u64());
    }
}

#[test]
fn synthetic_templates_recovered_through_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let panel = synth(
        dir.path(),
        &["--blocks", "3x3", "--rho", "0.98", "--dists", "gaussian", "--m", "500", "--seed", "8"],
    );
    let out_dir = dir.path().join("out");
    let out = gnpr(&[
        "pipeline",
        "-q",
        "--theta",
        "1",
        "--k",
        "3",
        "-i",
        path_str(&panel),
        "-o",
        path_str(&out_dir),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let truth = json(&dir.path().join("panel.truth.json"));
    let assignment = json(&out_dir.join("assignment.json"));
    let ids: Vec<&str> = truth["ids"].as_array().unwrap().iter().map(|v| v.as_str().unwrap()).collect();
    let found: Vec<usize> = ids
        .iter()
        .map(|id| assignment["labels"][*id].as_u64().unwrap() as usize)
        .collect();
    let expected: Vec<usize> = truth["dependence_labels"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_u64().unwrap() as usize)
        .collect();
    assert_eq!(adjusted_rand(&found, &expected).unwrap(), 1.0);
    for name in ["distances.csv", "summary.csv", "observations.csv"] {
        let text = fs::read_to_string(out_dir.join(name)).unwrap();
        assert!(text.starts_with("# gnpr "), "{name} lacks provenance");
    }
}

#[test]
fn represent_schema() {
    let dir = tempfile::tempdir().unwrap();
    let panel = synth(dir.path(), &["--blocks", "1x3", "--m", "20"]);
    let out_path = dir.path().join("rep.json");
    let out = gnpr(&["represent", "-q", "--bins", "8", "-i", path_str(&panel), "-o", path_str(&out_path)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let doc = json(&out_path);
    let series = doc["series"].as_array().unwrap();
    assert_eq!(series.len(), 3);
    let first = &series[0];
    assert_eq!(first["id"], "S0");
    assert_eq!(first["ranks"].as_array().unwrap().len(), 20);
    assert!(first["density"]["origin"].is_f64());
    assert!(first["density"]["width"].is_f64());
    let masses: f64 = first["density"]["masses"].as_array().unwrap().iter().map(|m| m.as_f64().unwrap()).sum();
    assert!((masses - 1.0).abs() < 1e-12);
}

#[test]
fn distances_csv_and_json() {
    let dir = tempfile::tempdir().unwrap();
    let panel = synth(dir.path(), &["--blocks", "2x2", "--m", "40"]);
    let out = gnpr(&["distances", "-q", "-i", path_str(&panel), "--theta", "0.3"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let header = text.lines().find(|l| !l.starts_with('#')).unwrap();
    assert_eq!(header, "id,S0,S1,S2,S3");

    let json_path = dir.path().join("d.json");
    let out = gnpr(&["distances", "-q", "-i", path_str(&panel), "-o", path_str(&json_path)]);
    assert!(out.status.success());
    let doc = json(&json_path);
    let rows = doc["matrix"]["values"].as_array().unwrap();
    assert_eq!(rows.len(), 4);
    assert_eq!(rows[1][1], 0.0);
    assert_eq!(rows[0][2], rows[2][0]);
}

#[test]
fn stability_report() {
    let dir = tempfile::tempdir().unwrap();
    let panel = synth(dir.path(), &["--blocks", "3x4", "--m", "300", "--seed", "2"]);
    let out = gnpr(&[
        "stability",
        "-q",
        "--theta",
        "1",
        "--k-range",
        "2..5",
        "--stability-runs",
        "6",
        "-i",
        path_str(&panel),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let doc: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(doc["k_range"].as_array().unwrap().len(), 4);
    assert_eq!(doc["scores"].as_array().unwrap().len(), 4);
    assert!(doc["provenance"]["config"]["seed"].is_u64());
}

#[test]
fn synth_from_spec_file() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("spec.json");
    fs::write(
        &spec,
        r#"{"n_series": 4, "m_obs": 30, "seed": 9,
            "correlation_blocks": [{"size": 2, "rho": 0.5}, {"size": 2, "rho": 0.0}],
            "distribution_groups": [{"family": "laplace", "scale": 2.0}]}"#,
    )
    .unwrap();
    let panel = dir.path().join("p.csv");
    let truth = dir.path().join("t.json");
    let out = gnpr(&[
        "synth",
        "-q",
        "--spec",
        path_str(&spec),
        "-o",
        path_str(&panel),
        "--truth",
        path_str(&truth),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let t = json(&truth);
    assert_eq!(t["dependence_labels"], serde_json::json!([0, 0, 1, 1]));
    assert_eq!(t["provenance"]["config"]["seed"], 9);
    let rows = fs::read_to_string(&panel).unwrap().lines().filter(|l| !l.starts_with('#')).count();
    assert_eq!(rows, 1 + 31);

    let first = fs::read(&panel).unwrap();
    gnpr(&["synth", "-q", "--spec", path_str(&spec), "-o", path_str(&panel), "--truth", path_str(&truth)]);
    assert_eq!(first, fs::read(&panel).unwrap());
}
