use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn otmkit(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_otmkit"))
        .args(args)
        .current_dir(dir)
        .env("OTMKIT_LOG", "off")
        .output()
        .unwrap()
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout)
        .unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&out.stdout)))
}

fn write(dir: &TempDir, name: &str, body: &str) -> PathBuf {
    let p = dir.path().join(name);
    std::fs::write(&p, body).unwrap();
    p
}

fn fixtures() -> TempDir {
    let dir = tempfile::tempdir().unwrap();
    write(
        &dir,
        "one_a.json",
        r#"{"kernel": [[1.0]], "initial": [1.0], "labels": [[0.0]]}"#,
    );
    write(
        &dir,
        "one_b.json",
        r#"{"kernel": [[1.0]], "initial": [1.0], "labels": [[0.7]]}"#,
    );
    write(
        &dir,
        "x.json",
        r#"{"kernel": [[0.6, 0.4], [0.3, 0.7]], "initial": [0.5, 0.5], "labels": [[0.0], [1.0]]}"#,
    );
    write(
        &dir,
        "y.json",
        r#"{"kernel": [[0.2, 0.8], [0.5, 0.5]], "initial": [0.3, 0.7], "labels": [[0.2], [1.5]]}"#,
    );
    // stationary: (3/7, 4/7) for the kernel of x
    write(
        &dir,
        "xs.json",
        r#"{"kernel": [[0.6, 0.4], [0.3, 0.7]], "initial": [0.42857142857142855, 0.5714285714285714], "labels": [[0.0], [1.0]]}"#,
    );
    write(
        &dir,
        "xs_perm.json",
        r#"{"kernel": [[0.7, 0.3], [0.4, 0.6]], "initial": [0.5714285714285714, 0.42857142857142855], "labels": [[1.0], [0.0]]}"#,
    );
    write(
        &dir,
        "reducible.json",
        r#"{"kernel": [[1.0, 0.0], [0.5, 0.5]], "initial": [0.5, 0.5], "labels": [[0.0], [1.0]]}"#,
    );
    write(&dir, "zeros.json", "[[0.0, 0.0], [0.0, 0.0]]");
    write(&dir, "cycle.tsv", "0\t1\n1\t2\n2\t0\n");
    write(
        &dir,
        "cycle.labels.json",
        r#"{"labels": [[0.0], [1.0], [2.0]]}"#,
    );
    write(&dir, "cost.csv", "0.0,1.0\n1.0,0.0\n");
    write(&dir, "p.json", "[0.2, 0.3, 0.5]");
    dir
}

#[test]
fn single_state_distance_is_the_cost() {
    let dir = fixtures();
    let out = otmkit(
        &[
            "distance",
            "--mode",
            "dwl-inf",
            "--delta",
            "0.5",
            "--epsilon",
            "0.05",
            "one_a.json",
            "one_b.json",
            "--cost",
            "labels:euclidean",
        ],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(0));
    let r = json(&out);
    // default tolerance bounds the error by 1e-8 * max C * (1 - delta) / delta
    assert!((r["result"]["value"].as_f64().unwrap() - 0.7).abs() < 1e-8);
    assert_eq!(r["schema_version"], 1);
    assert_eq!(r["converged"], true);
    assert_eq!(r["inputs"]["x"]["sha256"].as_str().unwrap().len(), 64);
    assert_eq!(r["settings"]["sinkhorn_tol"], 1e-9);
}

#[test]
fn depth_zero_wl_is_plain_ot() {
    let dir = fixtures();
    let out = otmkit(
        &[
            "distance", "--mode", "wl", "--depth", "0", "x.json", "y.json", "--format", "tsv",
        ],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let value: f64 = text.split('\t').next().unwrap().parse().unwrap();
    // labels 0,1 vs 0.2,1.5 with masses (.5,.5) and (.3,.7): greedy monotone coupling
    let expected = 0.3 * 0.2 + 0.2 * 1.5 + 0.5 * 0.5;
    assert!((value - expected).abs() < 1e-12, "{value} vs {expected}");
}

#[test]
fn zero_discount_matches_wl_bitwise() {
    let dir = fixtures();
    let a = otmkit(
        &[
            "distance", "--mode", "dwl", "--depth", "3", "--delta", "0", "x.json", "y.json",
            "--format", "tsv",
        ],
        dir.path(),
    );
    let b = otmkit(
        &[
            "distance", "--mode", "wl", "--depth", "3", "x.json", "y.json", "--format", "tsv",
        ],
        dir.path(),
    );
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn reports_are_reproducible_apart_from_wall_time() {
    let dir = fixtures();
    let args = ["distance", "x.json", "y.json", "--epsilon", "0.05"];
    let mut a = json(&otmkit(&args, dir.path()));
    let mut b = json(&otmkit(&args, dir.path()));
    a["wall_time_s"] = Value::Null;
    b["wall_time_s"] = Value::Null;
    assert_eq!(
        serde_json::to_string(&a).unwrap(),
        serde_json::to_string(&b).unwrap()
    );
}

#[test]
fn out_flag_writes_file() {
    let dir = fixtures();
    let out = otmkit(
        &["distance", "x.json", "y.json", "--out", "report.json"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty());
    let r: Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("report.json")).unwrap())
            .unwrap();
    assert!(r["result"]["value"].is_f64());
}

#[test]
fn non_convergence_exits_two_with_partial_value() {
    let dir = fixtures();
    let out = otmkit(
        &["distance", "x.json", "y.json", "--max-iter", "2"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(2));
    let r = json(&out);
    assert_eq!(r["converged"], false);
    assert!(r["result"]["value"].is_f64());
}

#[test]
fn input_errors_exit_one_with_json() {
    let dir = fixtures();
    for args in [
        vec!["distance", "missing.json", "y.json"],
        vec!["distance", "x.json", "y.json", "--cost", "labels:cosine"],
        vec!["distance", "x.json", "y.json", "--mode", "bogus"],
        vec!["distance", "x.json", "y.json", "--delta", "1.5"],
        vec![
            "gradient",
            "x.json",
            "y.json",
            "--delta",
            "0.5",
            "--epsilon",
            "0",
        ],
        vec![
            "gradient",
            "x.json",
            "y.json",
            "--delta",
            "0",
            "--epsilon",
            "0.1",
        ],
    ] {
        let out = otmkit(&args, dir.path());
        assert_eq!(out.status.code(), Some(1), "{args:?}");
        let r = json(&out);
        assert!(r["error"]["kind"].is_string(), "{args:?}");
    }
}

#[test]
fn cost_file_and_horizon_file() {
    let dir = fixtures();
    let out = otmkit(
        &[
            "distance",
            "--mode",
            "otm-p",
            "--p",
            "p.json",
            "x.json",
            "y.json",
            "--cost",
            "file:cost.csv",
        ],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(0));
    let r = json(&out);
    assert!(r["inputs"]["cost"]["sha256"].is_string());
    assert!(r["inputs"]["p"]["sha256"].is_string());
    let v = r["result"]["value"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&v));
}

#[test]
fn graph_inputs_are_random_walks() {
    let dir = fixtures();
    let out = otmkit(
        &[
            "distance",
            "cycle.tsv",
            "cycle.tsv",
            "--lazy",
            "0.2",
            "--stationary",
            "--mode",
            "otc",
        ],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(0));
    let r = json(&out);
    assert!(r["inputs"]["x_labels"].is_object());
    for e in r["result"]["entries"].as_array().unwrap() {
        assert!(e["value"].as_f64().unwrap().abs() < 1e-9);
    }
}

#[test]
fn gradient_of_single_state_chain() {
    let dir = fixtures();
    let out = otmkit(
        &[
            "gradient",
            "one_a.json",
            "one_b.json",
            "--delta",
            "0.5",
            "--epsilon",
            "0.05",
        ],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(0));
    let g = &json(&out)["result"]["gradient"];
    assert!((g["d_C"][0][0].as_f64().unwrap() - 1.0).abs() < 1e-12);
    assert_eq!(g["d_mX"][0][0].as_f64().unwrap(), 0.0);
    assert_eq!(g["d_mY"][0][0].as_f64().unwrap(), 0.0);
}

#[test]
fn gradient_with_fd_check() {
    let dir = fixtures();
    let out = otmkit(
        &[
            "gradient",
            "x.json",
            "y.json",
            "--delta",
            "0.4",
            "--epsilon",
            "0.05",
            "--check-fd",
            "--seed",
            "3",
        ],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(0));
    let r = json(&out);
    let fd = &r["result"]["finite_differences"];
    assert!(fd["worst"].as_f64().unwrap() <= 1e-3);
    assert_eq!(fd["seed"], 3);
    assert_eq!(r["seed"], 3);
}

#[test]
fn zero_upstream_gives_zero_bundle() {
    let dir = fixtures();
    let out = otmkit(
        &[
            "gradient",
            "x.json",
            "y.json",
            "--delta",
            "0.4",
            "--epsilon",
            "0.05",
            "--upstream",
            "zeros.json",
        ],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(0));
    let g = &json(&out)["result"]["gradient"];
    for key in ["d_C", "d_mX", "d_mY"] {
        for row in g[key].as_array().unwrap() {
            assert!(row
                .as_array()
                .unwrap()
                .iter()
                .all(|v| v.as_f64() == Some(0.0)));
        }
    }
    for key in ["d_nuX", "d_nuY"] {
        assert!(g[key]
            .as_array()
            .unwrap()
            .iter()
            .all(|v| v.as_f64() == Some(0.0)));
    }
}

#[test]
fn compare_identical_chains_is_all_zero() {
    let dir = fixtures();
    let out = otmkit(&["compare", "xs.json", "xs.json"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    let r = json(&out);
    for (name, v) in r["result"]["values"].as_object().unwrap() {
        assert!(v.as_f64().unwrap().abs() < 1e-9, "{name}");
    }
}

#[test]
fn compare_stationary_pair_flags_hold() {
    let dir = fixtures();
    let out = otmkit(
        &[
            "compare",
            "xs.json",
            "xs_perm.json",
            "--cost",
            "labels:manhattan",
        ],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(0));
    let flags = &json(&out)["result"]["flags"];
    assert_eq!(flags["lower_bound_holds"], true);
    assert_eq!(flags["otm_below_otc"], true);
    assert_eq!(flags["otc_nondecreasing"], true);
}

#[test]
fn compare_otc_requires_stationarity() {
    let dir = fixtures();
    let out = otmkit(
        &["compare", "x.json", "y.json", "--mode", "otc"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(json(&out)["error"]["kind"], "NotStationary");
}

#[test]
fn diagnose_flags_reducible_chain() {
    let dir = fixtures();
    let out = otmkit(
        &["diagnose", "reducible.json", "x.json", "--paths", "1000"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(0));
    let r = json(&out);
    assert_eq!(r["result"]["structure"]["x"]["irreducible"], false);
    assert_eq!(r["result"]["wl_infinity_eligible"], false);
}

#[test]
fn diagnose_replays_rate_bound_and_monte_carlo() {
    let dir = fixtures();
    let out = otmkit(
        &[
            "diagnose", "x.json", "y.json", "--delta", "0.5", "--paths", "50000", "--seed", "9",
        ],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(0));
    let r = &json(&out)["result"];
    assert_eq!(r["rate_bound"]["holds"], true);
    assert_eq!(r["wl_infinity"]["envelopes_monotone"], true);
    assert_eq!(r["monte_carlo"]["within_3se"], true);
    assert_eq!(r["monte_carlo"]["estimate"]["seed"], 9);
}

#[test]
fn help_and_version_exit_zero() {
    let dir = fixtures();
    assert_eq!(otmkit(&["--help"], dir.path()).status.code(), Some(0));
    let v = otmkit(&["--version"], dir.path());
    assert_eq!(v.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&v.stdout).contains(env!("CARGO_PKG_VERSION")));
}
