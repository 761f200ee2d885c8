use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn seed(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_seed"))
        .args(args)
        .env_remove("SEED_OUTPUT_DIR")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = seed(args);
    assert!(
        out.status.success(),
        "seed {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn code(args: &[&str]) -> i32 {
    seed(args).status.code().expect("exit code")
}

fn read_csv(path: &Path) -> Vec<Vec<f64>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| !l.is_empty())
        .map(|l| l.split(',').map(|f| f.trim().parse().unwrap()).collect())
        .collect()
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn small_sim(dir: &Path, extra: &[&str]) {
    let mut args = vec![
        "simulate", "--out", s(dir), "--n", "60", "--p", "20", "--q", "30", "--seed", "5",
    ];
    args.extend_from_slice(extra);
    ok(&args);
}

#[test]
fn simulate_default_shapes() {
    let d = TempDir::new().unwrap();
    ok(&["simulate", "--out", s(d.path())]);
    let x = read_csv(&d.path().join("X.csv"));
    let y = read_csv(&d.path().join("Y.csv"));
    let c = read_csv(&d.path().join("C_true.csv"));
    assert_eq!((x.len(), x[0].len()), (100, 100));
    assert_eq!((y.len(), y[0].len()), (100, 200));
    assert_eq!((c.len(), c[0].len()), (100, 200));
    let t = json(&d.path().join("truth.json"));
    assert_eq!(t["rank"], 3);
    assert_eq!(t["u_supports"].as_array().unwrap().len(), 3);
    assert_eq!(t["generator"]["rho_x"], 0.5);
    assert_eq!(t["block"]["rows"], 23);
    assert_eq!(t["block"]["cols"], 45);
}

#[test]
fn simulate_is_deterministic_per_seed() {
    let a = TempDir::new().unwrap();
    let b = TempDir::new().unwrap();
    let c = TempDir::new().unwrap();
    small_sim(a.path(), &[]);
    small_sim(b.path(), &[]);
    ok(&["simulate", "--out", s(c.path()), "--n", "60", "--p", "20", "--q", "30", "--seed", "6"]);
    for f in ["X.csv", "Y.csv", "C_true.csv", "truth.json"] {
        let fa = fs::read(a.path().join(f)).unwrap();
        assert_eq!(fa, fs::read(b.path().join(f)).unwrap(), "{f}");
        assert_ne!(fa, fs::read(c.path().join(f)).unwrap(), "{f}");
    }
}

#[test]
fn rank_above_dimensions_is_a_parameter_error() {
    let d = TempDir::new().unwrap();
    assert_eq!(code(&["simulate", "--out", s(d.path()), "--p", "4", "--q", "10", "--rank", "5"]), 2);
    assert!(!d.path().join("X.csv").exists());
}

#[test]
fn unknown_flags_and_config_keys_are_usage_errors() {
    let d = TempDir::new().unwrap();
    assert_eq!(code(&["simulate", "--bogus"]), 2);
    let cfg = d.path().join("c.json");
    fs::write(&cfg, r#"{"simm": {}}"#).unwrap();
    assert_eq!(code(&["simulate", "--out", s(d.path()), "--config", s(&cfg)]), 2);
}

#[test]
fn config_file_with_flag_override() {
    let d = TempDir::new().unwrap();
    let cfg = d.path().join("c.json");
    fs::write(&cfg, r#"{"sim": {"n": 40, "p": 12, "q": 15, "r": 2}}"#).unwrap();
    ok(&["simulate", "--out", s(d.path()), "--config", s(&cfg), "--n", "33"]);
    let x = read_csv(&d.path().join("X.csv"));
    assert_eq!((x.len(), x[0].len()), (33, 12));
    assert_eq!(json(&d.path().join("truth.json"))["rank"], 2);
}

#[test]
fn output_directory_from_environment() {
    let d = TempDir::new().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_seed"))
        .args(["simulate", "--n", "20", "--p", "8", "--q", "9"])
        .env("SEED_OUTPUT_DIR", d.path())
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(d.path().join("X.csv").exists());
}

fn trace_gram(x: &[Vec<f64>]) -> f64 {
    let n = x.len() as f64;
    x.iter().flatten().map(|v| v * v).sum::<f64>() / n
}

fn frob(a: &[Vec<f64>]) -> f64 {
    a.iter().flatten().map(|v| v * v).sum::<f64>().sqrt()
}

fn frob_diff(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    a.iter()
        .flatten()
        .zip(b.iter().flatten())
        .map(|(x, y)| (x - y).powi(2))
        .sum::<f64>()
        .sqrt()
}

#[test]
fn noiseless_fit_and_predict_recover_truth() {
    let d = TempDir::new().unwrap();
    let p = d.path();
    ok(&["simulate", "--out", s(p), "--gamma", "0"]);
    let x = read_csv(&p.join("X.csv"));
    let rho = format!("{:e}", 1e-9 * trace_gram(&x));
    let stdout = ok(&[
        "fit", "--out", s(p), "--x", s(&p.join("X.csv")), "--y", s(&p.join("Y.csv")),
        "--truth", s(&p.join("C_true.csv")), "--rho", &rho,
    ]);
    let err: f64 = stdout
        .lines()
        .find_map(|l| l.strip_prefix("estimation error "))
        .expect("error reported")
        .parse()
        .unwrap();
    assert!(err <= 1e-6, "{err}");

    let model = json(&p.join("model.json"));
    assert_eq!(model["schema_version"], 1);
    assert_eq!(model["rank"], 3);
    assert_eq!(model["factors"].as_array().unwrap().len(), 3);
    assert!(model["gic_trace"].as_array().unwrap().len() >= 4);

    ok(&["predict", "--out", s(p), "--model", s(&p.join("model.json")), "--x", s(&p.join("X.csv"))]);
    let y = read_csv(&p.join("Y.csv"));
    let yhat = read_csv(&p.join("Yhat.csv"));
    assert!(frob_diff(&y, &yhat) <= 1e-8 * frob(&y));

    // Prediction is exactly X · C_hat as written to disk.
    let c_hat = read_csv(&p.join("C_hat.csv"));
    let by_hand: Vec<Vec<f64>> = x
        .iter()
        .map(|row| {
            (0..c_hat[0].len())
                .map(|j| row.iter().zip(&c_hat).map(|(a, c)| a * c[j]).sum())
                .collect()
        })
        .collect();
    assert!(frob_diff(&by_hand, &yhat) <= 1e-12 * frob(&y));
}

#[test]
fn rank_cap_is_honored() {
    let d = TempDir::new().unwrap();
    let p = d.path();
    small_sim(p, &[]);
    ok(&["fit", "--out", s(p), "--x", s(&p.join("X.csv")), "--y", s(&p.join("Y.csv")), "--rank-max", "1"]);
    let m = json(&p.join("model.json"));
    assert!(m["rank"].as_u64().unwrap() <= 1);
    assert!(m["extracted"].as_u64().unwrap() <= 1);
}

#[test]
fn fit_input_errors() {
    let d = TempDir::new().unwrap();
    let p = d.path();
    small_sim(p, &[]);
    let empty = p.join("empty.csv");
    fs::write(&empty, "").unwrap();
    assert_eq!(code(&["fit", "--out", s(p), "--x", s(&p.join("X.csv")), "--y", s(&empty)]), 3);
    assert_eq!(
        code(&["fit", "--out", s(p), "--x", s(&p.join("X.csv")), "--y", s(&p.join("missing.csv"))]),
        3
    );
    let short = p.join("short.csv");
    fs::write(&short, "1,2\n3,4\n").unwrap();
    assert_eq!(code(&["fit", "--out", s(p), "--x", s(&p.join("X.csv")), "--y", s(&short)]), 3);
}

#[test]
fn solver_failure_exit_code() {
    let d = TempDir::new().unwrap();
    let p = d.path();
    small_sim(p, &[]);
    let cfg = p.join("c.json");
    fs::write(&cfg, r#"{"model": {"variant": "fast", "solver": {"null_tol": 1e-300}}}"#).unwrap();
    let out = seed(&["fit", "--out", s(p), "--config", s(&cfg), "--x", s(&p.join("X.csv")), "--y", s(&p.join("Y.csv"))]);
    assert_eq!(out.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&out.stderr).contains("near-null"));
}

#[test]
fn predict_edge_cases() {
    let d = TempDir::new().unwrap();
    let p = d.path();
    small_sim(p, &[]);
    ok(&["fit", "--out", s(p), "--x", s(&p.join("X.csv")), "--y", s(&p.join("Y.csv"))]);
    assert_eq!(
        code(&["predict", "--out", s(p), "--model", s(&p.join("model.json")), "--x", s(&p.join("Y.csv"))]),
        3
    );

    let mut m = json(&p.join("model.json"));
    let (rows, cols) = (m["p"].as_u64().unwrap() as usize, m["q"].as_u64().unwrap() as usize);
    m["rank"] = 0.into();
    m["factors"] = Value::Array(vec![]);
    m["coefficient"] = serde_json::to_value(vec![vec![0.0; cols]; rows]).unwrap();
    let zero = p.join("zero.json");
    fs::write(&zero, serde_json::to_string(&m).unwrap()).unwrap();
    ok(&["predict", "--out", s(p), "--model", s(&zero), "--x", s(&p.join("X_test.csv")), "--output", "Z.csv"]);
    assert!(read_csv(&p.join("Z.csv")).iter().flatten().all(|v| *v == 0.0));

    m["schema_version"] = 99.into();
    fs::write(&zero, serde_json::to_string(&m).unwrap()).unwrap();
    assert_eq!(code(&["predict", "--out", s(p), "--model", s(&zero), "--x", s(&p.join("X_test.csv"))]), 3);
}

const BENCH: [&str; 10] = ["--n", "50", "--p", "30", "--q", "40", "--rank", "2", "--seed", "3"];

#[test]
fn single_replication_has_zero_stderr() {
    let d = TempDir::new().unwrap();
    let mut args = vec!["benchmark", "--out", s(d.path()), "--reps", "1"];
    args.extend_from_slice(&BENCH);
    ok(&args);
    let text = fs::read_to_string(d.path().join("summary.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("metric,mean,stderr"));
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    let names: Vec<&str> = rows.iter().map(|r| r[0]).collect();
    assert_eq!(names, ["pred_error", "est_error", "rank_error", "support_auc"]);
    assert!(rows.iter().all(|r| r[2].parse::<f64>().unwrap() == 0.0));
    let detail = fs::read_to_string(d.path().join("detail.jsonl")).unwrap();
    assert_eq!(detail.lines().count(), 1);
}

#[test]
fn benchmark_output_independent_of_worker_count() {
    let a = TempDir::new().unwrap();
    let b = TempDir::new().unwrap();
    for (dir, jobs) in [(&a, "1"), (&b, "3")] {
        let mut args = vec!["benchmark", "--out", s(dir.path()), "--reps", "4", "--baseline", "--jobs", jobs];
        args.extend_from_slice(&BENCH);
        ok(&args);
    }
    for f in ["summary.csv", "baseline_summary.csv", "detail.jsonl"] {
        assert_eq!(fs::read(a.path().join(f)).unwrap(), fs::read(b.path().join(f)).unwrap(), "{f}");
    }
    assert_eq!(code(&["benchmark", "--out", s(a.path()), "--jobs", "0"]), 2);
    assert_eq!(code(&["benchmark", "--out", s(a.path()), "--reps", "0"]), 2);
}

#[test]
fn csv_detail_format() {
    let d = TempDir::new().unwrap();
    let mut args = vec!["benchmark", "--out", s(d.path()), "--reps", "2", "--format", "csv"];
    args.extend_from_slice(&BENCH);
    ok(&args);
    let text = fs::read_to_string(d.path().join("detail.csv")).unwrap();
    assert!(text.starts_with("index,seed,stream,selected_rank,"));
    assert_eq!(text.lines().count(), 3);
}

#[test]
fn mu_sweep_emits_top_singular_values() {
    let d = TempDir::new().unwrap();
    let mut args = vec!["benchmark", "--out", s(d.path()), "--reps", "2", "--sweep", "mu"];
    args.extend_from_slice(&BENCH);
    ok(&args);
    let text = fs::read_to_string(d.path().join("mu_path.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("rep,mu,factors,rank,effective_rank,sv1,sv2,sv3,sv4,sv5"));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 2 * 5);
    for r in rows {
        let cells: Vec<&str> = r.split(',').collect();
        assert_eq!(cells.len(), 10);
        let sv: Vec<f64> = cells[5..].iter().filter(|c| !c.is_empty()).map(|c| c.parse().unwrap()).collect();
        assert!(sv.windows(2).all(|w| w[0] >= w[1]));
    }
    assert_eq!(fs::read_to_string(d.path().join("mu_summary.csv")).unwrap().lines().count(), 6);
}

#[test]
fn theta_sweep_with_custom_grid() {
    let d = TempDir::new().unwrap();
    let mut args = vec!["benchmark", "--out", s(d.path()), "--reps", "2", "--sweep", "theta", "--grid", "0.5,1,2"];
    args.extend_from_slice(&BENCH);
    ok(&args);
    let text = fs::read_to_string(d.path().join("theta_path.csv")).unwrap();
    assert_eq!(text.lines().count(), 1 + 2 * 3);
    let summary = fs::read_to_string(d.path().join("theta_summary.csv")).unwrap();
    assert!(summary.starts_with("theta,support_size_mean,support_size_stderr,kept_fraction\n"));
}

#[test]
fn network_inference_on_planted_graph() {
    let d = TempDir::new().unwrap();
    let p = d.path();
    ok(&["simulate", "--kind", "network", "--out", s(p), "--seed", "11"]);
    let stdout = ok(&[
        "infer-network", "--out", s(p), "--series", s(&p.join("series.csv")), "--lags", "2",
        "--reference", s(&p.join("reference.csv")), "--edge-threshold", "0.05",
    ]);
    let auc: f64 = stdout
        .lines()
        .find_map(|l| l.strip_prefix("AUC "))
        .expect("AUC printed")
        .parse()
        .unwrap();
    assert!(auc >= 0.9, "{auc}");
    let scores = read_csv(&p.join("scores.csv"));
    assert_eq!((scores.len(), scores[0].len()), (30, 30));
    let edges = fs::read_to_string(p.join("edges.csv")).unwrap();
    assert!(edges.starts_with("source,target,score\n"));
    let listed: Vec<f64> = edges.lines().skip(1).map(|l| l.rsplit(',').next().unwrap().parse().unwrap()).collect();
    assert!(!listed.is_empty());
    assert!(listed.iter().all(|v| *v > 0.05));
    assert!(listed.windows(2).all(|w| w[0] >= w[1]));
    let m = json(&p.join("model.json"));
    assert_eq!(m["network"]["lags"], 2);
    assert_eq!(m["network"]["lag_order"], "most_recent_first");
    assert_eq!(m["p"], 60);
    assert_eq!(m["q"], 30);
}

#[test]
fn network_input_errors() {
    let d = TempDir::new().unwrap();
    let p = d.path();
    let series = p.join("s.csv");
    fs::write(&series, "1,2\n3,4\n5,7\n").unwrap();
    assert_eq!(code(&["infer-network", "--out", s(p), "--series", s(&series), "--lags", "3"]), 3);

    let single = p.join("one.csv");
    let col: String = (0..40).map(|t| format!("{}\n", ((t * 7) % 11) as f64 - 5.0)).collect();
    fs::write(&single, col).unwrap();
    let reference = p.join("r.csv");
    fs::write(&reference, "0\n").unwrap();
    let out = seed(&[
        "infer-network", "--out", s(p), "--series", s(&single), "--reference", s(&reference),
    ]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn cross_validated_thresholds_are_applied() {
    let d = TempDir::new().unwrap();
    small_sim(d.path(), &[]);
    let (x, y) = (d.path().join("X.csv"), d.path().join("Y.csv"));
    let stdout = ok(&["fit", "--out", s(d.path()), "--x", s(&x), "--y", s(&y), "--cv-folds", "3"]);
    assert!(stdout.contains("cv theta_u"), "{stdout}");
    let body = fs::read_to_string(d.path().join("cv_scores.csv")).unwrap();
    assert_eq!(body.lines().next(), Some("theta_u,theta_v,cv_error"));
    assert_eq!(body.lines().count(), 37);
    let m = json(&d.path().join("model.json"));
    let c_hat = read_csv(&d.path().join("C_hat.csv"));
    let mut rebuilt = vec![vec![0.0; 30]; 20];
    for f in m["factors"].as_array().unwrap() {
        let u: Vec<f64> = serde_json::from_value(f["u"].clone()).unwrap();
        let v: Vec<f64> = serde_json::from_value(f["v"].clone()).unwrap();
        for i in 0..20 {
            for j in 0..30 {
                rebuilt[i][j] += u[i] * v[j];
            }
        }
    }
    assert!(frob_diff(&rebuilt, &c_hat) <= 1e-12 * frob(&c_hat).max(1.0));
    assert_eq!(code(&["fit", "--out", s(d.path()), "--x", s(&x), "--y", s(&y), "--cv-folds", "1"]), 2);
}
