use serde_json::Value;
use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn rmtlab(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rmtlab"))
        .args(args)
        .arg("--out-dir")
        .arg(dir)
        .env_remove("RMTLAB_THREADS")
        .output()
        .expect("binary runs")
}

fn summary(dir: &Path, stem: &str) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join(format!("{stem}.json"))).unwrap()).unwrap()
}

#[test]
fn fredholm_table_starts_at_unit_gap_probability() {
    let dir = tempfile::tempdir().unwrap();
    let out = rmtlab(dir.path(), &["fredholm", "--s-max", "3", "--order", "80"]);
    assert_eq!(out.status.code(), Some(0));
    let csv = fs::read_to_string(dir.path().join("fredholm.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("s,E,p,cdf"));
    let first: Vec<f64> = lines.next().unwrap().split(',').map(|x| x.parse().unwrap()).collect();
    assert_eq!((first[0], first[1]), (0.0, 1.0));
    assert_eq!(csv.lines().count(), 62);
    assert!(dir.path().join("fredholm.gp").exists());
}

#[test]
fn fredholm_check_mode_passes() {
    let dir = tempfile::tempdir().unwrap();
    let out = rmtlab(dir.path(), &["--check", "fredholm", "--s-max", "1"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(summary(dir.path(), "fredholm")["check"]["passed"], Value::Bool(true));
}

#[test]
fn mp_check_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["mp-check", "--n", "120", "--gamma", "2", "--trials", "10", "--seed", "1"];
    let read = |ext: &str| fs::read(dir.path().join(format!("mp-check.{ext}"))).unwrap();
    assert_eq!(rmtlab(dir.path(), &args).status.code(), Some(0));
    let (csv, json) = (read("csv"), read("json"));
    assert_eq!(rmtlab(dir.path(), &args).status.code(), Some(0));
    assert_eq!(csv, read("csv"));
    assert_eq!(json, read("json"));
}

#[test]
fn thread_count_does_not_change_results() {
    let one = tempfile::tempdir().unwrap();
    let many = tempfile::tempdir().unwrap();
    let args = ["mp-check", "--n", "60", "--trials", "6", "--seed", "4"];
    let out = Command::new(env!("CARGO_BIN_EXE_rmtlab"))
        .args(args)
        .arg("--out-dir")
        .arg(one.path())
        .env("RMTLAB_THREADS", "1")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let mut with_flag = args.to_vec();
    with_flag.extend(["--threads", "3"]);
    assert_eq!(rmtlab(many.path(), &with_flag).status.code(), Some(0));
    let csv = |d: &Path| fs::read(d.join("mp-check.csv")).unwrap();
    assert_eq!(csv(one.path()), csv(many.path()));
}

#[test]
fn two_point_summary_reports_estimate_and_limit() {
    let dir = tempfile::tempdir().unwrap();
    let out = rmtlab(dir.path(), &["two-point", "--n", "100", "--trials", "40", "--u", "2.0", "--gamma", "1"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let s = summary(dir.path(), "two-point");
    for key in ["mc_mean", "theory", "se"] {
        assert!(s["results"][key].as_f64().unwrap().is_finite(), "{key}");
    }
    assert_eq!(s["seed"], s["config"]["seed"]);
    assert_eq!(s["config"]["n"], 100);
    assert_eq!(s["config"]["u"], 2.0);
    let csv = fs::read_to_string(dir.path().join("two-point.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("trial,s2,mean,se,theory"));
    assert_eq!(csv.lines().count(), 41);
}

#[test]
fn check_mode_fails_with_status_two() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["mp-check", "--n", "40", "--trials", "2", "--tolerance", "1e-9"];
    assert_eq!(rmtlab(dir.path(), &args).status.code(), Some(0));
    let mut checked = vec!["--check"];
    checked.extend(args);
    assert_eq!(rmtlab(dir.path(), &checked).status.code(), Some(2));
    assert_eq!(summary(dir.path(), "mp-check")["check"]["passed"], Value::Bool(false));
}

#[test]
fn unknown_config_key_is_rejected_with_location() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    fs::write(&cfg, "{\n  \"n\": 40,\n  \"trails\": 2\n}\n").unwrap();
    let out = rmtlab(dir.path(), &["mp-check", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("trails") && err.contains("line 3"), "{err}");
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    fs::write(&cfg, r#"{"command": "mp-check", "n": 40, "trials": 2, "seed": 5}"#).unwrap();
    let out = rmtlab(dir.path(), &["mp-check", "--config", cfg.to_str().unwrap(), "--trials", "3"]);
    assert_eq!(out.status.code(), Some(0));
    let s = summary(dir.path(), "mp-check");
    assert_eq!(s["config"]["trials"], 3);
    assert_eq!(s["config"]["n"], 40);
    assert_eq!(s["seed"], 5);
    let wrong = rmtlab(dir.path(), &["fredholm", "--config", cfg.to_str().unwrap()]);
    assert_eq!(wrong.status.code(), Some(1));
}

#[test]
fn invalid_values_exit_with_status_one() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(rmtlab(dir.path(), &["mp-check", "--gamma", "0.5"]).status.code(), Some(1));
    assert_eq!(rmtlab(dir.path(), &["sample-spectrum", "--law", "cauchy"]).status.code(), Some(1));
    assert_eq!(rmtlab(dir.path(), &["spacing", "--bogus", "1"]).status.code(), Some(1));
}

#[test]
fn sample_spectrum_exports_csv_and_matrix() {
    let dir = tempfile::tempdir().unwrap();
    let out = rmtlab(dir.path(), &["sample-spectrum", "--n", "6", "--p", "9", "--seed", "2", "--export-matrix", "true"]);
    assert_eq!(out.status.code(), Some(0));
    let csv = fs::read_to_string(dir.path().join("sample-spectrum.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("lambda"));
    let eigs: Vec<f64> = csv.lines().skip(1).map(|l| l.parse().unwrap()).collect();
    assert_eq!(eigs.len(), 6);
    assert!(eigs.windows(2).all(|w| w[0] >= w[1]) && eigs[5] > 0.0);
    let bin = fs::read(dir.path().join("sample-spectrum.bin")).unwrap();
    assert_eq!(bin.len(), 16 + 6 * 9 * 16);
    assert_eq!(u64::from_le_bytes(bin[0..8].try_into().unwrap()), 6);
    assert_eq!(u64::from_le_bytes(bin[8..16].try_into().unwrap()), 9);
}

#[test]
fn every_command_writes_csv_summary_and_plot() {
    let runs: [&[&str]; 8] = [
        &["concentration", "--n", "40", "--trials", "3", "--grid-points", "5"],
        &["kernel-eval", "--tau-grid", "0.5"],
        &["sine-limit", "--sizes", "8", "--replicates", "1", "--tau-grid", "0.5"],
        &["spacing", "--n", "60", "--trials", "4", "--s-max", "1"],
        &["bessel-check", "--orders", "0", "--radii", "20", "--angles", "0", "--large-orders", "60", "--ratios", "1"],
        &["ou-approx", "--halvings", "0", "--t", "0.01"],
        &["sample-spectrum", "--n", "10", "--law", "potential", "--v", "x^4/10", "--k", "2"],
        &["two-point", "--n", "30", "--trials", "3", "--function", "bump", "--radius", "2"],
    ];
    let headers = [
        "delta,exceed_freq,median_sup_err,n,eta",
        "u,v,re_K,im_K,rescaled,sine_target,rel_err",
        "n,tau,median_rel_err,min_rel_err,max_rel_err",
        "s,empirical,theory,abs_err",
        "nu,re_z,im_z,quantity,routes,rel_diff",
        "t,chi2,log2_ratio,taylor_min",
        "lambda",
        "trial,s2,mean,se,theory",
    ];
    for (args, header) in runs.iter().zip(headers) {
        let dir = tempfile::tempdir().unwrap();
        let out = rmtlab(dir.path(), args);
        assert_eq!(out.status.code(), Some(0), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
        let stem = args[0];
        let csv = fs::read_to_string(dir.path().join(format!("{stem}.csv"))).unwrap();
        assert_eq!(csv.lines().next(), Some(header), "{stem}");
        let s = summary(dir.path(), stem);
        assert_eq!(s["command"], stem);
        assert!(s["config"].as_object().unwrap().contains_key("out_dir"));
        assert!(s.get("git_describe").is_some());
        assert!(dir.path().join(format!("{stem}.gp")).exists());
    }
}
