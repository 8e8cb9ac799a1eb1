use serde_json::Value;
use std::path::Path;
use std::process::{Command, Output};

fn lab(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_besov-lab"))
        .current_dir(dir)
        .env_remove("BESOV_LAB_OUT")
        .args(args)
        .output()
        .expect("spawn besov-lab")
}

fn gaussian_input(dir: &Path) {
    let n = 512;
    let l = 32.0;
    let body: String = (0..n)
        .map(|i| {
            let x = -l / 2.0 + i as f64 * l / n as f64;
            format!("{},0\n", (-x * x / 4.0).exp() * (3.0 * x).cos())
        })
        .collect();
    std::fs::write(dir.join("g.csv"), body).unwrap();
}

#[test]
fn unknown_flag_prints_usage_and_exits_one() {
    let d = tempfile::tempdir().unwrap();
    let o = lab(d.path(), &["norm", "--bogus"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("Usage"));
}

#[test]
fn help_and_version_exit_zero() {
    let d = tempfile::tempdir().unwrap();
    assert_eq!(lab(d.path(), &["--help"]).status.code(), Some(0));
    assert_eq!(lab(d.path(), &["--version"]).status.code(), Some(0));
}

#[test]
fn invalid_parameter_exits_one() {
    let d = tempfile::tempdir().unwrap();
    let o = lab(d.path(), &["--out", "o", "bv", "--knots", "1,0", "--values", "0,1,0"]);
    assert_eq!(o.status.code(), Some(1));
    gaussian_input(d.path());
    let o = lab(d.path(), &["--out", "o", "norm", "--input", "g.csv", "--box", "32", "--p", "0.5"]);
    assert_eq!(o.status.code(), Some(1));
    let o = lab(d.path(), &["--out", "o", "norm", "--input", "g.csv"]);
    assert_eq!(o.status.code(), Some(1), "missing --box");
}

#[test]
fn norm_writes_json_report() {
    let d = tempfile::tempdir().unwrap();
    gaussian_input(d.path());
    let o = lab(
        d.path(),
        &["--out", "o", "norm", "--input", "g.csv", "--box", "32", "--s", "0.5", "--p", "2", "--r", "inf", "--gamma", "-0.5"],
    );
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let v: Value = serde_json::from_str(&std::fs::read_to_string(d.path().join("o/norm.json")).unwrap()).unwrap();
    for key in ["value", "family", "s", "p", "r", "q", "gamma", "n", "L", "kmin", "kmax", "seed"] {
        assert!(v.get(key).is_some(), "missing {key}");
    }
    assert_eq!(v["gamma"], -0.5);
    assert_eq!(v["r"], "inf");
    assert!(v["value"].as_f64().unwrap() > 0.0);
}

#[test]
fn config_sits_between_flags_and_defaults() {
    let d = tempfile::tempdir().unwrap();
    std::fs::write(d.path().join("c.toml"), "p = 3.0\ngamma = 2\nout = \"from_config\"\n").unwrap();
    let o = lab(d.path(), &["--config", "c.toml", "bv", "--p", "4"]);
    assert_eq!(o.status.code(), Some(0));
    let v: Value = serde_json::from_slice(&std::fs::read(d.path().join("from_config/bv.json")).unwrap()).unwrap();
    assert_eq!(v["p"], 4.0);
    assert_eq!(v["gamma"], 2.0);
}

#[test]
fn output_directory_from_environment() {
    let d = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_besov-lab"))
        .current_dir(d.path())
        .env("BESOV_LAB_OUT", "env_out")
        .arg("bv")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
    assert!(d.path().join("env_out/bv.json").exists());
}

#[test]
fn bv_ratio_is_bounded() {
    let d = tempfile::tempdir().unwrap();
    let o = lab(d.path(), &["--out", "o", "bv", "--knots", "-1,0,2", "--values", "0,2,-1,0", "--p", "1.5", "--gamma", "-2"]);
    assert_eq!(o.status.code(), Some(0));
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    let ratio = v["ratio"].as_f64().unwrap();
    assert!(ratio.is_finite() && ratio > 0.0 && ratio < 10.0, "{ratio}");
}

#[test]
fn counterexample_csv_and_determinism() {
    let d = tempfile::tempdir().unwrap();
    let args = ["--out", "o", "--format", "csv", "counterexample", "--N", "4", "--gamma", "0.5", "--r", "4"];
    let first = lab(d.path(), &args);
    assert_eq!(first.status.code(), Some(0), "{}", String::from_utf8_lossy(&first.stderr));
    let a = std::fs::read(d.path().join("o/counterexample.csv")).unwrap();
    let second = lab(d.path(), &args);
    let b = std::fs::read(d.path().join("o/counterexample.csv")).unwrap();
    assert_eq!(a, b);
    assert_eq!(first.stdout, second.stdout);
    let text = String::from_utf8(a).unwrap();
    assert_eq!(text.lines().count(), 1 + 3 * 3);
}

#[test]
fn wavelet_writes_coefficients_and_curve() {
    let d = tempfile::tempdir().unwrap();
    gaussian_input(d.path());
    let o = lab(d.path(), &["--out", "o", "wavelet", "--input", "g.csv", "--box", "32", "--q", "1", "--alpha", "0.5", "--n-max", "64"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let curve = std::fs::read_to_string(d.path().join("o/sigma_n.csv")).unwrap();
    let sigma: Vec<f64> = curve.lines().skip(1).map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect();
    assert!(sigma.windows(2).all(|w| w[1] <= w[0] + 1e-12));
    assert!(d.path().join("o/coefficients.json").exists());
}

#[test]
fn selftest_subset() {
    let d = tempfile::tempdir().unwrap();
    let o = lab(d.path(), &["--out", "o", "selftest", "--only", "1,7"]);
    assert_eq!(o.status.code(), Some(0));
    let out = String::from_utf8_lossy(&o.stdout);
    assert_eq!(out.lines().filter(|l| l.starts_with("[PASS]")).count(), 2, "{out}");
}
