use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn helmhj(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_helmhj"))
        .args(args)
        .current_dir(dir)
        .env_remove("HELMHJ_OUT_DIR")
        .output()
        .expect("binary runs")
}

fn report(dir: &Path) -> Value {
    let text = std::fs::read_to_string(dir.join("report.json")).expect("report written");
    serde_json::from_str(&text).expect("valid json")
}

fn write_field(path: &Path, n: usize, f: impl Fn(f64, f64) -> (f64, f64)) {
    let h = 2.0 / (n - 1) as f64;
    let mut s = format!("FIELD v1 dim=2 components=2 counts={n},{n} lo=-1,-1 hi=1,1\n");
    for i in 0..n {
        for j in 0..n {
            let (a, b) = f(-1.0 + i as f64 * h, -1.0 + j as f64 * h);
            s += &format!("{a} {b}\n");
        }
    }
    std::fs::write(path, s).unwrap();
}

#[test]
fn gradient_field_decomposes_cleanly() {
    let tmp = tempfile::tempdir().unwrap();
    write_field(&tmp.path().join("g.field"), 17, |x, y| {
        (2.0 * x * y, x * x + 1.0)
    });
    let out = helmhj(&["decompose", "g.field", "--out", "res"], tmp.path());
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stdout)
    );
    let r = report(&tmp.path().join("res"));
    let tnorm = r["equations"]
        .as_array()
        .unwrap()
        .iter()
        .find(|e| e["tag"] == "T-NORM")
        .unwrap();
    assert!(tnorm["max"].as_f64().unwrap() < 1e-2);
    for f in ["phi.field", "lambda.field", "t.field", "diagnostics.json"] {
        assert!(tmp.path().join("res").join(f).exists(), "{f}");
    }
}

#[test]
fn rotational_field_fills_diagnostics() {
    let tmp = tempfile::tempdir().unwrap();
    write_field(&tmp.path().join("r.field"), 17, |x, y| (-y, x));
    let out = helmhj(&["decompose", "r.field", "--out", "res"], tmp.path());
    assert_eq!(out.status.code(), Some(0));
    let text = std::fs::read_to_string(tmp.path().join("res/diagnostics.json")).unwrap();
    let d: Value = serde_json::from_str(&text).unwrap();
    assert!(d["phi_solve"]["iterations"].as_u64().unwrap() > 0);
    assert!(d["reconstruction_error"].as_f64().unwrap() < 1e-12);
}

#[test]
fn malformed_file_reports_line() {
    let tmp = tempfile::tempdir().unwrap();
    std::fs::write(
        tmp.path().join("bad.field"),
        "FIELD v1 dim=2 components=2 counts=3,3 lo=0,0 hi=1,1\n0 0\n0 0\n0 zero\n",
    )
    .unwrap();
    let out = helmhj(&["decompose", "bad.field"], tmp.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 4"));
}

#[test]
fn config_errors_exit_two() {
    let tmp = tempfile::tempdir().unwrap();
    for args in [
        &["convergence", "--levels", "1"][..],
        &["rotor", "--grid", "9,x"],
        &["rotor", "--mass", "-1"],
        &["rotor", "--domain", "1:-1"],
        &["kg-check", "--grid", "9,9,9"],
    ] {
        let out = helmhj(args, tmp.path());
        assert_eq!(out.status.code(), Some(2), "{args:?}");
    }
}

#[test]
fn solver_cap_exits_three() {
    let tmp = tempfile::tempdir().unwrap();
    write_field(&tmp.path().join("r.field"), 17, |x, y| (-y + x * y, x));
    let out = helmhj(&["decompose", "r.field", "--max-iter", "2"], tmp.path());
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn tolerance_failure_exits_one() {
    let tmp = tempfile::tempdir().unwrap();
    let out = helmhj(
        &["rotor", "--grid", "3,3", "--domain", "-20:20", "--out", "o"],
        tmp.path(),
    );
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(report(&tmp.path().join("o"))["pass"], false);
}

#[test]
fn rotor_defaults_pass_with_csv() {
    let tmp = tempfile::tempdir().unwrap();
    let out = helmhj(&["rotor", "--steps", "10", "--out", "o"], tmp.path());
    assert_eq!(out.status.code(), Some(0));
    let csv = std::fs::read_to_string(tmp.path().join("o/vorticity.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next(),
        Some("t,max_curl_p,analytic,identity_residual")
    );
    assert_eq!(lines.count(), 11);
    let r = report(&tmp.path().join("o"));
    let printed = r["equations"]
        .as_array()
        .unwrap()
        .iter()
        .find(|e| e["tag"] == "HJ-PRINTED")
        .unwrap();
    assert!((printed["max"].as_f64().unwrap() - 0.25).abs() < 1e-12);
}

#[test]
fn large_step_warns_about_order() {
    let tmp = tempfile::tempdir().unwrap();
    helmhj(
        &["rotor", "--dt", "2", "--steps", "3", "--out", "o"],
        tmp.path(),
    );
    let r = report(&tmp.path().join("o"));
    let warnings = r["warnings"].as_array().unwrap();
    assert!(warnings
        .iter()
        .any(|w| w.as_str().unwrap().contains("integrator order")));
}

#[test]
fn kg_check_reports_mask_fraction() {
    let tmp = tempfile::tempdir().unwrap();
    let out = helmhj(
        &[
            "kg-check", "--grid", "33,33", "--waves", "1:1,1:-1", "--out", "o",
        ],
        tmp.path(),
    );
    assert_eq!(out.status.code(), Some(0));
    let r = report(&tmp.path().join("o"));
    assert!(r["stats"]["mask_fraction"].as_f64().unwrap() > 0.0);
}

#[test]
fn output_directory_from_environment() {
    let tmp = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_helmhj"))
        .args(["convergence", "linear"])
        .current_dir(tmp.path())
        .env("HELMHJ_OUT_DIR", "from-env")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(tmp.path().join("from-env/report.json").exists());
}

#[test]
fn identical_runs_give_identical_reports() {
    let tmp = tempfile::tempdir().unwrap();
    let text = || {
        let t = std::fs::read_to_string(tmp.path().join("a/report.json")).unwrap();
        t.lines()
            .filter(|l| !l.trim_start().starts_with("\"wall_time\""))
            .collect::<Vec<_>>()
            .join("\n")
    };
    for cmd in [
        &["rotor", "--steps", "5", "--seed", "7"][..],
        &["kg-check", "--grid", "33,33"],
    ] {
        let args: Vec<&str> = cmd.iter().copied().chain(["--out", "a"]).collect();
        helmhj(&args, tmp.path());
        let first = text();
        helmhj(&args, tmp.path());
        assert_eq!(first, text());
    }
}
