use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_qentropy"))
}

fn write(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let p = dir.path().join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn run(sub: &str, input: &Path, extra: &[&str]) -> Output {
    bin().arg(sub).arg("--input").arg(input).args(extra).output().unwrap()
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!("{e}: {}", String::from_utf8_lossy(&out.stderr))
    })
}

fn floats(v: &Value) -> Vec<f64> {
    v.as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect()
}

const TWO_POINT: &str = r#"{
  "grid": {"points": [0, 1]},
  "prior": [0.5, 0.5],
  "truth": [0.6, 0.4],
  "constraints": [{"label": "u", "values": [0, 1], "target": 0.09}],
  "q": 2
}"#;

#[test]
fn two_point_solve() {
    let dir = TempDir::new().unwrap();
    let out = run("solve", &write(&dir, "p.json", TWO_POINT), &[]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["branch"], "min_xent");
    let p = floats(&v["density"]);
    assert!((p[0] - 0.7).abs() < 1e-12 && (p[1] - 0.3).abs() < 1e-12);
    assert!((v["multipliers"][0].as_f64().unwrap() - 8.0 / 3.0).abs() < 1e-10);
    assert!((v["partition_value"].as_f64().unwrap() - 5.0 / 7.0).abs() < 1e-12);
    assert!((v["divergence"].as_f64().unwrap() - 0.16).abs() < 1e-12);
    assert!(v["thermo"]["identity_residual"].as_f64().unwrap().abs() < 1e-10);
}

#[test]
fn no_constraints_returns_prior() {
    let dir = TempDir::new().unwrap();
    let text = r#"{"grid": {"points": [0, 1, 2]}, "prior": [0.2, 0.3, 0.5], "q": 1.5}"#;
    let v = json(&run("solve", &write(&dir, "p.json", text), &[]));
    let p = floats(&v["density"]);
    for (a, b) in p.iter().zip([0.2, 0.3, 0.5]) {
        assert!((a - b).abs() < 1e-14);
    }
    assert!(v["divergence"].as_f64().unwrap().abs() < 1e-14);
}

#[test]
fn maxent_without_prior() {
    let dir = TempDir::new().unwrap();
    let text = r#"{"grid": {"points": [0, 1, 2]},
        "constraints": [{"label": "x", "values": [0, 1, 2], "target": 0.5}], "q": 0.7}"#;
    let v = json(&run("solve", &write(&dir, "p.json", text), &[]));
    assert_eq!(v["branch"], "max_ent");
    let p = floats(&v["density"]);
    let achieved: f64 = p.iter().zip([0.0, 1.0, 2.0]).map(|(pi, x)| pi.powf(0.7) * x).sum();
    assert!((achieved - 0.5).abs() < 1e-9);
}

#[test]
fn normalized_kind_flag() {
    let dir = TempDir::new().unwrap();
    let text = r#"{"grid": {"points": [0, 1, 2]}, "prior": [0.3, 0.3, 0.4],
        "constraints": [{"label": "x", "values": [0, 1, 2], "target": 0.8}], "q": 1.4}"#;
    let v = json(&run("solve", &write(&dir, "p.json", text), &["--kind", "normalized"]));
    assert_eq!(v["kind"], "normalized_q_expectation");
    assert_eq!(v["branch"], "min_xent_normalized");
    let p = floats(&v["density"]);
    let pq: Vec<f64> = p.iter().map(|x| x.powf(1.4)).collect();
    let achieved = (pq[1] + 2.0 * pq[2]) / pq.iter().sum::<f64>();
    assert!((achieved - 0.8).abs() < 1e-9);
}

#[test]
fn malformed_input_names_the_field() {
    let dir = TempDir::new().unwrap();
    let text = r#"{"grid": {"points": [0, 1]}, "prior": [0.5, "half"], "q": 2}"#;
    let out = run("solve", &write(&dir, "p.json", text), &[]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("prior[1]"), "{err}");
    assert!(out.stdout.is_empty());
}

#[test]
fn missing_file_and_invalid_density_exit_2() {
    let dir = TempDir::new().unwrap();
    let out = run("solve", &dir.path().join("absent.json"), &[]);
    assert_eq!(out.status.code(), Some(2));
    let text = r#"{"grid": {"points": [0, 1]}, "prior": [0.5, -0.5], "q": 2}"#;
    let out = run("solve", &write(&dir, "p.json", text), &[]);
    assert_eq!(out.status.code(), Some(2));
    let text = r#"{"grid": {"points": [0, 1]}, "q": 2, "constraints": [{"label": "u", "values": [0, 1]}]}"#;
    let out = run("solve", &write(&dir, "p.json", text), &[]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("constraints[0].target"));
}

#[test]
fn infeasible_target_exits_1() {
    let dir = TempDir::new().unwrap();
    let text = r#"{"grid": {"points": [0, 1]}, "prior": [0.5, 0.5],
        "constraints": [{"label": "u", "values": [0, 1], "target": 5.0}], "q": 2}"#;
    let out = run("solve", &write(&dir, "p.json", text), &[]);
    assert_eq!(out.status.code(), Some(1));
    assert!(!out.stderr.is_empty());
}

#[test]
fn verify_triangle_passes() {
    let dir = TempDir::new().unwrap();
    let input = write(&dir, "p.json", TWO_POINT);
    let out = run("verify-triangle", &input, &[]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["passes"], true);
    let (lr, lp, pr) = (
        v["d_lr"].as_f64().unwrap(),
        v["d_lp"].as_f64().unwrap(),
        v["d_pr"].as_f64().unwrap(),
    );
    assert!((lr - (lp + pr + lp * pr)).abs() < 1e-8);
}

#[test]
fn verify_triangle_three_points_and_classical() {
    let dir = TempDir::new().unwrap();
    for q in ["1", "0.7", "1.6"] {
        let text = format!(
            r#"{{"grid": {{"points": [0, 1, 2]}}, "prior": [0.3, 0.3, 0.4], "truth": [0.35, 0.25, 0.4],
                "constraints": [{{"label": "x", "values": [0, 1, 2]}}], "q": {q}}}"#
        );
        let out = run("verify-triangle", &write(&dir, "p.json", &text), &[]);
        assert_eq!(out.status.code(), Some(0), "q = {q}: {}", String::from_utf8_lossy(&out.stderr));
        assert!(json(&out)["residual"].as_f64().unwrap().abs() < 1e-8);
    }
}

#[test]
fn verify_triangle_needs_truth() {
    let dir = TempDir::new().unwrap();
    let text = r#"{"grid": {"points": [0, 1]}, "prior": [0.5, 0.5],
        "constraints": [{"label": "u", "values": [0, 1]}], "q": 2}"#;
    let out = run("verify-triangle", &write(&dir, "p.json", text), &[]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn constant_moment_function_is_a_solver_failure() {
    let dir = TempDir::new().unwrap();
    // a constant u pins the target to a value the family cannot reach at q != 1
    let text = r#"{"grid": {"points": [0, 1]}, "prior": [0.5, 0.5], "truth": [0.6, 0.4],
        "constraints": [{"label": "c", "values": [1, 1]}], "q": 2}"#;
    let out = run("verify-triangle", &write(&dir, "p.json", text), &[]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("infeasible"));
}

fn sweep(dir: &TempDir, q_list: &str) -> (Option<i32>, String) {
    let text = format!(
        r#"{{"grid": {{"points": [0, 1]}}, "prior": [0.5, 0.5], "truth": [0.6, 0.4],
            "constraints": [{{"label": "u", "values": [0, 1], "target": 0.09}}], "q_list": {q_list}}}"#
    );
    let out = run("sweep-q", &write(dir, "s.json", &text), &[]);
    (out.status.code(), String::from_utf8(out.stdout).unwrap())
}

#[test]
fn sweep_empty_list_is_header_only() {
    let dir = TempDir::new().unwrap();
    let (code, text) = sweep(&dir, "[]");
    assert_eq!(code, Some(0));
    assert_eq!(
        text,
        "q,branch,divergence,partition_value,beta_u,d_lr,d_lp,d_pr,triangle_residual,error\n"
    );
}

#[test]
fn sweep_rows_keep_order() {
    let dir = TempDir::new().unwrap();
    let qs: Vec<f64> = (0..16).map(|i| 0.5 + 0.1 * i as f64).collect();
    let (code, text) = sweep(&dir, &serde_json::to_string(&qs).unwrap());
    assert_eq!(code, Some(0));
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let rows: Vec<csv::StringRecord> = rdr.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), qs.len());
    for (row, q) in rows.iter().zip(&qs) {
        assert_eq!(row[0].parse::<f64>().unwrap(), *q);
        if row[9].is_empty() {
            assert!(row[8].parse::<f64>().unwrap().abs() < 1e-8);
        }
    }
    let classical = rows.iter().find(|r| &r[0] == "1").unwrap();
    assert_eq!(&classical[1], "classical");
}

#[test]
fn sweep_reports_row_errors() {
    let dir = TempDir::new().unwrap();
    let (code, text) = sweep(&dir, "[2.0, -1.0]");
    assert_eq!(code, Some(0));
    let last = text.lines().nth(2).unwrap();
    assert!(last.starts_with("-1,,"), "{last}");
    assert!(!last.ends_with(','));
}

#[test]
fn sweep_writes_output_file() {
    let dir = TempDir::new().unwrap();
    let (_, stdout) = sweep(&dir, "[1.0]");
    let out_path = dir.path().join("out.csv");
    let out = bin()
        .args(["sweep-q", "--input"])
        .arg(dir.path().join("s.json"))
        .arg("--output")
        .arg(&out_path)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty());
    assert_eq!(std::fs::read_to_string(out_path).unwrap(), stdout);
}

#[test]
fn solved_density_round_trips_as_prior() {
    let dir = TempDir::new().unwrap();
    let first = json(&run("solve", &write(&dir, "p.json", TWO_POINT), &[]));
    let p = floats(&first["density"]);
    let text = format!(
        r#"{{"grid": {{"points": [0, 1]}}, "prior": {}, "q": 2}}"#,
        serde_json::to_string(&p).unwrap()
    );
    let second = json(&run("solve", &write(&dir, "r.json", &text), &[]));
    assert_eq!(floats(&second["density"]), p);
}

#[test]
fn output_is_deterministic() {
    let dir = TempDir::new().unwrap();
    let input = write(&dir, "p.json", TWO_POINT);
    for sub in ["solve", "verify-triangle"] {
        let a = run(sub, &input, &[]).stdout;
        let b = run(sub, &input, &[]).stdout;
        assert_eq!(a, b);
    }
    let qs = "[0.5, 0.8, 1.0, 1.3, 2.0, 3.0]";
    assert_eq!(sweep(&dir, qs), sweep(&dir, qs));
}

#[test]
fn tolerance_flag_is_validated() {
    let dir = TempDir::new().unwrap();
    let out = run("solve", &write(&dir, "p.json", TWO_POINT), &["--tolerance", "-1"]);
    assert_eq!(out.status.code(), Some(2));
    let out = run("solve", &write(&dir, "p.json", TWO_POINT), &["--tolerance", "1e-12"]);
    assert_eq!(out.status.code(), Some(0));
}
