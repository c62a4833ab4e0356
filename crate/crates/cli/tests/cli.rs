use std::path::Path;
use std::process::{Command, Output};

const FREE: &str = r#"{"model": {"kind": "constant", "alpha": [0.0, 0.0]}, "theta_grid": 16}"#;
const HALF: &str = r#"{"model": {"kind": "constant", "alpha": [0.5, 0.0]}, "theta_grid": 8}"#;

fn subcmv(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_subcmv")).current_dir(dir).env_remove("SUBCMV_OUT_DIR").args(args).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write(dir: &Path, name: &str, body: &str) {
    std::fs::write(dir.join(name), body).unwrap();
}

#[test]
fn free_classify_writes_sixteen_ac_rows() {
    let d = tempfile::tempdir().unwrap();
    write(d.path(), "c.json", FREE);
    let o = subcmv(d.path(), &["classify", "--config", "c.json"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));

    let csv = std::fs::read_to_string(d.path().join("report.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "theta,verdict,ReF_limit,lyap_plus,lyap_minus,confidence,config_hash");
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 16);
    assert!(rows.iter().all(|r| r[1] == "AC" && r[6].len() == 64 && r[6] == rows[0][6]));

    let jsonl = std::fs::read_to_string(d.path().join("report.jsonl")).unwrap();
    let objs: Vec<serde_json::Value> = jsonl.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(objs.len(), 16);
    assert!(objs.iter().all(|v| v["verdict"] == "AC" && v["config_hash"] == rows[0][6]));
}

#[test]
fn config_errors_exit_two() {
    let d = tempfile::tempdir().unwrap();
    write(d.path(), "missing.json", r#"{"theta_grid": 4}"#);
    let o = subcmv(d.path(), &["classify", "--config", "missing.json"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("model"));

    write(d.path(), "trunc.json", r#"{"model": {"kind": "constant", "alpha": [0, 0]}, "truncation": {"n_init": 64, "n_max": 32, "tol": 1e-8}}"#);
    let o = subcmv(d.path(), &["classify", "--config", "trunc.json"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("n_max"));

    write(d.path(), "extra.json", "{\"model\": {\"kind\": \"constant\", \"alpha\": [0, 0]},\n\"colour\": 1}");
    let o = subcmv(d.path(), &["classify", "--config", "extra.json"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("colour") && stderr(&o).contains("line 2"));

    write(d.path(), "disk.json", r#"{"model": {"kind": "constant", "alpha": [1.5, 0]}}"#);
    assert_eq!(code(&subcmv(d.path(), &["classify", "--config", "disk.json"])), 2);
    assert_eq!(code(&subcmv(d.path(), &["classify", "--config", "nowhere.json"])), 2);
}

#[test]
fn existing_outputs_need_force() {
    let d = tempfile::tempdir().unwrap();
    write(d.path(), "c.json", FREE);
    assert_eq!(code(&subcmv(d.path(), &["classify", "--config", "c.json", "--theta", "2"])), 0);
    let o = subcmv(d.path(), &["classify", "--config", "c.json", "--theta", "2"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("--force"));
    assert_eq!(code(&subcmv(d.path(), &["classify", "--config", "c.json", "--theta", "2", "--force"])), 0);
    let rows = std::fs::read_to_string(d.path().join("report.csv")).unwrap().lines().count();
    assert_eq!(rows, 3);
}

#[test]
fn jobs_do_not_change_reports() {
    let d = tempfile::tempdir().unwrap();
    write(d.path(), "c.json", HALF);
    let run = |jobs: &str| {
        let o = subcmv(d.path(), &["classify", "--config", "c.json", "--jobs", jobs, "--force"]);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
        (std::fs::read(d.path().join("report.jsonl")).unwrap(), std::fs::read(d.path().join("report.csv")).unwrap())
    };
    assert_eq!(run("1"), run("4"));
}

#[test]
fn out_dir_override() {
    let d = tempfile::tempdir().unwrap();
    write(d.path(), "c.json", FREE);
    let o = Command::new(env!("CARGO_BIN_EXE_subcmv"))
        .current_dir(d.path())
        .env("SUBCMV_OUT_DIR", "out")
        .args(["classify", "--config", "c.json", "--theta", "1"])
        .output()
        .unwrap();
    assert_eq!(code(&o), 0);
    assert!(d.path().join("out/report.csv").exists());
    assert!(!d.path().join("report.csv").exists());
}

fn trace_rows(path: &Path) -> (Vec<Vec<String>>, Vec<String>) {
    let text = std::fs::read_to_string(path).unwrap();
    let (footer, body): (Vec<&str>, Vec<&str>) = text.lines().partition(|l| l.starts_with('#'));
    let rows = body[1..].iter().map(|l| l.split(',').map(String::from).collect()).collect();
    (rows, footer.into_iter().map(String::from).collect())
}

#[test]
fn free_trace_has_unit_real_part() {
    let d = tempfile::tempdir().unwrap();
    write(d.path(), "c.json", FREE);
    assert_eq!(code(&subcmv(d.path(), &["trace", "--config", "c.json", "--theta", "1"])), 0);
    let (rows, footer) = trace_rows(&d.path().join("trace.csv"));
    assert_eq!(rows.len(), 20);
    let stable: Vec<_> = rows.iter().filter(|r| r[10] == "true").collect();
    assert!(stable.len() >= 6);
    for r in stable {
        assert!((r[2].parse::<f64>().unwrap() - 1.0).abs() < 1e-6);
    }
    assert!(footer.iter().any(|l| l == "# signature=AC"));
}

#[test]
fn gap_trace_footer() {
    let d = tempfile::tempdir().unwrap();
    write(d.path(), "c.json", HALF);
    assert_eq!(code(&subcmv(d.path(), &["trace", "--config", "c.json", "--theta", "0"])), 0);
    let (_, footer) = trace_rows(&d.path().join("trace.csv"));
    assert!(footer.iter().any(|l| l == "# signature=Gap"), "{footer:?}");
    assert_eq!(code(&subcmv(d.path(), &["trace", "--config", "c.json", "--theta", "0"])), 2);
    assert_eq!(code(&subcmv(d.path(), &["trace", "--config", "c.json", "--theta", "7", "--force"])), 2);
}

#[test]
fn selftest_passes_and_is_repeatable() {
    let d = tempfile::tempdir().unwrap();
    let a = subcmv(d.path(), &["selftest"]);
    let b = subcmv(d.path(), &["selftest"]);
    assert_eq!(code(&a), 0);
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(String::from_utf8_lossy(&a.stdout).lines().count(), 8);
}

#[test]
fn injected_sign_flip_fails_the_determinant_check() {
    let d = tempfile::tempdir().unwrap();
    let o = subcmv(d.path(), &["selftest", "--inject-sign-flip"]);
    assert_eq!(code(&o), 1);
    let out = String::from_utf8_lossy(&o.stdout);
    assert!(out.lines().any(|l| l.starts_with("FAIL determinants")));
    assert!(out.contains("failed: determinants"));
}
