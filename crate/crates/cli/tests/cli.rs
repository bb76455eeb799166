use std::path::Path;
use std::process::{Command, Output};

fn loclearn(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_loclearn")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn preprocess_prints_a_partition() {
    let o = loclearn(&["preprocess", "--L", "20", "--epsilon", "0.5", "--seed", "3"]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!(v.is_object());
}

#[test]
fn query_answers_each_point_and_resumes_from_a_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    let ckpt = dir.path().join("session.json");
    let ckpt = ckpt.to_str().unwrap();
    let args = ["query", "--L", "20", "--seed", "1", "--x", "0.25", "--x", "0.7", "--checkpoint", ckpt];
    let first = loclearn(&args);
    assert!(first.status.success(), "{}", String::from_utf8_lossy(&first.stderr));
    let text = stdout(&first);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "x1,value");
    assert_eq!(lines.len(), 3);
    for line in &lines[1..] {
        let v: f64 = line.split(',').nth(1).unwrap().parse().unwrap();
        assert!((0.0..=1.0).contains(&v));
    }
    assert!(Path::new(ckpt).exists());
    let second = loclearn(&args);
    assert_eq!(stdout(&second), text);
}

#[test]
fn nw_error_reads_a_labeled_csv() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data.csv");
    let mut csv = String::from("x1,x2,y\n");
    for i in 0..30 {
        let x = (i as f64 + 0.5) / 30.0;
        csv += &format!("{x},{},{}\n", 1.0 - x, u8::from(x > 0.5));
    }
    std::fs::write(&data, csv).unwrap();
    let o = loclearn(&["nw-error", "--epsilon", "0.5", "--data", data.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    let value = v["value"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&value));
    assert_eq!(v["argmin_eigenvalues"].as_array().unwrap().len(), 2);
}

#[test]
fn experiment_writes_a_table() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("config.json");
    let out = dir.path().join("rows.csv");
    std::fs::write(&config, r#"{"mode": "error_est", "L": 10.0, "epsilon": 0.5, "dims": 1, "seeds": [1, 2], "n_eval": 200}"#).unwrap();
    let o = loclearn(&["experiment", "--config", config.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let table = std::fs::read_to_string(out).unwrap();
    assert!(table.starts_with("schema_version,mode,seed,"));
    // two seeds plus the summary row
    assert_eq!(table.lines().count(), 4);
}

#[test]
fn properties_pass() {
    let o = loclearn(&["properties", "--seed", "5"]);
    assert!(o.status.success(), "{}", stdout(&o));
    assert_eq!(stdout(&o).lines().filter(|l| l.starts_with("PASS")).count(), 10);
}

#[test]
fn bad_input_exits_with_code_two() {
    let o = loclearn(&["preprocess", "--epsilon", "1.5"]);
    assert_eq!(o.status.code(), Some(2));
    let o = loclearn(&["nw-error", "--data", "/nonexistent.csv"]);
    assert_eq!(o.status.code(), Some(2));
}
