use std::path::Path;
use std::process::{Command, Output};

fn blockprior(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_blockprior")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

const CURVE: &str = r#"{"mode":"transition-curve","n":80,"q":20,
    "partition":{"sizes":[10,10],"active":[5,1]},"m_grid":[30,80],"trials":3,"seed":5}"#;

#[test]
fn weights_table_to_stdout() {
    let o = blockprior(&["weights", "--alpha", "0,0.5,1", "--k", "10"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 4);
    assert!(lines[0].starts_with("k,alpha,omega"));
    assert!(lines[3].contains("0.0000000000000000e0"));
}

#[test]
fn bounds_and_sensitivity_run() {
    let o = blockprior(&["bounds", "--k", "2", "--sigma", "0,0.5,1", "--q", "10"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o).lines().count(), 4);
    let o = blockprior(&["sensitivity", "--alpha", "0.2,0.6", "--k", "2", "--format", "svg"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).starts_with("<svg"));
}

#[test]
fn config_problems_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(blockprior(&["sweep"]).status.code(), Some(2));
    let missing = dir.path().join("absent.json");
    assert_eq!(blockprior(&["sweep", "--config", missing.to_str().unwrap()]).status.code(), Some(2));
    let bad = write(dir.path(), "bad.json", r#"{"mode":"heatmap","n":40,"q":10,"m_grid":[50],"s_grid":[1]}"#);
    let o = blockprior(&["sweep", "--config", &bad]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!o.stderr.is_empty());
    assert_eq!(blockprior(&["bounds", "--q", "0"]).status.code(), Some(2));
    assert_eq!(blockprior(&["weights", "--format", "png"]).status.code(), Some(2));
    assert_eq!(blockprior(&["bounds", "--sigma", "1.5"]).status.code(), Some(2));
}

#[test]
fn sweep_writes_files_reproducibly() {
    let dir = tempfile::tempdir().unwrap();
    let config = write(dir.path(), "curve.json", CURVE);
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for out in [&a, &b] {
        let o = blockprior(&["sweep", "--config", &config, "--out", out.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let text = std::fs::read(&a).unwrap();
    assert_eq!(text, std::fs::read(&b).unwrap());
    assert_eq!(String::from_utf8(text).unwrap().lines().count(), 5);
    assert!(dir.path().join("a.csv.meta.json").exists());
}

#[test]
fn recover_prints_one_line_per_series() {
    let dir = tempfile::tempdir().unwrap();
    let config = write(dir.path(), "curve.json", CURVE);
    let o = blockprior(&["recover", "--config", &config, "--m", "80", "--seed", "9"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    let lines: Vec<serde_json::Value> = text.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(lines.len(), 2);
    assert_eq!(lines[0]["series"], "unit");
    assert_eq!(lines[1]["series"], "optimal");
    assert!(lines.iter().all(|l| l["success"] == true));
}
