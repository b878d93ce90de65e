use std::path::Path;
use std::process::{Command, Output};

use gasket_core::bhi::ExperimentConfig;

fn gasket(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gasket"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const SMALL: &str = r#"
alphas = [0.5]
level = 3
compare_level = 4
instances = 4
truncation_level = 0

[domain]
kind = "random-cell-union"
level = 2
density = 0.7
"#;

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

#[test]
fn spline_verify_passes_and_dumps() {
    let dir = tempfile::tempdir().unwrap();
    let dump = dir.path().join("s.csv");
    let o = gasket(&["spline-verify", "--depth", "2", "--dump", dump.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("0 violations"));
    let text = std::fs::read_to_string(dump).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "path,v1,v2,v3,d1,d2,d3");
    assert_eq!(lines.len(), 10);
}

#[test]
fn spline_eval_at_level_one() {
    let o = gasket(&["spline-eval", "--path", "2"]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    assert!(out.contains("v1 = 12/25"));
    assert!(out.contains("v3 = 1/25"));
    let o = gasket(&["spline-eval", "--path", "4"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn printed_config_parses_back() {
    let o = gasket(&["bhi", "run", "--print-config"]);
    assert_eq!(o.status.code(), Some(0));
    let c = ExperimentConfig::from_toml(&stdout(&o)).unwrap();
    assert_eq!(c, ExperimentConfig::default());
}

#[test]
fn config_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write(dir.path(), "bad.toml", "alphas = [1.5]\n");
    let o = gasket(&["bhi", "run", "--config", &bad]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("hypothesis"), "{}", stderr(&o));
    let unknown = write(dir.path(), "u.toml", "levle = 3\n");
    let o = gasket(&["bhi", "lemmas", "--config", &unknown]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("levle"));
    let o = gasket(&["bhi", "run", "--config", "/definitely/missing.toml"]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(gasket(&["no-such-command"]).status.code(), Some(2));
}

#[test]
fn bhi_run_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "small.toml", SMALL);
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for out in [&a, &b, &a] {
        let o = gasket(&["bhi", "run", "--config", &cfg, "--out", out.to_str().unwrap()]);
        assert!(matches!(o.status.code(), Some(0) | Some(1)), "{}", stderr(&o));
    }
    for f in ["ratios.csv", "report.json", "config.toml"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }
    let ratios = std::fs::read_to_string(a.join("ratios.csv")).unwrap();
    assert!(ratios.starts_with("# run_id="));
    assert_eq!(ratios.lines().nth(1), Some("alpha,instance_id,level,R,flags"));
    assert_eq!(ratios.lines().count(), 2 + 8);
    let manifest = std::fs::read_to_string(a.join("manifest.jsonl")).unwrap();
    assert_eq!(manifest.lines().count(), 2);
    let report: serde_json::Value = serde_json::from_slice(&std::fs::read(a.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["schema_version"], 1);
}

#[test]
fn cap_violation_is_a_failure_not_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "capped.toml", &format!("spectral_cap = 100\n{SMALL}"));
    let o = gasket(&["bhi", "run", "--config", &cfg, "--out", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("cap"));
    let manifest = std::fs::read_to_string(dir.path().join("o/manifest.jsonl")).unwrap();
    assert!(manifest.contains("\"passed\":false"));
}

#[test]
fn solvers_print_csv() {
    let o = gasket(&["solve-harmonic", "--level", "3"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = stdout(&o);
    assert!(out.starts_with("vertex,a,b,h\n"));
    for line in out.lines().skip(1) {
        let h: f64 = line.rsplit(',').next().unwrap().parse().unwrap();
        assert!((0.0..=1.0).contains(&h));
    }
    let o = gasket(&["exit-time", "--level", "3", "--alpha", "0.7"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).starts_with("vertex,a,b,jumps,time\n"));
    let o = gasket(&["green", "--level", "2"]);
    assert_eq!(o.status.code(), Some(0));
    let o = gasket(&["lambda", "--level", "3"]);
    assert!(stdout(&o).contains("Lambda = "));
}

#[test]
fn mc_harmonic_writes_table_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = gasket(&["mc-harmonic", "--level", "3", "--paths", "2000", "--out", out]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = std::fs::read_to_string(dir.path().join("mc-harmonic.csv")).unwrap();
    assert_eq!(text.lines().nth(1), Some("start_vertex,target,count,N,ci_lo,ci_hi"));
    let total: u64 = text.lines().skip(2).map(|l| l.split(',').nth(2).unwrap().parse::<u64>().unwrap()).sum();
    assert_eq!(total, 2000);
    assert!(dir.path().join("manifest.jsonl").exists());
}

#[test]
fn build_graph_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("g.txt");
    let o = gasket(&["build-graph", "--window", "unit", "--level", "2", "--out", p.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let g = gasket_core::geometry::read_cache(std::io::BufReader::new(std::fs::File::open(&p).unwrap())).unwrap();
    assert_eq!(g.len(), 15);
}
