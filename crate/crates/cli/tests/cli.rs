use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

const SMALL: &str = r#"
seed = 5
output_dir = "unused"

[protocol]
n = 8
t_max = 2.0
tau = 0.01
record_stride = 10
subsystem_sizes = [1, 2, 3]
pre = { J = 0.2, h_x = 1.0, h_z = 0.0 }
post = { J = 1.0, h_x = 0.1, h_z = 0.5 }

[analysis]
delta_grid = { start = 0.1, stop = 1.0, step = 0.1 }
series_deltas = [0.5, 1.0]
"#;

fn lab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_quench-lab")).args(args).output().expect("binary runs")
}

fn write_config(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path.to_string_lossy().into_owned()
}

fn run_into(config: &str, out: &Path, extra: &[&str]) -> Output {
    let mut args = vec!["run", config, "--output", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    lab(&args)
}

fn read(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

#[test]
fn run_writes_all_tables() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "small.toml", SMALL);
    let out = tmp.path().join("out");
    let res = run_into(&cfg, &out, &[]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));

    let series = read(&out.join("series.csv"));
    assert!(series.starts_with("quench_id,measure,ell,delta,t,value\n"));
    assert!(!series.contains('\r'));
    let rows: Vec<&str> = series.lines().skip(1).collect();
    // 2 measures x 3 sizes x 10 separations; a separation of k tenths leaves 21 - k samples.
    let per_group: usize = (1..=10).map(|k| 21 - k).sum();
    assert_eq!(rows.len(), 2 * 3 * per_group);
    assert!(rows.iter().all(|r| r.starts_with("base,")));

    let degrees = read(&out.join("degrees.csv"));
    assert!(degrees.starts_with("quench_id,measure,ell,delta,degree,window_start,window_end\n"));
    assert_eq!(degrees.lines().count(), 1 + 2 * 3 * 10);
    assert!(degrees.lines().skip(1).all(|r| !r.contains("NA")));

    let timescales = read(&out.join("timescales.csv"));
    assert!(timescales.starts_with("quench_id,series_kind,ell,delta,mean_gap,n_extrema\n"));
    assert_eq!(timescales.lines().count(), 1 + 2 * 3 * 3);

    let manifest: serde_json::Value = serde_json::from_str(&read(&out.join("manifest.json"))).unwrap();
    assert_eq!(manifest["status"], "ok");
    assert_eq!(manifest["seed"], 5);
    assert_eq!(manifest["version"], env!("CARGO_PKG_VERSION"));
    assert_eq!(manifest["config"]["protocol"]["post"]["h_z"], 0.5);
    let run = &manifest["runs"][0];
    assert_eq!(run["t_end"], 2.0);
    assert!(run["energy_drift"].as_f64().unwrap() < 1e-3);
    assert!(run["max_bond"].as_u64().unwrap() >= 2);
    assert!(run["wall_time_s"].as_f64().unwrap() >= 0.0);
}

#[test]
fn reruns_are_bit_identical() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "small.toml", SMALL);
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    assert!(run_into(&cfg, &a, &[]).status.success());
    assert!(run_into(&cfg, &b, &["--workers", "2"]).status.success());
    for table in ["series.csv", "degrees.csv", "timescales.csv"] {
        assert_eq!(std::fs::read(a.join(table)).unwrap(), std::fs::read(b.join(table)).unwrap(), "{table}");
    }
}

#[test]
fn sweep_points_are_tagged_and_ordered() {
    let tmp = TempDir::new().unwrap();
    let text = format!("{SMALL}\n[sweep]\naxis = \"post.h_z\"\nvalues = [0.0, 0.5, 1.0]\n")
        .replace("t_max = 2.0", "t_max = 1.0");
    let cfg = write_config(tmp.path(), "sweep.toml", &text);
    let out = tmp.path().join("out");
    let res = run_into(&cfg, &out, &["--workers", "3"]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let degrees = read(&out.join("degrees.csv"));
    let ids: Vec<&str> = degrees.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
    let mut seen: Vec<&str> = ids.clone();
    seen.dedup();
    assert_eq!(seen, ["post.h_z=0", "post.h_z=0.5", "post.h_z=1"]);
    let manifest: serde_json::Value = serde_json::from_str(&read(&out.join("manifest.json"))).unwrap();
    assert_eq!(manifest["runs"].as_array().unwrap().len(), 3);
    assert_eq!(manifest["runs"][2]["post"]["hz"], 1.0);
}

#[test]
fn too_short_horizon_leaves_only_initial_rows() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "short.toml", &SMALL.replace("t_max = 2.0", "t_max = 0.005"));
    let out = tmp.path().join("out");
    let res = run_into(&cfg, &out, &[]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let series = read(&out.join("series.csv"));
    assert!(series.lines().skip(1).all(|r| r.split(',').nth(4) == Some("0")));
    let degrees = read(&out.join("degrees.csv"));
    assert!(degrees.lines().count() > 1);
    assert!(degrees.lines().skip(1).all(|r| r.ends_with(",NA,NA,NA")));
    let manifest: serde_json::Value = serde_json::from_str(&read(&out.join("manifest.json"))).unwrap();
    let flags = manifest["runs"][0]["flags"].as_array().unwrap();
    assert!(flags.iter().any(|f| f.as_str().unwrap().contains("degree values undefined")));
    assert_eq!(manifest["runs"][0]["records"], 1);
}

#[test]
fn abort_still_writes_manifest() {
    let tmp = TempDir::new().unwrap();
    let text = format!("{SMALL}\n[truncation]\ncutoff = 1e-12\nchi_max = 1\n");
    let cfg = write_config(tmp.path(), "abort.toml", &text);
    let out = tmp.path().join("out");
    let res = run_into(&cfg, &out, &[]);
    assert_eq!(res.status.code(), Some(3), "{}", String::from_utf8_lossy(&res.stderr));
    let manifest: serde_json::Value = serde_json::from_str(&read(&out.join("manifest.json"))).unwrap();
    assert_eq!(manifest["status"], "aborted");
    let run = &manifest["runs"][0];
    assert!(run["abort"]["TruncationBudget"].is_object(), "{run}");
    assert!(run["t_end"].as_f64().unwrap() < 2.0);
    assert!(out.join("series.csv").exists());
}

#[test]
fn config_errors_exit_with_two() {
    let tmp = TempDir::new().unwrap();
    let typo = write_config(tmp.path(), "typo.toml", &SMALL.replace("seed = 5", "seed = 5\nsede = 1"));
    let res = run_into(&typo, &tmp.path().join("out"), &[]);
    assert_eq!(res.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&res.stderr).contains("sede"));

    let bad = write_config(tmp.path(), "bad.toml", &SMALL.replace("tau = 0.01", "tau = 0.0"));
    assert_eq!(run_into(&bad, &tmp.path().join("out"), &[]).status.code(), Some(2));

    let missing = tmp.path().join("nope.toml");
    assert_eq!(run_into(missing.to_str().unwrap(), &tmp.path().join("out"), &[]).status.code(), Some(2));
}

#[test]
fn oracle_check_exit_codes() {
    let tmp = TempDir::new().unwrap();
    let decoupled = SMALL
        .replace("pre = { J = 0.2, h_x = 1.0, h_z = 0.0 }", "pre = { J = 0.0, h_x = 1.0, h_z = 0.3 }")
        .replace("post = { J = 1.0, h_x = 0.1, h_z = 0.5 }", "post = { J = 0.0, h_x = 0.4, h_z = 1.0 }");
    let cfg = write_config(tmp.path(), "decoupled.toml", &decoupled);
    let out = tmp.path().join("oracle");
    let res = lab(&["oracle-check", &cfg, "--output", out.to_str().unwrap()]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stdout));
    let report: serde_json::Value = serde_json::from_str(&read(&out.join("oracle_report.json"))).unwrap();
    assert!(report[0]["max_rdm_deviation"].as_f64().unwrap() <= 1e-10);
    assert!(report[0]["max_series_deviation"].as_f64().unwrap() <= 1e-10);

    let coarse = SMALL
        .replace("tau = 0.01", "tau = 0.5")
        .replace("record_stride = 10", "record_stride = 1")
        .replace("start = 0.1, stop = 1.0, step = 0.1", "start = 0.5, stop = 1.0, step = 0.5");
    let cfg = write_config(tmp.path(), "coarse.toml", &coarse);
    let res = lab(&["oracle-check", &cfg, "--output", out.to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(4));
    let report: serde_json::Value = serde_json::from_str(&read(&out.join("oracle_report.json"))).unwrap();
    assert!(report[0]["max_rdm_deviation"].as_f64().unwrap() > 1e-4);

    let big = write_config(tmp.path(), "big.toml", &SMALL.replace("n = 8", "n = 11"));
    assert_eq!(lab(&["oracle-check", &big]).status.code(), Some(2));
}

#[test]
fn version_flag() {
    let res = lab(&["--version"]);
    assert!(res.status.success());
    assert!(String::from_utf8_lossy(&res.stdout).contains(env!("CARGO_PKG_VERSION")));
}
