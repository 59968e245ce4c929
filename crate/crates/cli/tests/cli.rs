use std::path::Path;
use std::process::{Command, Output};

const SMALL: &str = r#"
[workload]
id = "S-1"
load_factor = 1.5

[sim]
total_duration = 300.0

[flush]
base_bandwidth = 327680.0

[cache]
capacity = 9830400

[run]
methods = ["none", "lqoco"]
seeds = [1]
"#;

fn qoco(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qoco")).args(args).output().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write_config(dir: &Path, body: &str) -> String {
    let p = dir.join("cfg.toml");
    std::fs::write(&p, body).unwrap();
    p.display().to_string()
}

#[test]
fn run_then_compare() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let out = dir.path().join("out");
    let o = qoco(&["run", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.contains("lqoco") && stdout.contains("none"), "{stdout}");
    for f in ["report.txt", "summary.txt", "none-seed1/samples.csv", "lqoco-seed1/qtable.csv"] {
        assert!(out.join(f).is_file(), "{f}");
    }

    let table = dir.path().join("cmp.txt");
    let o = qoco(&[
        "compare",
        out.join("report.txt").to_str().unwrap(),
        "--out",
        table.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(std::fs::read_to_string(&table).unwrap(), String::from_utf8_lossy(&o.stdout));
}

#[test]
fn seed_and_method_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let out = dir.path().join("out");
    let o = qoco(&[
        "run", "--config", &cfg, "--out", out.to_str().unwrap(), "--seed", "7", "--method", "coto",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(out.join("coto-seed7/report.txt").is_file());
    assert!(!out.join("none-seed1").exists());
}

#[test]
fn trace_round_trip_through_run() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let trace = dir.path().join("trace.csv");
    let o = qoco(&["gen-trace", "--config", &cfg, "--out", trace.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(std::fs::read_to_string(&trace).unwrap().starts_with("#qoco-trace v1"));

    let replay = SMALL.replace("id = \"S-1\"", &format!("kind = \"trace\"\ntrace = {:?}", trace.display().to_string()));
    let cfg2 = dir.path().join("replay.toml");
    std::fs::write(&cfg2, replay).unwrap();
    let out = dir.path().join("out");
    let o = qoco(&["run", "--config", cfg2.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
}

#[test]
fn export_qtable_trained_and_untrained() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let blank = dir.path().join("blank.csv");
    let o = qoco(&["export-qtable", "--config", &cfg, "--out", blank.to_str().unwrap(), "--untrained"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = std::fs::read_to_string(&blank).unwrap();
    assert!(text.starts_with("#qoco-qtable v1"));
    assert!(text.lines().filter(|l| !l.starts_with('#')).skip(1).all(|l| l.ends_with(",0.0") || l.ends_with(",INVALID")));

    let trained = dir.path().join("trained.csv");
    let o = qoco(&["export-qtable", "--config", &cfg, "--out", trained.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = dir.path().join("warm");
    let o = qoco(&[
        "run", "--config", &cfg, "--out", out.to_str().unwrap(), "--warm-start", trained.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
}

#[test]
fn bad_inputs_fail_with_messages() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[cache]\ncapacityy = 10\n");
    let o = qoco(&["run", "--config", &cfg]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("capacityy"), "{}", stderr(&o));

    let cfg = write_config(dir.path(), "[workload]\nkind = \"trace\"\ntrace = \"/missing/trace.csv\"\n");
    let o = qoco(&["run", "--config", &cfg]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("/missing/trace.csv"), "{}", stderr(&o));

    let cfg = write_config(dir.path(), SMALL);
    let o = qoco(&["run", "--config", &cfg, "--method", "magic"]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("magic"), "{}", stderr(&o));

    let report = dir.path().join("one.txt");
    std::fs::write(&report, "").unwrap();
    let o = qoco(&["compare", report.to_str().unwrap()]);
    assert!(!o.status.success());
}
