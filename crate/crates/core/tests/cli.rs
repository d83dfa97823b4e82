use std::path::Path;
use std::process::{Command, Output};

fn meshattn(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_meshattn")).current_dir(dir).args(args).output().expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> serde_json::Value {
    let out = meshattn(dir, args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("json report")
}

#[test]
fn fixtures_have_expected_sizes_and_are_byte_stable() {
    let d = tempfile::tempdir().unwrap();
    let r = ok(d.path(), &["fixture", "--kind", "icosphere", "--subdiv", "2", "--out", "a.obj"]);
    assert_eq!(r["vertices"], 162);
    ok(d.path(), &["fixture", "--kind", "icosphere", "--subdiv", "2", "--out", "b.obj"]);
    assert_eq!(std::fs::read(d.path().join("a.obj")).unwrap(), std::fs::read(d.path().join("b.obj")).unwrap());
    assert_eq!(ok(d.path(), &["fixture", "--kind", "cube", "--out", "c.off"])["vertices"], 8);
}

#[test]
fn evaluate_identity_report_has_every_key() {
    let d = tempfile::tempdir().unwrap();
    ok(d.path(), &["fixture", "--kind", "bumpy", "--subdiv", "2", "--out", "m.obj"]);
    ok(d.path(), &["synth-features", "--mesh", "m.obj", "--out", "f.featb", "--target-out", "t.smap", "--set", "net.sem_dim=8"]);
    let r = ok(d.path(), &["evaluate", "--mesh", "m.obj", "--gt", "t.smap", "--pred", "t.smap"]);
    assert!(r["kl"].as_f64().unwrap().abs() < 1e-4);
    assert!((r["cc"].as_f64().unwrap() - 1.0).abs() < 1e-12);
    assert_eq!(r["mse"], 0.0);
    assert!(r["nss"].is_null() && r["auc"].is_null());
    std::fs::write(d.path().join("fix.txt"), "0\n5\n9\n").unwrap();
    let r = ok(d.path(), &["evaluate", "--mesh", "m.obj", "--gt", "t.smap", "--pred", "t.smap", "--fixations", "fix.txt"]);
    assert!(r["nss"].is_f64() && r["auc"].is_f64());
}

#[test]
fn exit_codes_and_error_lines() {
    let d = tempfile::tempdir().unwrap();
    let usage = meshattn(d.path(), &["fixture", "--kind", "cube", "--out", "x.obj", "--set", "train.nope=1"]);
    assert_eq!(usage.status.code(), Some(2));
    let line = String::from_utf8(usage.stderr).unwrap();
    assert_eq!(line.lines().count(), 1);
    let err: serde_json::Value = serde_json::from_str(&line).unwrap();
    assert_eq!(err["error"], "usage");
    let missing = meshattn(d.path(), &["evaluate", "--mesh", "none.obj", "--gt", "a", "--pred", "b"]);
    assert_eq!(missing.status.code(), Some(3));
    ok(d.path(), &["fixture", "--kind", "icosphere", "--subdiv", "1", "--out", "m.obj"]);
    std::fs::write(d.path().join("flat.txt"), "1\n".repeat(42)).unwrap();
    let flat = meshattn(d.path(), &["evaluate", "--mesh", "m.obj", "--gt", "flat.txt", "--pred", "flat.txt"]);
    assert_eq!(flat.status.code(), Some(4));
    assert_eq!(meshattn(d.path(), &["no-such-command"]).status.code(), Some(2));
}

#[test]
fn print_config_echoes_resolved_values() {
    let d = tempfile::tempdir().unwrap();
    std::fs::write(d.path().join("run.cfg"), "# lighter run\nppo.total_timesteps=4096\n").unwrap();
    let out = meshattn(d.path(), &["--config", "run.cfg", "--set", "reward.ior=0.3", "--seed", "7", "--print-config", "fixture", "--kind", "cube", "--out", "x.obj"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    for want in ["ppo.total_timesteps=4096", "reward.ior=0.3", "ppo.seed=7", "train.seed=7", "train.lr=0.0001"] {
        assert!(text.lines().any(|l| l == want), "{want}");
    }
    assert!(!d.path().join("x.obj").exists());
}
