use std::path::Path;
use std::process::Command;

const CONFIG: &str = r#"
name = "smoke"
t_end = 0.01

[params]
A = 1.0
gamma = 2.0
delta = 0.5
alpha = 1.0
beta = 0.0

[grid]
n = 32

[initial]
family = "sine"

[picard]
dt = 1e-3
"#;

fn dnslab(dir: &Path, args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_dnslab"))
        .args(args)
        .arg("--output-dir")
        .arg(dir)
        .output()
        .unwrap()
}

#[test]
fn run_then_inspect_snapshot() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("smoke.toml");
    std::fs::write(&cfg, CONFIG).unwrap();
    let out = dnslab(dir.path(), &["run", cfg.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let run_dir = dir.path().join("smoke").join("run");
    for f in ["diagnostics.csv", "convergence.csv", "config.toml"] {
        assert!(run_dir.join(f).exists(), "missing {f}");
    }
    let snap = std::fs::read_dir(&run_dir)
        .unwrap()
        .filter_map(|e| e.ok().map(|e| e.path()))
        .find(|p| p.extension().is_some_and(|x| x == "snap"))
        .expect("no snapshot written");
    let out = dnslab(dir.path(), &["inspect", snap.to_str().unwrap()]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).contains("sha256"));
}

#[test]
fn check_init_and_bad_key() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("smoke.toml");
    std::fs::write(&cfg, CONFIG).unwrap();
    let out = dnslab(dir.path(), &["check-init", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));

    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, format!("{CONFIG}\nbogus = 3\n")).unwrap();
    let out = dnslab(dir.path(), &["run", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown key: bogus"));
}
