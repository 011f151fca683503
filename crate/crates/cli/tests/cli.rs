use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn tcilab(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tcilab"))
        .args(args)
        .arg("--output")
        .arg(out)
        .arg("--threads")
        .arg("1")
        .env_remove("TCILAB_OUTPUT")
        .output()
        .expect("binary runs")
}

fn artifacts(dir: &Path) -> Vec<PathBuf> {
    let mut v: Vec<PathBuf> = match std::fs::read_dir(dir) {
        Ok(rd) => rd.map(|e| e.unwrap().path()).collect(),
        Err(_) => Vec::new(),
    };
    v.sort();
    v
}

fn with_extension(dir: &Path, ext: &str) -> PathBuf {
    artifacts(dir).into_iter().find(|p| p.extension().is_some_and(|e| e == ext)).expect("artifact present")
}

fn report(dir: &Path) -> serde_json::Value {
    serde_json::from_slice(&std::fs::read(with_extension(dir, "json")).unwrap()).unwrap()
}

#[test]
fn simulate_is_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for dir in [&a, &b] {
        let out = tcilab(&["simulate", "--driver", "bm", "--n", "10", "--seed", "7"], dir);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    let (ca, cb) = (with_extension(&a, "csv"), with_extension(&b, "csv"));
    assert_eq!(ca.file_name(), cb.file_name());
    assert!(ca.file_name().unwrap().to_str().unwrap().starts_with("simulate-7-"));
    assert_eq!(std::fs::read(&ca).unwrap(), std::fs::read(&cb).unwrap());
    assert_eq!(std::fs::read(with_extension(&a, "json")).unwrap(), std::fs::read(with_extension(&b, "json")).unwrap());
    let rows = std::fs::read_to_string(&ca).unwrap().lines().count();
    assert_eq!(rows, 1 + 10 * 65);
}

#[test]
fn seed_changes_the_artifact_name_and_content() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    tcilab(&["simulate", "--n", "3", "--seed", "1"], &a);
    tcilab(&["simulate", "--n", "3", "--seed", "2"], &b);
    let (ca, cb) = (with_extension(&a, "csv"), with_extension(&b, "csv"));
    assert_ne!(ca.file_name(), cb.file_name());
    assert_ne!(std::fs::read(ca).unwrap(), std::fs::read(cb).unwrap());
}

#[test]
fn manifest_reruns_bit_identically() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    let out = tcilab(&["lift", "--preset", "lift-chen", "--n", "5"], &a);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let manifest = with_extension(&a, "MANIFEST");
    let text = std::fs::read_to_string(&manifest).unwrap();
    assert!(text.contains("git_describe") && text.contains("wall_clock_seconds") && text.contains("[experiment]"));
    let out = tcilab(&["lift", "--config", manifest.to_str().unwrap()], &b);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for ext in ["json", "csv", "bin"] {
        let (x, y) = (with_extension(&a, ext), with_extension(&b, ext));
        assert_eq!(x.file_name(), y.file_name());
        assert_eq!(std::fs::read(x).unwrap(), std::fs::read(y).unwrap(), "{ext} differs");
    }
    assert!(report(&a)["result"]["chen_max_deviation"].as_f64().unwrap() < 1e-10);
}

#[test]
fn malformed_config_exits_2_without_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("bad.toml");
    std::fs::write(&cfg, "command = \"simulate\"\nseed = 1\n\n[driver]\nkind = \"bm\"\nsteps = 8\ncolour = \"red\"\n").unwrap();
    let out_dir = tmp.path().join("out");
    let out = tcilab(&["simulate", "--config", cfg.to_str().unwrap()], &out_dir);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("colour") && err.contains("line"), "{err}");
    assert!(artifacts(&out_dir).is_empty());
}

#[test]
fn out_of_range_values_exit_2() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("p.toml");
    std::fs::write(&cfg, "command = \"lift\"\n[driver]\nkind = \"bm\"\n[functional]\nkind = \"lift\"\np = 3.5\n").unwrap();
    let out_dir = tmp.path().join("out");
    let out = tcilab(&["lift", "--config", cfg.to_str().unwrap()], &out_dir);
    assert_eq!(out.status.code(), Some(2));
    assert!(artifacts(&out_dir).is_empty());
    let out = tcilab(&["tci", "--preset", "lift-chen"], &out_dir);
    assert_eq!(out.status.code(), Some(2));
    let out = tcilab(&["tci", "--preset", "no-such-preset"], &out_dir);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn numerical_failure_exits_3() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("blowup.toml");
    std::fs::write(
        &cfg,
        "command = \"solve-rde\"\n[sampling]\nn = 4\n[driver]\nkind = \"bm\"\nsteps = 16\n\
         [functional]\nkind = \"rde\"\np = 2.5\nq = 1.0\nfield = \"scalar\"\nscale = 1e4\n",
    )
    .unwrap();
    let out_dir = tmp.path().join("out");
    let out = tcilab(&["solve-rde", "--config", cfg.to_str().unwrap()], &out_dir);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(artifacts(&out_dir).is_empty());
}

#[test]
fn identity_preset_passes() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tcilab(&["tci", "--preset", "identity-talagrand"], tmp.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let r = report(tmp.path());
    assert_eq!(r["result"]["passed"], true);
    assert_eq!(r["result"]["verdict"], 1.0);
    assert_eq!(r["result"]["report"]["rows"].as_array().unwrap().len(), 10);
}

#[test]
fn every_preset_parses() {
    let out = Command::new(env!("CARGO_BIN_EXE_tcilab")).args(["simulate", "--list-presets"]).output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().count(), 11);
    assert!(text.lines().all(|l| !l.ends_with('?')), "{text}");
    assert!(text.contains("rde-fbm-h04\ttci"));
}

#[test]
fn output_directory_falls_back_to_environment() {
    let tmp = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_tcilab"))
        .args(["simulate", "--n", "2", "--threads", "1"])
        .env("TCILAB_OUTPUT", tmp.path())
        .output()
        .unwrap();
    assert!(out.status.success());
    assert_eq!(artifacts(tmp.path()).len(), 3);
}
