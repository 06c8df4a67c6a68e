use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

const SMALL_A: &str = r#"
m = 1.3333333333333333
p = 1.5
n = 3
seed = 3

[grid]
r_max = 20000.0
cells = 160
stretch = 1.085

[time]
tau_end = 12.0
safety = 0.2

[init]
D0 = 2.0
D1 = 0.5
shape = "step"

[reg]
eps = 0.1

[output]
path = "run"
cadence = 0.05
"#;

fn with_path(text: &str, path: &str) -> String {
    text.replace("path = \"run\"", &format!("path = \"{path}\""))
}

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

fn dnl(out_root: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dnl"))
        .args(args)
        .env("DNL_OUTPUT_DIR", out_root)
        .output()
        .unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn missing_key_exits_2_with_key_name() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "c.toml",
        &SMALL_A.replace("stretch = 1.085\n", ""),
    );
    let o = dnl(tmp.path(), &["simulate", cfg.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("grid.stretch"));
}

#[test]
fn out_of_range_exponent_exits_2() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "c.toml",
        &SMALL_A.replace("m = 1.3333333333333333", "m = 0.2"),
    );
    let o = dnl(tmp.path(), &["profile", cfg.to_str().unwrap()]);
    assert_eq!(code(&o), 2, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn unreadable_config_exits_2() {
    let tmp = TempDir::new().unwrap();
    let o = dnl(
        tmp.path(),
        &["simulate", tmp.path().join("absent.toml").to_str().unwrap()],
    );
    assert_eq!(code(&o), 2);
}

#[test]
fn verify_on_equilibrium_run_passes() {
    let tmp = TempDir::new().unwrap();
    let text = SMALL_A
        .replace("D0 = 2.0", "D0 = 1.0")
        .replace("D1 = 0.5", "D1 = 1.0")
        .replace("shape = \"step\"", "shape = \"equilibrium\"")
        .replace("tau_end = 12.0", "tau_end = 2.0");
    let cfg = write_config(tmp.path(), "eq.toml", &text);
    let c = cfg.to_str().unwrap();
    for cmd in ["simulate", "rates", "verify", "check"] {
        let o = dnl(tmp.path(), &[cmd, c]);
        assert_eq!(code(&o), 0, "{cmd}: {}", String::from_utf8_lossy(&o.stderr));
    }
    let v = json(&tmp.path().join("run/verify.json"));
    assert_eq!(v["trivial"], Value::Bool(true));
    assert!(v["checks"]
        .as_array()
        .unwrap()
        .iter()
        .all(|c| c["pass"] == Value::Bool(true)));
}

#[test]
fn pipeline_reports_positive_rate() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "a.toml", SMALL_A);
    let c = cfg.to_str().unwrap();
    for cmd in [
        "profile", "simulate", "spectrum", "rates", "verify", "check",
    ] {
        let o = dnl(tmp.path(), &[cmd, c]);
        assert_eq!(code(&o), 0, "{cmd}: {}", String::from_utf8_lossy(&o.stderr));
    }
    let dir = tmp.path().join("run");
    let v = json(&dir.join("verify.json"));
    assert!(v["constants"]["lambda_emp"].as_f64().unwrap() > 0.0);
    assert!(v["constants"]["lambda_theo"].as_f64().unwrap() > 0.0);
    for key in ["constants", "fits", "checks", "provenance", "exponents"] {
        assert!(v.get(key).is_some(), "{key}");
    }
    for c in v["checks"].as_array().unwrap() {
        assert!(c.get("name").is_some() && c.get("pass").is_some() && c.get("slack").is_some());
    }
    assert_eq!(v["provenance"]["seed"], Value::from(3));
    let csv = fs::read_to_string(dir.join("series.csv")).unwrap();
    assert_eq!(
        csv.lines().next().unwrap(),
        "tau,mass,E_rel,I_rel,E_lin,I_lin,I0_lin,I_eps,I_gamma_eps,L1_dist,w_min,w_max,clipped_mass"
    );
    let prof = fs::read_to_string(dir.join("profile.csv")).unwrap();
    assert_eq!(
        prof.lines().next().unwrap(),
        "r,u_Dstar,u_D0,u_D1,mu_density,nu_eps_density"
    );
    assert_eq!(prof.lines().count(), 161);
    let snaps = json(&dir.join("snapshots.json"));
    let first = &snaps["snapshots"][1];
    let scale = first["scale"].as_f64().unwrap();
    let (x, y) = (
        first["x"][5].as_f64().unwrap(),
        snaps["y"][5].as_f64().unwrap(),
    );
    assert!((x / y - scale).abs() < 1e-12 * scale);
}

#[test]
fn identical_config_gives_identical_bytes() {
    let a = TempDir::new().unwrap();
    let b = TempDir::new().unwrap();
    let text = SMALL_A.replace("tau_end = 12.0", "tau_end = 3.0");
    for root in [&a, &b] {
        let cfg = write_config(root.path(), "c.toml", &text);
        for cmd in ["simulate", "spectrum"] {
            assert_eq!(code(&dnl(root.path(), &[cmd, cfg.to_str().unwrap()])), 0);
        }
    }
    for f in [
        "series.csv",
        "series.json",
        "snapshots.json",
        "run.json",
        "spectrum.json",
    ] {
        let x = fs::read(a.path().join("run").join(f)).unwrap();
        let y = fs::read(b.path().join("run").join(f)).unwrap();
        assert!(x == y, "{f} differs");
    }
}

#[test]
fn sweep_runs_isolated_directories() {
    let tmp = TempDir::new().unwrap();
    let short = SMALL_A.replace("tau_end = 12.0", "tau_end = 1.0");
    let c1 = write_config(tmp.path(), "one.toml", &with_path(&short, "one"));
    let c2 = write_config(
        tmp.path(),
        "two.toml",
        &with_path(&short, "two").replace("D0 = 2.0", "D0 = 1.5"),
    );
    let o = dnl(
        tmp.path(),
        &["simulate", c1.to_str().unwrap(), c2.to_str().unwrap()],
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let r1 = json(&tmp.path().join("one/run.json"));
    let r2 = json(&tmp.path().join("two/run.json"));
    assert_ne!(
        r1["provenance"]["config_hash"],
        r2["provenance"]["config_hash"]
    );
    assert_ne!(r1["constants"]["dstar"], r2["constants"]["dstar"]);
}

#[test]
fn shared_output_path_is_rejected() {
    let tmp = TempDir::new().unwrap();
    let short = SMALL_A.replace("tau_end = 12.0", "tau_end = 0.5");
    let c1 = write_config(tmp.path(), "one.toml", &short);
    let c2 = write_config(
        tmp.path(),
        "two.toml",
        &short.replace("seed = 3", "seed = 4"),
    );
    let o = dnl(
        tmp.path(),
        &["simulate", c1.to_str().unwrap(), c2.to_str().unwrap()],
    );
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("output.path"));
}

#[test]
fn output_dir_env_is_a_prefix() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "c.toml", &with_path(SMALL_A, "nested/run"));
    let root = tmp.path().join("elsewhere");
    let o = dnl(&root, &["profile", cfg.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    assert!(root.join("nested/run/profile.csv").exists());
}

#[test]
fn too_short_run_is_a_numerical_failure() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "c.toml",
        &SMALL_A.replace("tau_end = 12.0", "tau_end = 0.3"),
    );
    let c = cfg.to_str().unwrap();
    assert_eq!(code(&dnl(tmp.path(), &["simulate", c])), 0);
    let o = dnl(tmp.path(), &["rates", c]);
    assert_eq!(code(&o), 3, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn wide_sandwich_without_contraction_fails_verification() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "c.toml",
        &SMALL_A.replace("tau_end = 12.0", "tau_end = 0.5"),
    );
    let c = cfg.to_str().unwrap();
    assert_eq!(code(&dnl(tmp.path(), &["simulate", c])), 0);
    let o = dnl(tmp.path(), &["check", c]);
    assert_eq!(code(&o), 4, "{}", String::from_utf8_lossy(&o.stderr));
    let rep = json(&tmp.path().join("run/check.json"));
    assert!(rep["deferred"].is_string());
}

#[test]
fn stale_artifacts_are_rejected() {
    let tmp = TempDir::new().unwrap();
    let short = SMALL_A.replace("tau_end = 12.0", "tau_end = 1.0");
    let cfg = write_config(tmp.path(), "c.toml", &short);
    assert_eq!(
        code(&dnl(tmp.path(), &["simulate", cfg.to_str().unwrap()])),
        0
    );
    fs::write(&cfg, short.replace("seed = 3", "seed = 9")).unwrap();
    assert_eq!(code(&dnl(tmp.path(), &["rates", cfg.to_str().unwrap()])), 2);
}
