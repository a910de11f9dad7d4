//! Exit-code and surface contracts of the command-line driver.

use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_hht-rmt"))
}

#[test]
fn verify_only_family_runs_single_family() {
    let tmp = tempfile::tempdir().unwrap();
    let out = bin()
        .args(["verify", "--only", "ward", "--out"])
        .arg(tmp.path())
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("PASS ward"));
    assert!(!stdout.contains("mplaw"), "other families must not run");
    let report = std::fs::read_to_string(tmp.path().join("verify_report.txt")).unwrap();
    assert!(report.starts_with("# config_hash="));
}

#[test]
fn unknown_family_is_a_validation_error() {
    let tmp = tempfile::tempdir().unwrap();
    let out = bin()
        .args(["verify", "--only", "nonsense", "--out"])
        .arg(tmp.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn corrupted_tolerance_is_a_validation_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("bad.json");
    std::fs::write(
        &cfg,
        r#"{"alphas":[3.0],"trials":10,"seed":1,"quad":{"rel_tol":-1.0,"abs_tol":1e-14}}"#,
    )
    .unwrap();
    let out = bin()
        .args(["verify", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(tmp.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn malformed_config_is_a_validation_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("broken.json");
    std::fs::write(&cfg, "{not json").unwrap();
    for sub in ["mc", "kernel", "esd", "phi"] {
        let out = bin()
            .args([sub, "--config"])
            .arg(&cfg)
            .arg("--out")
            .arg(tmp.path())
            .output()
            .unwrap();
        assert_eq!(out.status.code(), Some(2), "{sub} should reject malformed config");
    }
}

#[test]
fn kernel_rejects_unknown_route() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("k.json");
    std::fs::write(
        &cfg,
        r#"{"alpha":3.0,"y":0.5,"routes":["Z"],"pairs":[[[0.0,2.0],[1.0,2.0]]],"tol_a":1e-3,"tol_b":1e-8,"seed":1}"#,
    )
    .unwrap();
    let out = bin()
        .args(["kernel", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(tmp.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn phi_rejects_upper_half_plane_lambda() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("phi.json");
    std::fs::write(
        &cfg,
        r#"{"alpha":3.0,"epsilon":0.01,"seed":1,"n_list":[1000],"lambdas":[[1.0,0.5]]}"#,
    )
    .unwrap();
    let out = bin()
        .args(["phi", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(tmp.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2), "Im λ > 0 must be a domain error");
}

#[test]
fn mc_smoke_plan_is_fast_and_reseedable() {
    let tmp = tempfile::tempdir().unwrap();
    let t0 = std::time::Instant::now();
    let out = bin()
        .args(["mc", "--out"])
        .arg(tmp.path().join("a"))
        .args(["--seed", "99"])
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(t0.elapsed().as_secs() < 10, "default smoke plan must finish fast");
    let out2 = bin()
        .args(["mc", "--out"])
        .arg(tmp.path().join("b"))
        .args(["--seed", "99"])
        .output()
        .unwrap();
    assert!(out2.status.success());
    let a = std::fs::read(tmp.path().join("a/mc_results.json")).unwrap();
    let b = std::fs::read(tmp.path().join("b/mc_results.json")).unwrap();
    assert_eq!(a, b, "same seed → byte-identical results");
    let c = bin()
        .args(["mc", "--out"])
        .arg(tmp.path().join("c"))
        .args(["--seed", "100"])
        .output()
        .unwrap();
    assert!(c.status.success());
    let c = std::fs::read(tmp.path().join("c/mc_results.json")).unwrap();
    assert_ne!(a, c, "different seed → different draws");
}

#[test]
fn mc_overlap_full_reduces_to_single_matrix_numbers() {
    let tmp = tempfile::tempdir().unwrap();
    let single = bin()
        .args(["mc", "--out"])
        .arg(tmp.path().join("s"))
        .output()
        .unwrap();
    assert!(single.status.success());
    let full = bin()
        .args(["mc", "--overlap", "full", "--out"])
        .arg(tmp.path().join("f"))
        .output()
        .unwrap();
    assert!(full.status.success());
    let read = |p: std::path::PathBuf| -> Vec<(String, String, f64, f64)> {
        let text = std::fs::read_to_string(p).unwrap();
        text.lines()
            .skip(2)
            .map(|l| {
                let f: Vec<&str> = l.split(',').collect();
                (f[0].into(), f[1].into(), f[2].parse().unwrap(), f[3].parse().unwrap())
            })
            .collect()
    };
    let s = read(tmp.path().join("s/mc_covariance.csv"));
    let f = read(tmp.path().join("f/mc_covariance.csv"));
    // every single-matrix estimate appears identically among the overlap rows
    for row in &s {
        assert!(
            f.iter().any(|r| r.0 == row.0 && r.1 == row.1 && r.2 == row.2 && r.3 == row.3),
            "missing row {row:?}"
        );
    }
}
