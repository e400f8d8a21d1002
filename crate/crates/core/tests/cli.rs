//! End-to-end tests of the `curvflow` binary.

use curvflow::diagnostics::{verify, Mode, VerifyConfig};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn curvflow(root: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_curvflow"))
        .args(args)
        .env("CURVFLOW_OUT", root)
        .output()
        .expect("binary runs")
}

fn files(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let p = e.unwrap().path();
            (p.file_name().unwrap().into(), std::fs::read(&p).unwrap())
        })
        .collect()
}

fn report(dir: &Path) -> serde_json::Value {
    serde_json::from_slice(&std::fs::read(dir.join("report.json")).unwrap()).unwrap()
}

#[test]
fn construct_sphere_writes_a_certified_run() {
    let tmp = tempfile::tempdir().unwrap();
    let out = curvflow(tmp.path(), &["construct", "sphere", "--radius", "2"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let dir = tmp.path().join("construct-sphere");
    let names: Vec<_> = files(&dir).into_keys().collect();
    for f in [
        "config.resolved.toml",
        "curvature.csv",
        "profile.csv",
        "profile.json",
        "report.json",
    ] {
        assert!(names.contains(&PathBuf::from(f)), "missing {f}");
    }
    assert_eq!(report(&dir)["passed"], true);
    let curv = std::fs::read_to_string(dir.join("curvature.csv")).unwrap();
    assert!(curv.starts_with("u,lambda1,lambda2,H,A2,C,R\n"));
}

#[test]
fn reruns_are_byte_identical() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for root in [a.path(), b.path()] {
        assert!(curvflow(root, &["construct", "elliptic_torus", "--n-samples", "256"])
            .status
            .success());
        let out = curvflow(
            root,
            &[
                "evolve",
                "--example",
                "elliptic_torus",
                "--n-samples",
                "256",
                "--t-end",
                "0.002",
            ],
        );
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    for run in ["construct-elliptic_torus", "evolve-elliptic_torus-vp"] {
        assert_eq!(files(&a.path().join(run)), files(&b.path().join(run)), "{run} differs");
    }
}

#[test]
fn evolve_reads_a_constructed_profile() {
    let tmp = tempfile::tempdir().unwrap();
    assert!(
        curvflow(tmp.path(), &["construct", "elliptic_torus", "--n-samples", "256"])
            .status
            .success()
    );
    let profile = tmp.path().join("construct-elliptic_torus/profile.csv");
    let out = curvflow(
        tmp.path(),
        &[
            "evolve",
            "--profile",
            profile.to_str().unwrap(),
            "--variant",
            "ap",
            "--t-end",
            "0.002",
        ],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let dir = tmp.path().join("evolve-profile-ap");
    let traj = std::fs::read_to_string(dir.join("trajectory.csv")).unwrap();
    assert!(traj.starts_with("t,area,volume,h,minH,minR,maxA2\n"));
    let rep = report(&dir);
    assert_eq!(rep["terminal"]["conserved"], "area");
    assert!(rep["terminal"]["relative_drift"].as_f64().unwrap() < 1e-6);
}

#[test]
fn config_file_is_validated_and_shadowed_by_flags() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("run.toml");
    std::fs::write(
        &cfg,
        "[evolve]\n[evolve.construct]\nexample = \"elliptic_torus\"\nn_samples = 256\n[evolve.flow]\nt_end = 0.2\nvariant = \"ap\"\n",
    )
    .unwrap();
    let out = curvflow(
        tmp.path(),
        &[
            "evolve",
            "--config",
            cfg.to_str().unwrap(),
            "--t-end",
            "0.001",
            "--run-name",
            "shadow",
        ],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let resolved = std::fs::read_to_string(tmp.path().join("shadow/config.resolved.toml")).unwrap();
    assert!(resolved.contains("t_end = 0.001"), "{resolved}");
    assert!(resolved.contains("variant = \"ap\""), "{resolved}");

    std::fs::write(&cfg, "[evolve.flow]\nt_ende = 0.2\n").unwrap();
    let out = curvflow(tmp.path(), &["evolve", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("t_ende"));
}

#[test]
fn output_root_flag_beats_environment() {
    let (env_root, flag_root) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let out = curvflow(
        env_root.path(),
        &[
            "construct",
            "sphere",
            "--n-samples",
            "65",
            "--out",
            flag_root.path().to_str().unwrap(),
        ],
    );
    assert!(out.status.success());
    assert!(flag_root.path().join("construct-sphere/report.json").exists());
    assert!(!env_root.path().join("construct-sphere").exists());
}

#[test]
fn tight_tolerance_reports_failures_and_exits_nonzero() {
    let tmp = tempfile::tempdir().unwrap();
    let out = curvflow(tmp.path(), &["verify", "--no-dynamics", "--tolerance", "1e-15"]);
    assert_eq!(out.status.code(), Some(1));
    let rep = report(&tmp.path().join("verify"));
    assert_eq!(rep["passed"], false);
    let failed = rep["checks"]
        .as_array()
        .unwrap()
        .iter()
        .filter(|c| c["passed"] == false)
        .count();
    assert!(failed > 0);
    let csv = std::fs::read_to_string(tmp.path().join("verify/checks.csv")).unwrap();
    assert!(csv.starts_with("name,anchor,computed,target,tolerance,mode,passed\n"));
}

#[test]
fn default_verify_passes() {
    let tmp = tempfile::tempdir().unwrap();
    let out = curvflow(tmp.path(), &["verify"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
    let rep = report(&tmp.path().join("verify"));
    for name in [
        "A2_at_pi",
        "lapH_at_pi",
        "hVP_torus",
        "rate_H_at_pi",
        "rate_R_at_u0",
        "jensen",
        "exV",
        "gradT",
    ] {
        let check = rep["checks"].as_array().unwrap().iter().find(|c| c["name"] == name);
        assert_eq!(check.expect(name)["passed"], true, "{name}");
    }
}

#[test]
fn doubling_the_grid_does_not_increase_grid_residuals() {
    let coarse = verify(&VerifyConfig {
        n_samples: 512,
        capped_samples: 513,
        dynamics: false,
        ..VerifyConfig::default()
    })
    .unwrap();
    let fine = verify(&VerifyConfig {
        dynamics: false,
        ..VerifyConfig::default()
    })
    .unwrap();
    for (c, f) in coarse.checks.iter().zip(&fine.checks) {
        assert_eq!(c.name, f.name);
        // residuals already at rounding level are allowed to jitter
        if matches!(c.mode, Mode::Absolute | Mode::Relative) && c.residual().max(f.residual()) > 1e-12 {
            assert!(
                f.residual() <= c.residual(),
                "{}: {} -> {}",
                c.name,
                c.residual(),
                f.residual()
            );
        }
    }
}

#[test]
fn perturb_on_the_torus_passes() {
    let tmp = tempfile::tempdir().unwrap();
    let out = curvflow(
        tmp.path(),
        &[
            "perturb",
            "--example",
            "elliptic_torus",
            "--n-samples",
            "256",
            "--s",
            "0,1e-4,1e-3",
            "--t-end",
            "0.003",
        ],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
    let dir = tmp.path().join("perturb-elliptic_torus");
    for v in ["vp", "ap"] {
        let csv = std::fs::read_to_string(dir.join(format!("perturb_{v}.csv"))).unwrap();
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("s,minH_after_preflow,first_crossing_t"));
        assert_eq!(lines.count(), 3);
    }
    let rep = report(&dir);
    assert_eq!(rep["monotone_in_s"], true);
}
