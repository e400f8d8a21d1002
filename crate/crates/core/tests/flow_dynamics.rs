//! Integration tests of the flow engine and the dynamic diagnostics.

use curvflow::constructions::{
    bending_function, capped_catenoid, capped_paraboloid, round_sphere, BendingParams, CertificationTolerances,
};
use curvflow::curves::AnalyticCurve;
use curvflow::diagnostics::{evolution_residual_h, evolution_residual_study, sign_tracker};
use curvflow::flow::{run, FlowConfig, FlowVariant, GuardTrip, RunStatus, TrackedField};
use curvflow::geometry::curvature_field;
use curvflow::profile::GeneratingProfile;
use std::f64::consts::PI;

fn torus(samples: usize) -> GeneratingProfile {
    GeneratingProfile::from_curve(AnalyticCurve::EllipticTorus, 2, samples)
        .unwrap()
        .to_finite_difference()
}

fn sphere(samples: usize) -> GeneratingProfile {
    round_sphere(1.0, 2, samples).unwrap().profile.to_finite_difference()
}

#[test]
fn identical_configs_give_identical_trajectories() {
    let cfg = FlowConfig {
        t_end: 0.002,
        regrid_every: 5,
        ..FlowConfig::default()
    };
    let a = run(&torus(128), &cfg).unwrap();
    let b = run(&torus(128), &cfg).unwrap();
    let (mut ca, mut cb) = (Vec::new(), Vec::new());
    a.write_csv(&mut ca).unwrap();
    b.write_csv(&mut cb).unwrap();
    assert_eq!(ca, cb);
    assert_eq!(a.last().profile.r(), b.last().profile.r());
    assert_eq!(a.last().profile.z(), b.last().profile.z());
}

#[test]
fn even_profiles_stay_even() {
    let bf = bending_function(1.0, 2.0, &BendingParams::default()).unwrap();
    let p = capped_catenoid(&bf, 513, &CertificationTolerances::default())
        .unwrap()
        .profile
        .to_finite_difference();
    let cfg = FlowConfig {
        t_end: 0.005,
        ..FlowConfig::default()
    };
    let traj = run(&p, &cfg).unwrap();
    assert!(traj.completed());
    assert!(traj.terminal.regrids > 0);
    let last = &traj.last().profile;
    let n = last.len();
    let asym = (0..n)
        .map(|i| (last.r()[i] - last.r()[n - 1 - i]).abs() + (last.z()[i] + last.z()[n - 1 - i]).abs())
        .fold(0.0, f64::max);
    assert!(asym < 1e-8, "asymmetry {asym}");
}

#[test]
fn torus_loses_mean_convexity_on_the_inner_equator() {
    let cfg = FlowConfig {
        t_end: 0.01,
        ..FlowConfig::default()
    };
    for variant in [FlowVariant::VolumePreserving, FlowVariant::AreaPreserving] {
        let traj = run(&torus(512), &FlowConfig { variant, ..cfg.clone() }).unwrap();
        let report = sign_tracker(&traj, TrackedField::H);
        let crossing = report.crossing.expect("H changes sign");
        assert!((crossing.u - PI).abs() < 1e-9, "crossing at u = {}", crossing.u);
        assert!(report.minimum.last().unwrap() < &-1e-3);
        assert!(traj.terminal.relative_drift.unwrap() < 1e-10);
    }
}

#[test]
fn paraboloid_scalar_curvature_turns_negative_at_the_waist() {
    let bf = bending_function(1.0, 2.0, &BendingParams::default()).unwrap();
    let p = capped_paraboloid(&bf, 1025, &CertificationTolerances::default())
        .unwrap()
        .profile
        .to_finite_difference();
    let traj = run(
        &p,
        &FlowConfig {
            t_end: 0.002,
            ..FlowConfig::default()
        },
    )
    .unwrap();
    let report = sign_tracker(&traj, TrackedField::R);
    let crossing = report.crossing.expect("R changes sign");
    assert!(crossing.z.abs() < 0.05, "minimum of R at z = {}", crossing.z);
    assert!(sign_tracker(&traj, TrackedField::H).crossing.is_none());
}

#[test]
fn round_sphere_has_no_crossing_and_tiny_residual() {
    let traj = run(
        &sphere(257),
        &FlowConfig {
            t_end: 0.01,
            dt_max: 2e-5,
            regrid_every: 0,
            record_every: 100,
            ..FlowConfig::default()
        },
    )
    .unwrap();
    assert!(sign_tracker(&traj, TrackedField::H).crossing.is_none());
    for s in &traj.states {
        assert!((s.min_h - 2.0).abs() < 1e-6);
    }
    // Both sides vanish identically. What is left is truncation near the
    // poles on coarse grids and, past N ≈ 257, rounding amplified by the
    // Laplacian of a curvature field (about 1e-7 here).
    let res = evolution_residual_h(&traj).unwrap();
    assert!(res.residual < 1e-6, "residual {}", res.residual);
}

#[test]
fn shrinking_sphere_follows_the_mean_curvature_ode() {
    // H = n/ρ with ρ² = 1 - 2nt, so dH/dt = H³/n
    let traj = run(
        &sphere(129),
        &FlowConfig {
            variant: FlowVariant::Unconstrained,
            t_end: 0.05,
            dt_max: 5e-5,
            regrid_every: 0,
            record_every: 20,
            ..FlowConfig::default()
        },
    )
    .unwrap();
    let eq = 64;
    let hs: Vec<f64> = traj
        .states
        .iter()
        .map(|s| curvature_field(&s.profile).unwrap().h[eq])
        .collect();
    for (s, h) in traj.states.iter().zip(&hs) {
        let exact = 2.0 / (1.0 - 4.0 * s.t).sqrt();
        assert!((h - exact).abs() < 1e-6, "t = {}: {h} vs {exact}", s.t);
    }
    let res = evolution_residual_h(&traj).unwrap();
    assert!(res.residual < 1e-4, "residual {}", res.residual);
}

#[test]
fn evolution_residual_self_converges_on_the_torus() {
    let cfg = FlowConfig {
        t_end: 0.01,
        dt_max: 4e-5,
        record_every: 10,
        ..FlowConfig::default()
    };
    let study = evolution_residual_study(&AnalyticCurve::EllipticTorus, 2, 64, &cfg).unwrap();
    assert!(study.ratio >= 3.5, "{study:?}");
    assert!(study.order >= 1.8, "{study:?}");
}

#[test]
fn jensen_holds_along_the_torus_flow() {
    let traj = run(
        &torus(256),
        &FlowConfig {
            variant: FlowVariant::AreaPreserving,
            t_end: 0.005,
            ..FlowConfig::default()
        },
    )
    .unwrap();
    for s in &traj.states {
        let vp = curvflow::geometry::global_term(&s.profile, FlowVariant::VolumePreserving).unwrap();
        let ap = curvflow::geometry::global_term(&s.profile, FlowVariant::AreaPreserving).unwrap();
        assert!(ap >= vp, "t = {}: h_AP {ap} < h_VP {vp}", s.t);
    }
}

#[test]
fn guard_trip_keeps_partial_output() {
    let traj = run(
        &torus(128),
        &FlowConfig {
            t_end: 0.01,
            guard_max_a2: 1.0,
            ..FlowConfig::default()
        },
    )
    .unwrap();
    assert!(matches!(
        traj.terminal.status,
        RunStatus::GuardTrip(GuardTrip::MaxA2 { .. })
    ));
    assert!(!traj.completed());
    assert!(!traj.states.is_empty());
}
