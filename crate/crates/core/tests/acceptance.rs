//! Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any failure.
//!
//! Reference values come from oracles written here (closed forms, a periodic
//! trapezoid evaluation of the elliptic integral, exact shrinking spheres),
//! not from the library routines under test.

use anyhow::{ensure, Context, Result};
use curvflow::constructions::{
    bending_function, capped_catenoid, capped_paraboloid, round_sphere, BendingParams, CertificationTolerances,
};
use curvflow::curves::AnalyticCurve;
use curvflow::diagnostics::{
    analytic_laplacian_h, cubic_identity, evolution_residual_study, gradient_term, gradient_term_closed,
    laplacian_order_at_pi, perturbation_experiment, sign_tracker, simulated_rate_h_at_pi, simulated_rate_r_at_waist,
};
use curvflow::flow::{run, FlowConfig, FlowVariant, TrackedField, Trajectory};
use curvflow::geometry::{curvature_field, curvatures_from_jet, global_term, scalars};
use curvflow::profile::GeneratingProfile;
use std::f64::consts::PI;
use std::process::ExitCode;
use std::time::Instant;

fn opt(x: Option<f64>) -> String {
    x.map_or_else(|| "never".to_string(), |v| format!("{v:.4e}"))
}

struct Verdict {
    passed: bool,
    detail: String,
}

fn verdict(passed: bool, detail: String) -> Result<Verdict> {
    Ok(Verdict { passed, detail })
}

/// Mean curvature of the elliptic torus `(3 + 2cos u, √2 sin u)`.
fn torus_h_oracle(u: f64) -> f64 {
    let c = (u / 2.0).cos();
    c * c * (5.0 + 2.0 * u.cos() - (2.0 * u).cos()) / ((3.0 + 2.0 * u.cos()) * (1.0 + u.sin().powi(2)).powf(1.5))
}

/// `∫_0^{π/2} sqrt(1 + sin²θ) dθ` by the periodic trapezoid rule, which is
/// spectrally accurate for this smooth periodic integrand.
fn elliptic_oracle() -> f64 {
    let m = 256;
    let h = 2.0 * PI / m as f64;
    (0..m).map(|k| (1.0 + (k as f64 * h).sin().powi(2)).sqrt()).sum::<f64>() * h / 4.0
}

fn torus(samples: usize) -> Result<GeneratingProfile> {
    Ok(GeneratingProfile::from_curve(AnalyticCurve::EllipticTorus, 2, samples)?)
}

fn fd(p: GeneratingProfile) -> GeneratingProfile {
    p.to_finite_difference()
}

fn h_vp_oracle() -> f64 {
    PI / (2.0 * 2f64.sqrt() * elliptic_oracle())
}

fn c1() -> Result<Verdict> {
    let p = torus(1024)?;
    let f = curvature_field(&p)?;
    let err = p
        .u()
        .iter()
        .zip(&f.h)
        .map(|(u, h)| (h - torus_h_oracle(*u)).abs())
        .fold(0.0, f64::max);
    verdict(
        err < 1e-10,
        format!("max |H - closed form| = {err:.3e} (< 1e-10, N = 1024, exact derivatives)"),
    )
}

fn c2() -> Result<Verdict> {
    let (l1, l2) = curvatures_from_jet(&AnalyticCurve::EllipticTorus.jet(PI), false);
    let a2 = scalars(2, l1, l2).1;
    verdict(
        (a2 - 2.0).abs() < 1e-10,
        format!("|A|²(π) = {a2:.15} (target 2, tol 1e-10)"),
    )
}

fn c3() -> Result<Verdict> {
    let lap = analytic_laplacian_h(&AnalyticCurve::EllipticTorus, 2, PI);
    let order = laplacian_order_at_pi([64, 128, 256])?;
    verdict(
        (lap - 0.5).abs() < 1e-6 && order >= 1.9,
        format!("ΔH(π) = {lap:.12} (target 0.5, tol 1e-6); grid Laplacian order {order:.2} (≥ 1.9)"),
    )
}

fn c4() -> Result<Verdict> {
    let p = torus(1024)?;
    let vp = global_term(&p, FlowVariant::VolumePreserving)?;
    let ap = global_term(&p, FlowVariant::AreaPreserving)?;
    let oracle = h_vp_oracle();
    verdict(
        (vp - oracle).abs() < 1e-8 && vp >= 0.5 && ap >= vp,
        format!("h_VP = {vp:.12}, oracle {oracle:.12} (tol 1e-8); h_VP ≥ 1/2; h_AP = {ap:.6} ≥ h_VP"),
    )
}

fn c5() -> Result<Verdict> {
    let target = 0.5 - 2.0 * h_vp_oracle();
    let rate = simulated_rate_h_at_pi(1024, 1e-5)?;
    let main = (rate - target).abs();
    // joint refinement in N and dt from coarse grids, where rounding in the
    // difference quotient stays below the discretization error
    let ladder = [(128, 1e-4), (256, 5e-5), (512, 2.5e-5)];
    let errs: Vec<f64> = ladder
        .iter()
        .map(|&(n, dt)| simulated_rate_h_at_pi(n, dt).map(|r| (r - target).abs()))
        .collect::<Result<_, _>>()?;
    let decreasing = errs.windows(2).all(|w| w[1] < w[0]);
    verdict(
        main < 2e-2 && decreasing,
        format!(
            "rate {rate:.7} vs 1/2 - 2h = {target:.7}, |diff| = {main:.2e} (< 2e-2); refinement {:?} decreasing: {decreasing}",
            errs.iter().map(|e| format!("{e:.2e}")).collect::<Vec<_>>()
        ),
    )
}

fn run_variants(p: &GeneratingProfile, t_end: f64) -> Result<Vec<(FlowVariant, Trajectory)>> {
    [FlowVariant::VolumePreserving, FlowVariant::AreaPreserving]
        .into_iter()
        .map(|variant| {
            let cfg = FlowConfig {
                variant,
                t_end,
                ..FlowConfig::default()
            };
            Ok((variant, run(p, &cfg)?))
        })
        .collect()
}

/// First recorded state with `min H < -1e-3`: time and height of the minimum.
fn first_below(traj: &Trajectory, level: f64) -> Option<(f64, f64)> {
    traj.states
        .iter()
        .find(|s| s.min_h < level)
        .map(|s| (s.t, s.profile.z()[s.min_h_index]))
}

struct Shared {
    torus_runs: Vec<(FlowVariant, Trajectory)>,
}

fn c6(shared: &Shared) -> Result<Verdict> {
    let mut ok = true;
    let mut parts = Vec::new();
    for (v, traj) in &shared.torus_runs {
        let hit = first_below(traj, -1e-3);
        ok &= hit.is_some_and(|(t, _)| t <= 0.05) && traj.completed();
        parts.push(format!(
            "torus {}: min H < -1e-3 at t = {}",
            v.name(),
            opt(hit.map(|h| h.0))
        ));
    }
    let bf = bending_function(1.0, 2.0, &BendingParams::default())?;
    let cat = fd(capped_catenoid(&bf, 1025, &CertificationTolerances::default())?.profile);
    for (v, traj) in run_variants(&cat, 0.01)? {
        let hit = first_below(&traj, -1e-3);
        let in_band = hit.is_some_and(|(t, z)| t <= 0.05 && z.abs() <= 1.0);
        ok &= in_band && traj.completed();
        parts.push(format!(
            "catenoid {}: min H < -1e-3 at t = {}, z = {}",
            v.name(),
            opt(hit.map(|h| h.0)),
            opt(hit.map(|h| h.1))
        ));
    }
    verdict(ok, parts.join("; "))
}

fn c7() -> Result<Verdict> {
    let bf = bending_function(1.0, 2.0, &BendingParams::default())?;
    let par = capped_paraboloid(&bf, 1025, &CertificationTolerances::default())?.profile;
    let mut ok = true;
    let mut parts = Vec::new();
    for (v, traj) in run_variants(&fd(par.clone()), 0.002)? {
        let report = sign_tracker(&traj, TrackedField::R);
        let c = report.crossing.clone();
        ok &= c.as_ref().is_some_and(|c| c.z.abs() < 0.05 && c.value < 0.0);
        parts.push(format!(
            "{}: R < 0 at t = {}, z = {}",
            v.name(),
            opt(c.as_ref().map(|c| c.t_refined.unwrap_or(c.t_hi))),
            opt(c.as_ref().map(|c| c.z))
        ));
    }
    let h = global_term(&par, FlowVariant::VolumePreserving)?;
    let target = -0.375 * h;
    let rate = simulated_rate_r_at_waist(&par, 1e-5)?;
    let rel = ((rate - target) / target).abs();
    ok &= rel < 0.05;
    parts.push(format!(
        "dR/dt(0) = {rate:.6} vs -(3/8)h = {target:.6}, rel {rel:.2e} (< 5%)"
    ));
    verdict(ok, parts.join("; "))
}

fn c8() -> Result<Verdict> {
    // catenoid neck r = cosh z: r_zz r - r_z² - 1 = 0, read off the capped curve
    let bf = bending_function(1.0, 2.0, &BendingParams::default())?;
    let cat = capped_catenoid(&bf, 1025, &CertificationTolerances::default())?;
    let curve = cat.profile.curve().context("analytic catenoid")?.clone();
    let mut minimality: f64 = 0.0;
    for k in 0..=400 {
        let u = (k as f64 / 400.0 - 0.5).asin(); // z = 2 sin u sweeps [-1, 1]
        let j = curve.jet(u);
        let rz = j.dr / j.dz;
        let rzz = (j.ddr * j.dz - j.dr * j.ddz) / j.dz.powi(3);
        minimality = minimality.max((rzz * j.r - rz * rz - 1.0).abs());
    }
    let mut s_res: f64 = 0.0;
    let mut ex: f64 = 0.0;
    let mut grad: f64 = 0.0;
    for k in 0..=100 {
        let u = -0.24 + 0.0048 * k as f64;
        let j = AnalyticCurve::ParaboloidNeck.jet(u);
        s_res = s_res.max((2.0 * j.r * (j.dr * j.ddz - j.ddr * j.dz) + j.dz * (j.dr * j.dr + j.dz * j.dz)).abs());
        ex = ex.max((cubic_identity(u) - 12.0).abs());
        // (3λṙ/r²)² with λ = 1/(4cosh³u), ṙ = 4 cosh u sinh u, r = 2cosh²u
        let closed = 9.0 * u.sinh().powi(2) / (16.0 * u.cosh().powi(12));
        grad = grad.max(
            (gradient_term(u) - closed)
                .abs()
                .max((gradient_term_closed(u) - closed).abs()),
        );
    }
    let g0 = gradient_term(0.0);
    verdict(
        minimality < 1e-12 && s_res < 1e-10 && ex < 1e-10 && grad < 1e-12 && g0.abs() < 1e-15,
        format!(
            "minimality {minimality:.2e} (< 1e-12); S(r) {s_res:.2e} (< 1e-10); exV {ex:.2e} (< 1e-10); gradT {grad:.2e}, at u = 0: {g0:e}"
        ),
    )
}

fn c9(shared: &Shared) -> Result<Verdict> {
    let mut ok = true;
    let mut parts = Vec::new();
    for (v, traj) in &shared.torus_runs {
        let d = traj.terminal.relative_drift.context("drift")?;
        ok &= d < 1e-6;
        parts.push(format!("{} drift {d:.2e}", v.name()));
    }
    // projection off: the drift is the time-integration error of a conserved discrete quantity
    // a coarse grid keeps the O(dt⁴) drift above rounding
    let p = fd(torus(32)?);
    let mut slopes = Vec::new();
    for variant in [FlowVariant::VolumePreserving, FlowVariant::AreaPreserving] {
        let drift = |dt: f64| -> Result<f64> {
            let traj = run(
                &p,
                &FlowConfig {
                    variant,
                    t_end: 0.05,
                    dt_max: dt,
                    cfl: 1.0,
                    projection: false,
                    regrid_every: 0,
                    refine_crossings: false,
                    ..FlowConfig::default()
                },
            )?;
            traj.terminal.relative_drift.context("drift")
        };
        let ds = [drift(1e-2)?, drift(5e-3)?, drift(2.5e-3)?];
        let slope = (ds[0] / ds[1]).log2().min((ds[1] / ds[2]).log2());
        ok &= slope >= 3.5;
        slopes.push(format!(
            "{} {:?} slope {slope:.2}",
            variant.name(),
            ds.iter().map(|d| format!("{d:.1e}")).collect::<Vec<_>>()
        ));
    }
    parts.push(format!("projection off: {} (≥ 3.5)", slopes.join(", ")));
    verdict(ok, parts.join("; "))
}

fn c10() -> Result<Verdict> {
    let p = fd(round_sphere(1.0, 2, 257)?.profile);
    let traj = run(
        &p,
        &FlowConfig {
            variant: FlowVariant::Unconstrained,
            t_end: 0.1,
            regrid_every: 0,
            ..FlowConfig::default()
        },
    )?;
    let last = traj.last();
    let rho = (1.0f64 - 2.0 * 2.0 * 0.1).sqrt();
    let err = (0..last.profile.len())
        .map(|i| (last.profile.r()[i].hypot(last.profile.z()[i]) - rho).abs())
        .fold(0.0, f64::max);
    let study = evolution_residual_study(
        &AnalyticCurve::EllipticTorus,
        2,
        64,
        &FlowConfig {
            t_end: 0.01,
            dt_max: 4e-5,
            record_every: 10,
            ..FlowConfig::default()
        },
    )?;
    ensure!(traj.completed(), "shrinking sphere run stopped early");
    verdict(
        err < 1e-6 && study.order >= 1.8,
        format!(
            "sphere at t = {:.3}: max |ρ - √(1 - 4t)| = {err:.2e} (< 1e-6); residual {:.2e} -> {:.2e}, order {:.2} (≥ 1.8)",
            last.t, study.coarse, study.fine, study.order
        ),
    )
}

fn c11() -> Result<Verdict> {
    let bf = bending_function(1.0, 2.0, &BendingParams::default())?;
    let cat = capped_catenoid(&bf, 1025, &CertificationTolerances::default())?.profile;
    let cfg = FlowConfig {
        t_end: 0.01,
        ..FlowConfig::default()
    };
    let rep = perturbation_experiment(
        &cat,
        &[1e-4, 1e-3],
        &[FlowVariant::VolumePreserving, FlowVariant::AreaPreserving],
        &cfg,
    )?;
    let rows: Vec<String> = rep
        .rows
        .iter()
        .map(|r| {
            format!(
                "s = {:e}: min H after pre-flow {:.3e} ({}), crossings {:?}",
                r.s,
                r.min_h_after_preflow,
                if r.mean_convex {
                    "strictly positive"
                } else {
                    "not strictly positive"
                },
                r.runs.iter().map(|x| x.first_crossing_t.is_some()).collect::<Vec<_>>()
            )
        })
        .collect();
    verdict(rep.passed, rows.join("; "))
}

fn c12() -> Result<Verdict> {
    let p = fd(round_sphere(1.0, 2, 129)?.profile);
    let mut parts = Vec::new();
    let mut ok = true;
    for variant in [FlowVariant::VolumePreserving, FlowVariant::AreaPreserving] {
        let probe = curvflow::flow::FlowEngine::new(FlowConfig::default())?;
        let dt = probe.stable_dt(&p);
        let traj = run(
            &p,
            &FlowConfig {
                variant,
                t_end: 1000.0 * dt,
                dt_max: dt,
                regrid_every: 0,
                record_every: 100,
                ..FlowConfig::default()
            },
        )?;
        let last = &traj.last().profile;
        let drift = (0..p.len())
            .map(|i| (last.r()[i] - p.r()[i]).hypot(last.z()[i] - p.z()[i]))
            .fold(0.0, f64::max);
        ok &= drift < 1e-10 && traj.terminal.steps >= 1000;
        parts.push(format!(
            "{}: {} steps, max drift {drift:.2e}",
            variant.name(),
            traj.terminal.steps
        ));
    }
    verdict(ok, format!("{} (< 1e-10)", parts.join("; ")))
}

fn main() -> ExitCode {
    let start = Instant::now();
    let shared = match fd_torus_runs() {
        Ok(s) => s,
        Err(e) => {
            println!("FAIL  setup: {e:#}");
            return ExitCode::FAILURE;
        }
    };
    let criteria: Vec<(&str, Box<dyn Fn() -> Result<Verdict> + '_>)> = vec![
        ("torus mean curvature matches its closed form", Box::new(c1)),
        ("|A|² = 2 at the inner equator", Box::new(c2)),
        ("ΔH = 1/2 at the inner equator; grid Laplacian order", Box::new(c3)),
        ("volume-preserving term of the torus and its bounds", Box::new(c4)),
        ("first-step rate of H at the inner equator", Box::new(c5)),
        (
            "loss of mean convexity: torus and capped catenoid",
            Box::new(|| c6(&shared)),
        ),
        ("loss of R ≥ 0 on the capped paraboloid", Box::new(c7)),
        ("neck identities", Box::new(c8)),
        ("conservation of volume and area", Box::new(|| c9(&shared))),
        ("shrinking sphere and evolution residual", Box::new(c10)),
        ("perturbation: mean convex start, later H < 0", Box::new(c11)),
        ("round sphere is stationary", Box::new(c12)),
    ];
    let mut failed = 0;
    for (k, (title, check)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let (passed, detail) = match check() {
            Ok(v) => (v.passed, v.detail),
            Err(e) => (false, format!("error: {e:#}")),
        };
        if !passed {
            failed += 1;
        }
        println!(
            "{}  {:>2}. {title}: {detail} [{:.1} s]",
            if passed { "PASS" } else { "FAIL" },
            k + 1,
            t.elapsed().as_secs_f64()
        );
    }
    println!(
        "{} of {} criteria passed in {:.1} s",
        criteria.len() - failed,
        criteria.len(),
        start.elapsed().as_secs_f64()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

fn fd_torus_runs() -> Result<Shared> {
    Ok(Shared {
        torus_runs: run_variants(&fd(torus(1024)?), 0.05)?,
    })
}
