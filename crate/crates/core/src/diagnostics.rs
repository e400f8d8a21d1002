//! Identity checks and dynamic consistency tests.
//!
//! Every check lands in a [`DiagnosticReport`] with the computed value, the
//! target, the tolerance and the verdict.

use crate::constructions::{
    bending_function, capped_catenoid, capped_paraboloid, elliptic_torus, s_residual, torus_mean_curvature,
    BendingParams, CertificationTolerances, ConstructionError,
};
use crate::curves::{AnalyticCurve, Neck};
use crate::flow::{
    first_crossing, run, Crossing, FlowConfig, FlowEngine, FlowError, FlowState, FlowVariant, RunStatus, TrackedField,
    Trajectory,
};
use crate::geometry::{
    self, curvature_field, curvatures_from_jet, global_term, laplace_beltrami, laplacian_from_jet, scalars,
};
use crate::jet::Jet;
use crate::profile::{GeneratingProfile, GeometryError};
use crate::quadrature::complete_elliptic;
use crate::stencil::fd_weights;
use serde::{Deserialize, Serialize};
use std::f64::consts::{PI, SQRT_2};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DiagnosticError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Flow(#[from] FlowError),
    #[error(transparent)]
    Construction(#[from] ConstructionError),
    #[error("u = {0} lies outside the neck band")]
    OutsideNeck(f64),
    #[error("profile is not a capped paraboloid neck")]
    NotParaboloid,
    #[error("need at least 3 equally spaced states within one grid epoch, found {0}")]
    InsufficientStates(usize),
    #[error("run stopped early: {0}")]
    RunStopped(String),
}

/// How a check compares `computed` against `target`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// `|computed - target| ≤ tolerance`
    Absolute,
    /// `|computed - target| ≤ tolerance · |target|`
    Relative,
    /// `computed ≥ target`
    AtLeast,
    /// `computed ≤ target`
    AtMost,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    /// The identity or bound being checked.
    pub anchor: String,
    pub computed: f64,
    pub target: f64,
    pub tolerance: f64,
    pub mode: Mode,
    pub passed: bool,
}

impl Check {
    pub fn new(name: &str, anchor: &str, computed: f64, target: f64, tolerance: f64, mode: Mode) -> Self {
        let err = (computed - target).abs();
        let passed = match mode {
            Mode::Absolute => err <= tolerance,
            Mode::Relative => err <= tolerance * target.abs(),
            Mode::AtLeast => computed >= target,
            Mode::AtMost => computed <= target,
        };
        Self {
            name: name.into(),
            anchor: anchor.into(),
            computed,
            target,
            tolerance,
            mode,
            passed,
        }
    }

    /// `|computed - target|`, the residual reported for near-checks.
    pub fn residual(&self) -> f64 {
        (self.computed - self.target).abs()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct DiagnosticReport {
    pub checks: Vec<Check>,
    pub passed: bool,
}

impl DiagnosticReport {
    pub fn new() -> Self {
        Self {
            checks: Vec::new(),
            passed: true,
        }
    }

    pub fn push(&mut self, check: Check) {
        self.passed &= check.passed;
        self.checks.push(check);
    }

    pub fn get(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }
}

/// `ΔH + |A|²(H - h)` at every sample, the initial rate of change of `H`.
pub fn initial_rate_h(profile: &GeneratingProfile, variant: FlowVariant) -> Result<Vec<f64>, DiagnosticError> {
    let field = curvature_field(profile)?;
    let lap = laplace_beltrami(profile, &field.h)?;
    let h = global_term(profile, variant)?;
    Ok((0..field.len())
        .map(|i| lap[i] + field.a2[i] * (field.h[i] - h))
        .collect())
}

/// Mean curvature of a closed-form curve at parameter `u`.
fn analytic_h(curve: &AnalyticCurve, n: usize, u: f64) -> f64 {
    let (l1, l2) = curvatures_from_jet(&curve.jet(u), false);
    scalars(n, l1, l2).0
}

/// `ΔH` at `u` for a closed-form curve: the curve enters through its exact
/// jet, `H_u` and `H_uu` through eighth-order central differences of the
/// exact `H`.
pub fn analytic_laplacian_h(curve: &AnalyticCurve, n: usize, u: f64) -> f64 {
    let step = 1e-2;
    let nodes: Vec<f64> = (-4..=4).map(|k| u + k as f64 * step).collect();
    let w = fd_weights(u, &nodes, 2).expect("distinct nodes");
    let values: Vec<f64> = nodes.iter().map(|&x| analytic_h(curve, n, x)).collect();
    let d1: f64 = w[1].iter().zip(&values).map(|(a, b)| a * b).sum();
    let d2: f64 = w[2].iter().zip(&values).map(|(a, b)| a * b).sum();
    laplacian_from_jet(n, &curve.jet(u), d1, d2, false)
}

/// Paraboloid neck `r = 2cosh²u`, `z = 4 sinh u`: `λ = 1/(4cosh³u)`.
pub fn neck_lambda(u: f64) -> f64 {
    0.25 / u.cosh().powi(3)
}

fn paraboloid_band(profile: &GeneratingProfile) -> Result<f64, DiagnosticError> {
    match profile.curve() {
        Some(AnalyticCurve::Capped {
            neck: Neck::Paraboloid,
            bend,
        }) if profile.dimension() == 3 => Ok(bend.a),
        _ => Err(DiagnosticError::NotParaboloid),
    }
}

/// `2(3λṙ/r²)² - 24 h λ³` at neck parameter `u`, the initial rate of the
/// scalar curvature on the paraboloid neck.
pub fn initial_rate_r_neck(profile: &GeneratingProfile, u: f64, variant: FlowVariant) -> Result<f64, DiagnosticError> {
    let a = paraboloid_band(profile)?;
    if (4.0 * u.sinh()).abs() > a {
        return Err(DiagnosticError::OutsideNeck(u));
    }
    let h = global_term(profile, variant)?;
    Ok(rate_r_neck_formula(u, h))
}

fn rate_r_neck_formula(u: f64, h: f64) -> f64 {
    let l = neck_lambda(u);
    let j = AnalyticCurve::ParaboloidNeck.jet(u);
    let g = 3.0 * l * j.dr / (j.r * j.r);
    2.0 * g * g - 24.0 * h * l.powi(3)
}

/// `(H|A|² - C)/λ³` on the paraboloid neck from its principal curvatures.
pub fn cubic_identity(u: f64) -> f64 {
    let (l1, l2) = curvatures_from_jet(&AnalyticCurve::ParaboloidNeck.jet(u), false);
    let (h, a2, c, _) = scalars(3, l1, l2);
    (h * a2 - c) / neck_lambda(u).powi(3)
}

/// `|∇A|² - |∇H|²` on the paraboloid neck assembled from the covariant
/// derivative components in the frame `(∂_u, rotations)`:
/// `18 g^{uu}(2λ²ṙ²/r² + λ̇²/2) - g^{uu}(3λ̇)²`.
pub fn gradient_term(u: f64) -> f64 {
    let j = AnalyticCurve::ParaboloidNeck.jet(u);
    let lam = Jet::var(u).cosh().powi(3).recip() * 0.25;
    let (l, dl) = (lam.v, lam.d1);
    let guu = 1.0 / (j.dr * j.dr + j.dz * j.dz);
    18.0 * guu * (2.0 * l * l * j.dr * j.dr / (j.r * j.r) + 0.5 * dl * dl) - guu * (3.0 * dl).powi(2)
}

/// The closed form `(3λṙ/r²)²` of [`gradient_term`].
pub fn gradient_term_closed(u: f64) -> f64 {
    let j = AnalyticCurve::ParaboloidNeck.jet(u);
    (3.0 * neck_lambda(u) * j.dr / (j.r * j.r)).powi(2)
}

/// Sup-norm residual of `∂_t H = ΔH + |A|²(H - h)` along a trajectory.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvolutionResidual {
    pub residual: f64,
    pub triples: usize,
    pub at_t: f64,
    pub at_u: f64,
}

/// Compare centered time differences of `H` on consecutive recorded states
/// with the right-hand side evaluated on the middle state. Only triples in
/// one grid epoch with equal spacing are used; poles are skipped.
pub fn evolution_residual_h(trajectory: &Trajectory) -> Result<EvolutionResidual, DiagnosticError> {
    let states = &trajectory.states;
    let mut out = EvolutionResidual {
        residual: 0.0,
        triples: 0,
        at_t: f64::NAN,
        at_u: f64::NAN,
    };
    let mut fields = Vec::with_capacity(states.len());
    for s in states {
        fields.push(curvature_field(&s.profile)?);
    }
    for k in 1..states.len().saturating_sub(1) {
        let (a, b, c) = (&states[k - 1], &states[k], &states[k + 1]);
        if a.epoch != b.epoch || b.epoch != c.epoch || a.profile.len() != c.profile.len() {
            continue;
        }
        let (d0, d1) = (b.t - a.t, c.t - b.t);
        if !(d0 > 0.0) || (d1 - d0).abs() > 1e-9 * d0 {
            continue;
        }
        let lap = laplace_beltrami(&b.profile, &fields[k].h)?;
        for i in 0..b.profile.len() {
            if b.profile.is_pole(i) {
                continue;
            }
            let dhdt = (fields[k + 1].h[i] - fields[k - 1].h[i]) / (2.0 * d0);
            let rhs = lap[i] + fields[k].a2[i] * (fields[k].h[i] - b.h_flow);
            let res = (dhdt - rhs).abs();
            if res > out.residual {
                out.residual = res;
                out.at_t = b.t;
                out.at_u = b.profile.u()[i];
            }
        }
        out.triples += 1;
    }
    if out.triples == 0 {
        return Err(DiagnosticError::InsufficientStates(states.len()));
    }
    Ok(out)
}

/// Residuals at `(N, dt)` and `(2N, dt/4)` and their ratio.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResidualStudy {
    pub coarse: f64,
    pub fine: f64,
    pub ratio: f64,
    /// `log2(ratio) / 2`, the order per halving of the spatial step.
    pub order: f64,
}

/// Self-convergence of the evolution residual for a closed-form curve.
pub fn evolution_residual_study(
    curve: &AnalyticCurve,
    n: usize,
    samples: usize,
    config: &FlowConfig,
) -> Result<ResidualStudy, DiagnosticError> {
    let run_at = |samples: usize, dt: f64| -> Result<f64, DiagnosticError> {
        let profile = GeneratingProfile::from_curve(curve.clone(), n, samples)?;
        let cfg = FlowConfig {
            dt_max: dt,
            cfl: 1.0,
            regrid_every: 0,
            refine_crossings: false,
            ..config.clone()
        };
        let traj = run(&profile, &cfg)?;
        Ok(evolution_residual_h(&traj)?.residual)
    };
    let coarse = run_at(samples, config.dt_max)?;
    let fine = run_at(2 * samples, config.dt_max / 4.0)?;
    let ratio = coarse / fine;
    Ok(ResidualStudy {
        coarse,
        fine,
        ratio,
        order: ratio.log2() / 2.0,
    })
}

/// Minimum of a curvature scalar over time.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SignReport {
    pub field: TrackedField,
    pub t: Vec<f64>,
    pub minimum: Vec<f64>,
    pub u: Vec<f64>,
    pub z: Vec<f64>,
    pub crossing: Option<Crossing>,
}

pub fn sign_tracker(trajectory: &Trajectory, field: TrackedField) -> SignReport {
    let mut report = SignReport {
        field,
        t: Vec::new(),
        minimum: Vec::new(),
        u: Vec::new(),
        z: Vec::new(),
        crossing: None,
    };
    for s in &trajectory.states {
        let (v, i) = field.minimum(s);
        report.t.push(s.t);
        report.minimum.push(v);
        report.u.push(s.profile.u()[i]);
        report.z.push(s.profile.z()[i]);
    }
    report.crossing = match field {
        TrackedField::H => trajectory.terminal.crossing_h.clone(),
        TrackedField::R => trajectory.terminal.crossing_r.clone(),
    }
    .or_else(|| first_crossing(&trajectory.states, field, trajectory.config.sign_floor));
    report
}

/// One pre-flow time of the perturbation study.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PerturbationRow {
    pub s: f64,
    pub min_h_after_preflow: f64,
    /// `min H > 0` after the pre-flow (for `s = 0`: `|min H| ≤ sign_floor`).
    pub mean_convex: bool,
    pub preflow_status: RunStatus,
    pub runs: Vec<PerturbedRun>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PerturbedRun {
    pub variant: FlowVariant,
    pub first_crossing_t: Option<f64>,
    pub min_h_final: f64,
    pub status: RunStatus,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PerturbationReport {
    pub rows: Vec<PerturbationRow>,
    /// Post-pre-flow minimum is non-decreasing in `s` (recorded, not required).
    pub monotone_in_s: bool,
    pub passed: bool,
}

/// Pre-flow `profile` by the unconstrained flow for each `s`, check strict
/// mean convexity, then run each constrained variant and look for `min H < 0`.
pub fn perturbation_experiment(
    profile: &GeneratingProfile,
    s_list: &[f64],
    variants: &[FlowVariant],
    config: &FlowConfig,
) -> Result<PerturbationReport, DiagnosticError> {
    let mut rows = Vec::new();
    for &s in s_list {
        let (start, status) = if s > 0.0 {
            let pre = run(
                profile,
                &FlowConfig {
                    variant: FlowVariant::Unconstrained,
                    t_end: s,
                    refine_crossings: false,
                    ..config.clone()
                },
            )?;
            (pre.last().profile.clone(), pre.terminal.status.clone())
        } else {
            // the control row: the constructed surface itself, with its exact curvature when available
            (profile.clone(), RunStatus::Completed)
        };
        let min_h = curvature_field(&start)?.h.iter().copied().fold(f64::INFINITY, f64::min);
        let mean_convex = if s > 0.0 {
            min_h > 0.0
        } else {
            min_h.abs() <= config.sign_floor
        };
        let mut runs = Vec::new();
        if status == RunStatus::Completed {
            for &variant in variants {
                let traj = run(
                    &start,
                    &FlowConfig {
                        variant,
                        ..config.clone()
                    },
                )?;
                runs.push(PerturbedRun {
                    variant,
                    first_crossing_t: traj.terminal.crossing_h.as_ref().map(|c| c.t_refined.unwrap_or(c.t_hi)),
                    min_h_final: traj.last().min_h,
                    status: traj.terminal.status.clone(),
                });
            }
        }
        rows.push(PerturbationRow {
            s,
            min_h_after_preflow: min_h,
            mean_convex,
            preflow_status: status,
            runs,
        });
    }
    let mut sorted: Vec<&PerturbationRow> = rows.iter().collect();
    sorted.sort_by(|a, b| a.s.total_cmp(&b.s));
    let monotone_in_s = sorted
        .windows(2)
        .all(|w| w[0].min_h_after_preflow <= w[1].min_h_after_preflow);
    let passed = rows.iter().all(|row| {
        row.mean_convex && row.runs.len() == variants.len() && row.runs.iter().all(|r| r.first_crossing_t.is_some())
    });
    Ok(PerturbationReport {
        rows,
        monotone_in_s,
        passed,
    })
}

/// `π/(2√2 E(-1))`: the volume-preserving term of the elliptic torus, with
/// `E(-1) = ∫_0^{π/2} sqrt(1 + sin²θ) dθ` by the arithmetic–geometric mean.
pub fn torus_h_vp_formula() -> f64 {
    let (_, e) = complete_elliptic(-1.0);
    PI / (2.0 * SQRT_2 * e)
}

/// Area of the elliptic torus, `24√2 π E(-1)`.
pub fn torus_area_formula() -> f64 {
    let (_, e) = complete_elliptic(-1.0);
    24.0 * SQRT_2 * PI * e
}

/// Settings of the full verification suite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerifyConfig {
    /// Torus grid size for grid-based checks.
    pub n_samples: usize,
    /// Grid size of the capped examples.
    pub capped_samples: usize,
    pub a: f64,
    pub b: f64,
    pub bending: BendingParams,
    /// Step of the simulated first-step rates.
    pub rate_dt: f64,
    /// Replaces every near-check tolerance when set.
    pub tolerance_override: Option<f64>,
    /// Include the checks that integrate the flow.
    pub dynamics: bool,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self {
            n_samples: 1024,
            capped_samples: 1025,
            a: 1.0,
            b: 2.0,
            bending: BendingParams::default(),
            rate_dt: 1e-5,
            tolerance_override: None,
            dynamics: true,
        }
    }
}

/// The full identity suite on the default examples.
pub fn verify(cfg: &VerifyConfig) -> Result<DiagnosticReport, DiagnosticError> {
    let tol = |t: f64| cfg.tolerance_override.unwrap_or(t);
    let mut rep = DiagnosticReport::new();
    let ctol = CertificationTolerances::default();

    // elliptic torus
    let torus = elliptic_torus(cfg.n_samples, &ctol)?.profile;
    let curve = AnalyticCurve::EllipticTorus;
    let field = curvature_field(&torus)?;
    let closed = (0..torus.len())
        .map(|i| (field.h[i] - torus_mean_curvature(torus.u()[i])).abs())
        .fold(0.0, f64::max);
    rep.push(Check::new(
        "torus_H_closed_form",
        "H = cos²(u/2)(5 + 2cos u - cos 2u)/((3 + 2cos u)(1 + sin²u)^(3/2)) on the torus",
        closed,
        0.0,
        tol(1e-10),
        Mode::Absolute,
    ));
    let jet_pi = curve.jet(PI);
    let (l1, l2) = curvatures_from_jet(&jet_pi, false);
    let (h_pi, a2_pi, ..) = scalars(2, l1, l2);
    rep.push(Check::new(
        "H_at_pi",
        "H(π) = 0 on the torus",
        h_pi,
        0.0,
        tol(1e-14),
        Mode::Absolute,
    ));
    rep.push(Check::new(
        "A2_at_pi",
        "|A|²(π) = 2 on the torus",
        a2_pi,
        2.0,
        tol(1e-10),
        Mode::Absolute,
    ));
    let lap_pi = analytic_laplacian_h(&curve, 2, PI);
    rep.push(Check::new(
        "lapH_at_pi",
        "ΔH(π) = 1/2 on the torus",
        lap_pi,
        0.5,
        tol(1e-6),
        Mode::Absolute,
    ));
    let order = laplacian_order_at_pi([cfg.n_samples / 16, cfg.n_samples / 8, cfg.n_samples / 4])?;
    rep.push(Check::new(
        "lapH_grid_order",
        "grid Laplacian of H at u = π converges at second order or better",
        order,
        1.9,
        0.0,
        Mode::AtLeast,
    ));
    let area = geometry::area(&torus)?;
    rep.push(Check::new(
        "torus_area",
        "torus area 24√2 π E(-1)",
        area,
        torus_area_formula(),
        tol(1e-12),
        Mode::Relative,
    ));
    let h_vp = global_term(&torus, FlowVariant::VolumePreserving)?;
    let h_ap = global_term(&torus, FlowVariant::AreaPreserving)?;
    rep.push(Check::new(
        "hVP_torus",
        "volume-preserving term of the torus = π/(2√2 ∫_0^{π/2} sqrt(1 + sin²θ) dθ)",
        h_vp,
        torus_h_vp_formula(),
        tol(1e-8),
        Mode::Absolute,
    ));
    rep.push(Check::new(
        "hVP_lower_bound",
        "h(0) ≥ 1/2 on the torus",
        h_vp,
        0.5,
        0.0,
        Mode::AtLeast,
    ));
    rep.push(Check::new(
        "jensen",
        "h_AP ≥ h_VP (Jensen)",
        h_ap - h_vp,
        0.0,
        0.0,
        Mode::AtLeast,
    ));
    let rate_vp = lap_pi + a2_pi * (h_pi - h_vp);
    let rate_ap = lap_pi + a2_pi * (h_pi - h_ap);
    rep.push(Check::new(
        "rate_H_at_pi",
        "∂H/∂t(π, 0) = 1/2 - 2h(0) under the volume-preserving flow",
        rate_vp,
        0.5 - 2.0 * h_vp,
        tol(1e-6),
        Mode::Absolute,
    ));
    rep.push(Check::new(
        "rate_H_order",
        "∂H/∂t(π, 0) under AP ≤ under VP",
        rate_ap - rate_vp,
        0.0,
        0.0,
        Mode::AtMost,
    ));

    // capped catenoid
    let bf = bending_function(cfg.a, cfg.b, &cfg.bending)?;
    let cat = capped_catenoid(&bf, cfg.capped_samples, &ctol)?;
    let min_cat = cat
        .certification
        .get("neck_minimality_residual")
        .map_or(f64::NAN, |c| c.value);
    rep.push(Check::new(
        "min_cat",
        "ṙ² + 1 - r̈ r = 0 on the catenoid neck",
        min_cat,
        0.0,
        tol(1e-12),
        Mode::Absolute,
    ));
    let neck_rate = initial_rate_h(&cat.profile, FlowVariant::VolumePreserving)?;
    let h_cat = global_term(&cat.profile, FlowVariant::VolumePreserving)?;
    let mid = mid_index(&cat.profile);
    rep.push(Check::new(
        "rate_H_catenoid_waist",
        "∂H/∂t = -|A|² h = -2h at the catenoid waist",
        neck_rate[mid],
        -2.0 * h_cat,
        tol(1e-6),
        Mode::Absolute,
    ));

    // capped paraboloid
    let par = capped_paraboloid(&bf, cfg.capped_samples, &ctol)?;
    let us: Vec<f64> = (0..=20).map(|k| -0.24 + 0.024 * k as f64).collect();
    let ex = us.iter().map(|&u| (cubic_identity(u) - 12.0).abs()).fold(0.0, f64::max);
    rep.push(Check::new(
        "exV",
        "(H|A|² - C)/λ³ = 12 on the paraboloid neck",
        ex,
        0.0,
        tol(1e-10),
        Mode::Absolute,
    ));
    let gt = us
        .iter()
        .map(|&u| (gradient_term(u) - gradient_term_closed(u)).abs())
        .fold(0.0, f64::max);
    rep.push(Check::new(
        "gradT",
        "|∇A|² - |∇H|² = (3λṙ/r²)² on the paraboloid neck",
        gt,
        0.0,
        tol(1e-12),
        Mode::Absolute,
    ));
    rep.push(Check::new(
        "gradT_u0",
        "gradient term vanishes at u = 0",
        gradient_term(0.0),
        0.0,
        tol(1e-15),
        Mode::Absolute,
    ));
    let sr = (0..=20)
        .map(|k| s_residual(&AnalyticCurve::ParaboloidNeck.jet(-0.24 + 0.024 * k as f64)).abs())
        .fold(0.0, f64::max);
    rep.push(Check::new(
        "Sr",
        "S(r) = 2r(ṙz̈ - r̈ż) + ż(ṙ² + ż²) = 0 on the neck",
        sr,
        0.0,
        tol(1e-10),
        Mode::Absolute,
    ));
    let h_par = global_term(&par.profile, FlowVariant::VolumePreserving)?;
    let rate_r = initial_rate_r_neck(&par.profile, 0.0, FlowVariant::VolumePreserving)?;
    rep.push(Check::new(
        "rate_R_at_u0",
        "∂R/∂t(0) = -(3/8) h on the paraboloid neck",
        rate_r,
        -0.375 * h_par,
        tol(1e-12),
        Mode::Relative,
    ));

    if cfg.dynamics {
        let sim = simulated_rate_h_at_pi(cfg.n_samples, cfg.rate_dt)?;
        rep.push(Check::new(
            "rate_H_sim",
            "simulated first-step rate of H(π) matches 1/2 - 2h(0)",
            sim,
            0.5 - 2.0 * h_vp,
            tol(2e-2),
            Mode::Absolute,
        ));
        let sim_r = simulated_rate_r_at_waist(&par.profile, cfg.rate_dt)?;
        rep.push(Check::new(
            "rate_R_sim",
            "simulated first-step rate of R(0) matches -(3/8) h",
            sim_r,
            -0.375 * h_par,
            tol(5e-2),
            Mode::Relative,
        ));
    }
    Ok(rep)
}

fn mid_index(profile: &GeneratingProfile) -> usize {
    (0..profile.len())
        .min_by(|&a, &b| profile.z()[a].abs().total_cmp(&profile.z()[b].abs()))
        .unwrap_or(0)
}

/// Observed order of the grid Laplacian of `H` at `u = π` over three grids,
/// from the last two error ratios.
pub fn laplacian_order_at_pi(sizes: [usize; 3]) -> Result<f64, DiagnosticError> {
    let mut errs = Vec::new();
    for n in sizes {
        let p = GeneratingProfile::from_curve(AnalyticCurve::EllipticTorus, 2, n)?;
        let field = curvature_field(&p)?;
        let lap = laplace_beltrami(&p, &field.h)?;
        errs.push((lap[n / 2] - 0.5).abs());
    }
    Ok((errs[1] / errs[2]).log2().min((errs[0] / errs[1]).log2()))
}

/// `(H(π, dt) - H(π, 0))/dt` from one step of the volume-preserving flow on
/// the finite-difference torus with `n` samples.
pub fn simulated_rate_h_at_pi(n: usize, dt: f64) -> Result<f64, DiagnosticError> {
    let p = GeneratingProfile::from_curve(AnalyticCurve::EllipticTorus, 2, n)?.to_finite_difference();
    first_step_rate(&p, dt, n / 2, TrackedField::H)
}

/// `(R(0, dt) - R(0, 0))/dt` at the waist of a capped paraboloid; `dt` is
/// capped by the explicit stability bound.
pub fn simulated_rate_r_at_waist(profile: &GeneratingProfile, dt: f64) -> Result<f64, DiagnosticError> {
    let p = profile.to_finite_difference();
    first_step_rate(&p, dt, mid_index(&p), TrackedField::R)
}

fn first_step_rate(p: &GeneratingProfile, dt: f64, i: usize, field: TrackedField) -> Result<f64, DiagnosticError> {
    let engine = FlowEngine::new(FlowConfig {
        variant: FlowVariant::VolumePreserving,
        cfl: 1.0,
        ..FlowConfig::default()
    })?;
    let dt = dt.min(engine.stable_dt(p));
    let f0 = curvature_field(p)?;
    let q = FlowState::new(p.clone(), 0.0, FlowVariant::VolumePreserving)?.volume;
    let out = engine.step(p, dt, Some(q))?;
    let f1 = curvature_field(&out.profile)?;
    Ok(match field {
        TrackedField::H => (f1.h[i] - f0.h[i]) / dt,
        TrackedField::R => (f1.r[i] - f0.r[i]) / dt,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn check_modes() {
        assert!(Check::new("a", "", 1.0, 1.1, 0.2, Mode::Absolute).passed);
        assert!(!Check::new("a", "", 1.0, 1.1, 0.05, Mode::Relative).passed);
        assert!(Check::new("a", "", 1.0, 0.5, 0.0, Mode::AtLeast).passed);
        assert!(!Check::new("a", "", 1.0, 0.5, 0.0, Mode::AtMost).passed);
    }

    #[test]
    fn cubic_identity_on_neck() {
        for u in [-0.2, 0.0, 0.13] {
            assert!((cubic_identity(u) - 12.0).abs() < 1e-10);
        }
    }

    /// Independent route: for a rotation hypersurface with curvatures
    /// `(λ1, λ2, …, λ2)`, `|∇A|² = g^{uu}(λ1'² + 3(n-1)λ2'²)` because of the
    /// Codazzi equations, and `|∇H|² = g^{uu}(λ1' + (n-1)λ2')²`.
    #[test]
    fn gradient_term_matches_codazzi_form() {
        let curv = |u: f64| {
            let (l1, l2) = curvatures_from_jet(&AnalyticCurve::ParaboloidNeck.jet(u), false);
            (l1, l2)
        };
        for u in [-0.2, 0.05, 0.17] {
            let d = 1e-4;
            let (a1, a2) = curv(u + d);
            let (b1, b2) = curv(u - d);
            let (d1, d2) = ((a1 - b1) / (2.0 * d), (a2 - b2) / (2.0 * d));
            let j = AnalyticCurve::ParaboloidNeck.jet(u);
            let guu = 1.0 / (j.dr * j.dr + j.dz * j.dz);
            let codazzi = guu * (d1 * d1 + 6.0 * d2 * d2) - guu * (d1 + 2.0 * d2).powi(2);
            assert!(
                (codazzi - gradient_term(u)).abs() < 1e-8,
                "{codazzi} {}",
                gradient_term(u)
            );
        }
    }

    #[test]
    fn rate_r_formula_at_waist() {
        let h = 0.7;
        assert!((rate_r_neck_formula(0.0, h) + 0.375 * h).abs() < 1e-15);
        // closed form (9 sinh²u - 3h cosh³u)/(8 cosh¹²u)
        let u: f64 = 0.1;
        let (s, c) = (u.sinh(), u.cosh());
        let expect = (9.0 * s * s - 3.0 * h * c.powi(3)) / (8.0 * c.powi(12));
        assert!((rate_r_neck_formula(u, h) - expect).abs() < 1e-14);
    }
}
