//! The closed example hypersurfaces and their certificates.
//!
//! Capped necks are obtained by multiplying a neck radius `r(z)` by a bending
//! function `φ` that is identically one on the neck band `|z| ≤ a` and closes
//! the curve at the poles `z = ±b`. Every hypothesis the examples rely on is
//! checked numerically and recorded in a [`Certification`].

use crate::curves::{AnalyticCurve, Neck};
use crate::geometry::{curvature_field, curvatures_from_jet, scalars, CurvatureField};
use crate::jet::Jet;
use crate::profile::{GeneratingProfile, GeometryError};
use crate::stencil::fd_weights;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use thiserror::Error;

/// Below `x = ε/(ε + FLAT_ZONE)`, `exp(ε(1 - 1/x))` underflows and φ equals one
/// in double precision.
const FLAT_ZONE: f64 = 700.0;

/// Cap curves switch to the bare neck once `1 - φ² < e^(-NEGLIGIBLE)`. The
/// closed form of the cap factor loses second-derivative accuracy like
/// `(1 - y)^(-3)` as `x = 1 - y → 0`, so it is not used where φ is one anyway.
const NEGLIGIBLE: f64 = 41.5;

/// `φ(z) = sqrt(1 - exp(ε(1 - 1/x)))`, `x = (z - a)/(b - a)`.
///
/// The exponential is flat to all orders at `x = 0`. At `x = 1` the square
/// `φ²` has a simple zero, so `r(z)·φ(z)` meets the axis like `sqrt(b - z)`,
/// which is a smooth pole. For `ε ≥ 2` the function is strictly concave.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BendingFunction {
    pub a: f64,
    pub b: f64,
    pub steepness: f64,
    pub flatness_order: usize,
}

impl BendingFunction {
    /// `x = (z - a)/(b - a)` below which φ is exactly one.
    pub fn flat_threshold(&self) -> f64 {
        self.steepness / (self.steepness + FLAT_ZONE)
    }

    /// `x` below which `1 - φ²` is under `e^(-41.5) ≈ 1e-18`.
    pub fn negligible_threshold(&self) -> f64 {
        self.steepness / (self.steepness + NEGLIGIBLE)
    }

    /// `sqrt(E(y))` where `φ² = y E(y)` and `y = (b - |z|)/(b - a)`; `None`
    /// inside the flat zone.
    pub fn cap_factor(&self, y: Jet) -> Option<Jet> {
        let x = 1.0 - y.v;
        if x < self.negligible_threshold() {
            return None;
        }
        let eps = self.steepness;
        let one_minus_y = 1.0 - y;
        let w = -(y * eps) / one_minus_y;
        Some((w.exprel() * eps / one_minus_y).sqrt())
    }

    /// φ and its first two derivatives at height `z ≥ 0`.
    pub fn eval(&self, z: f64) -> Jet {
        let (a, b) = (self.a, self.b);
        if z <= a {
            return Jet::constant(1.0);
        }
        if z >= b {
            return Jet::constant(0.0);
        }
        let x = (Jet::var(z) - a) / (b - a);
        if x.v < self.flat_threshold() {
            return Jet::constant(1.0);
        }
        // φ² = -expm1(-ε(1 - x)/x)
        let arg = -((1.0 - x) / x) * self.steepness;
        (-arg.exp_m1()).sqrt()
    }

    /// `φ²` as a function of `y = 1 - x`, accurate near the pole.
    fn phi_sq_of_y(&self, y: f64) -> f64 {
        let eps = self.steepness;
        let w = -eps * y / (1.0 - y);
        y * eps * crate::jet::exprel_derivs(w).0 / (1.0 - y)
    }
}

/// Parameters of the bending-function construction and its certificate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BendingParams {
    pub steepness: f64,
    pub flatness_order: usize,
    pub tol_flat: f64,
    pub tol_pole: f64,
    pub dense_samples: usize,
}

impl Default for BendingParams {
    fn default() -> Self {
        Self {
            steepness: 2.0,
            flatness_order: 4,
            tol_flat: 1e-8,
            tol_pole: 1e-6,
            dense_samples: 4000,
        }
    }
}

/// One certified condition.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Condition {
    pub name: String,
    /// Worst observed value of the quantity being bounded.
    pub value: f64,
    /// The bound; its meaning is given by `kind`.
    pub bound: f64,
    pub kind: BoundKind,
    /// Parameter or height where `value` was attained.
    pub at: Option<f64>,
    pub passed: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundKind {
    /// `value ≤ bound`
    AtMost,
    /// `value ≥ bound`
    AtLeast,
    /// `value < bound`
    Below,
    /// `value > bound`
    Above,
}

impl Condition {
    pub fn new(name: &str, value: f64, kind: BoundKind, bound: f64, at: Option<f64>) -> Self {
        let passed = match kind {
            BoundKind::AtMost => value <= bound,
            BoundKind::AtLeast => value >= bound,
            BoundKind::Below => value < bound,
            BoundKind::Above => value > bound,
        };
        Self {
            name: name.to_string(),
            value,
            bound,
            kind,
            at,
            passed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Certification {
    pub subject: String,
    pub conditions: Vec<Condition>,
    pub passed: bool,
}

impl Certification {
    fn new(subject: &str, conditions: Vec<Condition>) -> Self {
        let passed = conditions.iter().all(|c| c.passed);
        Self {
            subject: subject.to_string(),
            conditions,
            passed,
        }
    }

    pub fn get(&self, name: &str) -> Option<&Condition> {
        self.conditions.iter().find(|c| c.name == name)
    }

    pub fn failures(&self) -> Vec<&Condition> {
        self.conditions.iter().filter(|c| !c.passed).collect()
    }
}

impl std::fmt::Display for Certification {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(
            f,
            "{}: {}",
            self.subject,
            if self.passed { "certified" } else { "not certified" }
        )?;
        for c in &self.conditions {
            let at = c.at.map_or(String::new(), |at| format!(" at {at:.6}"));
            writeln!(
                f,
                "  {:<6}{:<28}{:>14.6e}  {:?} {:e}{at}",
                if c.passed { "PASS" } else { "FAIL" },
                c.name,
                c.value,
                c.kind,
                c.bound
            )?;
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum ConstructionError {
    #[error("invalid parameters: {0}")]
    InvalidParameters(String),
    #[error("certification failed\n{0}")]
    Certification(Box<Certification>),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// A constructed profile together with its certificate.
#[derive(Debug, Clone)]
pub struct Constructed {
    pub profile: GeneratingProfile,
    pub certification: Certification,
}

impl Constructed {
    fn checked(profile: GeneratingProfile, certification: Certification) -> Result<Self, ConstructionError> {
        if certification.passed {
            Ok(Self { profile, certification })
        } else {
            Err(ConstructionError::Certification(Box::new(certification)))
        }
    }
}

/// Build and certify the bending function on `[a, b]`.
pub fn bending_function(a: f64, b: f64, params: &BendingParams) -> Result<BendingFunction, ConstructionError> {
    let (bf, cert) = bending_function_report(a, b, params)?;
    if cert.passed {
        Ok(bf)
    } else {
        Err(ConstructionError::Certification(Box::new(cert)))
    }
}

/// Like [`bending_function`] but always returns the certificate.
pub fn bending_function_report(
    a: f64,
    b: f64,
    params: &BendingParams,
) -> Result<(BendingFunction, Certification), ConstructionError> {
    if !(a > 0.0 && b > a && b.is_finite()) {
        return Err(ConstructionError::InvalidParameters(format!(
            "need 0 < a < b, got a = {a}, b = {b}"
        )));
    }
    if !(params.steepness > 0.0) || params.flatness_order < 4 || params.dense_samples < 10 {
        return Err(ConstructionError::InvalidParameters(format!("{params:?}")));
    }
    let bf = BendingFunction {
        a,
        b,
        steepness: params.steepness,
        flatness_order: params.flatness_order,
    };
    let mut conditions = vec![
        Condition::new("phi_at_a", (bf.eval(a).v - 1.0).abs(), BoundKind::AtMost, 0.0, Some(a)),
        Condition::new("phi_at_b", bf.eval(b).v.abs(), BoundKind::AtMost, 0.0, Some(b)),
    ];

    // Monotonicity and concavity on a dense interior grid. Where the
    // exponential underflows the derivatives are exactly zero; only
    // non-positivity can be asked there.
    let m = params.dense_samples;
    let mut worst_d1 = (f64::NEG_INFINITY, a);
    let mut worst_d2 = (f64::NEG_INFINITY, a);
    let mut worst_flat_zone: f64 = f64::NEG_INFINITY;
    for k in 1..m {
        let z = a + (b - a) * k as f64 / m as f64;
        let j = bf.eval(z);
        if j.v < 1.0 {
            if j.d1 > worst_d1.0 {
                worst_d1 = (j.d1, z);
            }
            if j.d2 > worst_d2.0 {
                worst_d2 = (j.d2, z);
            }
        } else {
            worst_flat_zone = worst_flat_zone.max(j.d1).max(j.d2);
        }
    }
    conditions.push(Condition::new(
        "phi_dot_negative",
        worst_d1.0,
        BoundKind::Below,
        0.0,
        Some(worst_d1.1),
    ));
    conditions.push(Condition::new(
        "phi_ddot_negative",
        worst_d2.0,
        BoundKind::Below,
        0.0,
        Some(worst_d2.1),
    ));
    if worst_flat_zone > f64::NEG_INFINITY {
        conditions.push(Condition::new(
            "flat_zone_nonpositive",
            worst_flat_zone,
            BoundKind::AtMost,
            0.0,
            None,
        ));
    }

    // Right derivatives at a from one-sided finite differences.
    let step = (b - a) / 200.0;
    let mut worst_flat: f64 = 0.0;
    for order in 1..=params.flatness_order {
        let nodes: Vec<f64> = (0..order + 3).map(|k| a + k as f64 * step).collect();
        let w = fd_weights(a, &nodes, order).expect("distinct nodes");
        let d: f64 = nodes
            .iter()
            .zip(&w[order])
            .map(|(z, c)| c * (bf.eval(*z).v - 1.0))
            .sum();
        worst_flat = worst_flat.max(d.abs());
    }
    conditions.push(Condition::new(
        "flat_at_a",
        worst_flat,
        BoundKind::AtMost,
        params.tol_flat,
        Some(a),
    ));

    // Pole: the inverse graph p ↦ z(p) of φ near p = 0.
    let (odd, curvature) = pole_certificate(&bf);
    conditions.push(Condition::new(
        "pole_odd_derivatives",
        odd,
        BoundKind::AtMost,
        params.tol_pole,
        Some(b),
    ));
    conditions.push(Condition::new(
        "pole_concave",
        curvature,
        BoundKind::Below,
        0.0,
        Some(b),
    ));

    let cert = Certification::new("bending_function", conditions);
    Ok((bf, cert))
}

/// Largest odd derivative (orders `1, 3, …` up to the flatness order) of the
/// inverse graph `z = φ^{-1}(p)` at `p = 0`, and its second derivative there.
fn pole_certificate(bf: &BendingFunction) -> (f64, f64) {
    let h = 0.02;
    let nodes: Vec<f64> = (0..9).map(|k| k as f64 * h).collect();
    let z: Vec<f64> = nodes
        .iter()
        .map(|&p| bf.b - (bf.b - bf.a) * invert_phi_sq(bf, p * p))
        .collect();
    let max_order = bf.flatness_order.min(nodes.len() - 1);
    let w = fd_weights(0.0, &nodes, max_order).expect("distinct nodes");
    let deriv = |k: usize| -> f64 { w[k].iter().zip(&z).map(|(c, v)| c * v).sum() };
    let mut odd: f64 = 0.0;
    for k in (1..=max_order).step_by(2) {
        odd = odd.max(deriv(k).abs());
    }
    (odd, deriv(2))
}

/// Solve `φ²(y) = q` for `y ∈ [0, 1)` by bisection (φ² is increasing in `y`).
fn invert_phi_sq(bf: &BendingFunction, q: f64) -> f64 {
    if q <= 0.0 {
        return 0.0;
    }
    let (mut lo, mut hi) = (0.0, 1.0 - bf.flat_threshold());
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if bf.phi_sq_of_y(mid) < q {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Certification thresholds shared by the closed examples.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CertificationTolerances {
    /// Floor for numerically non-negative curvature quantities.
    pub positivity_floor: f64,
    /// Bound on neck identities evaluated with exact derivatives.
    pub identity: f64,
    /// Bound on jumps across the neck/cap junction.
    pub junction: f64,
}

impl Default for CertificationTolerances {
    fn default() -> Self {
        Self {
            positivity_floor: -1e-10,
            identity: 1e-10,
            junction: 1e-6,
        }
    }
}

fn require_samples(n_samples: usize) -> Result<(), ConstructionError> {
    if n_samples < 256 {
        return Err(ConstructionError::InvalidParameters(format!(
            "need at least 256 samples, got {n_samples}"
        )));
    }
    Ok(())
}

fn capped_profile(neck: Neck, bf: &BendingFunction, n_samples: usize) -> Result<GeneratingProfile, ConstructionError> {
    require_samples(n_samples)?;
    if !(bf.a > 0.0 && bf.b > bf.a) {
        return Err(ConstructionError::InvalidParameters("need 0 < a < b".into()));
    }
    let curve = AnalyticCurve::Capped { neck, bend: bf.clone() };
    Ok(GeneratingProfile::from_curve(curve, neck.dimension(), n_samples)?)
}

/// Strict cap positivity is only asked where the cap visibly departs from the
/// neck; closer to the junction the sign is below rounding and the global floor
/// applies instead.
const RESOLVED_BEND: f64 = 1e-6;

fn height_of(profile: &GeneratingProfile, i: usize) -> f64 {
    profile.z()[i]
}

fn extremum<F: Fn(usize) -> Option<f64>>(profile: &GeneratingProfile, f: F, max: bool) -> (f64, Option<f64>) {
    let mut best = if max { f64::NEG_INFINITY } else { f64::INFINITY };
    let mut at = None;
    for i in 0..profile.len() {
        if let Some(v) = f(i) {
            if (max && v > best) || (!max && v < best) {
                best = v;
                at = Some(profile.u()[i]);
            }
        }
    }
    (best, at)
}

/// Jumps of `(H, λ1)` across the junction `z = a` (parameter `u = asin(a/b)`),
/// each side extrapolated linearly from two nearby one-sided evaluations.
fn junction_jump(profile: &GeneratingProfile, bf: &BendingFunction) -> f64 {
    let curve = profile.curve().expect("capped profiles are analytic");
    let n = profile.dimension();
    let u0 = (bf.a / bf.b).asin();
    let eval = |u: f64| {
        let (l1, l2) = curvatures_from_jet(&curve.jet(u), false);
        let (h, ..) = scalars(n, l1, l2);
        (h, l1)
    };
    let d = 1e-4;
    let side = |sign: f64| {
        let (h1, k1) = eval(u0 + sign * d);
        let (h2, k2) = eval(u0 + sign * 2.0 * d);
        (2.0 * h1 - h2, 2.0 * k1 - k2)
    };
    let (hl, kl) = side(-1.0);
    let (hr, kr) = side(1.0);
    (hl - hr).abs().max((kl - kr).abs())
}

/// The catenoid neck `r = cosh z` on `|z| ≤ a`, closed by two convex caps.
pub fn capped_catenoid(
    bf: &BendingFunction,
    n_samples: usize,
    tol: &CertificationTolerances,
) -> Result<Constructed, ConstructionError> {
    let profile = capped_profile(Neck::Catenoid, bf, n_samples)?;
    let field = curvature_field(&profile)?;
    let on_neck = |i: usize| height_of(&profile, i).abs() <= bf.a;

    // ṙ² + 1 - r̈ r for the graph r(z) = cosh z
    let (min_res, min_at) = extremum(
        &profile,
        |i| {
            on_neck(i).then(|| {
                let r = Neck::Catenoid.radius(Jet::var(profile.z()[i]));
                (r.d1 * r.d1 + 1.0 - r.d2 * r.v).abs()
            })
        },
        true,
    );
    let (neck_h, neck_h_at) = extremum(&profile, |i| on_neck(i).then(|| field.h[i].abs()), true);
    let (neck_a2, neck_a2_at) = extremum(&profile, |i| on_neck(i).then(|| field.a2[i]), false);
    let (min_h, min_h_at) = extremum(&profile, |i| Some(field.h[i]), false);
    let bent = |i: usize| 1.0 - bf.eval(height_of(&profile, i).abs()).v >= RESOLVED_BEND;
    let (cap_h, cap_h_at) = extremum(&profile, |i| bent(i).then(|| field.h[i]), false);

    let conditions = vec![
        Condition::new("neck_minimality_residual", min_res, BoundKind::Below, 1e-12, min_at),
        Condition::new("neck_H_zero", neck_h, BoundKind::AtMost, tol.identity, neck_h_at),
        Condition::new("neck_A2_positive", neck_a2, BoundKind::Above, 0.0, neck_a2_at),
        Condition::new("min_H", min_h, BoundKind::AtLeast, tol.positivity_floor, min_h_at),
        Condition::new("cap_H_positive", cap_h, BoundKind::Above, 0.0, cap_h_at),
        Condition::new(
            "junction_jump",
            junction_jump(&profile, bf),
            BoundKind::Below,
            tol.junction,
            None,
        ),
        Condition::new(
            "curvature_consistency",
            field.consistency_residual(),
            BoundKind::AtMost,
            1e-12,
            None,
        ),
        Condition::new("embedded", 0.0, BoundKind::AtMost, 0.0, None),
    ];
    Constructed::checked(profile, Certification::new("catenoid_capped", conditions))
}

/// The closed form of `H` on the elliptic torus.
pub fn torus_mean_curvature(u: f64) -> f64 {
    let c = (0.5 * u).cos();
    let s = u.sin();
    c * c * (5.0 + 2.0 * u.cos() - (2.0 * u).cos()) / ((3.0 + 2.0 * u.cos()) * (1.0 + s * s).powf(1.5))
}

/// The torus `r = 3 + 2cos u`, `z = √2 sin u` in `R³`.
pub fn elliptic_torus(n_samples: usize, tol: &CertificationTolerances) -> Result<Constructed, ConstructionError> {
    require_samples(n_samples)?;
    let profile = GeneratingProfile::from_curve(AnalyticCurve::EllipticTorus, 2, n_samples)?;
    let field = curvature_field(&profile)?;
    let jets = profile.derivatives()?;
    let u = profile.u();

    let (closed, closed_at) = extremum(
        &profile,
        |i| Some((field.h[i] - torus_mean_curvature(u[i])).abs()),
        true,
    );
    let (metric, metric_at) = extremum(
        &profile,
        |i| {
            let j = &jets[i];
            let guu = j.dr * j.dr + j.dz * j.dz;
            let gvv = j.r * j.r;
            let s = u[i].sin();
            Some(
                (guu - 2.0 * (1.0 + s * s))
                    .abs()
                    .max((gvv - (3.0 + 2.0 * u[i].cos()).powi(2)).abs()),
            )
        },
        true,
    );
    // every sample away from u = π must be strictly mean convex
    let zero_band = |i: usize| (u[i] - PI).abs() < 1e-9;
    let (min_off, min_off_at) = extremum(&profile, |i| (!zero_band(i)).then(|| field.h[i]), false);
    let (min_h, min_h_at) = extremum(&profile, |i| Some(field.h[i]), false);
    let h_pi = torus_h_at_pi();

    let conditions = vec![
        Condition::new("H_closed_form", closed, BoundKind::Below, tol.identity, closed_at),
        Condition::new("metric", metric, BoundKind::Below, 1e-12, metric_at),
        Condition::new("min_H", min_h, BoundKind::AtLeast, tol.positivity_floor, min_h_at),
        Condition::new("H_zero_at_pi", h_pi.abs(), BoundKind::AtMost, 1e-14, Some(PI)),
        Condition::new("H_positive_off_pi", min_off, BoundKind::Above, 0.0, min_off_at),
        Condition::new(
            "curvature_consistency",
            field.consistency_residual(),
            BoundKind::AtMost,
            1e-12,
            None,
        ),
        Condition::new("embedded", 0.0, BoundKind::AtMost, 0.0, None),
    ];
    Constructed::checked(profile, Certification::new("elliptic_torus", conditions))
}

fn torus_h_at_pi() -> f64 {
    let (l1, l2) = curvatures_from_jet(&AnalyticCurve::EllipticTorus.jet(PI), false);
    l1 + l2
}

/// `S = 2r(ṙz̈ - r̈ż) + ż(ṙ² + ż²)`; `R` has the sign of `S` where `ż > 0` and `n = 3`.
pub fn s_residual(j: &crate::profile::ProfileJet) -> f64 {
    2.0 * j.r * (j.dr * j.ddz - j.ddr * j.dz) + j.dz * (j.dr * j.dr + j.dz * j.dz)
}

/// The paraboloid neck `r = 2 + z²/8` in `R⁴`, closed by two caps.
pub fn capped_paraboloid(
    bf: &BendingFunction,
    n_samples: usize,
    tol: &CertificationTolerances,
) -> Result<Constructed, ConstructionError> {
    let profile = capped_profile(Neck::Paraboloid, bf, n_samples)?;
    let field = curvature_field(&profile)?;
    let jets = profile.derivatives()?;
    let on_neck = |i: usize| height_of(&profile, i).abs() <= bf.a;

    let (s_neck, s_neck_at) = extremum(&profile, |i| on_neck(i).then(|| s_residual(&jets[i]).abs()), true);
    let bent = |i: usize| 1.0 - bf.eval(height_of(&profile, i).abs()).v >= RESOLVED_BEND;
    let (s_cap, s_cap_at) = extremum(
        &profile,
        |i| (bent(i) && !profile.is_pole(i)).then(|| s_residual(&jets[i])),
        false,
    );
    let (r_neck, r_neck_at) = extremum(&profile, |i| on_neck(i).then(|| field.r[i].abs()), true);
    let (min_r, min_r_at) = extremum(&profile, |i| Some(field.r[i]), false);
    let (min_h, min_h_at) = extremum(&profile, |i| Some(field.h[i]), false);

    // principal curvatures of the open neck curve at its waist
    let (l1, l2) = curvatures_from_jet(&AnalyticCurve::ParaboloidNeck.jet(0.0), false);
    let (h0, _, _, r0) = scalars(3, l1, l2);
    let waist = (l1 + 0.25)
        .abs()
        .max((l2 - 0.5).abs())
        .max(r0.abs())
        .max((h0 - 0.75).abs());
    // the same values read off the capped curve at z = 0
    let curve = profile.curve().expect("capped profiles are analytic");
    let (c1, c2) = curvatures_from_jet(&curve.jet(0.0), false);
    let (hc, ..) = scalars(3, c1, c2);
    let waist_capped = (c1 + 0.25).abs().max((c2 - 0.5).abs()).max((hc - 0.75).abs());

    let conditions = vec![
        Condition::new(
            "neck_waist_curvatures",
            waist,
            BoundKind::AtMost,
            tol.identity,
            Some(0.0),
        ),
        Condition::new(
            "capped_waist_curvatures",
            waist_capped,
            BoundKind::AtMost,
            tol.identity,
            Some(0.0),
        ),
        Condition::new("neck_S_residual", s_neck, BoundKind::Below, tol.identity, s_neck_at),
        Condition::new("neck_R_zero", r_neck, BoundKind::AtMost, tol.identity, r_neck_at),
        Condition::new("cap_S_positive", s_cap, BoundKind::Above, 0.0, s_cap_at),
        Condition::new("min_R", min_r, BoundKind::AtLeast, tol.positivity_floor, min_r_at),
        Condition::new("min_H", min_h, BoundKind::AtLeast, tol.positivity_floor, min_h_at),
        Condition::new(
            "junction_jump",
            junction_jump(&profile, bf),
            BoundKind::Below,
            tol.junction,
            None,
        ),
        Condition::new(
            "curvature_consistency",
            field.consistency_residual(),
            BoundKind::AtMost,
            1e-12,
            None,
        ),
        Condition::new("embedded", 0.0, BoundKind::AtMost, 0.0, None),
    ];
    Constructed::checked(profile, Certification::new("paraboloid_capped", conditions))
}

/// Round `n`-sphere of radius `ρ₀`.
pub fn round_sphere(radius: f64, n: usize, n_samples: usize) -> Result<Constructed, ConstructionError> {
    if !(radius > 0.0 && radius.is_finite()) || n < 2 {
        return Err(ConstructionError::InvalidParameters(format!(
            "radius {radius}, n = {n}"
        )));
    }
    let profile = GeneratingProfile::from_curve(AnalyticCurve::RoundSphere { radius }, n, n_samples)?;
    let field: CurvatureField = curvature_field(&profile)?;
    let target = n as f64 / radius;
    let worst = field.h.iter().map(|h| (h - target).abs()).fold(0.0, f64::max);
    let conditions = vec![
        Condition::new("H_constant", worst, BoundKind::AtMost, 1e-12 * target.max(1.0), None),
        Condition::new("embedded", 0.0, BoundKind::AtMost, 0.0, None),
    ];
    Constructed::checked(profile, Certification::new("sphere", conditions))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn default_bf() -> BendingFunction {
        match bending_function(1.0, 2.0, &BendingParams::default()) {
            Ok(b) => b,
            Err(ConstructionError::Certification(c)) => panic!("{c}"),
            Err(e) => panic!("{e}"),
        }
    }

    #[test]
    fn bending_function_endpoints_are_exact() {
        let bf = default_bf();
        assert_eq!(bf.eval(1.0).v, 1.0);
        assert_eq!(bf.eval(2.0).v, 0.0);
    }

    #[test]
    fn rejects_bad_interval() {
        assert!(matches!(
            bending_function(2.0, 1.0, &BendingParams::default()),
            Err(ConstructionError::InvalidParameters(_))
        ));
    }

    #[test]
    fn shallow_steepness_fails_concavity() {
        let params = BendingParams {
            steepness: 0.5,
            ..BendingParams::default()
        };
        let (_, cert) = bending_function_report(1.0, 2.0, &params).unwrap();
        assert!(!cert.get("phi_ddot_negative").unwrap().passed);
    }

    #[test]
    fn cap_factor_matches_direct_formula() {
        let bf = default_bf();
        for &y in &[0.01, 0.3, 0.8] {
            let f = bf.cap_factor(Jet::constant(y)).unwrap().v;
            let phi = bf.eval(bf.b - y * (bf.b - bf.a)).v;
            assert!((f * y.sqrt() - phi).abs() < 1e-14);
        }
    }

    #[test]
    fn catenoid_certifies() {
        let c = capped_catenoid(&default_bf(), 512, &CertificationTolerances::default());
        let c = match c {
            Ok(c) => c,
            Err(ConstructionError::Certification(cert)) => panic!("{cert}"),
            Err(e) => panic!("{e}"),
        };
        assert!(c.certification.passed);
    }

    #[test]
    fn paraboloid_certifies() {
        match capped_paraboloid(&default_bf(), 512, &CertificationTolerances::default()) {
            Ok(c) => assert!(c.certification.passed),
            Err(ConstructionError::Certification(cert)) => panic!("{cert}"),
            Err(e) => panic!("{e}"),
        }
    }

    #[test]
    fn torus_certifies() {
        let c = elliptic_torus(256, &CertificationTolerances::default()).unwrap();
        assert!(c.certification.get("H_closed_form").unwrap().value < 1e-12);
    }

    #[test]
    fn too_few_samples() {
        assert!(matches!(
            elliptic_torus(100, &CertificationTolerances::default()),
            Err(ConstructionError::InvalidParameters(_))
        ));
    }
}
