//! Method-of-lines integration of constrained mean curvature flow.
//!
//! Sample positions `(r_i, z_i)` move with normal velocity `(h - H_i) N_i`
//! under classical fourth-order Runge–Kutta. The global term `h` is
//! recomputed at every stage. For the constrained variants it is taken as
//! `h = Σ ν_i H_i / Σ ν_i` with `ν_i = ∇Q · N_i`, where `Q` is the discrete
//! volume (or area) functional of the grid. This is a consistent
//! approximation of `∫H dμ / |M|` (or `∫H² dμ / ∫H dμ`) and it makes the
//! semi-discrete system conserve `Q` exactly, so any drift comes from the time
//! integrator alone.

use crate::geometry::{self, curvatures_from_jet, scalars, unit_ball_volume, unit_sphere_area};
use crate::profile::{check_embedded, fd_jets, GeneratingProfile, GeometryError, ProfileJet, Topology};
use crate::stencil::{interpolate, resolve, Parity, Stencil};
use serde::{Deserialize, Serialize};
use std::io::Write;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FlowVariant {
    #[serde(rename = "vp")]
    VolumePreserving,
    #[serde(rename = "ap")]
    AreaPreserving,
    #[serde(rename = "unconstrained")]
    Unconstrained,
}

impl FlowVariant {
    pub fn name(self) -> &'static str {
        match self {
            FlowVariant::VolumePreserving => "vp",
            FlowVariant::AreaPreserving => "ap",
            FlowVariant::Unconstrained => "unconstrained",
        }
    }

    /// Name of the conserved functional, if any.
    pub fn conserved(self) -> Option<&'static str> {
        match self {
            FlowVariant::VolumePreserving => Some("volume"),
            FlowVariant::AreaPreserving => Some("area"),
            FlowVariant::Unconstrained => None,
        }
    }
}

impl std::str::FromStr for FlowVariant {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "vp" => Ok(FlowVariant::VolumePreserving),
            "ap" => Ok(FlowVariant::AreaPreserving),
            "unconstrained" => Ok(FlowVariant::Unconstrained),
            _ => Err(format!("unknown flow variant '{s}' (expected vp, ap or unconstrained)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FlowConfig {
    pub variant: FlowVariant,
    pub t_end: f64,
    pub dt_max: f64,
    /// Safety factor on the explicit step `Δs_min² / (2n)`.
    pub cfl: f64,
    /// Resample to this many points (uniform in arclength) before starting.
    pub n_samples: Option<usize>,
    /// Redistribute samples every this many steps; 0 disables.
    pub regrid_every: usize,
    /// Run the embeddedness test every this many steps; 0 disables.
    pub embed_every: usize,
    pub projection: bool,
    pub drift_tol: f64,
    pub guard_max_a2: f64,
    pub guard_min_spacing: f64,
    pub record_every: usize,
    /// A minimum counts as a sign change once it is below `-sign_floor`.
    pub sign_floor: f64,
    pub refine_crossings: bool,
}

impl Default for FlowConfig {
    fn default() -> Self {
        Self {
            variant: FlowVariant::VolumePreserving,
            t_end: 0.05,
            dt_max: 1e-4,
            cfl: 0.5,
            n_samples: None,
            regrid_every: 200,
            embed_every: 10,
            projection: true,
            drift_tol: 1e-6,
            guard_max_a2: 1e6,
            guard_min_spacing: 1e-5,
            record_every: 10,
            sign_floor: 1e-8,
            refine_crossings: true,
        }
    }
}

impl FlowConfig {
    pub fn validate(&self) -> Result<(), FlowError> {
        let bad = |what: &str| Err(FlowError::Config(what.to_string()));
        if !(self.t_end >= 0.0 && self.t_end.is_finite()) {
            return bad("t_end must be finite and non-negative");
        }
        if !(self.dt_max > 0.0) {
            return bad("dt_max must be positive");
        }
        if !(self.cfl > 0.0 && self.cfl <= 1.0) {
            return bad("cfl must lie in (0, 1]");
        }
        if self.record_every == 0 {
            return bad("record_every must be positive");
        }
        if !(self.drift_tol > 0.0 && self.guard_max_a2 > 0.0 && self.guard_min_spacing > 0.0) {
            return bad("tolerances must be positive");
        }
        if !(self.sign_floor >= 0.0) {
            return bad("sign_floor must be non-negative");
        }
        if matches!(self.n_samples, Some(n) if n < 5) {
            return bad("n_samples must be at least 5");
        }
        Ok(())
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FlowError {
    #[error("invalid flow configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("reparametrization failed: arclength interpolant not monotone on [{0}, {1}]")]
    Monotonicity(f64, f64),
    #[error("conservation projection did not converge (residual {0:e})")]
    Projection(f64),
}

/// Why a run stopped early.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "guard", rename_all = "snake_case")]
pub enum GuardTrip {
    MaxA2 { value: f64, limit: f64 },
    GridCollapse { spacing: f64, limit: f64 },
    NotEmbedded { segments: (usize, usize) },
    NonFinite,
    Degenerate { message: String },
}

impl std::fmt::Display for GuardTrip {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            GuardTrip::MaxA2 { value, limit } => write!(f, "max |A|² = {value:e} exceeds {limit:e}"),
            GuardTrip::GridCollapse { spacing, limit } => write!(f, "grid spacing {spacing:e} below {limit:e}"),
            GuardTrip::NotEmbedded { segments } => {
                write!(
                    f,
                    "profile self-intersects (segments {} and {})",
                    segments.0, segments.1
                )
            }
            GuardTrip::NonFinite => write!(f, "non-finite sample"),
            GuardTrip::Degenerate { message } => write!(f, "{message}"),
        }
    }
}

/// A recorded time slice with cached functionals.
#[derive(Debug, Clone)]
pub struct FlowState {
    pub t: f64,
    pub step: usize,
    /// Incremented at every regrid; sample labels are comparable only within one epoch.
    pub epoch: usize,
    /// Step size used to reach this state.
    pub dt: f64,
    pub profile: GeneratingProfile,
    /// Global term of the flow variant, from trapezoid quadrature.
    pub h: f64,
    /// Global term actually used by the integrator (conservation-consistent form).
    pub h_flow: f64,
    pub area: f64,
    pub volume: f64,
    pub min_h: f64,
    pub min_h_index: usize,
    pub min_r: f64,
    pub min_r_index: usize,
    pub max_a2: f64,
}

impl FlowState {
    pub fn new(profile: GeneratingProfile, t: f64, variant: FlowVariant) -> Result<Self, FlowError> {
        let profile = if profile.curve().is_some() {
            profile.to_finite_difference()
        } else {
            profile
        };
        let frame = Frame::new(&profile)?;
        let eval = frame.evaluate(profile.r(), profile.z());
        let h_flow = frame
            .flow_term(&eval, profile.r(), profile.z(), variant)
            .unwrap_or(f64::NAN);
        Self::from_parts(profile, t, 0, 0, 0.0, variant, h_flow)
    }

    fn from_parts(
        profile: GeneratingProfile,
        t: f64,
        step: usize,
        epoch: usize,
        dt: f64,
        variant: FlowVariant,
        h_flow: f64,
    ) -> Result<Self, FlowError> {
        let field = geometry::curvature_field(&profile)?;
        let area = geometry::area(&profile)?;
        let volume = signed_volume(&profile)?.abs();
        let h = match variant {
            FlowVariant::Unconstrained => 0.0,
            _ => {
                let h2: Vec<f64> = field.h.iter().map(|x| x * x).collect();
                let ih = geometry::integrate(&profile, &field.h)?.value;
                let ih2 = geometry::integrate(&profile, &h2)?.value;
                geometry::global_term_from_integrals(variant, ih, ih2, area)?
            }
        };
        let (min_h_index, min_h) = argmin(&field.h);
        let (min_r_index, min_r) = argmin(&field.r);
        let max_a2 = field.a2.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Ok(Self {
            t,
            step,
            epoch,
            dt,
            profile,
            h,
            h_flow,
            area,
            volume,
            min_h,
            min_h_index,
            min_r,
            min_r_index,
            max_a2,
        })
    }

    /// The conserved functional of `variant` at this state.
    pub fn conserved(&self, variant: FlowVariant) -> Option<f64> {
        match variant {
            FlowVariant::VolumePreserving => Some(self.volume),
            FlowVariant::AreaPreserving => Some(self.area),
            FlowVariant::Unconstrained => None,
        }
    }
}

fn argmin(v: &[f64]) -> (usize, f64) {
    v.iter().copied().enumerate().fold(
        (0, f64::INFINITY),
        |(bi, bv), (i, x)| if x < bv { (i, x) } else { (bi, bv) },
    )
}

/// `ω_n ∫ r^n ż du` with the profile's own derivatives and the trapezoid rule.
fn signed_volume(profile: &GeneratingProfile) -> Result<f64, GeometryError> {
    let n = profile.dimension();
    let jets = profile.derivatives()?;
    let g: Vec<f64> = jets.iter().map(|j| j.r.powi(n as i32) * j.dz).collect();
    Ok(unit_ball_volume(n) * geometry::trapezoid(profile, &g).value)
}

/// Fixed parameter grid with its operators.
#[derive(Debug, Clone)]
struct Frame {
    n: usize,
    topology: Topology,
    u: Vec<f64>,
    period: f64,
    stencil: Stencil,
    weights: Vec<f64>,
    /// Orientation of the discrete volume (+1 or -1), fixed at start.
    orientation: f64,
}

/// Geometry of one set of positions.
struct Evaluation {
    jets: Vec<ProfileJet>,
    h: Vec<f64>,
    a2: Vec<f64>,
    nr: Vec<f64>,
    nz: Vec<f64>,
}

impl Frame {
    fn new(profile: &GeneratingProfile) -> Result<Self, FlowError> {
        let stencil = profile.stencil()?;
        let weights = geometry::trapezoid_weights(profile);
        let mut frame = Self {
            n: profile.dimension(),
            topology: profile.topology(),
            u: profile.u().to_vec(),
            period: profile.period(),
            stencil,
            weights,
            orientation: 1.0,
        };
        let jets = fd_jets(&frame.stencil, profile.r(), profile.z());
        if frame.signed_volume(&jets) < 0.0 {
            frame.orientation = -1.0;
        }
        Ok(frame)
    }

    fn is_pole(&self, i: usize) -> bool {
        self.topology == Topology::Sphere && (i == 0 || i + 1 == self.u.len())
    }

    fn evaluate(&self, r: &[f64], z: &[f64]) -> Evaluation {
        let jets = fd_jets(&self.stencil, r, z);
        let len = r.len();
        let mut e = Evaluation {
            h: Vec::with_capacity(len),
            a2: Vec::with_capacity(len),
            nr: Vec::with_capacity(len),
            nz: Vec::with_capacity(len),
            jets,
        };
        for (i, j) in e.jets.iter().enumerate() {
            let (l1, l2) = curvatures_from_jet(j, self.is_pole(i));
            let (h, a2, _, _) = scalars(self.n, l1, l2);
            let (nr, nz) = j.normal();
            e.h.push(h);
            e.a2.push(a2);
            e.nr.push(if self.is_pole(i) { 0.0 } else { nr });
            e.nz.push(nz);
        }
        e
    }

    fn signed_volume(&self, jets: &[ProfileJet]) -> f64 {
        let n = self.n as i32;
        unit_ball_volume(self.n)
            * jets
                .iter()
                .zip(&self.weights)
                .map(|(j, w)| w * j.r.powi(n) * j.dz)
                .sum::<f64>()
    }

    fn area(&self, jets: &[ProfileJet]) -> f64 {
        let n = self.n as i32;
        unit_sphere_area(self.n - 1)
            * jets
                .iter()
                .zip(&self.weights)
                .map(|(j, w)| w * j.r.powi(n - 1) * j.speed())
                .sum::<f64>()
    }

    /// Discrete conserved functional of `variant`.
    fn functional(&self, jets: &[ProfileJet], variant: FlowVariant) -> f64 {
        match variant {
            FlowVariant::VolumePreserving => self.orientation * self.signed_volume(jets),
            FlowVariant::AreaPreserving => self.area(jets),
            FlowVariant::Unconstrained => 0.0,
        }
    }

    /// Gradient of the discrete functional with respect to `(r, z)`.
    fn gradient(&self, jets: &[ProfileJet], variant: FlowVariant) -> (Vec<f64>, Vec<f64>) {
        let len = jets.len();
        let n = self.n as i32;
        let mut gr = vec![0.0; len];
        let mut gz = vec![0.0; len];
        match variant {
            FlowVariant::VolumePreserving => {
                let c = self.orientation * unit_ball_volume(self.n);
                let mut x = vec![0.0; len];
                for i in 0..len {
                    let j = &jets[i];
                    let w = self.weights[i];
                    gr[i] = c * w * n as f64 * j.r.powi(n - 1) * j.dz;
                    x[i] = c * w * j.r.powi(n);
                }
                self.stencil.add_transpose_d1(&x, Parity::Even, &mut gz);
            }
            FlowVariant::AreaPreserving => {
                let c = unit_sphere_area(self.n - 1);
                let mut xr = vec![0.0; len];
                let mut xz = vec![0.0; len];
                for i in 0..len {
                    let j = &jets[i];
                    let w = self.weights[i];
                    let s = j.speed();
                    gr[i] = c * w * (n - 1) as f64 * j.r.powi(n - 2) * s;
                    let m = c * w * j.r.powi(n - 1) / s;
                    xr[i] = m * j.dr;
                    xz[i] = m * j.dz;
                }
                self.stencil.add_transpose_d1(&xr, Parity::Odd, &mut gr);
                self.stencil.add_transpose_d1(&xz, Parity::Even, &mut gz);
            }
            FlowVariant::Unconstrained => {}
        }
        if self.topology == Topology::Sphere {
            // pole radii are pinned to the axis
            gr[0] = 0.0;
            gr[len - 1] = 0.0;
        }
        (gr, gz)
    }

    /// `h = Σ ν_i H_i / Σ ν_i` with `ν = ∇Q · N`.
    fn flow_term(&self, e: &Evaluation, _r: &[f64], _z: &[f64], variant: FlowVariant) -> Result<f64, FlowError> {
        if variant == FlowVariant::Unconstrained {
            return Ok(0.0);
        }
        let (gr, gz) = self.gradient(&e.jets, variant);
        let mut num = 0.0;
        let mut den = 0.0;
        for i in 0..e.h.len() {
            let nu = gr[i] * e.nr[i] + gz[i] * e.nz[i];
            num += nu * e.h[i];
            den += nu;
        }
        if variant == FlowVariant::AreaPreserving && num <= 0.0 {
            return Err(GeometryError::GlobalTermUndefined(num).into());
        }
        if !(den > 0.0) {
            return Err(FlowError::Geometry(GeometryError::Invalid(format!(
                "normal variation of the constraint vanishes ({den:e})"
            ))));
        }
        Ok(num / den)
    }

    fn velocity(&self, r: &[f64], z: &[f64], variant: FlowVariant) -> Result<(Vec<f64>, Vec<f64>, f64), FlowError> {
        let e = self.evaluate(r, z);
        let h = self.flow_term(&e, r, z, variant)?;
        let vr = (0..r.len()).map(|i| (h - e.h[i]) * e.nr[i]).collect();
        let vz = (0..r.len()).map(|i| (h - e.h[i]) * e.nz[i]).collect();
        Ok((vr, vz, h))
    }

    fn profile(&self, r: Vec<f64>, z: Vec<f64>) -> Result<GeneratingProfile, FlowError> {
        let period = (self.topology == Topology::Torus).then_some(self.period);
        Ok(GeneratingProfile::from_samples_unchecked(
            self.n,
            self.topology,
            self.u.clone(),
            r,
            z,
            period,
        )?)
    }
}

fn axpy(y: &[f64], a: f64, x: &[f64]) -> Vec<f64> {
    y.iter().zip(x).map(|(yi, xi)| yi + a * xi).collect()
}

/// Smallest chord between consecutive samples.
pub fn min_spacing(r: &[f64], z: &[f64], topology: Topology) -> f64 {
    let n = r.len();
    let segs = if topology == Topology::Torus { n } else { n - 1 };
    (0..segs)
        .map(|i| {
            let k = (i + 1) % n;
            (r[k] - r[i]).hypot(z[k] - z[i])
        })
        .fold(f64::INFINITY, f64::min)
}

/// Largest chord between consecutive samples.
pub fn max_spacing(r: &[f64], z: &[f64], topology: Topology) -> f64 {
    let n = r.len();
    let segs = if topology == Topology::Torus { n } else { n - 1 };
    (0..segs)
        .map(|i| {
            let k = (i + 1) % n;
            (r[k] - r[i]).hypot(z[k] - z[i])
        })
        .fold(0.0, f64::max)
}

/// Redistribute samples uniformly in arclength over the same parameter range.
pub fn reparametrize(profile: &GeneratingProfile) -> Result<GeneratingProfile, FlowError> {
    reparametrize_to(profile, profile.len())
}

/// Resample to `count` points uniform in arclength. The first sample (the
/// south pole for spheres) is kept fixed; the new parameter grid is uniform.
pub fn reparametrize_to(profile: &GeneratingProfile, count: usize) -> Result<GeneratingProfile, FlowError> {
    let profile = if profile.curve().is_some() {
        profile.to_finite_difference()
    } else {
        profile.clone()
    };
    let topology = profile.topology();
    let u = profile.u();
    let len = u.len();
    let period = profile.period();
    let jets = profile.derivatives()?;
    let speed: Vec<f64> = jets.iter().map(|j| j.speed()).collect();
    let dspeed: Vec<f64> = jets.iter().map(|j| (j.dr * j.ddr + j.dz * j.ddz) / j.speed()).collect();

    // Cumulative arclength with the end-corrected trapezoid rule, which is the
    // exact integral of the cubic Hermite interpolant of the speed.
    let intervals = if topology == Topology::Torus { len } else { len - 1 };
    let mut knots = Vec::with_capacity(intervals + 1);
    let mut cum = Vec::with_capacity(intervals + 1);
    knots.push(u[0]);
    cum.push(0.0);
    for i in 0..intervals {
        let k = (i + 1) % len;
        let du = if k == 0 { u[0] + period - u[i] } else { u[k] - u[i] };
        let piece = 0.5 * du * (speed[i] + speed[k]) + du * du / 12.0 * (dspeed[i] - dspeed[k]);
        knots.push(u[i] + du);
        cum.push(cum[i] + piece);
    }
    let total = cum[intervals];
    let (targets, new_u): (Vec<f64>, Vec<f64>) = match topology {
        Topology::Sphere => (0..count)
            .map(|k| {
                let f = k as f64 / (count - 1) as f64;
                (total * f, u[0] + (u[len - 1] - u[0]) * f)
            })
            .unzip(),
        Topology::Torus => (0..count)
            .map(|k| {
                let f = k as f64 / count as f64;
                (total * f, u[0] + period * f)
            })
            .unzip(),
    };

    let mut r = Vec::with_capacity(count);
    let mut z = Vec::with_capacity(count);
    let mut j = 0;
    for (k, &target) in targets.iter().enumerate() {
        let pinned_end = topology == Topology::Sphere && k + 1 == count;
        if k == 0 || pinned_end {
            let i = if k == 0 { 0 } else { len - 1 };
            r.push(profile.r()[i]);
            z.push(profile.z()[i]);
            continue;
        }
        while j + 1 < intervals && cum[j + 1] < target {
            j += 1;
        }
        let ustar = invert_hermite(&knots, &cum, &speed, &dspeed, j, target, len)?;
        let (ri, zi) = interpolate_position(&profile, ustar, j)?;
        r.push(ri);
        z.push(zi);
    }
    if topology == Topology::Sphere {
        r[0] = 0.0;
        r[count - 1] = 0.0;
    }
    let period = (topology == Topology::Torus).then_some(period);
    Ok(GeneratingProfile::from_samples_unchecked(
        profile.dimension(),
        topology,
        new_u,
        r,
        z,
        period,
    )?)
}

/// Solve `S(u) = target` on interval `j`, where `S` is the cubic Hermite
/// interpolant of the cumulative arclength.
fn invert_hermite(
    knots: &[f64],
    cum: &[f64],
    speed: &[f64],
    _dspeed: &[f64],
    j: usize,
    target: f64,
    len: usize,
) -> Result<f64, FlowError> {
    let (u0, u1) = (knots[j], knots[j + 1]);
    let du = u1 - u0;
    let (s0, s1) = (cum[j], cum[j + 1]);
    let (m0, m1) = (speed[j] * du, speed[(j + 1) % len] * du);
    let delta = s1 - s0;
    // Fritsch–Carlson sufficient condition for monotonicity
    let (alpha, beta) = (m0 / delta, m1 / delta);
    if !(delta > 0.0) || alpha * alpha + beta * beta > 9.0 {
        return Err(FlowError::Monotonicity(u0, u1));
    }
    let eval = |x: f64| {
        let x2 = x * x;
        let x3 = x2 * x;
        (2.0 * x3 - 3.0 * x2 + 1.0) * s0 + (x3 - 2.0 * x2 + x) * m0 + (-2.0 * x3 + 3.0 * x2) * s1 + (x3 - x2) * m1
    };
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if eval(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(u0 + 0.5 * (lo + hi) * du)
}

/// Six-point Lagrange interpolation of `(r, z)` at parameter `x` in interval `j`.
fn interpolate_position(profile: &GeneratingProfile, x: f64, j: usize) -> Result<(f64, f64), FlowError> {
    let mut nodes = [0.0; 6];
    let mut rv = [0.0; 6];
    let mut zv = [0.0; 6];
    for (slot, offset) in (-2isize..=3).enumerate() {
        let (col, mirrored, ux) = resolve(profile.u(), profile.topology(), profile.period(), j, offset);
        nodes[slot] = ux;
        rv[slot] = if mirrored { -profile.r()[col] } else { profile.r()[col] };
        zv[slot] = profile.z()[col];
    }
    let r = interpolate(&nodes, &rv, x).map_err(GeometryError::from)?;
    let z = interpolate(&nodes, &zv, x).map_err(GeometryError::from)?;
    Ok((r, z))
}

/// Outcome of a run.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum RunStatus {
    Completed,
    GuardTrip(GuardTrip),
}

/// First time a tracked minimum drops below `-floor`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Crossing {
    pub field: String,
    /// Last recorded time with the minimum above `-floor`.
    pub t_lo: f64,
    /// First recorded time with the minimum below `-floor`.
    pub t_hi: f64,
    /// Crossing time resolved by re-integrating the bracket at a tenth of the step.
    pub t_refined: Option<f64>,
    pub u: f64,
    pub z: f64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TerminalReport {
    pub variant: FlowVariant,
    #[serde(flatten)]
    pub status: RunStatus,
    pub t_final: f64,
    pub steps: usize,
    pub regrids: usize,
    pub conserved: Option<String>,
    pub conserved_initial: Option<f64>,
    pub conserved_final: Option<f64>,
    pub relative_drift: Option<f64>,
    pub drift_within_tol: Option<bool>,
    pub max_projection: f64,
    pub min_h_final: f64,
    pub min_r_final: f64,
    pub crossing_h: Option<Crossing>,
    pub crossing_r: Option<Crossing>,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub config: FlowConfig,
    pub states: Vec<FlowState>,
    pub terminal: TerminalReport,
}

impl Trajectory {
    pub fn write_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["t", "area", "volume", "h", "minH", "minR", "maxA2"])?;
        for s in &self.states {
            w.write_record(
                [s.t, s.area, s.volume, s.h, s.min_h, s.min_r, s.max_a2]
                    .iter()
                    .map(|x| format!("{x:e}")),
            )?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn last(&self) -> &FlowState {
        self.states.last().expect("trajectories hold the initial state")
    }

    pub fn completed(&self) -> bool {
        self.terminal.status == RunStatus::Completed
    }
}

/// Which curvature scalar a sign tracker follows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TrackedField {
    H,
    R,
}

impl TrackedField {
    pub fn name(self) -> &'static str {
        match self {
            TrackedField::H => "H",
            TrackedField::R => "R",
        }
    }

    pub fn minimum(self, s: &FlowState) -> (f64, usize) {
        match self {
            TrackedField::H => (s.min_h, s.min_h_index),
            TrackedField::R => (s.min_r, s.min_r_index),
        }
    }
}

/// First recorded sign change of the field minimum.
pub fn first_crossing(states: &[FlowState], field: TrackedField, floor: f64) -> Option<Crossing> {
    let k = states.iter().position(|s| field.minimum(s).0 < -floor)?;
    let s = &states[k];
    let (value, i) = field.minimum(s);
    Some(Crossing {
        field: field.name().to_string(),
        t_lo: if k > 0 { states[k - 1].t } else { s.t },
        t_hi: s.t,
        t_refined: None,
        u: s.profile.u()[i],
        z: s.profile.z()[i],
        value,
    })
}

/// Integrator for one flow configuration.
#[derive(Debug, Clone)]
pub struct FlowEngine {
    config: FlowConfig,
}

/// Result of a single step.
#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub profile: GeneratingProfile,
    /// Global term at the first stage.
    pub h: f64,
    /// Size of the conservation correction, zero when projection is off.
    pub projection: f64,
}

impl FlowEngine {
    pub fn new(config: FlowConfig) -> Result<Self, FlowError> {
        config.validate()?;
        Ok(Self { config })
    }

    pub fn config(&self) -> &FlowConfig {
        &self.config
    }

    /// Normal velocity `h - H_i` at every sample.
    pub fn normal_velocity(&self, profile: &GeneratingProfile) -> Result<Vec<f64>, FlowError> {
        let frame = Frame::new(profile)?;
        let (r, z) = (profile.r(), profile.z());
        let e = frame.evaluate(r, z);
        let h = frame.flow_term(&e, r, z, self.config.variant)?;
        Ok(e.h.iter().map(|hi| h - hi).collect())
    }

    /// Explicit step bound `cfl · Δs_min² / (2n)`.
    pub fn stable_dt(&self, profile: &GeneratingProfile) -> f64 {
        let ds = min_spacing(profile.r(), profile.z(), profile.topology());
        self.config.cfl * ds * ds / (2.0 * profile.dimension() as f64)
    }

    /// One Runge–Kutta step of size `dt`, followed by the conservation
    /// projection to `target` when enabled.
    pub fn step(&self, profile: &GeneratingProfile, dt: f64, target: Option<f64>) -> Result<StepOutcome, FlowError> {
        let frame = Frame::new(profile)?;
        self.step_in(&frame, profile.r(), profile.z(), dt, target).map(
            |(r, z, h, projection)| -> Result<StepOutcome, FlowError> {
                Ok(StepOutcome {
                    profile: frame.profile(r, z)?,
                    h,
                    projection,
                })
            },
        )?
    }

    fn step_in(
        &self,
        frame: &Frame,
        r: &[f64],
        z: &[f64],
        dt: f64,
        target: Option<f64>,
    ) -> Result<(Vec<f64>, Vec<f64>, f64, f64), FlowError> {
        let v = self.config.variant;
        let (k1r, k1z, h) = frame.velocity(r, z, v)?;
        let (r2, z2) = (axpy(r, 0.5 * dt, &k1r), axpy(z, 0.5 * dt, &k1z));
        let (k2r, k2z, _) = frame.velocity(&r2, &z2, v)?;
        let (r3, z3) = (axpy(r, 0.5 * dt, &k2r), axpy(z, 0.5 * dt, &k2z));
        let (k3r, k3z, _) = frame.velocity(&r3, &z3, v)?;
        let (r4, z4) = (axpy(r, dt, &k3r), axpy(z, dt, &k3z));
        let (k4r, k4z, _) = frame.velocity(&r4, &z4, v)?;
        let c = dt / 6.0;
        let mut rn: Vec<f64> = (0..r.len())
            .map(|i| r[i] + c * (k1r[i] + 2.0 * k2r[i] + 2.0 * k3r[i] + k4r[i]))
            .collect();
        let mut zn: Vec<f64> = (0..z.len())
            .map(|i| z[i] + c * (k1z[i] + 2.0 * k2z[i] + 2.0 * k3z[i] + k4z[i]))
            .collect();
        if frame.topology == Topology::Sphere {
            let last = rn.len() - 1;
            rn[0] = 0.0;
            rn[last] = 0.0;
        }
        let mut projection = 0.0;
        if let (true, Some(target)) = (self.config.projection, target) {
            projection = self.project(frame, &mut rn, &mut zn, target)?;
        }
        Ok((rn, zn, h, projection))
    }

    /// Move all samples by a common normal offset `ε` so that the discrete
    /// conserved functional equals `target`. Returns `|ε|`.
    fn project(&self, frame: &Frame, r: &mut [f64], z: &mut [f64], target: f64) -> Result<f64, FlowError> {
        let v = self.config.variant;
        let e = frame.evaluate(r, z);
        let (r0, z0) = (r.to_vec(), z.to_vec());
        let mut eps = 0.0;
        let mut residual = f64::INFINITY;
        for _ in 0..20 {
            let rs = axpy(&r0, eps, &e.nr);
            let zs = axpy(&z0, eps, &e.nz);
            let jets = fd_jets(&frame.stencil, &rs, &zs);
            let q = frame.functional(&jets, v);
            residual = q - target;
            if residual.abs() <= 16.0 * f64::EPSILON * target.abs() {
                r.copy_from_slice(&rs);
                z.copy_from_slice(&zs);
                return Ok(eps.abs());
            }
            let (gr, gz) = frame.gradient(&jets, v);
            let slope: f64 = (0..r0.len()).map(|i| gr[i] * e.nr[i] + gz[i] * e.nz[i]).sum();
            let next = eps - residual / slope;
            if next == eps {
                r.copy_from_slice(&rs);
                z.copy_from_slice(&zs);
                return Ok(eps.abs());
            }
            eps = next;
        }
        // Newton stalls at rounding level; accept anything well below drift tolerances.
        if residual.abs() <= 1e-12 * target.abs() {
            r.copy_from_slice(&axpy(&r0, eps, &e.nr));
            z.copy_from_slice(&axpy(&z0, eps, &e.nz));
            return Ok(eps.abs());
        }
        Err(FlowError::Projection(residual))
    }

    fn guard(&self, frame: &Frame, r: &[f64], z: &[f64], step: usize) -> Option<GuardTrip> {
        if r.iter().chain(z).any(|x| !x.is_finite()) {
            return Some(GuardTrip::NonFinite);
        }
        let e = frame.evaluate(r, z);
        let max_a2 = e.a2.iter().copied().fold(0.0, f64::max);
        if !(max_a2 <= self.config.guard_max_a2) {
            return Some(GuardTrip::MaxA2 {
                value: max_a2,
                limit: self.config.guard_max_a2,
            });
        }
        let spacing = min_spacing(r, z, frame.topology);
        if spacing < self.config.guard_min_spacing {
            return Some(GuardTrip::GridCollapse {
                spacing,
                limit: self.config.guard_min_spacing,
            });
        }
        if self.config.embed_every > 0 && step % self.config.embed_every == 0 {
            if let Err(err) = check_embedded(r, z, frame.topology) {
                return Some(match err {
                    GeometryError::NotEmbedded(a, b) => GuardTrip::NotEmbedded { segments: (a, b) },
                    other => GuardTrip::Degenerate {
                        message: other.to_string(),
                    },
                });
            }
        }
        None
    }

    /// Evolve `profile` from `t = 0` to `t_end`.
    pub fn run(&self, profile: &GeneratingProfile) -> Result<Trajectory, FlowError> {
        let cfg = &self.config;
        let mut start = if profile.curve().is_some() {
            profile.to_finite_difference()
        } else {
            profile.clone()
        };
        if let Some(count) = cfg.n_samples {
            if count != start.len() {
                start = reparametrize_to(&start, count)?;
            }
        }
        let initial = FlowState::new(start, 0.0, cfg.variant)?;
        let (mut states, terminal) = self.integrate(initial, cfg.t_end, None)?;
        let mut terminal = terminal;
        if cfg.refine_crossings {
            for (field, slot) in [
                (TrackedField::H, &mut terminal.crossing_h),
                (TrackedField::R, &mut terminal.crossing_r),
            ] {
                if let Some(c) = slot.as_mut() {
                    c.t_refined = self.refine_crossing(&states, field, c);
                }
            }
        }
        states.shrink_to_fit();
        Ok(Trajectory {
            config: cfg.clone(),
            states,
            terminal,
        })
    }

    /// Re-run the recorded bracket of a crossing at a tenth of the step and
    /// return the first sub-step time with the minimum below `-sign_floor`.
    fn refine_crossing(&self, states: &[FlowState], field: TrackedField, c: &Crossing) -> Option<f64> {
        let k = states.iter().position(|s| s.t == c.t_lo)?;
        let from = &states[k];
        let dt = states.get(k + 1).map(|s| s.dt).filter(|d| *d > 0.0)? / 10.0;
        let sub = FlowEngine {
            config: FlowConfig {
                dt_max: dt,
                record_every: 1,
                regrid_every: 0,
                refine_crossings: false,
                ..self.config.clone()
            },
        };
        let target = states[0].conserved(self.config.variant);
        let (sub_states, _) = sub.integrate(from.clone(), c.t_hi - from.t, target).ok()?;
        sub_states
            .iter()
            .find(|s| field.minimum(s).0 < -self.config.sign_floor)
            .map(|s| from.t + s.t)
    }

    /// Integrate for a duration `span` starting from `initial` (time is
    /// reported relative to `initial.t` only for refinement runs).
    fn integrate(
        &self,
        initial: FlowState,
        span: f64,
        target: Option<f64>,
    ) -> Result<(Vec<FlowState>, TerminalReport), FlowError> {
        let cfg = &self.config;
        let variant = cfg.variant;
        let refining = target.is_some();
        let t0 = if refining { 0.0 } else { initial.t };
        let conserved_initial = match target {
            Some(q) => Some(q),
            None => initial.conserved(variant),
        };
        let mut frame = Frame::new(&initial.profile)?;
        let target_q = match variant {
            FlowVariant::Unconstrained => None,
            _ => {
                let jets = fd_jets(&frame.stencil, initial.profile.r(), initial.profile.z());
                Some(frame.functional(&jets, variant))
            }
        };
        let mut r = initial.profile.r().to_vec();
        let mut z = initial.profile.z().to_vec();
        let mut t = t0;
        let mut step = 0usize;
        let mut epoch = initial.epoch;
        let mut regrids = 0;
        let mut max_projection: f64 = 0.0;
        let mut status = RunStatus::Completed;
        let mut states = vec![FlowState { t: t0, ..initial }];
        let t_end = t0 + span;
        let tiny = 1e-13 * t_end.abs().max(1e-300);
        while t_end - t > tiny {
            let profile_now = frame.profile(r.clone(), z.clone())?;
            let dt = self.stable_dt(&profile_now).min(cfg.dt_max).min(t_end - t);
            let (rn, zn, h, proj) = match self.step_in(&frame, &r, &z, dt, target_q) {
                Ok(x) => x,
                Err(FlowError::Geometry(e)) => {
                    status = RunStatus::GuardTrip(GuardTrip::Degenerate { message: e.to_string() });
                    break;
                }
                Err(e) => return Err(e),
            };
            step += 1;
            t = if t_end - (t + dt) <= tiny { t_end } else { t + dt };
            r = rn;
            z = zn;
            max_projection = max_projection.max(proj);
            if let Some(trip) = self.guard(&frame, &r, &z, step) {
                status = RunStatus::GuardTrip(trip);
                if r.iter().chain(&z).all(|x| x.is_finite()) {
                    let p = frame.profile(r.clone(), z.clone())?;
                    if let Ok(s) = FlowState::from_parts(p, t, step, epoch, dt, variant, h) {
                        states.push(s);
                    }
                }
                break;
            }
            if cfg.regrid_every > 0 && step % cfg.regrid_every == 0 {
                let p = reparametrize(&frame.profile(r.clone(), z.clone())?)?;
                r = p.r().to_vec();
                z = p.z().to_vec();
                frame = Frame::new(&p)?;
                epoch += 1;
                regrids += 1;
                if self.config.projection {
                    if let Some(q) = target_q {
                        max_projection = max_projection.max(self.project(&frame, &mut r, &mut z, q)?);
                    }
                }
            }
            let done = t_end - t <= tiny;
            if step % cfg.record_every == 0 || done {
                let p = frame.profile(r.clone(), z.clone())?;
                let e = frame.evaluate(&r, &z);
                let h_now = frame.flow_term(&e, &r, &z, variant).unwrap_or(f64::NAN);
                states.push(FlowState::from_parts(p, t, step, epoch, dt, variant, h_now)?);
            }
        }
        let last = states.last().expect("initial state recorded");
        let conserved_final = last.conserved(variant);
        let relative_drift = match (conserved_initial, conserved_final) {
            (Some(a), Some(b)) => Some((b - a).abs() / a.abs()),
            _ => None,
        };
        let terminal = TerminalReport {
            variant,
            status,
            t_final: last.t,
            steps: step,
            regrids,
            conserved: variant.conserved().map(str::to_string),
            conserved_initial,
            conserved_final,
            relative_drift,
            drift_within_tol: relative_drift.map(|d| d <= cfg.drift_tol),
            max_projection,
            min_h_final: last.min_h,
            min_r_final: last.min_r,
            crossing_h: first_crossing(&states, TrackedField::H, cfg.sign_floor),
            crossing_r: first_crossing(&states, TrackedField::R, cfg.sign_floor),
        };
        Ok((states, terminal))
    }
}

/// Convenience wrapper: `FlowEngine::new(config)?.run(profile)`.
pub fn run(profile: &GeneratingProfile, config: &FlowConfig) -> Result<Trajectory, FlowError> {
    FlowEngine::new(config.clone())?.run(profile)
}
