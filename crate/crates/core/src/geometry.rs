//! Curvatures, the Laplace–Beltrami operator and surface integrals of a
//! hypersurface of revolution given by its generating profile.

use crate::flow::FlowVariant;
use crate::profile::{GeneratingProfile, GeometryError, ProfileJet, Topology};
use crate::quadrature::{self, Estimate};
use crate::stencil::Parity;
use serde::Serialize;
use std::io::Write;

/// Area of the unit `k`-sphere in `R^(k+1)`.
pub fn unit_sphere_area(k: usize) -> f64 {
    match k {
        0 => 2.0,
        1 => 2.0 * std::f64::consts::PI,
        _ => 2.0 * std::f64::consts::PI * unit_sphere_area(k - 2) / (k - 1) as f64,
    }
}

/// Volume of the unit `n`-ball.
pub fn unit_ball_volume(n: usize) -> f64 {
    unit_sphere_area(n - 1) / n as f64
}

/// `(λ1, λ2)` from a profile jet. At a pole the rotational curvature is the
/// umbilic limit `λ2 = λ1`.
pub fn curvatures_from_jet(j: &ProfileJet, pole: bool) -> (f64, f64) {
    let s2 = j.dr * j.dr + j.dz * j.dz;
    let s = s2.sqrt();
    let l1 = (j.ddz * j.dr - j.ddr * j.dz) / (s2 * s);
    let l2 = if pole { l1 } else { j.dz / (j.r * s) };
    (l1, l2)
}

/// Principal curvatures at a non-pole sample.
pub fn principal_curvatures(profile: &GeneratingProfile, i: usize) -> Result<(f64, f64), GeometryError> {
    let j = crate::profile::evaluate_profile(profile, i)?;
    if profile.is_pole(i) || j.r == 0.0 {
        return Err(GeometryError::AxisContact(i));
    }
    Ok(curvatures_from_jet(&j, false))
}

/// Per-sample principal curvatures and the scalars built from them.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurvatureField {
    pub n: usize,
    pub u: Vec<f64>,
    pub lambda1: Vec<f64>,
    pub lambda2: Vec<f64>,
    pub h: Vec<f64>,
    pub a2: Vec<f64>,
    pub c: Vec<f64>,
    pub r: Vec<f64>,
}

/// `(H, |A|², C, R)` of a revolution hypersurface with curvatures `(λ1, λ2, …, λ2)`.
pub fn scalars(n: usize, l1: f64, l2: f64) -> (f64, f64, f64, f64) {
    let m = (n - 1) as f64;
    let h = l1 + m * l2;
    let a2 = l1 * l1 + m * l2 * l2;
    let c = l1 * l1 * l1 + m * l2 * l2 * l2;
    (h, a2, c, h * h - a2)
}

impl CurvatureField {
    pub fn from_principal(n: usize, u: Vec<f64>, lambda1: Vec<f64>, lambda2: Vec<f64>) -> Self {
        let len = u.len();
        let mut f = Self {
            n,
            u,
            lambda1,
            lambda2,
            h: Vec::with_capacity(len),
            a2: Vec::with_capacity(len),
            c: Vec::with_capacity(len),
            r: Vec::with_capacity(len),
        };
        for i in 0..len {
            let (h, a2, c, r) = scalars(n, f.lambda1[i], f.lambda2[i]);
            f.h.push(h);
            f.a2.push(a2);
            f.c.push(c);
            f.r.push(r);
        }
        f
    }

    pub fn len(&self) -> usize {
        self.u.len()
    }

    pub fn is_empty(&self) -> bool {
        self.u.is_empty()
    }

    /// Largest deviation of the stored scalars from a recomputation out of `(λ1, λ2)`,
    /// with `R` recomputed through the independent form `(n-1)λ2(2λ1 + (n-2)λ2)`.
    pub fn consistency_residual(&self) -> f64 {
        let m = (self.n - 1) as f64;
        let mut worst: f64 = 0.0;
        for i in 0..self.len() {
            let (l1, l2) = (self.lambda1[i], self.lambda2[i]);
            let (h, a2, c, _) = scalars(self.n, l1, l2);
            let r = m * l2 * (2.0 * l1 + (m - 1.0) * l2);
            let scale = 1.0 + self.a2[i];
            worst = worst
                .max((h - self.h[i]).abs())
                .max((a2 - self.a2[i]).abs())
                .max((c - self.c[i]).abs())
                .max((r - self.r[i]).abs() / scale);
        }
        worst
    }

    pub fn write_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["u", "lambda1", "lambda2", "H", "A2", "C", "R"])?;
        for i in 0..self.len() {
            w.write_record(
                [
                    self.u[i],
                    self.lambda1[i],
                    self.lambda2[i],
                    self.h[i],
                    self.a2[i],
                    self.c[i],
                    self.r[i],
                ]
                .iter()
                .map(|x| format!("{x:e}")),
            )?;
        }
        w.flush()?;
        Ok(())
    }
}

pub fn curvature_field_from_jets(profile: &GeneratingProfile, jets: &[ProfileJet]) -> CurvatureField {
    let (l1, l2): (Vec<f64>, Vec<f64>) = jets
        .iter()
        .enumerate()
        .map(|(i, j)| curvatures_from_jet(j, profile.is_pole(i)))
        .unzip();
    CurvatureField::from_principal(profile.dimension(), profile.u().to_vec(), l1, l2)
}

pub fn curvature_field(profile: &GeneratingProfile) -> Result<CurvatureField, GeometryError> {
    let jets = profile.derivatives()?;
    Ok(curvature_field_from_jets(profile, &jets))
}

/// `Δf` at one point given the profile jet and `f_u`, `f_uu`.
pub fn laplacian_from_jet(n: usize, j: &ProfileJet, df: f64, ddf: f64, pole: bool) -> f64 {
    let s2 = j.dr * j.dr + j.dz * j.dz;
    if pole {
        return n as f64 * ddf / s2;
    }
    let ds_over_s = (j.dr * j.ddr + j.dz * j.ddz) / s2;
    (ddf + df * ((n - 1) as f64 * j.dr / j.r - ds_over_s)) / s2
}

/// Axisymmetric Laplace–Beltrami operator applied to a sampled field.
pub fn laplace_beltrami(profile: &GeneratingProfile, f: &[f64]) -> Result<Vec<f64>, GeometryError> {
    check_len(profile, f)?;
    let jets = profile.derivatives()?;
    let stencil = profile.stencil()?;
    Ok(laplace_beltrami_with(profile, &jets, &stencil, f))
}

pub(crate) fn laplace_beltrami_with(
    profile: &GeneratingProfile,
    jets: &[ProfileJet],
    stencil: &crate::stencil::Stencil,
    f: &[f64],
) -> Vec<f64> {
    (0..f.len())
        .map(|i| {
            let (df, ddf) = stencil.apply_at(f, Parity::Even, i);
            laplacian_from_jet(profile.dimension(), &jets[i], df, ddf, profile.is_pole(i))
        })
        .collect()
}

fn check_len(profile: &GeneratingProfile, f: &[f64]) -> Result<(), GeometryError> {
    if f.len() != profile.len() {
        return Err(GeometryError::ShapeMismatch {
            expected: profile.len(),
            got: f.len(),
        });
    }
    Ok(())
}

/// Quadrature weights in `u` for the sampled grid.
///
/// Periodic grids use the plain trapezoid rule. On pole-to-pole grids the
/// integrands `r^(n-1)|ċ| f` are odd across a pole when `n` is even, which
/// leaves the trapezoid rule second order; there the Euler–Maclaurin end
/// terms `h²/12 f' - h⁴/720 f''' + h⁶/30240 f⁽⁵⁾` are added at both ends,
/// with derivatives from one-sided differences on the six nearest nodes.
pub fn trapezoid_weights(profile: &GeneratingProfile) -> Vec<f64> {
    let u = profile.u();
    let n = u.len();
    match profile.topology() {
        Topology::Torus => (0..n)
            .map(|i| {
                let next = if i + 1 < n { u[i + 1] } else { u[0] + profile.period() };
                let prev = if i > 0 { u[i - 1] } else { u[n - 1] - profile.period() };
                0.5 * (next - prev)
            })
            .collect(),
        Topology::Sphere => {
            let mut w: Vec<f64> = (0..n)
                .map(|i| {
                    let next = if i + 1 < n { u[i + 1] } else { u[i] };
                    let prev = if i > 0 { u[i - 1] } else { u[i] };
                    0.5 * (next - prev)
                })
                .collect();
            if n >= 2 * END_NODES {
                let head: Vec<f64> = u[..END_NODES].to_vec();
                let tail: Vec<f64> = u[n - END_NODES..].iter().rev().map(|x| -x).collect();
                for (nodes, from_start) in [(head, true), (tail, false)] {
                    let Some(c) = end_correction(&nodes) else { continue };
                    for (k, ck) in c.iter().enumerate() {
                        w[if from_start { k } else { n - 1 - k }] += ck;
                    }
                }
            }
            w
        }
    }
}

const END_NODES: usize = 6;

/// Weights of the left-end Euler–Maclaurin correction on uniformly spaced
/// `nodes`; `None` when the spacing is not uniform.
fn end_correction(nodes: &[f64]) -> Option<Vec<f64>> {
    let h = nodes[1] - nodes[0];
    if nodes.windows(2).any(|p| ((p[1] - p[0]) - h).abs() > 1e-9 * h) {
        return None;
    }
    let d = crate::stencil::fd_weights(nodes[0], nodes, 5).ok()?;
    let (h2, h4, h6) = (h * h, h.powi(4), h.powi(6));
    Some(
        (0..nodes.len())
            .map(|k| h2 / 12.0 * d[1][k] - h4 / 720.0 * d[3][k] + h6 / 30240.0 * d[5][k])
            .collect(),
    )
}

/// Volume element `σ_{n-1} r^{n-1} |ċ|` per unit `u`.
fn density(n: usize, j: &ProfileJet) -> f64 {
    unit_sphere_area(n - 1) * j.r.powi(n as i32 - 1) * j.speed()
}

/// `∫_M f dμ` by the composite trapezoid rule on the sample grid. The error
/// estimate compares against the same rule on every second sample.
pub fn integrate(profile: &GeneratingProfile, f: &[f64]) -> Result<Estimate, GeometryError> {
    check_len(profile, f)?;
    let jets = profile.derivatives()?;
    let g: Vec<f64> = jets
        .iter()
        .zip(f)
        .map(|(j, fi)| fi * density(profile.dimension(), j))
        .collect();
    Ok(trapezoid(profile, &g))
}

pub(crate) fn trapezoid(profile: &GeneratingProfile, g: &[f64]) -> Estimate {
    let w = trapezoid_weights(profile);
    let value: f64 = w.iter().zip(g).map(|(a, b)| a * b).sum();
    let u = profile.u();
    let n = u.len();
    // coarse rule on even-indexed samples
    let coarse = match profile.topology() {
        Topology::Torus if n % 2 == 0 => {
            let mut s = 0.0;
            for i in (0..n).step_by(2) {
                let next = if i + 2 < n { u[i + 2] } else { u[0] + profile.period() };
                let prev = if i >= 2 { u[i - 2] } else { u[n - 2] - profile.period() };
                s += 0.5 * (next - prev) * g[i];
            }
            Some(s)
        }
        Topology::Sphere if n % 2 == 1 => {
            let mut s = 0.0;
            for i in (0..n - 2).step_by(2) {
                s += 0.5 * (u[i + 2] - u[i]) * (g[i] + g[i + 2]);
            }
            Some(s)
        }
        _ => None,
    };
    let error = match coarse {
        Some(c) => (value - c).abs() / 3.0,
        None => f64::NAN,
    };
    Estimate { value, error }
}

/// `∫_M g dμ` where `g` is evaluated from the exact profile jet, by adaptive
/// Gauss–Kronrod quadrature. Needs an analytic profile.
pub fn integrate_analytic<G>(profile: &GeneratingProfile, mut g: G) -> Result<Estimate, GeometryError>
where
    G: FnMut(f64, &ProfileJet) -> f64,
{
    let curve = profile.curve().ok_or(GeometryError::NotAnalytic)?;
    let (lo, hi) = curve.domain();
    let n = profile.dimension();
    Ok(quadrature::integrate(
        |u| {
            let j = curve.jet(u);
            g(u, &j) * density(n, &j)
        },
        lo,
        hi,
    ))
}

fn mean_curvature_of(n: usize, j: &ProfileJet) -> f64 {
    let (l1, l2) = curvatures_from_jet(j, false);
    l1 + (n - 1) as f64 * l2
}

pub fn area(profile: &GeneratingProfile) -> Result<f64, GeometryError> {
    if profile.curve().is_some() {
        return Ok(integrate_analytic(profile, |_, _| 1.0)?.value);
    }
    Ok(integrate(profile, &vec![1.0; profile.len()])?.value)
}

/// Enclosed volume `ω_n |∫ r^n ż du|`.
pub fn enclosed_volume(profile: &GeneratingProfile) -> Result<f64, GeometryError> {
    if !profile.embedded_checked() {
        crate::profile::check_embedded(profile.r(), profile.z(), profile.topology())?;
    }
    let n = profile.dimension();
    let signed = match profile.curve() {
        Some(curve) => {
            let (lo, hi) = curve.domain();
            quadrature::integrate(
                |u| {
                    let j = curve.jet(u);
                    j.r.powi(n as i32) * j.dz
                },
                lo,
                hi,
            )
            .value
        }
        None => {
            let jets = profile.derivatives()?;
            let g: Vec<f64> = jets.iter().map(|j| j.r.powi(n as i32) * j.dz).collect();
            trapezoid(profile, &g).value
        }
    };
    Ok(unit_ball_volume(n) * signed.abs())
}

/// The nonlocal term `h` of the chosen flow.
pub fn global_term(profile: &GeneratingProfile, variant: FlowVariant) -> Result<f64, GeometryError> {
    if variant == FlowVariant::Unconstrained {
        return Ok(0.0);
    }
    let n = profile.dimension();
    let (int_h, int_h2, area) = if profile.curve().is_some() {
        (
            integrate_analytic(profile, |_, j| mean_curvature_of(n, j))?.value,
            integrate_analytic(profile, |_, j| mean_curvature_of(n, j).powi(2))?.value,
            area(profile)?,
        )
    } else {
        let field = curvature_field(profile)?;
        let h2: Vec<f64> = field.h.iter().map(|x| x * x).collect();
        (
            integrate(profile, &field.h)?.value,
            integrate(profile, &h2)?.value,
            integrate(profile, &vec![1.0; profile.len()])?.value,
        )
    };
    global_term_from_integrals(variant, int_h, int_h2, area)
}

pub(crate) fn global_term_from_integrals(
    variant: FlowVariant,
    int_h: f64,
    int_h2: f64,
    area: f64,
) -> Result<f64, GeometryError> {
    match variant {
        FlowVariant::Unconstrained => Ok(0.0),
        FlowVariant::VolumePreserving => Ok(int_h / area),
        FlowVariant::AreaPreserving => {
            if int_h <= 0.0 {
                Err(GeometryError::GlobalTermUndefined(int_h))
            } else {
                Ok(int_h2 / int_h)
            }
        }
    }
}
