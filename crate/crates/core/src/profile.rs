//! Sampled generating curves of hypersurfaces of revolution.
//!
//! A [`GeneratingProfile`] is the plane curve `u ↦ (r(u), z(u))` whose rotation
//! about the `z` axis sweeps an `n`-dimensional hypersurface in `R^(n+1)`.
//! Samples are always stored; profiles built from a closed form additionally
//! keep the [`AnalyticCurve`] so derivatives can be evaluated exactly.

use crate::curves::AnalyticCurve;
use crate::stencil::{Parity, Stencil, StencilError};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Topology {
    /// Both ends of the parameter interval lie on the rotation axis.
    Sphere,
    /// Periodic parameter; the curve never meets the axis.
    Torus,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DerivativeSource {
    Analytic,
    FiniteDifference,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("sample index {index} out of range for {len} samples")]
    IndexOutOfRange { index: usize, len: usize },
    #[error(transparent)]
    Stencil(#[from] StencilError),
    #[error("invalid profile: {0}")]
    Invalid(String),
    #[error("r = 0 at non-pole sample {0}")]
    AxisContact(usize),
    #[error("degenerate immersion (|c'| = 0) at sample {0}")]
    NotImmersed(usize),
    #[error("profile is not embedded: segments {0} and {1} intersect")]
    NotEmbedded(usize, usize),
    #[error("field has {got} values, profile has {expected} samples")]
    ShapeMismatch { expected: usize, got: usize },
    #[error("area-preserving global term undefined: ∫H dμ = {0} ≤ 0")]
    GlobalTermUndefined(f64),
    #[error("operation needs an analytic profile")]
    NotAnalytic,
}

/// Position and first two parameter derivatives of the generating curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfileJet {
    pub r: f64,
    pub z: f64,
    pub dr: f64,
    pub dz: f64,
    pub ddr: f64,
    pub ddz: f64,
}

impl ProfileJet {
    /// `|c'(u)|`
    pub fn speed(&self) -> f64 {
        self.dr.hypot(self.dz)
    }

    /// Unit normal `(ż, -ṙ)/|ċ|`, pointing away from the axis.
    pub fn normal(&self) -> (f64, f64) {
        let s = self.speed();
        (self.dz / s, -self.dr / s)
    }
}

#[derive(Debug, Clone)]
pub struct GeneratingProfile {
    n: usize,
    topology: Topology,
    u: Vec<f64>,
    r: Vec<f64>,
    z: Vec<f64>,
    period: f64,
    curve: Option<AnalyticCurve>,
    embedded_checked: bool,
}

impl GeneratingProfile {
    /// Sample a closed-form curve at `samples` parameter values, uniformly spaced
    /// over its domain (endpoints included for spheres, excluded for tori).
    pub fn from_curve(curve: AnalyticCurve, n: usize, samples: usize) -> Result<Self, GeometryError> {
        let topology = curve
            .topology()
            .ok_or_else(|| GeometryError::Invalid("open curve cannot form a closed profile".into()))?;
        let (lo, hi) = curve.domain();
        let u: Vec<f64> = match topology {
            Topology::Sphere => {
                if samples < 3 {
                    return Err(GeometryError::Invalid("need at least 3 samples".into()));
                }
                let mut u: Vec<f64> = (0..samples)
                    .map(|i| lo + (hi - lo) * i as f64 / (samples - 1) as f64)
                    .collect();
                u[samples - 1] = hi;
                u
            }
            Topology::Torus => (0..samples)
                .map(|i| lo + (hi - lo) * i as f64 / samples as f64)
                .collect(),
        };
        Self::from_curve_at(curve, n, u)
    }

    /// Sample a closed-form curve at the given parameter values.
    pub fn from_curve_at(curve: AnalyticCurve, n: usize, u: Vec<f64>) -> Result<Self, GeometryError> {
        let topology = curve
            .topology()
            .ok_or_else(|| GeometryError::Invalid("open curve cannot form a closed profile".into()))?;
        let (lo, hi) = curve.domain();
        let mut r = Vec::with_capacity(u.len());
        let mut z = Vec::with_capacity(u.len());
        for &ui in &u {
            let j = curve.jet(ui);
            r.push(j.r);
            z.push(j.z);
        }
        if topology == Topology::Sphere && !u.is_empty() {
            let last = u.len() - 1;
            r[0] = 0.0;
            r[last] = 0.0;
        }
        let profile = Self {
            n,
            topology,
            u,
            r,
            z,
            period: hi - lo,
            curve: Some(curve),
            embedded_checked: false,
        };
        profile.validate()?;
        Ok(profile.checked())
    }

    /// Finite-difference profile from raw samples. `period` is required for
    /// tori and ignored for spheres.
    pub fn from_samples(
        n: usize,
        topology: Topology,
        u: Vec<f64>,
        r: Vec<f64>,
        z: Vec<f64>,
        period: Option<f64>,
    ) -> Result<Self, GeometryError> {
        let profile = Self::from_samples_unchecked(n, topology, u, r, z, period)?;
        profile.validate()?;
        Ok(profile.checked())
    }

    /// Like [`from_samples`](Self::from_samples) but skips the invariant and
    /// embeddedness checks. Used on hot paths that check on their own schedule.
    pub fn from_samples_unchecked(
        n: usize,
        topology: Topology,
        u: Vec<f64>,
        r: Vec<f64>,
        z: Vec<f64>,
        period: Option<f64>,
    ) -> Result<Self, GeometryError> {
        if u.len() != r.len() || u.len() != z.len() {
            return Err(GeometryError::ShapeMismatch {
                expected: u.len(),
                got: r.len().min(z.len()),
            });
        }
        let period = match topology {
            Topology::Torus => match period {
                Some(p) => p,
                None if u.len() >= 2 => u[u.len() - 1] - u[0] + (u[1] - u[0]),
                None => return Err(GeometryError::Invalid("torus needs a period".into())),
            },
            Topology::Sphere => u.last().copied().unwrap_or(0.0) - u.first().copied().unwrap_or(0.0),
        };
        Ok(Self {
            n,
            topology,
            u,
            r,
            z,
            period,
            curve: None,
            embedded_checked: false,
        })
    }

    fn checked(mut self) -> Self {
        self.embedded_checked = true;
        self
    }

    fn validate(&self) -> Result<(), GeometryError> {
        if self.n < 2 {
            return Err(GeometryError::Invalid(format!("dimension n = {} < 2", self.n)));
        }
        let len = self.len();
        if len < 5 {
            return Err(GeometryError::Invalid(format!("need at least 5 samples, got {len}")));
        }
        for w in self.u.windows(2) {
            if w[1] <= w[0] {
                return Err(GeometryError::Stencil(StencilError::RepeatedNode(w[1])));
            }
        }
        if self.topology == Topology::Torus && self.u[len - 1] - self.u[0] >= self.period {
            return Err(GeometryError::Invalid("torus samples exceed one period".into()));
        }
        for i in 0..len {
            let r = self.r[i];
            if !r.is_finite() || !self.z[i].is_finite() || r < 0.0 {
                return Err(GeometryError::Invalid(format!("bad sample {i}: r = {r}")));
            }
            if r == 0.0 && !self.is_pole(i) {
                return Err(GeometryError::AxisContact(i));
            }
        }
        if self.topology == Topology::Sphere && (self.r[0] != 0.0 || self.r[len - 1] != 0.0) {
            return Err(GeometryError::Invalid("sphere profile must end on the axis".into()));
        }
        let jets = self.derivatives()?;
        for (i, j) in jets.iter().enumerate() {
            if !(j.speed() > 0.0) {
                return Err(GeometryError::NotImmersed(i));
            }
        }
        check_embedded(&self.r, &self.z, self.topology)
    }

    pub fn dimension(&self) -> usize {
        self.n
    }

    pub fn topology(&self) -> Topology {
        self.topology
    }

    pub fn derivative_source(&self) -> DerivativeSource {
        if self.curve.is_some() {
            DerivativeSource::Analytic
        } else {
            DerivativeSource::FiniteDifference
        }
    }

    pub fn curve(&self) -> Option<&AnalyticCurve> {
        self.curve.as_ref()
    }

    pub fn len(&self) -> usize {
        self.u.len()
    }

    pub fn is_empty(&self) -> bool {
        self.u.is_empty()
    }

    pub fn u(&self) -> &[f64] {
        &self.u
    }

    pub fn r(&self) -> &[f64] {
        &self.r
    }

    pub fn z(&self) -> &[f64] {
        &self.z
    }

    /// Parameter period for tori; parameter span for spheres.
    pub fn period(&self) -> f64 {
        self.period
    }

    pub fn is_pole(&self, i: usize) -> bool {
        self.topology == Topology::Sphere && (i == 0 || i + 1 == self.len())
    }

    pub(crate) fn embedded_checked(&self) -> bool {
        self.embedded_checked
    }

    /// Same samples, finite-difference derivatives.
    pub fn to_finite_difference(&self) -> Self {
        Self {
            curve: None,
            ..self.clone()
        }
    }

    /// Dilate the curve by `k > 0` about the origin.
    pub fn scaled(&self, k: f64) -> Result<Self, GeometryError> {
        let curve = match &self.curve {
            Some(AnalyticCurve::RoundSphere { radius }) => Some(AnalyticCurve::RoundSphere { radius: radius * k }),
            Some(_) => return Err(GeometryError::Invalid("only round spheres rescale analytically".into())),
            None => None,
        };
        Ok(Self {
            r: self.r.iter().map(|x| x * k).collect(),
            z: self.z.iter().map(|x| x * k).collect(),
            curve,
            ..self.clone()
        })
    }

    pub fn stencil(&self) -> Result<Stencil, GeometryError> {
        Ok(Stencil::new(&self.u, self.topology, self.period)?)
    }

    /// Position and derivatives at every sample.
    pub fn derivatives(&self) -> Result<Vec<ProfileJet>, GeometryError> {
        match &self.curve {
            Some(curve) => Ok(self
                .u
                .iter()
                .enumerate()
                .map(|(i, &u)| {
                    let mut j = curve.jet(u);
                    j.r = self.r[i];
                    j
                })
                .collect()),
            None => {
                let stencil = self.stencil()?;
                Ok(fd_jets(&stencil, &self.r, &self.z))
            }
        }
    }
}

pub(crate) fn fd_jets(stencil: &Stencil, r: &[f64], z: &[f64]) -> Vec<ProfileJet> {
    (0..r.len())
        .map(|i| {
            let (dr, ddr) = stencil.apply_at(r, Parity::Odd, i);
            let (dz, ddz) = stencil.apply_at(z, Parity::Even, i);
            ProfileJet {
                r: r[i],
                z: z[i],
                dr,
                dz,
                ddr,
                ddz,
            }
        })
        .collect()
}

/// `(r, z, ṙ, ż, r̈, z̈)` at sample `i`.
pub fn evaluate_profile(profile: &GeneratingProfile, i: usize) -> Result<ProfileJet, GeometryError> {
    if i >= profile.len() {
        return Err(GeometryError::IndexOutOfRange {
            index: i,
            len: profile.len(),
        });
    }
    match profile.curve() {
        Some(curve) => {
            let mut j = curve.jet(profile.u[i]);
            j.r = profile.r[i];
            Ok(j)
        }
        None => {
            let stencil = profile.stencil()?;
            let (dr, ddr) = stencil.apply_at(&profile.r, Parity::Odd, i);
            let (dz, ddz) = stencil.apply_at(&profile.z, Parity::Even, i);
            Ok(ProfileJet {
                r: profile.r[i],
                z: profile.z[i],
                dr,
                dz,
                ddr,
                ddz,
            })
        }
    }
}

fn orient(ax: f64, ay: f64, bx: f64, by: f64, cx: f64, cy: f64) -> f64 {
    (bx - ax) * (cy - ay) - (by - ay) * (cx - ax)
}

fn segments_cross(p: [(f64, f64); 2], q: [(f64, f64); 2]) -> bool {
    let (a, b) = (p[0], p[1]);
    let (c, d) = (q[0], q[1]);
    if a.0.max(b.0) < c.0.min(d.0)
        || c.0.max(d.0) < a.0.min(b.0)
        || a.1.max(b.1) < c.1.min(d.1)
        || c.1.max(d.1) < a.1.min(b.1)
    {
        return false;
    }
    let d1 = orient(a.0, a.1, b.0, b.1, c.0, c.1);
    let d2 = orient(a.0, a.1, b.0, b.1, d.0, d.1);
    let d3 = orient(c.0, c.1, d.0, d.1, a.0, a.1);
    let d4 = orient(c.0, c.1, d.0, d.1, b.0, b.1);
    let strict =
        ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0)) && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0));
    if strict {
        return true;
    }
    // collinear overlap
    let on = |o: f64, p: (f64, f64), q: (f64, f64), s: (f64, f64)| {
        o == 0.0 && s.0 >= p.0.min(q.0) && s.0 <= p.0.max(q.0) && s.1 >= p.1.min(q.1) && s.1 <= p.1.max(q.1)
    };
    on(d1, a, b, c) || on(d2, a, b, d) || on(d3, c, d, a) || on(d4, c, d, b)
}

/// O(N²) segment-pair test of the polyline `(r_i, z_i)`; adjacent segments are skipped.
pub fn check_embedded(r: &[f64], z: &[f64], topology: Topology) -> Result<(), GeometryError> {
    let n = r.len();
    let segs = match topology {
        Topology::Torus => n,
        Topology::Sphere => n - 1,
    };
    let seg = |k: usize| [(r[k], z[k]), (r[(k + 1) % n], z[(k + 1) % n])];
    for i in 0..segs {
        let si = seg(i);
        for j in (i + 2)..segs {
            if topology == Topology::Torus && i == 0 && j == segs - 1 {
                continue;
            }
            if segments_cross(si, seg(j)) {
                return Err(GeometryError::NotEmbedded(i, j));
            }
        }
    }
    if topology == Topology::Sphere {
        for i in 1..n - 1 {
            if r[i] <= 0.0 {
                return Err(GeometryError::AxisContact(i));
            }
        }
    }
    Ok(())
}

/// JSON sidecar written next to a profile CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileSidecar {
    pub n: usize,
    pub topology: Topology,
    pub derivative_source: DerivativeSource,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub period: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub construction: Option<AnalyticCurve>,
}

#[derive(Debug, Error)]
pub enum ProfileIoError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{path}: {source}")]
    Csv { path: String, source: csv::Error },
    #[error("{path}: {source}")]
    Json { path: String, source: serde_json::Error },
    #[error("{path}: expected header u,r,z")]
    Header { path: String },
    #[error("{path}: analytic profile without a construction")]
    MissingConstruction { path: String },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

#[derive(Debug, Serialize, Deserialize)]
struct Row {
    u: f64,
    r: f64,
    z: f64,
}

/// Path of the sidecar belonging to a profile CSV.
pub fn sidecar_path(csv_path: &std::path::Path) -> std::path::PathBuf {
    csv_path.with_extension("json")
}

impl GeneratingProfile {
    pub fn sidecar(&self) -> ProfileSidecar {
        ProfileSidecar {
            n: self.n,
            topology: self.topology,
            derivative_source: self.derivative_source(),
            period: (self.topology == Topology::Torus).then_some(self.period),
            construction: self.curve.clone(),
        }
    }

    pub fn write_csv<W: std::io::Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["u", "r", "z"])?;
        for i in 0..self.len() {
            w.write_record([self.u[i], self.r[i], self.z[i]].iter().map(|x| format!("{x:e}")))?;
        }
        w.flush()?;
        Ok(())
    }

    /// Write `path` (CSV) and its JSON sidecar.
    pub fn save(&self, path: &std::path::Path) -> Result<(), ProfileIoError> {
        let p = path.display().to_string();
        let file = std::fs::File::create(path).map_err(|source| ProfileIoError::Io {
            path: p.clone(),
            source,
        })?;
        self.write_csv(std::io::BufWriter::new(file))
            .map_err(|source| ProfileIoError::Csv {
                path: p.clone(),
                source,
            })?;
        let side = sidecar_path(path);
        let json = serde_json::to_string_pretty(&self.sidecar()).map_err(|source| ProfileIoError::Json {
            path: p.clone(),
            source,
        })?;
        std::fs::write(&side, json + "\n").map_err(|source| ProfileIoError::Io {
            path: side.display().to_string(),
            source,
        })
    }

    /// Read a profile CSV and its sidecar. Analytic profiles are re-evaluated
    /// from their construction at the stored parameter values.
    pub fn load(path: &std::path::Path) -> Result<Self, ProfileIoError> {
        let p = path.display().to_string();
        let side = sidecar_path(path);
        let text = std::fs::read_to_string(&side).map_err(|source| ProfileIoError::Io {
            path: side.display().to_string(),
            source,
        })?;
        let meta: ProfileSidecar = serde_json::from_str(&text).map_err(|source| ProfileIoError::Json {
            path: side.display().to_string(),
            source,
        })?;
        let mut reader = csv::Reader::from_path(path).map_err(|source| ProfileIoError::Csv {
            path: p.clone(),
            source,
        })?;
        let header = reader.headers().map_err(|source| ProfileIoError::Csv {
            path: p.clone(),
            source,
        })?;
        if header != vec!["u", "r", "z"] {
            return Err(ProfileIoError::Header { path: p });
        }
        let (mut u, mut r, mut z) = (Vec::new(), Vec::new(), Vec::new());
        for row in reader.deserialize::<Row>() {
            let row = row.map_err(|source| ProfileIoError::Csv {
                path: p.clone(),
                source,
            })?;
            u.push(row.u);
            r.push(row.r);
            z.push(row.z);
        }
        match meta.derivative_source {
            DerivativeSource::Analytic => {
                let curve = meta
                    .construction
                    .ok_or(ProfileIoError::MissingConstruction { path: p })?;
                Ok(Self::from_curve_at(curve, meta.n, u)?)
            }
            DerivativeSource::FiniteDifference => {
                let mut profile = Self::from_samples(meta.n, meta.topology, u, r, z, meta.period)?;
                profile.curve = None;
                Ok(profile)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn figure_eight_is_rejected() {
        let n = 64;
        let p = 2.0 * std::f64::consts::PI;
        let u: Vec<f64> = (0..n).map(|i| i as f64 * p / n as f64).collect();
        let r: Vec<f64> = u.iter().map(|t| 3.0 + t.sin()).collect();
        let z: Vec<f64> = u.iter().map(|t| (2.0 * t).sin()).collect();
        let err = GeneratingProfile::from_samples(2, Topology::Torus, u, r, z, Some(p)).unwrap_err();
        assert!(matches!(err, GeometryError::NotEmbedded(..)));
    }

    #[test]
    fn index_out_of_range() {
        let p = GeneratingProfile::from_curve(AnalyticCurve::EllipticTorus, 2, 16).unwrap();
        assert!(matches!(
            evaluate_profile(&p, 16),
            Err(GeometryError::IndexOutOfRange { .. })
        ));
    }

    #[test]
    fn repeated_nodes_are_degenerate() {
        let u = vec![0.0, 0.5, 0.5, 1.0, 1.5, 2.0];
        let r = vec![0.0, 0.4, 0.6, 0.7, 0.4, 0.0];
        let z = vec![0.0, 0.1, 0.2, 0.5, 0.9, 1.0];
        let err = GeneratingProfile::from_samples(2, Topology::Sphere, u, r, z, None).unwrap_err();
        assert!(matches!(err, GeometryError::Stencil(StencilError::RepeatedNode(_))));
    }

    #[test]
    fn save_and_load_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("torus.csv");
        let exact = GeneratingProfile::from_curve(AnalyticCurve::EllipticTorus, 2, 64).unwrap();
        exact.save(&path).unwrap();
        let back = GeneratingProfile::load(&path).unwrap();
        assert_eq!(back.derivative_source(), DerivativeSource::Analytic);
        assert_eq!(back.r(), exact.r());
        let fd = exact.to_finite_difference();
        fd.save(&path).unwrap();
        let back = GeneratingProfile::load(&path).unwrap();
        assert_eq!(back.derivative_source(), DerivativeSource::FiniteDifference);
        assert_eq!((back.u(), back.z(), back.period()), (fd.u(), fd.z(), fd.period()));
    }

    #[test]
    fn fd_matches_analytic_on_torus() {
        let exact = GeneratingProfile::from_curve(AnalyticCurve::EllipticTorus, 2, 512).unwrap();
        let fd = exact.to_finite_difference();
        for i in [0, 100, 256, 400] {
            let a = evaluate_profile(&exact, i).unwrap();
            let b = evaluate_profile(&fd, i).unwrap();
            assert!((a.dr - b.dr).abs() < 1e-8);
            assert!((a.ddz - b.ddz).abs() < 1e-7);
        }
    }
}
