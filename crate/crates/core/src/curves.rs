//! Closed-form generating curves.
//!
//! Every curve is evaluated on [`Jet`]s so that `(r, z)` and their first two
//! parameter derivatives come out exact to rounding.

use crate::constructions::BendingFunction;
use crate::jet::Jet;
use crate::profile::{ProfileJet, Topology};
use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_2, PI, SQRT_2};

/// Neck profiles written as graphs `r = r(z)` over the rotation axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Neck {
    /// `r(z) = cosh z`, a minimal surface for `n = 2`.
    Catenoid,
    /// `r(z) = 2 + z²/8`, scalar-flat for `n = 3`.
    Paraboloid,
}

impl Neck {
    pub fn radius(self, z: Jet) -> Jet {
        match self {
            Neck::Catenoid => z.cosh(),
            Neck::Paraboloid => z * z / 8.0 + 2.0,
        }
    }

    /// Hypersurface dimension the neck is designed for.
    pub fn dimension(self) -> usize {
        match self {
            Neck::Catenoid => 2,
            Neck::Paraboloid => 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AnalyticCurve {
    /// `r = ρ sin u`, `z = -ρ cos u`, `u ∈ [0, π]`.
    RoundSphere { radius: f64 },
    /// `r = 3 + 2 cos u`, `z = √2 sin u`, `u ∈ [0, 2π)`.
    EllipticTorus,
    /// Open catenary `r = cosh u`, `z = u`.
    Catenary,
    /// Open paraboloid neck `r = 2 cosh² u`, `z = 4 sinh u`.
    ParaboloidNeck,
    /// Neck closed by two caps bent with `bend`; parametrized by
    /// `z = b sin u`, `u ∈ [-π/2, π/2]`, which is regular at both poles.
    Capped { neck: Neck, bend: BendingFunction },
}

impl AnalyticCurve {
    pub fn topology(&self) -> Option<Topology> {
        match self {
            AnalyticCurve::RoundSphere { .. } | AnalyticCurve::Capped { .. } => Some(Topology::Sphere),
            AnalyticCurve::EllipticTorus => Some(Topology::Torus),
            AnalyticCurve::Catenary | AnalyticCurve::ParaboloidNeck => None,
        }
    }

    /// Parameter interval: pole to pole for spheres, one period for tori.
    pub fn domain(&self) -> (f64, f64) {
        match self {
            AnalyticCurve::RoundSphere { .. } => (0.0, PI),
            AnalyticCurve::EllipticTorus => (0.0, 2.0 * PI),
            AnalyticCurve::Catenary | AnalyticCurve::ParaboloidNeck => (f64::NEG_INFINITY, f64::INFINITY),
            AnalyticCurve::Capped { .. } => (-FRAC_PI_2, FRAC_PI_2),
        }
    }

    pub fn eval(&self, u: Jet) -> (Jet, Jet) {
        match self {
            AnalyticCurve::RoundSphere { radius } => (u.sin() * *radius, -(u.cos() * *radius)),
            AnalyticCurve::EllipticTorus => (u.cos() * 2.0 + 3.0, u.sin() * SQRT_2),
            AnalyticCurve::Catenary => (u.cosh(), u),
            AnalyticCurve::ParaboloidNeck => (u.cosh().powi(2) * 2.0, u.sinh() * 4.0),
            AnalyticCurve::Capped { neck, bend } => capped(*neck, bend, u),
        }
    }

    pub fn jet(&self, u: f64) -> ProfileJet {
        let (r, z) = self.eval(Jet::var(u));
        ProfileJet {
            r: r.v,
            z: z.v,
            dr: r.d1,
            dz: z.d1,
            ddr: r.d2,
            ddz: z.d2,
        }
    }
}

fn capped(neck: Neck, bend: &BendingFunction, u: Jet) -> (Jet, Jet) {
    let (a, b) = (bend.a, bend.b);
    let z = u.sin() * b;
    let base = neck.radius(z);
    if z.v.abs() <= a {
        return (base, z);
    }
    // distance to the pole in the parameter
    let tau = if u.v > 0.0 { FRAC_PI_2 - u } else { u + FRAC_PI_2 };
    let half = (tau * 0.5).sin();
    // y = 1 - (|z| - a)/(b - a), written without cancellation near the pole
    let y = half * half * (2.0 * b / (b - a));
    match bend.cap_factor(y) {
        Some(factor) => (base * half * factor * (2.0 * b / (b - a)).sqrt(), z),
        None => (base, z),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn torus_jet_at_outer_equator() {
        let j = AnalyticCurve::EllipticTorus.jet(0.0);
        assert_eq!((j.r, j.z, j.dr), (5.0, 0.0, 0.0));
        assert!((j.dz - SQRT_2).abs() < 1e-15);
    }

    #[test]
    fn catenary_jet_at_waist() {
        let j = AnalyticCurve::Catenary.jet(0.0);
        assert_eq!((j.r, j.dr, j.ddr), (1.0, 0.0, 1.0));
    }

    #[test]
    fn paraboloid_neck_jet_at_waist() {
        let j = AnalyticCurve::ParaboloidNeck.jet(0.0);
        assert_eq!((j.r, j.z, j.dr, j.dz), (2.0, 0.0, 0.0, 4.0));
    }

    #[test]
    fn paraboloid_parametrization_traces_graph() {
        for &u in &[-0.7, 0.1, 0.9] {
            let j = AnalyticCurve::ParaboloidNeck.jet(u);
            assert!((j.r - (2.0 + j.z * j.z / 8.0)).abs() < 1e-13);
        }
    }
}
