//! Constrained mean curvature flow of hypersurfaces of revolution.
//!
//! The crate builds closed rotationally symmetric hypersurfaces of `R^(n+1)`
//! from their generating curves, evolves them by volume- or area-preserving
//! mean curvature flow (or the plain flow), and checks curvature identities
//! and sign changes of `H` and of the scalar curvature `R` along the way.

pub mod cli;
pub mod constructions;
pub mod curves;
pub mod diagnostics;
pub mod flow;
pub mod geometry;
pub mod jet;
pub mod profile;
pub mod quadrature;
pub mod stencil;
