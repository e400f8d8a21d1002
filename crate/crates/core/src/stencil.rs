//! Finite-difference weights on arbitrary nodes and the five-point derivative
//! operators used on sampled generating curves.
//!
//! Closure at the ends of the grid depends on the topology: periodic wrap for
//! tori, reflection through the rotation axis for sphere-like profiles. Under
//! that reflection the radial coordinate is odd and the height (and any
//! axisymmetric scalar field) is even, see [`Parity`].

use crate::profile::Topology;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StencilError {
    #[error("degenerate stencil: repeated node at u = {0}")]
    RepeatedNode(f64),
    #[error("need at least {need} samples for the stencil, got {got}")]
    TooFewSamples { need: usize, got: usize },
}

/// Weights `w[k][j]` such that `f^(k)(x0) ≈ Σ_j w[k][j] f(nodes[j])` for
/// `k = 0..=max_order` (Fornberg's recursion).
pub fn fd_weights(x0: f64, nodes: &[f64], max_order: usize) -> Result<Vec<Vec<f64>>, StencilError> {
    let n = nodes.len();
    let mut c = vec![vec![0.0; n]; max_order + 1];
    if n == 0 {
        return Ok(c);
    }
    let mut c1 = 1.0;
    let mut c4 = nodes[0] - x0;
    c[0][0] = 1.0;
    for i in 1..n {
        let mn = i.min(max_order);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = nodes[i] - x0;
        for j in 0..i {
            let c3 = nodes[i] - nodes[j];
            if c3 == 0.0 {
                return Err(StencilError::RepeatedNode(nodes[i]));
            }
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[k][i] = c1 * (k as f64 * c[k - 1][i - 1] - c5 * c[k][i - 1]) / c2;
                }
                c[0][i] = -c1 * c5 * c[0][i - 1] / c2;
            }
            for k in (1..=mn).rev() {
                c[k][j] = (c4 * c[k][j] - k as f64 * c[k - 1][j]) / c3;
            }
            c[0][j] = c4 * c[0][j] / c3;
        }
        c1 = c2;
    }
    Ok(c)
}

/// Symmetry of a sampled field under reflection through the rotation axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Parity {
    Even,
    Odd,
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct Entry {
    pub col: usize,
    pub mirrored: bool,
    pub d1: f64,
    pub d2: f64,
}

/// Five-point (fourth-order on uniform grids) first and second derivative
/// operator on a fixed parameter grid.
#[derive(Debug, Clone)]
pub struct Stencil {
    rows: Vec<[Entry; 5]>,
}

/// Extended node `i + offset` of the grid, resolved to a stored sample.
/// Returns `(column, mirrored, parameter value)`.
pub(crate) fn resolve(u: &[f64], topology: Topology, period: f64, i: usize, offset: isize) -> (usize, bool, f64) {
    let n = u.len() as isize;
    let k = i as isize + offset;
    match topology {
        Topology::Torus => {
            let wraps = k.div_euclid(n);
            let col = k.rem_euclid(n) as usize;
            (col, false, u[col] + wraps as f64 * period)
        }
        Topology::Sphere => {
            if k < 0 {
                let col = (-k) as usize;
                (col, true, 2.0 * u[0] - u[col])
            } else if k >= n {
                let col = (2 * (n - 1) - k) as usize;
                (col, true, 2.0 * u[(n - 1) as usize] - u[col])
            } else {
                (k as usize, false, u[k as usize])
            }
        }
    }
}

impl Stencil {
    pub fn new(u: &[f64], topology: Topology, period: f64) -> Result<Self, StencilError> {
        if u.len() < 5 {
            return Err(StencilError::TooFewSamples { need: 5, got: u.len() });
        }
        let mut rows = Vec::with_capacity(u.len());
        for i in 0..u.len() {
            let mut nodes = [0.0; 5];
            let mut meta = [(0usize, false); 5];
            for (slot, offset) in (-2isize..=2).enumerate() {
                let (col, mirrored, x) = resolve(u, topology, period, i, offset);
                nodes[slot] = x;
                meta[slot] = (col, mirrored);
            }
            let w = fd_weights(u[i], &nodes, 2)?;
            let row = std::array::from_fn(|s| Entry {
                col: meta[s].0,
                mirrored: meta[s].1,
                d1: w[1][s],
                d2: w[2][s],
            });
            rows.push(row);
        }
        Ok(Self { rows })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    #[inline]
    fn sign(e: &Entry, parity: Parity) -> f64 {
        if e.mirrored && parity == Parity::Odd {
            -1.0
        } else {
            1.0
        }
    }

    /// First and second derivative of `field` at sample `i`.
    #[inline]
    pub fn apply_at(&self, field: &[f64], parity: Parity, i: usize) -> (f64, f64) {
        let mut d1 = 0.0;
        let mut d2 = 0.0;
        for e in &self.rows[i] {
            let v = Self::sign(e, parity) * field[e.col];
            d1 += e.d1 * v;
            d2 += e.d2 * v;
        }
        (d1, d2)
    }

    pub fn apply(&self, field: &[f64], parity: Parity) -> (Vec<f64>, Vec<f64>) {
        (0..self.rows.len()).map(|i| self.apply_at(field, parity, i)).unzip()
    }

    /// `out += D1ᵀ x`, the transpose of the first-derivative operator.
    pub fn add_transpose_d1(&self, x: &[f64], parity: Parity, out: &mut [f64]) {
        for (i, row) in self.rows.iter().enumerate() {
            for e in row {
                out[e.col] += Self::sign(e, parity) * e.d1 * x[i];
            }
        }
    }
}

/// Lagrange interpolation through `(nodes, values)` evaluated at `x`.
pub fn interpolate(nodes: &[f64], values: &[f64], x: f64) -> Result<f64, StencilError> {
    let w = fd_weights(x, nodes, 0)?;
    Ok(w[0].iter().zip(values).map(|(a, b)| a * b).sum())
}
