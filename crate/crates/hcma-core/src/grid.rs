//! Uniform grids on the torus cylinder M × [0, 1] and their difference operators.
//!
//! M = (C/Z²)ⁿ carries real coordinates (x₁, y₁, …, x_n, y_n), each axis with
//! N nodes and spacing h = 1/N (periodic).  Time has Nt levels t_k = k·τ,
//! τ = 1/(Nt − 1), endpoints included (non-periodic).
//!
//! Complex derivatives follow ∂_z = (∂_x − i ∂_y)/2, ∂_z̄ = (∂_x + i ∂_y)/2,
//! so the Laplacian associated with the flat Kähler structure is
//! Δ = Σ_j ∂_{z_j} ∂_{z̄_j} = ¼ Σ_j (∂²_{x_j} + ∂²_{y_j}).
//!
//! Layout conventions (shared with the checkpoint format):
//! * spatial fields are C-ordered over axes [x₁, y₁, x₂, y₂] with the last
//!   axis fastest; length N^{2n};
//! * space-time fields are t-major: index = level·N^{2n} + node.
//!
//! All stencils are second-order centered.  The symmetric forms
//! `(next + prev) − 2·cur` are used so that time reversal of a field reverses
//! first differences bit-for-bit and fixes second differences bit-for-bit.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::CoreError;
use crate::Result;

/// Scalar types the stencil sweeps operate on (f64 and Complex64).
pub trait FieldScalar:
    Copy
    + Default
    + std::ops::Add<Output = Self>
    + std::ops::Sub<Output = Self>
    + std::ops::Mul<f64, Output = Self>
    + Send
    + Sync
{
}
impl FieldScalar for f64 {}
impl FieldScalar for Complex64 {}

/// Derivative selector for the generic dispatcher.  Axis-bearing variants take
/// the complex coordinate index j ∈ [0, n).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DerivativeKind {
    Dx(usize),
    Dy(usize),
    Dz(usize),
    Dzbar(usize),
    Lap,
    Dt,
    Dtt,
}

/// Discretization of the torus cylinder.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TorusGrid {
    n: usize,
    nodes: usize,
    time_levels: usize,
}

impl TorusGrid {
    /// Requires n ∈ {1, 2}, N ≥ 8 and Nt ≥ 5.
    pub fn new(n: usize, nodes_per_axis: usize, time_levels: usize) -> Result<Self> {
        if !(n == 1 || n == 2) {
            return Err(CoreError::InvalidParameter(format!(
                "complex dimension must be 1 or 2, got {n}"
            )));
        }
        if nodes_per_axis < 8 {
            return Err(CoreError::InvalidParameter(format!(
                "need at least 8 nodes per axis, got {nodes_per_axis}"
            )));
        }
        if time_levels < 5 {
            return Err(CoreError::InvalidParameter(format!(
                "need at least 5 time levels, got {time_levels}"
            )));
        }
        Ok(Self {
            n,
            nodes: nodes_per_axis,
            time_levels,
        })
    }

    pub fn complex_dim(&self) -> usize {
        self.n
    }

    /// Number of real spatial axes (2n).
    pub fn axes(&self) -> usize {
        2 * self.n
    }

    pub fn nodes_per_axis(&self) -> usize {
        self.nodes
    }

    pub fn time_levels(&self) -> usize {
        self.time_levels
    }

    pub fn spacing(&self) -> f64 {
        1.0 / self.nodes as f64
    }

    pub fn time_step(&self) -> f64 {
        1.0 / (self.time_levels - 1) as f64
    }

    pub fn time_of(&self, level: usize) -> f64 {
        level as f64 * self.time_step()
    }

    /// Number of spatial nodes N^{2n}.
    pub fn spatial_len(&self) -> usize {
        self.nodes.pow(self.axes() as u32)
    }

    pub fn spacetime_len(&self) -> usize {
        self.spatial_len() * self.time_levels
    }

    /// C-order stride of a real axis (axis 2j = x_{j+1}, axis 2j+1 = y_{j+1}).
    pub fn stride(&self, axis: usize) -> usize {
        self.nodes.pow((self.axes() - 1 - axis) as u32)
    }

    pub fn node_index(&self, coords: &[usize]) -> usize {
        debug_assert_eq!(coords.len(), self.axes());
        coords.iter().fold(0, |acc, &c| acc * self.nodes + c)
    }

    pub fn node_coords(&self, mut idx: usize) -> Vec<usize> {
        let mut coords = vec![0; self.axes()];
        for a in (0..self.axes()).rev() {
            coords[a] = idx % self.nodes;
            idx /= self.nodes;
        }
        coords
    }

    pub fn st_index(&self, level: usize, node: usize) -> usize {
        level * self.spatial_len() + node
    }

    /// Position of a node along one axis, in [0, 1).
    pub fn axis_coord(&self, c: usize) -> f64 {
        c as f64 * self.spacing()
    }

    fn check_spatial_blocks(&self, len: usize) -> Result<usize> {
        let ns = self.spatial_len();
        if len == 0 || len % ns != 0 || len / ns > self.time_levels {
            return Err(CoreError::DimensionMismatch {
                expected: ns,
                got: len,
            });
        }
        Ok(len / ns)
    }

    /// Centered first difference along a real axis, scaled by 1/(2h).
    /// Works on spatial fields or levelwise on space-time fields.
    pub fn diff1_axis<T: FieldScalar>(&self, field: &[T], axis: usize) -> Result<Vec<T>> {
        let blocks = self.check_spatial_blocks(field.len())?;
        let scale = 1.0 / (2.0 * self.spacing());
        let mut out = vec![T::default(); field.len()];
        for b in 0..blocks {
            let base = b * self.spatial_len();
            self.sweep_axis(&field[base..base + self.spatial_len()], axis, |up, dn| {
                (up - dn) * scale
            })
            .into_iter()
            .zip(out[base..base + self.spatial_len()].iter_mut())
            .for_each(|(v, o)| *o = v);
        }
        Ok(out)
    }

    /// Centered second difference along a real axis, scaled by 1/h².
    pub fn diff2_axis<T: FieldScalar>(&self, field: &[T], axis: usize) -> Result<Vec<T>> {
        let blocks = self.check_spatial_blocks(field.len())?;
        let scale = 1.0 / (self.spacing() * self.spacing());
        let ns = self.spatial_len();
        let mut out = vec![T::default(); field.len()];
        for b in 0..blocks {
            let base = b * ns;
            let block = &field[base..base + ns];
            let vals = self.sweep_axis2(block, axis, |up, cur, dn| {
                ((up + dn) - cur * 2.0) * scale
            });
            out[base..base + ns].copy_from_slice(&vals);
        }
        Ok(out)
    }

    /// Runs `f(up, down)` over periodic neighbors along `axis` of one spatial block.
    fn sweep_axis<T: FieldScalar>(
        &self,
        block: &[T],
        axis: usize,
        f: impl Fn(T, T) -> T,
    ) -> Vec<T> {
        let nn = self.nodes;
        let s = self.stride(axis);
        let mut out = vec![T::default(); block.len()];
        let line_span = nn * s;
        for outer in 0..block.len() / line_span {
            for inner in 0..s {
                let base = outer * line_span + inner;
                for k in 0..nn {
                    let i = base + k * s;
                    let up = if k + 1 == nn { base } else { i + s };
                    let dn = if k == 0 { base + (nn - 1) * s } else { i - s };
                    out[i] = f(block[up], block[dn]);
                }
            }
        }
        out
    }

    fn sweep_axis2<T: FieldScalar>(
        &self,
        block: &[T],
        axis: usize,
        f: impl Fn(T, T, T) -> T,
    ) -> Vec<T> {
        let nn = self.nodes;
        let s = self.stride(axis);
        let mut out = vec![T::default(); block.len()];
        let line_span = nn * s;
        for outer in 0..block.len() / line_span {
            for inner in 0..s {
                let base = outer * line_span + inner;
                for k in 0..nn {
                    let i = base + k * s;
                    let up = if k + 1 == nn { base } else { i + s };
                    let dn = if k == 0 { base + (nn - 1) * s } else { i - s };
                    out[i] = f(block[up], block[i], block[dn]);
                }
            }
        }
        out
    }

    /// ∂_{x_j}, j the complex coordinate index.
    pub fn dx<T: FieldScalar>(&self, field: &[T], j: usize) -> Result<Vec<T>> {
        self.diff1_axis(field, 2 * j)
    }

    /// ∂_{y_j}.
    pub fn dy<T: FieldScalar>(&self, field: &[T], j: usize) -> Result<Vec<T>> {
        self.diff1_axis(field, 2 * j + 1)
    }

    /// ∂_{z_j} = (∂_{x_j} − i ∂_{y_j})/2 of a real field.
    pub fn dz(&self, field: &[f64], j: usize) -> Result<Vec<Complex64>> {
        let dx = self.dx(field, j)?;
        let dy = self.dy(field, j)?;
        Ok(dx
            .into_iter()
            .zip(dy)
            .map(|(a, b)| Complex64::new(0.5 * a, -0.5 * b))
            .collect())
    }

    /// ∂_{z̄_j} = (∂_{x_j} + i ∂_{y_j})/2 of a real field.
    pub fn dzbar(&self, field: &[f64], j: usize) -> Result<Vec<Complex64>> {
        let dx = self.dx(field, j)?;
        let dy = self.dy(field, j)?;
        Ok(dx
            .into_iter()
            .zip(dy)
            .map(|(a, b)| Complex64::new(0.5 * a, 0.5 * b))
            .collect())
    }

    /// ∂_{z_j} of a complex field.
    pub fn dz_complex(&self, field: &[Complex64], j: usize) -> Result<Vec<Complex64>> {
        let dx = self.dx(field, j)?;
        let dy = self.dy(field, j)?;
        Ok(dx
            .into_iter()
            .zip(dy)
            .map(|(a, b)| (a - Complex64::i() * b) * 0.5)
            .collect())
    }

    /// ∂_{z̄_j} of a complex field.
    pub fn dzbar_complex(&self, field: &[Complex64], j: usize) -> Result<Vec<Complex64>> {
        let dx = self.dx(field, j)?;
        let dy = self.dy(field, j)?;
        Ok(dx
            .into_iter()
            .zip(dy)
            .map(|(a, b)| (a + Complex64::i() * b) * 0.5)
            .collect())
    }

    /// Δ = ¼ Σ_j (∂²_{x_j} + ∂²_{y_j}), the flat complex Laplacian.
    pub fn lap<T: FieldScalar>(&self, field: &[T]) -> Result<Vec<T>> {
        let blocks = self.check_spatial_blocks(field.len())?;
        let ns = self.spatial_len();
        let scale = 0.25 / (self.spacing() * self.spacing());
        let mut out = vec![T::default(); field.len()];
        for b in 0..blocks {
            let base = b * ns;
            let block = &field[base..base + ns];
            let dst = &mut out[base..base + ns];
            for axis in 0..self.axes() {
                let part = self.sweep_axis2(block, axis, |up, cur, dn| {
                    ((up + dn) - cur * 2.0) * scale
                });
                for (o, p) in dst.iter_mut().zip(part) {
                    *o = *o + p;
                }
            }
        }
        Ok(out)
    }

    /// Centered ∂_t on a space-time field.  Boundary levels are left zero; the
    /// derivative is only meaningful at interior levels.
    pub fn dt<T: FieldScalar>(&self, st: &[T]) -> Result<Vec<T>> {
        self.check_spacetime(st)?;
        let ns = self.spatial_len();
        let scale = 1.0 / (2.0 * self.time_step());
        let mut out = vec![T::default(); st.len()];
        for k in 1..self.time_levels - 1 {
            for i in 0..ns {
                let idx = k * ns + i;
                out[idx] = (st[idx + ns] - st[idx - ns]) * scale;
            }
        }
        Ok(out)
    }

    /// Centered ∂_tt on a space-time field, interior levels only.
    pub fn dtt<T: FieldScalar>(&self, st: &[T]) -> Result<Vec<T>> {
        self.check_spacetime(st)?;
        let ns = self.spatial_len();
        let tau = self.time_step();
        let scale = 1.0 / (tau * tau);
        let mut out = vec![T::default(); st.len()];
        for k in 1..self.time_levels - 1 {
            for i in 0..ns {
                let idx = k * ns + i;
                out[idx] = ((st[idx + ns] + st[idx - ns]) - st[idx] * 2.0) * scale;
            }
        }
        Ok(out)
    }

    fn check_spacetime<T>(&self, st: &[T]) -> Result<()> {
        if st.len() != self.spacetime_len() {
            return Err(CoreError::DimensionMismatch {
                expected: self.spacetime_len(),
                got: st.len(),
            });
        }
        Ok(())
    }

    /// Generic dispatcher over all derivative kinds.  Real-valued results are
    /// embedded into the complex field.
    pub fn apply_derivative(&self, field: &[f64], kind: DerivativeKind) -> Result<Vec<Complex64>> {
        let promote = |v: Vec<f64>| v.into_iter().map(|x| Complex64::new(x, 0.0)).collect();
        match kind {
            DerivativeKind::Dx(j) => Ok(promote(self.dx(field, j)?)),
            DerivativeKind::Dy(j) => Ok(promote(self.dy(field, j)?)),
            DerivativeKind::Dz(j) => self.dz(field, j),
            DerivativeKind::Dzbar(j) => self.dzbar(field, j),
            DerivativeKind::Lap => Ok(promote(self.lap(field)?)),
            DerivativeKind::Dt => Ok(promote(self.dt(field)?)),
            DerivativeKind::Dtt => Ok(promote(self.dtt(field)?)),
        }
    }

    /// ∫_M f ω_0ⁿ (optionally weighted): uniform quadrature with total mass 1.
    /// The reduction is a fixed-tree pairwise sum, independent of threading.
    pub fn integrate(&self, field: &[f64], weight: Option<&[f64]>) -> Result<f64> {
        let ns = self.spatial_len();
        if field.len() != ns {
            return Err(CoreError::DimensionMismatch {
                expected: ns,
                got: field.len(),
            });
        }
        let total = match weight {
            None => pairwise_sum(field),
            Some(w) => {
                if w.len() != ns {
                    return Err(CoreError::DimensionMismatch {
                        expected: ns,
                        got: w.len(),
                    });
                }
                pairwise_dot(field, w)
            }
        };
        Ok(total / ns as f64)
    }
}

const PAIRWISE_BASE: usize = 64;

/// Fixed-tree pairwise summation: deterministic for a given slice length and
/// more accurate than a running sum.
pub fn pairwise_sum(x: &[f64]) -> f64 {
    if x.len() <= PAIRWISE_BASE {
        let mut acc = 0.0;
        for &v in x {
            acc += v;
        }
        acc
    } else {
        let mid = x.len() / 2;
        pairwise_sum(&x[..mid]) + pairwise_sum(&x[mid..])
    }
}

/// Fixed-tree dot product with the same reduction shape as [`pairwise_sum`].
pub fn pairwise_dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    if a.len() <= PAIRWISE_BASE {
        let mut acc = 0.0;
        for (&x, &y) in a.iter().zip(b) {
            acc += x * y;
        }
        acc
    } else {
        let mid = a.len() / 2;
        pairwise_dot(&a[..mid], &b[..mid]) + pairwise_dot(&a[mid..], &b[mid..])
    }
}

/// Max of |x| with a fixed scan order.
pub fn sup_norm(x: &[f64]) -> f64 {
    let mut m = 0.0f64;
    for &v in x {
        let a = v.abs();
        if a > m {
            m = a;
        }
    }
    m
}
