//! Kähler potentials on the flat torus and the spaces they live in.
//!
//! A potential φ is admissible when ω_φ = ω₀ + i∂∂̄φ ≥ 0, i.e. when the
//! Hermitian matrix g_φ = I + φ_ij̄ is positive semidefinite at every node.
//! Membership tags:
//!
//! * `H`    — strictly positive: min eig(g_φ) > `TOL_STRICT` everywhere;
//! * `H11`  — semipositive with bounded n + Δφ: min eig ≥ −`TOL_POS`;
//! * `HInf` — semipositive with bounded φ; on a finite grid this coincides
//!   with `H11` (every grid function has bounded Laplacian), so `classify`
//!   never returns it, but the tag is kept for reporting completeness;
//! * `Inadmissible` — positivity fails beyond tolerance.
//!
//! The complex Hessian uses second-difference stencils on the diagonal (so
//! that trace(φ_ij̄) agrees exactly with the discrete Δφ) and composed centered
//! first differences off the diagonal (∂_{z_i} first, then ∂_{z̄_j}).

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::CoreError;
use crate::grid::TorusGrid;
use crate::Result;

/// Strict-positivity threshold for membership in ℋ.
pub const TOL_STRICT: f64 = 1e-8;
/// Semipositivity slack for membership in ℋ_{1,1}.
pub const TOL_POS: f64 = 1e-10;

/// Hermitian n×n matrix, n ≤ 2, as used for g_φ and its inverse.
/// For n = 1 only `d1` is meaningful.  `off` is the (1, 2̄) entry.
#[derive(Debug, Clone, Copy)]
pub struct Herm2 {
    pub n: usize,
    pub d1: f64,
    pub d2: f64,
    pub off: Complex64,
}

impl Herm2 {
    pub fn identity(n: usize) -> Self {
        Self {
            n,
            d1: 1.0,
            d2: 1.0,
            off: Complex64::new(0.0, 0.0),
        }
    }

    pub fn det(&self) -> f64 {
        match self.n {
            1 => self.d1,
            _ => self.d1 * self.d2 - self.off.norm_sqr(),
        }
    }

    pub fn trace(&self) -> f64 {
        match self.n {
            1 => self.d1,
            _ => self.d1 + self.d2,
        }
    }

    pub fn min_eig(&self) -> f64 {
        match self.n {
            1 => self.d1,
            _ => {
                let m = 0.5 * (self.d1 + self.d2);
                let q = 0.5 * (self.d1 - self.d2);
                m - (q * q + self.off.norm_sqr()).sqrt()
            }
        }
    }

    pub fn max_eig(&self) -> f64 {
        match self.n {
            1 => self.d1,
            _ => {
                let m = 0.5 * (self.d1 + self.d2);
                let q = 0.5 * (self.d1 - self.d2);
                m + (q * q + self.off.norm_sqr()).sqrt()
            }
        }
    }

    /// Closed-form inverse; caller guarantees det ≠ 0.
    pub fn inverse(&self) -> Self {
        match self.n {
            1 => Self {
                n: 1,
                d1: 1.0 / self.d1,
                d2: 0.0,
                off: Complex64::new(0.0, 0.0),
            },
            _ => {
                let det = self.det();
                Self {
                    n: 2,
                    d1: self.d2 / det,
                    d2: self.d1 / det,
                    off: -self.off / det,
                }
            }
        }
    }

    /// Matrix-vector product (only the first n slots are used).
    pub fn apply(&self, v: [Complex64; 2]) -> [Complex64; 2] {
        match self.n {
            1 => [v[0] * self.d1, Complex64::new(0.0, 0.0)],
            _ => [
                v[0] * self.d1 + self.off * v[1],
                self.off.conj() * v[0] + v[1] * self.d2,
            ],
        }
    }

    /// Hermitian form ⟨ψ, Mψ⟩ = Σ_{ij} ψ̄_i M_{ij̄} ψ_j (real by symmetry).
    /// With M = g^{-1} this is the metric norm |ψ|²_g of a (1,0)-form ψ.
    pub fn dagger_form(&self, v: [Complex64; 2]) -> f64 {
        match self.n {
            1 => self.d1 * v[0].norm_sqr(),
            _ => {
                self.d1 * v[0].norm_sqr()
                    + self.d2 * v[1].norm_sqr()
                    + 2.0 * (self.off * v[0].conj() * v[1]).re
            }
        }
    }

    /// Entry M_{ij̄} by index.
    pub fn entry(&self, i: usize, j: usize) -> Complex64 {
        match (i, j) {
            (0, 0) => Complex64::new(self.d1, 0.0),
            (1, 1) => Complex64::new(self.d2, 0.0),
            (0, 1) => self.off,
            (1, 0) => self.off.conj(),
            _ => unreachable!(),
        }
    }

    /// Eigenvalues ascending and a unitary whose columns are eigenvectors
    /// (u[c] is column c).  For n = 1 this is trivial.
    pub fn eig(&self) -> ([f64; 2], [[Complex64; 2]; 2]) {
        if self.n == 1 {
            return (
                [self.d1, 0.0],
                [
                    [Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)],
                    [Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)],
                ],
            );
        }
        let m = 0.5 * (self.d1 + self.d2);
        let q = 0.5 * (self.d1 - self.d2);
        let r = (q * q + self.off.norm_sqr()).sqrt();
        let (lo, hi) = (m - r, m + r);
        if self.off.norm_sqr() < 1e-30 * (1.0 + m * m) {
            // Already diagonal; keep coordinate order sorted by eigenvalue.
            let e1 = Complex64::new(1.0, 0.0);
            let e0 = Complex64::new(0.0, 0.0);
            return if self.d1 <= self.d2 {
                ([self.d1, self.d2], [[e1, e0], [e0, e1]])
            } else {
                ([self.d2, self.d1], [[e0, e1], [e1, e0]])
            };
        }
        // Eigenvector for λ: (off, λ − d1), normalized.
        let mut cols = [[Complex64::new(0.0, 0.0); 2]; 2];
        for (c, lam) in [lo, hi].into_iter().enumerate() {
            let v0 = self.off;
            let v1 = Complex64::new(lam - self.d1, 0.0);
            let norm = (v0.norm_sqr() + v1.norm_sqr()).sqrt();
            cols[c] = [v0 / norm, v1 / norm];
        }
        ([lo, hi], cols)
    }
}

/// Field of Hermitian matrices g + φ_ij̄ over one or more spatial blocks.
#[derive(Debug, Clone)]
pub struct MetricField {
    n: usize,
    d1: Vec<f64>,
    d2: Vec<f64>,
    off: Vec<Complex64>,
}

impl MetricField {
    /// Computes I + φ_ij̄ for a spatial field or levelwise for a space-time
    /// field (any length that is a whole number of spatial blocks).
    pub fn compute(grid: &TorusGrid, values: &[f64]) -> Result<Self> {
        Self::with_shift(grid, values, 1.0)
    }

    /// The bare complex Hessian φ_ij̄ (no background identity added).
    pub fn hessian(grid: &TorusGrid, values: &[f64]) -> Result<Self> {
        Self::with_shift(grid, values, 0.0)
    }

    fn with_shift(grid: &TorusGrid, values: &[f64], shift: f64) -> Result<Self> {
        let n = grid.complex_dim();
        let hxx = grid.diff2_axis(values, 0)?;
        let hyy = grid.diff2_axis(values, 1)?;
        let d1: Vec<f64> = hxx
            .iter()
            .zip(&hyy)
            .map(|(&a, &b)| shift + 0.25 * (a + b))
            .collect();
        if n == 1 {
            return Ok(Self {
                n,
                d1,
                d2: Vec::new(),
                off: Vec::new(),
            });
        }
        let hxx2 = grid.diff2_axis(values, 2)?;
        let hyy2 = grid.diff2_axis(values, 3)?;
        let d2: Vec<f64> = hxx2
            .iter()
            .zip(&hyy2)
            .map(|(&a, &b)| shift + 0.25 * (a + b))
            .collect();
        let dz1 = grid.dz(values, 0)?;
        let off = grid.dzbar_complex(&dz1, 1)?;
        Ok(Self { n, d1, d2, off })
    }

    pub fn len(&self) -> usize {
        self.d1.len()
    }

    pub fn is_empty(&self) -> bool {
        self.d1.is_empty()
    }

    pub fn at(&self, i: usize) -> Herm2 {
        if self.n == 1 {
            Herm2 {
                n: 1,
                d1: self.d1[i],
                d2: 0.0,
                off: Complex64::new(0.0, 0.0),
            }
        } else {
            Herm2 {
                n: 2,
                d1: self.d1[i],
                d2: self.d2[i],
                off: self.off[i],
            }
        }
    }

    pub fn min_eig_field(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.at(i).min_eig()).collect()
    }

    pub fn det_field(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.at(i).det()).collect()
    }
}

/// Membership tags for the nested spaces ℋ ⊂ ℋ_{1,1} ⊂ ℋ_∞.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpaceTag {
    H,
    H11,
    HInf,
    Inadmissible,
}

/// Classification result with the witness values behind the tag.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpaceMembership {
    pub tag: SpaceTag,
    /// inf over nodes of min eig(g + φ_ij̄).
    pub min_metric_eig: f64,
    /// Node realizing the minimum (first in scan order on ties).
    pub argmin_node: usize,
    /// sup (n + Δφ).
    pub sup_trace: f64,
    pub sup_abs: f64,
    /// sup |∇φ| in the background metric.
    pub sup_grad: f64,
}

/// A potential φ: M → R sampled on the spatial grid.
#[derive(Debug, Clone)]
pub struct KahlerPotential {
    grid: TorusGrid,
    values: Vec<f64>,
}

impl KahlerPotential {
    pub fn new(grid: TorusGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.spatial_len() {
            return Err(CoreError::DimensionMismatch {
                expected: grid.spatial_len(),
                got: values.len(),
            });
        }
        Ok(Self { grid, values })
    }

    pub fn zero(grid: TorusGrid) -> Self {
        let len = grid.spatial_len();
        Self {
            grid,
            values: vec![0.0; len],
        }
    }

    pub fn constant(grid: TorusGrid, value: f64) -> Self {
        let len = grid.spatial_len();
        Self {
            grid,
            values: vec![value; len],
        }
    }

    pub fn grid(&self) -> &TorusGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn metric(&self) -> MetricField {
        MetricField::compute(&self.grid, &self.values).expect("length validated at construction")
    }

    /// n + Δφ as a field.
    pub fn trace_field(&self) -> Vec<f64> {
        let n = self.grid.complex_dim() as f64;
        self.grid
            .lap(&self.values)
            .expect("length validated at construction")
            .into_iter()
            .map(|v| n + v)
            .collect()
    }

    /// |∇φ|² = Σ_j |∂_{z_j}φ|² in the background metric, as a field.
    pub fn grad_sq_field(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.values.len()];
        for j in 0..self.grid.complex_dim() {
            let d = self.grid.dz(&self.values, j).expect("validated");
            for (o, v) in out.iter_mut().zip(d) {
                *o += v.norm_sqr();
            }
        }
        out
    }

    /// Tags the potential and records the witnesses.
    pub fn classify(&self) -> SpaceMembership {
        let metric = self.metric();
        let mut min_eig = f64::INFINITY;
        let mut argmin = 0;
        for i in 0..metric.len() {
            let e = metric.at(i).min_eig();
            if e < min_eig {
                min_eig = e;
                argmin = i;
            }
        }
        let sup_trace = self
            .trace_field()
            .into_iter()
            .fold(f64::NEG_INFINITY, f64::max);
        let sup_abs = self.values.iter().fold(0.0f64, |m, &v| m.max(v.abs()));
        let sup_grad = self
            .grad_sq_field()
            .into_iter()
            .fold(0.0f64, f64::max)
            .sqrt();
        let tag = if min_eig > TOL_STRICT {
            SpaceTag::H
        } else if min_eig >= -TOL_POS {
            SpaceTag::H11
        } else {
            SpaceTag::Inadmissible
        };
        SpaceMembership {
            tag,
            min_metric_eig: min_eig,
            argmin_node: argmin,
            sup_trace,
            sup_abs,
            sup_grad,
        }
    }

    /// (1 − δ)φ for δ ∈ (0, 1].  Nodewise, eig(g + (1−δ)φ_ij̄) =
    /// δ + (1−δ)·eig(g + φ_ij̄), so semipositive inputs become strictly
    /// positive with margin ≥ δ.
    pub fn smooth_approx(&self, delta: f64) -> Result<Self> {
        if !(delta > 0.0 && delta <= 1.0) {
            return Err(CoreError::InvalidParameter(format!(
                "smoothing δ must lie in (0, 1], got {delta}"
            )));
        }
        let values = self.values.iter().map(|&v| (1.0 - delta) * v).collect();
        Ok(Self {
            grid: self.grid,
            values,
        })
    }

    /// a·cos(2π m·x) with the amplitude calibrated against the *discrete*
    /// Hessian so that inf eig(g + φ_ij̄) equals exactly 1 − fraction.
    /// `mode` has one integer per real axis and must be nonzero.
    pub fn make_degenerate_endpoint(grid: TorusGrid, fraction: f64, mode: &[i32]) -> Result<Self> {
        if !(fraction > 0.0 && fraction <= 1.0) {
            return Err(CoreError::InvalidParameter(format!(
                "amplitude fraction must lie in (0, 1], got {fraction}"
            )));
        }
        if mode.len() != grid.axes() {
            return Err(CoreError::DimensionMismatch {
                expected: grid.axes(),
                got: mode.len(),
            });
        }
        if mode.iter().all(|&m| m == 0) {
            return Err(CoreError::InvalidParameter(
                "mode vector must be nonzero".into(),
            ));
        }
        let unit: Vec<f64> = (0..grid.spatial_len())
            .map(|i| {
                let c = grid.node_coords(i);
                let phase: f64 = c
                    .iter()
                    .zip(mode)
                    .map(|(&ci, &mi)| {
                        2.0 * std::f64::consts::PI * mi as f64 * grid.axis_coord(ci)
                    })
                    .sum();
                phase.cos()
            })
            .collect();
        // eig(I + a·Φ) = 1 + a·eig(Φ): calibrate a against ν = inf min-eig(Φ).
        let metric = MetricField::compute(&grid, &unit)?;
        let mut nu = f64::INFINITY;
        for i in 0..metric.len() {
            nu = nu.min(metric.at(i).min_eig() - 1.0);
        }
        if nu >= 0.0 {
            return Err(CoreError::InvalidParameter(
                "mode produces no negative curvature direction".into(),
            ));
        }
        let a = -fraction / nu;
        let values = unit.into_iter().map(|v| a * v).collect();
        Ok(Self { grid, values })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn grid1() -> TorusGrid {
        TorusGrid::new(1, 64, 5).unwrap()
    }

    #[test]
    fn zero_potential_is_strictly_positive() {
        let m = KahlerPotential::zero(grid1()).classify();
        assert_eq!(m.tag, SpaceTag::H);
        assert_abs_diff_eq!(m.min_metric_eig, 1.0);
        assert_abs_diff_eq!(m.sup_trace, 1.0);
    }

    #[test]
    fn calibrated_cosine_is_exactly_semipositive() {
        let phi = KahlerPotential::make_degenerate_endpoint(grid1(), 1.0, &[1, 0]).unwrap();
        let m = phi.classify();
        assert_eq!(m.tag, SpaceTag::H11);
        assert!(m.min_metric_eig.abs() <= TOL_POS, "min {}", m.min_metric_eig);
        // The degeneracy sits at x₁ = 0.
        assert_eq!(m.argmin_node, 0);
        // Amplitude approaches 1/π² from above as N grows.
        let amp = phi.values()[0];
        assert!((amp - 1.0 / (std::f64::consts::PI.powi(2))).abs() < 1e-3);
        // sup(n + Δφ) = 2 − min adjustment: trace ranges symmetrically.
        assert_abs_diff_eq!(m.sup_trace, 2.0, epsilon = 1e-12);
    }

    #[test]
    fn doubled_amplitude_is_inadmissible() {
        let phi = KahlerPotential::make_degenerate_endpoint(grid1(), 1.0, &[1, 0]).unwrap();
        let doubled =
            KahlerPotential::new(grid1(), phi.values().iter().map(|&v| 2.0 * v).collect())
                .unwrap();
        let m = doubled.classify();
        assert_eq!(m.tag, SpaceTag::Inadmissible);
        assert_abs_diff_eq!(m.min_metric_eig, -1.0, epsilon = 1e-12);
    }

    #[test]
    fn smoothing_is_linear_shift_of_eigenvalues() {
        let phi = KahlerPotential::make_degenerate_endpoint(grid1(), 1.0, &[1, 0]).unwrap();
        for delta in [0.5, 0.01] {
            let sm = phi.smooth_approx(delta).unwrap();
            let m = sm.classify();
            assert_eq!(m.tag, SpaceTag::H);
            assert_abs_diff_eq!(m.min_metric_eig, delta, epsilon = 1e-12);
        }
        let zeroed = phi.smooth_approx(1.0).unwrap();
        assert!(zeroed.values().iter().all(|&v| v == 0.0));
        assert!(phi.smooth_approx(0.0).is_err());
        assert!(phi.smooth_approx(1.5).is_err());
    }

    #[test]
    fn smoothing_sup_distance_is_delta_times_sup() {
        let phi = KahlerPotential::make_degenerate_endpoint(grid1(), 1.0, &[1, 0]).unwrap();
        let delta = 0.3;
        let sm = phi.smooth_approx(delta).unwrap();
        let sup_phi = phi.values().iter().fold(0.0f64, |m, &v| m.max(v.abs()));
        let dist = phi
            .values()
            .iter()
            .zip(sm.values())
            .fold(0.0f64, |m, (&a, &b)| m.max((a - b).abs()));
        assert_abs_diff_eq!(dist, delta * sup_phi, epsilon = 1e-14);
    }

    #[test]
    fn exact_min_eig_identity_under_smoothing() {
        // min-eig(smooth δ) = δ + (1−δ)·min-eig(φ) nodewise, exactly.
        let grid = TorusGrid::new(2, 8, 5).unwrap();
        let phi = KahlerPotential::make_degenerate_endpoint(grid, 0.8, &[1, 0, 2, 1]).unwrap();
        let delta = 0.25;
        let sm = phi.smooth_approx(delta).unwrap();
        let m0 = phi.metric();
        let m1 = sm.metric();
        for i in (0..m0.len()).step_by(37) {
            let expect = delta + (1.0 - delta) * m0.at(i).min_eig();
            assert_abs_diff_eq!(m1.at(i).min_eig(), expect, epsilon = 1e-12);
        }
    }

    #[test]
    fn n2_single_axis_mode_degenerates_one_eigenvalue() {
        let grid = TorusGrid::new(2, 8, 5).unwrap();
        let phi = KahlerPotential::make_degenerate_endpoint(grid, 1.0, &[1, 0, 0, 0]).unwrap();
        let m = phi.classify();
        assert_eq!(m.tag, SpaceTag::H11);
        assert!(m.min_metric_eig.abs() <= TOL_POS);
        // The untouched complex direction keeps eigenvalue 1 exactly.
        let metric = phi.metric();
        for i in 0..metric.len() {
            let h = metric.at(i);
            assert_abs_diff_eq!(h.d2, 1.0, epsilon = 1e-14);
            assert_abs_diff_eq!(h.off.norm(), 0.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn herm2_eig_reconstructs_matrix() {
        let h = Herm2 {
            n: 2,
            d1: 1.3,
            d2: 0.4,
            off: Complex64::new(0.2, -0.5),
        };
        let (lam, u) = h.eig();
        // Columns are orthonormal eigenvectors.
        for c in 0..2 {
            let v = [u[c][0], u[c][1]];
            let hv = h.apply(v);
            for r in 0..2 {
                assert_abs_diff_eq!((hv[r] - v[r] * lam[c]).norm(), 0.0, epsilon = 1e-12);
            }
        }
        let dot = u[0][0] * u[1][0].conj() + u[0][1] * u[1][1].conj();
        assert_abs_diff_eq!(dot.norm(), 0.0, epsilon = 1e-12);
        assert!(lam[0] <= lam[1]);
        assert_abs_diff_eq!(lam[0] * lam[1], h.det(), epsilon = 1e-12);
    }

    #[test]
    fn mode_validation() {
        assert!(KahlerPotential::make_degenerate_endpoint(grid1(), 1.0, &[0, 0]).is_err());
        assert!(KahlerPotential::make_degenerate_endpoint(grid1(), 0.0, &[1, 0]).is_err());
        assert!(KahlerPotential::make_degenerate_endpoint(grid1(), 1.0, &[1, 0, 0, 0]).is_err());
    }
}
