//! The ε-regularized geodesic equation and its exact discrete linearization.
//!
//! On the flat torus the equation for a path φ(t, x) with fixed endpoints is
//!
//!   (φ_tt − |∇φ_t|²_φ) · det(g + φ_ij̄) = ε e^f,
//!
//! which we solve in residual form
//!
//!   F(φ) = log c + log det(g_φ) − log ε − f,     c = φ_tt − |∇φ_t|²_φ,
//!
//! where |∇ψ|²_φ = Σ g_φ^{ij̄} ψ_i ψ_j̄.  F is well defined while the path is
//! feasible: g_φ > 0 and c > 0 at every interior space-time node.
//!
//! The linearization DF is the *derivative of the discrete residual*: every
//! stencil is linear, so differentiating the discrete formulas in the
//! perturbation h gives, at each interior node,
//!
//!   DF·h = tr(g_φ^{-1} H) + [ h_tt + Σ H_{pq̄} a_p a̅_q − 2Re Σ g^{ij̄} u_i v̅_j ] / c,
//!
//! with H the complex Hessian of h (same stencils as the metric), u_i = h_ti,
//! v_i = φ_ti and a_p = Σ_i v_i g^{ip̄} the velocity with its index raised.
//! Finite-difference checks of DF therefore converge at second order in the
//! step with no spatial consistency error.

use num_complex::Complex64;
use serde::Serialize;

use crate::error::CoreError;
use crate::grid::TorusGrid;
use crate::path::GeodesicPath;
use crate::potential::{Herm2, MetricField};
use crate::Result;

/// Density exponent f in the right-hand side ε e^f.
#[derive(Debug, Clone)]
pub enum DensityField {
    Zero,
    /// One value per spatial node, constant in time.
    Spatial(Vec<f64>),
    /// One value per space-time node, t-major.
    SpaceTime(Vec<f64>),
}

/// Problem data: grid, regularization ε and density f, with the density
/// statistics used by the a-priori estimates cached up front.
#[derive(Debug, Clone)]
pub struct HcmaProblem {
    grid: TorusGrid,
    epsilon: f64,
    density: DensityField,
    sup_f: f64,
    inf_f: f64,
    inf_lap_f: f64,
}

impl HcmaProblem {
    /// ε ≥ 0 is accepted here so that geometry-only uses can carry ε = 0;
    /// residual evaluation and solving require ε > 0.
    pub fn new(grid: TorusGrid, epsilon: f64, density: DensityField) -> Result<Self> {
        if !epsilon.is_finite() || epsilon < 0.0 {
            return Err(CoreError::InvalidParameter(format!(
                "regularization ε must be a nonnegative finite number, got {epsilon}"
            )));
        }
        let (sup_f, inf_f, inf_lap_f) = match &density {
            DensityField::Zero => (0.0, 0.0, 0.0),
            DensityField::Spatial(v) => {
                if v.len() != grid.spatial_len() {
                    return Err(CoreError::DimensionMismatch {
                        expected: grid.spatial_len(),
                        got: v.len(),
                    });
                }
                density_stats(&grid, v)?
            }
            DensityField::SpaceTime(v) => {
                if v.len() != grid.spacetime_len() {
                    return Err(CoreError::DimensionMismatch {
                        expected: grid.spacetime_len(),
                        got: v.len(),
                    });
                }
                density_stats(&grid, v)?
            }
        };
        Ok(Self {
            grid,
            epsilon,
            density,
            sup_f,
            inf_f,
            inf_lap_f,
        })
    }

    pub fn grid(&self) -> &TorusGrid {
        &self.grid
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// Same problem at a different regularization level.
    pub fn with_epsilon(&self, epsilon: f64) -> Result<Self> {
        Self::new(self.grid, epsilon, self.density.clone())
    }

    pub fn density(&self) -> &DensityField {
        &self.density
    }

    pub fn sup_f(&self) -> f64 {
        self.sup_f
    }

    pub fn inf_f(&self) -> f64 {
        self.inf_f
    }

    pub fn inf_lap_f(&self) -> f64 {
        self.inf_lap_f
    }

    /// f at (time level, spatial node).
    pub fn f_at(&self, level: usize, node: usize) -> f64 {
        match &self.density {
            DensityField::Zero => 0.0,
            DensityField::Spatial(v) => v[node],
            DensityField::SpaceTime(v) => v[level * self.grid.spatial_len() + node],
        }
    }

    /// Δf at (level, node); zero for the constant density.
    pub fn lap_f(&self) -> Result<Vec<f64>> {
        let len = self.grid.spacetime_len();
        match &self.density {
            DensityField::Zero => Ok(vec![0.0; len]),
            DensityField::Spatial(v) => {
                let per_level = self.grid.lap(v)?;
                let ns = self.grid.spatial_len();
                let mut out = vec![0.0; len];
                for k in 0..self.grid.time_levels() {
                    out[k * ns..(k + 1) * ns].copy_from_slice(&per_level);
                }
                Ok(out)
            }
            DensityField::SpaceTime(v) => self.grid.lap(v),
        }
    }

    /// Residual field F(φ); zero on the boundary levels.
    pub fn residual(&self, state: &PathState) -> Result<Vec<f64>> {
        if self.epsilon <= 0.0 {
            return Err(CoreError::InvalidParameter(
                "residual evaluation requires ε > 0".into(),
            ));
        }
        state.ensure_feasible()?;
        let ns = self.grid.spatial_len();
        let nt = self.grid.time_levels();
        let log_eps = self.epsilon.ln();
        let mut out = vec![0.0; self.grid.spacetime_len()];
        for k in 1..nt - 1 {
            for i in 0..ns {
                let idx = k * ns + i;
                out[idx] =
                    state.c[idx].ln() + state.det[idx].ln() - log_eps - self.f_at(k, i);
            }
        }
        Ok(out)
    }

    /// Exact linearization DF·h.  `h` is a full space-time field (boundary
    /// levels participate through the stencils); the output vanishes on the
    /// boundary levels.
    pub fn apply_linearization(&self, state: &PathState, h: &[f64]) -> Result<Vec<f64>> {
        state.ensure_feasible()?;
        if h.len() != self.grid.spacetime_len() {
            return Err(CoreError::DimensionMismatch {
                expected: self.grid.spacetime_len(),
                got: h.len(),
            });
        }
        let grid = &self.grid;
        let ns = grid.spatial_len();
        let nt = grid.time_levels();
        let hess = MetricField::hessian(grid, h)?;
        let htt = grid.dtt(h)?;
        let u = time_derivative_of_gradient(grid, h)?;
        let mut out = vec![0.0; h.len()];
        for k in 1..nt - 1 {
            for i in 0..ns {
                let idx = k * ns + i;
                let inv = state.inv[idx];
                let hh = hess.at(idx);
                let trace = herm_dot(inv, hh);
                // w = g^{-1}v; δc = h_tt + w†Hw − 2Re(w†u).
                let w = inv.apply(state.v[idx]);
                let cross = (w[0].conj() * u[0][idx] + w[1].conj() * u[1][idx]).re;
                out[idx] =
                    trace + (htt[idx] + hh.dagger_form(w) - 2.0 * cross) / state.c[idx];
            }
        }
        Ok(out)
    }

    /// Δ_φ h = tr(g_φ^{-1} H(h)) at interior nodes (the spatial part of DF).
    pub fn metric_laplacian(&self, state: &PathState, h: &[f64]) -> Result<Vec<f64>> {
        state.ensure_feasible()?;
        let grid = &self.grid;
        let ns = grid.spatial_len();
        let nt = grid.time_levels();
        let hess = MetricField::hessian(grid, h)?;
        let mut out = vec![0.0; h.len()];
        for idx in ns..(nt - 1) * ns {
            out[idx] = herm_dot(state.inv[idx], hess.at(idx));
        }
        Ok(out)
    }

    /// Centered finite-difference probe of the linearization:
    /// sup over interior nodes of |[F(φ+sh) − F(φ−sh)]/(2s) − DF·h|
    /// for each step s.  The error is O(s²) because DF is the exact
    /// derivative of the discrete residual.
    pub fn fd_check_linearization(
        &self,
        path: &GeodesicPath,
        h: &[f64],
        steps: &[f64],
    ) -> Result<Vec<FdCheckRow>> {
        let base = PathState::compute(&self.grid, path.values())?;
        let dh = self.apply_linearization(&base, h)?;
        let sup_direction = crate::grid::sup_norm(&dh);
        let mut rows = Vec::with_capacity(steps.len());
        for &s in steps {
            if s <= 0.0 {
                return Err(CoreError::InvalidParameter(format!(
                    "finite-difference step must be positive, got {s}"
                )));
            }
            let mut plus = path.values().to_vec();
            let mut minus = path.values().to_vec();
            for (i, &hv) in h.iter().enumerate() {
                plus[i] += s * hv;
                minus[i] -= s * hv;
            }
            let rp = self.residual(&PathState::compute(&self.grid, &plus)?)?;
            let rm = self.residual(&PathState::compute(&self.grid, &minus)?)?;
            let mut sup = 0.0f64;
            for i in 0..dh.len() {
                let fd = (rp[i] - rm[i]) / (2.0 * s);
                sup = sup.max((fd - dh[i]).abs());
            }
            rows.push(FdCheckRow {
                step: s,
                sup_error: sup,
                sup_direction,
            });
        }
        Ok(rows)
    }
}

fn density_stats(grid: &TorusGrid, v: &[f64]) -> Result<(f64, f64, f64)> {
    if v.iter().any(|x| !x.is_finite()) {
        return Err(CoreError::InvalidParameter(
            "density field contains non-finite values".into(),
        ));
    }
    let sup = v.iter().fold(f64::NEG_INFINITY, |m, &x| m.max(x));
    let inf = v.iter().fold(f64::INFINITY, |m, &x| m.min(x));
    let lap = grid.lap(v)?;
    let inf_lap = lap.iter().fold(f64::INFINITY, |m, &x| m.min(x));
    Ok((sup, inf, inf_lap))
}

/// tr(A·B) = Σ_{ij} A_{ij̄} conj(B_{ij̄}) for Hermitian A, B (real).
pub fn herm_dot(a: Herm2, b: Herm2) -> f64 {
    match a.n {
        1 => a.d1 * b.d1,
        _ => a.d1 * b.d1 + a.d2 * b.d2 + 2.0 * (a.off * b.off.conj()).re,
    }
}

/// u_j = ∂_t ∂_{z_j} field, spatial stencil first, then the centered time
/// stencil in the (next − prev)/(2τ) form.  Both gradient components are
/// returned (the second is zero for n = 1).
fn time_derivative_of_gradient(grid: &TorusGrid, values: &[f64]) -> Result<[Vec<Complex64>; 2]> {
    let ns = grid.spatial_len();
    let nt = grid.time_levels();
    let inv_2tau = 0.5 / grid.time_step();
    let mut out = [
        vec![Complex64::new(0.0, 0.0); values.len()],
        vec![Complex64::new(0.0, 0.0); values.len()],
    ];
    for j in 0..grid.complex_dim() {
        let dz = grid.dz(values, j)?;
        for k in 1..nt - 1 {
            for i in 0..ns {
                let idx = k * ns + i;
                out[j][idx] = (dz[idx + ns] - dz[idx - ns]) * inv_2tau;
            }
        }
    }
    Ok(out)
}

/// One row of a finite-difference linearization probe.  `sup_direction` is
/// sup|DF·h|, the scale against which `sup_error` is relative.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct FdCheckRow {
    pub step: f64,
    pub sup_error: f64,
    pub sup_direction: f64,
}

/// Feasibility summary of a path state.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct Feasibility {
    pub min_metric_eig: f64,
    pub min_c: f64,
    pub worst_eig_node: (usize, usize),
    pub worst_c_node: (usize, usize),
}

impl Feasibility {
    pub fn is_feasible(&self) -> bool {
        self.min_metric_eig > 0.0 && self.min_c > 0.0
    }
}

/// Everything the residual, linearization and estimates need, computed once
/// per path: metric, inverse, determinant, velocity gradient v_i = φ_ti and
/// twist c at each node.  Inverse, v and c are only meaningful at interior
/// levels; det, metric and min-eig cover all levels (the boundary values
/// feed the geometry reports).
#[derive(Debug, Clone)]
pub struct PathState {
    grid: TorusGrid,
    pub metric: Vec<Herm2>,
    pub inv: Vec<Herm2>,
    pub det: Vec<f64>,
    pub min_eig: Vec<f64>,
    pub v: Vec<[Complex64; 2]>,
    pub c: Vec<f64>,
    /// n + Δφ at every node.
    pub trace_h: Vec<f64>,
    feasibility: Feasibility,
}

impl PathState {
    pub fn compute(grid: &TorusGrid, values: &[f64]) -> Result<Self> {
        if values.len() != grid.spacetime_len() {
            return Err(CoreError::DimensionMismatch {
                expected: grid.spacetime_len(),
                got: values.len(),
            });
        }
        let ns = grid.spatial_len();
        let nt = grid.time_levels();
        let n = grid.complex_dim() as f64;
        let len = values.len();
        let field = MetricField::compute(grid, values)?;
        let dtt = grid.dtt(values)?;
        let u = time_derivative_of_gradient(grid, values)?;
        let lap = grid.lap(values)?;

        let zero = Complex64::new(0.0, 0.0);
        let mut metric = Vec::with_capacity(len);
        let mut det = Vec::with_capacity(len);
        let mut min_eig = Vec::with_capacity(len);
        let mut trace_h = Vec::with_capacity(len);
        for idx in 0..len {
            let m = field.at(idx);
            metric.push(m);
            det.push(m.det());
            min_eig.push(m.min_eig());
            trace_h.push(n + lap[idx]);
        }

        let mut inv = vec![Herm2::identity(grid.complex_dim()); len];
        let mut v = vec![[zero, zero]; len];
        let mut c = vec![0.0; len];
        let mut feas = Feasibility {
            min_metric_eig: f64::INFINITY,
            min_c: f64::INFINITY,
            worst_eig_node: (0, 0),
            worst_c_node: (0, 0),
        };
        for k in 1..nt - 1 {
            for i in 0..ns {
                let idx = k * ns + i;
                let eig = min_eig[idx];
                if eig < feas.min_metric_eig {
                    feas.min_metric_eig = eig;
                    feas.worst_eig_node = (k, i);
                }
                v[idx] = [u[0][idx], u[1][idx]];
                let ci = if eig > 0.0 {
                    let iv = metric[idx].inverse();
                    inv[idx] = iv;
                    dtt[idx] - iv.dagger_form(v[idx])
                } else {
                    // Metric not invertible: mark the twist as collapsed so
                    // the state reads as infeasible at this node.
                    f64::NEG_INFINITY
                };
                c[idx] = ci;
                if ci < feas.min_c {
                    feas.min_c = ci;
                    feas.worst_c_node = (k, i);
                }
            }
        }
        Ok(Self {
            grid: *grid,
            metric,
            inv,
            det,
            min_eig,
            v,
            c,
            trace_h,
            feasibility: feas,
        })
    }

    pub fn grid(&self) -> &TorusGrid {
        &self.grid
    }

    pub fn feasibility(&self) -> Feasibility {
        self.feasibility
    }

    pub fn ensure_feasible(&self) -> Result<()> {
        let f = self.feasibility;
        if f.is_feasible() {
            return Ok(());
        }
        let (level, node) = if f.min_c <= 0.0 {
            f.worst_c_node
        } else {
            f.worst_eig_node
        };
        let idx = level * self.grid.spatial_len() + node;
        Err(CoreError::DegenerateState {
            level,
            node,
            min_eig: self.min_eig[idx],
            c: self.c[idx],
        })
    }

    /// Point view used by the tensor extraction and the estimate harness.
    pub fn at(&self, idx: usize) -> PointwiseState {
        PointwiseState {
            metric: self.metric[idx],
            inv_g: self.inv[idx],
            det: self.det[idx],
            min_eig: self.min_eig[idx],
            v: self.v[idx],
            c: self.c[idx],
            trace_h: self.trace_h[idx],
        }
    }

    /// Median of c over interior nodes (deterministic: stable sort of a
    /// copied buffer).  Used to pitch the solver preconditioner.
    pub fn median_c(&self) -> f64 {
        let ns = self.grid.spatial_len();
        let nt = self.grid.time_levels();
        let mut interior: Vec<f64> = self.c[ns..(nt - 1) * ns].to_vec();
        interior.sort_by(f64::total_cmp);
        interior[interior.len() / 2]
    }
}

/// Snapshot of the cached state at one space-time node.
#[derive(Debug, Clone, Copy)]
pub struct PointwiseState {
    pub metric: Herm2,
    pub inv_g: Herm2,
    pub det: f64,
    pub min_eig: f64,
    pub v: [Complex64; 2],
    pub c: f64,
    pub trace_h: f64,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::path::GeodesicPath;
    use crate::potential::KahlerPotential;
    use approx::assert_abs_diff_eq;

    fn flat_problem(n: usize, nodes: usize, nt: usize, eps: f64) -> (HcmaProblem, GeodesicPath) {
        let grid = TorusGrid::new(n, nodes, nt).unwrap();
        let problem = HcmaProblem::new(grid, eps, DensityField::Zero).unwrap();
        let phi0 = KahlerPotential::zero(grid);
        let phi1 = KahlerPotential::constant(grid, 0.25);
        let path = GeodesicPath::initial_guess(&phi0, &phi1, eps, None).unwrap();
        (problem, path)
    }

    fn wavy_path(grid: TorusGrid) -> GeodesicPath {
        // A feasible path with genuine space-time structure.
        GeodesicPath::from_fn(grid, |k, i| {
            let t = grid.time_of(k);
            let c = grid.node_coords(i);
            let x = grid.axis_coord(c[0]);
            let y = grid.axis_coord(c[1]);
            let tau = std::f64::consts::TAU;
            0.02 * (tau * x).cos() * (1.0 + 0.5 * t)
                + 0.015 * (tau * (x + y)).sin() * t * (1.0 - t)
                + 0.3 * (t * t - t)
        })
    }

    #[test]
    fn flat_solution_has_bitwise_zero_residual() {
        // ε = 0.5 makes every arithmetic step exact: the bubble amplitude
        // ε/2 = 0.25 is a power of two and Nt − 1 = 8 keeps τ exact.
        let (problem, path) = flat_problem(1, 16, 9, 0.5);
        let state = PathState::compute(problem.grid(), path.values()).unwrap();
        let res = problem.residual(&state).unwrap();
        assert!(res.iter().all(|&r| r == 0.0), "sup = {:?}", res.iter().fold(0.0f64, |m, &r| m.max(r.abs())));
    }

    #[test]
    fn flat_solution_residual_small_for_generic_epsilon() {
        let (problem, path) = flat_problem(2, 8, 17, 3e-3);
        let state = PathState::compute(problem.grid(), path.values()).unwrap();
        let res = problem.residual(&state).unwrap();
        let sup = res.iter().fold(0.0f64, |m, &r| m.max(r.abs()));
        assert!(sup <= 1e-11, "sup = {sup}");
    }

    #[test]
    fn residual_commutes_with_time_reversal_bitwise() {
        let grid = TorusGrid::new(1, 16, 9).unwrap();
        let problem = HcmaProblem::new(grid, 0.37, DensityField::Zero).unwrap();
        let path = wavy_path(grid);
        let fwd = problem
            .residual(&PathState::compute(&grid, path.values()).unwrap())
            .unwrap();
        let rev_path = path.reverse_time();
        let rev = problem
            .residual(&PathState::compute(&grid, rev_path.values()).unwrap())
            .unwrap();
        let ns = grid.spatial_len();
        let nt = grid.time_levels();
        for k in 0..nt {
            for i in 0..ns {
                let a = fwd[k * ns + i];
                let b = rev[(nt - 1 - k) * ns + i];
                assert!(a == b && a.to_bits() == b.to_bits(), "level {k} node {i}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn linearization_of_t_squared_is_two_over_c() {
        // h = t² has zero spatial Hessian and h_tt = 2 exactly on a uniform
        // power-of-two time grid, so DF·h = 2/c with no other terms.
        let grid = TorusGrid::new(1, 16, 9).unwrap();
        let problem = HcmaProblem::new(grid, 0.2, DensityField::Zero).unwrap();
        let path = wavy_path(grid);
        let state = PathState::compute(&grid, path.values()).unwrap();
        let ns = grid.spatial_len();
        let h: Vec<f64> = (0..grid.spacetime_len())
            .map(|idx| {
                let t = grid.time_of(idx / ns);
                t * t
            })
            .collect();
        let dh = problem.apply_linearization(&state, &h).unwrap();
        for k in 1..grid.time_levels() - 1 {
            for i in 0..ns {
                let idx = k * ns + i;
                assert_eq!(dh[idx], 2.0 / state.c[idx], "node ({k},{i})");
            }
        }
    }

    #[test]
    fn linearization_of_phi_matches_closed_form() {
        // For h = φ at a diagonal metric (always true for n = 1):
        // DF·φ = (n+1) − Σ 1/λ_i − (1/c) Σ |v_i|²/λ_i².
        let grid = TorusGrid::new(1, 24, 9).unwrap();
        let problem = HcmaProblem::new(grid, 0.2, DensityField::Zero).unwrap();
        let path = wavy_path(grid);
        let state = PathState::compute(&grid, path.values()).unwrap();
        let dh = problem
            .apply_linearization(&state, path.values())
            .unwrap();
        let ns = grid.spatial_len();
        for k in 1..grid.time_levels() - 1 {
            for i in 0..ns {
                let idx = k * ns + i;
                let lam = state.metric[idx].d1;
                let vsq = state.v[idx][0].norm_sqr();
                let expect = 2.0 - 1.0 / lam - vsq / (lam * lam * state.c[idx]);
                assert_abs_diff_eq!(dh[idx], expect, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn linearization_is_linear() {
        let grid = TorusGrid::new(2, 8, 9).unwrap();
        let problem = HcmaProblem::new(grid, 0.3, DensityField::Zero).unwrap();
        let phi0 = KahlerPotential::zero(grid);
        let phi1 = KahlerPotential::make_degenerate_endpoint(grid, 0.4, &[1, 0, 0, 1]).unwrap();
        let path = GeodesicPath::initial_guess(&phi0, &phi1, 0.3, None).unwrap();
        let state = PathState::compute(&grid, path.values()).unwrap();
        let len = grid.spacetime_len();
        let h1: Vec<f64> = (0..len).map(|i| ((i * 37 + 11) % 101) as f64 / 101.0).collect();
        let h2: Vec<f64> = (0..len).map(|i| ((i * 53 + 7) % 89) as f64 / 89.0 - 0.4).collect();
        let combo: Vec<f64> = h1.iter().zip(&h2).map(|(&a, &b)| 1.7 * a - 0.6 * b).collect();
        let d1 = problem.apply_linearization(&state, &h1).unwrap();
        let d2 = problem.apply_linearization(&state, &h2).unwrap();
        let dc = problem.apply_linearization(&state, &combo).unwrap();
        for i in 0..len {
            assert_abs_diff_eq!(dc[i], 1.7 * d1[i] - 0.6 * d2[i], epsilon = 1e-11);
        }
    }

    #[test]
    fn fd_check_converges_quadratically() {
        let grid = TorusGrid::new(1, 16, 9).unwrap();
        let problem = HcmaProblem::new(grid, 0.5, DensityField::Zero).unwrap();
        let path = wavy_path(grid);
        let ns = grid.spatial_len();
        let h: Vec<f64> = (0..grid.spacetime_len())
            .map(|idx| {
                let t = grid.time_of(idx / ns);
                let c = grid.node_coords(idx % ns);
                let x = grid.axis_coord(c[0]);
                t * (1.0 - t) * (std::f64::consts::TAU * x).sin()
            })
            .collect();
        let rows = problem
            .fd_check_linearization(&path, &h, &[2e-3, 1e-3])
            .unwrap();
        let ratio = rows[0].sup_error / rows[1].sup_error;
        assert!(
            (3.5..=4.5).contains(&ratio),
            "errors {:?} ratio {ratio}",
            rows
        );
    }

    #[test]
    fn infeasible_state_is_reported_with_location() {
        let grid = TorusGrid::new(1, 16, 9).unwrap();
        // Strongly concave-in-time path: c < 0 in the interior.
        let path = GeodesicPath::from_fn(grid, |k, _| {
            let t = grid.time_of(k);
            -(t * t - t)
        });
        let state = PathState::compute(&grid, path.values()).unwrap();
        assert!(!state.feasibility().is_feasible());
        match state.ensure_feasible().unwrap_err() {
            CoreError::DegenerateState { c, .. } => assert!(c <= 0.0),
            other => panic!("expected degenerate state, got {other}"),
        }
    }

    #[test]
    fn density_validation_and_stats() {
        let grid = TorusGrid::new(1, 16, 9).unwrap();
        assert!(matches!(
            HcmaProblem::new(grid, 1.0, DensityField::Spatial(vec![0.0; 3])),
            Err(CoreError::DimensionMismatch { .. })
        ));
        assert!(HcmaProblem::new(grid, -1.0, DensityField::Zero).is_err());
        let f: Vec<f64> = (0..grid.spatial_len())
            .map(|i| {
                let x = grid.axis_coord(grid.node_coords(i)[0]);
                0.3 * (std::f64::consts::TAU * x).cos()
            })
            .collect();
        let p = HcmaProblem::new(grid, 1.0, DensityField::Spatial(f)).unwrap();
        assert_abs_diff_eq!(p.sup_f(), 0.3, epsilon = 1e-12);
        assert_abs_diff_eq!(p.inf_f(), -0.3, epsilon = 1e-12);
        // Δ(a cos) has extrema ±a·sin²(πh)/h² ≈ ±aπ².
        assert!(p.inf_lap_f() < -0.29 * std::f64::consts::PI.powi(2));
    }
}
