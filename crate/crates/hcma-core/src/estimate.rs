//! Maximum-principle post-processing of solved paths: the trace monitor
//! h = n + Δφ, the certificate quantity Q = log h − Cφ + t², the location of
//! its max, and the interior-max bound ratio ρ = h(P) e^{−f(P)/n} ε^{−1/n}.

use num_complex::Complex64;
use serde::Serialize;

use crate::equation::{herm_dot, HcmaProblem, PathState};
use crate::grid::TorusGrid;
use crate::oracle::{run_on_samples, samples_from_state, CheckOutcome};
use crate::path::GeodesicPath;
use crate::potential::Herm2;
use crate::Result;

/// Extrema of h on one time level, first node on ties.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct LevelExtrema {
    pub level: usize,
    pub t: f64,
    pub sup: f64,
    pub sup_node: usize,
    pub min: f64,
    pub min_node: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct LaplacianReport {
    pub per_level: Vec<LevelExtrema>,
    pub sup_h: f64,
    pub sup_level: usize,
    pub sup_node: usize,
    /// Admissible paths keep this ≥ 0 up to roundoff.
    pub min_h: f64,
    pub min_level: usize,
    pub min_node: usize,
}

/// Exact discrete suprema and infima of h = n + Δφ, per level and global.
pub fn laplacian_report(path: &GeodesicPath) -> Result<LaplacianReport> {
    let grid = path.grid();
    let ns = grid.spatial_len();
    let n = grid.complex_dim() as f64;
    let lap = grid.lap(path.values())?;
    let mut per_level = Vec::with_capacity(grid.time_levels());
    for k in 0..grid.time_levels() {
        let mut row = LevelExtrema {
            level: k,
            t: grid.time_of(k),
            sup: f64::NEG_INFINITY,
            sup_node: 0,
            min: f64::INFINITY,
            min_node: 0,
        };
        for i in 0..ns {
            let h = n + lap[k * ns + i];
            if h > row.sup {
                row.sup = h;
                row.sup_node = i;
            }
            if h < row.min {
                row.min = h;
                row.min_node = i;
            }
        }
        per_level.push(row);
    }
    let top = per_level
        .iter()
        .max_by(|a, b| a.sup.partial_cmp(&b.sup).unwrap())
        .copied()
        .unwrap();
    let bottom = per_level
        .iter()
        .min_by(|a, b| a.min.partial_cmp(&b.min).unwrap())
        .copied()
        .unwrap();
    Ok(LaplacianReport {
        per_level,
        sup_h: top.sup,
        sup_level: top.level,
        sup_node: top.sup_node,
        min_h: bottom.min,
        min_level: bottom.level,
        min_node: bottom.min_node,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MaxLocation {
    Interior,
    Boundary,
}

#[derive(Debug, Clone, Serialize)]
pub struct EstimateReport {
    pub c_used: f64,
    pub c_overridden: bool,
    /// Flat background: curvature bound B and its Ricci companion R vanish.
    pub b_constant: f64,
    pub r_constant: f64,
    pub inf_lap_f: f64,
    pub epsilon: f64,
    pub laplacian: LaplacianReport,
    pub q_max: f64,
    pub q_level: usize,
    pub q_node: usize,
    pub location: MaxLocation,
    /// h(P) e^{−f(P)/n} ε^{−1/n}, interior maxima only.
    pub rho: Option<f64>,
    /// Same ratio with sup f in place of f(P).
    pub rho_sup_f: Option<f64>,
    pub boundary_endpoint: Option<usize>,
    /// |h(P) − endpoint h at the same node|; the boundary data are shared,
    /// so anything above roundoff flags a wiring bug.
    pub boundary_gap: Option<f64>,
    /// Full elliptic operator applied to Q at an interior max.
    pub d_q: Option<f64>,
    /// Spatial part Δ_φQ at an interior max.
    pub lap_q: Option<f64>,
    /// 10× the stride-doubling stencil-error estimate at the max.
    pub tol_mp: Option<f64>,
}

impl EstimateReport {
    /// Sign checks at an interior max; true (vacuously) at boundary maxima.
    pub fn interior_checks_pass(&self) -> bool {
        match (self.d_q, self.lap_q, self.tol_mp) {
            (Some(dq), Some(lq), Some(tol)) => dq <= tol && lq <= tol,
            _ => true,
        }
    }
}

/// Builds the certificate for a feasible path. C defaults to
/// max(1, 1 − inf Δf) and is frozen into the report; `c_override` replaces
/// it for diagnostics, in which case no bound is claimed.
pub fn mp_certificate(
    path: &GeodesicPath,
    problem: &HcmaProblem,
    c_override: Option<f64>,
) -> Result<EstimateReport> {
    let grid = *path.grid();
    let ns = grid.spatial_len();
    let nt = grid.time_levels();
    let n = grid.complex_dim();
    let state = PathState::compute(&grid, path.values())?;
    let inf_lap_f = problem.inf_lap_f();
    let c_used = c_override.unwrap_or_else(|| (1.0 - inf_lap_f).max(1.0));
    let laplacian = laplacian_report(path)?;

    let values = path.values();
    let mut q = vec![0.0; values.len()];
    for k in 0..nt {
        let t = grid.time_of(k);
        for i in 0..ns {
            let idx = k * ns + i;
            let h = state.trace_h[idx];
            // Degenerate boundary data can reach h = 0; log(0) = −∞ never
            // wins the argmax and is skipped by the interior operator.
            q[idx] = if h > 0.0 {
                h.ln() - c_used * values[idx] + t * t
            } else {
                f64::NEG_INFINITY
            };
        }
    }

    let mut q_max = f64::NEG_INFINITY;
    let mut q_idx = 0usize;
    for (idx, &qv) in q.iter().enumerate() {
        if qv > q_max {
            q_max = qv;
            q_idx = idx;
        }
    }
    let q_level = q_idx / ns;
    let q_node = q_idx % ns;
    let interior = q_level > 0 && q_level < nt - 1;

    let mut report = EstimateReport {
        c_used,
        c_overridden: c_override.is_some(),
        b_constant: 0.0,
        r_constant: 0.0,
        inf_lap_f,
        epsilon: problem.epsilon(),
        laplacian,
        q_max,
        q_level,
        q_node,
        location: if interior {
            MaxLocation::Interior
        } else {
            MaxLocation::Boundary
        },
        rho: None,
        rho_sup_f: None,
        boundary_endpoint: None,
        boundary_gap: None,
        d_q: None,
        lap_q: None,
        tol_mp: None,
    };

    if interior {
        let h_p = state.trace_h[q_idx];
        let f_p = problem.f_at(q_level, q_node);
        let inv_n = 1.0 / n as f64;
        let eps_pow = problem.epsilon().powf(-inv_n);
        report.rho = Some(h_p * (-f_p * inv_n).exp() * eps_pow);
        report.rho_sup_f = Some(h_p * (-problem.sup_f() * inv_n).exp() * eps_pow);

        let d1 = problem.apply_linearization(&state, &q)?[q_idx];
        let lap1 = problem.metric_laplacian(&state, &q)?[q_idx];
        // Doubled-stride evaluation estimates the leading stencil error;
        // near-boundary levels can only double the spatial stride.
        let st = if (2..=nt.saturating_sub(3)).contains(&q_level) {
            2
        } else {
            1
        };
        let (d2, lap2) = d_operator_at(&grid, &state, &q, q_level, q_node, 2, st);
        let est = (d1 - d2).abs().max((lap1 - lap2).abs());
        report.d_q = Some(d1);
        report.lap_q = Some(lap1);
        report.tol_mp = Some(10.0 * est + 1e-9 * d1.abs().max(1.0));
    } else {
        let which = if q_level == 0 { 0 } else { 1 };
        let endpoint = path.endpoint(which);
        let lap_end = grid.lap(endpoint.values())?;
        let h_end = n as f64 + lap_end[q_node];
        report.boundary_endpoint = Some(which);
        report.boundary_gap = Some((state.trace_h[q_idx] - h_end).abs());
    }
    Ok(report)
}

/// D(Q) and Δ_φQ at one interior node, rebuilt from centered differences
/// with the given spatial and time strides. Stride (1, 1) reproduces the
/// solver's operator; stride 2 drives the Richardson error estimate.
fn d_operator_at(
    grid: &TorusGrid,
    state: &PathState,
    q: &[f64],
    level: usize,
    node: usize,
    ss: usize,
    st: usize,
) -> (f64, f64) {
    let n = grid.complex_dim();
    let ns = grid.spatial_len();
    let nn = grid.nodes_per_axis() as i64;
    let h = grid.spacing() * ss as f64;
    let tau = grid.time_step() * st as f64;
    let s = ss as i64;

    let offset = |node: usize, moves: &[(usize, i64)]| -> usize {
        let mut c = grid.node_coords(node);
        for &(a, d) in moves {
            c[a] = (c[a] as i64 + d).rem_euclid(nn) as usize;
        }
        grid.node_index(&c)
    };
    let val = |lvl: usize, nd: usize| q[lvl * ns + nd];

    let d2_axis = |axis: usize| -> f64 {
        let plus = val(level, offset(node, &[(axis, s)]));
        let minus = val(level, offset(node, &[(axis, -s)]));
        (plus - 2.0 * val(level, node) + minus) / (h * h)
    };
    let dz = |lvl: usize, nd: usize, j: usize| -> Complex64 {
        let dx = (val(lvl, offset(nd, &[(2 * j, s)])) - val(lvl, offset(nd, &[(2 * j, -s)])))
            / (2.0 * h);
        let dy = (val(lvl, offset(nd, &[(2 * j + 1, s)]))
            - val(lvl, offset(nd, &[(2 * j + 1, -s)])))
            / (2.0 * h);
        0.5 * Complex64::new(dx, -dy)
    };

    let mut hess = Herm2 {
        n,
        d1: 0.25 * (d2_axis(0) + d2_axis(1)),
        d2: 0.0,
        off: Complex64::new(0.0, 0.0),
    };
    if n == 2 {
        hess.d2 = 0.25 * (d2_axis(2) + d2_axis(3));
        // ∂_{z̄_2} of the ∂_{z_1} field; wide first differences commute.
        let re = (dz(level, offset(node, &[(2, s)]), 0) - dz(level, offset(node, &[(2, -s)]), 0))
            / (2.0 * h);
        let im = (dz(level, offset(node, &[(3, s)]), 0) - dz(level, offset(node, &[(3, -s)]), 0))
            / (2.0 * h);
        hess.off = 0.5 * (re + Complex64::new(0.0, 1.0) * im);
    }

    let qtt = (val(level + st, node) - 2.0 * val(level, node) + val(level - st, node))
        / (tau * tau);
    let mut u = [Complex64::new(0.0, 0.0); 2];
    for (j, slot) in u.iter_mut().enumerate().take(n) {
        *slot = (dz(level + st, node, j) - dz(level - st, node, j)) / (2.0 * tau);
    }

    let idx = level * ns + node;
    let inv = state.inv[idx];
    let trace = herm_dot(inv, hess);
    let w = inv.apply(state.v[idx]);
    let cross = (w[0].conj() * u[0] + w[1].conj() * u[1]).re;
    let full = trace + (qtt + hess.dagger_form(w) - 2.0 * cross) / state.c[idx];
    (full, trace)
}

/// Runs the randomized inequality suite on jets extracted from the path,
/// covering the nodewise chain of trace, gradient-ratio, and AM-GM bounds.
pub fn chain_checks(path: &GeodesicPath, stride: usize) -> Result<Vec<CheckOutcome>> {
    let grid = path.grid();
    let state = PathState::compute(grid, path.values())?;
    let samples = samples_from_state(grid, path.values(), &state, stride)?;
    Ok(run_on_samples(&samples, grid.complex_dim()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::equation::DensityField;
    use crate::path::GeodesicPath;
    use crate::potential::KahlerPotential;
    use crate::solver::{solve, SolveOptions};
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    fn solve_flat(grid: TorusGrid, epsilon: f64) -> (GeodesicPath, HcmaProblem) {
        let problem = HcmaProblem::new(grid, epsilon, DensityField::Zero).unwrap();
        let zero = KahlerPotential::zero(grid);
        let init = GeodesicPath::initial_guess(&zero, &zero, epsilon, None).unwrap();
        let path = solve(&problem, &init, &SolveOptions::default())
            .unwrap()
            .path;
        (path, problem)
    }

    #[test]
    fn flat_solution_has_trace_exactly_n() {
        let grid = TorusGrid::new(1, 8, 9).unwrap();
        let (path, _) = solve_flat(grid, 0.1);
        let report = laplacian_report(&path).unwrap();
        assert_eq!(report.per_level.len(), 9);
        assert!((report.sup_h - 1.0).abs() < 1e-8, "sup = {}", report.sup_h);
        assert!(report.min_h > 1.0 - 1e-8, "min = {}", report.min_h);
        assert!(report.min_h >= -1e-10);
    }

    #[test]
    fn boundary_level_sup_matches_the_stencil_closed_form() {
        // Endpoint (1−δ)(1/π²)cos(2πx): the discrete Hessian scales cos by
        // −sin²(πh)/(π²h²), so sup h at t = 1 is 1 + (1−δ)sin²(πh)/(πh)².
        let grid = TorusGrid::new(1, 16, 9).unwrap();
        let ns = grid.spatial_len();
        let delta = 0.1;
        let epsilon = 1e-3;
        let cos_bump: Vec<f64> = (0..ns)
            .map(|i| (2.0 * PI * grid.axis_coord(grid.node_coords(i)[0])).cos() / (PI * PI))
            .collect();
        let phi1 = KahlerPotential::new(grid, cos_bump)
            .unwrap()
            .smooth_approx(delta)
            .unwrap();
        let phi0 = KahlerPotential::zero(grid);
        let problem = HcmaProblem::new(grid, epsilon, DensityField::Zero).unwrap();
        let init = GeodesicPath::initial_guess(&phi0, &phi1, epsilon, None).unwrap();
        let path = solve(&problem, &init, &SolveOptions::default())
            .unwrap()
            .path;
        let report = laplacian_report(&path).unwrap();
        let h = grid.spacing();
        let expected = 1.0 + (1.0 - delta) * (PI * h).sin().powi(2) / (PI * PI * h * h);
        let last = report.per_level.last().unwrap();
        assert_abs_diff_eq!(last.sup, expected, epsilon = 1e-12);
        assert!(report.sup_h >= expected - 1e-12);
    }

    #[test]
    fn flat_family_maximizes_q_at_the_far_boundary() {
        // Q = log n − Cφ + t² with φ = (ε/2)(t²−t) ≤ 0 is monotone in t.
        let grid = TorusGrid::new(1, 8, 9).unwrap();
        let (path, problem) = solve_flat(grid, 0.1);
        let report = mp_certificate(&path, &problem, None).unwrap();
        assert_eq!(report.c_used, 1.0);
        assert!(!report.c_overridden);
        assert_eq!(report.location, MaxLocation::Boundary);
        assert_eq!(report.boundary_endpoint, Some(1));
        assert!(report.rho.is_none() && report.d_q.is_none());
        assert!(report.boundary_gap.unwrap() <= 1e-13);
        assert_abs_diff_eq!(report.q_max, 1.0, epsilon = 1e-8);
        assert!(report.interior_checks_pass());
    }

    #[test]
    fn c_override_is_a_pass_through() {
        let grid = TorusGrid::new(1, 8, 9).unwrap();
        let (path, problem) = solve_flat(grid, 0.1);
        let report = mp_certificate(&path, &problem, Some(0.0)).unwrap();
        assert_eq!(report.c_used, 0.0);
        assert!(report.c_overridden);
        assert_eq!(report.location, MaxLocation::Boundary);
    }

    fn bubble_with_ripple(grid: TorusGrid, mu: f64, beta: f64) -> GeodesicPath {
        GeodesicPath::from_fn(grid, |k, i| {
            let t = grid.time_of(k);
            let x = grid.axis_coord(grid.node_coords(i)[0]);
            (t * t - t) * (mu + beta * (2.0 * PI * x).cos())
        })
    }

    #[test]
    fn stride_one_operator_matches_the_solver_linearization() {
        let grid = TorusGrid::new(1, 16, 9).unwrap();
        let ns = grid.spatial_len();
        let path = bubble_with_ripple(grid, 1.0, 0.05);
        let state = PathState::compute(&grid, path.values()).unwrap();
        let problem = HcmaProblem::new(grid, 1e-2, DensityField::Zero).unwrap();
        let q: Vec<f64> = (0..grid.spacetime_len())
            .map(|idx| {
                let (k, i) = (idx / ns, idx % ns);
                let t = grid.time_of(k);
                let x = grid.axis_coord(grid.node_coords(i)[0]);
                (2.0 * PI * x).cos() * t * t + t
            })
            .collect();
        let applied = problem.apply_linearization(&state, &q).unwrap();
        let lap = problem.metric_laplacian(&state, &q).unwrap();
        for (level, node) in [(1usize, 0usize), (4, 7), (7, 133)] {
            let idx = level * ns + node;
            let (full, trace) = d_operator_at(&grid, &state, &q, level, node, 1, 1);
            assert_abs_diff_eq!(full, applied[idx], epsilon = 1e-11 * applied[idx].abs().max(1.0));
            assert_abs_diff_eq!(trace, lap[idx], epsilon = 1e-11 * lap[idx].abs().max(1.0));
        }
    }

    #[test]
    fn interior_max_passes_the_sign_checks() {
        // A feasible bubble with a spatial ripple; C_override = 30 pushes
        // the max of Q to mid-time where −Cφ peaks.
        let grid = TorusGrid::new(1, 16, 17).unwrap();
        let path = bubble_with_ripple(grid, 1.0, 0.05);
        let problem = HcmaProblem::new(grid, 1e-2, DensityField::Zero).unwrap();
        let report = mp_certificate(&path, &problem, Some(30.0)).unwrap();
        assert_eq!(report.location, MaxLocation::Interior, "level {}", report.q_level);
        assert!(report.q_level > 4 && report.q_level < 12);
        let rho = report.rho.unwrap();
        assert!(rho.is_finite() && rho > 0.0);
        assert!(report.rho_sup_f.unwrap() <= rho + 1e-15);
        let (dq, lq, tol) = (
            report.d_q.unwrap(),
            report.lap_q.unwrap(),
            report.tol_mp.unwrap(),
        );
        assert!(dq <= tol, "D(Q) = {dq}, tol = {tol}");
        assert!(lq <= tol, "Δ_φQ = {lq}, tol = {tol}");
        assert!(report.interior_checks_pass());
    }

    #[test]
    fn chain_checks_hold_on_a_solved_path() {
        let grid = TorusGrid::new(1, 16, 9).unwrap();
        let epsilon = 1e-2;
        let phi1 = KahlerPotential::make_degenerate_endpoint(grid, 1.0, &[1, 0])
            .unwrap()
            .smooth_approx(0.2)
            .unwrap();
        let phi0 = KahlerPotential::zero(grid);
        let problem = HcmaProblem::new(grid, epsilon, DensityField::Zero).unwrap();
        let init = GeodesicPath::initial_guess(&phi0, &phi1, epsilon, None).unwrap();
        let path = solve(&problem, &init, &SolveOptions::default())
            .unwrap()
            .path;
        for outcome in chain_checks(&path, 3).unwrap() {
            assert!(
                outcome.passed,
                "{} failed with slack {}",
                outcome.id, outcome.worst_rel_slack
            );
        }
    }
}
