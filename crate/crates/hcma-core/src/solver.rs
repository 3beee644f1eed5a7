//! Damped inexact Newton iteration on the log-form residual.
//!
//! Each step solves the exact linearization to a forcing tolerance
//! min(0.1, ‖F‖_∞) with preconditioned GMRES, then shortens the step twice
//! over: a fraction-to-boundary pass keeps the twist c and the metric
//! eigenvalues above 0.1× their pre-step nodewise values, and plain
//! backtracking halves until the sup-norm residual decreases.  Continuation
//! (not this module) is responsible for good initializations; there is no
//! further globalization.

use std::time::Instant;

use serde::Serialize;

use crate::equation::{HcmaProblem, PathState};
use crate::error::CoreError;
use crate::grid::sup_norm;
use crate::krylov::{gmres_right, KrylovOptions};
use crate::path::GeodesicPath;
use crate::precond::FastDiagPrecond;
use crate::Result;

/// Halvings allowed while restoring feasibility or descent.
const MAX_HALVINGS: usize = 60;

#[derive(Debug, Clone, Copy, Serialize)]
pub struct SolveOptions {
    /// Success threshold on ‖F‖_∞.
    pub tol: f64,
    pub max_newton: usize,
    pub max_krylov: usize,
    /// GMRES restart length.
    pub restart: usize,
    /// Initial step fraction before any halving.
    pub damping: f64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            tol: 1e-9,
            max_newton: 30,
            max_krylov: 400,
            restart: 100,
            damping: 1.0,
        }
    }
}

/// Outcome of one converged (or failed) solve.  The path is carried
/// in-memory only; serialized reports stay summary-sized and wall time is
/// excluded so identical runs serialize identically.
#[derive(Debug, Clone, Serialize)]
pub struct SolveReport {
    #[serde(skip_serializing)]
    pub path: GeodesicPath,
    pub epsilon: f64,
    pub iterations: usize,
    pub residual_history: Vec<f64>,
    pub min_c: f64,
    pub min_eig: f64,
    pub krylov_iterations: Vec<usize>,
    #[serde(skip_serializing)]
    pub wall_seconds: f64,
}

fn validate(opts: &SolveOptions) -> Result<()> {
    if !(opts.tol > 0.0) {
        return Err(CoreError::InvalidParameter(format!(
            "solver tolerance must be positive, got {}",
            opts.tol
        )));
    }
    if opts.max_newton == 0 {
        return Err(CoreError::InvalidParameter(
            "max_newton must be at least 1".into(),
        ));
    }
    if !(opts.damping > 0.0 && opts.damping <= 1.0) {
        return Err(CoreError::InvalidParameter(format!(
            "damping must lie in (0, 1], got {}",
            opts.damping
        )));
    }
    Ok(())
}

/// Nodewise fraction-to-boundary test at interior levels.
fn keeps_margin(grid_len: (usize, usize), old: &PathState, trial: &PathState) -> bool {
    let (ns, nt) = grid_len;
    for idx in ns..(nt - 1) * ns {
        if trial.c[idx] < 0.1 * old.c[idx] || trial.min_eig[idx] < 0.1 * old.min_eig[idx] {
            return false;
        }
    }
    true
}

pub fn solve(
    problem: &HcmaProblem,
    init: &GeodesicPath,
    opts: &SolveOptions,
) -> Result<SolveReport> {
    validate(opts)?;
    let start = Instant::now();
    let grid = *problem.grid();
    let ns = grid.spatial_len();
    let nt = grid.time_levels();
    let mut path = init.clone();
    let mut state = PathState::compute(&grid, path.values())?;
    state.ensure_feasible()?;
    let mut residual = problem.residual(&state)?;
    let mut res_sup = sup_norm(&residual);
    let mut history = vec![res_sup];
    let mut krylov_iterations = Vec::new();
    let mut iterations = 0usize;

    while res_sup > opts.tol {
        if iterations >= opts.max_newton {
            return Err(CoreError::NonConvergence {
                iterations,
                residual: res_sup,
            });
        }
        let forcing = res_sup.min(0.1);
        let pre = FastDiagPrecond::new(&grid, state.median_c())?;
        let rhs: Vec<f64> = residual.iter().map(|v| -v).collect();
        let kopts = KrylovOptions {
            rel_tol: forcing,
            restart: opts.restart,
            max_iters: opts.max_krylov,
        };
        let (delta, stats) = gmres_right(
            |h: &[f64]| problem.apply_linearization(&state, h),
            |r: &[f64]| pre.apply(r),
            &rhs,
            &kopts,
        )?;
        krylov_iterations.push(stats.iterations);
        if !stats.converged {
            return Err(CoreError::LinearSolveFailure {
                newton_iter: iterations,
                krylov_iters: stats.iterations,
                achieved: stats.achieved,
                required: forcing,
            });
        }

        let mut alpha = opts.damping;
        let mut accepted = None;
        let mut last_infeasible = None;
        for _ in 0..MAX_HALVINGS {
            let mut trial = path.values().to_vec();
            for (t, d) in trial.iter_mut().zip(&delta) {
                *t += alpha * d;
            }
            let trial_state = PathState::compute(&grid, &trial)?;
            if !trial_state.feasibility().is_feasible()
                || !keeps_margin((ns, nt), &state, &trial_state)
            {
                last_infeasible = Some(trial_state);
                alpha *= 0.5;
                continue;
            }
            let trial_residual = problem.residual(&trial_state)?;
            let trial_sup = sup_norm(&trial_residual);
            if trial_sup < res_sup {
                accepted = Some((trial, trial_state, trial_residual, trial_sup));
                break;
            }
            alpha *= 0.5;
        }
        let Some((values, new_state, new_residual, new_sup)) = accepted else {
            // Feasibility never recovered: report the worst node of the last
            // trial.  Plain stagnation maps to NonConvergence instead.
            if let Some(bad) = last_infeasible {
                let f = bad.feasibility();
                let (level, node) = if f.min_c <= 0.0 || !f.min_c.is_finite() {
                    f.worst_c_node
                } else {
                    f.worst_eig_node
                };
                let idx = level * ns + node;
                return Err(CoreError::DegenerateState {
                    level,
                    node,
                    min_eig: bad.min_eig[idx],
                    c: bad.c[idx],
                });
            }
            return Err(CoreError::NonConvergence {
                iterations,
                residual: res_sup,
            });
        };
        path.values_mut().copy_from_slice(&values);
        state = new_state;
        residual = new_residual;
        res_sup = new_sup;
        iterations += 1;
        history.push(res_sup);
    }

    let feas = state.feasibility();
    Ok(SolveReport {
        path,
        epsilon: problem.epsilon(),
        iterations,
        residual_history: history,
        min_c: feas.min_c,
        min_eig: feas.min_metric_eig,
        krylov_iterations,
        wall_seconds: start.elapsed().as_secs_f64(),
    })
}
