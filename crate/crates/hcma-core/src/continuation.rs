//! ε → 0 continuation driver with warm starts.
//!
//! Solves the regularized equation along a decreasing ε schedule. Each stage
//! warm-starts from the previous solution with the boundary levels replaced
//! by freshly smoothed endpoints, so the double limit in (ε, δ) is taken
//! along a single diagonal sequence.

use serde::Serialize;

use crate::equation::{HcmaProblem, PathState};
use crate::error::CoreError;
use crate::path::GeodesicPath;
use crate::potential::{KahlerPotential, SpaceMembership, SpaceTag};
use crate::solver::{solve, SolveOptions, SolveReport};
use crate::Result;

/// Paired ε and endpoint-smoothing schedules.
#[derive(Debug, Clone, Serialize)]
pub struct SweepSchedule {
    /// Strictly decreasing, positive.
    pub epsilons: Vec<f64>,
    /// One δ per ε; 0 means the endpoints are used as given at that stage.
    pub smoothing: Vec<f64>,
}

impl SweepSchedule {
    /// ε_k = 10^{−(1+k)/2} for k = 0..6, δ_k = min(ε_k, 0.1).
    pub fn default_plan() -> Self {
        let epsilons: Vec<f64> = (0..7)
            .map(|k| 10f64.powf(-(1.0 + k as f64) / 2.0))
            .collect();
        Self::coupled(epsilons)
    }

    /// Pairs a given ε list with δ_k = min(ε_k, 0.1).
    pub fn coupled(epsilons: Vec<f64>) -> Self {
        let smoothing = epsilons.iter().map(|&e| e.min(0.1)).collect();
        Self {
            epsilons,
            smoothing,
        }
    }

    /// ε list with no endpoint smoothing; valid only for smooth endpoints.
    pub fn bare(epsilons: Vec<f64>) -> Self {
        let smoothing = vec![0.0; epsilons.len()];
        Self {
            epsilons,
            smoothing,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.epsilons.is_empty() {
            return Err(CoreError::InvalidParameter(
                "schedule must contain at least one ε".into(),
            ));
        }
        if self.smoothing.len() != self.epsilons.len() {
            return Err(CoreError::InvalidParameter(format!(
                "smoothing list has {} entries for {} ε values",
                self.smoothing.len(),
                self.epsilons.len()
            )));
        }
        for pair in self.epsilons.windows(2) {
            if pair[1] >= pair[0] {
                return Err(CoreError::InvalidParameter(format!(
                    "schedule must be strictly decreasing, got {} then {}",
                    pair[0], pair[1]
                )));
            }
        }
        if let Some(&last) = self.epsilons.last() {
            if !(last > 0.0) || !last.is_finite() {
                return Err(CoreError::InvalidParameter(format!(
                    "schedule entries must be positive and finite, got {last}"
                )));
            }
        }
        for pair in self.smoothing.windows(2) {
            if pair[1] > pair[0] {
                return Err(CoreError::InvalidParameter(format!(
                    "smoothing must be nonincreasing, got {} then {}",
                    pair[0], pair[1]
                )));
            }
        }
        if self.smoothing.iter().any(|&d| d < 0.0 || !d.is_finite()) {
            return Err(CoreError::InvalidParameter(
                "smoothing entries must be finite and ≥ 0".into(),
            ));
        }
        Ok(())
    }
}

/// One successful stage of a sweep.
#[derive(Debug, Clone, Serialize)]
pub struct SweepEntry {
    pub epsilon: f64,
    pub delta: f64,
    /// sup over all levels and nodes of n + Δφ.
    pub sup_h: f64,
    pub sup_phi_t: f64,
    pub sup_grad: f64,
    /// ‖φ^{(k)} − φ^{(k−1)}‖_∞ against the previous stage, absent at k = 0.
    pub diff_from_previous: Option<f64>,
    pub report: SolveReport,
}

/// First failure of a truncated sweep.
#[derive(Debug, Clone, Serialize)]
pub struct Truncation {
    pub epsilon: f64,
    pub stage: usize,
    pub error: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepReport {
    pub schedule: Vec<f64>,
    pub smoothing: Vec<f64>,
    pub endpoint0: SpaceMembership,
    pub endpoint1: SpaceMembership,
    /// Successful stages, in schedule order up to the first failure.
    pub entries: Vec<SweepEntry>,
    pub truncated: Option<Truncation>,
}

impl SweepReport {
    pub fn succeeded(&self) -> bool {
        self.truncated.is_none()
    }

    /// Entry at the smallest ε that solved.
    pub fn last(&self) -> Option<&SweepEntry> {
        self.entries.last()
    }

    /// max_k sup(n+Δφ), the uniformity monitor.
    pub fn max_sup_h(&self) -> f64 {
        self.entries
            .iter()
            .map(|e| e.sup_h)
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Runs the schedule against one endpoint pair. The template's own ε is
/// replaced stage by stage; its grid and density are reused. Solver failures
/// do not abort the sweep: the report is truncated at the first failing ε
/// with the error recorded. Err is reserved for invalid inputs.
pub fn sweep(
    template: &HcmaProblem,
    phi0: &KahlerPotential,
    phi1: &KahlerPotential,
    schedule: &SweepSchedule,
    opts: &SolveOptions,
) -> Result<SweepReport> {
    schedule.validate()?;
    let grid = *template.grid();
    let class0 = phi0.classify();
    let class1 = phi1.classify();
    for (name, class) in [("first", &class0), ("second", &class1)] {
        if class.tag == SpaceTag::Inadmissible {
            return Err(CoreError::InfeasibleInput(format!(
                "{name} endpoint is inadmissible (min metric eig {:.3e}, sup trace {:.3e})",
                class.min_metric_eig, class.sup_trace
            )));
        }
        let smoothed = class.tag == SpaceTag::H || schedule.smoothing.iter().all(|&d| d > 0.0);
        if !smoothed {
            return Err(CoreError::InfeasibleInput(format!(
                "{name} endpoint is degenerate; every stage needs a positive smoothing δ"
            )));
        }
    }

    let mut entries: Vec<SweepEntry> = Vec::new();
    let mut truncated = None;
    let mut prev: Option<Vec<f64>> = None;

    for (stage, (&epsilon, &delta)) in schedule
        .epsilons
        .iter()
        .zip(schedule.smoothing.iter())
        .enumerate()
    {
        let e0 = if delta > 0.0 {
            phi0.smooth_approx(delta)?
        } else {
            phi0.clone()
        };
        let e1 = if delta > 0.0 {
            phi1.smooth_approx(delta)?
        } else {
            phi1.clone()
        };
        let problem = template.with_epsilon(epsilon)?;

        let warm = prev.as_ref().map(|values| {
            let mut path = GeodesicPath::new(grid, values.clone()).expect("stage size fixed");
            path.set_endpoints(&e0, &e1);
            path
        });
        let outcome = match warm {
            Some(init) => solve(&problem, &init, opts).or_else(|_| {
                // Rebuilding the interior can recover feasibility lost when
                // the boundary snapshots moved closer to degeneracy.
                let cold = GeodesicPath::initial_guess(&e0, &e1, epsilon, None)?;
                solve(&problem, &cold, opts)
            }),
            None => GeodesicPath::initial_guess(&e0, &e1, epsilon, None)
                .and_then(|init| solve(&problem, &init, opts)),
        };

        match outcome {
            Ok(report) => {
                let state = PathState::compute(&grid, report.path.values())?;
                let sup_h = state
                    .trace_h
                    .iter()
                    .fold(f64::NEG_INFINITY, |m, &h| m.max(h));
                let diff_from_previous = prev.as_ref().map(|old| {
                    report
                        .path
                        .values()
                        .iter()
                        .zip(old.iter())
                        .map(|(a, b)| (a - b).abs())
                        .fold(0.0, f64::max)
                });
                prev = Some(report.path.values().to_vec());
                entries.push(SweepEntry {
                    epsilon,
                    delta,
                    sup_h,
                    sup_phi_t: report.path.sup_phi_t(),
                    sup_grad: report.path.sup_grad(),
                    diff_from_previous,
                    report,
                });
            }
            Err(err) => {
                truncated = Some(Truncation {
                    epsilon,
                    stage,
                    error: err.to_string(),
                });
                break;
            }
        }
    }

    Ok(SweepReport {
        schedule: schedule.epsilons.clone(),
        smoothing: schedule.smoothing.clone(),
        endpoint0: class0,
        endpoint1: class1,
        entries,
        truncated,
    })
}
