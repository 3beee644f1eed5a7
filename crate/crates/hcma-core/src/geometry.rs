//! Riemannian structure on the potential space: the weighted inner product,
//! path energy and length, distance estimates, and the energy-drift identity
//! satisfied by regularized solutions.

use serde::Serialize;

use crate::continuation::SweepReport;
use crate::equation::HcmaProblem;
use crate::error::CoreError;
use crate::path::GeodesicPath;
use crate::potential::{KahlerPotential, MetricField};
use crate::Result;

/// ⟨ψ₁, ψ₂⟩_φ = ∫ ψ₁ ψ₂ det(g + φ_ij̄) dV. Symmetric, positive semidefinite
/// whenever φ is admissible; callers supply admissible φ.
pub fn inner_product(psi1: &[f64], psi2: &[f64], phi: &KahlerPotential) -> Result<f64> {
    let grid = phi.grid();
    let ns = grid.spatial_len();
    if psi1.len() != ns || psi2.len() != ns {
        return Err(CoreError::DimensionMismatch {
            expected: ns,
            got: if psi1.len() != ns {
                psi1.len()
            } else {
                psi2.len()
            },
        });
    }
    let weight = phi.metric().det_field();
    let prod: Vec<f64> = psi1.iter().zip(psi2).map(|(a, b)| a * b).collect();
    grid.integrate(&prod, Some(&weight))
}

/// Energy profile, length, distance estimate, and (when computed against a
/// problem) the drift residual of the energy identity.
#[derive(Debug, Clone, Serialize)]
pub struct GeometryReport {
    /// E(t_k) = ⟨φ_t, φ_t⟩_{φ(t_k)} at every level.
    pub energy: Vec<f64>,
    /// Trapezoid of √E over the time grid.
    pub length: f64,
    /// The length of the solved ε-path; a surrogate for the metric-space
    /// distance, whose convergence for degenerate endpoints is open.
    pub distance: f64,
    /// ε the path was solved at, when known.
    pub epsilon: Option<f64>,
    /// |centered dE/dt − 2ε∫φ_t e^f dV| per interior level; empty unless the
    /// report was built against a problem.
    pub drift: Vec<f64>,
    /// Max of `drift` over the window t ∈ [1/8, 7/8]; see [`drift_check`].
    pub max_drift: Option<f64>,
}

/// φ_t at every level: centered differences at interior levels, one-sided
/// second-order stencils at the two boundary levels.
pub fn velocity(path: &GeodesicPath) -> Vec<f64> {
    let grid = path.grid();
    let ns = grid.spatial_len();
    let nt = grid.time_levels();
    let inv_2tau = 0.5 / grid.time_step();
    let v = path.values();
    let mut out = vec![0.0; v.len()];
    for i in 0..ns {
        out[i] = (-3.0 * v[i] + 4.0 * v[ns + i] - v[2 * ns + i]) * inv_2tau;
        let last = (nt - 1) * ns;
        out[last + i] =
            (3.0 * v[last + i] - 4.0 * v[last - ns + i] + v[last - 2 * ns + i]) * inv_2tau;
    }
    for idx in ns..(nt - 1) * ns {
        out[idx] = (v[idx + ns] - v[idx - ns]) * inv_2tau;
    }
    out
}

/// E(t_k) for all levels, with the level's own metric volume as weight.
pub fn energy_profile(path: &GeodesicPath) -> Result<Vec<f64>> {
    let grid = path.grid();
    let ns = grid.spatial_len();
    let vt = velocity(path);
    let det = MetricField::compute(grid, path.values())?.det_field();
    let mut energy = Vec::with_capacity(grid.time_levels());
    for k in 0..grid.time_levels() {
        let sq: Vec<f64> = vt[k * ns..(k + 1) * ns].iter().map(|&x| x * x).collect();
        energy.push(grid.integrate(&sq, Some(&det[k * ns..(k + 1) * ns]))?);
    }
    Ok(energy)
}

fn trapezoid_length(energy: &[f64], tau: f64) -> f64 {
    // Roundoff near degenerate metrics can push E a hair below zero.
    let speed: Vec<f64> = energy.iter().map(|&e| e.max(0.0).sqrt()).collect();
    let mut sum = 0.5 * (speed[0] + speed[speed.len() - 1]);
    sum += speed[1..speed.len() - 1].iter().sum::<f64>();
    tau * sum
}

/// Energy profile and trapezoidal length of a path; drift left empty.
pub fn path_energy_length(path: &GeodesicPath) -> Result<GeometryReport> {
    let energy = energy_profile(path)?;
    let length = trapezoid_length(&energy, path.grid().time_step());
    Ok(GeometryReport {
        energy,
        length,
        distance: length,
        epsilon: None,
        drift: Vec::new(),
        max_drift: None,
    })
}

/// |centered dE/dt − 2ε∫φ_t e^f dV| at interior levels. Along an exact
/// solution the identity holds and the residual is pure stencil error.
pub fn drift_profile(path: &GeodesicPath, problem: &HcmaProblem) -> Result<Vec<f64>> {
    let grid = path.grid();
    let ns = grid.spatial_len();
    let nt = grid.time_levels();
    let inv_2tau = 0.5 / grid.time_step();
    let epsilon = problem.epsilon();
    let energy = energy_profile(path)?;
    let vt = velocity(path);
    let mut drift = Vec::with_capacity(nt - 2);
    for k in 1..nt - 1 {
        let de_dt = (energy[k + 1] - energy[k - 1]) * inv_2tau;
        let weighted: Vec<f64> = (0..ns)
            .map(|i| vt[k * ns + i] * problem.f_at(k, i).exp())
            .collect();
        let rhs = 2.0 * epsilon * grid.integrate(&weighted, None)?;
        drift.push((de_dt - rhs).abs());
    }
    Ok(drift)
}

/// Max of the drift profile over the window t ∈ [1/8, 7/8]. Rows adjacent to
/// t = 0 and t = 1 feed on the one-sided boundary velocities, whose truncation
/// constant differs from the centered one, so their defect decays only at
/// O(τ); inside the fixed window every energy entering dE/dt is centered and
/// the max contracts at O(τ² + h²). Falls back to the full profile when the
/// time grid is too coarse for the window to contain a level.
fn windowed_max(profile: &[f64], tau: f64) -> f64 {
    let windowed = profile
        .iter()
        .enumerate()
        .filter(|&(i, _)| {
            let t = (i + 1) as f64 * tau;
            (0.125..=0.875).contains(&t)
        })
        .map(|(_, &d)| d)
        .fold(f64::NAN, f64::max);
    if windowed.is_nan() {
        profile.iter().cloned().fold(0.0, f64::max)
    } else {
        windowed
    }
}

/// Max drift residual over the interior window t ∈ [1/8, 7/8].
pub fn drift_check(path: &GeodesicPath, problem: &HcmaProblem) -> Result<f64> {
    let tau = path.grid().time_step();
    Ok(windowed_max(&drift_profile(path, problem)?, tau))
}

/// Energy, length, and drift in one report.
pub fn full_report(path: &GeodesicPath, problem: &HcmaProblem) -> Result<GeometryReport> {
    let mut report = path_energy_length(path)?;
    report.epsilon = Some(problem.epsilon());
    report.drift = drift_profile(path, problem)?;
    report.max_drift = Some(windowed_max(&report.drift, path.grid().time_step()));
    Ok(report)
}

/// Distance estimate read off a sweep: the length at the smallest ε whose
/// solve succeeded, with that ε recorded.
#[derive(Debug, Clone, Serialize)]
pub struct DistanceEstimate {
    pub distance: f64,
    pub epsilon: f64,
    pub geometry: GeometryReport,
}

pub fn distance_from_sweep(
    sweep: &SweepReport,
    template: &HcmaProblem,
) -> Result<DistanceEstimate> {
    let last = sweep.last().ok_or_else(|| {
        CoreError::InfeasibleInput("sweep produced no successful stage to measure".into())
    })?;
    let problem = template.with_epsilon(last.epsilon)?;
    let geometry = full_report(&last.report.path, &problem)?;
    Ok(DistanceEstimate {
        distance: geometry.length,
        epsilon: last.epsilon,
        geometry,
    })
}

/// d(φ₀,φ₂) − d(φ₀,φ₁) − d(φ₁,φ₂). Whether this is ever positive for
/// degenerate endpoints is open; callers report the value, never assert a
/// sign.
pub fn triangle_defect(d01: f64, d12: f64, d02: f64) -> f64 {
    d02 - d01 - d12
}
