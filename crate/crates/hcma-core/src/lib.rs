//! Numerical laboratory for the ε-regularized geodesic equation in the space
//! of Kähler potentials on the flat torus M = (C/Z²)ⁿ, n ∈ {1, 2}.
//!
//! A path t ↦ φ(t, ·) of potentials on M × [0, 1] solves
//!
//! ```text
//! (φ_tt − |∇φ_t|²_φ) · det(g + φ_ij̄) = ε e^f,      φ(0) = φ₀,  φ(1) = φ₁,
//! ```
//!
//! where g is the flat background metric (det g = 1, curvature 0) and
//! |∇φ_t|²_φ = g_φ^{ij̄} φ_ti φ_tj̄.  As ε → 0 solutions approximate geodesics
//! for the Mabuchi metric ⟨ψ₁, ψ₂⟩_φ = ∫ ψ₁ ψ₂ ω_φⁿ.
//!
//! Everything is discretized with second-order centered stencils on a uniform
//! periodic grid in space and a uniform non-periodic grid in time.  The crate
//! is organized bottom-up:
//!
//! * [`grid`] — torus grids, derivative stencils, quadrature.
//! * [`potential`] — potentials, membership tags (ℋ, ℋ_{1,1}, ℋ_∞), smoothing.
//! * [`path`] — space-time paths and pointwise state (metric, c, n + Δφ).
//! * [`equation`] — log-form residual and its exact linearization.
//! * [`solver`] — damped inexact Newton with a fast-diagonalization preconditioner.
//! * [`continuation`] — warm-started ε-sweeps with endpoint smoothing.
//! * [`geometry`] — Mabuchi inner products, path energy/length, drift identity.
//! * [`estimate`] — Laplacian bounds and the maximum-principle certificate.
//! * [`oracle`] — randomized pointwise verification of the tensor inequalities.
//! * [`analytic`] — closed-form trigonometric test potentials.

pub mod analytic;
pub mod continuation;
pub mod equation;
pub mod error;
pub mod estimate;
pub mod geometry;
pub mod grid;
pub mod oracle;
pub mod path;
pub mod potential;
pub mod solver;

mod krylov;
mod precond;

pub use continuation::{sweep, SweepReport, SweepSchedule};
pub use equation::{DensityField, HcmaProblem, PathState, PointwiseState};
pub use error::CoreError;
pub use estimate::{mp_certificate, EstimateReport, LaplacianReport};
pub use geometry::{DistanceEstimate, GeometryReport};
pub use grid::TorusGrid;
pub use path::GeodesicPath;
pub use potential::{KahlerPotential, SpaceMembership, SpaceTag};
pub use solver::{solve, SolveOptions, SolveReport};

/// Convenience result alias used across the crate.
pub type Result<T> = std::result::Result<T, CoreError>;
