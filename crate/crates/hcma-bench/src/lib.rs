//! Shared fixtures for the benchmarks: a mid-size feasible path and its
//! problem, built once per harness.

use hcma_core::equation::{DensityField, HcmaProblem, PathState};
use hcma_core::grid::TorusGrid;
use hcma_core::path::GeodesicPath;
use hcma_core::potential::KahlerPotential;

pub struct Fixture {
    pub grid: TorusGrid,
    pub problem: HcmaProblem,
    pub path: GeodesicPath,
}

/// Degenerate-cosine endpoint against zero with the affine-plus-bubble
/// initial guess: feasible everywhere, representative stencil work.
pub fn fixture(n: usize, nodes: usize, nt: usize, epsilon: f64) -> Fixture {
    let grid = TorusGrid::new(n, nodes, nt).expect("bench grid");
    let problem = HcmaProblem::new(grid, epsilon, DensityField::Zero).expect("bench problem");
    let mut mode = vec![0i32; grid.axes()];
    mode[0] = 1;
    let phi1 = KahlerPotential::make_degenerate_endpoint(grid, 0.5, &mode)
        .expect("bench endpoint")
        .smooth_approx(0.1)
        .expect("bench smoothing");
    let phi0 = KahlerPotential::zero(grid);
    let path = GeodesicPath::initial_guess(&phi0, &phi1, epsilon, None).expect("bench path");
    Fixture {
        grid,
        problem,
        path,
    }
}

pub fn state_of(fx: &Fixture) -> PathState {
    PathState::compute(&fx.grid, fx.path.values()).expect("bench state")
}
