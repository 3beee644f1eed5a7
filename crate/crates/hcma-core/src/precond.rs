//! Fast-diagonalization inverse of the constant-coefficient model operator
//! Δ + (1/c̄)∂_tt with zero boundary values in t and periodic space.
//!
//! DFT along every spatial axis turns the spatial Laplacian into a
//! multiplier; what remains couples only the interior time levels of a single
//! frequency, a symmetric tridiagonal system solved by the Thomas algorithm.
//! The linearized operator is a compact perturbation of this model near flat
//! states, so it is the natural Krylov preconditioner.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::CoreError;
use crate::grid::TorusGrid;
use crate::Result;

pub struct FastDiagPrecond {
    grid: TorusGrid,
    /// 1/(c̄ τ²), the time-difference weight.
    alpha: f64,
    /// Spatial multiplier −N² Σ_a sin²(π b_a/N) indexed by frequency node.
    symbol: Vec<f64>,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl FastDiagPrecond {
    pub fn new(grid: &TorusGrid, cbar: f64) -> Result<Self> {
        if !cbar.is_finite() || cbar <= 0.0 {
            return Err(CoreError::InvalidParameter(format!(
                "preconditioner needs a positive median twist, got {cbar}"
            )));
        }
        let n = grid.nodes_per_axis();
        let nsq = (n * n) as f64;
        let mut symbol = vec![0.0; grid.spatial_len()];
        for (node, s) in symbol.iter_mut().enumerate() {
            let coords = grid.node_coords(node);
            *s = -nsq
                * coords
                    .iter()
                    .map(|&b| {
                        let w = (std::f64::consts::PI * b as f64 / n as f64).sin();
                        w * w
                    })
                    .sum::<f64>();
        }
        let tau = grid.time_step();
        let mut planner = FftPlanner::new();
        Ok(Self {
            grid: *grid,
            alpha: 1.0 / (cbar * tau * tau),
            symbol,
            fwd: planner.plan_fft_forward(n),
            inv: planner.plan_fft_inverse(n),
        })
    }

    /// In-place transform of every line along `axis` in each of the `levels`
    /// spatial blocks.
    fn fft_axis(&self, data: &mut [Complex64], levels: usize, axis: usize, plan: &Arc<dyn Fft<f64>>) {
        let n = self.grid.nodes_per_axis();
        let ns = self.grid.spatial_len();
        let stride = self.grid.stride(axis);
        let outer = ns / (n * stride);
        let mut line = vec![Complex64::new(0.0, 0.0); n];
        let mut scratch = vec![Complex64::new(0.0, 0.0); plan.get_inplace_scratch_len()];
        for level in 0..levels {
            let block = &mut data[level * ns..(level + 1) * ns];
            for o in 0..outer {
                for i in 0..stride {
                    let base = o * n * stride + i;
                    for j in 0..n {
                        line[j] = block[base + j * stride];
                    }
                    plan.process_with_scratch(&mut line, &mut scratch);
                    for j in 0..n {
                        block[base + j * stride] = line[j];
                    }
                }
            }
        }
    }

    /// Applies the inverse model operator.  Input and output are full
    /// space-time fields; boundary time levels of the output are zero and
    /// boundary values of the input are ignored.
    pub fn apply(&self, r: &[f64]) -> Vec<f64> {
        let ns = self.grid.spatial_len();
        let nt = self.grid.time_levels();
        let levels = nt - 2;
        debug_assert_eq!(r.len(), self.grid.spacetime_len());
        let mut data: Vec<Complex64> = r[ns..(nt - 1) * ns]
            .iter()
            .map(|&v| Complex64::new(v, 0.0))
            .collect();
        for axis in 0..self.grid.axes() {
            self.fft_axis(&mut data, levels, axis, &self.fwd);
        }
        // Per frequency: α z_{k−1} + (σ − 2α) z_k + α z_{k+1} = r̂_k, Dirichlet.
        let alpha = self.alpha;
        let mut cprime = vec![0.0; levels];
        let mut dprime = vec![Complex64::new(0.0, 0.0); levels];
        for node in 0..ns {
            let beta = self.symbol[node] - 2.0 * alpha;
            let mut denom = beta;
            cprime[0] = alpha / denom;
            dprime[0] = data[node] / denom;
            for k in 1..levels {
                denom = beta - alpha * cprime[k - 1];
                cprime[k] = alpha / denom;
                dprime[k] = (data[k * ns + node] - alpha * dprime[k - 1]) / denom;
            }
            let mut z = dprime[levels - 1];
            data[(levels - 1) * ns + node] = z;
            for k in (0..levels - 1).rev() {
                z = dprime[k] - cprime[k] * z;
                data[k * ns + node] = z;
            }
        }
        for axis in 0..self.grid.axes() {
            self.fft_axis(&mut data, levels, axis, &self.inv);
        }
        let scale = 1.0 / ns as f64;
        let mut out = vec![0.0; self.grid.spacetime_len()];
        for (i, v) in data.iter().enumerate() {
            out[ns + i] = v.re * scale;
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// The forward model operator with the same stencils the symbol encodes.
    fn apply_model(grid: &TorusGrid, cbar: f64, h: &[f64]) -> Vec<f64> {
        let lap = grid.lap(h).unwrap();
        let htt = grid.dtt(h).unwrap();
        let ns = grid.spatial_len();
        let nt = grid.time_levels();
        let mut out = vec![0.0; h.len()];
        for idx in ns..(nt - 1) * ns {
            out[idx] = lap[idx] + htt[idx] / cbar;
        }
        out
    }

    #[test]
    fn inverts_the_model_operator_exactly() {
        for (n, nodes, nt) in [(1usize, 16usize, 9usize), (2, 8, 7)] {
            let grid = TorusGrid::new(n, nodes, nt).unwrap();
            let cbar = 0.37;
            let pre = FastDiagPrecond::new(&grid, cbar).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(9);
            let ns = grid.spatial_len();
            let mut h = vec![0.0; grid.spacetime_len()];
            for v in h[ns..(nt - 1) * ns].iter_mut() {
                *v = rng.gen_range(-1.0..1.0);
            }
            let r = apply_model(&grid, cbar, &h);
            let z = pre.apply(&r);
            let scale = h.iter().fold(0.0f64, |m, &v| m.max(v.abs()));
            let err = z
                .iter()
                .zip(&h)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0f64, f64::max);
            assert!(err <= 1e-11 * scale, "n={n} err {err} scale {scale}");
        }
    }

    #[test]
    fn boundary_levels_stay_zero() {
        let grid = TorusGrid::new(1, 8, 7).unwrap();
        let pre = FastDiagPrecond::new(&grid, 1.0).unwrap();
        let r = vec![1.0; grid.spacetime_len()];
        let z = pre.apply(&r);
        let ns = grid.spatial_len();
        assert!(z[..ns].iter().all(|&v| v == 0.0));
        assert!(z[z.len() - ns..].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn rejects_nonpositive_median_twist() {
        let grid = TorusGrid::new(1, 8, 5).unwrap();
        assert!(FastDiagPrecond::new(&grid, 0.0).is_err());
        assert!(FastDiagPrecond::new(&grid, f64::NAN).is_err());
    }
}
