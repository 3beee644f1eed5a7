//! Space-time paths of potentials with fixed endpoints.
//!
//! A path stores φ(t_k, ·) for every time level t_k = k/(Nt−1), flattened
//! t-major.  Levels 0 and Nt−1 are boundary data; the solver updates only
//! interior levels.

use crate::error::CoreError;
use crate::grid::TorusGrid;
use crate::potential::{KahlerPotential, TOL_STRICT};
use crate::Result;

/// A discrete path t ↦ φ(t) ∈ C^∞(M), flattened t-major.
#[derive(Debug, Clone)]
pub struct GeodesicPath {
    grid: TorusGrid,
    values: Vec<f64>,
}

impl GeodesicPath {
    pub fn new(grid: TorusGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.spacetime_len() {
            return Err(CoreError::DimensionMismatch {
                expected: grid.spacetime_len(),
                got: values.len(),
            });
        }
        Ok(Self { grid, values })
    }

    /// Builds a path levelwise from a closure of (level, node) index.
    pub fn from_fn(grid: TorusGrid, f: impl Fn(usize, usize) -> f64) -> Self {
        let ns = grid.spatial_len();
        let values = (0..grid.spacetime_len())
            .map(|i| f(i / ns, i % ns))
            .collect();
        Self { grid, values }
    }

    /// Linear interpolation plus the convexifying bubble μ·(t² − t):
    ///
    ///   φ(t) = (1 − t)φ₀ + t φ₁ + μ(t² − t).
    ///
    /// The spatial Hessian is independent of μ, so the interpolant stays
    /// admissible whenever the blend of endpoints is.  With
    /// μ ≥ sup |∇(φ₁ − φ₀)|²_{g(t,x)} the twist term satisfies
    /// c = 2μ − |∇φ_t|²_φ ≥ μ > 0 at every node, so the guess is feasible.
    /// `mu = None` picks that bound automatically (floored at ε/2, which for
    /// equal endpoints makes the guess the exact solution of the ε-flow).
    pub fn initial_guess(
        phi0: &KahlerPotential,
        phi1: &KahlerPotential,
        epsilon: f64,
        mu: Option<f64>,
    ) -> Result<Self> {
        let grid = *phi0.grid();
        if phi1.grid() != &grid {
            return Err(CoreError::InvalidParameter(
                "endpoint grids disagree".into(),
            ));
        }
        for (name, phi) in [("phi0", phi0), ("phi1", phi1)] {
            let m = phi.classify();
            if m.tag == crate::potential::SpaceTag::Inadmissible {
                return Err(CoreError::InfeasibleInput(format!(
                    "endpoint {name} is inadmissible (min metric eigenvalue {:.3e})",
                    m.min_metric_eig
                )));
            }
        }
        let mu = match mu {
            Some(m) if m > 0.0 => m,
            Some(m) => {
                return Err(CoreError::InvalidParameter(format!(
                    "convexification μ must be positive, got {m}"
                )))
            }
            None => Self::auto_mu(phi0, phi1, epsilon)?,
        };
        let ns = grid.spatial_len();
        let v0 = phi0.values();
        let v1 = phi1.values();
        let mut values = vec![0.0; grid.spacetime_len()];
        for k in 0..grid.time_levels() {
            let t = grid.time_of(k);
            let bubble = mu * (t * t - t);
            for i in 0..ns {
                values[k * ns + i] = (1.0 - t) * v0[i] + t * v1[i] + bubble;
            }
        }
        Ok(Self { grid, values })
    }

    /// μ = max(ε/2, sup_{t,x} |∇(φ₁ − φ₀)|²_{g(t,x)}) over interior levels.
    /// Near-degenerate nodes (min eig < strict tolerance) fall back to the
    /// background norm; the inverse metric would not be trustworthy there.
    pub fn auto_mu(phi0: &KahlerPotential, phi1: &KahlerPotential, epsilon: f64) -> Result<f64> {
        let grid = *phi0.grid();
        let n = grid.complex_dim();
        let ns = grid.spatial_len();
        let diff: Vec<f64> = phi1
            .values()
            .iter()
            .zip(phi0.values())
            .map(|(&a, &b)| a - b)
            .collect();
        let mut dz = Vec::with_capacity(n);
        for j in 0..n {
            dz.push(grid.dz(&diff, j)?);
        }
        let mut sup = 0.0f64;
        for k in 1..grid.time_levels() - 1 {
            let t = grid.time_of(k);
            let blend: Vec<f64> = phi0
                .values()
                .iter()
                .zip(phi1.values())
                .map(|(&a, &b)| (1.0 - t) * a + t * b)
                .collect();
            let metric = crate::potential::MetricField::compute(&grid, &blend)?;
            for i in 0..ns {
                let h = metric.at(i);
                let v = [
                    dz[0][i],
                    if n == 2 {
                        dz[1][i]
                    } else {
                        num_complex::Complex64::new(0.0, 0.0)
                    },
                ];
                let q = if h.min_eig() < TOL_STRICT {
                    v[0].norm_sqr() + v[1].norm_sqr()
                } else {
                    h.inverse().dagger_form(v)
                };
                sup = sup.max(q);
            }
        }
        Ok(sup.max(0.5 * epsilon))
    }

    pub fn grid(&self) -> &TorusGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn level(&self, k: usize) -> &[f64] {
        let ns = self.grid.spatial_len();
        &self.values[k * ns..(k + 1) * ns]
    }

    pub fn level_mut(&mut self, k: usize) -> &mut [f64] {
        let ns = self.grid.spatial_len();
        &mut self.values[k * ns..(k + 1) * ns]
    }

    pub fn endpoint(&self, which: usize) -> KahlerPotential {
        let k = if which == 0 {
            0
        } else {
            self.grid.time_levels() - 1
        };
        KahlerPotential::new(self.grid, self.level(k).to_vec()).expect("level length matches grid")
    }

    /// Replaces the boundary levels, e.g. after re-smoothing endpoints
    /// during continuation.
    pub fn set_endpoints(&mut self, phi0: &KahlerPotential, phi1: &KahlerPotential) {
        let last = self.grid.time_levels() - 1;
        self.level_mut(0).copy_from_slice(phi0.values());
        self.level_mut(last).copy_from_slice(phi1.values());
    }

    /// The path run backwards in time: level k ↦ level Nt−1−k.
    pub fn reverse_time(&self) -> Self {
        let ns = self.grid.spatial_len();
        let nt = self.grid.time_levels();
        let mut values = vec![0.0; self.values.len()];
        for k in 0..nt {
            values[(nt - 1 - k) * ns..(nt - k) * ns].copy_from_slice(self.level(k));
        }
        Self {
            grid: self.grid,
            values,
        }
    }

    /// sup over interior space-time nodes of |∂_t φ| (centered stencil).
    pub fn sup_phi_t(&self) -> f64 {
        let dt = self.grid.dt(&self.values).expect("validated");
        let ns = self.grid.spatial_len();
        dt[ns..dt.len() - ns]
            .iter()
            .fold(0.0f64, |m, &v| m.max(v.abs()))
    }

    /// sup over all levels and nodes of |∇φ| in the background metric.
    pub fn sup_grad(&self) -> f64 {
        let mut sup = 0.0f64;
        for j in 0..self.grid.complex_dim() {
            let d = self.grid.dz(&self.values, j).expect("validated");
            for v in d {
                sup = sup.max(v.norm_sqr());
            }
        }
        sup.sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn grid() -> TorusGrid {
        TorusGrid::new(1, 32, 9).unwrap()
    }

    #[test]
    fn flat_endpoints_auto_mu_is_half_epsilon() {
        let g = grid();
        let phi0 = KahlerPotential::zero(g);
        let phi1 = KahlerPotential::constant(g, 0.3);
        let eps = 1e-2;
        let path = GeodesicPath::initial_guess(&phi0, &phi1, eps, None).unwrap();
        // φ(t,x) = 0.3t + (ε/2)(t² − t), independent of x.
        for k in 0..g.time_levels() {
            let t = g.time_of(k);
            let expect = 0.3 * t + 0.5 * eps * (t * t - t);
            for &v in path.level(k) {
                assert_abs_diff_eq!(v, expect, epsilon = 1e-15);
            }
        }
    }

    #[test]
    fn endpoints_are_preserved_exactly() {
        let g = grid();
        let phi0 = KahlerPotential::make_degenerate_endpoint(g, 0.9, &[1, 0]).unwrap();
        let phi1 = KahlerPotential::make_degenerate_endpoint(g, 0.5, &[0, 1]).unwrap();
        let path = GeodesicPath::initial_guess(&phi0, &phi1, 1e-3, None).unwrap();
        assert_eq!(path.level(0), phi0.values());
        assert_eq!(path.level(g.time_levels() - 1), phi1.values());
    }

    #[test]
    fn inadmissible_endpoint_is_rejected() {
        let g = grid();
        let base = KahlerPotential::make_degenerate_endpoint(g, 1.0, &[1, 0]).unwrap();
        let bad =
            KahlerPotential::new(g, base.values().iter().map(|&v| 3.0 * v).collect()).unwrap();
        let err = GeodesicPath::initial_guess(&bad, &KahlerPotential::zero(g), 1e-2, None)
            .unwrap_err();
        assert!(matches!(err, CoreError::InfeasibleInput(_)));
    }

    #[test]
    fn nonpositive_mu_is_rejected() {
        let g = grid();
        let z = KahlerPotential::zero(g);
        assert!(GeodesicPath::initial_guess(&z, &z, 1e-2, Some(0.0)).is_err());
        assert!(GeodesicPath::initial_guess(&z, &z, 1e-2, Some(-1.0)).is_err());
    }

    #[test]
    fn reverse_is_involutive_and_swaps_endpoints() {
        let g = grid();
        let phi0 = KahlerPotential::zero(g);
        let phi1 = KahlerPotential::make_degenerate_endpoint(g, 0.4, &[1, 0]).unwrap();
        let path = GeodesicPath::initial_guess(&phi0, &phi1, 1e-2, None).unwrap();
        let rev = path.reverse_time();
        assert_eq!(rev.level(0), phi1.values());
        assert_eq!(rev.reverse_time().values(), path.values());
    }

    #[test]
    fn auto_mu_bounds_twist_away_from_zero() {
        let g = TorusGrid::new(1, 48, 9).unwrap();
        let phi0 = KahlerPotential::zero(g);
        let phi1 = KahlerPotential::make_degenerate_endpoint(g, 0.7, &[2, 1]).unwrap();
        let eps = 1e-3;
        let path = GeodesicPath::initial_guess(&phi0, &phi1, eps, None).unwrap();
        // Check c = φ_tt − |∇φ_t|²_φ ≥ ε/2 at every interior node directly.
        let dtt = g.dtt(path.values()).unwrap();
        let dt = g.dt(path.values()).unwrap();
        let ns = g.spatial_len();
        let mut min_c = f64::INFINITY;
        for k in 1..g.time_levels() - 1 {
            let metric =
                crate::potential::MetricField::compute(&g, path.level(k)).unwrap();
            let dt_level: Vec<f64> = dt[k * ns..(k + 1) * ns].to_vec();
            let vt = g.dz(&dt_level, 0).unwrap();
            for i in 0..ns {
                let idx = k * ns + i;
                let inv = metric.at(i).inverse();
                let grad = inv.dagger_form([vt[i], num_complex::Complex64::new(0.0, 0.0)]);
                min_c = min_c.min(dtt[idx] - grad);
            }
        }
        assert!(min_c >= 0.5 * eps - 1e-12, "min c = {min_c}");
    }
}
