//! Closed-form trigonometric space-time fields with every derivative the
//! solver and the verification suites need.
//!
//! A field is a finite sum of modes γ·p(t)·e^{2πi k·u} over u = (x₁, y₁, x₂, y₂)
//! with polynomial-in-time envelopes, stored in conjugate pairs so the sum is
//! real.  Holomorphic derivatives act multiplicatively on each mode:
//!
//!   ∂_{z_j} ↦ ζ_j = π(k_{y_j} + i k_{x_j}),      ∂_{z̄_j} ↦ ξ_j = π(−k_{y_j} + i k_{x_j}),
//!
//! so arbitrary mixed jets are products of symbols.  The Laplacian is
//! Δ = Σ_j ∂_{z_j}∂_{z̄_j}, matching the quarter-sum normalization of the
//! discrete operator.

use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::grid::TorusGrid;
use crate::path::GeodesicPath;
use crate::potential::Herm2;

const TAU: f64 = std::f64::consts::TAU;
const PI: f64 = std::f64::consts::PI;

#[derive(Debug, Clone)]
struct Mode {
    gamma: Complex64,
    k: [i32; 4],
    // Envelope coefficients: p(t) = Σ_j poly[j] t^j.
    poly: Vec<f64>,
}

impl Mode {
    fn zeta(&self, j: usize) -> Complex64 {
        Complex64::new(PI * self.k[2 * j + 1] as f64, PI * self.k[2 * j] as f64)
    }

    fn xi(&self, j: usize) -> Complex64 {
        Complex64::new(-PI * self.k[2 * j + 1] as f64, PI * self.k[2 * j] as f64)
    }

    fn envelope(&self, t: f64) -> (f64, f64, f64) {
        let (mut p, mut dp, mut ddp) = (0.0, 0.0, 0.0);
        for (j, &cj) in self.poly.iter().enumerate().rev() {
            let _ = j;
            ddp = ddp * t + 2.0 * dp;
            dp = dp * t + p;
            p = p * t + cj;
        }
        (p, dp, ddp)
    }

    fn wave(&self, x: &[f64; 4]) -> Complex64 {
        let phase: f64 = (0..4).map(|a| TAU * self.k[a] as f64 * x[a]).sum();
        self.gamma * Complex64::new(phase.cos(), phase.sin())
    }
}

/// Full set of continuum derivatives of a real field at one space-time point,
/// in the tensor layout used by the pointwise verification suites.
#[derive(Debug, Clone, Copy)]
pub struct AnalyticJet {
    pub n: usize,
    pub value: f64,
    pub phi_t: f64,
    pub phi_tt: f64,
    /// φ_i = ∂_{z_i}φ.
    pub grad: [Complex64; 2],
    /// φ_ij̄ (Hermitian).
    pub hess: [[Complex64; 2]; 2],
    /// v_i = φ_ti.
    pub v: [Complex64; 2],
    /// T[i][j][k] = φ_{i j̄ k} (symmetric in i ↔ k).
    pub t3: [[[Complex64; 2]; 2]; 2],
    /// a[i][k] = φ_{t i k} (symmetric).
    pub a: [[Complex64; 2]; 2],
    /// b[i][k] = φ_{t i k̄} (conj(b[r][k]) = b[k][r]).
    pub b: [[Complex64; 2]; 2],
    /// L[p][q] = (Δφ)_{p q̄} (Hermitian).
    pub l4: [[Complex64; 2]; 2],
    /// w_i = (Δφ)_{t i}.
    pub w: [Complex64; 2],
    /// Δφ.
    pub lap: f64,
    /// (Δφ)_t.
    pub lap_t: f64,
    /// (Δφ)_k = ∂_{z_k}Δφ.
    pub lap_grad: [Complex64; 2],
}

impl AnalyticJet {
    /// Metric g + φ_ij̄ at the point.
    pub fn metric(&self) -> Herm2 {
        Herm2 {
            n: self.n,
            d1: 1.0 + self.hess[0][0].re,
            d2: 1.0 + self.hess[1][1].re,
            off: self.hess[0][1],
        }
    }

    /// c = φ_tt − |∇φ_t|²_φ; requires an invertible metric.
    pub fn twist(&self) -> f64 {
        let g = self.metric();
        self.phi_tt - g.inverse().dagger_form(self.v)
    }
}

/// A real trigonometric space-time field.
#[derive(Debug, Clone, Default)]
pub struct TrigPoly {
    n: usize,
    modes: Vec<Mode>,
}

impl TrigPoly {
    pub fn new(n: usize) -> Self {
        Self {
            n,
            modes: Vec::new(),
        }
    }

    pub fn complex_dim(&self) -> usize {
        self.n
    }

    /// Adds amp·p(t)·cos(2π k·u + phase-free) via a conjugate mode pair.
    /// Axes beyond 2n must carry zero frequency.
    pub fn add_real_mode(&mut self, amp: f64, k: [i32; 4], poly: &[f64]) -> &mut Self {
        assert!(
            k[2 * self.n..].iter().all(|&m| m == 0),
            "mode excites axes beyond the torus dimension"
        );
        let half = Complex64::new(0.5 * amp, 0.0);
        self.modes.push(Mode {
            gamma: half,
            k,
            poly: poly.to_vec(),
        });
        self.modes.push(Mode {
            gamma: half.conj(),
            k: [-k[0], -k[1], -k[2], -k[3]],
            poly: poly.to_vec(),
        });
        self
    }

    /// The convexifying bubble μ(t² − t) as a zero-frequency mode.
    pub fn add_bubble(&mut self, mu: f64) -> &mut Self {
        self.modes.push(Mode {
            gamma: Complex64::new(mu, 0.0),
            k: [0; 4],
            poly: vec![0.0, -1.0, 1.0],
        });
        self
    }

    /// Small random field whose time envelope t(1−t)(q₀ + q₁t) vanishes at
    /// both endpoints, plus a bubble; feasible as a path for small `amp`.
    pub fn random_feasible(n: usize, seed: u64, amp: f64, mu: f64) -> Self {
        Self::random_feasible_modes(n, seed, amp, mu, 2)
    }

    /// `random_feasible` with the wave-number cap exposed; lower caps enter
    /// the asymptotic stencil regime on coarser grids.
    pub fn random_feasible_modes(n: usize, seed: u64, amp: f64, mu: f64, max_freq: i32) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut field = Self::new(n);
        field.add_bubble(mu);
        for _ in 0..4 {
            let mut k = [0i32; 4];
            loop {
                for a in 0..2 * n {
                    k[a] = rng.gen_range(-max_freq..=max_freq);
                }
                if k.iter().any(|&m| m != 0) {
                    break;
                }
            }
            let a = amp * rng.gen_range(0.2..1.0);
            let q0 = rng.gen_range(-1.0..1.0);
            let q1 = rng.gen_range(-1.0..1.0);
            // t(1−t)(q₀ + q₁t) = q₀t + (q₁−q₀)t² − q₁t³.
            field.add_real_mode(a, k, &[0.0, q0, q1 - q0, -q1]);
        }
        field
    }

    /// Same shape but with a free (non-vanishing) time envelope, for
    /// perturbation directions that exercise the boundary stencils.
    pub fn random_direction(n: usize, seed: u64, amp: f64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut field = Self::new(n);
        for _ in 0..3 {
            let mut k = [0i32; 4];
            for a in 0..2 * n {
                k[a] = rng.gen_range(-2i32..=2);
            }
            let a = amp * rng.gen_range(0.2..1.0);
            let p: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect();
            if k.iter().all(|&m| m == 0) {
                field.modes.push(Mode {
                    gamma: Complex64::new(a, 0.0),
                    k,
                    poly: p,
                });
            } else {
                field.add_real_mode(a, k, &p);
            }
        }
        field
    }

    pub fn eval(&self, t: f64, x: &[f64; 4]) -> f64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for m in &self.modes {
            acc += m.wave(x) * m.envelope(t).0;
        }
        acc.re
    }

    /// All derivatives at (t, x) via symbol products.
    pub fn jet(&self, t: f64, x: &[f64; 4]) -> AnalyticJet {
        let zero = Complex64::new(0.0, 0.0);
        let mut value = zero;
        let mut phi_t = zero;
        let mut phi_tt = zero;
        let mut grad = [zero; 2];
        let mut hess = [[zero; 2]; 2];
        let mut v = [zero; 2];
        let mut t3 = [[[zero; 2]; 2]; 2];
        let mut a = [[zero; 2]; 2];
        let mut b = [[zero; 2]; 2];
        let mut l4 = [[zero; 2]; 2];
        let mut w = [zero; 2];
        let mut lap = zero;
        let mut lap_t = zero;
        let mut lap_grad = [zero; 2];
        for m in &self.modes {
            let e = m.wave(x);
            let (p, dp, ddp) = m.envelope(t);
            let (ep, edp, eddp) = (e * p, e * dp, e * ddp);
            value += ep;
            phi_t += edp;
            phi_tt += eddp;
            let zs: Vec<Complex64> = (0..self.n).map(|j| m.zeta(j)).collect();
            let xs: Vec<Complex64> = (0..self.n).map(|j| m.xi(j)).collect();
            let s: Complex64 = (0..self.n).map(|j| zs[j] * xs[j]).sum();
            lap += s * ep;
            lap_t += s * edp;
            for i in 0..self.n {
                grad[i] += zs[i] * ep;
                v[i] += zs[i] * edp;
                w[i] += s * zs[i] * edp;
                lap_grad[i] += s * zs[i] * ep;
                for j in 0..self.n {
                    hess[i][j] += zs[i] * xs[j] * ep;
                    a[i][j] += zs[i] * zs[j] * edp;
                    b[i][j] += zs[i] * xs[j] * edp;
                    l4[i][j] += s * zs[i] * xs[j] * ep;
                    for k in 0..self.n {
                        t3[i][j][k] += zs[i] * xs[j] * zs[k] * ep;
                    }
                }
            }
        }
        AnalyticJet {
            n: self.n,
            value: value.re,
            phi_t: phi_t.re,
            phi_tt: phi_tt.re,
            grad,
            hess,
            v,
            t3,
            a,
            b,
            l4,
            w,
            lap: lap.re,
            lap_t: lap_t.re,
            lap_grad,
        }
    }

    /// Samples the field on every node of a space-time grid.
    pub fn sample_path(&self, grid: &TorusGrid) -> GeodesicPath {
        GeodesicPath::from_fn(*grid, |k, i| {
            let t = grid.time_of(k);
            self.eval(t, &node_position(grid, i))
        })
    }

    /// Samples the field at fixed time on the spatial grid.
    pub fn sample_spatial(&self, grid: &TorusGrid, t: f64) -> Vec<f64> {
        (0..grid.spatial_len())
            .map(|i| self.eval(t, &node_position(grid, i)))
            .collect()
    }
}

/// Coordinates of spatial node i, padded to 4 axes.
pub fn node_position(grid: &TorusGrid, i: usize) -> [f64; 4] {
    let c = grid.node_coords(i);
    let mut x = [0.0; 4];
    for (a, &ci) in c.iter().enumerate() {
        x[a] = grid.axis_coord(ci);
    }
    x
}
