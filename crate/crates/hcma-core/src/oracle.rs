//! Randomized pointwise verification of the tensor inequalities behind the
//! interior C² estimate.
//!
//! Every check works on the data visible at one space-time point, written in
//! a frame where the metric is diagonal with eigenvalues λ_i:
//!
//! * v_i = φ_ti,
//! * T[r][s][k] = φ_{r s̄ k}   (symmetric in r ↔ k),
//! * a[r][k] = φ_{t r k}      (symmetric),
//! * b[r][k] = φ_{t r k̄}      (conj(b[r][k]) = b[k][r]),
//! * λ_i > 0 and the twist c > 0.
//!
//! The third-order block III of Δ_φ-applied-to-|∇φ_t|²_φ admits two
//! algebraically equal forms: a four-term direct contraction and a
//! sum-of-squares form III = A₁ + A₂ with
//!
//!   A₁ = Σ_{r,k} (1/λ_r)|M_{rk} − b[r][k]|²,  M_{rk} = Σ_i v_i conj(T[i][r][k])/λ_i,
//!   A₂ = Σ_{r,k} (1/λ_r)|N_{rk} − a[r][k]|²,  N_{rk} = Σ_i v_i T[r][i][k]/λ_i.
//!
//! The squares form makes III ≥ 0 manifest and feeds the transport bound
//! III·(Σλ) ≥ |W|² with W = (Δφ)_t − Σ_i v_i conj((Δφ)_i)/λ_i.  Each suite
//! draws a deterministic stream of random constrained samples and records the
//! worst relative slack; samples can also be extracted from solved paths.

use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::analytic::{node_position, TrigPoly};
use crate::equation::PathState;
use crate::error::CoreError;
use crate::grid::TorusGrid;
use crate::potential::MetricField;
use crate::Result;

pub const DEFAULT_SEED: u64 = 0x5EED;
pub const DEFAULT_SAMPLES: u64 = 100_000;
/// Inequalities must not be violated by more than this, relative to scale.
pub const REL_TOL: f64 = 1e-12;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Pointwise data in the diagonal frame.
#[derive(Debug, Clone)]
pub struct PointSample {
    pub n: usize,
    pub lambda: [f64; 2],
    pub c: f64,
    pub v: [Complex64; 2],
    pub t: [[[Complex64; 2]; 2]; 2],
    pub a: [[Complex64; 2]; 2],
    pub b: [[Complex64; 2]; 2],
}

fn unit_complex(rng: &mut impl Rng) -> Complex64 {
    Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
}

impl PointSample {
    /// Deterministic sample `index` of the stream for `seed`: eigenvalues and
    /// twist in [0.1, 10], tensor entries in the unit box, symmetries
    /// enforced by construction.
    pub fn random(n: usize, seed: u64, index: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(index);
        Self::draw(n, &mut rng)
    }

    pub fn draw(n: usize, rng: &mut impl Rng) -> Self {
        let mut s = Self {
            n,
            lambda: [1.0; 2],
            c: 1.0,
            v: [ZERO; 2],
            t: [[[ZERO; 2]; 2]; 2],
            a: [[ZERO; 2]; 2],
            b: [[ZERO; 2]; 2],
        };
        for i in 0..n {
            s.lambda[i] = rng.gen_range(0.1..10.0);
        }
        s.c = rng.gen_range(0.1..10.0);
        for i in 0..n {
            s.v[i] = unit_complex(rng);
        }
        // T free wedge: r ≤ k, all middle slots.
        for r in 0..n {
            for j in 0..n {
                for k in r..n {
                    let e = unit_complex(rng);
                    s.t[r][j][k] = e;
                    s.t[k][j][r] = e;
                }
            }
        }
        // a symmetric.
        for r in 0..n {
            for k in r..n {
                let e = unit_complex(rng);
                s.a[r][k] = e;
                s.a[k][r] = e;
            }
        }
        // b Hermitian pattern: real diagonal, conjugate mirror.
        for r in 0..n {
            s.b[r][r] = Complex64::new(rng.gen_range(-1.0..1.0), 0.0);
        }
        if n == 2 {
            let e = unit_complex(rng);
            s.b[0][1] = e;
            s.b[1][0] = e.conj();
        }
        s
    }

    pub fn lambda_sum(&self) -> f64 {
        self.lambda[..self.n].iter().sum()
    }

    /// Σ |v_i|²/λ_i².
    pub fn xi_norm_sq(&self) -> f64 {
        (0..self.n)
            .map(|i| self.v[i].norm_sqr() / (self.lambda[i] * self.lambda[i]))
            .sum()
    }

    /// |∇φ_t|²_φ = Σ |v_i|²/λ_i in the diagonal frame.
    pub fn grad_norm_sq(&self) -> f64 {
        (0..self.n)
            .map(|i| self.v[i].norm_sqr() / self.lambda[i])
            .sum()
    }

    /// (Δφ)_t = Σ_m b[m][m].
    pub fn lap_t(&self) -> f64 {
        (0..self.n).map(|m| self.b[m][m].re).sum()
    }

    /// (Δφ)_k = Σ_m T[m][m][k].
    pub fn lap_grad(&self, k: usize) -> Complex64 {
        (0..self.n).map(|m| self.t[m][m][k]).sum()
    }
}

/// Direct four-term contraction of the third-order block III.
pub fn third_order_direct(s: &PointSample) -> f64 {
    let n = s.n;
    let mut term1 = ZERO;
    for i in 0..n {
        for r in 0..n {
            for p in 0..n {
                let weight = s.v[i] * s.v[p].conj()
                    / (s.lambda[i] * s.lambda[r] * s.lambda[p]);
                for k in 0..n {
                    term1 += weight
                        * (s.t[r][i][k] * s.t[r][p][k].conj()
                            + s.t[p][r][k] * s.t[i][r][k].conj());
                }
            }
        }
    }
    let mut term2 = ZERO;
    let mut term3 = ZERO;
    for i in 0..n {
        for p in 0..n {
            let w = 1.0 / (s.lambda[i] * s.lambda[p]);
            for k in 0..n {
                term2 -= w
                    * s.t[i][p][k].conj()
                    * (s.a[i][k] * s.v[p].conj() + s.v[i] * s.b[k][p]);
                term3 -= w
                    * s.t[p][i][k]
                    * (s.b[i][k] * s.v[p].conj() + s.v[i] * s.a[p][k].conj());
            }
        }
    }
    let mut term4 = 0.0;
    for i in 0..n {
        for k in 0..n {
            term4 += (s.b[i][k].norm_sqr() + s.a[i][k].norm_sqr()) / s.lambda[i];
        }
    }
    term1.re + term2.re + term3.re + term4
}

/// A₁: the Hermitian-gradient square (nonnegative by construction).
pub fn third_order_hermitian(s: &PointSample) -> f64 {
    let mut sum = 0.0;
    for r in 0..s.n {
        for k in 0..s.n {
            let mut m = ZERO;
            for i in 0..s.n {
                m += s.v[i] * s.t[i][r][k].conj() / s.lambda[i];
            }
            sum += (m - s.b[r][k]).norm_sqr() / s.lambda[r];
        }
    }
    sum
}

/// A₂: the holomorphic-gradient square (nonnegative by construction).
pub fn third_order_holomorphic(s: &PointSample) -> f64 {
    let mut sum = 0.0;
    for r in 0..s.n {
        for k in 0..s.n {
            let mut m = ZERO;
            for i in 0..s.n {
                m += s.v[i] * s.t[r][i][k] / s.lambda[i];
            }
            sum += (m - s.a[r][k]).norm_sqr() / s.lambda[r];
        }
    }
    sum
}

/// W = (Δφ)_t − Σ_i v_i conj((Δφ)_i)/λ_i, the transported time derivative
/// of Δφ whose square the third-order block dominates.
pub fn transport_witness(s: &PointSample) -> Complex64 {
    let mut w = Complex64::new(s.lap_t(), 0.0);
    for i in 0..s.n {
        w -= s.v[i] * s.lap_grad(i).conj() / s.lambda[i];
    }
    w
}

/// Σ_{i,p,k} |T[i][p][k]|²/(λ_i λ_p), the full third-derivative energy.
pub fn third_derivative_energy(s: &PointSample) -> f64 {
    let mut sum = 0.0;
    for i in 0..s.n {
        for p in 0..s.n {
            for k in 0..s.n {
                sum += s.t[i][p][k].norm_sqr() / (s.lambda[i] * s.lambda[p]);
            }
        }
    }
    sum
}

/// (Σλ)^{-1} Σ_k |(Δφ)_k|²/λ_k, the lower bound the energy dominates.
pub fn third_derivative_bound(s: &PointSample) -> f64 {
    let mut sum = 0.0;
    for k in 0..s.n {
        sum += s.lap_grad(k).norm_sqr() / s.lambda[k];
    }
    sum / s.lambda_sum()
}

/// Random algebraic curvature model R = S − B(δ⊗δ + δ⊗̃δ) with
/// S_{ij̄kl̄} = Σ_m (H^m_{ij̄} H^m_{kl̄} + H^m_{il̄} H^m_{kj̄}) built from PSD
/// Hermitian summands; it satisfies all Kähler symmetries and has
/// bisectional curvature ≥ −2B.
#[derive(Debug, Clone)]
pub struct CurvatureModel {
    pub n: usize,
    pub lower: f64,
    summands: Vec<[[Complex64; 2]; 2]>,
}

impl CurvatureModel {
    pub fn draw(n: usize, rng: &mut impl Rng) -> Self {
        let lower = rng.gen_range(0.0..2.0);
        Self::draw_with_bound(n, lower, rng)
    }

    /// Random PSD part with the lower bound B pinned.
    pub fn draw_with_bound(n: usize, lower: f64, rng: &mut impl Rng) -> Self {
        let mut summands = Vec::with_capacity(2);
        for _ in 0..2 {
            let mut a = [[ZERO; 2]; 2];
            for row in a.iter_mut().take(n) {
                for e in row.iter_mut().take(n) {
                    *e = unit_complex(rng);
                }
            }
            // H = A†A is PSD Hermitian.
            let mut h = [[ZERO; 2]; 2];
            for i in 0..n {
                for j in 0..n {
                    for m in 0..n {
                        h[i][j] += a[m][i].conj() * a[m][j];
                    }
                }
            }
            summands.push(h);
        }
        Self { n, lower, summands }
    }

    /// Flat model: R ≡ 0 (torus background).
    pub fn flat(n: usize) -> Self {
        Self {
            n,
            lower: 0.0,
            summands: Vec::new(),
        }
    }

    /// R_{i j̄ k l̄}.
    pub fn entry(&self, i: usize, j: usize, k: usize, l: usize) -> Complex64 {
        let mut r = ZERO;
        for h in &self.summands {
            r += h[i][j] * h[k][l] + h[i][l] * h[k][j];
        }
        let delta = |a: usize, b: usize| if a == b { 1.0 } else { 0.0 };
        r - Complex64::new(self.lower * (delta(i, j) * delta(k, l) + delta(i, l) * delta(k, j)), 0.0)
    }

    /// II = Σ_{i,p,k} R_{p ī k k̄} λ_k v_i conj(v_p)/(λ_i λ_p).
    pub fn term_ii(&self, s: &PointSample) -> f64 {
        let mut sum = ZERO;
        for i in 0..s.n {
            for p in 0..s.n {
                let w = s.v[i] * s.v[p].conj() / (s.lambda[i] * s.lambda[p]);
                for k in 0..s.n {
                    sum += self.entry(p, i, k, k) * s.lambda[k] * w;
                }
            }
        }
        sum.re
    }

    /// −2B(Σλ)Σ_i |v_i|²/λ_i², the a-priori lower bound for II.
    pub fn term_ii_bound(&self, s: &PointSample) -> f64 {
        -2.0 * self.lower * s.lambda_sum() * s.xi_norm_sq()
    }
}

/// Pointwise data in a general (non-diagonal) frame, used by the Laplacian
/// expansion identity.  `inv[i][j]` holds the entries of the inverse metric
/// matrix, so |ψ|²_g = Σ_{ij} ψ̄_i inv[i][j] ψ_j.
#[derive(Debug, Clone)]
pub struct GeneralSample {
    pub n: usize,
    pub inv: [[Complex64; 2]; 2],
    pub v: [Complex64; 2],
    pub t: [[[Complex64; 2]; 2]; 2],
    pub a: [[Complex64; 2]; 2],
    pub b: [[Complex64; 2]; 2],
}

/// (m·x)_i = Σ_j m[i][j] x_j.
fn matvec(m: &[[Complex64; 2]; 2], x: &[Complex64; 2], n: usize) -> [Complex64; 2] {
    let mut out = [ZERO; 2];
    for i in 0..n {
        for j in 0..n {
            out[i] += m[i][j] * x[j];
        }
    }
    out
}

/// x† m x (real for Hermitian m).
fn sesq_form(m: &[[Complex64; 2]; 2], x: &[Complex64; 2], n: usize) -> f64 {
    let mut s = ZERO;
    for i in 0..n {
        for j in 0..n {
            s += x[i].conj() * m[i][j] * x[j];
        }
    }
    s.re
}

/// III in a general frame, as a manifestly nonnegative sum of squares: with
/// w = g⁻¹v and T_k the matrix slice t[·][·][k],
///   III = Σ_k ( |T_k†w − b_k|²_g + |T_k w − a_k|²_g ),
/// where a_k, b_k are the k-th columns of a and b.  In an eigenbasis of g
/// this reduces to the hermitian plus holomorphic squares of the
/// diagonal-frame forms.
pub fn third_order_general(s: &GeneralSample) -> f64 {
    let n = s.n;
    let w = matvec(&s.inv, &s.v, n);
    let mut total = 0.0;
    for k in 0..n {
        let mut herm = [ZERO; 2];
        let mut holo = [ZERO; 2];
        for r in 0..n {
            for i in 0..n {
                herm[r] += s.t[i][r][k].conj() * w[i];
                holo[r] += s.t[r][i][k] * w[i];
            }
            herm[r] -= s.b[r][k];
            holo[r] -= s.a[r][k];
        }
        total += sesq_form(&s.inv, &herm, n) + sesq_form(&s.inv, &holo, n);
    }
    total
}

/// Names of the randomized pointwise checks, in report order.
pub const CHECK_IDS: [&str; 7] = [
    "third_order_identity",
    "hermitian_part_nonneg",
    "holomorphic_part_nonneg",
    "transport_bound",
    "third_derivative_bound",
    "curvature_bound",
    "inverse_trace_amgm",
];

#[derive(Debug, Clone, Copy, Serialize)]
pub struct OracleConfig {
    pub n: usize,
    pub seed: u64,
    pub samples: u64,
    /// Pins the curvature lower bound B; None draws B uniformly in [0, 2).
    pub curvature_b: Option<f64>,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self {
            n: 1,
            seed: DEFAULT_SEED,
            samples: DEFAULT_SAMPLES,
            curvature_b: None,
        }
    }
}

/// Outcome of one randomized check.
#[derive(Debug, Clone, Serialize)]
pub struct CheckOutcome {
    pub id: String,
    pub n: usize,
    pub samples: u64,
    /// min over samples of slack/scale (identities: −|mismatch|/scale).
    pub worst_rel_slack: f64,
    /// Stream index attaining the worst slack.
    pub worst_sample: u64,
    pub failures: u64,
    pub passed: bool,
}

fn slack_of(id: &str, s: &PointSample, rng: &mut impl Rng, curvature_b: Option<f64>) -> f64 {
    match id {
        "third_order_identity" => {
            let direct = third_order_direct(s);
            let squares = third_order_hermitian(s) + third_order_holomorphic(s);
            let scale = direct.abs().max(squares.abs()).max(1.0);
            -(direct - squares).abs() / scale
        }
        "hermitian_part_nonneg" => {
            let a1 = third_order_hermitian(s);
            a1 / a1.abs().max(1.0)
        }
        "holomorphic_part_nonneg" => {
            let a2 = third_order_holomorphic(s);
            a2 / a2.abs().max(1.0)
        }
        "transport_bound" => {
            let lhs = (third_order_hermitian(s) + third_order_holomorphic(s)) * s.lambda_sum();
            let rhs = transport_witness(s).norm_sqr();
            (lhs - rhs) / lhs.abs().max(rhs).max(1.0)
        }
        "third_derivative_bound" => {
            let lhs = third_derivative_energy(s);
            let rhs = third_derivative_bound(s);
            (lhs - rhs) / lhs.abs().max(rhs).max(1.0)
        }
        "curvature_bound" => {
            let model = match curvature_b {
                Some(b) => CurvatureModel::draw_with_bound(s.n, b, rng),
                None => CurvatureModel::draw(s.n, rng),
            };
            let lhs = model.term_ii(s);
            let rhs = model.term_ii_bound(s);
            let main = (lhs - rhs) / lhs.abs().max(rhs.abs()).max(1.0);
            main.min(observation_slack(s))
        }
        "inverse_trace_amgm" => {
            // For the n+1 positive numbers {λ_1..λ_n, c}:
            // Σ 1/μ ≥ (Σμ)^{1/n} (Πμ)^{−1/n}.
            let mut mu = [0.0f64; 3];
            mu[..s.n].copy_from_slice(&s.lambda[..s.n]);
            mu[s.n] = s.c;
            let vals = &mu[..s.n + 1];
            let lhs: f64 = vals.iter().map(|&m| 1.0 / m).sum();
            let sum: f64 = vals.iter().sum();
            let prod: f64 = vals.iter().product();
            let inv_n = 1.0 / s.n as f64;
            let rhs = sum.powf(inv_n) * prod.powf(-inv_n);
            (lhs - rhs) / lhs.abs().max(rhs).max(1.0)
        }
        other => panic!("unknown check id {other}"),
    }
}

/// Two scalar observations underpinning the trace bound: Σλ ≥ λ_i for each
/// i, and |∇φ_t|²_φ/Σλ ≤ Σ|v_i|²/λ_i². Both degenerate to equalities when
/// n = 1. Returns the worse of the two relative slacks.
fn observation_slack(s: &PointSample) -> f64 {
    let sum = s.lambda_sum();
    let lam_max = s.lambda[..s.n].iter().cloned().fold(0.0, f64::max);
    let trace_slack = (sum - lam_max) / sum.max(1.0);
    let lhs = s.grad_norm_sq() / sum;
    let rhs = s.xi_norm_sq();
    let ratio_slack = (rhs - lhs) / lhs.max(rhs).max(1.0);
    trace_slack.min(ratio_slack)
}

/// Runs one check over its deterministic sample stream.
pub fn run_check(id: &str, cfg: OracleConfig) -> CheckOutcome {
    let mut worst = f64::INFINITY;
    let mut worst_sample = 0;
    let mut failures = 0;
    for index in 0..cfg.samples {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(index);
        let s = PointSample::draw(cfg.n, &mut rng);
        let slack = slack_of(id, &s, &mut rng, cfg.curvature_b);
        if slack < worst {
            worst = slack;
            worst_sample = index;
        }
        if slack < -REL_TOL {
            failures += 1;
        }
    }
    CheckOutcome {
        id: id.to_string(),
        n: cfg.n,
        samples: cfg.samples,
        worst_rel_slack: worst,
        worst_sample,
        failures,
        passed: failures == 0,
    }
}

/// All checks for one dimension.
pub fn run_all(cfg: OracleConfig) -> Vec<CheckOutcome> {
    CHECK_IDS.iter().map(|id| run_check(id, cfg)).collect()
}

/// Runs every check against samples extracted from a path instead of the
/// random stream.
pub fn run_on_samples(samples: &[PointSample], n: usize) -> Vec<CheckOutcome> {
    CHECK_IDS
        .iter()
        .map(|id| {
            let mut worst = f64::INFINITY;
            let mut worst_sample = 0;
            let mut failures = 0;
            for (index, s) in samples.iter().enumerate() {
                // Curvature model irrelevant on the flat torus: use R = 0,
                // which still exercises II ≥ bound as 0 ≥ 0.
                let mut rng = ChaCha8Rng::seed_from_u64(DEFAULT_SEED);
                let slack = if *id == "curvature_bound" {
                    let model = CurvatureModel::flat(n);
                    let lhs = model.term_ii(s);
                    let rhs = model.term_ii_bound(s);
                    let main = (lhs - rhs) / lhs.abs().max(rhs.abs()).max(1.0);
                    main.min(observation_slack(s))
                } else {
                    slack_of(id, s, &mut rng, None)
                };
                if slack < worst {
                    worst = slack;
                    worst_sample = index as u64;
                }
                if slack < -REL_TOL {
                    failures += 1;
                }
            }
            CheckOutcome {
                id: id.to_string(),
                n,
                samples: samples.len() as u64,
                worst_rel_slack: worst,
                worst_sample,
                failures,
                passed: failures == 0,
            }
        })
        .collect()
}

/// Extracts diagonal-frame samples from interior nodes of a path, rotating
/// the tensors by the metric eigenbasis and symmetrizing away the
/// floating-point asymmetry of the stencils.
pub fn samples_from_state(
    grid: &TorusGrid,
    values: &[f64],
    state: &PathState,
    stride: usize,
) -> Result<Vec<PointSample>> {
    state.ensure_feasible()?;
    if stride == 0 {
        return Err(CoreError::InvalidParameter("stride must be ≥ 1".into()));
    }
    let n = grid.complex_dim();
    let ns = grid.spatial_len();
    let nt = grid.time_levels();

    // Hessian component fields (d11, d22 real; off complex) and their z-derivatives.
    let hess = MetricField::hessian(grid, values)?;
    let mut hfield: Vec<Vec<Complex64>> = vec![vec![ZERO; values.len()]; n * n];
    for idx in 0..values.len() {
        let h = hess.at(idx);
        for i in 0..n {
            for j in 0..n {
                hfield[i * n + j][idx] = h.entry(i, j);
            }
        }
    }
    // T[i][j][k] = ∂_{z_k} φ_{ij̄}.
    let mut tfield: Vec<Vec<Complex64>> = Vec::with_capacity(n * n * n);
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                tfield.push(grid.dz_complex(&hfield[i * n + j], k)?);
            }
        }
    }
    // v component fields from the cached state; a = ∂_z v, b = ∂_z̄ v.
    let mut vfield: Vec<Vec<Complex64>> = vec![vec![ZERO; values.len()]; n];
    for idx in 0..values.len() {
        for (i, f) in vfield.iter_mut().enumerate() {
            f[idx] = state.v[idx][i];
        }
    }
    let mut afield = Vec::with_capacity(n * n);
    let mut bfield = Vec::with_capacity(n * n);
    for i in 0..n {
        for k in 0..n {
            afield.push(grid.dz_complex(&vfield[i], k)?);
            bfield.push(grid.dzbar_complex(&vfield[i], k)?);
        }
    }

    let mut out = Vec::new();
    for k in 1..nt - 1 {
        for i in (0..ns).step_by(stride) {
            let idx = k * ns + i;
            let metric = state.metric[idx];
            let (lam, u) = metric.eig();
            // Unitary change z = Ā z′ diagonalizes the index conventions:
            // lower holomorphic indices contract with conj(U), lower
            // anti-holomorphic ones with U.
            let hol = |r: usize, ii: usize| u[r][ii].conj();
            let anti = |r: usize, ii: usize| u[r][ii];
            let mut s = PointSample {
                n,
                lambda: [1.0; 2],
                c: state.c[idx],
                v: [ZERO; 2],
                t: [[[ZERO; 2]; 2]; 2],
                a: [[ZERO; 2]; 2],
                b: [[ZERO; 2]; 2],
            };
            s.lambda[..n].copy_from_slice(&lam[..n]);
            for r in 0..n {
                for ii in 0..n {
                    s.v[r] += hol(r, ii) * state.v[idx][ii];
                }
            }
            for r in 0..n {
                for kk in 0..n {
                    for ii in 0..n {
                        for jj in 0..n {
                            s.a[r][kk] +=
                                hol(r, ii) * hol(kk, jj) * afield[ii * n + jj][idx];
                            s.b[r][kk] +=
                                hol(r, ii) * anti(kk, jj) * bfield[ii * n + jj][idx];
                        }
                    }
                }
            }
            for r in 0..n {
                for ss in 0..n {
                    for kk in 0..n {
                        let mut acc = ZERO;
                        for ii in 0..n {
                            for jj in 0..n {
                                for ll in 0..n {
                                    acc += hol(r, ii)
                                        * anti(ss, jj)
                                        * hol(kk, ll)
                                        * tfield[(ii * n + jj) * n + ll][idx];
                                }
                            }
                        }
                        s.t[r][ss][kk] = acc;
                    }
                }
            }
            // Symmetrize: the stencil compositions commute exactly only in
            // exact arithmetic.
            for r in 0..n {
                for kk in r..n {
                    let sym = (s.a[r][kk] + s.a[kk][r]) * 0.5;
                    s.a[r][kk] = sym;
                    s.a[kk][r] = sym;
                    let herm = (s.b[r][kk] + s.b[kk][r].conj()) * 0.5;
                    s.b[r][kk] = herm;
                    s.b[kk][r] = herm.conj();
                    for jj in 0..n {
                        let tsym = (s.t[r][jj][kk] + s.t[kk][jj][r]) * 0.5;
                        s.t[r][jj][kk] = tsym;
                        s.t[kk][jj][r] = tsym;
                    }
                }
            }
            out.push(s);
        }
    }
    Ok(out)
}

/// Report of the discrete verification of the Laplacian expansion
/// Δ(|∇φ_t|²_φ) = 2Re(w†u) − w†Lw + III with w = g⁻¹v, u_i = (Δφ)_{ti},
/// L[p][q] = (Δφ)_{pq̄}.
#[derive(Debug, Clone, Serialize)]
pub struct ExpansionReport {
    pub coarse_error: f64,
    pub fine_error: f64,
    pub order: f64,
}

/// Samples the composite field |∇φ_t|²_φ of an analytic test path on two
/// grids, applies the *discrete* Laplacian, and compares with the analytic
/// right-hand side.  The identity is exact in the continuum, so the
/// mismatch must shrink at second order.
pub fn verify_laplacian_expansion(n: usize, seed: u64) -> Result<ExpansionReport> {
    // The n = 2 grids are necessarily coarser; a gentler potential keeps the
    // refinement pair inside the asymptotic O(h²) regime.
    if n == 1 {
        expansion_study(n, seed, 0.04, 2, [128, 256])
    } else {
        expansion_study(n, seed, 0.02, 1, [24, 48])
    }
}

/// The same refinement study with the potential's amplitude, wave-number
/// cap, and grid sizes exposed; gentler potentials reach the asymptotic
/// regime on coarser grids.
pub fn expansion_study(
    n: usize,
    seed: u64,
    amp: f64,
    max_freq: i32,
    sizes: [usize; 2],
) -> Result<ExpansionReport> {
    let field = TrigPoly::random_feasible_modes(n, seed, amp, 0.5, max_freq);
    let t0 = 0.5;
    let mut errs = [0.0f64; 2];
    for (pass, &nodes) in sizes.iter().enumerate() {
        let grid = TorusGrid::new(n, nodes, 5)?;
        let composite: Vec<f64> = (0..grid.spatial_len())
            .map(|i| {
                let j = field.jet(t0, &node_position(&grid, i));
                j.metric().inverse().dagger_form(j.v)
            })
            .collect();
        let lap = grid.lap(&composite)?;
        let mut sup = 0.0f64;
        for i in 0..grid.spatial_len() {
            let j = field.jet(t0, &node_position(&grid, i));
            let g = j.metric();
            let inv = g.inverse();
            let mut invm = [[ZERO; 2]; 2];
            for r in 0..n {
                for c in 0..n {
                    invm[r][c] = inv.entry(r, c);
                }
            }
            let gs = GeneralSample {
                n,
                inv: invm,
                v: j.v,
                t: j.t3,
                a: j.a,
                b: j.b,
            };
            let w = matvec(&invm, &j.v, n);
            let mut wu = ZERO;
            for i in 0..n {
                wu += w[i].conj() * j.w[i];
            }
            let mut quad_l = ZERO;
            for p in 0..n {
                for q in 0..n {
                    quad_l += w[p].conj() * j.l4[p][q] * w[q];
                }
            }
            let rhs = 2.0 * wu.re - quad_l.re + third_order_general(&gs);
            sup = sup.max((lap[i] - rhs).abs());
        }
        errs[pass] = sup;
    }
    Ok(ExpansionReport {
        coarse_error: errs[0],
        fine_error: errs[1],
        order: (errs[0] / errs[1]).log2(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::path::GeodesicPath;
    use crate::potential::KahlerPotential;
    use approx::assert_abs_diff_eq;

    #[test]
    fn third_order_forms_agree_on_random_samples() {
        for n in [1, 2] {
            for index in 0..500u64 {
                let s = PointSample::random(n, DEFAULT_SEED, index);
                let direct = third_order_direct(&s);
                let squares = third_order_hermitian(&s) + third_order_holomorphic(&s);
                let scale = direct.abs().max(squares).max(1.0);
                assert!(
                    (direct - squares).abs() <= 1e-12 * scale,
                    "n={n} idx={index}: {direct} vs {squares}"
                );
            }
        }
    }

    #[test]
    fn transport_equality_at_n1_without_holomorphic_part() {
        // With T = 0 and a = 0 the holomorphic square vanishes and the
        // transport bound is tight: III·λ = |b|² = |W|².
        let mut s = PointSample::random(1, DEFAULT_SEED, 7);
        s.t = [[[ZERO; 2]; 2]; 2];
        s.a = [[ZERO; 2]; 2];
        let lhs = (third_order_hermitian(&s) + third_order_holomorphic(&s)) * s.lambda_sum();
        let rhs = transport_witness(&s).norm_sqr();
        assert_abs_diff_eq!(lhs, rhs, epsilon = 1e-14 * lhs.max(1.0));
    }

    #[test]
    fn yau_bound_is_equality_at_n1() {
        for index in 0..100u64 {
            let s = PointSample::random(1, DEFAULT_SEED, index);
            let lhs = third_derivative_energy(&s);
            let rhs = third_derivative_bound(&s);
            assert_abs_diff_eq!(lhs, rhs, epsilon = 1e-13 * lhs.max(1.0));
        }
    }

    #[test]
    fn amgm_is_identity_at_n1() {
        for index in 0..100u64 {
            let s = PointSample::random(1, DEFAULT_SEED, index);
            let lhs = 1.0 / s.lambda[0] + 1.0 / s.c;
            let rhs = (s.lambda[0] + s.c) / (s.lambda[0] * s.c);
            assert_abs_diff_eq!(lhs, rhs, epsilon = 1e-13 * lhs);
        }
    }

    #[test]
    fn flat_curvature_gives_zero_slack_exactly() {
        let s = PointSample::random(2, DEFAULT_SEED, 3);
        let model = CurvatureModel::flat(2);
        assert_eq!(model.term_ii(&s), 0.0);
        assert_eq!(model.term_ii_bound(&s), -0.0);
    }

    #[test]
    fn curvature_model_has_kahler_symmetries() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let model = CurvatureModel::draw(2, &mut rng);
        for i in 0..2 {
            for j in 0..2 {
                for k in 0..2 {
                    for l in 0..2 {
                        let r = model.entry(i, j, k, l);
                        assert_abs_diff_eq!((r - model.entry(k, j, i, l)).norm(), 0.0);
                        assert_abs_diff_eq!((r - model.entry(i, l, k, j)).norm(), 0.0);
                        assert_abs_diff_eq!(
                            (r.conj() - model.entry(j, i, l, k)).norm(),
                            0.0,
                            epsilon = 1e-15
                        );
                    }
                }
            }
        }
        // n = 1 closed form: II = (S_{1111} − 2B)|v|²/λ.
        let s = PointSample::random(1, DEFAULT_SEED, 11);
        let model1 = CurvatureModel::draw(1, &mut rng);
        let ii = model1.term_ii(&s);
        let s1111 = model1.entry(0, 0, 0, 0).re;
        let expect = (s1111 - 0.0) * s.v[0].norm_sqr() / s.lambda[0];
        assert_abs_diff_eq!(ii, expect, epsilon = 1e-12 * expect.abs().max(1.0));
    }

    #[test]
    fn general_frame_reduces_to_diagonal() {
        for n in [1usize, 2] {
            for index in 0..50u64 {
                let s = PointSample::random(n, DEFAULT_SEED, index);
                let mut inv = [[ZERO; 2]; 2];
                for i in 0..n {
                    inv[i][i] = Complex64::new(1.0 / s.lambda[i], 0.0);
                }
                let g = GeneralSample {
                    n,
                    inv,
                    v: s.v,
                    t: s.t,
                    a: s.a,
                    b: s.b,
                };
                let direct = third_order_direct(&s);
                let general = third_order_general(&g);
                assert_abs_diff_eq!(
                    direct,
                    general,
                    epsilon = 1e-12 * direct.abs().max(1.0)
                );
            }
        }
    }

    #[test]
    fn randomized_suites_pass_at_both_dimensions() {
        for n in [1, 2] {
            let cfg = OracleConfig {
                n,
                seed: DEFAULT_SEED,
                samples: 2_000,
                curvature_b: None,
            };
            for outcome in run_all(cfg) {
                assert!(
                    outcome.passed,
                    "n={n} {} worst {} at {}",
                    outcome.id, outcome.worst_rel_slack, outcome.worst_sample
                );
            }
        }
    }

    #[test]
    fn laplacian_expansion_verified_discretely() {
        for n in [1, 2] {
            let report = verify_laplacian_expansion(n, 1234).unwrap();
            assert!(
                report.order > 1.9,
                "n={n}: order {} errors {}/{}",
                report.order,
                report.coarse_error,
                report.fine_error
            );
        }
    }

    #[test]
    fn extracted_samples_satisfy_invariants_and_checks() {
        let grid = TorusGrid::new(2, 12, 9).unwrap();
        let phi0 = KahlerPotential::zero(grid);
        let phi1 = KahlerPotential::make_degenerate_endpoint(grid, 0.5, &[1, 0, 1, 1]).unwrap();
        let path = GeodesicPath::initial_guess(&phi0, &phi1, 0.5, None).unwrap();
        let state = PathState::compute(&grid, path.values()).unwrap();
        let samples = samples_from_state(&grid, path.values(), &state, 7).unwrap();
        assert!(!samples.is_empty());
        let raw_fields = RawFields::build(&grid, path.values(), &state);
        let ns = grid.spatial_len();
        for (j, s) in samples.iter().enumerate() {
            // Rotation preserves |∇φ_t|²_φ: Σ g^{ij̄}v_iv̄_j = Σ |v'_r|²/λ_r.
            let per_level = (ns + 6) / 7;
            let level = 1 + j / per_level;
            let node = (j % per_level) * 7;
            let idx = level * ns + node;
            let direct = state.inv[idx].dagger_form(state.v[idx]);
            let rotated: f64 = (0..2).map(|r| s.v[r].norm_sqr() / s.lambda[r]).sum();
            assert_abs_diff_eq!(direct, rotated, epsilon = 1e-11 * direct.max(1.0));
            assert_eq!(s.c, state.c[idx]);

            // III is frame-invariant: the matrix form on raw node data must
            // match the diagonal squares of the rotated sample (up to the
            // symmetrization applied during extraction).
            let raw = raw_fields.sample(&state, idx);
            let general = third_order_general(&raw);
            let diagonal = third_order_hermitian(s) + third_order_holomorphic(s);
            assert_abs_diff_eq!(general, diagonal, epsilon = 1e-11 * diagonal.max(1.0));
        }
        // The structural identities hold on real extracted data.
        for outcome in run_on_samples(&samples, 2) {
            assert!(
                outcome.passed,
                "{} worst {}",
                outcome.id, outcome.worst_rel_slack
            );
        }
    }

    /// Unrotated derivative fields over the whole path, built once with the
    /// same stencils `samples_from_state` uses.
    struct RawFields {
        n: usize,
        afield: Vec<Vec<Complex64>>,
        bfield: Vec<Vec<Complex64>>,
        tfield: Vec<Vec<Complex64>>,
    }

    impl RawFields {
        fn build(grid: &TorusGrid, values: &[f64], state: &PathState) -> Self {
            let n = grid.complex_dim();
            let hess = MetricField::hessian(grid, values).unwrap();
            let mut hfield: Vec<Vec<Complex64>> = vec![vec![ZERO; values.len()]; n * n];
            let mut vfield: Vec<Vec<Complex64>> = vec![vec![ZERO; values.len()]; n];
            for node in 0..values.len() {
                let h = hess.at(node);
                for i in 0..n {
                    for j in 0..n {
                        hfield[i * n + j][node] = h.entry(i, j);
                    }
                }
                for (i, f) in vfield.iter_mut().enumerate() {
                    f[node] = state.v[node][i];
                }
            }
            let mut afield = Vec::new();
            let mut bfield = Vec::new();
            let mut tfield = Vec::new();
            for i in 0..n {
                for k in 0..n {
                    afield.push(grid.dz_complex(&vfield[i], k).unwrap());
                    bfield.push(grid.dzbar_complex(&vfield[i], k).unwrap());
                }
                for j in 0..n {
                    for k in 0..n {
                        tfield.push(grid.dz_complex(&hfield[i * n + j], k).unwrap());
                    }
                }
            }
            Self {
                n,
                afield,
                bfield,
                tfield,
            }
        }

        /// The pointwise data at one node, symmetrized exactly as the
        /// extraction path does it; the diagonal metric stencil and the
        /// dz∘dz̄ composition differ at O(h²), so without the symmetrization
        /// the frames disagree beyond rounding.
        fn sample(&self, state: &PathState, idx: usize) -> GeneralSample {
            let n = self.n;
            let mut inv = [[ZERO; 2]; 2];
            for r in 0..n {
                for c in 0..n {
                    inv[r][c] = state.inv[idx].entry(r, c);
                }
            }
            let mut t = [[[ZERO; 2]; 2]; 2];
            let mut a = [[ZERO; 2]; 2];
            let mut b = [[ZERO; 2]; 2];
            for i in 0..n {
                for k in 0..n {
                    a[i][k] = self.afield[i * n + k][idx];
                    b[i][k] = self.bfield[i * n + k][idx];
                    for j in 0..n {
                        t[i][j][k] = self.tfield[(i * n + j) * n + k][idx];
                    }
                }
            }
            for i in 0..n {
                for k in i..n {
                    let sym = (a[i][k] + a[k][i]) * 0.5;
                    a[i][k] = sym;
                    a[k][i] = sym;
                    let herm = (b[i][k] + b[k][i].conj()) * 0.5;
                    b[i][k] = herm;
                    b[k][i] = herm.conj();
                    for j in 0..n {
                        let tsym = (t[i][j][k] + t[k][j][i]) * 0.5;
                        t[i][j][k] = tsym;
                        t[k][j][i] = tsym;
                    }
                }
            }
            GeneralSample {
                n,
                inv,
                v: state.v[idx],
                t,
                a,
                b,
            }
        }
    }
}
