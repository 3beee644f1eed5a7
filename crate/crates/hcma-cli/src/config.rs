//! Flat key=value run configuration with command-line overrides.
//!
//! Precedence: built-in defaults < config file < flags. The resolved config
//! is embedded verbatim in every report and in checkpoint metadata, so a run
//! can always be replayed from its artifacts.

use std::fs;
use std::path::Path;

use hcma_core::continuation::SweepSchedule;
use hcma_core::equation::DensityField;
use hcma_core::grid::TorusGrid;
use hcma_core::potential::KahlerPotential;
use hcma_core::solver::SolveOptions;
use serde::{Deserialize, Serialize};

use crate::checkpoint;
use crate::error::{CliError, Result};

/// Fully resolved run parameters. Endpoint and density specifications stay
/// in their textual form; they are materialized against the grid on demand.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunConfig {
    pub n: usize,
    /// Nodes per real axis.
    pub grid: usize,
    /// Time levels including both boundaries.
    pub nt: usize,
    pub epsilon: f64,
    /// Continuation ε schedule, strictly decreasing.
    pub schedule: Vec<f64>,
    /// Per-stage smoothing δ, same length as `schedule`.
    pub smoothing: Vec<f64>,
    pub f: String,
    pub endpoint0: String,
    pub endpoint1: String,
    pub endpoint2: Option<String>,
    pub seed: u64,
    pub out: String,
    pub tol: f64,
    pub max_newton: usize,
    pub max_krylov: usize,
    pub restart: usize,
    pub damping: f64,
    /// Bubble coefficient for the initial guess; None selects ε/2.
    pub mu: Option<f64>,
    pub samples: u64,
    /// Pinned curvature lower bound for the inequality suites; None draws it.
    pub curvature_b: Option<f64>,
    /// Overrides C = max(1, 1 − inf Δf) in the certificate, diagnostics only.
    pub c_override: Option<f64>,
    /// Sampling stride for on-path inequality checks.
    pub stride: usize,
    pub fd_steps: usize,
    pub fd_step: f64,
    pub checkpoint: Option<String>,
}

impl RunConfig {
    pub fn grid_handle(&self) -> Result<TorusGrid> {
        Ok(TorusGrid::new(self.n, self.grid, self.nt)?)
    }

    pub fn solve_options(&self) -> SolveOptions {
        SolveOptions {
            tol: self.tol,
            max_newton: self.max_newton,
            max_krylov: self.max_krylov,
            restart: self.restart,
            damping: self.damping,
        }
    }

    pub fn sweep_schedule(&self) -> SweepSchedule {
        SweepSchedule {
            epsilons: self.schedule.clone(),
            smoothing: self.smoothing.clone(),
        }
    }
}

/// Accumulates settings before defaults are filled in; `Option` distinguishes
/// "explicitly set" from "defaulted", which `verify` needs when reconciling
/// flags against checkpoint headers.
#[derive(Debug, Clone, Default)]
pub struct ConfigBuilder {
    pub n: Option<usize>,
    pub grid: Option<usize>,
    pub nt: Option<usize>,
    pub epsilon: Option<f64>,
    pub schedule: Option<Vec<f64>>,
    pub smoothing: Option<SmoothingRule>,
    pub f: Option<String>,
    pub endpoint0: Option<String>,
    pub endpoint1: Option<String>,
    pub endpoint2: Option<String>,
    pub seed: Option<u64>,
    pub out: Option<String>,
    pub tol: Option<f64>,
    pub max_newton: Option<usize>,
    pub max_krylov: Option<usize>,
    pub restart: Option<usize>,
    pub damping: Option<f64>,
    pub mu: Option<f64>,
    pub samples: Option<u64>,
    pub curvature_b: Option<f64>,
    pub c_override: Option<f64>,
    pub stride: Option<usize>,
    pub fd_steps: Option<usize>,
    pub fd_step: Option<f64>,
    pub checkpoint: Option<String>,
}

#[derive(Debug, Clone)]
pub enum SmoothingRule {
    /// δ_k = min(ε_k, 0.1).
    Coupled,
    /// δ_k = 0: endpoints used as given.
    None,
    Explicit(Vec<f64>),
}

impl SmoothingRule {
    fn resolve(&self, schedule: &[f64]) -> Result<Vec<f64>> {
        match self {
            SmoothingRule::Coupled => Ok(schedule.iter().map(|e| e.min(0.1)).collect()),
            SmoothingRule::None => Ok(vec![0.0; schedule.len()]),
            SmoothingRule::Explicit(d) => {
                if d.len() != schedule.len() {
                    return Err(CliError::Config(format!(
                        "smoothing lists {} values for {} schedule stages",
                        d.len(),
                        schedule.len()
                    )));
                }
                Ok(d.clone())
            }
        }
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| CliError::Config(format!("cannot parse {key} from '{value}'")))
}

fn parse_list(key: &str, value: &str) -> Result<Vec<f64>> {
    value
        .split(',')
        .map(|v| parse_num::<f64>(key, v))
        .collect()
}

impl ConfigBuilder {
    /// One key from a config file or a `--set` override.
    pub fn apply(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        match key.trim() {
            "n" => self.n = Some(parse_num("n", value)?),
            "grid" => self.grid = Some(parse_num("grid", value)?),
            "nt" => self.nt = Some(parse_num("nt", value)?),
            "epsilon" => self.epsilon = Some(parse_num("epsilon", value)?),
            "schedule" => self.schedule = Some(parse_list("schedule", value)?),
            "smoothing" => {
                self.smoothing = Some(match value {
                    "coupled" => SmoothingRule::Coupled,
                    "none" => SmoothingRule::None,
                    list => SmoothingRule::Explicit(parse_list("smoothing", list)?),
                })
            }
            "f" => self.f = Some(value.to_string()),
            "endpoint0" => self.endpoint0 = Some(value.to_string()),
            "endpoint1" => self.endpoint1 = Some(value.to_string()),
            "endpoint2" => self.endpoint2 = Some(value.to_string()),
            "seed" => self.seed = Some(parse_num("seed", value)?),
            "out" => self.out = Some(value.to_string()),
            "tol" => self.tol = Some(parse_num("tol", value)?),
            "max_newton" => self.max_newton = Some(parse_num("max_newton", value)?),
            "max_krylov" => self.max_krylov = Some(parse_num("max_krylov", value)?),
            "restart" => self.restart = Some(parse_num("restart", value)?),
            "damping" => self.damping = Some(parse_num("damping", value)?),
            "mu" => self.mu = Some(parse_num("mu", value)?),
            "samples" => self.samples = Some(parse_num("samples", value)?),
            "curvature_b" => self.curvature_b = Some(parse_num("curvature_b", value)?),
            "c_override" => self.c_override = Some(parse_num("c_override", value)?),
            "stride" => self.stride = Some(parse_num("stride", value)?),
            "fd_steps" => self.fd_steps = Some(parse_num("fd_steps", value)?),
            "fd_step" => self.fd_step = Some(parse_num("fd_step", value)?),
            "checkpoint" => self.checkpoint = Some(value.to_string()),
            other => {
                return Err(CliError::Config(format!("unknown config key '{other}'")));
            }
        }
        Ok(())
    }

    /// Reads `key = value` lines; blank lines and `#` comments are skipped.
    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                CliError::Config(format!(
                    "{}:{}: expected key = value, got '{line}'",
                    path.display(),
                    lineno + 1
                ))
            })?;
            self.apply(key, value)?;
        }
        Ok(())
    }

    /// Fills defaults and validates every numeric field against the module
    /// preconditions before any compute starts.
    pub fn finalize(self) -> Result<RunConfig> {
        let defaults = SolveOptions::default();
        let schedule = self
            .schedule
            .unwrap_or_else(|| SweepSchedule::default_plan().epsilons);
        let smoothing = self
            .smoothing
            .unwrap_or(SmoothingRule::Coupled)
            .resolve(&schedule)?;
        let cfg = RunConfig {
            n: self.n.unwrap_or(1),
            grid: self.grid.unwrap_or(16),
            nt: self.nt.unwrap_or(9),
            epsilon: self.epsilon.unwrap_or(0.1),
            schedule,
            smoothing,
            f: self.f.unwrap_or_else(|| "zero".to_string()),
            endpoint0: self.endpoint0.unwrap_or_else(|| "zero".to_string()),
            endpoint1: self.endpoint1.unwrap_or_else(|| "zero".to_string()),
            endpoint2: self.endpoint2,
            seed: self.seed.unwrap_or(hcma_core::oracle::DEFAULT_SEED),
            out: self.out.unwrap_or_else(|| "out".to_string()),
            tol: self.tol.unwrap_or(defaults.tol),
            max_newton: self.max_newton.unwrap_or(defaults.max_newton),
            max_krylov: self.max_krylov.unwrap_or(defaults.max_krylov),
            restart: self.restart.unwrap_or(defaults.restart),
            damping: self.damping.unwrap_or(defaults.damping),
            mu: self.mu,
            samples: self.samples.unwrap_or(hcma_core::oracle::DEFAULT_SAMPLES),
            curvature_b: self.curvature_b,
            c_override: self.c_override,
            stride: self.stride.unwrap_or(1),
            fd_steps: self.fd_steps.unwrap_or(4),
            fd_step: self.fd_step.unwrap_or(1e-4),
            checkpoint: self.checkpoint,
        };
        validate(&cfg)?;
        Ok(cfg)
    }
}

fn validate(cfg: &RunConfig) -> Result<()> {
    if !(cfg.n == 1 || cfg.n == 2) {
        return Err(CliError::Config(format!("n must be 1 or 2, got {}", cfg.n)));
    }
    if cfg.grid < 8 {
        return Err(CliError::Config(format!(
            "grid needs at least 8 nodes per axis, got {}",
            cfg.grid
        )));
    }
    if cfg.nt < 5 {
        return Err(CliError::Config(format!(
            "nt needs at least 5 time levels, got {}",
            cfg.nt
        )));
    }
    if !(cfg.epsilon > 0.0 && cfg.epsilon.is_finite()) {
        return Err(CliError::Config(format!(
            "epsilon must be positive and finite, got {}",
            cfg.epsilon
        )));
    }
    if !(cfg.tol > 0.0) {
        return Err(CliError::Config(format!("tol must be positive, got {}", cfg.tol)));
    }
    if cfg.max_newton == 0 {
        return Err(CliError::Config("max_newton must be at least 1".into()));
    }
    if !(cfg.damping > 0.0 && cfg.damping <= 1.0) {
        return Err(CliError::Config(format!(
            "damping must lie in (0, 1], got {}",
            cfg.damping
        )));
    }
    if cfg.samples == 0 {
        return Err(CliError::Config("samples must be at least 1".into()));
    }
    if cfg.stride == 0 {
        return Err(CliError::Config("stride must be at least 1".into()));
    }
    if cfg.fd_steps == 0 {
        return Err(CliError::Config("fd_steps must be at least 1".into()));
    }
    if !(cfg.fd_step > 0.0) {
        return Err(CliError::Config(format!(
            "fd_step must be positive, got {}",
            cfg.fd_step
        )));
    }
    if let Some(b) = cfg.curvature_b {
        if !(b >= 0.0 && b.is_finite()) {
            return Err(CliError::Config(format!(
                "curvature_b must be a finite nonnegative bound, got {b}"
            )));
        }
    }
    SweepSchedule {
        epsilons: cfg.schedule.clone(),
        smoothing: cfg.smoothing.clone(),
    }
    .validate()
    .map_err(|e| CliError::Config(e.to_string()))?;
    Ok(())
}

fn parse_modes(grid: &TorusGrid, text: &str) -> Result<Vec<i32>> {
    let modes: Vec<i32> = text
        .split(',')
        .map(|v| parse_num::<i32>("mode", v))
        .collect::<Result<_>>()?;
    if modes.len() != grid.axes() {
        return Err(CliError::Config(format!(
            "mode vector needs {} entries for n = {}, got {}",
            grid.axes(),
            grid.complex_dim(),
            modes.len()
        )));
    }
    Ok(modes)
}

/// Materializes an endpoint specification:
/// `zero` | `const:<v>` | `cos:<fraction>:<m1,m2[,m3,m4]>` | `ckpt:<path>:<level>`.
pub fn build_endpoint(spec: &str, grid: TorusGrid) -> Result<KahlerPotential> {
    if spec == "zero" {
        return Ok(KahlerPotential::zero(grid));
    }
    if let Some(v) = spec.strip_prefix("const:") {
        return Ok(KahlerPotential::constant(grid, parse_num("const endpoint", v)?));
    }
    if let Some(rest) = spec.strip_prefix("cos:") {
        let (fraction, modes) = rest.split_once(':').ok_or_else(|| {
            CliError::Config(format!("cos endpoint needs cos:<fraction>:<modes>, got '{spec}'"))
        })?;
        let fraction: f64 = parse_num("cos fraction", fraction)?;
        let modes = parse_modes(&grid, modes)?;
        return Ok(KahlerPotential::make_degenerate_endpoint(grid, fraction, &modes)?);
    }
    if let Some(rest) = spec.strip_prefix("ckpt:") {
        let (path, level) = rest.rsplit_once(':').ok_or_else(|| {
            CliError::Config(format!("ckpt endpoint needs ckpt:<path>:<level>, got '{spec}'"))
        })?;
        let level: usize = parse_num("ckpt level", level)?;
        let snap = checkpoint::read(Path::new(path))?;
        if snap.grid != grid {
            return Err(CliError::Config(format!(
                "checkpoint {} was written for n = {}, grid = {}, nt = {}",
                path,
                snap.grid.complex_dim(),
                snap.grid.nodes_per_axis(),
                snap.grid.time_levels()
            )));
        }
        let values = snap.level(level).ok_or_else(|| {
            CliError::Config(format!(
                "level {level} out of range, checkpoint has {} levels",
                snap.grid.time_levels()
            ))
        })?;
        return Ok(KahlerPotential::new(grid, values.to_vec())?);
    }
    Err(CliError::Config(format!("unknown endpoint spec '{spec}'")))
}

/// Materializes a density specification:
/// `zero` | `cos:<amp>:<m1,m2[,m3,m4]>` | `file:<path>`.
///
/// File densities hold whitespace-separated binary64 values, one per spatial
/// node (constant in time) or one per space-time node in t-major order.
pub fn build_density(spec: &str, grid: &TorusGrid) -> Result<DensityField> {
    if spec == "zero" {
        return Ok(DensityField::Zero);
    }
    if let Some(rest) = spec.strip_prefix("cos:") {
        let (amp, modes) = rest.split_once(':').ok_or_else(|| {
            CliError::Config(format!("cos density needs cos:<amp>:<modes>, got '{spec}'"))
        })?;
        let amp: f64 = parse_num("cos amplitude", amp)?;
        let modes = parse_modes(grid, modes)?;
        let field = (0..grid.spatial_len())
            .map(|i| {
                let coords = grid.node_coords(i);
                let phase: f64 = modes
                    .iter()
                    .zip(&coords)
                    .map(|(&m, &c)| f64::from(m) * grid.axis_coord(c))
                    .sum();
                amp * (std::f64::consts::TAU * phase).cos()
            })
            .collect();
        return Ok(DensityField::Spatial(field));
    }
    if let Some(path) = spec.strip_prefix("file:") {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read density {path}: {e}")))?;
        let values: Vec<f64> = text
            .split_whitespace()
            .map(|v| parse_num::<f64>("density value", v))
            .collect::<Result<_>>()?;
        if values.len() == grid.spatial_len() {
            return Ok(DensityField::Spatial(values));
        }
        if values.len() == grid.spacetime_len() {
            return Ok(DensityField::SpaceTime(values));
        }
        return Err(CliError::Config(format!(
            "density file {path} holds {} values; expected {} (spatial) or {} (space-time)",
            values.len(),
            grid.spatial_len(),
            grid.spacetime_len()
        )));
    }
    Err(CliError::Config(format!("unknown density spec '{spec}'")))
}
