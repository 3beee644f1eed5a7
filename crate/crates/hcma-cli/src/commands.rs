//! The six subcommands. Each builds its inputs from the resolved config,
//! runs the computation, writes every artifact it can, and only then
//! reports failure, so a truncated run still leaves its evidence on disk.

use std::path::{Path, PathBuf};

use hcma_core::analytic::TrigPoly;
use hcma_core::continuation::{sweep, SweepReport};
use hcma_core::equation::{FdCheckRow, HcmaProblem, PathState};
use hcma_core::estimate::{chain_checks, mp_certificate, EstimateReport};
use hcma_core::geometry::{
    distance_from_sweep, full_report, triangle_defect, DistanceEstimate, GeometryReport,
};
use hcma_core::oracle::{run_all, verify_laplacian_expansion, CheckOutcome, ExpansionReport, OracleConfig};
use hcma_core::path::GeodesicPath;
use hcma_core::potential::{KahlerPotential, SpaceMembership};
use hcma_core::solver::{solve, SolveReport};
use serde::Serialize;

use crate::checkpoint;
use crate::config::{build_density, build_endpoint, RunConfig};
use crate::error::{CliError, Result};
use crate::report::{
    write_json, write_levels_csv, write_sweep_csv, write_xy, Constants, Envelope, LevelRow,
    SweepRow,
};

fn out_path(cfg: &RunConfig, name: &str) -> PathBuf {
    Path::new(&cfg.out).join(name)
}

fn constants_for(cfg: &RunConfig, problem: &HcmaProblem) -> Constants {
    let inf_lap_f = problem.inf_lap_f();
    let c = cfg.c_override.unwrap_or_else(|| (1.0 - inf_lap_f).max(1.0));
    Constants::flat_torus(c, inf_lap_f)
}

fn config_metadata(cfg: &RunConfig) -> Result<Vec<u8>> {
    serde_json::to_vec(cfg).map_err(|e| CliError::Io(format!("cannot serialize config: {e}")))
}

/// Per-level table of a solved path: sup(n + Δφ), min metric eigenvalue,
/// energy E(t), and the sup residual of the level.
fn level_rows(path: &GeodesicPath, problem: &HcmaProblem) -> Result<Vec<LevelRow>> {
    let grid = *path.grid();
    let ns = grid.spatial_len();
    let state = PathState::compute(&grid, path.values())?;
    let energy = hcma_core::geometry::energy_profile(path)?;
    let residual = problem.residual(&state)?;
    let rows = (0..grid.time_levels())
        .map(|k| {
            let span = k * ns..(k + 1) * ns;
            LevelRow {
                t: grid.time_of(k),
                sup_h: state.trace_h[span.clone()].iter().cloned().fold(f64::MIN, f64::max),
                min_eig: state.min_eig[span.clone()].iter().cloned().fold(f64::MAX, f64::min),
                energy: energy[k],
                residual: residual[span].iter().fold(0.0, |m, r| m.max(r.abs())),
            }
        })
        .collect();
    Ok(rows)
}

fn sweep_rows(report: &SweepReport) -> Vec<SweepRow> {
    report
        .entries
        .iter()
        .map(|e| SweepRow {
            epsilon: e.epsilon,
            sup_h: e.sup_h,
            sup_phi_t: e.sup_phi_t,
            sup_grad: e.sup_grad,
        })
        .collect()
}

fn energy_xy(grid_times: &[f64], energy: &[f64]) -> Vec<(f64, f64)> {
    grid_times.iter().cloned().zip(energy.iter().cloned()).collect()
}

fn times(path: &GeodesicPath) -> Vec<f64> {
    let grid = path.grid();
    (0..grid.time_levels()).map(|k| grid.time_of(k)).collect()
}

#[derive(Serialize)]
struct SolveBody<'a> {
    endpoint0: SpaceMembership,
    endpoint1: SpaceMembership,
    sup_h: f64,
    residual_norm: f64,
    report: &'a SolveReport,
}

pub fn run_solve(cfg: &RunConfig) -> Result<()> {
    let grid = cfg.grid_handle()?;
    let density = build_density(&cfg.f, &grid)?;
    let problem = HcmaProblem::new(grid, cfg.epsilon, density)?;
    let phi0 = build_endpoint(&cfg.endpoint0, grid)?;
    let phi1 = build_endpoint(&cfg.endpoint1, grid)?;
    let initial = GeodesicPath::initial_guess(&phi0, &phi1, cfg.epsilon, cfg.mu)?;
    let report = solve(&problem, &initial, &cfg.solve_options())?;

    let rows = level_rows(&report.path, &problem)?;
    let sup_h = rows.iter().fold(f64::MIN, |m, r| m.max(r.sup_h));
    let residual_norm = report.residual_history.last().copied().unwrap_or(f64::NAN);
    let body = SolveBody {
        endpoint0: phi0.classify(),
        endpoint1: phi1.classify(),
        sup_h,
        residual_norm,
        report: &report,
    };
    write_json(
        &out_path(cfg, "report.json"),
        &Envelope {
            command: "solve",
            config: cfg,
            constants: constants_for(cfg, &problem),
            result: body,
        },
    )?;
    write_levels_csv(&out_path(cfg, "levels.csv"), &rows)?;
    let residual_xy: Vec<(f64, f64)> = report
        .residual_history
        .iter()
        .enumerate()
        .map(|(i, r)| (i as f64, *r))
        .collect();
    write_xy(&out_path(cfg, "residual.dat"), "newton iteration vs sup residual", &residual_xy)?;
    let energy: Vec<f64> = rows.iter().map(|r| r.energy).collect();
    write_xy(
        &out_path(cfg, "energy.dat"),
        "t vs E(t)",
        &energy_xy(&times(&report.path), &energy),
    )?;
    checkpoint::write(
        &out_path(cfg, "checkpoint.bin"),
        &grid,
        cfg.epsilon,
        &config_metadata(cfg)?,
        report.path.values(),
    )?;
    println!(
        "solve: epsilon {} converged in {} iterations, residual {:.3e}, sup_h {:.6}, artifacts in {}",
        cfg.epsilon, report.iterations, residual_norm, sup_h, cfg.out
    );
    Ok(())
}

#[derive(Serialize)]
struct SweepBody<'a> {
    sweep: &'a SweepReport,
    /// Certificate for the path at the smallest solved ε.
    estimate: Option<&'a EstimateReport>,
    /// Energy, length, and drift of the same path.
    geometry: Option<&'a GeometryReport>,
}

pub fn run_sweep(cfg: &RunConfig) -> Result<()> {
    let grid = cfg.grid_handle()?;
    let density = build_density(&cfg.f, &grid)?;
    let template = HcmaProblem::new(grid, cfg.epsilon, density)?;
    let phi0 = build_endpoint(&cfg.endpoint0, grid)?;
    let phi1 = build_endpoint(&cfg.endpoint1, grid)?;
    let report = sweep(&template, &phi0, &phi1, &cfg.sweep_schedule(), &cfg.solve_options())?;

    let mut estimate = None;
    let mut geometry = None;
    if let Some(last) = report.last() {
        let problem = template.with_epsilon(last.epsilon)?;
        estimate = Some(mp_certificate(&last.report.path, &problem, cfg.c_override)?);
        geometry = Some(full_report(&last.report.path, &problem)?);
        write_levels_csv(
            &out_path(cfg, "levels.csv"),
            &level_rows(&last.report.path, &problem)?,
        )?;
        let g = geometry.as_ref().unwrap();
        write_xy(
            &out_path(cfg, "energy.dat"),
            "t vs E(t) at the smallest epsilon",
            &energy_xy(&times(&last.report.path), &g.energy),
        )?;
        checkpoint::write(
            &out_path(cfg, "checkpoint.bin"),
            &grid,
            last.epsilon,
            &config_metadata(cfg)?,
            last.report.path.values(),
        )?;
    }
    let body = SweepBody {
        sweep: &report,
        estimate: estimate.as_ref(),
        geometry: geometry.as_ref(),
    };
    write_json(
        &out_path(cfg, "report.json"),
        &Envelope {
            command: "sweep",
            config: cfg,
            constants: constants_for(cfg, &template),
            result: body,
        },
    )?;
    write_sweep_csv(&out_path(cfg, "sweep.csv"), &sweep_rows(&report))?;
    let uniformity: Vec<(f64, f64)> =
        report.entries.iter().map(|e| (e.epsilon, e.sup_h)).collect();
    write_xy(&out_path(cfg, "uniformity.dat"), "epsilon vs sup_h", &uniformity)?;

    match &report.truncated {
        None => {
            println!(
                "sweep: {} stages down to epsilon {:.3e}, max sup_h {:.6}, artifacts in {}",
                report.entries.len(),
                report.entries.last().map(|e| e.epsilon).unwrap_or(f64::NAN),
                report.max_sup_h(),
                cfg.out
            );
            Ok(())
        }
        Some(t) => Err(CliError::Solver(format!(
            "sweep truncated at stage {} (epsilon {:.3e}): {}; partial artifacts in {}",
            t.stage, t.epsilon, t.error, cfg.out
        ))),
    }
}

#[derive(Serialize)]
struct DistanceBody<'a> {
    sweep: &'a SweepReport,
    distance: &'a DistanceEstimate,
}

pub fn run_distance(cfg: &RunConfig) -> Result<()> {
    let grid = cfg.grid_handle()?;
    let density = build_density(&cfg.f, &grid)?;
    let template = HcmaProblem::new(grid, cfg.epsilon, density)?;
    let phi0 = build_endpoint(&cfg.endpoint0, grid)?;
    let phi1 = build_endpoint(&cfg.endpoint1, grid)?;
    let report = sweep(&template, &phi0, &phi1, &cfg.sweep_schedule(), &cfg.solve_options())?;
    write_sweep_csv(&out_path(cfg, "sweep.csv"), &sweep_rows(&report))?;
    if report.entries.is_empty() {
        let t = report.truncated.as_ref().expect("empty sweep is truncated");
        return Err(CliError::Solver(format!(
            "no stage solved, first failure at epsilon {:.3e}: {}",
            t.epsilon, t.error
        )));
    }

    let estimate = distance_from_sweep(&report, &template)?;
    let last = report.last().expect("nonempty entries");
    write_json(
        &out_path(cfg, "report.json"),
        &Envelope {
            command: "distance",
            config: cfg,
            constants: constants_for(cfg, &template),
            result: DistanceBody {
                sweep: &report,
                distance: &estimate,
            },
        },
    )?;
    write_xy(
        &out_path(cfg, "energy.dat"),
        "t vs E(t) at the smallest epsilon",
        &energy_xy(&times(&last.report.path), &estimate.geometry.energy),
    )?;
    println!(
        "distance: {:.8} at epsilon {:.3e}, artifacts in {}",
        estimate.distance, estimate.epsilon, cfg.out
    );
    if !report.succeeded() {
        let t = report.truncated.as_ref().expect("checked");
        return Err(CliError::Solver(format!(
            "distance measured at epsilon {:.3e} only; sweep truncated at stage {}: {}",
            estimate.epsilon, t.stage, t.error
        )));
    }
    Ok(())
}

#[derive(Serialize)]
struct OracleBody {
    suites: Vec<CheckOutcome>,
    expansion: ExpansionReport,
    passed: bool,
}

pub fn run_oracle(cfg: &RunConfig) -> Result<()> {
    let oracle_cfg = OracleConfig {
        n: cfg.n,
        seed: cfg.seed,
        samples: cfg.samples,
        curvature_b: cfg.curvature_b,
    };
    let suites = run_all(oracle_cfg);
    let expansion = verify_laplacian_expansion(cfg.n, cfg.seed)?;
    let passed = suites.iter().all(|s| s.passed);
    let slack: Vec<(f64, f64)> = suites
        .iter()
        .enumerate()
        .map(|(i, s)| (i as f64, s.worst_rel_slack))
        .collect();

    let mut csv = String::from("id,samples,worst_rel_slack,worst_sample,failures,passed\n");
    for s in &suites {
        csv.push_str(&format!(
            "{},{},{},{},{},{}\n",
            s.id, s.samples, s.worst_rel_slack, s.worst_sample, s.failures, s.passed
        ));
    }
    crate::report::write_atomic(&out_path(cfg, "suites.csv"), csv.as_bytes())?;
    write_xy(&out_path(cfg, "slack.dat"), "suite index vs worst relative slack", &slack)?;

    // The inequality suites are dimensionless; the constants block reports
    // the flat-background values C = 1, inf Δf = 0.
    let body = OracleBody {
        suites,
        expansion,
        passed,
    };
    write_json(
        &out_path(cfg, "report.json"),
        &Envelope {
            command: "oracle",
            config: cfg,
            constants: Constants::flat_torus(1.0, 0.0),
            result: &body,
        },
    )?;
    println!(
        "oracle: {} suites at n = {}, {} samples each, expansion order {:.4}, artifacts in {}",
        body.suites.len(),
        cfg.n,
        cfg.samples,
        body.expansion.order,
        cfg.out
    );
    if !body.passed {
        let failing: Vec<&str> = body
            .suites
            .iter()
            .filter(|s| !s.passed)
            .map(|s| s.id.as_str())
            .collect();
        return Err(CliError::Oracle(format!(
            "inequality suites failed: {}",
            failing.join(", ")
        )));
    }
    Ok(())
}

#[derive(Serialize)]
struct VerifyBody<'a> {
    epsilon: f64,
    fd: &'a [FdCheckRow],
    geometry: &'a GeometryReport,
    estimate: &'a EstimateReport,
    chain: &'a [CheckOutcome],
    passed: bool,
}

/// `f_explicit` marks a density the user set on the command line or in the
/// config file; otherwise the density recorded in the checkpoint metadata is
/// used, so a stored run re-checks against the problem it was solved for.
pub fn run_verify(cfg: &RunConfig, f_explicit: bool) -> Result<()> {
    let ckpt = cfg.checkpoint.as_deref().ok_or_else(|| {
        CliError::Config("verify needs a checkpoint (key `checkpoint` or flag --checkpoint)".into())
    })?;
    let snap = checkpoint::read(Path::new(ckpt))?;
    let grid = snap.grid;

    let mut cfg = cfg.clone();
    cfg.epsilon = snap.epsilon;
    if !f_explicit {
        if let Ok(stored) = serde_json::from_slice::<RunConfig>(&snap.metadata) {
            cfg.f = stored.f;
        }
    }
    let cfg = &cfg;
    let density = build_density(&cfg.f, &grid)?;
    let problem = HcmaProblem::new(grid, snap.epsilon, density)?;
    let path = GeodesicPath::new(grid, snap.values.clone())?;

    let direction = TrigPoly::random_direction(grid.complex_dim(), cfg.seed, 1.0)
        .sample_path(&grid);
    let steps: Vec<f64> = (0..cfg.fd_steps).map(|i| cfg.fd_step / f64::powi(2.0, i as i32)).collect();
    let fd = problem.fd_check_linearization(&path, direction.values(), &steps)?;
    let geometry = full_report(&path, &problem)?;
    let estimate = mp_certificate(&path, &problem, cfg.c_override)?;
    let chain = chain_checks(&path, cfg.stride)?;
    let passed = estimate.interior_checks_pass() && chain.iter().all(|c| c.passed);

    let body = VerifyBody {
        epsilon: snap.epsilon,
        fd: &fd,
        geometry: &geometry,
        estimate: &estimate,
        chain: &chain,
        passed,
    };
    write_json(
        &out_path(cfg, "report.json"),
        &Envelope {
            command: "verify",
            config: cfg,
            constants: constants_for(cfg, &problem),
            result: &body,
        },
    )?;
    write_levels_csv(&out_path(cfg, "levels.csv"), &level_rows(&path, &problem)?)?;
    let fd_xy: Vec<(f64, f64)> = fd.iter().map(|r| (r.step, r.sup_error)).collect();
    write_xy(&out_path(cfg, "fd.dat"), "step vs linearization error", &fd_xy)?;
    write_xy(
        &out_path(cfg, "energy.dat"),
        "t vs E(t)",
        &energy_xy(&times(&path), &geometry.energy),
    )?;
    println!(
        "verify: epsilon {:.3e}, max drift {:.3e}, q max at {:?}, checks {}, artifacts in {}",
        snap.epsilon,
        geometry.max_drift.unwrap_or(f64::NAN),
        estimate.location,
        if passed { "passed" } else { "FAILED" },
        cfg.out
    );
    if !passed {
        return Err(CliError::Oracle(
            "certificate or on-path inequality checks failed; see report.json".into(),
        ));
    }
    Ok(())
}

#[derive(Serialize)]
struct TriangleLeg {
    from: String,
    to: String,
    epsilon: f64,
    distance: f64,
    truncated: bool,
}

#[derive(Serialize)]
struct TriangleBody {
    legs: Vec<TriangleLeg>,
    d01: f64,
    d12: f64,
    d02: f64,
    /// d02 − d01 − d12, reported with sign, never asserted.
    defect: f64,
}

pub fn run_triangle(cfg: &RunConfig) -> Result<()> {
    let grid = cfg.grid_handle()?;
    let density = build_density(&cfg.f, &grid)?;
    let template = HcmaProblem::new(grid, cfg.epsilon, density)?;
    let spec2 = cfg.endpoint2.as_deref().ok_or_else(|| {
        CliError::Config("triangle needs a third endpoint (key `endpoint2` or flag --phi2)".into())
    })?;
    let specs = [cfg.endpoint0.as_str(), cfg.endpoint1.as_str(), spec2];
    let ends: Vec<KahlerPotential> = specs
        .iter()
        .map(|s| build_endpoint(s, grid))
        .collect::<Result<_>>()?;

    let mut legs = Vec::new();
    let mut dist = [0.0; 3];
    for (slot, (a, b)) in [(0, 1), (1, 2), (0, 2)].into_iter().enumerate() {
        let report = sweep(&template, &ends[a], &ends[b], &cfg.sweep_schedule(), &cfg.solve_options())?;
        if report.entries.is_empty() {
            let t = report.truncated.as_ref().expect("empty sweep is truncated");
            return Err(CliError::Solver(format!(
                "leg {} -> {} never solved, first failure at epsilon {:.3e}: {}",
                specs[a], specs[b], t.epsilon, t.error
            )));
        }
        let estimate = distance_from_sweep(&report, &template)?;
        dist[slot] = estimate.distance;
        legs.push(TriangleLeg {
            from: specs[a].to_string(),
            to: specs[b].to_string(),
            epsilon: estimate.epsilon,
            distance: estimate.distance,
            truncated: !report.succeeded(),
        });
    }
    let [d01, d12, d02] = dist;
    let body = TriangleBody {
        legs,
        d01,
        d12,
        d02,
        defect: triangle_defect(d01, d12, d02),
    };
    write_json(
        &out_path(cfg, "report.json"),
        &Envelope {
            command: "triangle",
            config: cfg,
            constants: constants_for(cfg, &template),
            result: &body,
        },
    )?;
    let mut csv = String::from("from,to,epsilon,distance,truncated\n");
    for leg in &body.legs {
        csv.push_str(&format!(
            "{},{},{},{},{}\n",
            leg.from, leg.to, leg.epsilon, leg.distance, leg.truncated
        ));
    }
    crate::report::write_atomic(&out_path(cfg, "legs.csv"), csv.as_bytes())?;
    write_xy(
        &out_path(cfg, "legs.dat"),
        "leg index vs distance",
        &body
            .legs
            .iter()
            .enumerate()
            .map(|(i, l)| (i as f64, l.distance))
            .collect::<Vec<_>>(),
    )?;
    println!(
        "triangle: d01 {:.6}, d12 {:.6}, d02 {:.6}, defect {:+.3e}, artifacts in {}",
        d01, d12, d02, body.defect, cfg.out
    );
    Ok(())
}
