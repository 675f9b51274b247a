//! Experiment driver behind the command-line interface: rollouts, the
//! cylinder benchmark, shape/gait optimization and gradient verification,
//! each writing its artifacts into an output directory.

use std::path::{Path, PathBuf};

use super::bfgs::{bfgs_optimize, BfgsOptions};
use super::config::{ConfiguredBody, SimConfigFile};
use super::diagnostics::{drag_lift_coefficients, strouhal_number, ForceHistory, ForceRow};
use super::output;
use crate::bodies::{BoundaryJacobian, ParametricBody, TailParams};
use crate::error::{Error, Result};
use crate::fsi::{simulate, Schedule, Trajectory};
use crate::grid::{EdgeCondition, FluidState};
use crate::ib::BoundaryMesh;
use crate::navier_stokes::FluidConfig;
use crate::operators::{build_operators, FluidOperators};
use crate::sensitivity::{
    finite_difference_check, objective_gradient, objective_thrust, simulate_with_sensitivity,
    ObjectiveSpec,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentMode {
    Simulate,
    BenchmarkCylinder,
    Optimize,
    CheckGradients,
}

/// Command-line overrides applied on top of the config file.
#[derive(Debug, Clone, Copy, Default)]
pub struct Overrides {
    pub re: Option<f64>,
    pub steps: Option<usize>,
}

/// What an experiment produced, for reporting and tests.
#[derive(Debug, Clone, Default)]
pub struct ExperimentReport {
    pub summary: Vec<(String, String)>,
    pub files: Vec<PathBuf>,
}

impl ExperimentReport {
    fn add(&mut self, key: &str, value: impl std::fmt::Display) {
        self.summary.push((key.to_string(), value.to_string()));
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.summary
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }
}

/// A body with no boundary: rollouts reduce to plain fluid stepping.
struct NoBody;

impl ParametricBody for NoBody {
    fn n_params(&self) -> usize {
        0
    }

    fn mesh_at(&self, _theta: &[f64], _t: f64) -> Result<BoundaryMesh> {
        Ok(BoundaryMesh::empty())
    }

    fn boundary_jacobian(&self, _theta: &[f64], _t: f64) -> Result<BoundaryJacobian> {
        Ok(BoundaryJacobian::zeros(0, 0))
    }
}

struct Setup {
    ops: FluidOperators,
    cfg: FluidConfig,
    n_steps: usize,
    body: ConfiguredBody,
    initial: FluidState,
}

fn prepare(config: &SimConfigFile, overrides: Overrides, mode: TailParams) -> Result<Setup> {
    let grid = config.grid_spec()?;
    let bc = config.boundary_conditions();
    let ops = build_operators(&grid, &bc)?;
    let mut cfg = config.fluid_config();
    if let Some(re) = overrides.re {
        cfg.re = re;
    }
    cfg.a_ext = config.a_ext_vector(&ops);
    let n_steps = overrides.steps.unwrap_or(config.fluid.n_steps);
    let body = config.build_body(&grid, mode)?;

    // impulsive start from the free-stream velocity when one is prescribed
    let stream = [bc.west, bc.east, bc.south, bc.north]
        .iter()
        .find_map(|e| match e {
            EdgeCondition::Inflow { velocity } | EdgeCondition::FarField { velocity } => {
                Some(*velocity)
            }
            _ => None,
        })
        .unwrap_or((0.0, 0.0));
    let initial = FluidState::uniform(&ops.layout, ops.n_f(), stream);
    Ok(Setup {
        ops,
        cfg,
        n_steps,
        body,
        initial,
    })
}

fn force_history(traj: &Trajectory, cfg: &FluidConfig) -> Result<ForceHistory> {
    let mut history = ForceHistory::new();
    for rec in &traj.records {
        let f = (
            rec.net_force_nd.0 * cfg.force_scale(),
            rec.net_force_nd.1 * cfg.force_scale(),
        );
        let (cd, cl) = drag_lift_coefficients(f, cfg)?;
        history.push(ForceRow {
            t: rec.t,
            fx: f.0,
            fy: f.1,
            cd,
            cl,
        });
    }
    Ok(history)
}

fn max_residuals(traj: &Trajectory) -> (f64, f64) {
    let cont = traj
        .records
        .iter()
        .fold(0.0f64, |m, r| m.max(r.continuity_residual));
    let noslip = traj
        .records
        .iter()
        .fold(0.0f64, |m, r| m.max(r.noslip_residual));
    (cont, noslip)
}

pub fn run_experiment(
    config: &SimConfigFile,
    mode: ExperimentMode,
    output_dir: &Path,
    overrides: Overrides,
) -> Result<ExperimentReport> {
    output::ensure_dir(output_dir)?;
    match mode {
        ExperimentMode::Simulate => run_simulate(config, output_dir, overrides),
        ExperimentMode::BenchmarkCylinder => run_benchmark(config, output_dir, overrides),
        ExperimentMode::Optimize => run_optimize(config, output_dir, overrides),
        ExperimentMode::CheckGradients => run_check_gradients(config, output_dir, overrides),
    }
}

fn run_simulate(
    config: &SimConfigFile,
    out_dir: &Path,
    overrides: Overrides,
) -> Result<ExperimentReport> {
    let setup = prepare(config, overrides, TailParams::None)?;
    let mut report = ExperimentReport::default();
    let schedule = Schedule {
        dt: setup.cfg.dt,
        n_steps: setup.n_steps,
    };

    let stride = config.output.snapshot_stride;
    let body: &dyn ParametricBody = match &setup.body {
        ConfiguredBody::None => &NoBody,
        ConfiguredBody::Cylinder(c) => c,
        ConfiguredBody::Tail(t) => t.as_ref(),
    };

    // stream the run so intermediate snapshots can be written
    let mut snapshot_paths = Vec::new();
    let traj = crate::fsi::simulate_observed(
        &setup.initial,
        body,
        &[],
        schedule,
        &setup.ops,
        &setup.cfg,
        false,
        &mut |step, out, _mesh| {
            if stride > 0 && (step + 1) % stride == 0 {
                let path = out_dir.join(format!("fields_{:06}.csv", step + 1));
                output::write_snapshot(&path, &out.state, &setup.ops)?;
                snapshot_paths.push(path);
            }
            Ok(())
        },
    )?;

    let history = force_history(&traj, &setup.cfg)?;
    let fh_path = out_dir.join("force_history.csv");
    output::write_force_history(&fh_path, &history)?;
    report.files.push(fh_path);
    report.files.extend(snapshot_paths);

    if traj.records.iter().any(|r| r.n_nodes > 0) {
        let times: Vec<f64> = traj.records.iter().map(|r| r.t).collect();
        let thrust: Vec<f64> = history.rows().iter().map(|r| r.fx).collect();
        let nt_path = out_dir.join("normalized_thrust.csv");
        output::write_normalized_thrust(&nt_path, &times, &thrust)?;
        report.files.push(nt_path);
    }

    let final_path = out_dir.join(format!("fields_{:06}.csv", traj.n_steps()));
    output::write_snapshot(&final_path, &traj.final_state, &setup.ops)?;
    report.files.push(final_path);

    let (cont, noslip) = max_residuals(&traj);
    report.add("mode", "simulate");
    report.add("steps", traj.n_steps());
    report.add("final_time", format!("{:.6}", traj.final_state.t));
    report.add("max_continuity_residual", format!("{cont:.3e}"));
    report.add("max_noslip_residual", format!("{noslip:.3e}"));
    if !history.is_empty() {
        report.add("mean_cd", format!("{:.6}", history.mean_cd()));
        report.add("mean_fx", format!("{:.6e}", mean_fx(&history)));
    }
    finish(out_dir, report)
}

fn mean_fx(history: &ForceHistory) -> f64 {
    let s = history.settled();
    s.iter().map(|r| r.fx).sum::<f64>() / s.len().max(1) as f64
}

fn run_benchmark(
    config: &SimConfigFile,
    out_dir: &Path,
    overrides: Overrides,
) -> Result<ExperimentReport> {
    let setup = prepare(config, overrides, TailParams::None)?;
    let ConfiguredBody::Cylinder(cylinder) = &setup.body else {
        return Err(Error::InvalidConfig(
            "benchmark-cylinder needs a cylinder body".into(),
        ));
    };
    let mut report = ExperimentReport::default();
    let schedule = Schedule {
        dt: setup.cfg.dt,
        n_steps: setup.n_steps,
    };
    let traj = simulate(
        &setup.initial,
        cylinder,
        &[],
        schedule,
        &setup.ops,
        &setup.cfg,
    )?;
    let history = force_history(&traj, &setup.cfg)?;
    let fh_path = out_dir.join("force_history.csv");
    output::write_force_history(&fh_path, &history)?;
    report.files.push(fh_path);

    let final_path = out_dir.join("fields_final.csv");
    output::write_snapshot(&final_path, &traj.final_state, &setup.ops)?;
    report.files.push(final_path);

    let (cont, noslip) = max_residuals(&traj);
    report.add("mode", "benchmark-cylinder");
    report.add("re", setup.cfg.re);
    report.add("steps", traj.n_steps());
    report.add("cd_mean", format!("{:.6}", history.mean_cd()));
    report.add("cl_amplitude", format!("{:.6}", history.lift_amplitude()));
    match strouhal_number(&history, &setup.cfg) {
        Ok(st) => report.add("strouhal", format!("{st:.6}")),
        Err(e) => report.add("strouhal", format!("none ({e})")),
    }
    report.add("max_continuity_residual", format!("{cont:.3e}"));
    report.add("max_noslip_residual", format!("{noslip:.3e}"));
    finish(out_dir, report)
}

/// Box bounds for the tail parameter modes, around the defaults.
pub fn tail_parameter_bounds(theta0: &[f64], mode: TailParams, length: f64) -> Vec<(f64, f64)> {
    let w = 0.02 * length;
    match mode {
        TailParams::ShapeOnly => vec![
            (theta0[0].max(2.0 * w) * 0.5, 0.2 * length),
            (-0.1 * length, 0.1 * length),
            (-0.1 * length, 0.1 * length),
            (-0.1 * length, 0.1 * length),
        ],
        TailParams::FrequencyOnly => vec![(0.5 * theta0[0], 2.0 * theta0[0])],
        TailParams::ShapeAndFrequency => {
            let mut b = tail_parameter_bounds(&theta0[..4], TailParams::ShapeOnly, length);
            let f = theta0[4];
            b.push((0.5 * f, 2.0 * f));
            b
        }
        TailParams::None => Vec::new(),
    }
}

fn optimize_mode(config: &SimConfigFile) -> Result<(TailParams, usize)> {
    let section = config.optimize.as_ref().ok_or_else(|| {
        Error::InvalidConfig("optimize mode needs an [optimize] section".into())
    })?;
    let mode = match section.mode.as_str() {
        "shape" => TailParams::ShapeOnly,
        "frequency" => TailParams::FrequencyOnly,
        "shape_and_gait" => TailParams::ShapeAndFrequency,
        other => {
            return Err(Error::InvalidConfig(format!(
                "unknown optimize.mode '{other}'"
            )))
        }
    };
    Ok((mode, section.max_iters))
}

fn run_optimize(
    config: &SimConfigFile,
    out_dir: &Path,
    overrides: Overrides,
) -> Result<ExperimentReport> {
    let (mode, max_iters) = optimize_mode(config)?;
    let setup = prepare(config, overrides, mode)?;
    let ConfiguredBody::Tail(tail) = &setup.body else {
        return Err(Error::InvalidConfig("optimize needs a tail body".into()));
    };
    let theta0 = tail.default_theta();
    let length: f64 = tail.chain().lengths.iter().sum();
    let bounds = tail_parameter_bounds(&theta0, mode, length);

    // horizon: one flap period of the initial gait unless configured
    let base_freq = match mode {
        TailParams::FrequencyOnly => theta0[0],
        TailParams::ShapeAndFrequency => theta0[4],
        _ => config.gait.as_ref().map_or(1.0, |g| g.frequency),
    };
    let horizon = config
        .optimize
        .as_ref()
        .and_then(|o| o.horizon)
        .unwrap_or(((1.0 / base_freq) / setup.cfg.dt).ceil() as usize)
        .min(setup.n_steps);
    let schedule = Schedule {
        dt: setup.cfg.dt,
        n_steps: horizon,
    };
    let spec = ObjectiveSpec::thrust_x(horizon, setup.cfg.dt);

    let mut eval_thetas: Vec<Vec<f64>> = Vec::new();
    let mut eval_losses: Vec<f64> = Vec::new();
    let objective = |theta: &[f64]| -> Result<(f64, Vec<f64>)> {
        match simulate_with_sensitivity(
            &setup.initial,
            tail.as_ref(),
            theta,
            schedule,
            &setup.ops,
            &setup.cfg,
        ) {
            Ok((traj, sens)) => {
                let loss = objective_thrust(&traj, &spec, &setup.ops.grid, &setup.cfg);
                let grad = objective_gradient(&traj, &sens, &spec, &setup.ops.grid, &setup.cfg);
                Ok((loss, grad))
            }
            // invalid probe geometry: reject the step, keep optimizing
            Err(Error::InvalidConfig(_)) => Ok((f64::INFINITY, vec![0.0; theta.len()])),
            Err(e) => Err(e),
        }
    };

    let mut tracked = |theta: &[f64]| -> Result<(f64, Vec<f64>)> {
        let (loss, grad) = objective(theta)?;
        eval_thetas.push(theta.to_vec());
        eval_losses.push(loss);
        Ok((loss, grad))
    };

    let outcome = bfgs_optimize(
        &mut tracked,
        &theta0,
        &bounds,
        BfgsOptions {
            max_iters,
            ..Default::default()
        },
    )?;

    let oh_path = out_dir.join("optimization_history.csv");
    output::write_optimization_history(&oh_path, &eval_losses, &eval_thetas)?;

    let mut report = ExperimentReport::default();
    report.files.push(oh_path);
    report.add("mode", "optimize");
    report.add(
        "parametrization",
        match mode {
            TailParams::ShapeOnly => "shape",
            TailParams::FrequencyOnly => "frequency",
            TailParams::ShapeAndFrequency => "shape_and_gait",
            TailParams::None => "none",
        },
    );
    report.add("initial_loss", format!("{:.6e}", outcome.loss_history[0]));
    report.add("final_loss", format!("{:.6e}", outcome.loss));
    let improvement = 100.0 * (outcome.loss_history[0] - outcome.loss)
        / outcome.loss_history[0].abs().max(1e-300);
    report.add("improvement_percent", format!("{improvement:.2}"));
    report.add("iterations", outcome.iterations);
    report.add("converged", outcome.converged);
    report.add("line_search_failed", outcome.line_search_failed);
    report.add(
        "theta_final",
        outcome
            .theta
            .iter()
            .map(|v| format!("{v:.6e}"))
            .collect::<Vec<_>>()
            .join(" "),
    );
    finish(out_dir, report)
}

fn run_check_gradients(
    config: &SimConfigFile,
    out_dir: &Path,
    overrides: Overrides,
) -> Result<ExperimentReport> {
    let mode = match &config.optimize {
        Some(_) => optimize_mode(config)?.0,
        None => TailParams::ShapeOnly,
    };
    let setup = prepare(config, overrides, mode)?;
    let mut cfg = setup.cfg.clone();
    // gradient verification wants residuals resolved well below the
    // finite-difference perturbation
    cfg.newton_tol = cfg.newton_tol.min(1e-10);
    cfg.newton_max_iters = cfg.newton_max_iters.max(20);

    let cylinder_with_param;
    let (body, theta0): (&dyn ParametricBody, Vec<f64>) = match &setup.body {
        ConfiguredBody::Cylinder(c) => {
            cylinder_with_param = c.clone().with_diameter_parameter();
            let d = cylinder_with_param.diameter;
            (&cylinder_with_param, vec![d])
        }
        ConfiguredBody::Tail(t) => (t.as_ref(), t.default_theta()),
        ConfiguredBody::None => {
            return Err(Error::InvalidConfig(
                "check-gradients needs a body to differentiate".into(),
            ))
        }
    };

    let schedule = Schedule {
        dt: cfg.dt,
        n_steps: setup.n_steps,
    };
    let spec = ObjectiveSpec::thrust_x(schedule.n_steps, cfg.dt);
    let report_fd = finite_difference_check(
        &setup.initial,
        body,
        &theta0,
        schedule,
        &setup.ops,
        &cfg,
        &spec,
        1e-5,
    )?;

    let mut csv = String::from("component,analytic,finite_difference,rel_error\n");
    for m in 0..theta0.len() {
        csv.push_str(&format!(
            "{m},{:.12e},{:.12e},{:.3e}\n",
            report_fd.analytic[m], report_fd.finite_difference[m], report_fd.rel_errors[m]
        ));
    }
    let gc_path = out_dir.join("gradient_check.csv");
    std::fs::write(&gc_path, csv)?;

    let mut report = ExperimentReport::default();
    report.files.push(gc_path);
    report.add("mode", "check-gradients");
    report.add("n_params", theta0.len());
    report.add("max_rel_error", format!("{:.3e}", report_fd.max_rel_error));
    finish(out_dir, report)
}

fn finish(out_dir: &Path, mut report: ExperimentReport) -> Result<ExperimentReport> {
    let path = out_dir.join("summary.txt");
    let entries: Vec<(&str, String)> = report
        .summary
        .iter()
        .map(|(k, v)| (k.as_str(), v.clone()))
        .collect();
    output::write_summary(&path, &entries)?;
    report.files.push(path);
    Ok(report)
}
