//! Runs a scenario: exact reference per configuration, every requested model
//! scored against it, warm starts chained along the trajectory.

use serde::{Deserialize, Serialize};

use crate::bench::report::{Report, ReportRow};
use crate::bench::scenario::{ModelSpec, Scenario, WarmStart};
use crate::error::{Error, Result};
use crate::exact::{solve_exact_bvp, BoundaryConditions, ExactOptions, ShootingState, StaticRod};
use crate::gvs::{solve_gvs, GvsModel, GvsOptions, GvsState, ModeSelector, ShapeBasis};
use crate::interp::{solve_interp, InterpOptions, KktState};
use crate::lie::{interpolate_pose, Pose, Vec3};
use crate::metrics::{marker_error, pose_error_curve, summarize, timed_solve, MarkerSet};
use crate::newton::NewtonOptions;
use crate::rod::{DistributedLoad, RodProperties, RodShape};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunOptions {
    pub steps: usize,
    pub tol: f64,
    pub max_iter: usize,
    /// Timed repeats per configuration; the median is reported.
    pub repeats: usize,
    /// Untimed intermediate poses from the straight rod to the first
    /// configuration when warm starts are chained. Zero solves the first
    /// configuration cold.
    pub ramp: usize,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            steps: 200,
            tol: 1e-7,
            max_iter: 200,
            repeats: 5,
            ramp: 0,
        }
    }
}

/// A solver together with its warm-start state.
#[derive(Clone, Debug)]
pub enum Solver {
    Exact(StaticRod, ExactOptions),
    Interp(Vec3, InterpOptions),
    Gvs(Box<GvsModel>, GvsOptions),
}

#[derive(Clone, Debug)]
pub enum WarmState {
    Exact(ShootingState),
    Interp(KktState),
    Gvs(GvsState),
}

impl Solver {
    pub fn exact(props: &RodProperties, gravity: bool, opts: &RunOptions) -> Result<Self> {
        let load = if gravity { DistributedLoad::gravity(props)? } else { DistributedLoad::none() };
        let rod = StaticRod::new(props, &load)?;
        Ok(Solver::Exact(
            rod,
            ExactOptions {
                steps: opts.steps,
                newton: newton_options(opts),
                ..Default::default()
            },
        ))
    }

    /// The interpolated model ignores external loads by construction.
    pub fn from_spec(spec: &ModelSpec, props: &RodProperties, gravity: bool, opts: &RunOptions) -> Result<Self> {
        match spec {
            ModelSpec::Interp { order } => {
                let rod = StaticRod::unloaded(props)?;
                Ok(Solver::Interp(
                    rod.bending_torsion(),
                    InterpOptions {
                        order: *order,
                        steps: opts.steps,
                        tol: opts.tol,
                        max_iter: opts.max_iter,
                        ..Default::default()
                    },
                ))
            }
            ModelSpec::Gvs { basis, .. } => {
                let load = if gravity { DistributedLoad::gravity(props)? } else { DistributedLoad::none() };
                let rod = StaticRod::new(props, &load)?;
                let modes = ModeSelector::for_model(rod.model);
                let counts = spec.gvs_counts(modes.modes.len())?;
                let model = GvsModel::new(rod, ShapeBasis::new(*basis, counts))?;
                Ok(Solver::Gvs(
                    Box::new(model),
                    GvsOptions {
                        steps: opts.steps,
                        newton: newton_options(opts),
                    },
                ))
            }
        }
    }

    pub fn dof(&self) -> usize {
        match self {
            Solver::Exact(..) | Solver::Interp(..) => 6,
            Solver::Gvs(m, _) => m.dim(),
        }
    }

    pub fn solve(&self, bc: &BoundaryConditions, warm: Option<&WarmState>) -> Result<(RodShape, WarmState)> {
        match (self, warm) {
            (Solver::Exact(rod, o), w) => {
                let g = match w {
                    Some(WarmState::Exact(s)) => Some(s),
                    _ => None,
                };
                solve_exact_bvp(rod, bc, g, o).map(|(s, st)| (s, WarmState::Exact(st)))
            }
            (Solver::Interp(k, o), w) => {
                let g = match w {
                    Some(WarmState::Interp(s)) => Some(s),
                    _ => None,
                };
                solve_interp(bc, k, g, o).map(|(s, st)| (s, WarmState::Interp(st)))
            }
            (Solver::Gvs(m, o), w) => {
                let g = match w {
                    Some(WarmState::Gvs(s)) => Some(s),
                    _ => None,
                };
                solve_gvs(m, bc, g, o).map(|(s, st)| (s, WarmState::Gvs(st)))
            }
        }
    }
}

fn newton_options(opts: &RunOptions) -> NewtonOptions {
    NewtonOptions {
        tol: opts.tol,
        max_iter: opts.max_iter,
        ..Default::default()
    }
}

/// Warm state reached by solving through `ramp` poses between the straight
/// rod and `target`. Failures along the ramp fall back to a cold start.
pub fn ramp_to(solver: &Solver, target: &Pose, ramp: usize) -> Option<WarmState> {
    if ramp == 0 {
        return None;
    }
    let straight = Pose::from_translation(Vec3::x());
    let mut warm = None;
    for k in 1..=ramp {
        let pose = interpolate_pose(&straight, target, k as f64 / (ramp + 1) as f64);
        match solver.solve(&BoundaryConditions::new(pose), warm.as_ref()) {
            Ok((_, w)) => warm = Some(w),
            Err(_) => return None,
        }
    }
    warm
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Solve once per repeat from the same warm state; returns the first solution,
/// the median wall time and the first solve's iteration count.
fn timed(solver: &Solver, bc: &BoundaryConditions, warm: Option<&WarmState>, repeats: usize) -> (Result<(RodShape, WarmState)>, f64) {
    let first = timed_solve(|| solver.solve(bc, warm));
    let mut times = vec![first.wall_time];
    if first.result.is_ok() {
        for _ in 1..repeats.max(1) {
            times.push(timed_solve(|| solver.solve(bc, warm)).wall_time);
        }
    }
    (first.result, median(times))
}

/// Exact reference shapes for every configuration, validated against their
/// own boundary conditions.
pub fn reference_shapes(scenario: &Scenario, props: &RodProperties, opts: &RunOptions) -> Result<Vec<(RodShape, f64)>> {
    let exact = Solver::exact(props, scenario.gravity, opts)?;
    let chain = scenario.warm_start == WarmStart::Chain;
    let mut warm = if chain { ramp_to(&exact, &scenario.configs[0], opts.ramp) } else { None };
    let mut out = Vec::with_capacity(scenario.configs.len());
    for pose in &scenario.configs {
        let bc = BoundaryConditions::new(*pose);
        let (result, time) = timed(&exact, &bc, warm.as_ref(), opts.repeats);
        let (shape, state) = result?;
        let residual = bc.residual(shape.tip()).norm();
        if residual > opts.tol {
            return Err(Error::NoConvergence {
                iterations: shape.diagnostics.iterations,
                residual,
            });
        }
        if chain {
            warm = Some(state);
        }
        out.push((shape, time));
    }
    Ok(out)
}

/// Score every model of the scenario against the exact reference. Model
/// failures are reported per row; a failing reference is an error.
pub fn run_scenario(scenario: &Scenario, props: &RodProperties, opts: &RunOptions) -> Result<Report> {
    run_scenario_with_markers(scenario, props, opts, &[])
}

/// As [`run_scenario`], additionally scoring measured markers per configuration.
pub fn run_scenario_with_markers(
    scenario: &Scenario,
    props: &RodProperties,
    opts: &RunOptions,
    markers: &[MarkerSet],
) -> Result<Report> {
    scenario.validate()?;
    props.validate()?;
    let references = reference_shapes(scenario, props, opts)?;
    let mut report = Report::default();
    let chain = scenario.warm_start == WarmStart::Chain;

    for (k, (shape, time)) in references.iter().enumerate() {
        let mut row = ReportRow::new(&scenario.name, k, "exact", 6);
        row.fill_success(shape, *time, &summarize(&pose_error_curve(shape, shape, props.length)?, props.length));
        row.gravity = scenario.gravity;
        if let Some(m) = markers.get(k) {
            row.set_markers(&marker_error(shape, m, props.length)?, m);
        }
        report.rows.push(row);
    }

    for spec in &scenario.models {
        let solver = Solver::from_spec(spec, props, scenario.gravity, opts)?;
        let id = spec.id();
        let mut warm = if chain { ramp_to(&solver, &scenario.configs[0], opts.ramp) } else { None };
        for (k, pose) in scenario.configs.iter().enumerate() {
            let bc = BoundaryConditions::new(*pose);
            let mut row = ReportRow::new(&scenario.name, k, &id, solver.dof());
            row.gravity = scenario.gravity && !matches!(solver, Solver::Interp(..));
            let (result, time) = timed(&solver, &bc, warm.as_ref(), opts.repeats);
            match result {
                Ok((shape, state)) => {
                    let reference = &references[k].0;
                    let curve = pose_error_curve(&shape, reference, props.length)?;
                    row.fill_success(&shape, time, &summarize(&curve, props.length));
                    row.error_curve = curve.samples;
                    if let Some(m) = markers.get(k) {
                        row.set_markers(&marker_error(&shape, m, props.length)?, m);
                    }
                    if chain {
                        warm = Some(state);
                    }
                }
                Err(e) => {
                    row.time_s = time;
                    row.failure = Some(e.to_string());
                }
            }
            report.rows.push(row);
        }
    }
    Ok(report)
}
