//! Browser bindings. Every export returns a JSON string; failures come back as
//! `{"error": "..."}` rather than exceptions.

use std::cell::RefCell;
use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

use strainrod::bench::runner::{RunOptions, Solver, WarmState};
use strainrod::bench::scenario::{arc_tip, ModelSpec, Scenario};
use strainrod::exact::BoundaryConditions;
use strainrod::lie::{exp_so3, log_so3, rotation_about, Pose, Vec3};
use strainrod::metrics::{pose_error_curve, summarize};
use strainrod::rod::{RodProperties, RodShape};
use strainrod::{Error, Result};

/// Tip pose on the unit rod: position and rotation vector.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TipPose {
    pub position: [f64; 3],
    pub rotation: [f64; 3],
}

impl TipPose {
    fn from_pose(p: &Pose) -> Self {
        Self {
            position: p.position.into(),
            rotation: log_so3(&p.rotation).into(),
        }
    }

    fn pose(&self) -> Pose {
        Pose::new(exp_so3(&Vec3::from(self.rotation)), Vec3::from(self.position))
    }
}

thread_local! {
    static WARM: RefCell<HashMap<String, (Pose, WarmState)>> = RefCell::new(HashMap::new());
}

/// Largest tip pose change, in position plus rotation angle, that still
/// reuses the previous solution. Bigger jumps can land on another equilibrium.
const WARM_RADIUS: f64 = 0.25;

fn pose_distance(a: &Pose, b: &Pose) -> f64 {
    (a.position - b.position).norm() + log_so3(&(a.rotation.transpose() * b.rotation)).norm()
}

fn solver(id: &str) -> Result<Solver> {
    let props = RodProperties::fibreglass_sim();
    let opts = RunOptions::default();
    if id == "exact" {
        Solver::exact(&props, false, &opts)
    } else {
        Solver::from_spec(&ModelSpec::parse(id)?, &props, false, &opts)
    }
}

/// Solve from the last solution of the same model when its pose is nearby,
/// falling back to a cold start.
fn solve_warm(id: &str, bc: &BoundaryConditions) -> Result<RodShape> {
    let s = solver(id)?;
    let warm = WARM.with(|w| {
        w.borrow()
            .get(id)
            .filter(|(pose, _)| pose_distance(pose, &bc.tip) < WARM_RADIUS)
            .map(|(_, state)| state.clone())
    });
    let (shape, state) = match s.solve(bc, warm.as_ref()) {
        Ok(r) => r,
        Err(_) if warm.is_some() => s.solve(bc, None)?,
        Err(e) => return Err(e),
    };
    WARM.with(|w| w.borrow_mut().insert(id.to_string(), (bc.tip, state)));
    Ok(shape)
}

fn shape_json(id: &str, shape: &RodShape) -> Value {
    let points: Vec<[f64; 3]> = shape.samples.iter().step_by(4).map(|s| s.pose.position.into()).collect();
    json!({
        "model": id,
        "points": points,
        "iterations": shape.diagnostics.iterations,
        "residual": shape.diagnostics.residual_norm,
    })
}

fn parse_pose(pose_json: &str) -> Result<BoundaryConditions> {
    let tip: TipPose = serde_json::from_str(pose_json).map_err(|e| Error::Parse {
        line: e.line(),
        message: e.to_string(),
    })?;
    let pose = tip.pose();
    if pose.position.norm() > 1.0 + 1e-12 {
        return Err(Error::Config("tip is out of reach of the unit rod".into()));
    }
    Ok(BoundaryConditions::new(pose))
}

/// Tip pose of an arc with curvature `bend` in a plane turned by `plane`
/// about the base axis, then twisted by `twist` about the tip tangent.
pub fn slider_pose_value(bend: f64, plane: f64, twist: f64) -> TipPose {
    let kappa = rotation_about(&Vec3::x(), plane) * Vec3::new(0.0, bend, 0.0);
    let arc = arc_tip(&kappa);
    TipPose::from_pose(&Pose::new(arc.rotation * rotation_about(&Vec3::x(), twist), arc.position))
}

pub fn solve_value(model: &str, pose_json: &str) -> Result<Value> {
    let bc = parse_pose(pose_json)?;
    Ok(shape_json(model, &solve_warm(model, &bc)?))
}

/// Exact reference plus each model with its position error along the rod.
pub fn compare_value(models: &str, pose_json: &str) -> Result<Value> {
    let bc = parse_pose(pose_json)?;
    let reference = solve_warm("exact", &bc)?;
    let mut out = vec![shape_json("exact", &reference)];
    for id in models.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        match solve_warm(id, &bc) {
            Ok(shape) => {
                let curve = pose_error_curve(&shape, &reference, 1.0)?;
                let summary = summarize(&curve, 1.0);
                let mut v = shape_json(id, &shape);
                v["e_r_max_pct"] = json!(summary.e_r_max_pct);
                v["e_r_int_pct"] = json!(summary.e_r_int_pct);
                v["error_curve"] = json!(curve.samples.iter().step_by(4).map(|s| [s.tau, s.e_r * 100.0]).collect::<Vec<_>>());
                out.push(v);
            }
            Err(e) => out.push(json!({ "model": id, "error": e.to_string() })),
        }
    }
    Ok(json!({ "shapes": out }))
}

pub fn scenario_value(name: &str) -> Result<Value> {
    let s = Scenario::by_name(name)?;
    Ok(json!(s.configs.iter().map(TipPose::from_pose).collect::<Vec<_>>()))
}

fn to_json(r: Result<Value>) -> String {
    match r {
        Ok(v) => v.to_string(),
        Err(e) => json!({ "error": e.to_string() }).to_string(),
    }
}

#[wasm_bindgen]
pub fn slider_pose(bend: f64, plane: f64, twist: f64) -> String {
    json!(slider_pose_value(bend, plane, twist)).to_string()
}

#[wasm_bindgen]
pub fn solve(model: &str, pose_json: &str) -> String {
    to_json(solve_value(model, pose_json))
}

#[wasm_bindgen]
pub fn compare(models: &str, pose_json: &str) -> String {
    to_json(compare_value(models, pose_json))
}

#[wasm_bindgen]
pub fn scenario_poses(name: &str) -> String {
    to_json(scenario_value(name))
}
