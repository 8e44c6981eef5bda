//! Pose-error curves against a reference shape, their integral and maximum
//! summaries, discrete marker errors and solve timing.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lie::{Mat3, Vec3};
use crate::rod::RodShape;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorSample {
    pub tau: f64,
    /// Position error in meters.
    pub e_r: f64,
    /// `½ tr(I − R_eᵀR_m)`, in `[0, 2]`.
    pub e_x: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ErrorCurve {
    pub model: String,
    pub reference: String,
    pub samples: Vec<ErrorSample>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ErrorSummary {
    pub e_r_int: f64,
    pub e_x_int: f64,
    pub e_r_max: f64,
    pub e_x_max: f64,
    pub e_r_int_pct: f64,
    pub e_r_max_pct: f64,
}

pub fn orientation_error(reference: &Mat3, model: &Mat3) -> f64 {
    (0.5 * (3.0 - (reference.transpose() * model).trace())).clamp(0.0, 2.0)
}

/// Error curve on the model grid; the reference is resampled geodesically.
/// Shapes are on the unit rod, `length` converts positions to meters.
pub fn pose_error_curve(model: &RodShape, reference: &RodShape, length: f64) -> Result<ErrorCurve> {
    if model.len() < 2 || reference.len() < 2 {
        return Err(Error::GridMismatch("error curves need at least two samples per shape".into()));
    }
    let samples = model
        .samples
        .iter()
        .map(|s| {
            let re = reference.pose_at(s.tau);
            ErrorSample {
                tau: s.tau,
                e_r: (s.pose.position - re.position).norm() * length,
                e_x: orientation_error(&re.rotation, &s.pose.rotation),
            }
        })
        .collect();
    Ok(ErrorCurve {
        model: String::new(),
        reference: String::new(),
        samples,
    })
}

fn trapezoid(taus: &[f64], values: &[f64]) -> f64 {
    taus.windows(2)
        .zip(values.windows(2))
        .map(|(t, v)| 0.5 * (t[1] - t[0]) * (v[0] + v[1]))
        .sum()
}

/// Trapezoid integrals and nodal maxima; percent fields are relative to `length`.
pub fn summarize(curve: &ErrorCurve, length: f64) -> ErrorSummary {
    let taus: Vec<f64> = curve.samples.iter().map(|s| s.tau).collect();
    let er: Vec<f64> = curve.samples.iter().map(|s| s.e_r).collect();
    let ex: Vec<f64> = curve.samples.iter().map(|s| s.e_x).collect();
    let max = |v: &[f64]| v.iter().copied().fold(0.0, f64::max);
    let (e_r_int, e_r_max) = if er.len() == 1 { (er[0], er[0]) } else { (trapezoid(&taus, &er), max(&er)) };
    let e_x_int = if ex.len() == 1 { ex[0] } else { trapezoid(&taus, &ex) };
    ErrorSummary {
        e_r_int,
        e_x_int,
        e_r_max,
        e_x_max: max(&ex),
        e_r_int_pct: 100.0 * e_r_int / length,
        e_r_max_pct: 100.0 * e_r_max / length,
    }
}

/// Measured marker positions (meters, base frame) at nominal arc positions.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MarkerSet {
    pub taus: Vec<f64>,
    pub points: Vec<Vec3>,
}

impl MarkerSet {
    pub fn new(taus: Vec<f64>, points: Vec<Vec3>) -> Result<Self> {
        if taus.len() != points.len() {
            return Err(Error::DimensionMismatch {
                expected: taus.len(),
                found: points.len(),
            });
        }
        if taus.len() < 2 {
            return Err(Error::GridMismatch("at least two markers required".into()));
        }
        if taus.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::GridMismatch("marker arc positions must be strictly increasing".into()));
        }
        Ok(Self { taus, points })
    }

    /// Markers read off a shape, for synthetic recordings.
    pub fn sample(shape: &RodShape, taus: &[f64], length: f64) -> Result<Self> {
        let points = taus.iter().map(|&t| shape.pose_at(t).position * length).collect();
        Self::new(taus.to_vec(), points)
    }

    pub fn len(&self) -> usize {
        self.taus.len()
    }

    pub fn is_empty(&self) -> bool {
        self.taus.is_empty()
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MarkerErrors {
    /// `‖r_m(τᵢ) − p_e(i)‖` in meters.
    pub per_marker: Vec<f64>,
    pub sum: f64,
    pub mean: f64,
}

pub fn marker_error(model: &RodShape, markers: &MarkerSet, length: f64) -> Result<MarkerErrors> {
    if let Some(t) = markers.taus.iter().find(|t| !(0.0..=1.0).contains(*t)) {
        return Err(Error::GridMismatch(format!("marker arc position {t} outside [0, 1]")));
    }
    let per_marker: Vec<f64> = markers
        .taus
        .iter()
        .zip(&markers.points)
        .map(|(&t, p)| (model.pose_at(t).position * length - p).norm())
        .collect();
    let sum: f64 = per_marker.iter().sum();
    let mean = if per_marker.is_empty() { 0.0 } else { sum / per_marker.len() as f64 };
    Ok(MarkerErrors { per_marker, sum, mean })
}

#[derive(Debug)]
pub struct Timed<T> {
    pub result: Result<T>,
    pub wall_time: f64,
    pub iterations: Option<usize>,
}

/// Wall time of a whole solve on a monotonic clock; iterations come from the
/// returned shape's diagnostics.
pub fn timed_solve<T>(solve: impl FnOnce() -> Result<(RodShape, T)>) -> Timed<(RodShape, T)> {
    let start = Instant::now();
    let result = solve();
    let wall_time = start.elapsed().as_secs_f64();
    let iterations = result.as_ref().ok().map(|(s, _)| s.diagnostics.iterations);
    let result = result.map(|(mut s, t)| {
        s.diagnostics.wall_time = wall_time;
        (s, t)
    });
    Timed {
        result,
        wall_time,
        iterations,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::{solve_exact_bvp, BoundaryConditions, ExactOptions, StaticRod};
    use crate::lie::{exp_se3, exp_so3, rotation_about, Pose, Twist};
    use crate::rod::{RodProperties, ShapeSample};
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn arc(kappa: f64, steps: usize) -> RodShape {
        let chi = Twist::new(Vec3::new(0.0, kappa, 0.0), Vec3::x());
        RodShape::new(
            (0..=steps)
                .map(|k| {
                    let tau = k as f64 / steps as f64;
                    ShapeSample {
                        tau,
                        pose: exp_se3(&chi.scale(tau)),
                        strain: chi,
                    }
                })
                .collect(),
        )
    }

    fn curve(values: &[f64]) -> ErrorCurve {
        let n = values.len() - 1;
        ErrorCurve {
            samples: values
                .iter()
                .enumerate()
                .map(|(i, &e)| ErrorSample {
                    tau: i as f64 / n as f64,
                    e_r: e,
                    e_x: 0.0,
                })
                .collect(),
            ..Default::default()
        }
    }

    #[test]
    fn identical_shapes_have_zero_error() {
        let s = arc(2.0, 50);
        let c = pose_error_curve(&s, &s, 0.9).unwrap();
        assert!(c.samples.iter().all(|e| e.e_r == 0.0 && e.e_x < 1e-15));
        assert_eq!(summarize(&c, 0.9).e_r_max, 0.0);
    }

    #[test]
    fn half_turn_gives_two() {
        let s = arc(0.0, 10);
        let mut m = s.clone();
        for x in &mut m.samples {
            x.pose.rotation = x.pose.rotation * rotation_about(&Vec3::new(1.0, 2.0, 0.5).normalize(), PI);
        }
        let c = pose_error_curve(&m, &s, 1.0).unwrap();
        assert!(c.samples.iter().all(|e| (e.e_x - 2.0).abs() < 1e-12));
    }

    #[test]
    fn translation_adds_offset() {
        let s = arc(1.5, 40);
        let mut m = s.clone();
        for x in &mut m.samples {
            x.pose.position += Vec3::z() * 0.01;
        }
        let c = pose_error_curve(&m, &s, 2.0).unwrap();
        assert!(c.samples.iter().all(|e| (e.e_r - 0.02).abs() < 1e-15));
        let one = RodShape::new(vec![s.samples[0]]);
        assert!(pose_error_curve(&one, &s, 1.0).is_err());
    }

    #[test]
    fn reference_is_resampled_geodesically() {
        // Coarse reference, fine model: geodesic interpolation of an arc is exact.
        let c = pose_error_curve(&arc(PI, 200), &arc(PI, 20), 1.0).unwrap();
        assert!(c.samples.iter().all(|e| e.e_r < 1e-12));
    }

    #[test]
    fn summaries() {
        let z = summarize(&curve(&[0.0; 11]), 1.0);
        assert_eq!(z, ErrorSummary::default());
        let c = summarize(&curve(&[0.3; 11]), 1.0);
        assert_relative_eq!(c.e_r_int, 0.3, epsilon = 1e-15);
        let tri = summarize(&curve(&[0.0, 0.5, 1.0, 0.5, 0.0]), 0.5);
        assert_relative_eq!(tri.e_r_int, 0.5, epsilon = 1e-15);
        assert_relative_eq!(tri.e_r_max_pct, 200.0);
    }

    #[test]
    fn marker_errors() {
        let props = RodProperties::nitinol();
        let taus = props.marker_taus().unwrap();
        assert_relative_eq!(taus[2], 3.0 * 0.119 / 0.955, epsilon = 1e-15);
        let s = arc(1.0, 100);
        let mut m = MarkerSet::sample(&s, &taus, props.length).unwrap();
        let e = marker_error(&s, &m, props.length).unwrap();
        assert_eq!(e.sum, 0.0);
        m.points[3] += Vec3::new(0.0, 0.003, 0.0);
        let e = marker_error(&s, &m, props.length).unwrap();
        assert_relative_eq!(e.sum, 0.003, epsilon = 1e-12);
        assert_relative_eq!(e.mean * m.len() as f64, e.sum, epsilon = 1e-15);
        m.taus[6] = 1.2;
        assert!(marker_error(&s, &m, 1.0).is_err());
        assert!(MarkerSet::new(vec![0.5, 0.2], vec![Vec3::zeros(); 2]).is_err());
    }

    #[test]
    fn timing_and_determinism() {
        let rod = StaticRod::unloaded(&RodProperties::fibreglass_sim()).unwrap();
        let t = timed_solve(|| solve_exact_bvp(&rod, &BoundaryConditions::straight(), None, &ExactOptions::default()));
        assert!(t.iterations.unwrap() <= 2);
        assert!(t.wall_time >= 0.0);
        let bc = BoundaryConditions::new(Pose::new(rotation_about(&Vec3::y(), 1.0), Vec3::new(0.9, 0.0, -0.4)));
        let a = timed_solve(|| solve_exact_bvp(&rod, &bc, None, &ExactOptions::default()));
        let b = timed_solve(|| solve_exact_bvp(&rod, &bc, None, &ExactOptions::default()));
        assert_eq!(a.iterations, b.iterations);
    }

    fn rotation() -> impl Strategy<Value = Mat3> {
        (-3.0..3.0f64, -3.0..3.0f64, -3.0..3.0f64).prop_map(|(a, b, c)| exp_so3(&Vec3::new(a, b, c)))
    }

    proptest! {
        #[test]
        fn orientation_error_is_symmetric_and_bounded(r in rotation(), s in rotation()) {
            let a = orientation_error(&r, &s);
            prop_assert!((a - orientation_error(&s, &r)).abs() < 1e-12);
            prop_assert!((0.0..=2.0).contains(&a));
            prop_assert!(orientation_error(&r, &r) < 1e-10);
        }

        #[test]
        fn summary_is_linear(vals in proptest::collection::vec(0.0..1.0f64, 2..40), a in 0.0..10.0f64) {
            let c = curve(&vals);
            let scaled = curve(&vals.iter().map(|v| v * a).collect::<Vec<_>>());
            let (s1, s2) = (summarize(&c, 1.0), summarize(&scaled, 1.0));
            prop_assert!((s2.e_r_int - a * s1.e_r_int).abs() < 1e-12);
            prop_assert!((s2.e_r_max - a * s1.e_r_max).abs() < 1e-12);
            prop_assert!(s1.e_r_max >= s1.e_r_int - 1e-15);
        }
    }
}
