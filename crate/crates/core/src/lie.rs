//! SO(3)/SE(3) kernel.
//!
//! Twists are stored angular-first, `(x, y)` for canonical coordinates and
//! `(κ, ρ)` for deformations. Wrenches (stresses, distributed loads) reuse
//! the same storage; pairing a wrench with a twist is the plain dot product.
//!
//! `dexp_so3(x)` is `Σ x̃ⁱ/(i+1)!`, the differential of the exponential map in
//! the left-trivialized form. The body-frame relation between canonical
//! coordinates and deformation reads `χ = dexp(−X)·X'`.
//!
//! The SO(3) functions are generic over [`RealField`] so the interpolated
//! model can push dual numbers through them for exact derivatives.

use std::f64::consts::PI;
use std::ops::Mul;

use nalgebra::{Matrix3, Matrix4, Matrix6, RealField, Vector3, Vector6};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Vec3 = Vector3<f64>;
pub type Mat3 = Matrix3<f64>;
pub type Mat6 = Matrix6<f64>;

/// Below this angle the closed forms are replaced by truncated Taylor series.
pub const SMALL_ANGLE: f64 = 0.05;

/// Half-width of the band around nonzero multiples of 2π where `dexp` is
/// treated as singular.
pub const SINGULAR_BAND: f64 = 1e-3;

#[inline]
fn c<T: RealField + Copy>(v: f64) -> T {
    nalgebra::convert(v)
}

/// Element of se(3) in vector form (also used for se(3)* wrenches).
#[derive(Clone, Copy, Debug, PartialEq, Default, Serialize, Deserialize)]
pub struct Twist {
    pub angular: Vec3,
    pub linear: Vec3,
}

impl Twist {
    pub const fn new(angular: Vec3, linear: Vec3) -> Self {
        Self { angular, linear }
    }

    pub fn zero() -> Self {
        Self::default()
    }

    pub fn from_vector(v: &Vector6<f64>) -> Self {
        Self {
            angular: v.fixed_rows::<3>(0).into_owned(),
            linear: v.fixed_rows::<3>(3).into_owned(),
        }
    }

    pub fn to_vector(&self) -> Vector6<f64> {
        let mut v = Vector6::zeros();
        v.fixed_rows_mut::<3>(0).copy_from(&self.angular);
        v.fixed_rows_mut::<3>(3).copy_from(&self.linear);
        v
    }

    pub fn from_slice(s: &[f64]) -> Self {
        Self::from_vector(&Vector6::from_column_slice(s))
    }

    pub fn is_finite(&self) -> bool {
        self.angular.iter().chain(self.linear.iter()).all(|v| v.is_finite())
    }

    pub fn scale(&self, a: f64) -> Self {
        Self::new(self.angular * a, self.linear * a)
    }

    pub fn dot(&self, other: &Twist) -> f64 {
        self.angular.dot(&other.angular) + self.linear.dot(&other.linear)
    }

    /// 4×4 matrix form.
    pub fn hat(&self) -> Matrix4<f64> {
        let mut m = Matrix4::zeros();
        m.fixed_view_mut::<3, 3>(0, 0).copy_from(&hat3(&self.angular));
        m.fixed_view_mut::<3, 1>(0, 3).copy_from(&self.linear);
        m
    }

    /// Inverse of [`Twist::hat`]; the bottom row is ignored.
    pub fn vee(m: &Matrix4<f64>) -> Self {
        let w = m.fixed_view::<3, 3>(0, 0).into_owned();
        Self::new(vee3(&w), m.fixed_view::<3, 1>(0, 3).into_owned())
    }
}

impl std::ops::Add for Twist {
    type Output = Twist;
    fn add(self, rhs: Twist) -> Twist {
        Twist::new(self.angular + rhs.angular, self.linear + rhs.linear)
    }
}

impl std::ops::Sub for Twist {
    type Output = Twist;
    fn sub(self, rhs: Twist) -> Twist {
        Twist::new(self.angular - rhs.angular, self.linear - rhs.linear)
    }
}

impl std::ops::Neg for Twist {
    type Output = Twist;
    fn neg(self) -> Twist {
        Twist::new(-self.angular, -self.linear)
    }
}

/// Rigid pose `(R, r)`, an element of SE(3).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub rotation: Mat3,
    pub position: Vec3,
}

impl Default for Pose {
    fn default() -> Self {
        Self::identity()
    }
}

impl Pose {
    pub fn new(rotation: Mat3, position: Vec3) -> Self {
        Self { rotation, position }
    }

    pub fn identity() -> Self {
        Self::new(Mat3::identity(), Vec3::zeros())
    }

    pub fn from_translation(position: Vec3) -> Self {
        Self::new(Mat3::identity(), position)
    }

    pub fn from_rotation(rotation: Mat3) -> Self {
        Self::new(rotation, Vec3::zeros())
    }

    pub fn inverse(&self) -> Self {
        let rt = self.rotation.transpose();
        Self::new(rt, -(rt * self.position))
    }

    pub fn transform_point(&self, p: &Vec3) -> Vec3 {
        self.rotation * p + self.position
    }

    pub fn to_matrix(&self) -> Matrix4<f64> {
        let mut m = Matrix4::identity();
        m.fixed_view_mut::<3, 3>(0, 0).copy_from(&self.rotation);
        m.fixed_view_mut::<3, 1>(0, 3).copy_from(&self.position);
        m
    }

    /// Largest deviation of `RᵀR` from identity and of `det R` from one.
    pub fn orthonormality_defect(&self) -> f64 {
        let r = &self.rotation;
        let orth = (r.transpose() * r - Mat3::identity()).abs().max();
        orth.max((r.determinant() - 1.0).abs())
    }

    pub fn is_valid(&self, tol: f64) -> bool {
        self.position.iter().all(|v| v.is_finite()) && self.orthonormality_defect() <= tol
    }

    /// Re-project the rotation onto SO(3) (polar factor via SVD).
    pub fn orthonormalized(&self) -> Self {
        let svd = self.rotation.svd(true, true);
        let (u, vt) = (svd.u.unwrap(), svd.v_t.unwrap());
        let mut r = u * vt;
        if r.determinant() < 0.0 {
            let mut u2 = u;
            u2.column_mut(2).neg_mut();
            r = u2 * vt;
        }
        Self::new(r, self.position)
    }
}

impl Mul for Pose {
    type Output = Pose;
    fn mul(self, rhs: Pose) -> Pose {
        Pose::new(
            self.rotation * rhs.rotation,
            self.rotation * rhs.position + self.position,
        )
    }
}

impl Mul<&Pose> for &Pose {
    type Output = Pose;
    fn mul(self, rhs: &Pose) -> Pose {
        *self * *rhs
    }
}

// ---------------------------------------------------------------------------
// SO(3)

/// Skew-symmetric matrix with `hat3(v)·w = v × w`.
pub fn hat3<T: RealField + Copy>(v: &Vector3<T>) -> Matrix3<T> {
    let z = T::zero();
    Matrix3::new(z, -v[2], v[1], v[2], z, -v[0], -v[1], v[0], z)
}

pub fn vee3<T: RealField + Copy>(m: &Matrix3<T>) -> Vector3<T> {
    Vector3::new(m[(2, 1)], m[(0, 2)], m[(1, 0)])
}

// Taylor coefficients in θ² (constant term first), five terms each.
const SIN_C: [f64; 5] = [1.0, -1.0 / 6.0, 1.0 / 120.0, -1.0 / 5040.0, 1.0 / 362880.0];
const COS_C: [f64; 5] = [0.5, -1.0 / 24.0, 1.0 / 720.0, -1.0 / 40320.0, 1.0 / 3628800.0];
const SINC3_C: [f64; 5] = [
    1.0 / 6.0,
    -1.0 / 120.0,
    1.0 / 5040.0,
    -1.0 / 362880.0,
    1.0 / 39916800.0,
];
const DEXPINV_C: [f64; 5] = [
    1.0 / 12.0,
    1.0 / 720.0,
    1.0 / 30240.0,
    1.0 / 1209600.0,
    1.0 / 47900160.0,
];
const Q2_C: [f64; 5] = [
    1.0 / 24.0,
    -1.0 / 720.0,
    1.0 / 40320.0,
    -1.0 / 3628800.0,
    1.0 / 479001600.0,
];
const Q3_C: [f64; 5] = [
    1.0 / 120.0,
    -1.0 / 2520.0,
    1.0 / 120960.0,
    -4.0 / 39916800.0,
    5.0 / 6227020800.0,
];

fn taylor<T: RealField + Copy>(coeffs: &[f64; 5], t2: T) -> T {
    coeffs
        .iter()
        .rev()
        .fold(T::zero(), |acc, &k| acc * t2 + c::<T>(k))
}

fn is_small<T: RealField + Copy>(t2: T) -> bool {
    t2 < c(SMALL_ANGLE * SMALL_ANGLE)
}

/// `(sin θ/θ, (1−cos θ)/θ², (θ−sin θ)/θ³)`.
fn exp_coefficients<T: RealField + Copy>(x: &Vector3<T>) -> (T, T, T) {
    let t2 = x.dot(x);
    if is_small(t2) {
        (taylor(&SIN_C, t2), taylor(&COS_C, t2), taylor(&SINC3_C, t2))
    } else {
        let t = t2.sqrt();
        let (s, co) = (t.sin(), t.cos());
        (s / t, (T::one() - co) / t2, (t - s) / (t2 * t))
    }
}

/// Rotation matrix `Σ x̃ⁱ/i!`.
pub fn exp_so3<T: RealField + Copy>(x: &Vector3<T>) -> Matrix3<T> {
    let (a, b, _) = exp_coefficients(x);
    let w = hat3(x);
    Matrix3::identity() + w * a + w * w * b
}

/// `Σ x̃ⁱ/(i+1)!`.
pub fn dexp_so3<T: RealField + Copy>(x: &Vector3<T>) -> Matrix3<T> {
    let (_, b, cc) = exp_coefficients(x);
    let w = hat3(x);
    Matrix3::identity() + w * b + w * w * cc
}

/// Distance of `‖x‖` to the closest nonzero multiple of 2π.
pub fn singular_distance(norm: f64) -> f64 {
    let k = (norm / (2.0 * PI)).round().max(1.0);
    (norm - 2.0 * PI * k).abs()
}

/// Inverse of [`dexp_so3`] without the singularity check.
pub fn dexpinv_so3_unchecked<T: RealField + Copy>(x: &Vector3<T>) -> Matrix3<T> {
    let t2 = x.dot(x);
    let e = if is_small(t2) {
        taylor(&DEXPINV_C, t2)
    } else {
        let t = t2.sqrt();
        let half = t * c(0.5);
        (T::one() - half * half.cos() / half.sin()) / t2
    };
    let w = hat3(x);
    Matrix3::identity() - w * c::<T>(0.5) + w * w * e
}

pub fn dexpinv_so3(x: &Vec3) -> Result<Mat3> {
    check_singular(x)?;
    Ok(dexpinv_so3_unchecked(x))
}

pub fn check_singular(x: &Vec3) -> Result<()> {
    let n = x.norm();
    if n > PI && singular_distance(n) < SINGULAR_BAND {
        return Err(Error::NearSingular { norm: n });
    }
    Ok(())
}

/// Principal logarithm of a rotation matrix, `‖x‖ ∈ [0, π]`.
pub fn log_so3(r: &Mat3) -> Vec3 {
    let cos_t = (r.trace() - 1.0) * 0.5;
    let skew = vee3(&(r - r.transpose())) * 0.5; // sin θ · axis
    let t = skew.norm().atan2(cos_t);
    if t < SMALL_ANGLE {
        // θ/sin θ by series in θ².
        let t2 = t * t;
        return skew * (1.0 + t2 / 6.0 + 7.0 * t2 * t2 / 360.0 + 31.0 * t2 * t2 * t2 / 15120.0);
    }
    if PI - t > 1e-2 {
        return skew * (t / t.sin());
    }
    // Near π: recover the axis from the symmetric part, sym(R) − cos θ·I = (1 − cos θ)aaᵀ.
    let b = ((r + r.transpose()) * 0.5 - Mat3::identity() * cos_t) / (1.0 - cos_t);
    let col = (0..3)
        .max_by(|&i, &j| b[(i, i)].total_cmp(&b[(j, j)]))
        .unwrap();
    let mut axis = b.column(col).into_owned();
    axis.normalize_mut();
    if axis.dot(&skew) < 0.0 {
        axis = -axis;
    }
    axis * t
}

// ---------------------------------------------------------------------------
// SE(3)

pub fn exp_se3(x: &Twist) -> Pose {
    Pose::new(exp_so3(&x.angular), dexp_so3(&x.angular) * x.linear)
}

/// Logarithm with principal rotation part.
pub fn log_se3(h: &Pose) -> Twist {
    let x = log_so3(&h.rotation);
    Twist::new(x, dexpinv_so3_unchecked(&x) * h.position)
}

/// Lower-left block of the SE(3) `dexp`, linear in `y`.
fn dexp_coupling(x: &Vec3, y: &Vec3) -> Mat3 {
    let t2 = x.norm_squared();
    let (c1, c2, c3) = if is_small(t2) {
        (
            taylor(&SINC3_C, t2),
            taylor(&Q2_C, t2),
            taylor(&Q3_C, t2),
        )
    } else {
        let t = t2.sqrt();
        let (s, co) = (t.sin(), t.cos());
        (
            (t - s) / (t2 * t),
            (t2 + 2.0 * co - 2.0) / (2.0 * t2 * t2),
            (2.0 * t - 3.0 * s + t * co) / (2.0 * t2 * t2 * t),
        )
    };
    let xh = hat3(x);
    let yh = hat3(y);
    let xx = xh * xh;
    let xyx = xh * yh * xh;
    yh * 0.5
        + (xh * yh + yh * xh + xyx) * c1
        + (xx * yh + yh * xx - xyx * 3.0) * c2
        + (xyx * xh + xh * xyx) * c3
}

fn block6(a: &Mat3, b: &Mat3, cc: &Mat3, d: &Mat3) -> Mat6 {
    let mut m = Mat6::zeros();
    m.fixed_view_mut::<3, 3>(0, 0).copy_from(a);
    m.fixed_view_mut::<3, 3>(0, 3).copy_from(b);
    m.fixed_view_mut::<3, 3>(3, 0).copy_from(cc);
    m.fixed_view_mut::<3, 3>(3, 3).copy_from(d);
    m
}

/// `Σ adⁱ_X/(i+1)!`, block lower-triangular.
pub fn dexp_se3(x: &Twist) -> Mat6 {
    let a = dexp_so3(&x.angular);
    let q = dexp_coupling(&x.angular, &x.linear);
    block6(&a, &Mat3::zeros(), &q, &a)
}

pub fn dexpinv_se3_unchecked(x: &Twist) -> Mat6 {
    let ai = dexpinv_so3_unchecked(&x.angular);
    let q = dexp_coupling(&x.angular, &x.linear);
    block6(&ai, &Mat3::zeros(), &(-(ai * q * ai)), &ai)
}

pub fn dexpinv_se3(x: &Twist) -> Result<Mat6> {
    check_singular(&x.angular)?;
    Ok(dexpinv_se3_unchecked(x))
}

/// Matrix of the Lie bracket, `ad_X·Y = [X, Y]`.
pub fn ad(x: &Twist) -> Mat6 {
    let xh = hat3(&x.angular);
    block6(&xh, &Mat3::zeros(), &hat3(&x.linear), &xh)
}

#[allow(non_snake_case)]
pub fn Ad(h: &Pose) -> Mat6 {
    let r = &h.rotation;
    block6(r, &Mat3::zeros(), &(hat3(&h.position) * r), r)
}

/// `Ad_H⁻¹` without forming the inverse pose.
pub fn ad_inverse(h: &Pose) -> Mat6 {
    let rt = h.rotation.transpose();
    block6(&rt, &Mat3::zeros(), &(-(rt * hat3(&h.position))), &rt)
}

/// `ad_χᵀ Λ`, the coadjoint action appearing in the equilibrium equations.
pub fn ad_transpose_apply(chi: &Twist, w: &Twist) -> Twist {
    // ad_χᵀ = [[−κ̃, −ρ̃], [0, −κ̃]]
    Twist::new(
        -chi.angular.cross(&w.angular) - chi.linear.cross(&w.linear),
        -chi.angular.cross(&w.linear),
    )
}

/// Geodesic interpolation `a·exp(s·log(a⁻¹b))`, `s ∈ [0, 1]`.
pub fn interpolate_pose(a: &Pose, b: &Pose, s: f64) -> Pose {
    let rel = log_se3(&(a.inverse() * *b));
    *a * exp_se3(&rel.scale(s))
}

/// Rotation about a unit axis.
pub fn rotation_about(axis: &Vec3, angle: f64) -> Mat3 {
    exp_so3(&(axis.normalize() * angle))
}
