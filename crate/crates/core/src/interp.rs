//! Third-order strain-interpolated Kirchhoff model.
//!
//! The angular canonical coordinates follow a cubic Hermite curve
//! `x(τ) = h₁x₁ + h₂κ₀ + h₃·dexp⁻¹(−x₁)κ₁` between the clamped base and the
//! prescribed tip rotation. The endpoint curvatures are chosen as the
//! minimum-energy pair meeting the tip position, by Newton on the KKT system.

use std::f64::consts::PI;

use nalgebra::{convert, Matrix3, RealField, SMatrix, SVector, Vector3};
use num_dual::{hessian, Dual2SVec64};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exact::BoundaryConditions;
use crate::lie::{check_singular, dexp_so3, dexpinv_so3_unchecked, exp_so3, log_so3, Pose, Twist, Vec3};
use crate::quadrature::GaussRule;
use crate::rod::{uniform_grid, RodShape, ShapeSample};

/// Tip rotations closer than this to the `dexp` singularity at 2π are refused.
pub const BRANCH_GUARD: f64 = 0.05;

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct InterpParams {
    pub kappa0: Vec3,
    pub kappa1: Vec3,
    pub x1: Vec3,
}

impl InterpParams {
    /// `κ₀ = κ₁ = x₁`, exact for constant-curvature targets.
    pub fn coaxial(x1: Vec3) -> Self {
        Self { kappa0: x1, kappa1: x1, x1 }
    }

    pub fn is_finite(&self) -> bool {
        self.kappa0.iter().chain(self.kappa1.iter()).chain(self.x1.iter()).all(|v| v.is_finite())
    }
}

/// Unknowns and multipliers of the KKT system with the stacked stationarity
/// residual `(∂κ₀ℒ, ∂κ₁ℒ, g)`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct KktState {
    pub params: InterpParams,
    pub lambda: Vec3,
    pub residual: [f64; 9],
}

impl KktState {
    pub fn residual_norm(&self) -> f64 {
        self.residual.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Tip position constraint `g = r(1) − r_des`.
    pub fn constraint(&self) -> Vec3 {
        Vec3::new(self.residual[6], self.residual[7], self.residual[8])
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InterpOptions {
    pub order: usize,
    pub steps: usize,
    pub tol: f64,
    pub max_iter: usize,
    pub damping: f64,
}

impl Default for InterpOptions {
    fn default() -> Self {
        Self {
            order: 12,
            steps: 200,
            tol: 1e-7,
            max_iter: 200,
            damping: 1e-10,
        }
    }
}

fn hermite(tau: f64) -> ([f64; 3], [f64; 3]) {
    let t2 = tau * tau;
    let h = [3.0 * t2 - 2.0 * t2 * tau, tau * (tau - 1.0) * (tau - 1.0), t2 * tau - t2];
    let dh = [6.0 * tau - 6.0 * t2, 3.0 * t2 - 4.0 * tau + 1.0, 3.0 * t2 - 2.0 * tau];
    (h, dh)
}

/// `x(τ)` and `x'(τ)` given `m = dexp⁻¹(−x₁)`.
fn field<T: RealField + Copy>(
    tau: f64,
    k0: &Vector3<T>,
    k1: &Vector3<T>,
    x1: &Vector3<T>,
    m: &Matrix3<T>,
) -> (Vector3<T>, Vector3<T>) {
    let (h, dh) = hermite(tau);
    let mk1 = m * k1;
    let x = x1 * convert::<f64, T>(h[0]) + k0 * convert::<f64, T>(h[1]) + mk1 * convert::<f64, T>(h[2]);
    let dx = x1 * convert::<f64, T>(dh[0]) + k0 * convert::<f64, T>(dh[1]) + mk1 * convert::<f64, T>(dh[2]);
    (x, dx)
}

fn tip_matrix(params: &InterpParams) -> Result<Matrix3<f64>> {
    check_singular(&params.x1)?;
    Ok(dexpinv_so3_unchecked(&(-params.x1)))
}

pub fn interp_x(tau: f64, params: &InterpParams) -> Result<Vec3> {
    let m = tip_matrix(params)?;
    Ok(field(tau, &params.kappa0, &params.kappa1, &params.x1, &m).0)
}

/// Body curvature `κ(τ) = dexp(−x)·x'`.
pub fn interp_kappa(tau: f64, params: &InterpParams) -> Result<Vec3> {
    let m = tip_matrix(params)?;
    let (x, dx) = field(tau, &params.kappa0, &params.kappa1, &params.x1, &m);
    Ok(dexp_so3(&(-x)) * dx)
}

/// `r(τ) = ∫₀^τ exp(x(σ))·e₁ dσ` by `order`-point Gauss–Legendre.
pub fn interp_position(tau: f64, params: &InterpParams, order: usize) -> Result<Vec3> {
    let m = tip_matrix(params)?;
    Ok(position_with(&GaussRule::new(order), tau, params, &m))
}

fn position_with(rule: &GaussRule, tau: f64, p: &InterpParams, m: &Mat3f) -> Vec3 {
    rule.scaled(tau)
        .map(|(t, w)| {
            let (x, _) = field(t, &p.kappa0, &p.kappa1, &p.x1, m);
            exp_so3(&x).column(0) * w
        })
        .sum()
}

type Mat3f = Matrix3<f64>;

/// Bending–torsion energy `½∫(κ−κ̄)ᵀK(κ−κ̄)dτ` for diagonal `K` (per unit τ).
pub fn interp_energy(params: &InterpParams, k_bt: &Vec3, order: usize) -> Result<f64> {
    let m = tip_matrix(params)?;
    let rule = GaussRule::new(order);
    Ok(energy_generic(&rule, &params.kappa0, &params.kappa1, &params.x1, &m, &k_bt.map(|v| v), &Vec3::zeros()))
}

fn energy_generic<T: RealField + Copy>(
    rule: &GaussRule,
    k0: &Vector3<T>,
    k1: &Vector3<T>,
    x1: &Vector3<T>,
    m: &Matrix3<T>,
    k_bt: &Vector3<f64>,
    kappa_ref: &Vector3<f64>,
) -> T {
    let mut e = T::zero();
    for (t, w) in rule.scaled(1.0) {
        let (x, dx) = field(t, k0, k1, x1, m);
        let kappa = dexp_so3(&(-x)) * dx;
        let mut v = T::zero();
        for i in 0..3 {
            let d = kappa[i] - convert::<f64, T>(kappa_ref[i]);
            v += d * d * convert::<f64, T>(k_bt[i]);
        }
        e += v * convert::<f64, T>(0.5 * w);
    }
    e
}

/// Lagrangian `ℒ = V + λᵀ(r(1) − r_des)` over `z = (κ₀, κ₁, λ)`.
fn lagrangian<T: RealField + Copy>(z: &SVector<T, 9>, x1: &Vec3, k_bt: &Vec3, r_des: &Vec3, rule: &GaussRule) -> T {
    let k0 = Vector3::new(z[0], z[1], z[2]);
    let k1 = Vector3::new(z[3], z[4], z[5]);
    let lambda = Vector3::new(z[6], z[7], z[8]);
    let x1t: Vector3<T> = x1.map(convert);
    let m: Matrix3<T> = dexpinv_so3_unchecked(&(-x1)).map(convert);
    let energy = energy_generic(rule, &k0, &k1, &x1t, &m, k_bt, &Vec3::zeros());
    let mut tip = Vector3::<T>::zeros();
    for (t, w) in rule.scaled(1.0) {
        let (x, _) = field(t, &k0, &k1, &x1t, &m);
        tip += exp_so3(&x).column(0) * convert::<f64, T>(w);
    }
    energy + lambda.dot(&(tip - r_des.map(convert::<f64, T>)))
}

struct Kkt<'a> {
    x1: Vec3,
    k_bt: Vec3,
    r_des: Vec3,
    rule: &'a GaussRule,
}

impl Kkt<'_> {
    fn gradient_hessian(&self, z: &SVector<f64, 9>) -> (SVector<f64, 9>, SMatrix<f64, 9, 9>) {
        let (_, g, h) = hessian(
            |v: SVector<Dual2SVec64<9>, 9>| lagrangian(&v, &self.x1, &self.k_bt, &self.r_des, self.rule),
            z,
        );
        (g, h)
    }

    fn gradient(&self, z: &SVector<f64, 9>) -> SVector<f64, 9> {
        self.gradient_hessian(z).0
    }
}

/// Gradient of the Lagrangian with respect to `(κ₀, κ₁, λ)`.
pub fn kkt_gradient(state: &KktState, k_bt: &Vec3, r_des: &Vec3, order: usize) -> Result<[f64; 9]> {
    check_singular(&state.params.x1)?;
    let rule = GaussRule::new(order);
    let kkt = Kkt {
        x1: state.params.x1,
        k_bt: *k_bt,
        r_des: *r_des,
        rule: &rule,
    };
    Ok(kkt.gradient(&pack(state)).into())
}

/// Lagrangian value, for finite-difference checks of [`kkt_gradient`].
pub fn kkt_lagrangian(state: &KktState, k_bt: &Vec3, r_des: &Vec3, order: usize) -> Result<f64> {
    check_singular(&state.params.x1)?;
    Ok(lagrangian(&pack(state), &state.params.x1, k_bt, r_des, &GaussRule::new(order)))
}

fn pack(state: &KktState) -> SVector<f64, 9> {
    let p = &state.params;
    SVector::from_iterator(p.kappa0.iter().chain(p.kappa1.iter()).chain(state.lambda.iter()).copied())
}

/// Representative of `log R` closest to `near`, among `a(θ + 2πk)`.
pub fn select_branch(rotation: &Mat3f, near: Option<&Vec3>) -> Result<Vec3> {
    let principal = log_so3(rotation);
    let theta = principal.norm();
    let x1 = match near {
        Some(n) if theta > 1e-12 => {
            let axis = principal / theta;
            (-2..=2)
                .map(|k| axis * (theta + 2.0 * PI * k as f64))
                .min_by(|a, b| (a - n).norm().total_cmp(&(b - n).norm()))
                .unwrap()
        }
        _ => principal,
    };
    let norm = x1.norm();
    if norm >= 2.0 * PI - BRANCH_GUARD {
        return Err(Error::BranchGuard { norm });
    }
    Ok(x1)
}

/// Minimum-energy interpolated shape meeting `bc`. The model carries no
/// external loads. `k_bt` is the diagonal bending–torsion stiffness per unit τ
/// (any common scale). A guess that fails to converge is retried from the
/// coaxial cold start.
pub fn solve_interp(
    bc: &BoundaryConditions,
    k_bt: &Vec3,
    guess: Option<&KktState>,
    opts: &InterpOptions,
) -> Result<(RodShape, KktState)> {
    match solve_interp_from(bc, k_bt, guess, opts) {
        Err(Error::NoConvergence { .. } | Error::NearSingular { .. }) if guess.is_some() => {
            solve_interp_from(bc, k_bt, None, opts)
        }
        other => other,
    }
}

fn solve_interp_from(
    bc: &BoundaryConditions,
    k_bt: &Vec3,
    guess: Option<&KktState>,
    opts: &InterpOptions,
) -> Result<(RodShape, KktState)> {
    if !bc.tip.is_valid(1e-9) {
        return Err(Error::Config("tip pose is not a valid rigid transform".into()));
    }
    if opts.order < 3 {
        return Err(Error::Config(format!("quadrature order must be at least 3, got {}", opts.order)));
    }
    let x1 = select_branch(&bc.tip.rotation, guess.map(|g| &g.params.x1))?;
    check_singular(&x1)?;
    let rule = GaussRule::new(opts.order);
    let kkt = Kkt {
        x1,
        k_bt: *k_bt,
        r_des: bc.tip.position,
        rule: &rule,
    };

    let mut state = match guess {
        Some(g) if g.params.is_finite() => KktState {
            params: InterpParams { x1, ..g.params },
            lambda: g.lambda,
            residual: [0.0; 9],
        },
        _ => KktState {
            params: InterpParams::coaxial(x1),
            ..Default::default()
        },
    };
    let mut z = pack(&state);
    let (mut grad, mut hess) = kkt.gradient_hessian(&z);
    let mut mu = opts.damping;
    let mut iterations = 0;
    while grad.norm() > opts.tol {
        if iterations == opts.max_iter || mu > 1e12 {
            return Err(Error::NoConvergence {
                iterations,
                residual: grad.norm(),
            });
        }
        iterations += 1;
        loop {
            let mut a = hess;
            for i in 0..6 {
                a[(i, i)] += mu;
            }
            for i in 6..9 {
                a[(i, i)] -= mu;
            }
            let step = a.lu().solve(&(-grad)).filter(|s| s.iter().all(|v| v.is_finite()));
            if let Some(dz) = step {
                let trial = z + dz;
                let (g2, h2) = kkt.gradient_hessian(&trial);
                if g2.norm().is_finite() && g2.norm() < grad.norm() {
                    z = trial;
                    grad = g2;
                    hess = h2;
                    mu = (mu * 0.1).max(opts.damping);
                    break;
                }
            }
            mu *= 10.0;
            if mu > 1e12 {
                break;
            }
        }
    }

    state.params.kappa0 = Vec3::new(z[0], z[1], z[2]);
    state.params.kappa1 = Vec3::new(z[3], z[4], z[5]);
    state.lambda = Vec3::new(z[6], z[7], z[8]);
    state.residual = grad.into();

    let mut shape = sample_shape(&state.params, &rule, opts.steps)?;
    shape.diagnostics.iterations = iterations;
    shape.diagnostics.residual_norm = grad.norm();
    shape.diagnostics.converged = true;
    Ok((shape, state))
}

/// Sample the interpolated field on a uniform grid of `steps` intervals.
pub fn sample_shape(params: &InterpParams, rule: &GaussRule, steps: usize) -> Result<RodShape> {
    let m = tip_matrix(params)?;
    let samples = uniform_grid(steps)
        .into_iter()
        .map(|tau| {
            let (x, dx) = field(tau, &params.kappa0, &params.kappa1, &params.x1, &m);
            ShapeSample {
                tau,
                pose: Pose::new(exp_so3(&x), position_with(rule, tau, params, &m)),
                strain: Twist::new(dexp_so3(&(-x)) * dx, Vec3::x()),
            }
        })
        .collect();
    Ok(RodShape::new(samples))
}
