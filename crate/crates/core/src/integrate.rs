//! Fixed-step integrators for `H' = H·χ̂` coupled to vector-valued states.
//!
//! The pose is advanced with the fourth-order Runge–Kutta–Munthe-Kaas scheme
//! in local canonical coordinates, so orientation never drifts off SO(3) and
//! the local `dexp⁻¹` stays far from its singularities. The auxiliary state
//! is advanced with the matching classical RK4 weights.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::lie::{dexpinv_se3_unchecked, exp_se3, Pose, Twist};

/// Right-hand side: `(τ, H, a) ↦ (χ, a')`.
pub trait LieRhs {
    fn eval(&mut self, tau: f64, pose: &Pose, aux: &DVector<f64>) -> Result<(Twist, DVector<f64>)>;
}

impl<F> LieRhs for F
where
    F: FnMut(f64, &Pose, &DVector<f64>) -> Result<(Twist, DVector<f64>)>,
{
    fn eval(&mut self, tau: f64, pose: &Pose, aux: &DVector<f64>) -> Result<(Twist, DVector<f64>)> {
        self(tau, pose, aux)
    }
}

/// Local coordinate velocity `Θ' = dexp⁻¹(−Θ)·χ`.
fn local_rate(theta: &Twist, chi: &Twist) -> Twist {
    Twist::from_vector(&(dexpinv_se3_unchecked(&(-*theta)) * chi.to_vector()))
}

/// One RKMK4 step of size `h` (negative for backward sweeps). Returns the new
/// state and the deformation at the start of the step.
pub fn rkmk4_step<R: LieRhs>(
    rhs: &mut R,
    tau: f64,
    h: f64,
    pose: &Pose,
    aux: &DVector<f64>,
) -> Result<(Pose, DVector<f64>, Twist)> {
    let (chi1, a1) = rhs.eval(tau, pose, aux)?;
    let k1 = chi1;

    let t2 = k1.scale(0.5 * h);
    let (chi2, a2) = rhs.eval(tau + 0.5 * h, &(*pose * exp_se3(&t2)), &(aux + &a1 * (0.5 * h)))?;
    let k2 = local_rate(&t2, &chi2);

    let t3 = k2.scale(0.5 * h);
    let (chi3, a3) = rhs.eval(tau + 0.5 * h, &(*pose * exp_se3(&t3)), &(aux + &a2 * (0.5 * h)))?;
    let k3 = local_rate(&t3, &chi3);

    let t4 = k3.scale(h);
    let (chi4, a4) = rhs.eval(tau + h, &(*pose * exp_se3(&t4)), &(aux + &a3 * h))?;
    let k4 = local_rate(&t4, &chi4);

    let theta = (k1 + k2.scale(2.0) + k3.scale(2.0) + k4).scale(h / 6.0);
    let next_pose = *pose * exp_se3(&theta);
    let next_aux = aux + (a1 + a2 * 2.0 + a3 * 2.0 + a4) * (h / 6.0);

    if !theta.is_finite() || next_aux.iter().any(|v| !v.is_finite()) {
        return Err(Error::IntegrationDiverged { tau: tau + h });
    }
    Ok((next_pose, next_aux, chi1))
}

/// Integrate over the uniform grid from `τ = 0` to `1` (or from `1` to `0`
/// when `backward`). Returns the states at every node in increasing-τ order
/// together with the deformation evaluated at each node.
pub fn sweep<R: LieRhs>(
    rhs: &mut R,
    steps: usize,
    start_pose: Pose,
    start_aux: DVector<f64>,
    backward: bool,
) -> Result<Vec<(f64, Pose, DVector<f64>, Twist)>> {
    let h = if backward { -1.0 } else { 1.0 } / steps as f64;
    let mut out = Vec::with_capacity(steps + 1);
    let (mut pose, mut aux) = (start_pose, start_aux);
    for k in 0..steps {
        let tau = if backward {
            1.0 - k as f64 / steps as f64
        } else {
            k as f64 / steps as f64
        };
        let (p, a, chi) = rkmk4_step(rhs, tau, h, &pose, &aux)?;
        out.push((tau, pose, aux, chi));
        pose = p;
        aux = a;
    }
    let end = if backward { 0.0 } else { 1.0 };
    let (chi, _) = rhs.eval(end, &pose, &aux)?;
    out.push((end, pose, aux, chi));
    if backward {
        out.reverse();
    }
    Ok(out)
}
