//! Geometric Variable Strain model: the strain field is a polynomial Ritz
//! expansion `χ = χ̄ + BΦ(τ)q`, and `(q, Λ₁)` solve the tip-pose and
//! generalized-equilibrium conditions.

use nalgebra::{DMatrix, DVector, Matrix6, Vector6};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exact::{pose_continuation, BoundaryConditions, StaticRod};
use crate::integrate::sweep;
use crate::interp::select_branch;
use crate::lie::{ad_inverse, ad_transpose_apply, log_se3, Ad, Pose, Twist};
use crate::newton::{self, NewtonOptions};
use crate::quadrature::GaussRule;
use crate::rod::{body_load, DeformationModel, RodShape, ShapeSample};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BasisKind {
    Monomial,
    /// Legendre polynomials shifted to `[0, 1]`.
    Legendre,
}

/// Polynomial basis with `counts[j]` functions (degrees `0..counts[j]`) on the
/// j-th enabled mode.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShapeBasis {
    pub kind: BasisKind,
    pub counts: Vec<usize>,
}

impl ShapeBasis {
    pub fn new(kind: BasisKind, counts: Vec<usize>) -> Self {
        Self { kind, counts }
    }

    /// Degree `n` on each of `modes` modes, i.e. `n + 1` functions per mode.
    pub fn uniform(kind: BasisKind, degree: usize, modes: usize) -> Self {
        Self::new(kind, vec![degree + 1; modes])
    }

    pub fn dim(&self) -> usize {
        self.counts.iter().sum()
    }

    pub fn max_count(&self) -> usize {
        self.counts.iter().copied().max().unwrap_or(0)
    }

    /// Values of the first `n` basis polynomials at τ.
    pub fn values(&self, tau: f64, n: usize) -> Vec<f64> {
        let mut v = Vec::with_capacity(n);
        match self.kind {
            BasisKind::Monomial => {
                let mut p = 1.0;
                for _ in 0..n {
                    v.push(p);
                    p *= tau;
                }
            }
            BasisKind::Legendre => {
                let x = 2.0 * tau - 1.0;
                let (mut p0, mut p1) = (1.0, x);
                for k in 0..n {
                    if k == 0 {
                        v.push(p0);
                    } else {
                        v.push(p1);
                        let kf = k as f64;
                        let p2 = ((2.0 * kf + 1.0) * x * p1 - kf * p0) / (kf + 1.0);
                        p0 = p1;
                        p1 = p2;
                    }
                }
            }
        }
        v
    }

    /// Block-diagonal `Φ(τ)`, one row per enabled mode.
    pub fn phi(&self, tau: f64) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.counts.len(), self.dim());
        let vals = self.values(tau, self.max_count());
        let mut col = 0;
        for (row, &n) in self.counts.iter().enumerate() {
            for k in 0..n {
                m[(row, col + k)] = vals[k];
            }
            col += n;
        }
        m
    }
}

/// Enabled strain components; `B` is the 6×d selection matrix.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModeSelector {
    pub modes: Vec<usize>,
}

impl ModeSelector {
    pub fn new(modes: Vec<usize>) -> Result<Self> {
        let mut seen = [false; 6];
        for &m in &modes {
            if m >= 6 || seen[m] {
                return Err(Error::Config(format!("invalid or repeated strain mode {m}")));
            }
            seen[m] = true;
        }
        Ok(Self { modes })
    }

    pub fn for_model(model: DeformationModel) -> Self {
        Self {
            modes: model.enabled_modes(),
        }
    }

    pub fn b(&self) -> DMatrix<f64> {
        let mut b = DMatrix::zeros(6, self.modes.len());
        for (j, &m) in self.modes.iter().enumerate() {
            b[(m, j)] = 1.0;
        }
        b
    }
}

/// Generalized coordinates and the tip wrench applied on the rod (scaled units).
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct GvsState {
    pub q: Vec<f64>,
    pub tip_wrench: Twist,
}

/// Basis, modes and the rod they discretize.
#[derive(Clone, Debug, PartialEq)]
pub struct GvsModel {
    pub rod: StaticRod,
    pub basis: ShapeBasis,
    pub modes: ModeSelector,
}

impl GvsModel {
    pub fn new(rod: StaticRod, basis: ShapeBasis) -> Result<Self> {
        let modes = ModeSelector::for_model(rod.model);
        if basis.counts.len() != modes.modes.len() {
            return Err(Error::DimensionMismatch {
                expected: modes.modes.len(),
                found: basis.counts.len(),
            });
        }
        Ok(Self { rod, basis, modes })
    }

    pub fn dim(&self) -> usize {
        self.basis.dim()
    }

    fn check_q(&self, q: &[f64]) -> Result<()> {
        if q.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: q.len(),
            });
        }
        Ok(())
    }
}

/// `χ(τ) = χ̄ + BΦ(τ)q`.
pub fn gvs_strain(tau: f64, basis: &ShapeBasis, modes: &ModeSelector, reference: &Twist, q: &[f64]) -> Result<Twist> {
    if q.len() != basis.dim() || basis.counts.len() != modes.modes.len() {
        return Err(Error::DimensionMismatch {
            expected: basis.dim(),
            found: q.len(),
        });
    }
    let vals = basis.values(tau, basis.max_count());
    let mut chi = reference.to_vector();
    let mut col = 0;
    for (&mode, &n) in modes.modes.iter().zip(&basis.counts) {
        chi[mode] += (0..n).map(|k| vals[k] * q[col + k]).sum::<f64>();
        col += n;
    }
    Ok(Twist::from_vector(&chi))
}

pub fn gvs_forward(model: &GvsModel, q: &[f64], steps: usize) -> Result<RodShape> {
    model.check_q(q)?;
    let reference = model.rod.reference.at(0.0);
    let mut rhs = |tau: f64, _: &Pose, _: &DVector<f64>| {
        Ok((gvs_strain(tau, &model.basis, &model.modes, &reference, q)?, DVector::zeros(0)))
    };
    let nodes = sweep(&mut rhs, steps, Pose::identity(), DVector::zeros(0), false)?;
    Ok(RodShape::new(
        nodes
            .into_iter()
            .map(|(tau, pose, _, strain)| ShapeSample { tau, pose, strain })
            .collect(),
    ))
}

/// Backward sweep of `Λ' = ad_χᵀΛ + W` from `Λ(1) = tip_wrench` together with
/// `Q' = ΦᵀBᵀΛ`, `Q(1) = 0`. Returns `Q(0) = −∫ΦᵀBᵀΛ dτ` and the stress at
/// every node.
pub fn gvs_backward(
    model: &GvsModel,
    tip: &Pose,
    q: &[f64],
    tip_wrench: &Twist,
    steps: usize,
) -> Result<(DVector<f64>, Vec<(f64, Twist)>)> {
    model.check_q(q)?;
    let n = model.dim();
    let reference = model.rod.reference.at(0.0);
    let load = model.rod.load;
    let mut rhs = |tau: f64, pose: &Pose, aux: &DVector<f64>| {
        let chi = gvs_strain(tau, &model.basis, &model.modes, &reference, q)?;
        let stress = Twist::from_slice(&aux.as_slice()[..6]);
        let rate = ad_transpose_apply(&chi, &stress) + body_load(&pose.rotation, &load);
        let mut out = DVector::zeros(6 + n);
        out.as_mut_slice()[..6].copy_from_slice(rate.to_vector().as_slice());
        let vals = model.basis.values(tau, model.basis.max_count());
        let s = stress.to_vector();
        let mut col = 0;
        for (&mode, &cnt) in model.modes.modes.iter().zip(&model.basis.counts) {
            for k in 0..cnt {
                out[6 + col + k] = vals[k] * s[mode];
            }
            col += cnt;
        }
        Ok((chi, out))
    };
    let mut start = DVector::zeros(6 + n);
    start.as_mut_slice()[..6].copy_from_slice(tip_wrench.to_vector().as_slice());
    let nodes = sweep(&mut rhs, steps, *tip, start, true)?;
    let q0 = nodes[0].2.rows(6, n).into_owned();
    let stress = nodes.iter().map(|(t, _, a, _)| (*t, Twist::from_slice(&a.as_slice()[..6]))).collect();
    Ok((q0, stress))
}

/// `K_εε = ∫ΦᵀBᵀKBΦ dτ` by Gauss–Legendre quadrature exact for the integrand.
pub fn gvs_stiffness(model: &GvsModel) -> DMatrix<f64> {
    let n = model.dim();
    let rule = GaussRule::new(model.basis.max_count().max(1));
    let mut k = DMatrix::zeros(n, n);
    for (t, w) in rule.scaled(1.0) {
        let vals = model.basis.values(t, model.basis.max_count());
        let mut col = 0;
        for (&mode, &cnt) in model.modes.modes.iter().zip(&model.basis.counts) {
            let ki = model.rod.stiffness[mode];
            for a in 0..cnt {
                for b in 0..cnt {
                    k[(col + a, col + b)] += w * ki * vals[a] * vals[b];
                }
            }
            col += cnt;
        }
    }
    k
}

/// Body-frame tip Jacobian `J(1) = Ad⁻¹_{H(1)} ∫ Ad_{H(τ)} BΦ dτ` by composite
/// Simpson over the shape nodes (an even number of intervals is required).
pub fn gvs_jacobian(model: &GvsModel, shape: &RodShape) -> Result<DMatrix<f64>> {
    let n = model.dim();
    let intervals = shape.len().saturating_sub(1);
    if intervals < 2 || intervals % 2 != 0 {
        return Err(Error::GridMismatch(format!("Simpson needs an even number of intervals, got {intervals}")));
    }
    let h = 1.0 / intervals as f64;
    let mut acc = DMatrix::zeros(6, n);
    for (i, s) in shape.samples.iter().enumerate() {
        let weight = if i == 0 || i == intervals {
            1.0
        } else if i % 2 == 1 {
            4.0
        } else {
            2.0
        } * h
            / 3.0;
        let ad: Matrix6<f64> = Ad(&s.pose);
        let vals = model.basis.values(s.tau, model.basis.max_count());
        let mut col = 0;
        for (&mode, &cnt) in model.modes.modes.iter().zip(&model.basis.counts) {
            let column: Vector6<f64> = ad.column(mode).into_owned();
            for k in 0..cnt {
                let mut c = acc.column_mut(col + k);
                c += DVector::from_column_slice(column.as_slice()) * (weight * vals[k]);
            }
            col += cnt;
        }
    }
    let inv = ad_inverse(shape.tip());
    Ok(DMatrix::from_column_slice(6, 6, inv.as_slice()) * acc)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GvsOptions {
    pub steps: usize,
    pub newton: NewtonOptions,
}

impl Default for GvsOptions {
    fn default() -> Self {
        Self {
            steps: 200,
            newton: NewtonOptions {
                max_iter: 200,
                ..Default::default()
            },
        }
    }
}

/// Constant-strain guess: the tip rotation's log on the constant basis
/// functions and the matching elastic moment as tip wrench.
pub fn default_guess(model: &GvsModel, bc: &BoundaryConditions) -> Result<GvsState> {
    let x1 = select_branch(&bc.tip.rotation, None)?;
    let mut q = vec![0.0; model.dim()];
    let mut wrench = Vector6::zeros();
    let mut col = 0;
    for (&mode, &cnt) in model.modes.modes.iter().zip(&model.basis.counts) {
        if mode < 3 && cnt > 0 {
            q[col] = x1[mode];
            wrench[mode] = model.rod.stiffness[mode] * x1[mode];
        }
        col += cnt;
    }
    Ok(GvsState {
        q,
        tip_wrench: Twist::from_vector(&wrench),
    })
}

/// Stacked residual: tip position, tip orientation and `K_εε q + Q_W(0) − JᵀΛ₁`.
pub fn gvs_residual(
    model: &GvsModel,
    stiffness: &DMatrix<f64>,
    bc: &BoundaryConditions,
    state: &GvsState,
    steps: usize,
) -> Result<(DVector<f64>, RodShape)> {
    let n = model.dim();
    let shape = gvs_forward(model, &state.q, steps)?;
    let jac = gvs_jacobian(model, &shape)?;
    let q = DVector::from_column_slice(&state.q);
    let lambda = DVector::from_column_slice(state.tip_wrench.to_vector().as_slice());
    let mut eq = stiffness * &q - jac.transpose() * lambda;
    if model.rod.load != nalgebra::Vector3::zeros() {
        let (qw, _) = gvs_backward(model, shape.tip(), &state.q, &Twist::zero(), steps)?;
        eq += qw;
    }
    let mut r = DVector::zeros(6 + n);
    r.rows_mut(0, 6).copy_from(&bc.residual(shape.tip()));
    r.rows_mut(6, n).copy_from(&eq);
    Ok((r, shape))
}

pub fn solve_gvs(
    model: &GvsModel,
    bc: &BoundaryConditions,
    guess: Option<&GvsState>,
    opts: &GvsOptions,
) -> Result<(RodShape, GvsState)> {
    if !bc.tip.is_valid(1e-9) {
        return Err(Error::Config("tip pose is not a valid rigid transform".into()));
    }
    let start = match guess {
        Some(g) => {
            model.check_q(&g.q)?;
            g.clone()
        }
        None => default_guess(model, bc)?,
    };
    match solve_gvs_direct(model, bc, &start, opts) {
        Err(e @ (Error::NoConvergence { .. } | Error::IntegrationDiverged { .. })) => {
            let Ok(from) = gvs_forward(model, &start.q, opts.steps) else {
                return Err(e);
            };
            pose_continuation(from.tip(), &bc.tip, &start, |pose, s| {
                solve_gvs_direct(model, &BoundaryConditions::new(*pose), s, opts)
            })
        }
        other => other,
    }
}

fn solve_gvs_direct(model: &GvsModel, bc: &BoundaryConditions, start: &GvsState, opts: &GvsOptions) -> Result<(RodShape, GvsState)> {
    let n = model.dim();
    let stiffness = gvs_stiffness(model);
    let unpack = |u: &DVector<f64>| GvsState {
        q: u.as_slice()[..n].to_vec(),
        tip_wrench: Twist::from_slice(&u.as_slice()[n..]),
    };
    let mut x0 = DVector::zeros(n + 6);
    x0.as_mut_slice()[..n].copy_from_slice(&start.q);
    x0.as_mut_slice()[n..].copy_from_slice(start.tip_wrench.to_vector().as_slice());

    let f = |u: &DVector<f64>| gvs_residual(model, &stiffness, bc, &unpack(u), opts.steps).map(|(r, _)| r);
    let outcome = newton::solve(f, x0, &opts.newton)?;
    let state = unpack(&outcome.x);
    let (_, mut shape) = gvs_residual(model, &stiffness, bc, &state, opts.steps)?;
    shape.diagnostics.iterations = outcome.iterations;
    shape.diagnostics.residual_norm = outcome.residual_norm();
    shape.diagnostics.converged = true;
    Ok((shape, state))
}

/// Body-frame tip twist between two poses, `log(H_a⁻¹H_b)`.
pub fn tip_variation(a: &Pose, b: &Pose) -> Twist {
    log_se3(&(a.inverse() * *b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lie::{exp_se3, Vec3};
    use crate::rod::RodProperties;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn model(kind: BasisKind, degree: usize) -> GvsModel {
        let rod = StaticRod::unloaded(&RodProperties::fibreglass_sim()).unwrap();
        GvsModel::new(rod, ShapeBasis::uniform(kind, degree, 3)).unwrap()
    }

    fn single_mode(kind: BasisKind, count: usize) -> GvsModel {
        let rod = StaticRod::unloaded(&RodProperties::fibreglass_sim()).unwrap();
        GvsModel {
            rod,
            basis: ShapeBasis::new(kind, vec![count]),
            modes: ModeSelector::new(vec![1]).unwrap(),
        }
    }

    #[test]
    fn strain_expansion() {
        let m = single_mode(BasisKind::Monomial, 4);
        let chi_ref = Twist::new(Vec3::zeros(), Vec3::x());
        assert_eq!(gvs_strain(0.3, &m.basis, &m.modes, &chi_ref, &[0.0; 4]).unwrap(), chi_ref);
        let chi = gvs_strain(0.7, &m.basis, &m.modes, &chi_ref, &[PI, 0.0, 0.0, 0.0]).unwrap();
        assert_eq!(chi.angular, Vec3::new(0.0, PI, 0.0));
        assert_eq!(chi.linear, Vec3::x());
        let q = [0.3, -1.0, 2.0, 0.5];
        let a = gvs_strain(0.4, &m.basis, &m.modes, &chi_ref, &q).unwrap() - chi_ref;
        let q2: Vec<f64> = q.iter().map(|v| 2.5 * v).collect();
        let b = gvs_strain(0.4, &m.basis, &m.modes, &chi_ref, &q2).unwrap() - chi_ref;
        assert_relative_eq!(b.to_vector(), a.to_vector() * 2.5, epsilon = 1e-14);
        assert!(gvs_strain(0.4, &m.basis, &m.modes, &chi_ref, &[1.0]).is_err());
    }

    #[test]
    fn phi_is_block_diagonal() {
        let b = ShapeBasis::new(BasisKind::Monomial, vec![2, 3]);
        let p = b.phi(0.5);
        assert_eq!(p.shape(), (2, 5));
        assert_eq!(p.row(0).iter().copied().collect::<Vec<_>>(), vec![1.0, 0.5, 0.0, 0.0, 0.0]);
        assert_eq!(p.row(1).iter().copied().collect::<Vec<_>>(), vec![0.0, 0.0, 1.0, 0.5, 0.25]);
    }

    #[test]
    fn shifted_legendre_values() {
        let b = ShapeBasis::new(BasisKind::Legendre, vec![4]);
        let t: f64 = 0.3;
        let x = 2.0 * t - 1.0;
        let v = b.values(t, 4);
        assert_relative_eq!(v[1], x);
        assert_relative_eq!(v[2], 0.5 * (3.0 * x * x - 1.0), epsilon = 1e-15);
        assert_relative_eq!(v[3], 0.5 * (5.0 * x * x * x - 3.0 * x), epsilon = 1e-15);
    }

    #[test]
    fn forward_pass() {
        let m = model(BasisKind::Monomial, 3);
        let straight = gvs_forward(&m, &[0.0; 12], 200).unwrap();
        assert_relative_eq!(straight.tip().position, Vec3::x(), epsilon = 1e-15);
        let mut q = vec![0.0; 12];
        q[4] = PI;
        let arc = gvs_forward(&m, &q, 200).unwrap();
        assert_relative_eq!(arc.tip().position, Vec3::new(0.0, 0.0, -2.0 / PI), epsilon = 1e-8);
        let q = [0.2, 0.1, -0.3, 0.0, 2.0, 0.5, -1.0, 0.3, 0.4, -0.7, 0.2, 0.1];
        let a = gvs_forward(&m, &q, 200).unwrap();
        let b = gvs_forward(&m, &q, 400).unwrap();
        assert!((a.tip().position - b.tip().position).norm() < 1e-8);
    }

    #[test]
    fn stiffness_matrices() {
        let ei = StaticRod::unloaded(&RodProperties::fibreglass_sim()).unwrap().stiffness[1];
        assert_relative_eq!(gvs_stiffness(&single_mode(BasisKind::Monomial, 1))[(0, 0)], ei, epsilon = 1e-14);
        let k = gvs_stiffness(&single_mode(BasisKind::Monomial, 2));
        let hilbert = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.5, 1.0 / 3.0]) * ei;
        assert_relative_eq!(k, hilbert, epsilon = 1e-14);
        // Orthogonality oracle: ∫P_a P_b = δ_ab/(2a+1) on [0, 1], by an independent fine rule.
        let m = single_mode(BasisKind::Legendre, 4);
        let k = gvs_stiffness(&m);
        let fine = GaussRule::new(20);
        for a in 0..4 {
            for b in 0..4 {
                let oracle = ei * fine.integrate_unit(|t| {
                    let v = m.basis.values(t, 4);
                    v[a] * v[b]
                });
                assert_relative_eq!(k[(a, b)], oracle, epsilon = 1e-13);
            }
            assert_relative_eq!(k[(a, a)], ei / (2 * a + 1) as f64, epsilon = 1e-13);
        }
        assert!(gvs_stiffness(&model(BasisKind::Legendre, 3)).cholesky().is_some());
    }

    #[test]
    fn backward_pass() {
        let m = model(BasisKind::Monomial, 3);
        let shape = gvs_forward(&m, &[0.0; 12], 200).unwrap();
        let (q0, stress) = gvs_backward(&m, shape.tip(), &[0.0; 12], &Twist::zero(), 200).unwrap();
        assert_eq!(q0.norm(), 0.0);
        assert!(stress.iter().all(|(_, s)| s.to_vector().norm() == 0.0));

        let mut q = vec![0.0; 12];
        q[4] = PI;
        let arc = gvs_forward(&m, &q, 200).unwrap();
        let ei = m.rod.stiffness[1];
        let tip = Twist::new(Vec3::new(0.0, ei * PI, 0.0), Vec3::zeros());
        let (_, stress) = gvs_backward(&m, arc.tip(), &q, &tip, 200).unwrap();
        for (_, s) in stress {
            assert_relative_eq!(s.angular, Vec3::new(0.0, ei * PI, 0.0), epsilon = 1e-9);
            assert!(s.linear.norm() < 1e-9);
        }
    }

    #[test]
    fn straight_rod_jacobian() {
        let m = single_mode(BasisKind::Monomial, 1);
        let shape = gvs_forward(&m, &[0.0], 200).unwrap();
        let j = gvs_jacobian(&m, &shape).unwrap();
        // ∫ Ad_{(I, (τ−1)e₁)} e_{κ₂} dτ: angular (0, 1, 0), linear (τ−1)e₁ × e₂ integrated → (0, 0, −½).
        assert_relative_eq!(j.column(0).into_owned(), DVector::from_vec(vec![0.0, 1.0, 0.0, 0.0, 0.0, -0.5]), epsilon = 1e-12);
        let empty = GvsModel {
            basis: ShapeBasis::new(BasisKind::Monomial, vec![]),
            modes: ModeSelector::new(vec![]).unwrap(),
            ..m
        };
        let s = gvs_forward(&empty, &[], 200).unwrap();
        assert_eq!(gvs_jacobian(&empty, &s).unwrap().shape(), (6, 0));
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let m = model(BasisKind::Legendre, 2);
        let q = [0.3, -0.2, 0.1, 1.5, 0.4, -0.3, -0.6, 0.2, 0.5];
        let base = gvs_forward(&m, &q, 200).unwrap();
        let j = gvs_jacobian(&m, &base).unwrap();
        let eps = 1e-6;
        for k in 0..q.len() {
            let mut qp = q;
            qp[k] += eps;
            let moved = gvs_forward(&m, &qp, 200).unwrap();
            let fd = tip_variation(base.tip(), moved.tip()).to_vector() / eps;
            for i in 0..6 {
                assert!((fd[i] - j[(i, k)]).abs() < 1e-5, "({i},{k}) {} vs {}", fd[i], j[(i, k)]);
            }
        }
    }

    #[test]
    fn backward_sweep_equals_jacobian_route() {
        let props = RodProperties {
            density: Some(1800.0),
            ..RodProperties::fibreglass_sim()
        };
        let rod = StaticRod::new(&props, &crate::rod::DistributedLoad::gravity(&props).unwrap()).unwrap();
        let m = GvsModel::new(rod, ShapeBasis::uniform(BasisKind::Monomial, 2, 3)).unwrap();
        let q = [0.3, -0.2, 0.1, 1.5, 0.4, -0.3, -0.6, 0.2, 0.5];
        let shape = gvs_forward(&m, &q, 200).unwrap();
        let lambda = Twist::new(Vec3::new(0.1, 1.2, -0.4), Vec3::new(0.5, -0.3, 0.8));
        let (full, _) = gvs_backward(&m, shape.tip(), &q, &lambda, 200).unwrap();
        let (qw, _) = gvs_backward(&m, shape.tip(), &q, &Twist::zero(), 200).unwrap();
        let j = gvs_jacobian(&m, &shape).unwrap();
        let jt = j.transpose() * DVector::from_column_slice(lambda.to_vector().as_slice());
        assert!((full - (qw - jt)).norm() < 1e-8);
    }

    #[test]
    fn solves_straight_and_uniform_bending() {
        let m = model(BasisKind::Monomial, 3);
        let (_, st) = solve_gvs(&m, &BoundaryConditions::straight(), None, &GvsOptions::default()).unwrap();
        assert!(st.q.iter().all(|v| v.abs() < 1e-12));
        assert!(st.tip_wrench.to_vector().norm() < 1e-12);

        let tip = exp_se3(&Twist::new(Vec3::new(0.0, PI, 0.0), Vec3::x()));
        let bc = BoundaryConditions::new(tip);
        let (shape, _) = solve_gvs(&m, &bc, None, &GvsOptions::default()).unwrap();
        for s in &shape.samples {
            assert!((s.strain.angular - Vec3::new(0.0, PI, 0.0)).norm() < 1e-5);
        }
    }

    #[test]
    fn monomial_and_legendre_give_the_same_field() {
        let tip = exp_se3(&Twist::new(Vec3::new(0.3, 1.2, -0.5), Vec3::new(0.8, 0.2, 0.1)));
        let bc = BoundaryConditions::new(tip);
        let opts = GvsOptions::default();
        let (a, _) = solve_gvs(&model(BasisKind::Monomial, 3), &bc, None, &opts).unwrap();
        let (b, _) = solve_gvs(&model(BasisKind::Legendre, 3), &bc, None, &opts).unwrap();
        for (sa, sb) in a.samples.iter().zip(&b.samples) {
            assert!((sa.strain.angular - sb.strain.angular).norm() < 1e-5);
        }
    }

    #[test]
    fn reproduces_fields_in_the_span() {
        // A strain field inside the basis span: the exact IVP driven by it matches the forward pass.
        let m = model(BasisKind::Monomial, 2);
        let q = [0.2, -0.4, 0.3, 1.0, 0.5, -0.6, -0.3, 0.8, 0.1];
        let g = gvs_forward(&m, &q, 200).unwrap();
        let chi_ref = m.rod.reference.at(0.0);
        let mut rhs = |tau: f64, _: &Pose, _: &DVector<f64>| {
            Ok((gvs_strain(tau, &m.basis, &m.modes, &chi_ref, &q)?, DVector::zeros(0)))
        };
        let fine = sweep(&mut rhs, 800, Pose::identity(), DVector::zeros(0), false).unwrap();
        assert!((fine.last().unwrap().1.position - g.tip().position).norm() < 1e-8);
    }
}
