//! Reference solver: integrates the static rod equations from the clamped
//! base and shoots on the unknown base stress until the tip pose matches.

use nalgebra::{DVector, Vector6};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::integrate::sweep;
use crate::lie::{
    ad_transpose_apply, check_singular, dexpinv_so3_unchecked, exp_so3, interpolate_pose, log_so3, vee3, Pose, Twist, Vec3,
};
use crate::newton::{self, NewtonOptions};
use crate::rod::{
    body_load, build_stiffness, DeformationModel, DistributedLoad, ReferenceStrain, RodProperties,
    RodShape, ShapeSample,
};

/// Clamped base at the identity, prescribed tip pose (unit-length rod).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundaryConditions {
    pub tip: Pose,
}

impl BoundaryConditions {
    pub fn new(tip: Pose) -> Self {
        Self { tip }
    }

    pub fn straight() -> Self {
        Self::new(Pose::from_translation(Vec3::x()))
    }

    /// Position residual `r(1) − r_des` followed by the orientation residual
    /// `(R_desᵀR(1) − R(1)ᵀR_des)^∨`.
    pub fn residual(&self, tip: &Pose) -> Vector6<f64> {
        let rd = &self.tip.rotation;
        let r = &tip.rotation;
        let ori = vee3(&(rd.transpose() * r - r.transpose() * rd));
        let pos = tip.position - self.tip.position;
        Vector6::new(pos[0], pos[1], pos[2], ori[0], ori[1], ori[2])
    }
}

/// Stiffness, deformation model, reference strain and load of a rod, in the
/// scaled units of [`crate::rod`].
#[derive(Clone, Debug, PartialEq)]
pub struct StaticRod {
    pub stiffness: Vector6<f64>,
    pub model: DeformationModel,
    pub reference: ReferenceStrain,
    /// Dimensionless base-frame distributed force `L³q/EI_y`.
    pub load: Vec3,
}

impl StaticRod {
    pub fn new(props: &RodProperties, load: &DistributedLoad) -> Result<Self> {
        let k = build_stiffness(props)?;
        Ok(Self {
            stiffness: k.scaled(props.length),
            model: DeformationModel::InextensibleKirchhoff,
            reference: ReferenceStrain::default(),
            load: load.scaled(props, &k),
        })
    }

    pub fn unloaded(props: &RodProperties) -> Result<Self> {
        Self::new(props, &DistributedLoad::none())
    }

    pub fn with_model(mut self, model: DeformationModel) -> Self {
        self.model = model;
        self
    }

    pub fn bending_torsion(&self) -> Vec3 {
        self.stiffness.fixed_rows::<3>(0).into_owned()
    }

    /// Inverse constitutive law on enabled modes; disabled modes take the
    /// reference value and their stress component acts as a reaction.
    pub fn strain_from_stress(&self, tau: f64, stress: &Twist) -> Twist {
        let reference = self.reference.at(tau);
        let (s, r) = (stress.to_vector(), reference.to_vector());
        let mask = self.model.mask();
        Twist::from_vector(&Vector6::from_fn(|i, _| {
            if mask[i] {
                r[i] + s[i] / self.stiffness[i]
            } else {
                r[i]
            }
        }))
    }

    /// `K(χ − χ̄)` on enabled modes.
    pub fn stress_from_strain(&self, tau: f64, strain: &Twist) -> Twist {
        let d = (*strain - self.reference.at(tau)).to_vector();
        let mask = self.model.mask();
        Twist::from_vector(&Vector6::from_fn(|i, _| if mask[i] { self.stiffness[i] * d[i] } else { 0.0 }))
    }

    /// `κ' = K⁻¹(−κ × Kκ − e₁ × f)` with body-frame constraint force `f`.
    fn kappa_rate(&self, kappa: &Vec3, force_body: &Vec3) -> Vec3 {
        let k = self.bending_torsion();
        let m = k.component_mul(kappa);
        (-kappa.cross(&m) - Vec3::x().cross(force_body)).component_div(&k)
    }

    /// Base-frame constraint force at τ for a base value `f0`.
    fn base_force(&self, tau: f64, f0: &Vec3) -> Vec3 {
        f0 - self.load * tau
    }
}

/// How orientation is integrated by the Kirchhoff IVP.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OrientationScheme {
    /// Canonical coordinates `x' = dexp⁻¹(−x)·κ`, falling back to `Group`
    /// when `‖x‖` approaches a singularity of `dexp`.
    #[default]
    Canonical,
    /// Direct `H' = H·χ̂` integration on the group.
    Group,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExactOptions {
    pub steps: usize,
    pub newton: NewtonOptions,
    pub scheme: OrientationScheme,
}

impl Default for ExactOptions {
    fn default() -> Self {
        Self {
            steps: 200,
            newton: NewtonOptions::default(),
            scheme: OrientationScheme::Canonical,
        }
    }
}

/// Shooting unknowns `(κ(0), ⁰f)` and the matching tip residual.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ShootingState {
    pub unknowns: [f64; 6],
    pub residual: [f64; 6],
}

impl ShootingState {
    pub fn kappa0(&self) -> Vec3 {
        Vec3::from_column_slice(&self.unknowns[..3])
    }

    pub fn force0(&self) -> Vec3 {
        Vec3::from_column_slice(&self.unknowns[3..])
    }

    /// Constant-curvature arc ending in the tip orientation of `bc`, with no
    /// base force.
    pub fn arc(rod: &StaticRod, bc: &BoundaryConditions) -> Self {
        let kappa = log_so3(&bc.tip.rotation);
        let first = if rod.model == DeformationModel::InextensibleKirchhoff {
            kappa
        } else {
            rod.bending_torsion().component_mul(&kappa)
        };
        let mut s = Self::default();
        s.unknowns[..3].copy_from_slice(first.as_slice());
        s
    }
}

fn check_steps(steps: usize) -> Result<()> {
    if steps < 50 {
        return Err(Error::Config(format!("at least 50 integration steps required, got {steps}")));
    }
    Ok(())
}

/// Integrate `H' = Hχ̂`, `Λ' = ad_χᵀΛ + W` from the clamped base with initial
/// stress `Λ(0)`; `χ` follows from `Λ` through the constitutive law.
pub fn integrate_cosserat_ivp(rod: &StaticRod, stress0: &Twist, steps: usize) -> Result<RodShape> {
    check_steps(steps)?;
    let mut rhs = |tau: f64, pose: &Pose, aux: &DVector<f64>| {
        let stress = Twist::from_slice(aux.as_slice());
        let chi = rod.strain_from_stress(tau, &stress);
        let w = body_load(&pose.rotation, &rod.load);
        let rate = ad_transpose_apply(&chi, &stress) + w;
        Ok((chi, DVector::from_column_slice(rate.to_vector().as_slice())))
    };
    let start = DVector::from_column_slice(stress0.to_vector().as_slice());
    let nodes = sweep(&mut rhs, steps, Pose::identity(), start, false)?;
    Ok(RodShape::new(
        nodes
            .into_iter()
            .map(|(tau, pose, _, strain)| ShapeSample { tau, pose, strain })
            .collect(),
    ))
}

type KirchhoffState = [f64; 9];

fn kirchhoff_rate(rod: &StaticRod, tau: f64, y: &KirchhoffState, f0: &Vec3) -> Result<KirchhoffState> {
    let kappa = Vec3::new(y[0], y[1], y[2]);
    let x = Vec3::new(y[3], y[4], y[5]);
    check_singular(&x)?;
    let rot = exp_so3(&x);
    let f_body = rot.transpose() * rod.base_force(tau, f0);
    let dk = rod.kappa_rate(&kappa, &f_body);
    let dx = dexpinv_so3_unchecked(&(-x)) * kappa;
    let dr = rot * Vec3::x();
    Ok([dk[0], dk[1], dk[2], dx[0], dx[1], dx[2], dr[0], dr[1], dr[2]])
}

fn axpy(y: &KirchhoffState, a: f64, k: &KirchhoffState) -> KirchhoffState {
    std::array::from_fn(|i| y[i] + a * k[i])
}

fn kirchhoff_canonical(rod: &StaticRod, kappa0: &Vec3, f0: &Vec3, steps: usize) -> Result<RodShape> {
    let h = 1.0 / steps as f64;
    let mut y: KirchhoffState = [kappa0[0], kappa0[1], kappa0[2], 0., 0., 0., 0., 0., 0.];
    let mut samples = Vec::with_capacity(steps + 1);
    let sample = |tau: f64, y: &KirchhoffState| ShapeSample {
        tau,
        pose: Pose::new(exp_so3(&Vec3::new(y[3], y[4], y[5])), Vec3::new(y[6], y[7], y[8])),
        strain: Twist::new(Vec3::new(y[0], y[1], y[2]), Vec3::x()),
    };
    for k in 0..steps {
        let tau = k as f64 * h;
        samples.push(sample(tau, &y));
        let k1 = kirchhoff_rate(rod, tau, &y, f0)?;
        let k2 = kirchhoff_rate(rod, tau + 0.5 * h, &axpy(&y, 0.5 * h, &k1), f0)?;
        let k3 = kirchhoff_rate(rod, tau + 0.5 * h, &axpy(&y, 0.5 * h, &k2), f0)?;
        let k4 = kirchhoff_rate(rod, tau + h, &axpy(&y, h, &k3), f0)?;
        y = std::array::from_fn(|i| y[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]));
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::IntegrationDiverged { tau: tau + h });
        }
    }
    check_singular(&Vec3::new(y[3], y[4], y[5]))?;
    samples.push(sample(1.0, &y));
    Ok(RodShape::new(samples))
}

/// Inextensible Kirchhoff IVP from base curvature `κ(0)` and base-frame
/// constraint force `⁰f`. Returns the shape and whether the group fallback
/// was used.
pub fn integrate_kirchhoff_ivp(
    rod: &StaticRod,
    kappa0: &Vec3,
    force0: &Vec3,
    steps: usize,
    scheme: OrientationScheme,
) -> Result<(RodShape, bool)> {
    check_steps(steps)?;
    if rod.model != DeformationModel::InextensibleKirchhoff {
        return Err(Error::Config("the Kirchhoff IVP requires the inextensible Kirchhoff model".into()));
    }
    if scheme == OrientationScheme::Canonical {
        match kirchhoff_canonical(rod, kappa0, force0, steps) {
            Err(Error::NearSingular { .. }) => {}
            other => return other.map(|s| (s, false)),
        }
    }
    let k = rod.bending_torsion();
    let stress0 = Twist::new(k.component_mul(kappa0), *force0);
    integrate_cosserat_ivp(rod, &stress0, steps).map(|s| (s, true))
}

fn recoverable(e: &Error) -> bool {
    matches!(
        e,
        Error::NoConvergence { .. } | Error::IntegrationDiverged { .. } | Error::NearSingular { .. }
    )
}

/// Approach `target` from `start` through 2, 4, … 32 geodesic sub-poses, each
/// solved from the previous state. Iterations are summed over the sub-solves.
pub fn pose_continuation<S: Clone>(
    start: &Pose,
    target: &Pose,
    init: &S,
    mut solve: impl FnMut(&Pose, &S) -> Result<(RodShape, S)>,
) -> Result<(RodShape, S)> {
    let mut last = None;
    let mut n = 2;
    'outer: while n <= 32 {
        let mut state = init.clone();
        let mut total = 0;
        for k in 1..=n {
            let pose = if k == n { *target } else { interpolate_pose(start, target, k as f64 / n as f64) };
            match solve(&pose, &state) {
                Ok((mut shape, s)) => {
                    total += shape.diagnostics.iterations;
                    if k == n {
                        shape.diagnostics.iterations = total;
                        return Ok((shape, s));
                    }
                    state = s;
                }
                Err(e) if recoverable(&e) => {
                    last = Some(e);
                    n *= 2;
                    continue 'outer;
                }
                Err(e) => return Err(e),
            }
        }
    }
    Err(last.unwrap_or(Error::NoConvergence {
        iterations: 0,
        residual: f64::NAN,
    }))
}

/// Shoot on `(κ(0), ⁰f)` until the tip matches `bc`. Without a guess the
/// solve starts from [`ShootingState::arc`]. A failed solve is retried from
/// the arc, then by continuation from the arc's tip pose.
pub fn solve_exact_bvp(
    rod: &StaticRod,
    bc: &BoundaryConditions,
    guess: Option<&ShootingState>,
    opts: &ExactOptions,
) -> Result<(RodShape, ShootingState)> {
    let arc = ShootingState::arc(rod, bc);
    let first = guess.copied().unwrap_or(arc);
    let mut result = solve_exact_direct(rod, bc, &first, opts);
    if matches!(&result, Err(e) if recoverable(e)) && first != arc {
        result = solve_exact_direct(rod, bc, &arc, opts);
    }
    match result {
        Err(e) if recoverable(&e) => {
            let start = shooting_tip(rod, &arc, opts).unwrap_or_else(|| Pose::from_translation(Vec3::x()));
            pose_continuation(&start, &bc.tip, &arc, |pose, s| {
                solve_exact_direct(rod, &BoundaryConditions::new(*pose), s, opts)
            })
        }
        other => other,
    }
}

fn shooting_tip(rod: &StaticRod, state: &ShootingState, opts: &ExactOptions) -> Option<Pose> {
    let shape = if rod.model == DeformationModel::InextensibleKirchhoff {
        integrate_kirchhoff_ivp(rod, &state.kappa0(), &state.force0(), opts.steps, opts.scheme).ok()?.0
    } else {
        integrate_cosserat_ivp(rod, &Twist::from_slice(&state.unknowns), opts.steps).ok()?
    };
    Some(*shape.tip())
}

fn solve_exact_direct(
    rod: &StaticRod,
    bc: &BoundaryConditions,
    guess: &ShootingState,
    opts: &ExactOptions,
) -> Result<(RodShape, ShootingState)> {
    check_steps(opts.steps)?;
    if !bc.tip.is_valid(1e-9) {
        return Err(Error::Config("tip pose is not a valid rigid transform".into()));
    }
    let cosserat = rod.model != DeformationModel::InextensibleKirchhoff;
    let mut scheme = opts.scheme;

    let integrate = |u: &DVector<f64>, scheme: OrientationScheme| -> Result<(RodShape, bool)> {
        if cosserat {
            let stress0 = Twist::from_slice(u.as_slice());
            integrate_cosserat_ivp(rod, &stress0, opts.steps).map(|s| (s, true))
        } else {
            let kappa0 = Vec3::new(u[0], u[1], u[2]);
            let f0 = Vec3::new(u[3], u[4], u[5]);
            integrate_kirchhoff_ivp(rod, &kappa0, &f0, opts.steps, scheme)
        }
    };

    let x0 = DVector::from_column_slice(&guess.unknowns);
    let mut fell_back = false;
    let outcome = {
        let mut residual = |u: &DVector<f64>| -> Result<DVector<f64>> {
            let (shape, fb) = integrate(u, scheme)?;
            if fb && scheme == OrientationScheme::Canonical {
                // Stay on the group integrator for the rest of this solve.
                scheme = OrientationScheme::Group;
                fell_back = true;
            }
            Ok(DVector::from_column_slice(bc.residual(shape.tip()).as_slice()))
        };
        newton::solve(&mut residual, x0, &opts.newton)?
    };
    let (mut shape, fb) = integrate(&outcome.x, scheme)?;
    shape.diagnostics.iterations = outcome.iterations;
    shape.diagnostics.residual_norm = outcome.residual_norm();
    shape.diagnostics.converged = true;
    shape.diagnostics.fallback = fell_back || (fb && !cosserat);
    let mut state = ShootingState::default();
    state.unknowns.copy_from_slice(outcome.x.as_slice());
    state.residual.copy_from_slice(outcome.residual.as_slice());
    Ok((shape, state))
}
