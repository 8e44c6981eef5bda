//! Rod parameterization: geometry, material, stiffness, deformation modes and
//! the sampled solution type shared by all solvers.
//!
//! Solvers work on the unit-length rod (`τ = s/L`). Strains are stored per
//! unit τ, positions in rod lengths, and stresses are scaled by the bending
//! stiffness `EI_y/L`, so a shape only depends on the stiffness *ratios* and
//! on the dimensionless load `L³q/EI_y`.

use std::f64::consts::PI;

use nalgebra::{Matrix3, Vector6};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lie::{interpolate_pose, Mat3, Pose, Twist, Vec3};

/// Nominal marker layout along a rod, first marker one spacing from the base.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MarkerLayout {
    pub count: usize,
    /// Distance between consecutive markers (m).
    pub spacing: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RodProperties {
    #[serde(default)]
    pub name: String,
    /// Length L (m).
    pub length: f64,
    /// Diameter d (m).
    pub diameter: f64,
    /// Young's modulus E (Pa).
    pub youngs: f64,
    /// Shear modulus G (Pa).
    pub shear: f64,
    /// Mass density (kg/m³), only needed for gravity loads.
    #[serde(default)]
    pub density: Option<f64>,
    /// Gravity vector in the base frame (m/s²).
    #[serde(default)]
    pub gravity: Option<[f64; 3]>,
    #[serde(default)]
    pub markers: Option<MarkerLayout>,
}

impl RodProperties {
    pub fn new(length: f64, diameter: f64, youngs: f64, shear: f64) -> Self {
        Self {
            name: String::new(),
            length,
            diameter,
            youngs,
            shear,
            density: None,
            gravity: None,
            markers: None,
        }
    }

    /// Unit-length fibreglass rod used by the simulation scenarios.
    pub fn fibreglass_sim() -> Self {
        Self {
            name: "fibreglass-sim".into(),
            ..Self::new(1.0, 2e-3, 36.5e9, 3e9)
        }
    }

    pub fn fibreglass() -> Self {
        Self {
            name: "fibreglass".into(),
            markers: Some(MarkerLayout {
                count: 6,
                spacing: 0.126,
            }),
            ..Self::new(0.885, 2e-3, 36.5e9, 3e9)
        }
    }

    pub fn nitinol() -> Self {
        Self {
            name: "nitinol".into(),
            markers: Some(MarkerLayout {
                count: 7,
                spacing: 0.119,
            }),
            ..Self::new(0.955, 1.5e-3, 80e9, 30e9)
        }
    }

    pub fn preset(name: &str) -> Option<Self> {
        match name {
            "fibreglass-sim" => Some(Self::fibreglass_sim()),
            "fibreglass" => Some(Self::fibreglass()),
            "nitinol" => Some(Self::nitinol()),
            _ => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (what, v) in [
            ("length", self.length),
            ("diameter", self.diameter),
            ("Young's modulus", self.youngs),
            ("shear modulus", self.shear),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidGeometry(format!("{what} must be positive, got {v}")));
            }
        }
        if let Some(rho) = self.density {
            if !(rho.is_finite() && rho >= 0.0) {
                return Err(Error::InvalidGeometry(format!("density must be non-negative, got {rho}")));
            }
        }
        Ok(())
    }

    pub fn area(&self) -> f64 {
        PI * self.diameter.powi(2) / 4.0
    }

    /// Second moment of area about a diameter, `I_y = I_z`.
    pub fn bending_inertia(&self) -> f64 {
        PI * self.diameter.powi(4) / 64.0
    }

    /// Polar moment, `I_x = 2 I_y` for a circular section.
    pub fn polar_inertia(&self) -> f64 {
        PI * self.diameter.powi(4) / 32.0
    }

    /// Arc parameters of the nominal marker positions.
    pub fn marker_taus(&self) -> Option<Vec<f64>> {
        let m = self.markers?;
        Some((1..=m.count).map(|i| i as f64 * m.spacing / self.length).collect())
    }
}

/// `diag(GI_x, EI_y, EI_z, EA, GA, GA)` split into its angular and linear blocks.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Stiffness {
    /// `(GI_x, EI_y, EI_z)` in N·m².
    pub bending_torsion: Vec3,
    /// `(EA, GA, GA)` in N.
    pub shear_extension: Vec3,
}

impl Stiffness {
    pub fn k_bt(&self) -> Mat3 {
        Matrix3::from_diagonal(&self.bending_torsion)
    }

    pub fn k_se(&self) -> Mat3 {
        Matrix3::from_diagonal(&self.shear_extension)
    }

    pub fn diagonal(&self) -> Vector6<f64> {
        let mut d = Vector6::zeros();
        d.fixed_rows_mut::<3>(0).copy_from(&self.bending_torsion);
        d.fixed_rows_mut::<3>(3).copy_from(&self.shear_extension);
        d
    }

    /// Reference stress scale `EI_y/L` (N·m) used to make solver unknowns O(1).
    pub fn reference(&self, length: f64) -> f64 {
        self.bending_torsion[1] / length
    }

    /// Stiffness diagonal acting on per-τ strains, divided by `EI_y/L`.
    pub fn scaled(&self, length: f64) -> Vector6<f64> {
        let k_ref = self.reference(length);
        let mut d = self.diagonal();
        for i in 0..3 {
            d[i] /= length * k_ref;
            d[i + 3] *= length / k_ref;
        }
        d
    }
}

pub fn build_stiffness(props: &RodProperties) -> Result<Stiffness> {
    props.validate()?;
    let (e, g) = (props.youngs, props.shear);
    let (a, i) = (props.area(), props.bending_inertia());
    Ok(Stiffness {
        bending_torsion: Vec3::new(g * props.polar_inertia(), e * i, e * i),
        shear_extension: Vec3::new(e * a, g * a, g * a),
    })
}

/// `½(κ − κ̄)ᵀ K_BT (κ − κ̄)`.
pub fn strain_energy_density(kappa: &Vec3, kappa_ref: &Vec3, k_bt: &Mat3) -> f64 {
    let d = kappa - kappa_ref;
    0.5 * d.dot(&(k_bt * d))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DeformationModel {
    Cosserat,
    Kirchhoff,
    #[default]
    InextensibleKirchhoff,
    TorsionFreeKirchhoff,
}

impl DeformationModel {
    /// Enabled strain components, `(κ₁, κ₂, κ₃, ρ₁, ρ₂, ρ₃)`.
    pub fn mask(&self) -> [bool; 6] {
        match self {
            DeformationModel::Cosserat => [true; 6],
            DeformationModel::Kirchhoff => [true, true, true, true, false, false],
            DeformationModel::InextensibleKirchhoff => [true, true, true, false, false, false],
            DeformationModel::TorsionFreeKirchhoff => [false, true, true, true, false, false],
        }
    }

    pub fn enabled_modes(&self) -> Vec<usize> {
        (0..6).filter(|&i| self.mask()[i]).collect()
    }

    /// Replace disabled components with the reference strain.
    pub fn apply(&self, strain: &Twist, reference: &Twist) -> Twist {
        let (s, r) = (strain.to_vector(), reference.to_vector());
        let m = self.mask();
        Twist::from_vector(&Vector6::from_fn(|i, _| if m[i] { s[i] } else { r[i] }))
    }
}

/// Reference deformation `χ̄`, constant along the rod.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReferenceStrain(pub Twist);

impl Default for ReferenceStrain {
    fn default() -> Self {
        Self(Twist::new(Vec3::zeros(), Vec3::x()))
    }
}

impl ReferenceStrain {
    pub fn at(&self, _tau: f64) -> Twist {
        self.0
    }
}

/// Constant distributed force in the base frame.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct DistributedLoad {
    /// Force per unit length (N/m).
    pub force: Vec3,
}

impl DistributedLoad {
    pub fn none() -> Self {
        Self::default()
    }

    pub fn gravity(props: &RodProperties) -> Result<Self> {
        let rho = props
            .density
            .ok_or_else(|| Error::Config(format!("rod '{}' needs a density for gravity", props.name)))?;
        let g = props.gravity.map(Vec3::from).unwrap_or(Vec3::new(0.0, 0.0, -9.81));
        Ok(Self {
            force: g * rho * props.area(),
        })
    }

    pub fn is_zero(&self) -> bool {
        self.force == Vec3::zeros()
    }

    /// Dimensionless base-frame load `L³q/EI_y`.
    pub fn scaled(&self, props: &RodProperties, stiffness: &Stiffness) -> Vec3 {
        self.force * props.length.powi(3) / stiffness.bending_torsion[1]
    }
}

/// Wrench `W` entering `Λ' = ad_χᵀΛ + W` for a base-frame scaled load.
pub fn body_load(rotation: &Mat3, scaled_load: &Vec3) -> Twist {
    Twist::new(Vec3::zeros(), -(rotation.transpose() * scaled_load))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShapeSample {
    pub tau: f64,
    pub pose: Pose,
    pub strain: Twist,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub iterations: usize,
    pub wall_time: f64,
    pub residual_norm: f64,
    pub converged: bool,
    /// Orientation integration switched from canonical coordinates to the group.
    #[serde(default)]
    pub fallback: bool,
}

/// Sampled solution `τ ↦ (H(τ), χ(τ))` on the unit-length rod.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RodShape {
    pub samples: Vec<ShapeSample>,
    pub diagnostics: Diagnostics,
}

impl RodShape {
    pub fn new(samples: Vec<ShapeSample>) -> Self {
        Self {
            samples,
            diagnostics: Diagnostics::default(),
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn taus(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.tau).collect()
    }

    pub fn tip(&self) -> &Pose {
        &self.samples.last().expect("empty shape").pose
    }

    /// Pose at an arbitrary τ by geodesic interpolation between nodes.
    pub fn pose_at(&self, tau: f64) -> Pose {
        let s = &self.samples;
        if tau <= s[0].tau {
            return s[0].pose;
        }
        if tau >= s[s.len() - 1].tau {
            return s[s.len() - 1].pose;
        }
        let j = s.partition_point(|p| p.tau <= tau);
        let (a, b) = (&s[j - 1], &s[j]);
        interpolate_pose(&a.pose, &b.pose, (tau - a.tau) / (b.tau - a.tau))
    }

    /// Largest deviation from unit speed `‖r'‖ = 1`, measured on the
    /// tangent of every node and on every chord relative to its arc length.
    pub fn unit_speed_defect(&self) -> f64 {
        let tangent = self
            .samples
            .iter()
            .map(|s| ((s.pose.rotation * Vec3::x()).norm() - 1.0).abs())
            .fold(0.0, f64::max);
        let strain = self
            .samples
            .iter()
            .map(|s| (s.strain.linear - Vec3::x()).norm())
            .fold(0.0, f64::max);
        tangent.max(strain)
    }

    /// `∫‖r'‖dτ` by summing chord lengths (a lower bound converging to the arc length).
    pub fn chord_length(&self) -> f64 {
        self.samples
            .windows(2)
            .map(|w| (w[1].pose.position - w[0].pose.position).norm())
            .sum()
    }

    /// Invariants every solver output has to satisfy.
    pub fn check_invariants(&self, tol: f64) -> Result<()> {
        if self.samples.len() < 2 {
            return Err(Error::GridMismatch("shape needs at least two samples".into()));
        }
        if self.samples.windows(2).any(|w| w[1].tau <= w[0].tau) {
            return Err(Error::GridMismatch("tau must be strictly increasing".into()));
        }
        for s in &self.samples {
            if !s.pose.is_valid(tol) || !s.strain.is_finite() {
                return Err(Error::IntegrationDiverged { tau: s.tau });
            }
        }
        Ok(())
    }
}

/// Uniform grid `τ_j = j/steps`.
pub fn uniform_grid(steps: usize) -> Vec<f64> {
    (0..=steps).map(|j| j as f64 / steps as f64).collect()
}
