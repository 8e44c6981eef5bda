//! Tip-pose trajectories for the simulation benchmarks.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gvs::BasisKind;
use crate::lie::{exp_se3, rotation_about, Pose, Twist, Vec3};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WarmStart {
    /// Each configuration starts from the previous solution.
    #[default]
    Chain,
    Cold,
}

/// Approximate model to score against the exact reference.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ModelSpec {
    Interp {
        #[serde(default = "default_order")]
        order: usize,
    },
    Gvs {
        basis: BasisKind,
        /// Functions per mode; `degree + 1` when given as a degree.
        #[serde(default)]
        degree: Option<usize>,
        #[serde(default)]
        counts: Option<Vec<usize>>,
    },
}

fn default_order() -> usize {
    12
}

impl ModelSpec {
    pub fn interp() -> Self {
        ModelSpec::Interp { order: default_order() }
    }

    pub fn gvs(basis: BasisKind, degree: usize) -> Self {
        ModelSpec::Gvs {
            basis,
            degree: Some(degree),
            counts: None,
        }
    }

    pub fn gvs_counts(&self, modes: usize) -> Result<Vec<usize>> {
        match self {
            ModelSpec::Gvs { counts: Some(c), .. } => Ok(c.clone()),
            ModelSpec::Gvs { degree: Some(d), .. } => Ok(vec![d + 1; modes]),
            ModelSpec::Gvs { .. } => Err(Error::Config("GVS model needs either `degree` or `counts`".into())),
            ModelSpec::Interp { .. } => Err(Error::Config("not a GVS model".into())),
        }
    }

    pub fn id(&self) -> String {
        match self {
            ModelSpec::Interp { .. } => "interp".into(),
            ModelSpec::Gvs { basis, degree, counts } => {
                let kind = match basis {
                    BasisKind::Monomial => "monomial",
                    BasisKind::Legendre => "legendre",
                };
                match (degree, counts) {
                    (_, Some(c)) => format!(
                        "gvs-{kind}-{}",
                        c.iter().map(|n| n.to_string()).collect::<Vec<_>>().join("_")
                    ),
                    (Some(d), None) => format!("gvs-{kind}-{d}"),
                    (None, None) => format!("gvs-{kind}"),
                }
            }
        }
    }

    /// Parse ids of the form `interp`, `gvs-monomial-3`, `gvs-legendre-2_3_3`.
    pub fn parse(id: &str) -> Result<Self> {
        let id = id.trim();
        if id == "interp" {
            return Ok(Self::interp());
        }
        let parts: Vec<&str> = id.split('-').collect();
        let bad = || Error::Config(format!("unknown model id `{id}`"));
        if parts.len() != 3 || parts[0] != "gvs" {
            return Err(bad());
        }
        let basis = match parts[1] {
            "monomial" => BasisKind::Monomial,
            "legendre" => BasisKind::Legendre,
            _ => return Err(bad()),
        };
        if parts[2].contains('_') {
            let counts = parts[2]
                .split('_')
                .map(|s| s.parse().map_err(|_| bad()))
                .collect::<Result<Vec<usize>>>()?;
            Ok(ModelSpec::Gvs {
                basis,
                degree: None,
                counts: Some(counts),
            })
        } else {
            Ok(Self::gvs(basis, parts[2].parse().map_err(|_| bad())?))
        }
    }
}

/// Ordered tip poses on the unit rod plus run settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    pub rod: String,
    pub configs: Vec<Pose>,
    #[serde(default)]
    pub warm_start: WarmStart,
    #[serde(default)]
    pub models: Vec<ModelSpec>,
    #[serde(default)]
    pub gravity: bool,
}

impl Scenario {
    pub fn new(name: &str, configs: Vec<Pose>) -> Self {
        Self {
            name: name.into(),
            rod: "fibreglass-sim".into(),
            configs,
            warm_start: WarmStart::Chain,
            models: Vec::new(),
            gravity: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.configs.is_empty() {
            return Err(Error::Config(format!("scenario `{}` has no configurations", self.name)));
        }
        for (k, p) in self.configs.iter().enumerate() {
            if !p.is_valid(1e-9) {
                return Err(Error::Config(format!("configuration {k} of `{}` is not a rigid transform", self.name)));
            }
            if p.position.norm() > 1.0 + 1e-12 {
                return Err(Error::Config(format!(
                    "configuration {k} of `{}` is out of reach (|r| = {:.4})",
                    self.name,
                    p.position.norm()
                )));
            }
        }
        Ok(())
    }

    pub fn by_name(name: &str) -> Result<Self> {
        match name {
            "bending" => Ok(gen_bending(7)),
            "two-bending" => Ok(gen_two_bending(5)),
            "torsion" => Ok(gen_torsion(5, PI)),
            "bending-torsion" => Ok(gen_bending_torsion()),
            _ => Err(Error::Config(format!(
                "unknown scenario `{name}` (expected bending, two-bending, torsion or bending-torsion)"
            ))),
        }
    }
}

/// Tip of a constant-strain rod with curvature `kappa`.
pub fn arc_tip(kappa: &Vec3) -> Pose {
    exp_se3(&Twist::new(*kappa, Vec3::x()))
}

fn fraction(k: usize, n: usize) -> f64 {
    k as f64 / (n - 1) as f64
}

/// Planar bending from straight to the half circle, `κ₂ = πk/(n−1)`.
pub fn gen_bending(n_configs: usize) -> Scenario {
    let n = n_configs.max(2);
    let configs = (0..n).map(|k| arc_tip(&Vec3::new(0.0, PI * fraction(k, n), 0.0))).collect();
    Scenario::new("bending", configs)
}

/// Half-circle arcs whose plane turns about `e₁` from x–z to x–y.
pub fn gen_two_bending(n_configs: usize) -> Scenario {
    let n = n_configs.max(2);
    let configs = (0..n)
        .map(|k| {
            let phi = 0.5 * PI * fraction(k, n);
            arc_tip(&(rotation_about(&Vec3::x(), phi) * Vec3::new(0.0, PI, 0.0)))
        })
        .collect();
    Scenario::new("two-bending", configs)
}

/// Straight rod twisted at the tip by `θ_k = θ_max·k/(n−1)`.
pub fn gen_torsion(n_configs: usize, theta_max: f64) -> Scenario {
    let n = n_configs.max(2);
    let configs = (0..n)
        .map(|k| Pose::new(rotation_about(&Vec3::x(), theta_max * fraction(k, n)), Vec3::x()))
        .collect();
    Scenario::new("torsion", configs)
}

/// Where the tip twist is applied relative to the displaced orientation.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TwistFrame {
    /// `R = R_d·exp(θe₁)`, about the tip tangent.
    #[default]
    Local,
    /// `R = exp(θe₁)·R_d`, about the base x-axis.
    Global,
}

/// Tip displaced to `(0.5, 0, 0.5)` with a quarter turn that points the tip
/// tangent along `+z`, then twisted in steps of π/4 up to π.
pub fn gen_bending_torsion() -> Scenario {
    gen_bending_torsion_with(TwistFrame::Local)
}

pub fn gen_bending_torsion_with(frame: TwistFrame) -> Scenario {
    let displaced = rotation_about(&Vec3::y(), -0.5 * PI);
    let configs = (0..5)
        .map(|k| {
            let twist = rotation_about(&Vec3::x(), -0.25 * PI * k as f64);
            let rotation = match frame {
                TwistFrame::Local => displaced * twist,
                TwistFrame::Global => twist * displaced,
            };
            Pose::new(rotation, Vec3::new(0.5, 0.0, 0.5))
        })
        .collect();
    Scenario::new("bending-torsion", configs)
}
