//! Benchmark configuration file (TOML).
//!
//! ```toml
//! [run]
//! steps = 200
//! tol = 1e-7
//! repeats = 5
//!
//! [[rods]]
//! name = "steel"
//! length = 0.5
//! diameter = 0.001
//! youngs = 200e9
//! shear = 79e9
//!
//! [[models]]
//! kind = "interp"
//!
//! [[models]]
//! kind = "gvs"
//! basis = "legendre"
//! degree = 3
//!
//! [[scenarios]]
//! kind = "bending"
//! configs = 7
//! rod = "fibreglass-sim"
//! ```

use std::f64::consts::PI;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::bench::runner::RunOptions;
use crate::bench::scenario::{
    gen_bending, gen_bending_torsion_with, gen_torsion, gen_two_bending, ModelSpec, Scenario, TwistFrame, WarmStart,
};
use crate::error::{Error, Result};
use crate::lie::{exp_so3, Pose, Vec3};
use crate::rod::RodProperties;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScenarioKind {
    Bending,
    TwoBending,
    Torsion,
    BendingTorsion,
    /// Explicit tip poses.
    Poses,
}

/// Tip pose on the unit rod as position and rotation vector.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PoseEntry {
    pub position: [f64; 3],
    #[serde(default)]
    pub rotation: [f64; 3],
}

impl PoseEntry {
    pub fn pose(&self) -> Pose {
        Pose::new(exp_so3(&Vec3::from(self.rotation)), Vec3::from(self.position))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub kind: ScenarioKind,
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default)]
    pub configs: Option<usize>,
    #[serde(default = "default_rod")]
    pub rod: String,
    #[serde(default)]
    pub warm_start: WarmStart,
    #[serde(default)]
    pub gravity: bool,
    #[serde(default)]
    pub theta_max: Option<f64>,
    #[serde(default)]
    pub twist_frame: TwistFrame,
    #[serde(default)]
    pub poses: Vec<PoseEntry>,
    /// Model ids to run; all configured models when absent.
    #[serde(default)]
    pub models: Option<Vec<String>>,
}

fn default_rod() -> String {
    "fibreglass-sim".into()
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchConfig {
    #[serde(default)]
    pub run: RunOptions,
    #[serde(default)]
    pub rods: Vec<RodProperties>,
    #[serde(default)]
    pub models: Vec<ModelSpec>,
    #[serde(default)]
    pub scenarios: Vec<ScenarioConfig>,
}

impl BenchConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| {
            let line = e.span().map_or(0, |s| text[..s.start].lines().count().max(1));
            Error::Parse {
                line,
                message: e.message().to_string(),
            }
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    fn validate(&self) -> Result<()> {
        if !(self.run.tol > 0.0) || self.run.steps < 50 || self.run.max_iter == 0 {
            return Err(Error::Config("run needs tol > 0, steps >= 50 and max_iter > 0".into()));
        }
        for rod in &self.rods {
            rod.validate()?;
        }
        for s in &self.scenarios {
            self.rod(&s.rod)?;
            if let Some(ids) = &s.models {
                for id in ids {
                    if !self.models.iter().any(|m| &m.id() == id) {
                        return Err(Error::Config(format!("scenario model `{id}` is not configured")));
                    }
                }
            }
        }
        Ok(())
    }

    /// Configured rod by name, falling back to the presets.
    pub fn rod(&self, name: &str) -> Result<RodProperties> {
        self.rods
            .iter()
            .find(|r| r.name == name)
            .cloned()
            .or_else(|| RodProperties::preset(name))
            .ok_or_else(|| Error::Config(format!("unknown rod `{name}`")))
    }

    pub fn scenarios(&self) -> Result<Vec<(Scenario, RodProperties)>> {
        self.scenarios
            .iter()
            .map(|s| {
                let mut scenario = match s.kind {
                    ScenarioKind::Bending => gen_bending(s.configs.unwrap_or(7)),
                    ScenarioKind::TwoBending => gen_two_bending(s.configs.unwrap_or(5)),
                    ScenarioKind::Torsion => {
                        let theta = s.theta_max.unwrap_or(PI);
                        if !(theta > 0.0 && theta <= PI) {
                            return Err(Error::Config(format!("theta_max must lie in (0, π], got {theta}")));
                        }
                        gen_torsion(s.configs.unwrap_or(5), theta)
                    }
                    ScenarioKind::BendingTorsion => gen_bending_torsion_with(s.twist_frame),
                    ScenarioKind::Poses => Scenario::new("poses", s.poses.iter().map(PoseEntry::pose).collect()),
                };
                if let Some(name) = &s.name {
                    scenario.name = name.clone();
                }
                scenario.rod = s.rod.clone();
                scenario.warm_start = s.warm_start;
                scenario.gravity = s.gravity;
                scenario.models = match &s.models {
                    Some(ids) => self.models.iter().filter(|m| ids.contains(&m.id())).cloned().collect(),
                    None => self.models.clone(),
                };
                scenario.validate()?;
                Ok((scenario, self.rod(&s.rod)?))
            })
            .collect()
    }
}
