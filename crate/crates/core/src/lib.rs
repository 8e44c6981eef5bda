//! Static models of inextensible Kirchhoff rods: an exact shooting solver,
//! a third-order strain-interpolated model, a variable-strain (GVS) model,
//! error metrics and a benchmark harness.

pub mod bench;
pub mod error;
pub mod exact;
pub mod gvs;
pub mod integrate;
pub mod interp;
pub mod lie;
pub mod metrics;
pub mod newton;
pub mod quadrature;
pub mod rod;

pub use error::{Error, Result};
pub use lie::{Pose, Twist, Vec3};
pub use rod::{DeformationModel, DistributedLoad, RodProperties, RodShape};
