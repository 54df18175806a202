//! Digital twin of a compact wearable robotic limb: a seven-joint arm with a
//! double-layer scissor extension unit mounted on the user's upper arm.
//!
//! The numeric core is generic over [`Real`] (`f32` or `f64`); the aliases at
//! the crate root fix it to `f64`, which is what the CLI and server use.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod kinematics;
pub mod model;
pub mod num;
pub mod pose;
pub mod scissor;
pub mod statics;
pub mod teleop;
pub mod workspace;

pub use error::{Error, Result};
pub use num::Real;

pub type KinematicModel = model::KinematicModel<f64>;
pub type JointSpec = model::JointSpec<f64>;
pub type LinkSpec = model::LinkSpec<f64>;
pub type JointState = model::JointState<f64>;
pub type ScissorParams = scissor::ScissorParams<f64>;
pub type Pose = pose::Pose<f64>;
pub type Jacobian = kinematics::Jacobian<f64>;
pub type IkRequest = kinematics::IkRequest<f64>;
pub type IkSolution = kinematics::IkSolution<f64>;
pub type StaticsReport = statics::StaticsReport<f64>;
pub type ReachReport = workspace::ReachReport<f64>;
pub type SamplingPlan = workspace::SamplingPlan<f64>;
pub type PointCloud = workspace::PointCloud<f64>;
pub type CompactEnvelope = workspace::CompactEnvelope<f64>;
