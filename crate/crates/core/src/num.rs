//! Scalar abstraction shared by every numeric module.

use std::fmt::{Debug, Display};

use nalgebra as na;
use num_traits as nt;
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Floating point scalar the kinematic model is generic over (`f32` or `f64`).
pub trait Real:
    na::RealField
    + Copy
    + nt::FloatConst
    + nt::FromPrimitive
    + nt::ToPrimitive
    + Serialize
    + DeserializeOwned
    + Display
    + Debug
    + Default
    + Send
    + Sync
    + 'static
{
    /// Converts an `f64` literal into this scalar type.
    fn lit(x: f64) -> Self {
        <Self as nt::FromPrimitive>::from_f64(x).expect("finite literal")
    }

    fn to_f64(self) -> f64 {
        nt::ToPrimitive::to_f64(&self).unwrap_or(f64::NAN)
    }

    /// Relative tolerance used for configuration validation checks.
    fn validation_tol() -> Self {
        na::RealField::max(
            Self::default_epsilon().sqrt() * Self::lit(10.0),
            Self::lit(1e-12),
        )
    }

    /// Tolerance for unit-norm checks on joint axes.
    fn unit_norm_tol() -> Self {
        na::RealField::max(Self::default_epsilon() * Self::lit(100.0), Self::lit(1e-12))
    }

    fn deg(x: f64) -> Self {
        Self::lit(x.to_radians())
    }
}

impl Real for f32 {}
impl Real for f64 {}
