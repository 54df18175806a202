//! Double-layer scissor extension unit.
//!
//! Each layer is a chain of `stages` crossed link pairs of half-length `a`,
//! all sharing the cross angle `θ` measured from the unit's transverse axis.
//! The extended length along the unit axis is
//!
//! ```text
//! e(θ) = e0 + 2·N·a·sin θ
//! ```
//!
//! and a leadscrew closes the base pivot pair, whose separation is
//! `w(θ) = 2a·cos θ`. Screw travel is measured from the retracted state:
//! `s = w(θmin) − w(θ)`. Layers are kinematically identical and only count
//! toward mass bookkeeping.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::num::Real;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
pub struct ScissorParams<T: Real> {
    /// Crossed link pairs in series per layer.
    pub stages: u32,
    /// Pivot-to-center half length of one link, mm.
    pub half_link: T,
    /// Fixed stack-up at both ends, mm.
    pub hinge_offset: T,
    /// Parallel scissor planes sharing one angle.
    pub layers: u32,
    /// `[θmin, θmax]` in radians, `0 < θmin < θmax < π/2`.
    pub theta_range: [T; 2],
    /// Screw lead, mm of travel per actuator revolution.
    pub actuator_pitch: T,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScissorState<T: Real> {
    pub theta: T,
}

impl<T: Real> ScissorParams<T> {
    /// Two stages of 60 mm half-links with a 30 mm stack-up: sin θ spans
    /// [1/6, 11/12], reaching exactly 70 mm and 250 mm.
    pub fn auglimb() -> Self {
        let stages = 2u32;
        let half_link = T::lit(60.0);
        let hinge_offset = T::lit(30.0);
        let span = T::lit(2.0 * stages as f64) * half_link;
        let theta_min = ((T::lit(70.0) - hinge_offset) / span).asin();
        let theta_max = ((T::lit(250.0) - hinge_offset) / span).asin();
        ScissorParams {
            stages,
            half_link,
            hinge_offset,
            layers: 2,
            theta_range: [theta_min, theta_max],
            actuator_pitch: T::lit(2.0),
        }
    }

    /// Parameters from link geometry and the desired extension endpoints.
    pub fn from_extension_range(
        stages: u32,
        half_link: T,
        hinge_offset: T,
        layers: u32,
        extension: [T; 2],
        actuator_pitch: T,
    ) -> Result<Self> {
        let span = T::lit(2.0 * stages as f64) * half_link;
        let theta = |e: T| ((e - hinge_offset) / span).asin();
        let p = ScissorParams {
            stages,
            half_link,
            hinge_offset,
            layers,
            theta_range: [theta(extension[0]), theta(extension[1])],
            actuator_pitch,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let invalid = |msg: &str| Err(Error::Validation(format!("scissor: {msg}")));
        if self.stages == 0 {
            return invalid("stages must be ≥ 1");
        }
        if self.layers == 0 {
            return invalid("layers must be ≥ 1");
        }
        if !(self.half_link > T::zero()) {
            return invalid("halfLink must be > 0");
        }
        if !(self.hinge_offset >= T::zero()) {
            return invalid("hingeOffset must be ≥ 0");
        }
        if !(self.actuator_pitch > T::zero()) {
            return invalid("actuatorPitch must be > 0");
        }
        let [lo, hi] = self.theta_range;
        if !(T::zero() < lo && lo < hi && hi < T::frac_pi_2()) {
            return invalid("thetaRange must satisfy 0 < θmin < θmax < π/2");
        }
        Ok(())
    }

    pub fn theta_min(&self) -> T {
        self.theta_range[0]
    }

    pub fn theta_max(&self) -> T {
        self.theta_range[1]
    }

    fn span(&self) -> T {
        T::lit(2.0 * self.stages as f64) * self.half_link
    }

    fn check_theta(&self, theta: T) -> Result<()> {
        let [lo, hi] = self.theta_range;
        if !(theta >= lo && theta <= hi) {
            return Err(Error::OutOfRange {
                what: "scissor theta".into(),
                value: theta.to_f64(),
                min: lo.to_f64(),
                max: hi.to_f64(),
            });
        }
        Ok(())
    }

    /// Extension without range checking.
    pub fn extension_unchecked(&self, theta: T) -> T {
        self.hinge_offset + self.span() * theta.sin()
    }

    pub fn extension_of_theta(&self, theta: T) -> Result<T> {
        self.check_theta(theta)?;
        Ok(self.extension_unchecked(theta))
    }

    /// Achievable extension interval `[e(θmin), e(θmax)]`.
    pub fn extension_range(&self) -> [T; 2] {
        [
            self.extension_unchecked(self.theta_min()),
            self.extension_unchecked(self.theta_max()),
        ]
    }

    pub fn theta_of_extension(&self, e: T) -> Result<T> {
        let [lo, hi] = self.extension_range();
        if !(e >= lo && e <= hi) {
            return Err(Error::OutOfRange {
                what: "scissor extension".into(),
                value: e.to_f64(),
                min: lo.to_f64(),
                max: hi.to_f64(),
            });
        }
        if e == lo {
            return Ok(self.theta_min());
        }
        if e == hi {
            return Ok(self.theta_max());
        }
        let s = ((e - self.hinge_offset) / self.span()).min(T::one());
        Ok(s.asin().clamp(self.theta_min(), self.theta_max()))
    }

    pub fn extension_ratio(&self) -> T {
        let [lo, hi] = self.extension_range();
        hi / lo
    }

    /// Separation of the driven base pivot pair.
    pub fn pivot_separation(&self, theta: T) -> T {
        T::lit(2.0) * self.half_link * theta.cos()
    }

    /// Full screw stroke from retracted to extended.
    pub fn max_actuator_travel(&self) -> T {
        self.pivot_separation(self.theta_min()) - self.pivot_separation(self.theta_max())
    }

    pub fn theta_to_actuator(&self, theta: T) -> Result<T> {
        self.check_theta(theta)?;
        Ok(self.pivot_separation(self.theta_min()) - self.pivot_separation(theta))
    }

    pub fn actuator_to_theta(&self, travel: T) -> Result<T> {
        let smax = self.max_actuator_travel();
        if !(travel >= T::zero() && travel <= smax) {
            return Err(Error::OutOfRange {
                what: "actuator travel".into(),
                value: travel.to_f64(),
                min: 0.0,
                max: smax.to_f64(),
            });
        }
        if travel == T::zero() {
            return Ok(self.theta_min());
        }
        if travel == smax {
            return Ok(self.theta_max());
        }
        let c = self.theta_min().cos() - travel / (T::lit(2.0) * self.half_link);
        Ok(c.clamp(-T::one(), T::one())
            .acos()
            .clamp(self.theta_min(), self.theta_max()))
    }

    /// Screw revolutions needed for a given travel.
    pub fn actuator_revolutions(&self, travel: T) -> T {
        travel / self.actuator_pitch
    }

    /// Transmission gain `de/ds = N·cot θ` at an interior travel.
    pub fn d_extension_d_actuator(&self, travel: T) -> Result<T> {
        let smax = self.max_actuator_travel();
        if !(travel > T::zero() && travel < smax) {
            return Err(Error::OutOfRange {
                what: "actuator travel (open interval)".into(),
                value: travel.to_f64(),
                min: 0.0,
                max: smax.to_f64(),
            });
        }
        let theta = self.actuator_to_theta(travel)?;
        Ok(self.gain_at_theta(theta))
    }

    /// `N·cot θ`, valid anywhere in the closed theta range.
    pub fn gain_at_theta(&self, theta: T) -> T {
        T::lit(self.stages as f64) / theta.tan()
    }

    pub fn extension_of_actuator(&self, travel: T) -> Result<T> {
        let theta = self.actuator_to_theta(travel)?;
        Ok(self.extension_unchecked(theta))
    }
}
