//! Kinematic chain description of the limb: joints, links, masses, motors.
//!
//! Every link extends along the local x-axis of the frame that follows its
//! joint, so the all-zero revolute configuration is the straight chain.
//! `links[i]` follows `joints[i]`; its motor sits at the joint origin and its
//! structural mass is lumped at the midpoint between this joint origin and
//! the next one (for the extension joint that span includes the extension).
//!
//! Models load from a TOML document; see `docs/model-config.md`.

use nalgebra::{Unit, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::num::Real;
use crate::pose::Pose;
use crate::scissor::ScissorParams;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum JointKind {
    /// Rotation about the link's long axis.
    RevoluteTwist,
    /// Rotation about an axis perpendicular to the link.
    RevoluteHinge,
    /// The scissor extension unit, valued in millimeters.
    PrismaticScissor,
    /// Gripper open/close; does not move any frame.
    GripperAperture,
}

impl JointKind {
    pub fn is_revolute(self) -> bool {
        matches!(self, JointKind::RevoluteTwist | JointKind::RevoluteHinge)
    }

    pub fn affects_pose(self) -> bool {
        !matches!(self, JointKind::GripperAperture)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            JointKind::RevoluteTwist => "revolute-twist",
            JointKind::RevoluteHinge => "revolute-hinge",
            JointKind::PrismaticScissor => "prismatic-scissor",
            JointKind::GripperAperture => "gripper-aperture",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
pub struct JointSpec<T: Real> {
    pub name: String,
    pub kind: JointKind,
    pub axis: [T; 3],
    /// `[min, max]`, radians for revolute joints and millimeters for the extension.
    pub limits: [T; 2],
    pub home: T,
    pub implemented: bool,
}

impl<T: Real> JointSpec<T> {
    pub fn min(&self) -> T {
        self.limits[0]
    }

    pub fn max(&self) -> T {
        self.limits[1]
    }

    pub fn range(&self) -> T {
        self.limits[1] - self.limits[0]
    }

    pub fn unit_axis(&self) -> Unit<Vector3<T>> {
        Unit::new_normalize(Vector3::from(self.axis))
    }

    pub fn clamp(&self, value: T) -> T {
        if !self.implemented {
            return self.home;
        }
        value.clamp(self.min(), self.max())
    }

    pub fn contains(&self, value: T) -> bool {
        value >= self.min() && value <= self.max()
    }

    /// Counts as a Jacobian column / IK variable.
    pub fn is_active(&self) -> bool {
        self.implemented && self.kind.affects_pose()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
pub struct LinkSpec<T: Real> {
    pub name: String,
    /// Offset along the link to the next joint origin, mm.
    pub length: T,
    /// Structural mass in grams, lumped at the link midpoint.
    pub mass: T,
    /// Motor mass in grams, lumped at the link origin.
    pub motor_mass: T,
    /// N·mm for revolute joints; N of axial force for the extension joint.
    pub motor_torque_limit: T,
    /// Motor model name driving the preceding joint (free text).
    pub motor: String,
}

/// One step of a transform macro.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
pub struct Keyframe<T: Real> {
    pub values: Vec<T>,
    /// Seconds to hold after the keyframe is reached.
    pub dwell: T,
}

/// Authored configurations: the stowed pose and the expand sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
pub struct NamedPoses<T: Real> {
    pub compact: Vec<T>,
    pub expand: Vec<Keyframe<T>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
pub struct KinematicModel<T: Real> {
    pub schema_version: u32,
    pub gripper_length: T,
    #[serde(default)]
    pub base_pivot: Pose<T>,
    pub scissor: ScissorParams<T>,
    pub joints: Vec<JointSpec<T>>,
    pub links: Vec<LinkSpec<T>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub poses: Option<NamedPoses<T>>,
}

/// One value per joint, in model order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
pub struct JointState<T: Real>(pub Vec<T>);

impl<T: Real> JointState<T> {
    pub fn new(values: Vec<T>) -> Self {
        JointState(values)
    }

    pub fn values(&self) -> &[T] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl<T: Real> std::ops::Index<usize> for JointState<T> {
    type Output = T;
    fn index(&self, i: usize) -> &T {
        &self.0[i]
    }
}

impl<T: Real> std::ops::IndexMut<usize> for JointState<T> {
    fn index_mut(&mut self, i: usize) -> &mut T {
        &mut self.0[i]
    }
}

const REQUIRED_TOP: &[&str] = &[
    "schemaVersion",
    "gripperLength",
    "scissor",
    "joints",
    "links",
];
const REQUIRED_SCISSOR: &[&str] = &[
    "stages",
    "halfLink",
    "hingeOffset",
    "layers",
    "thetaRange",
    "actuatorPitch",
];
const REQUIRED_JOINT: &[&str] = &["name", "kind", "axis", "limits", "home", "implemented"];
const REQUIRED_LINK: &[&str] = &[
    "name",
    "length",
    "mass",
    "motorMass",
    "motorTorqueLimit",
    "motor",
];

fn missing_fields(doc: &toml::Table) -> Vec<String> {
    let mut missing = Vec::new();
    let mut check = |table: &toml::Table, required: &[&str], prefix: &str| {
        for key in required {
            if !table.contains_key(*key) {
                missing.push(format!("{prefix}{key}"));
            }
        }
    };
    check(doc, REQUIRED_TOP, "");
    if let Some(toml::Value::Table(s)) = doc.get("scissor") {
        check(s, REQUIRED_SCISSOR, "scissor.");
    }
    for (list, required) in [("joints", REQUIRED_JOINT), ("links", REQUIRED_LINK)] {
        if let Some(toml::Value::Array(items)) = doc.get(list) {
            for (i, item) in items.iter().enumerate() {
                if let toml::Value::Table(t) = item {
                    check(t, required, &format!("{list}[{i}]."));
                }
            }
        }
    }
    missing
}

fn deg<T: Real>(x: f64) -> T {
    T::deg(x)
}

impl<T: Real> KinematicModel<T> {
    /// The built-in device: shoulder-r, shoulder-t, elbow, wrist-r, wrist-t,
    /// extension, gripper-r (not fitted), gripper.
    pub fn auglimb() -> Self {
        let x = [T::one(), T::zero(), T::zero()];
        let y = [T::zero(), T::one(), T::zero()];
        let z = [T::zero(), T::zero(), T::one()];
        let twist = [deg::<T>(-150.0), deg(150.0)];
        let hinge = [deg::<T>(-105.0), deg(105.0)];
        let joint = |name: &str, kind, axis, limits, home, implemented| JointSpec {
            name: name.to_string(),
            kind,
            axis,
            limits,
            home,
            implemented,
        };
        let scissor = ScissorParams::auglimb();
        let [ext_min, ext_max] = scissor.extension_range();
        let joints = vec![
            joint(
                "shoulder-r",
                JointKind::RevoluteTwist,
                x,
                twist,
                T::zero(),
                true,
            ),
            joint(
                "shoulder-t",
                JointKind::RevoluteHinge,
                y,
                hinge,
                T::zero(),
                true,
            ),
            joint("elbow", JointKind::RevoluteHinge, y, hinge, T::zero(), true),
            joint(
                "wrist-r",
                JointKind::RevoluteTwist,
                x,
                twist,
                T::zero(),
                true,
            ),
            joint(
                "wrist-t",
                JointKind::RevoluteHinge,
                y,
                hinge,
                T::zero(),
                true,
            ),
            joint(
                "extension",
                JointKind::PrismaticScissor,
                x,
                [ext_min, ext_max],
                ext_min,
                true,
            ),
            joint(
                "gripper-r",
                JointKind::RevoluteTwist,
                x,
                twist,
                T::zero(),
                false,
            ),
            joint(
                "gripper",
                JointKind::GripperAperture,
                z,
                [T::zero(), deg(60.0)],
                T::zero(),
                true,
            ),
        ];
        // Structural mass is 0.6 g/mm over the 630 mm straight chain (378 g);
        // motors total 262 g. Torque limits are datasheet-style defaults.
        let link =
            |name: &str, length: f64, mass: f64, motor_mass: f64, limit: f64, motor: &str| {
                LinkSpec {
                    name: name.to_string(),
                    length: T::lit(length),
                    mass: T::lit(mass),
                    motor_mass: T::lit(motor_mass),
                    motor_torque_limit: T::lit(limit),
                    motor: motor.to_string(),
                }
            };
        let links = vec![
            link("shoulder-base", 0.0, 0.0, 62.0, 6865.0, "GX3370BLS"),
            link("upper", 160.0, 96.0, 55.0, 3432.0, "DS3235SG"),
            link("forearm", 140.0, 84.0, 48.0, 2942.0, "S53-20"),
            link("wrist-base", 0.0, 0.0, 48.0, 2942.0, "S53-20"),
            link("wrist", 80.0, 48.0, 20.0, 1961.0, "DC gear motor 1:130"),
            link("scissor", 0.0, 150.0, 20.0, 40.0, "2x GA12-N20"),
            link("gripper-mount", 0.0, 0.0, 0.0, 245.0, "none"),
            link("gripper", 0.0, 0.0, 9.0, 245.0, "SG92R"),
        ];
        let d = |v: [f64; 8], dwell: f64| Keyframe {
            values: v
                .iter()
                .enumerate()
                .map(|(i, &x)| if i == 5 { T::lit(x) } else { deg(x) })
                .collect(),
            dwell: T::lit(dwell),
        };
        // Authored approximations of the six transform steps.
        let compact = [0.0, -30.0, 105.0, 0.0, 105.0, 70.0, 0.0, 0.0];
        let expand = vec![
            d(compact, 0.2),
            d([0.0, -30.0, 105.0, 0.0, 45.0, 70.0, 0.0, 0.0], 0.2),
            d([0.0, -15.0, 60.0, 0.0, 0.0, 70.0, 0.0, 0.0], 0.2),
            d([0.0, 0.0, 0.0, 0.0, 0.0, 70.0, 0.0, 0.0], 0.2),
            d([0.0, 0.0, 0.0, 0.0, 0.0, 160.0, 0.0, 0.0], 0.2),
            d([0.0, 0.0, 0.0, 0.0, 0.0, 250.0, 0.0, 0.0], 0.0),
        ];
        let mut compact_state = d(compact, 0.0).values;
        compact_state[5] = ext_min;
        let mut expand = expand;
        expand[0].values[5] = ext_min;
        expand[1].values[5] = ext_min;
        expand[2].values[5] = ext_min;
        expand[3].values[5] = ext_min;
        expand[5].values[5] = ext_max;
        KinematicModel {
            schema_version: SCHEMA_VERSION,
            gripper_length: T::lit(80.0),
            base_pivot: Pose::identity(),
            scissor,
            joints,
            links,
            poses: Some(NamedPoses {
                compact: compact_state,
                expand,
            }),
        }
    }

    /// Parses and validates a TOML model document.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let doc: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| Error::Parse(e.to_string()))?;
        if let Some(v) = doc.get("schemaVersion") {
            match v.as_integer() {
                Some(1) => {}
                Some(other) => return Err(Error::UnsupportedSchema(other)),
                None => return Err(Error::Parse("schemaVersion must be an integer".into())),
            }
        }
        let missing = missing_fields(&doc);
        if !missing.is_empty() {
            return Err(Error::MissingFields(missing));
        }
        let model: KinematicModel<T> = toml::Value::Table(doc)
            .try_into()
            .map_err(|e: toml::de::Error| Error::Parse(e.to_string()))?;
        model.validate()?;
        Ok(model)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("model serializes to TOML")
    }

    pub fn validate(&self) -> Result<()> {
        let invalid = |msg: String| Err(Error::Validation(msg));
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::UnsupportedSchema(self.schema_version as i64));
        }
        if self.joints.is_empty() {
            return invalid("model has no joints".into());
        }
        if self.joints.len() != self.links.len() {
            return invalid(format!(
                "{} joints but {} links (links[i] must follow joints[i])",
                self.joints.len(),
                self.links.len()
            ));
        }
        for (i, j) in self.joints.iter().enumerate() {
            if j.name.is_empty() {
                return invalid(format!("joints[{i}] has an empty name"));
            }
            if self.joints[..i].iter().any(|o| o.name == j.name) {
                return invalid(format!("duplicate joint name {}", j.name));
            }
            if !(j.min() < j.max()) {
                return invalid(format!("limits.min ≥ limits.max on joint {}", j.name));
            }
            if !j.contains(j.home) {
                return invalid(format!("home outside limits on joint {}", j.name));
            }
            let norm = Vector3::from(j.axis).norm();
            if !((norm - T::one()).abs() <= T::unit_norm_tol()) {
                return invalid(format!(
                    "axis of joint {} is not unit norm ({norm})",
                    j.name
                ));
            }
            if matches!(
                j.kind,
                JointKind::PrismaticScissor | JointKind::GripperAperture
            ) && !j.implemented
            {
                return invalid(format!(
                    "joint {} of kind {:?} must be implemented",
                    j.name, j.kind
                ));
            }
        }
        let scissors = self
            .joints
            .iter()
            .filter(|j| j.kind == JointKind::PrismaticScissor)
            .count();
        if scissors != 1 {
            return invalid(format!(
                "exactly one prismatic-scissor joint required, found {scissors}"
            ));
        }
        for l in &self.links {
            if !(l.length >= T::zero()) {
                return invalid(format!("length < 0 on link {}", l.name));
            }
            if !(l.mass >= T::zero()) {
                return invalid(format!("mass < 0 on link {}", l.name));
            }
            if !(l.motor_mass >= T::zero()) {
                return invalid(format!("motorMass < 0 on link {}", l.name));
            }
            if !(l.motor_torque_limit > T::zero()) {
                return invalid(format!("motorTorqueLimit ≤ 0 on link {}", l.name));
            }
        }
        if !(self.gripper_length >= T::zero()) {
            return invalid("gripperLength < 0".into());
        }
        self.scissor.validate()?;
        let ext = self.extension_joint();
        let [lo, hi] = self.scissor.extension_range();
        let tol = T::validation_tol() * hi.abs().max(T::one());
        if (ext.min() - lo).abs() > tol || (ext.max() - hi).abs() > tol {
            return invalid(format!(
                "extension limits [{}, {}] disagree with scissor range [{lo}, {hi}]",
                ext.min(),
                ext.max()
            ));
        }
        self.base_pivot
            .check_orthonormal(T::lit(1e-9).max(T::validation_tol()))
            .map_err(|_| Error::Validation("basePivot rotation is not orthonormal".into()))?;
        if let Some(poses) = &self.poses {
            self.check_in_limits("poses.compact", &poses.compact)?;
            if poses.expand.len() < 2 {
                return invalid("poses.expand needs at least 2 keyframes".into());
            }
            for (i, k) in poses.expand.iter().enumerate() {
                self.check_in_limits(&format!("poses.expand[{i}]"), &k.values)?;
                if !(k.dwell >= T::zero()) {
                    return invalid(format!("poses.expand[{i}].dwell < 0"));
                }
            }
        }
        Ok(())
    }

    fn check_in_limits(&self, what: &str, values: &[T]) -> Result<()> {
        self.check_len(values.len())?;
        for (j, v) in self.joints.iter().zip(values) {
            if !j.contains(*v) {
                return Err(Error::Validation(format!(
                    "{what}: value {v} outside limits of joint {}",
                    j.name
                )));
            }
        }
        Ok(())
    }

    pub fn check_len(&self, n: usize) -> Result<()> {
        if n != self.joints.len() {
            return Err(Error::DimensionMismatch {
                expected: self.joints.len(),
                actual: n,
            });
        }
        Ok(())
    }

    pub fn dof(&self) -> usize {
        self.joints.len()
    }

    pub fn joint_index(&self, name: &str) -> Option<usize> {
        self.joints.iter().position(|j| j.name == name)
    }

    pub fn extension_index(&self) -> usize {
        self.joints
            .iter()
            .position(|j| j.kind == JointKind::PrismaticScissor)
            .expect("validated model has one extension joint")
    }

    pub fn extension_joint(&self) -> &JointSpec<T> {
        &self.joints[self.extension_index()]
    }

    /// Indices of joints that move frames and are fitted.
    pub fn active_joints(&self) -> Vec<usize> {
        (0..self.joints.len())
            .filter(|&i| self.joints[i].is_active())
            .collect()
    }

    pub fn total_mass(&self) -> T {
        self.links
            .iter()
            .fold(T::zero(), |acc, l| acc + l.mass + l.motor_mass)
    }

    /// Sum of fixed link lengths (everything except the variable extension).
    pub fn fixed_length(&self) -> T {
        self.links.iter().fold(T::zero(), |acc, l| acc + l.length)
    }

    /// Straight-chain distance to the extension tip at full extension.
    pub fn max_reach_tool_base(&self) -> T {
        self.fixed_length() + self.extension_joint().max()
    }

    pub fn home_state(&self) -> JointState<T> {
        JointState(self.joints.iter().map(|j| j.home).collect())
    }

    /// All revolute joints at zero, extension at `extension`, aperture at home.
    pub fn straight_state(&self, extension: T) -> JointState<T> {
        JointState(
            self.joints
                .iter()
                .map(|j| match j.kind {
                    JointKind::PrismaticScissor => extension,
                    JointKind::GripperAperture => j.home,
                    _ if !j.implemented => j.home,
                    _ => T::zero(),
                })
                .collect(),
        )
    }

    pub fn compact_state(&self) -> JointState<T> {
        match &self.poses {
            Some(p) => JointState(p.compact.clone()),
            None => self.home_state(),
        }
    }

    /// Expand keyframes; falls back to home → straight-extended.
    pub fn expand_keyframes(&self) -> Vec<Keyframe<T>> {
        match &self.poses {
            Some(p) => p.expand.clone(),
            None => vec![
                Keyframe {
                    values: self.home_state().0,
                    dwell: T::zero(),
                },
                Keyframe {
                    values: self.straight_state(self.extension_joint().max()).0,
                    dwell: T::zero(),
                },
            ],
        }
    }

    /// Clamps every value into its limits and pins unfitted joints at home.
    pub fn clamp_state(&self, state: &JointState<T>) -> Result<JointState<T>> {
        self.check_len(state.len())?;
        Ok(JointState(
            self.joints
                .iter()
                .zip(state.values())
                .map(|(j, &v)| j.clamp(v))
                .collect(),
        ))
    }

    pub fn check_state(&self, state: &JointState<T>) -> Result<()> {
        self.check_len(state.len())?;
        for (j, &v) in self.joints.iter().zip(state.values()) {
            if !j.contains(v) {
                return Err(Error::OutOfRange {
                    what: format!("joint {}", j.name),
                    value: v.to_f64(),
                    min: j.min().to_f64(),
                    max: j.max().to_f64(),
                });
            }
        }
        Ok(())
    }
}

impl<T: Real> Default for KinematicModel<T> {
    fn default() -> Self {
        Self::auglimb()
    }
}
