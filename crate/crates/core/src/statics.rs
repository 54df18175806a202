//! Static gravity loading and tip payload capacity.
//!
//! Units: masses in grams, gravity in mm/s², torques in N·mm
//! (1 g · mm/s² = 1e-6 N). For the extension joint the "torque" is the axial
//! force in N along the extension axis, compared against the link's
//! `motorTorqueLimit` read as a force limit.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kinematics::{chain_poses, ChainPoses};
use crate::model::{JointKind, JointState, KinematicModel};
use crate::num::Real;

pub const STANDARD_GRAVITY_MM_S2: f64 = 9810.0;
pub const LIMITS_PROVENANCE: &str = "limits: configured";

fn newtons_per_gram_mm_s2<T: Real>() -> T {
    T::lit(1e-6)
}

pub fn default_gravity<T: Real>() -> Vector3<T> {
    Vector3::new(T::zero(), T::zero(), -T::lit(STANDARD_GRAVITY_MM_S2))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
pub struct JointLoad<T: Real> {
    pub joint_name: String,
    pub kind: JointKind,
    /// Load from the limb's own masses.
    pub gravity_torque: T,
    /// Load from the tip payload.
    pub payload_torque: T,
    /// Load per gram of tip payload.
    pub payload_arm: T,
    pub limit: T,
    /// `limit − |gravityTorque + payloadTorque|`
    pub margin: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
pub struct StaticsReport<T: Real> {
    pub per_joint: Vec<JointLoad<T>>,
    /// Grams; infinite when no joint is loaded by a tip mass.
    pub max_payload: T,
    pub binding_joint: Option<String>,
    pub tip_load: T,
    pub configuration: JointState<T>,
    pub gravity: [T; 3],
    pub provenance: String,
}

struct PointMass<T: Real> {
    /// First joint index whose motion moves this mass.
    owner: usize,
    position: Vector3<T>,
    grams: T,
}

fn point_masses<T: Real>(model: &KinematicModel<T>, chain: &ChainPoses<T>) -> Vec<PointMass<T>> {
    let mut masses = Vec::with_capacity(2 * model.links.len());
    for (i, link) in model.links.iter().enumerate() {
        let origin = chain.joints[i].position;
        let mid = (origin + chain.next_origin(i)) * T::lit(0.5);
        masses.push(PointMass {
            owner: i,
            position: origin,
            grams: link.motor_mass,
        });
        masses.push(PointMass {
            owner: i,
            position: mid,
            grams: link.mass,
        });
    }
    masses
}

/// Load about (revolute) or along (prismatic) joint `i` of a mass at `p`.
/// A joint carries the masses it moves, so its own link counts too.
fn unit_load<T: Real>(
    model: &KinematicModel<T>,
    chain: &ChainPoses<T>,
    i: usize,
    p: &Vector3<T>,
    gravity: &Vector3<T>,
) -> T {
    let joint = &model.joints[i];
    let frame = &chain.joints[i];
    let axis = frame.world_axis(&joint.unit_axis().into_inner());
    let force = gravity * newtons_per_gram_mm_s2::<T>();
    match joint.kind {
        JointKind::PrismaticScissor => axis.dot(&force),
        _ => axis.dot(&(p - frame.position).cross(&force)),
    }
}

fn loaded_joints<T: Real>(model: &KinematicModel<T>) -> impl Iterator<Item = usize> + '_ {
    (0..model.joints.len()).filter(|&i| model.joints[i].is_active())
}

/// Per-joint static loads with `tip_load` grams at the tool point.
pub fn gravity_torques<T: Real>(
    model: &KinematicModel<T>,
    state: &JointState<T>,
    tip_load: T,
    gravity: Vector3<T>,
) -> Result<Vec<JointLoad<T>>> {
    model.check_len(state.len())?;
    if !(tip_load >= T::zero()) {
        return Err(Error::Validation("tip load must be ≥ 0".into()));
    }
    let chain = chain_poses(model, state.values());
    let masses = point_masses(model, &chain);
    let tip = chain.tool.position;
    Ok(loaded_joints(model)
        .map(|i| {
            let gravity_torque = masses
                .iter()
                .filter(|m| m.owner >= i)
                .fold(T::zero(), |acc, m| {
                    acc + m.grams * unit_load(model, &chain, i, &m.position, &gravity)
                });
            let payload_arm = unit_load(model, &chain, i, &tip, &gravity);
            let payload_torque = payload_arm * tip_load;
            let limit = model.links[i].motor_torque_limit;
            JointLoad {
                joint_name: model.joints[i].name.clone(),
                kind: model.joints[i].kind,
                gravity_torque,
                payload_torque,
                payload_arm,
                limit,
                margin: limit - (gravity_torque + payload_torque).abs(),
            }
        })
        .collect())
}

/// Largest tip mass such that every joint stays within its limit. Loads are
/// affine in the payload, so each joint's bound is closed-form.
pub fn max_payload<T: Real>(
    model: &KinematicModel<T>,
    state: &JointState<T>,
    gravity: Vector3<T>,
) -> Result<StaticsReport<T>> {
    let unloaded = gravity_torques(model, state, T::zero(), gravity)?;
    let mut best = T::lit(f64::INFINITY);
    let mut binding: Option<usize> = None;
    for (k, row) in unloaded.iter().enumerate() {
        let bound = if row.margin <= T::zero() {
            T::zero()
        } else if row.payload_arm > T::zero() {
            (row.limit - row.gravity_torque) / row.payload_arm
        } else if row.payload_arm < T::zero() {
            (row.limit + row.gravity_torque) / -row.payload_arm
        } else {
            continue;
        };
        let bound = bound.max(T::zero());
        let tighter = match binding {
            None => true,
            Some(b) => {
                if bound < best {
                    true
                } else {
                    // saturated joints: report the one exceeded most
                    bound == T::zero() && row.margin < unloaded[b].margin
                }
            }
        };
        if tighter {
            best = bound;
            binding = Some(k);
        }
    }
    let tip_load = if binding.is_some() { best } else { T::zero() };
    let per_joint = if binding.is_some() {
        gravity_torques(model, state, tip_load, gravity)?
    } else {
        unloaded
    };
    let binding_joint = binding.map(|k| per_joint[k].joint_name.clone());
    Ok(StaticsReport {
        max_payload: best,
        tip_load,
        per_joint,
        binding_joint,
        configuration: state.clone(),
        gravity: [gravity.x, gravity.y, gravity.z],
        provenance: LIMITS_PROVENANCE.to_string(),
    })
}

/// Report at a fixed tip load (no payload search).
pub fn statics_at_load<T: Real>(
    model: &KinematicModel<T>,
    state: &JointState<T>,
    tip_load: T,
    gravity: Vector3<T>,
) -> Result<StaticsReport<T>> {
    let capacity = max_payload(model, state, gravity)?;
    let per_joint = gravity_torques(model, state, tip_load, gravity)?;
    Ok(StaticsReport {
        per_joint,
        tip_load,
        ..capacity
    })
}

/// The straight chain rotated so it lies along gravity (`shoulder-t` at π/2).
pub fn hanging_state<T: Real>(model: &KinematicModel<T>, extension: T) -> JointState<T> {
    let mut s = model.straight_state(extension);
    if let Some(i) = model
        .joints
        .iter()
        .position(|j| j.kind == JointKind::RevoluteHinge && j.implemented)
    {
        s[i] = T::frac_pi_2();
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    type M = KinematicModel<f64>;

    fn g() -> Vector3<f64> {
        default_gravity()
    }

    #[test]
    fn hanging_chain_has_no_hinge_torque() {
        let m = M::auglimb();
        let s = hanging_state(&m, 250.0);
        let rows = gravity_torques(&m, &s, 0.0, g()).unwrap();
        for r in rows.iter().filter(|r| r.kind.is_revolute()) {
            assert!(
                r.gravity_torque.abs() < 1e-9,
                "{} {}",
                r.joint_name,
                r.gravity_torque
            );
        }
        let ext = rows
            .iter()
            .find(|r| r.kind == JointKind::PrismaticScissor)
            .unwrap();
        assert!(ext.gravity_torque.abs() > 0.0);
    }

    #[test]
    fn lever_rule() {
        // strip the model to a single 100 g mass 100 mm from the shoulder hinge
        let mut m = M::auglimb();
        for l in &mut m.links {
            l.mass = 0.0;
            l.motor_mass = 0.0;
        }
        m.links[1].length = 200.0;
        m.links[1].mass = 100.0;
        let s = m.straight_state(70.0);
        let rows = gravity_torques(&m, &s, 0.0, g()).unwrap();
        let shoulder = rows.iter().find(|r| r.joint_name == "shoulder-t").unwrap();
        assert_relative_eq!(shoulder.gravity_torque.abs(), 98.1, epsilon = 1e-9);
    }

    #[test]
    fn negative_tip_load_rejected() {
        let m = M::auglimb();
        assert!(gravity_torques(&m, &m.home_state(), -1.0, g()).is_err());
    }

    #[test]
    fn binding_is_shoulder_hinge_when_horizontal() {
        let m = M::auglimb();
        let r = max_payload(&m, &m.straight_state(250.0), g()).unwrap();
        assert_eq!(r.binding_joint.as_deref(), Some("shoulder-t"));
        assert!(r.max_payload > 0.0 && r.max_payload.is_finite());
        let min_margin = r
            .per_joint
            .iter()
            .map(|j| j.margin)
            .fold(f64::INFINITY, f64::min);
        assert!(min_margin.abs() < 1e-6);
        assert_eq!(r.provenance, LIMITS_PROVENANCE);
    }

    #[test]
    fn saturated_limits_give_zero_payload() {
        let mut m = M::auglimb();
        let s = m.straight_state(250.0);
        let rows = gravity_torques(&m, &s, 0.0, g()).unwrap();
        for r in &rows {
            let i = m.joint_index(&r.joint_name).unwrap();
            if r.gravity_torque.abs() > 0.0 {
                m.links[i].motor_torque_limit = r.gravity_torque.abs();
            }
        }
        let rep = max_payload(&m, &s, g()).unwrap();
        assert_eq!(rep.max_payload, 0.0);
        assert!(rep.binding_joint.is_some());
    }

    #[test]
    fn zero_gravity_is_unbounded() {
        let m = M::auglimb();
        let rep = max_payload(&m, &m.home_state(), Vector3::zeros()).unwrap();
        assert!(rep.max_payload.is_infinite());
        assert_eq!(rep.binding_joint, None);
    }
}
