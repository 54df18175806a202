#![allow(dead_code)]

use auglimb::kinematics::chain_poses;
use auglimb::model::JointKind;
use auglimb::{JointState, KinematicModel};
use nalgebra::{DMatrix, Rotation3, Vector3};
use rand::Rng;

/// Uniform random state within limits; unfitted joints at home.
pub fn random_state<R: Rng>(model: &KinematicModel, rng: &mut R) -> JointState {
    JointState::new(
        model
            .joints
            .iter()
            .map(|j| {
                if j.implemented {
                    rng.random_range(j.min()..=j.max())
                } else {
                    j.home
                }
            })
            .collect(),
    )
}

/// Perturbs fitted pose joints by up to `angle` rad (revolute) or `mm` (extension), clamped.
pub fn perturb<R: Rng>(
    model: &KinematicModel,
    q: &JointState,
    angle: f64,
    mm: f64,
    rng: &mut R,
) -> JointState {
    let mut out = q.clone();
    for (i, j) in model.joints.iter().enumerate() {
        if !j.is_active() {
            continue;
        }
        let d = if j.kind == JointKind::PrismaticScissor {
            mm
        } else {
            angle
        };
        out[i] = (q[i] + rng.random_range(-d..=d)).clamp(j.min(), j.max());
    }
    out
}

/// Central finite-difference Jacobian of the tool frame, computed from
/// forward kinematics alone. Angular columns come from the rotation-log of
/// `R(q+h)·R(q−h)ᵀ`.
pub fn fd_jacobian(model: &KinematicModel, q: &JointState, use_tool_base: bool) -> DMatrix<f64> {
    let active = model.active_joints();
    let mut jac = DMatrix::zeros(6, active.len());
    let tip = |v: &[f64]| {
        let c = chain_poses(model, v);
        if use_tool_base {
            c.tool_base
        } else {
            c.tool
        }
    };
    for (c, &i) in active.iter().enumerate() {
        let h = 1e-6 * model.joints[i].range();
        let mut plus = q.values().to_vec();
        let mut minus = q.values().to_vec();
        plus[i] += h;
        minus[i] -= h;
        let (p, m) = (tip(&plus), tip(&minus));
        let dv: Vector3<f64> = (p.position - m.position) / (2.0 * h);
        let dw: Vector3<f64> = (p.rotation * m.rotation.inverse()).scaled_axis() / (2.0 * h);
        for r in 0..3 {
            jac[(r, c)] = dv[r];
            jac[(r + 3, c)] = dw[r];
        }
    }
    jac
}

/// Max absolute entry difference relative to the Jacobian's scale (floored at 1).
pub fn relative_error(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    let scale = a.amax().max(b.amax()).max(1.0);
    (a - b).amax() / scale
}

pub fn rotation_angle(a: &Rotation3<f64>, b: &Rotation3<f64>) -> f64 {
    (a * b.inverse()).angle()
}
