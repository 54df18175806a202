//! Forward kinematics, geometric Jacobian and damped-least-squares IK.

use indexmap::IndexMap;
use nalgebra::{DMatrix, DVector, Matrix3x1, Vector3, Vector6};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{JointKind, JointState, KinematicModel};
use crate::num::Real;
use crate::pose::Pose;

pub const TOOL: &str = "tool";
pub const TOOL_BASE: &str = "toolBase";
pub const BASE: &str = "base";

/// Poses along the chain for one configuration.
#[derive(Debug, Clone)]
pub struct ChainPoses<T: Real> {
    /// Frame at each joint origin, before that joint's motion is applied.
    pub joints: Vec<Pose<T>>,
    /// Extension tip.
    pub tool_base: Pose<T>,
    /// Frame after the last link.
    pub end: Pose<T>,
    /// `end` advanced by the gripper length.
    pub tool: Pose<T>,
}

impl<T: Real> ChainPoses<T> {
    /// Origin of the joint following `i`, or the chain end for the last joint.
    pub fn next_origin(&self, i: usize) -> Vector3<T> {
        self.joints
            .get(i + 1)
            .map_or(self.end.position, |p| p.position)
    }
}

/// Effective value of joint `i`: unfitted joints always sit at home.
fn effective<T: Real>(model: &KinematicModel<T>, i: usize, value: T) -> T {
    let j = &model.joints[i];
    if j.implemented {
        value
    } else {
        j.home
    }
}

/// Chain poses without limit checks or frame naming; the hot path for sampling.
pub fn chain_poses<T: Real>(model: &KinematicModel<T>, values: &[T]) -> ChainPoses<T> {
    let mut pose = model.base_pivot;
    let mut joints = Vec::with_capacity(model.joints.len());
    let mut tool_base = None;
    for (i, (joint, link)) in model.joints.iter().zip(&model.links).enumerate() {
        joints.push(pose);
        let q = effective(model, i, values[i]);
        match joint.kind {
            JointKind::RevoluteTwist | JointKind::RevoluteHinge => {
                pose = pose.rotated_about(&joint.unit_axis(), q);
            }
            JointKind::PrismaticScissor => {
                pose.position += pose.world_axis(&Vector3::from(joint.axis)) * q;
            }
            JointKind::GripperAperture => {}
        }
        pose = pose.advanced(link.length);
        if joint.kind == JointKind::PrismaticScissor {
            tool_base = Some(pose);
        }
    }
    let tool = pose.advanced(model.gripper_length);
    ChainPoses {
        joints,
        tool_base: tool_base.unwrap_or(pose),
        end: pose,
        tool,
    }
}

/// Named frame poses: `base`, each joint, `toolBase` and `tool`.
pub fn forward_kinematics<T: Real>(
    model: &KinematicModel<T>,
    state: &JointState<T>,
) -> Result<IndexMap<String, Pose<T>>> {
    model.check_state(state)?;
    Ok(named_frames(model, &chain_poses(model, state.values())))
}

/// Like [`forward_kinematics`] but only checks dimensions, not limits.
pub fn forward_kinematics_unchecked<T: Real>(
    model: &KinematicModel<T>,
    state: &JointState<T>,
) -> Result<IndexMap<String, Pose<T>>> {
    model.check_len(state.len())?;
    Ok(named_frames(model, &chain_poses(model, state.values())))
}

fn named_frames<T: Real>(
    model: &KinematicModel<T>,
    chain: &ChainPoses<T>,
) -> IndexMap<String, Pose<T>> {
    let mut frames = IndexMap::with_capacity(model.joints.len() + 3);
    frames.insert(BASE.to_string(), model.base_pivot);
    for (j, p) in model.joints.iter().zip(&chain.joints) {
        frames.insert(j.name.clone(), *p);
    }
    frames.insert(TOOL_BASE.to_string(), chain.tool_base);
    frames.insert(TOOL.to_string(), chain.tool);
    frames
}

/// Which tip an operation refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum TipFrame {
    /// Extension tip, gripper excluded.
    ToolBase,
    /// Gripper tip.
    #[default]
    Tool,
}

impl TipFrame {
    pub fn name(self) -> &'static str {
        match self {
            TipFrame::ToolBase => TOOL_BASE,
            TipFrame::Tool => TOOL,
        }
    }

    pub fn from_include_gripper(include: bool) -> Self {
        if include {
            TipFrame::Tool
        } else {
            TipFrame::ToolBase
        }
    }

    pub fn pose<T: Real>(self, chain: &ChainPoses<T>) -> Pose<T> {
        match self {
            TipFrame::ToolBase => chain.tool_base,
            TipFrame::Tool => chain.tool,
        }
    }
}

/// Distance from the base pivot to the tip frame.
pub fn reach<T: Real>(
    model: &KinematicModel<T>,
    state: &JointState<T>,
    tip: TipFrame,
) -> Result<T> {
    model.check_len(state.len())?;
    let chain = chain_poses(model, state.values());
    Ok((tip.pose(&chain).position - model.base_pivot.position).norm())
}

/// Parameterization of the extension column.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ExtensionParam {
    /// Extension length in millimeters (unit-magnitude column).
    #[default]
    Millimeters,
    /// Leadscrew travel; the column is scaled by the scissor transmission gain.
    ActuatorTravel,
}

/// 6×n geometric Jacobian; rows are linear (mm) then angular (rad) velocity.
#[derive(Debug, Clone, PartialEq)]
pub struct Jacobian<T: Real> {
    pub matrix: DMatrix<T>,
    /// Model joint index of each column.
    pub columns: Vec<usize>,
}

enum Target {
    Joint(usize),
    ToolBase,
    Tool,
}

fn resolve_frame<T: Real>(model: &KinematicModel<T>, frame: &str) -> Result<Target> {
    match frame {
        TOOL => Ok(Target::Tool),
        TOOL_BASE => Ok(Target::ToolBase),
        name => model
            .joint_index(name)
            .map(Target::Joint)
            .ok_or_else(|| Error::UnknownFrame(name.to_string())),
    }
}

pub fn geometric_jacobian<T: Real>(
    model: &KinematicModel<T>,
    state: &JointState<T>,
    frame: &str,
) -> Result<Jacobian<T>> {
    geometric_jacobian_with(model, state, frame, ExtensionParam::Millimeters)
}

pub fn geometric_jacobian_with<T: Real>(
    model: &KinematicModel<T>,
    state: &JointState<T>,
    frame: &str,
    param: ExtensionParam,
) -> Result<Jacobian<T>> {
    let target = resolve_frame(model, frame)?;
    model.check_state(state)?;
    let chain = chain_poses(model, state.values());
    let ext = model.extension_index();
    let (point, last) = match target {
        Target::Tool => (chain.tool.position, model.joints.len()),
        Target::ToolBase => (chain.tool_base.position, ext + 1),
        Target::Joint(k) => (chain.joints[k].position, k),
    };
    let columns = model.active_joints();
    let mut matrix = DMatrix::zeros(6, columns.len());
    for (c, &i) in columns.iter().enumerate() {
        if i >= last {
            continue;
        }
        let joint = &model.joints[i];
        let frame = &chain.joints[i];
        let axis = frame.world_axis(&joint.unit_axis().into_inner());
        let (v, w) = match joint.kind {
            JointKind::PrismaticScissor => {
                let gain = match param {
                    ExtensionParam::Millimeters => T::one(),
                    ExtensionParam::ActuatorTravel => {
                        let theta = model.scissor.theta_of_extension(state[i])?;
                        model.scissor.gain_at_theta(theta)
                    }
                };
                (axis * gain, Vector3::zeros())
            }
            _ => (axis.cross(&(point - frame.position)), axis),
        };
        matrix
            .fixed_view_mut::<3, 1>(0, c)
            .copy_from(&Matrix3x1::from(v));
        matrix
            .fixed_view_mut::<3, 1>(3, c)
            .copy_from(&Matrix3x1::from(w));
    }
    Ok(Jacobian { matrix, columns })
}

#[derive(Debug, Clone, PartialEq)]
pub struct IkRequest<T: Real> {
    pub target: Pose<T>,
    pub seed: JointState<T>,
    pub frame: TipFrame,
    pub position_weight: T,
    /// Zero solves for position only; rotation is then ignored for convergence.
    pub orientation_weight: T,
    pub damping: T,
    pub max_iterations: usize,
    pub pos_tol: T,
    pub rot_tol: T,
}

impl<T: Real> IkRequest<T> {
    pub fn new(target: Pose<T>, seed: JointState<T>) -> Self {
        IkRequest {
            target,
            seed,
            frame: TipFrame::Tool,
            position_weight: T::one(),
            orientation_weight: T::lit(100.0),
            damping: T::lit(2.0),
            max_iterations: 200,
            pos_tol: T::lit(1e-3),
            rot_tol: T::lit(1e-4),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Validation(format!("ik request: {m}")));
        if !(self.pos_tol > T::zero() && self.rot_tol > T::zero()) {
            return bad("posTol and rotTol must be > 0");
        }
        if self.max_iterations < 1 {
            return bad("maxIterations must be ≥ 1");
        }
        if !(self.position_weight >= T::zero() && self.orientation_weight >= T::zero()) {
            return bad("weights must be ≥ 0");
        }
        if !(self.damping >= T::zero()) {
            return bad("damping must be ≥ 0");
        }
        self.target
            .check_orthonormal(T::lit(1e-9).max(T::validation_tol()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
pub struct IkResiduals<T: Real> {
    /// mm
    pub position: T,
    /// rad
    pub rotation: T,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IkSolution<T: Real> {
    pub state: JointState<T>,
    pub iterations: usize,
    pub residuals: IkResiduals<T>,
}

/// One DLS step. Columns of joints resting on a limit with the step pushing
/// outward are dropped and the step recomputed, so the remaining joints
/// take up the motion instead of being cancelled by clamping.
fn damped_step<T: Real>(
    model: &KinematicModel<T>,
    q: &JointState<T>,
    columns: &[usize],
    jw: &DMatrix<T>,
    ew: &DVector<T>,
    lambda: T,
) -> Result<DVector<T>> {
    let mut jw = jw.clone();
    let mut locked = vec![false; columns.len()];
    loop {
        let mut a = &jw * jw.transpose();
        for d in 0..6 {
            a[(d, d)] += lambda * lambda;
        }
        let chol = a.cholesky().ok_or_else(|| {
            Error::Numerical(
                "JJᵀ + λ²I is not positive definite (rank-deficient Jacobian with λ = 0)".into(),
            )
        })?;
        let mut step = jw.transpose() * chol.solve(ew);
        if step.iter().any(|x| !x.is_finite()) {
            return Err(Error::Numerical("non-finite IK step".into()));
        }
        let mut changed = false;
        for (c, &i) in columns.iter().enumerate() {
            let j = &model.joints[i];
            let pushing = (q[i] <= j.min() && step[c] < T::zero())
                || (q[i] >= j.max() && step[c] > T::zero());
            if !locked[c] && pushing {
                locked[c] = true;
                jw.column_mut(c).fill(T::zero());
                changed = true;
            }
        }
        if !changed {
            for (c, l) in locked.iter().enumerate() {
                if *l {
                    step[c] = T::zero();
                }
            }
            return Ok(step);
        }
    }
}

struct Residual<T: Real> {
    error: Vector6<T>,
    position: T,
    rotation: T,
}

fn residual<T: Real>(model: &KinematicModel<T>, req: &IkRequest<T>, q: &[T]) -> Residual<T> {
    let chain = chain_poses(model, q);
    let pose = req.frame.pose(&chain);
    let dp = req.target.position - pose.position;
    let dr = pose.rotation_error_to(&req.target);
    let error = Vector6::new(dp.x, dp.y, dp.z, dr.x, dr.y, dr.z);
    Residual {
        error,
        position: dp.norm(),
        rotation: dr.norm(),
    }
}

/// Damped least squares: `Δq = Jᵀ(JJᵀ + λ²I)⁻¹e` on the weighted 6-vector
/// error, clamping to limits after every step. `req.damping` is the starting
/// λ; it shrinks after steps that reduce the weighted error and grows after
/// rejected ones, so the returned state is always the best one visited.
/// Unfitted and aperture joints are held at their seed values.
pub fn solve_ik<T: Real>(model: &KinematicModel<T>, req: &IkRequest<T>) -> Result<IkSolution<T>> {
    req.validate()?;
    model.check_state(&req.seed)?;
    let mut q = model.clamp_state(&req.seed)?;
    let use_rotation = req.orientation_weight > T::zero();
    let weights = Vector6::new(
        req.position_weight,
        req.position_weight,
        req.position_weight,
        req.orientation_weight,
        req.orientation_weight,
        req.orientation_weight,
    );
    let done =
        |r: &Residual<T>| r.position <= req.pos_tol && (!use_rotation || r.rotation <= req.rot_tol);
    let score = |r: &Residual<T>| r.error.component_mul(&weights).norm();

    let mut r = residual(model, req, q.values());
    let mut current = score(&r);
    let mut lambda = req.damping;
    let lambda_floor = req.damping * T::lit(1e-4);
    let lambda_ceiling = req.damping * T::lit(1e4);
    for iteration in 0..req.max_iterations {
        if done(&r) {
            return Ok(IkSolution {
                state: q,
                iterations: iteration,
                residuals: IkResiduals {
                    position: r.position,
                    rotation: r.rotation,
                    converged: true,
                },
            });
        }
        let jac = geometric_jacobian(model, &q, req.frame.name())?;
        let mut jw = jac.matrix;
        for (row, w) in weights.iter().enumerate() {
            jw.row_mut(row).scale_mut(*w);
        }
        let ew = DVector::from_iterator(6, r.error.component_mul(&weights).iter().copied());
        let step = damped_step(model, &q, &jac.columns, &jw, &ew, lambda)?;
        let mut trial = q.clone();
        for (c, &i) in jac.columns.iter().enumerate() {
            trial[i] = model.joints[i].clamp(q[i] + step[c]);
        }
        let tr = residual(model, req, trial.values());
        let s = score(&tr);
        // Levenberg-style schedule: relax damping after progress, stiffen on a rejected step.
        if s < current {
            q = trial;
            r = tr;
            current = s;
            lambda = (lambda * T::lit(0.3)).max(lambda_floor);
        } else {
            lambda = (lambda * T::lit(4.0)).min(lambda_ceiling);
        }
    }
    Ok(IkSolution {
        state: q,
        iterations: req.max_iterations,
        residuals: IkResiduals {
            position: r.position,
            rotation: r.rotation,
            converged: done(&r),
        },
    })
}
