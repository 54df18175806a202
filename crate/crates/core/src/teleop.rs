//! Wizard-of-Oz teleoperation session.
//!
//! A [`Session`] is a tick-driven state machine. Commands only change
//! targets; [`Session::tick`] is the single place joint values move, each by
//! at most `rateLimit / tickRate` per tick. The JSON wire types used by the
//! service and the browser console live here too.

use serde::{Deserialize, Serialize};

use crate::kinematics::{chain_poses, solve_ik, TipFrame};
use crate::model::{JointKind, Keyframe};
use crate::Pose;
use crate::{IkRequest, JointState, KinematicModel};

pub const DEFAULT_TICK_RATE_HZ: f64 = 50.0;
pub const DEFAULT_REVOLUTE_RATE_DEG_S: f64 = 60.0;
pub const DEFAULT_EXTENSION_RATE_MM_S: f64 = 40.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Idle,
    Jogging,
    IkTracking,
    MacroRunning,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MacroName {
    Expand,
    Collapse,
}

/// Keyframe sequence between the stowed and the extended configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct TransformMacro {
    pub name: MacroName,
    pub keyframes: Vec<Keyframe<f64>>,
}

impl TransformMacro {
    pub fn expand(model: &KinematicModel) -> Self {
        TransformMacro {
            name: MacroName::Expand,
            keyframes: model.expand_keyframes(),
        }
    }

    /// Expand keyframes in reverse order.
    pub fn collapse(model: &KinematicModel) -> Self {
        let mut keyframes = model.expand_keyframes();
        keyframes.reverse();
        TransformMacro {
            name: MacroName::Collapse,
            keyframes,
        }
    }

    pub fn named(model: &KinematicModel, name: MacroName) -> Self {
        match name {
            MacroName::Expand => Self::expand(model),
            MacroName::Collapse => Self::collapse(model),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "camelCase")]
pub enum ClientMessage {
    /// Set one joint's target (rad, or mm for the extension).
    Jog {
        joint: String,
        target: f64,
    },
    /// Tool pose target; rotation is row-major.
    PoseTarget {
        position: [f64; 3],
        rotation: [f64; 9],
    },
    Macro {
        name: MacroName,
    },
    Stop {},
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TipPose {
    pub position: [f64; 3],
    pub rotation: [f64; 9],
}

impl From<Pose> for TipPose {
    fn from(p: Pose) -> Self {
        TipPose {
            position: [p.position.x, p.position.y, p.position.z],
            rotation: p.rotation_row_major(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct StateUpdate {
    /// Session time in seconds (ticks / tickRate).
    pub t: f64,
    pub joints: Vec<f64>,
    pub tip_pose: TipPose,
    /// Tool (gripper tip) distance from the base pivot, mm.
    pub reach: f64,
    pub mode: Mode,
    pub macro_progress: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "camelCase")]
pub enum ServerMessage {
    State(StateUpdate),
    Error {
        code: String,
        detail: String,
    },
    #[serde(rename_all = "camelCase")]
    IkFailed {
        pos_residual: f64,
        rot_residual: f64,
    },
    /// Hello sent on connect so clients render from the served geometry.
    #[serde(rename_all = "camelCase")]
    Model {
        model: Box<KinematicModel>,
        tick_rate: f64,
        rate_limits: Vec<f64>,
    },
}

pub mod codes {
    pub const BAD_MESSAGE: &str = "badMessage";
    pub const UNKNOWN_JOINT: &str = "unknownJoint";
    pub const BAD_POSE: &str = "badPose";
    pub const BUSY: &str = "busy";
}

impl ServerMessage {
    pub fn error(code: &str, detail: impl Into<String>) -> Self {
        ServerMessage::Error {
            code: code.to_string(),
            detail: detail.into(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("server messages serialize")
    }
}

/// Parses one text frame; malformed input becomes a `badMessage` reply.
#[allow(clippy::result_large_err)]
pub fn parse_client_message(text: &str) -> Result<ClientMessage, ServerMessage> {
    serde_json::from_str(text).map_err(|e| ServerMessage::error(codes::BAD_MESSAGE, e.to_string()))
}

#[derive(Debug, Clone)]
struct MacroRun {
    transform: TransformMacro,
    index: usize,
    /// Ticks left to hold the current keyframe once reached.
    dwell_left: Option<u64>,
}

#[derive(Debug, Clone)]
pub struct Session {
    model: KinematicModel,
    current: JointState,
    targets: Vec<f64>,
    rate_limits: Vec<f64>,
    tick_rate: f64,
    mode: Mode,
    macro_run: Option<MacroRun>,
    macro_progress: f64,
    ticks: u64,
}

/// Default per-joint speed: 60°/s for rotary joints, 40 mm/s for the extension.
pub fn default_rate_limits(model: &KinematicModel) -> Vec<f64> {
    model
        .joints
        .iter()
        .map(|j| match j.kind {
            JointKind::PrismaticScissor => DEFAULT_EXTENSION_RATE_MM_S,
            _ => DEFAULT_REVOLUTE_RATE_DEG_S.to_radians(),
        })
        .collect()
}

impl Session {
    /// Session starting in the model's compact pose at the default tick rate.
    pub fn new(model: KinematicModel) -> Self {
        let start = model.compact_state();
        Self::with_state(model, start, DEFAULT_TICK_RATE_HZ)
    }

    pub fn with_state(model: KinematicModel, start: JointState, tick_rate: f64) -> Self {
        assert!(tick_rate > 0.0, "tick rate must be positive");
        let current = model
            .clamp_state(&start)
            .expect("start state matches model");
        let rate_limits = default_rate_limits(&model);
        Session {
            targets: current.0.clone(),
            current,
            rate_limits,
            tick_rate,
            mode: Mode::Idle,
            macro_run: None,
            macro_progress: 0.0,
            ticks: 0,
            model,
        }
    }

    pub fn set_rate_limits(&mut self, limits: Vec<f64>) {
        assert_eq!(limits.len(), self.model.dof());
        assert!(limits.iter().all(|r| *r > 0.0));
        self.rate_limits = limits;
    }

    pub fn model(&self) -> &KinematicModel {
        &self.model
    }

    pub fn current(&self) -> &JointState {
        &self.current
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    pub fn rate_limits(&self) -> &[f64] {
        &self.rate_limits
    }

    pub fn tick_rate(&self) -> f64 {
        self.tick_rate
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn time(&self) -> f64 {
        self.ticks as f64 / self.tick_rate
    }

    pub fn hello(&self) -> ServerMessage {
        ServerMessage::Model {
            model: Box::new(self.model.clone()),
            tick_rate: self.tick_rate,
            rate_limits: self.rate_limits.clone(),
        }
    }

    fn set_target(&mut self, i: usize, value: f64) {
        self.targets[i] = self.model.joints[i].clamp(value);
    }

    /// Applies one client command. Returns a reply only for rejected commands.
    pub fn command(&mut self, msg: ClientMessage) -> Option<ServerMessage> {
        match msg {
            ClientMessage::Jog { joint, target } => {
                let Some(i) = self.model.joint_index(&joint) else {
                    return Some(ServerMessage::error(codes::UNKNOWN_JOINT, joint));
                };
                if !target.is_finite() {
                    return Some(ServerMessage::error(
                        codes::BAD_MESSAGE,
                        "target must be finite",
                    ));
                }
                self.macro_run = None;
                self.set_target(i, target);
                self.mode = Mode::Jogging;
                None
            }
            ClientMessage::PoseTarget { position, rotation } => {
                let target = match Pose::try_from_parts(position, rotation) {
                    Ok(p) if position.iter().all(|x| x.is_finite()) => p,
                    Ok(_) => {
                        return Some(ServerMessage::error(codes::BAD_POSE, "non-finite position"))
                    }
                    Err(e) => return Some(ServerMessage::error(codes::BAD_POSE, e.to_string())),
                };
                let mut req = IkRequest::new(target, self.current.clone());
                req.frame = TipFrame::Tool;
                match solve_ik(&self.model, &req) {
                    Ok(sol) if sol.residuals.converged => {
                        self.macro_run = None;
                        for i in 0..self.targets.len() {
                            self.set_target(i, sol.state[i]);
                        }
                        self.mode = Mode::IkTracking;
                        None
                    }
                    Ok(sol) => Some(ServerMessage::IkFailed {
                        pos_residual: sol.residuals.position,
                        rot_residual: sol.residuals.rotation,
                    }),
                    Err(e) => Some(ServerMessage::error(codes::BAD_POSE, e.to_string())),
                }
            }
            ClientMessage::Macro { name } => {
                if self.macro_run.is_some() {
                    return Some(ServerMessage::error(
                        codes::BUSY,
                        "a transform macro is already running",
                    ));
                }
                let transform = TransformMacro::named(&self.model, name);
                self.macro_run = Some(MacroRun {
                    transform,
                    index: 0,
                    dwell_left: None,
                });
                self.macro_progress = 0.0;
                self.mode = Mode::MacroRunning;
                None
            }
            ClientMessage::Stop {} => {
                self.macro_run = None;
                self.targets = self.current.0.clone();
                self.mode = Mode::Idle;
                None
            }
        }
    }

    fn at_targets(&self) -> bool {
        self.current.values() == self.targets.as_slice()
    }

    /// Installs macro keyframe targets and advances through reached keyframes.
    fn advance_macro(&mut self) {
        let Some(mut run) = self.macro_run.take() else {
            return;
        };
        let count = run.transform.keyframes.len();
        loop {
            let key = &run.transform.keyframes[run.index];
            for i in 0..self.targets.len() {
                self.targets[i] = self.model.joints[i].clamp(key.values[i]);
            }
            if !self.at_targets() {
                break;
            }
            let left = *run
                .dwell_left
                .get_or_insert((key.dwell * self.tick_rate).round().max(0.0) as u64);
            if left > 0 {
                run.dwell_left = Some(left - 1);
                break;
            }
            run.index += 1;
            run.dwell_left = None;
            if run.index == count {
                self.macro_progress = 1.0;
                self.mode = Mode::Idle;
                return;
            }
        }
        self.macro_progress = run.index as f64 / count as f64;
        self.macro_run = Some(run);
    }

    /// Advances the session by one tick and reports the resulting state.
    pub fn tick(&mut self) -> StateUpdate {
        self.advance_macro();
        let dt = 1.0 / self.tick_rate;
        for i in 0..self.targets.len() {
            let joint = &self.model.joints[i];
            if !joint.implemented {
                self.current[i] = joint.home;
                continue;
            }
            let max_step = self.rate_limits[i] * dt;
            let delta = self.targets[i] - self.current[i];
            let next = if delta.abs() <= max_step {
                self.targets[i]
            } else {
                self.current[i] + max_step.copysign(delta)
            };
            self.current[i] = joint.clamp(next);
        }
        self.ticks += 1;
        if self.macro_run.is_none() && self.at_targets() {
            self.mode = Mode::Idle;
        }
        self.snapshot()
    }

    pub fn snapshot(&self) -> StateUpdate {
        let chain = chain_poses(&self.model, self.current.values());
        let reach = (chain.tool.position - self.model.base_pivot.position).norm();
        StateUpdate {
            t: self.time(),
            joints: self.current.0.clone(),
            tip_pose: chain.tool.into(),
            reach,
            mode: self.mode,
            macro_progress: self.macro_progress,
        }
    }

    /// Ticks until the session is idle or `max_ticks` elapse; returns ticks run.
    pub fn run_until_idle(&mut self, max_ticks: u64) -> u64 {
        for n in 0..max_ticks {
            if self.mode == Mode::Idle && self.macro_run.is_none() && self.at_targets() {
                return n;
            }
            self.tick();
        }
        max_ticks
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn session() -> Session {
        Session::new(KinematicModel::auglimb())
    }

    #[test]
    fn idle_fixed_point() {
        let mut s = session();
        let before = s.current().clone();
        let u = s.tick();
        assert_eq!(s.current(), &before);
        assert_eq!(u.mode, Mode::Idle);
    }

    #[test]
    fn one_degree_per_tick() {
        let mut s = session();
        s.set_rate_limits(vec![50f64.to_radians(); 8]);
        let start = s.current()[2];
        s.command(ClientMessage::Jog {
            joint: "elbow".into(),
            target: start - 10f64.to_radians(),
        });
        let u = s.tick();
        assert_relative_eq!(start - u.joints[2], 1f64.to_radians(), epsilon = 1e-12);
        assert_eq!(u.mode, Mode::Jogging);
    }

    #[test]
    fn jog_extension_clamped() {
        let mut s = session();
        s.command(ClientMessage::Jog {
            joint: "extension".into(),
            target: 300.0,
        });
        assert_relative_eq!(s.targets()[5], 250.0, epsilon = 1e-9);
    }

    #[test]
    fn jog_unknown_joint() {
        let mut s = session();
        let reply = s.command(ClientMessage::Jog {
            joint: "tail".into(),
            target: 1.0,
        });
        assert!(
            matches!(reply, Some(ServerMessage::Error { code, .. }) if code == codes::UNKNOWN_JOINT)
        );
    }

    #[test]
    fn expand_reaches_full_reach() {
        let mut s = session();
        assert_eq!(
            s.command(ClientMessage::Macro {
                name: MacroName::Expand
            }),
            None
        );
        let n = s.run_until_idle(10_000);
        assert!(n < 10_000);
        let u = s.snapshot();
        assert_eq!(u.reach, 710.0);
        assert_eq!(u.macro_progress, 1.0);
    }

    #[test]
    fn macro_while_running_is_busy() {
        let mut s = session();
        s.command(ClientMessage::Macro {
            name: MacroName::Expand,
        });
        s.tick();
        let reply = s.command(ClientMessage::Macro {
            name: MacroName::Collapse,
        });
        assert!(matches!(reply, Some(ServerMessage::Error { code, .. }) if code == codes::BUSY));
    }

    #[test]
    fn stop_freezes() {
        let mut s = session();
        s.command(ClientMessage::Macro {
            name: MacroName::Expand,
        });
        for _ in 0..30 {
            s.tick();
        }
        s.command(ClientMessage::Stop {});
        let frozen = s.current().clone();
        let u = s.tick();
        assert_eq!(u.mode, Mode::Idle);
        assert_eq!(s.current(), &frozen);
    }

    #[test]
    fn unreachable_pose_target_rejected() {
        let mut s = session();
        let before = s.targets().to_vec();
        let reply = s.command(ClientMessage::PoseTarget {
            position: [800.0, 0.0, 0.0],
            rotation: [1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0],
        });
        match reply {
            Some(ServerMessage::IkFailed { pos_residual, .. }) => {
                assert!(pos_residual >= 90.0 - 1e-6)
            }
            other => panic!("expected ikFailed, got {other:?}"),
        }
        assert_eq!(s.targets(), before.as_slice());
    }

    #[test]
    fn non_rotation_pose_rejected() {
        let mut s = session();
        let reply = s.command(ClientMessage::PoseTarget {
            position: [100.0, 0.0, 0.0],
            rotation: [2.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0],
        });
        assert!(
            matches!(reply, Some(ServerMessage::Error { code, .. }) if code == codes::BAD_POSE)
        );
    }

    #[test]
    fn wire_format() {
        let jog: ClientMessage =
            serde_json::from_str(r#"{"type":"jog","joint":"extension","target":250}"#).unwrap();
        assert_eq!(
            jog,
            ClientMessage::Jog {
                joint: "extension".into(),
                target: 250.0
            }
        );
        assert_eq!(
            serde_json::to_string(&ClientMessage::Macro {
                name: MacroName::Expand
            })
            .unwrap(),
            r#"{"type":"macro","name":"expand"}"#
        );
        assert_eq!(
            serde_json::to_string(&ClientMessage::Stop {}).unwrap(),
            r#"{"type":"stop"}"#
        );
        assert_eq!(
            parse_client_message(r#"{"type":"stop"}"#).unwrap(),
            ClientMessage::Stop {}
        );
        let fail = ServerMessage::IkFailed {
            pos_residual: 1.5,
            rot_residual: 0.25,
        };
        assert_eq!(
            fail.to_json(),
            r#"{"type":"ikFailed","posResidual":1.5,"rotResidual":0.25}"#
        );
        let err = parse_client_message("{nope").unwrap_err();
        assert!(err
            .to_json()
            .starts_with(r#"{"type":"error","code":"badMessage""#));
        let state = session().snapshot();
        let v: serde_json::Value =
            serde_json::from_str(&ServerMessage::State(state).to_json()).unwrap();
        assert_eq!(v["type"], "state");
        assert_eq!(v["mode"], "idle");
        assert!(v["tipPose"]["rotation"].as_array().unwrap().len() == 9);
        assert!(v["macroProgress"].is_number());
    }
}
