//! Command implementations behind the `auglimb` binary.
//!
//! Every command renders to a `String` so it can be exercised in-process;
//! `main` only prints and maps [`CliError`] to an exit code.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use auglimb::kinematics::{forward_kinematics, solve_ik, TipFrame, TOOL, TOOL_BASE};
use auglimb::model::JointKind;
use auglimb::statics::{default_gravity, hanging_state, max_payload};
use auglimb::teleop::Session;
use auglimb::workspace::{
    export_point_cloud, sample_state, sample_workspace, CloudFormat, SamplingScheme,
};
use auglimb::{IkRequest, JointState, KinematicModel, Pose, SamplingPlan};
use clap::{Args, Parser, Subcommand, ValueEnum};

pub const MODEL_ENV: &str = "AUGLIMB_MODEL";

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Config {
        path: PathBuf,
        source: auglimb::Error,
    },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{0}")]
    Model(#[from] auglimb::Error),
    #[error("{0}")]
    Serve(#[from] auglimb_server::ServeError),
    /// Carries the residual report, printed to stdout before exiting.
    #[error("inverse kinematics did not converge")]
    IkFailed(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Config { .. } | CliError::Model(_) => 2,
            CliError::Io { .. } | CliError::Serve(_) => 3,
            CliError::IkFailed(_) => 4,
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "auglimb",
    version,
    about = "Wearable extendable robotic limb simulator"
)]
pub struct Cli {
    /// Model file (TOML); the built-in model when absent.
    #[arg(long, global = true, env = MODEL_ENV)]
    pub model: Option<PathBuf>,
    /// Machine-readable JSON output.
    #[arg(long, global = true)]
    pub json: bool,
    /// Repeat for more log output on stderr.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Model summary: reach, extension range, mass.
    Report,
    /// Sample the reachable workspace and export a point cloud.
    Workspace(WorkspaceArgs),
    /// Forward kinematics for a named or explicit state.
    Fk(StateArgs),
    /// Inverse kinematics to a tool pose.
    Ik(IkArgs),
    /// Maximum tip payload in a named or explicit state.
    Payload(PayloadArgs),
    /// Run the teleoperation service.
    Serve(ServeArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Scheme {
    Uniform,
    Halton,
    Grid,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Ply,
}

#[derive(Debug, Args)]
pub struct WorkspaceArgs {
    #[arg(long, default_value_t = 100_000)]
    pub samples: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Inject the fully extended straight state as sample 0 (default).
    #[arg(long, overrides_with = "no_extremes")]
    pub extremes: bool,
    #[arg(long)]
    pub no_extremes: bool,
    /// Measure reach at the gripper base instead of the gripper tip.
    #[arg(long)]
    pub no_gripper: bool,
    #[arg(long, value_enum, default_value_t = Scheme::Uniform)]
    pub scheme: Scheme,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    /// Point cloud destination; no cloud is written when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also write the reach report as JSON to this path.
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Voxel edge for the volume estimate, mm.
    #[arg(long, default_value_t = 10.0)]
    pub voxel: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum NamedState {
    Home,
    Straight,
    Compact,
    Vertical,
}

#[derive(Debug, Args)]
pub struct StateArgs {
    #[arg(long, value_enum, default_value_t = NamedState::Home)]
    pub state: NamedState,
    /// Extension override, mm (straight and vertical default to the maximum).
    #[arg(long)]
    pub extension: Option<f64>,
    /// Explicit comma-separated joint values (rad, extension in mm).
    #[arg(
        long,
        value_delimiter = ',',
        allow_hyphen_values = true,
        conflicts_with = "state"
    )]
    pub joints: Option<Vec<f64>>,
}

#[derive(Debug, Args)]
pub struct IkArgs {
    /// Tool position x,y,z in mm.
    #[arg(
        long,
        value_delimiter = ',',
        allow_hyphen_values = true,
        required = true
    )]
    pub target_pos: Vec<f64>,
    /// Row-major 3x3 tool rotation; position-only solve when absent.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub target_rot: Option<Vec<f64>>,
    /// Solve for the gripper base instead of the gripper tip.
    #[arg(long)]
    pub no_gripper: bool,
    #[arg(long, default_value_t = 200)]
    pub max_iterations: usize,
    /// Extra deterministic starting states tried when the first solve fails.
    #[arg(long, default_value_t = 16)]
    pub restarts: usize,
    /// Starting state.
    #[arg(long, value_enum, default_value_t = NamedState::Compact)]
    pub from: NamedState,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum NamedPose {
    HorizontalStraight,
    Vertical,
    Compact,
    Home,
}

#[derive(Debug, Args)]
pub struct PayloadArgs {
    #[arg(long, value_enum, default_value_t = NamedPose::HorizontalStraight)]
    pub pose: NamedPose,
    #[arg(long)]
    pub extension: Option<f64>,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, default_value = "127.0.0.1:8765")]
    pub endpoint: String,
    #[arg(long, default_value_t = auglimb::teleop::DEFAULT_TICK_RATE_HZ)]
    pub tick_rate: f64,
    /// Static operator console assets served at `/`.
    #[arg(long)]
    pub ui_dir: Option<PathBuf>,
}

pub fn load_model(path: Option<&Path>) -> Result<KinematicModel, CliError> {
    let Some(path) = path else {
        return Ok(KinematicModel::auglimb());
    };
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Config {
        path: path.to_path_buf(),
        source: auglimb::Error::Parse(e.to_string()),
    })?;
    KinematicModel::from_toml_str(&text).map_err(|source| CliError::Config {
        path: path.to_path_buf(),
        source,
    })
}

/// Runs a non-serving command and returns what goes to stdout.
pub fn run(cli: &Cli) -> Result<String, CliError> {
    let model = load_model(cli.model.as_deref())?;
    match &cli.command {
        Command::Report => Ok(cmd_report(&model, cli.json)),
        Command::Workspace(a) => cmd_workspace(&model, a, cli.json),
        Command::Fk(a) => cmd_fk(&model, a, cli.json),
        Command::Ik(a) => cmd_ik(&model, a, cli.json),
        Command::Payload(a) => cmd_payload(&model, a, cli.json),
        Command::Serve(a) => {
            cmd_serve(model, a)?;
            Ok(String::new())
        }
    }
}

fn mm(v: f64) -> String {
    format!("{v:.3}")
}

fn ratio(v: f64) -> String {
    format!("{v:.4}")
}

fn to_json(v: &serde_json::Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("json values always serialize");
    s.push('\n');
    s
}

pub fn cmd_report(model: &KinematicModel, json: bool) -> String {
    let ext = model.extension_joint();
    let (emin, emax) = (ext.min(), ext.max());
    let tool_base = model.max_reach_tool_base();
    let tool = tool_base + model.gripper_length;
    let forearm = auglimb::workspace::FOREARM_LENGTH_MM;
    let dof = model
        .joints
        .iter()
        .filter(|j| j.kind != JointKind::PrismaticScissor)
        .count();
    let unimplemented: Vec<&str> = model
        .joints
        .iter()
        .filter(|j| !j.implemented)
        .map(|j| j.name.as_str())
        .collect();
    let mass = model.total_mass();
    if json {
        return to_json(&serde_json::json!({
            "dof": dof,
            "extensionUnits": 1,
            "unimplemented": unimplemented,
            "extensionRange": [emin, emax],
            "extensionRatio": emax / emin,
            "maxReach": { "toolBase": tool_base, "tool": tool },
            "forearmMultiple": tool_base / forearm,
            "mass": mass,
        }));
    }
    let mut s = String::new();
    let _ = write!(s, "dof = {dof} (+1 extension unit)");
    if !unimplemented.is_empty() {
        let _ = write!(s, "  not implemented: {}", unimplemented.join(", "));
    }
    s.push('\n');
    let _ = writeln!(s, "extensionRange = [{}, {}] mm", mm(emin), mm(emax));
    let _ = writeln!(s, "extensionRatio = {}", ratio(emax / emin));
    let _ = writeln!(s, "maxReach.toolBase = {} mm", mm(tool_base));
    let _ = writeln!(s, "maxReach.tool = {} mm", mm(tool));
    let _ = writeln!(s, "forearmMultiple = {}", ratio(tool_base / forearm));
    let _ = writeln!(s, "mass = {mass:.0} g");
    s
}

pub fn plan_from_args(a: &WorkspaceArgs) -> Result<SamplingPlan, CliError> {
    if a.samples == 0 {
        return Err(CliError::Usage("--samples must be at least 1".into()));
    }
    let mut plan = SamplingPlan::new(a.samples, a.seed);
    plan.scheme = match a.scheme {
        Scheme::Uniform => SamplingScheme::UniformRandom,
        Scheme::Halton => SamplingScheme::LowDiscrepancy,
        Scheme::Grid => SamplingScheme::Grid,
    };
    plan.deterministic_extremes = !a.no_extremes;
    plan.include_gripper = !a.no_gripper;
    plan.voxel_size = a.voxel;
    plan.validate()
        .map_err(|e| CliError::Usage(e.to_string()))?;
    Ok(plan)
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    std::fs::write(path, bytes).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn cmd_workspace(
    model: &KinematicModel,
    a: &WorkspaceArgs,
    json: bool,
) -> Result<String, CliError> {
    let plan = plan_from_args(a)?;
    let (cloud, report) = sample_workspace(model, &plan)?;
    if let Some(out) = &a.out {
        let format = match a.format {
            Format::Csv => CloudFormat::Csv,
            Format::Ply => CloudFormat::Ply,
        };
        write_file(out, &export_point_cloud(&cloud, format)?)?;
        log::info!("wrote {} points to {}", cloud.len(), out.display());
    }
    let value = serde_json::to_value(&report).expect("report serializes");
    if let Some(path) = &a.report {
        write_file(path, to_json(&value).as_bytes())?;
    }
    if json {
        return Ok(to_json(&value));
    }
    let mut s = String::new();
    let _ = writeln!(s, "frame = {}", report.frame.name());
    let _ = writeln!(s, "samples = {}", report.sample_count);
    let _ = writeln!(s, "maxReach = {} mm", mm(report.max_reach));
    let _ = writeln!(s, "minReach = {} mm", mm(report.min_reach));
    let _ = writeln!(s, "forearmMultiple = {}", ratio(report.forearm_multiple));
    let _ = writeln!(
        s,
        "volume = {} mm^3 ({} mm voxels)",
        mm(report.volume_estimate),
        mm(report.voxel_size)
    );
    Ok(s)
}

fn named_state(model: &KinematicModel, name: NamedState, extension: Option<f64>) -> JointState {
    let ext_max = model.extension_joint().max();
    let mut q = match name {
        NamedState::Home => model.home_state(),
        NamedState::Straight => model.straight_state(ext_max),
        NamedState::Compact => model.compact_state(),
        NamedState::Vertical => hanging_state(model, ext_max),
    };
    if let Some(e) = extension {
        q[model.extension_index()] = e;
    }
    q
}

fn state_from_args(model: &KinematicModel, a: &StateArgs) -> Result<JointState, CliError> {
    let q = match &a.joints {
        Some(v) => JointState::new(v.clone()),
        None => named_state(model, a.state, a.extension),
    };
    model
        .check_state(&q)
        .map_err(|e| CliError::Usage(e.to_string()))?;
    Ok(q)
}

fn pose_json(p: &Pose) -> serde_json::Value {
    serde_json::to_value(p).expect("pose serializes")
}

fn pose_line(name: &str, p: &Pose) -> String {
    let t = p.position;
    format!(
        "{name:<14} position = ({}, {}, {}) mm  distance = {} mm",
        mm(t.x),
        mm(t.y),
        mm(t.z),
        mm(t.norm())
    )
}

pub fn cmd_fk(model: &KinematicModel, a: &StateArgs, json: bool) -> Result<String, CliError> {
    let q = state_from_args(model, a)?;
    let frames = forward_kinematics(model, &q)?;
    if json {
        let map: serde_json::Map<_, _> = frames
            .iter()
            .map(|(k, p)| (k.clone(), pose_json(p)))
            .collect();
        return Ok(to_json(
            &serde_json::json!({ "joints": q.values(), "frames": map }),
        ));
    }
    let mut s = String::new();
    for (j, v) in model.joints.iter().zip(q.values()) {
        let shown = if j.kind != JointKind::PrismaticScissor {
            format!("{v:.4} rad")
        } else {
            format!("{} mm", mm(*v))
        };
        let _ = writeln!(s, "{:<14} {shown}", j.name);
    }
    for name in [TOOL_BASE, TOOL] {
        let _ = writeln!(s, "{}", pose_line(name, &frames[name]));
    }
    let _ = writeln!(s, "tip distance = {} mm", mm(frames[TOOL].position.norm()));
    Ok(s)
}

pub fn cmd_ik(model: &KinematicModel, a: &IkArgs, json: bool) -> Result<String, CliError> {
    let [x, y, z] = <[f64; 3]>::try_from(a.target_pos.as_slice())
        .map_err(|_| CliError::Usage("--target-pos takes x,y,z".into()))?;
    let rot = match &a.target_rot {
        Some(r) => <[f64; 9]>::try_from(r.as_slice())
            .map_err(|_| CliError::Usage("--target-rot takes 9 row-major values".into()))?,
        None => [1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0],
    };
    let target = Pose::from_parts_projected([x, y, z], rot, 1e-4)
        .map_err(|e| CliError::Usage(e.to_string()))?;
    let mut req = IkRequest::new(target, named_state(model, a.from, None));
    req.frame = TipFrame::from_include_gripper(!a.no_gripper);
    req.max_iterations = a.max_iterations;
    if a.target_rot.is_none() {
        req.orientation_weight = 0.0;
    }
    let mut plan = SamplingPlan::new(a.restarts.max(1), 0);
    plan.scheme = SamplingScheme::LowDiscrepancy;
    plan.deterministic_extremes = false;
    let mut sol = solve_ik(model, &req)?;
    let mut attempts = 1;
    for k in 0..a.restarts {
        if sol.residuals.converged {
            break;
        }
        req.seed = sample_state(model, &plan, k);
        let next = solve_ik(model, &req)?;
        attempts += 1;
        let score = |r: &auglimb::kinematics::IkResiduals<f64>| r.position + 100.0 * r.rotation;
        if next.residuals.converged || score(&next.residuals) < score(&sol.residuals) {
            sol = next;
        }
    }
    log::info!("ik used {attempts} start(s)");
    let r = &sol.residuals;
    let text = if json {
        to_json(&serde_json::json!({
            "converged": r.converged,
            "iterations": sol.iterations,
            "attempts": attempts,
            "posResidual": r.position,
            "rotResidual": r.rotation,
            "joints": sol.state.values(),
        }))
    } else {
        let mut s = String::new();
        let _ = writeln!(s, "converged = {}", r.converged);
        let _ = writeln!(s, "iterations = {}", sol.iterations);
        let _ = writeln!(s, "attempts = {attempts}");
        let _ = writeln!(s, "posResidual = {} mm", mm(r.position));
        let _ = writeln!(s, "rotResidual = {} rad", ratio(r.rotation));
        let joints: Vec<String> = sol
            .state
            .values()
            .iter()
            .map(|v| format!("{v:.4}"))
            .collect();
        let _ = writeln!(s, "joints = [{}]", joints.join(", "));
        s
    };
    if r.converged {
        Ok(text)
    } else {
        Err(CliError::IkFailed(text))
    }
}

pub fn cmd_payload(
    model: &KinematicModel,
    a: &PayloadArgs,
    json: bool,
) -> Result<String, CliError> {
    let state = match a.pose {
        NamedPose::HorizontalStraight => named_state(model, NamedState::Straight, a.extension),
        NamedPose::Vertical => named_state(model, NamedState::Vertical, a.extension),
        NamedPose::Compact => named_state(model, NamedState::Compact, a.extension),
        NamedPose::Home => named_state(model, NamedState::Home, a.extension),
    };
    model
        .check_state(&state)
        .map_err(|e| CliError::Usage(e.to_string()))?;
    let rep = max_payload(model, &state, default_gravity())?;
    if json {
        return Ok(to_json(
            &serde_json::to_value(&rep).expect("report serializes"),
        ));
    }
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{:<14} {:<18} {:>12} {:>12} {:>12} {:>12}",
        "joint", "kind", "gravity", "payload", "limit", "margin"
    );
    for r in &rep.per_joint {
        let _ = writeln!(
            s,
            "{:<14} {:<18} {:>12} {:>12} {:>12} {:>12}",
            r.joint_name,
            r.kind.as_str(),
            mm(r.gravity_torque),
            mm(r.payload_torque),
            mm(r.limit),
            mm(r.margin)
        );
    }
    let _ = writeln!(s, "maxPayload = {} g", mm(rep.max_payload));
    let _ = writeln!(
        s,
        "binding = {}",
        rep.binding_joint.as_deref().unwrap_or("none")
    );
    let _ = writeln!(s, "({}; torques N*mm, extension force N)", rep.provenance);
    Ok(s)
}

pub fn cmd_serve(model: KinematicModel, a: &ServeArgs) -> Result<(), CliError> {
    if !(a.tick_rate.is_finite() && a.tick_rate > 0.0) {
        return Err(CliError::Usage("--tick-rate must be positive".into()));
    }
    if let Some(dir) = a.ui_dir.as_ref().filter(|d| !d.is_dir()) {
        return Err(CliError::Usage(format!(
            "--ui-dir {} is not a directory",
            dir.display()
        )));
    }
    let start = model.compact_state();
    let session = Session::with_state(model, start, a.tick_rate);
    let opts = auglimb_server::ServeOptions {
        ui_dir: a.ui_dir.clone(),
    };
    let rt = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(|source| CliError::Io {
            path: PathBuf::from(&a.endpoint),
            source,
        })?;
    rt.block_on(async {
        let listener = auglimb_server::bind(&a.endpoint).await?;
        eprintln!(
            "serving ws://{}{}",
            listener
                .local_addr()
                .map_err(auglimb_server::ServeError::Io)?,
            auglimb_server::WS_PATH
        );
        auglimb_server::serve(listener, session, opts).await
    })?;
    Ok(())
}
