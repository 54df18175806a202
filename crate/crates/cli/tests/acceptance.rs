//! One PASS/FAIL line per acceptance criterion. Run with
//! `cargo test -p auglimb-cli --test acceptance -- --nocapture`.

use std::time::{Duration, Instant};

use auglimb::kinematics::{chain_poses, forward_kinematics, geometric_jacobian, solve_ik, TOOL};
use auglimb::model::JointKind;
use auglimb::statics::{default_gravity, gravity_torques, max_payload};
use auglimb::teleop::{ClientMessage, MacroName, Mode, Session};
use auglimb::workspace::{export_point_cloud, sample_workspace, CloudFormat};
use auglimb::{IkRequest, JointState, KinematicModel, Pose, SamplingPlan, ScissorParams};
use futures_util::{SinkExt, StreamExt};
use nalgebra::{DMatrix, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};
use tokio_tungstenite::tungstenite::Message;

type Check = Result<String, String>;

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn run(name: &str, budget: Duration, f: impl FnOnce() -> Check) -> bool {
    let start = Instant::now();
    let result = f();
    let elapsed = start.elapsed();
    let (ok, detail) = match result {
        Ok(d) if elapsed <= budget => (true, d),
        Ok(d) => (
            false,
            format!("{d}; over budget {:.1} s", budget.as_secs_f64()),
        ),
        Err(e) => (false, e),
    };
    println!(
        "{} {name}: {detail} [{:.3} s]",
        if ok { "PASS" } else { "FAIL" },
        elapsed.as_secs_f64()
    );
    ok
}

fn random_state<R: Rng>(m: &KinematicModel, rng: &mut R) -> JointState {
    JointState::new(
        m.joints
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

fn fd_jacobian(m: &KinematicModel, q: &JointState) -> DMatrix<f64> {
    let active = m.active_joints();
    let mut jac = DMatrix::zeros(6, active.len());
    for (c, &i) in active.iter().enumerate() {
        let h = 1e-6 * m.joints[i].range();
        let (mut plus, mut minus) = (q.values().to_vec(), q.values().to_vec());
        plus[i] += h;
        minus[i] -= h;
        let (p, n) = (chain_poses(m, &plus).tool, chain_poses(m, &minus).tool);
        let dv: Vector3<f64> = (p.position - n.position) / (2.0 * h);
        let dw: Vector3<f64> = (p.rotation * n.rotation.inverse()).scaled_axis() / (2.0 * h);
        for r in 0..3 {
            jac[(r, c)] = dv[r];
            jac[(r + 3, c)] = dw[r];
        }
    }
    jac
}

fn reach_report() -> Check {
    let m = KinematicModel::auglimb();
    let text = auglimb_cli::cmd_report(&m, false);
    for want in [
        "maxReach.toolBase = 630.000 mm",
        "maxReach.tool = 710.000 mm",
    ] {
        ensure(text.lines().any(|l| l == want), format!("missing `{want}`"))?;
    }
    Ok("toolBase 630.000 mm, tool 710.000 mm".into())
}

fn extension() -> Check {
    let p = ScissorParams::auglimb();
    let [lo, hi] = p.theta_range;
    let (emin, emax) = (
        p.extension_of_theta(lo).unwrap(),
        p.extension_of_theta(hi).unwrap(),
    );
    ensure((emin - 70.0).abs() <= 1e-9, format!("e(θmin) = {emin}"))?;
    ensure((emax - 250.0).abs() <= 1e-9, format!("e(θmax) = {emax}"))?;
    let ratio = p.extension_ratio();
    ensure(format!("{ratio:.3}") == "3.571", format!("ratio {ratio}"))?;
    let text = auglimb_cli::cmd_report(&KinematicModel::auglimb(), false);
    ensure(text.contains("extensionRatio = 3.571"), "report ratio line")?;
    Ok(format!("{emin:.3} / {emax:.3} mm, ratio {ratio:.3}"))
}

fn forearm() -> Check {
    let m = KinematicModel::auglimb();
    let multiple = m.max_reach_tool_base() / 250.0;
    ensure(
        format!("{multiple:.3}") == "2.520" && multiple >= 2.5,
        format!("{multiple}"),
    )?;
    let text = auglimb_cli::cmd_report(&m, false);
    ensure(
        text.contains("forearmMultiple = 2.520"),
        "report multiple line",
    )?;
    Ok(format!("{multiple:.3} >= 2.5"))
}

fn mass() -> Check {
    let total = KinematicModel::auglimb().total_mass();
    ensure((total - 640.0).abs() <= 0.5, format!("{total} g"))?;
    Ok(format!("{total:.1} g"))
}

fn jacobian() -> Check {
    let m = KinematicModel::auglimb();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst: f64 = 0.0;
    let states = 250;
    for _ in 0..states {
        let q = random_state(&m, &mut rng);
        let analytic = geometric_jacobian(&m, &q, TOOL).unwrap().matrix;
        let numeric = fd_jacobian(&m, &q);
        let scale = analytic.amax().max(numeric.amax()).max(1.0);
        worst = worst.max((&analytic - &numeric).amax() / scale);
    }
    ensure(worst <= 1e-5, format!("worst relative error {worst:.2e}"))?;
    Ok(format!("{states} states, worst relative error {worst:.2e}"))
}

fn ik() -> Check {
    let m = KinematicModel::auglimb();
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let trials = 1000;
    let mut converged = 0;
    for _ in 0..trials {
        let q = random_state(&m, &mut rng);
        let target = forward_kinematics(&m, &q).unwrap()[TOOL];
        let mut seed = q.clone();
        for (i, j) in m.joints.iter().enumerate().filter(|(_, j)| j.is_active()) {
            let d = if j.kind == JointKind::PrismaticScissor {
                5.0
            } else {
                5f64.to_radians()
            };
            seed[i] = (q[i] + rng.random_range(-d..=d)).clamp(j.min(), j.max());
        }
        let sol = solve_ik(&m, &IkRequest::new(target, seed)).map_err(|e| e.to_string())?;
        m.check_state(&sol.state)
            .map_err(|e| format!("returned state outside limits: {e}"))?;
        let r = &sol.residuals;
        if r.converged && r.position <= 1e-3 && r.rotation <= 1e-4 && sol.iterations <= 200 {
            converged += 1;
        }
    }
    let rate = converged as f64 / trials as f64;
    ensure(rate >= 0.99, format!("{converged}/{trials} converged"))?;
    Ok(format!(
        "{converged}/{trials} converged, all states within limits"
    ))
}

fn workspace() -> Check {
    let m = KinematicModel::auglimb();
    let mut plan = SamplingPlan::new(1_000_000, 7);
    plan.include_gripper = false;
    let (cloud, report) = sample_workspace(&m, &plan).map_err(|e| e.to_string())?;
    let over = cloud.points.iter().filter(|p| p.reach > 630.0).count();
    ensure(over == 0, format!("{over} samples beyond 630 mm"))?;
    ensure(
        cloud.points[0].reach == 630.0,
        format!("extreme reach {}", cloud.points[0].reach),
    )?;
    ensure(
        report.max_reach == 630.0,
        format!("report max {}", report.max_reach),
    )?;
    let first = export_point_cloud(&cloud, CloudFormat::Csv).unwrap();
    let (again, report2) = sample_workspace(&m, &plan).map_err(|e| e.to_string())?;
    ensure(
        first == export_point_cloud(&again, CloudFormat::Csv).unwrap() && report == report2,
        "re-run differs",
    )?;
    Ok(format!(
        "{} samples, max toolBase reach {:.3} mm, re-run byte-identical ({} bytes)",
        cloud.len(),
        report.max_reach,
        first.len()
    ))
}

fn statics() -> Check {
    let m = KinematicModel::auglimb();
    let g = default_gravity();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let q = random_state(&m, &mut rng);
        let total = |load: f64| -> Vec<f64> {
            gravity_torques(&m, &q, load, g)
                .unwrap()
                .iter()
                .map(|r| r.gravity_torque + r.payload_torque)
                .collect()
        };
        let (t0, t1) = (total(0.0), total(1.0));
        for k in 1..=10 {
            let load = 25.0 * k as f64;
            for (i, direct) in total(load).into_iter().enumerate() {
                let affine = t0[i] + load * (t1[i] - t0[i]);
                let scale = direct.abs().max(affine.abs());
                if scale > 0.0 {
                    worst = worst.max((direct - affine).abs() / scale);
                }
            }
        }
    }
    ensure(worst <= 1e-9, format!("affinity error {worst:.2e}"))?;

    let mut prev = f64::INFINITY;
    for k in 0..=180 {
        let e = 70.0 + k as f64;
        let p = max_payload(&m, &m.straight_state(e), g)
            .unwrap()
            .max_payload;
        ensure(p <= prev, format!("payload rises at extension {e}"))?;
        prev = p;
    }

    // mount pointing straight down
    let mut hanging = m.clone();
    hanging.base_pivot =
        Pose::try_from_parts([0.0; 3], [0.0, 0.0, 1.0, 0.0, 1.0, 0.0, -1.0, 0.0, 0.0]).unwrap();
    let rows = gravity_torques(&hanging, &hanging.straight_state(250.0), 100.0, g).unwrap();
    let nonzero: Vec<&str> = rows
        .iter()
        .filter(|r| r.kind.is_revolute() && (r.gravity_torque != 0.0 || r.payload_torque != 0.0))
        .map(|r| r.joint_name.as_str())
        .collect();
    ensure(
        nonzero.is_empty(),
        format!("vertical torques not zero at {nonzero:?}"),
    )?;
    Ok(format!(
        "affinity error {worst:.1e}, payload monotone over 70..250 mm, vertical torques exactly 0"
    ))
}

fn scripted_ticks(ticks: usize) -> Result<(), String> {
    let m = KinematicModel::auglimb();
    let mut s = Session::new(m.clone());
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let dt = 1.0 / s.tick_rate();
    let gr = m.joint_index("gripper-r").unwrap();
    let mut prev = s.current().clone();
    for t in 0..ticks {
        if rng.random_bool(0.05) {
            let msg = match rng.random_range(0..10) {
                0..=5 => {
                    let j = &m.joints[rng.random_range(0..m.dof())];
                    let pad = 0.5 * j.range();
                    ClientMessage::Jog {
                        joint: j.name.clone(),
                        target: rng.random_range(j.min() - pad..j.max() + pad),
                    }
                }
                6 => ClientMessage::Macro {
                    name: MacroName::Expand,
                },
                7 => ClientMessage::Macro {
                    name: MacroName::Collapse,
                },
                8 => ClientMessage::Stop {},
                _ => ClientMessage::PoseTarget {
                    position: [
                        rng.random_range(-500.0..500.0),
                        rng.random_range(-500.0..500.0),
                        50.0,
                    ],
                    rotation: [1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0],
                },
            };
            s.command(msg);
        }
        let u = s.tick();
        for (i, j) in m.joints.iter().enumerate() {
            let v = u.joints[i];
            ensure(
                j.contains(v),
                format!("tick {t}: {} = {v} outside limits", j.name),
            )?;
            let step = (v - prev[i]).abs();
            ensure(
                step <= s.rate_limits()[i] * dt * (1.0 + 1e-12),
                format!("tick {t}: {} moved {step}", j.name),
            )?;
        }
        ensure(
            u.joints[gr] == m.joints[gr].home,
            format!("tick {t}: gripper-r moved"),
        )?;
        prev = s.current().clone();
    }
    Ok(())
}

fn expand_collapse() -> Result<(), String> {
    let m = KinematicModel::auglimb();
    let mut s = Session::new(m.clone());
    let compact = s.current().clone();
    s.command(ClientMessage::Macro {
        name: MacroName::Expand,
    });
    s.run_until_idle(100_000);
    let tip = s.snapshot().reach;
    ensure(tip == 710.0, format!("expanded reach {tip}"))?;
    s.command(ClientMessage::Macro {
        name: MacroName::Collapse,
    });
    s.run_until_idle(100_000);
    ensure(
        s.current() == &compact,
        "collapse did not restore the compact pose",
    )?;
    ensure(s.mode() == Mode::Idle, "not idle after collapse")
}

async fn scripted_client() -> Result<(), String> {
    let session = Session::new(KinematicModel::auglimb());
    let addr = auglimb_server::spawn("127.0.0.1:0", session, Default::default())
        .await
        .map_err(|e| e.to_string())?;
    let url = format!("ws://{addr}{}", auglimb_server::WS_PATH);
    let (mut ws, _) = tokio_tungstenite::connect_async(url)
        .await
        .map_err(|e| e.to_string())?;
    let next = async move |ws: &mut tokio_tungstenite::WebSocketStream<_>,
                           ty: &str|
                -> Result<Value, String> {
        for _ in 0..1000 {
            let frame = tokio::time::timeout(Duration::from_secs(5), ws.next())
                .await
                .map_err(|_| "timed out".to_string())?
                .ok_or("closed")?
                .map_err(|e| e.to_string())?;
            if let Message::Text(t) = frame {
                let v: Value = serde_json::from_str(t.as_str()).map_err(|e| e.to_string())?;
                if v["type"] == ty {
                    return Ok(v);
                }
            }
        }
        Err(format!("no {ty} message"))
    };
    let hello = next(&mut ws, "model").await?;
    ensure(
        hello["model"]["joints"].as_array().map(Vec::len) == Some(8),
        "hello model",
    )?;
    let send = |v: Value| Message::Text(v.to_string().into());
    ws.send(send(
        json!({"type": "jog", "joint": "extension", "target": 80.0}),
    ))
    .await
    .map_err(|e| e.to_string())?;
    let mut reached = false;
    for _ in 0..200 {
        if next(&mut ws, "state").await?["joints"][5] == 80.0 {
            reached = true;
            break;
        }
    }
    ensure(reached, "jog target not reached")?;
    ws.send(Message::Text("nonsense".into()))
        .await
        .map_err(|e| e.to_string())?;
    ensure(
        next(&mut ws, "error").await?["code"] == "badMessage",
        "badMessage",
    )?;
    ws.send(send(json!({"type": "stop"})))
        .await
        .map_err(|e| e.to_string())?;
    ensure(
        next(&mut ws, "state").await?["mode"] == "idle",
        "idle after stop",
    )
}

fn teleop() -> Check {
    scripted_ticks(100_000)?;
    expand_collapse()?;
    tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(|e| e.to_string())?
        .block_on(scripted_client())?;
    Ok("100000 ticks within rate and limits, gripper-r fixed, expand/collapse exact, scripted client ok".into())
}

#[test]
fn acceptance() {
    let secs = Duration::from_secs;
    let results = [
        run("reach", secs(1), reach_report),
        run("extension", secs(1), extension),
        run("forearm multiple", secs(1), forearm),
        run("mass", secs(1), mass),
        run("jacobian", secs(10), jacobian),
        run("ik", secs(60), ik),
        run("workspace", secs(60), workspace),
        run("statics", secs(5), statics),
        run("teleop", Duration::MAX, teleop),
    ];
    let failed = results.iter().filter(|ok| !**ok).count();
    assert_eq!(failed, 0, "{failed} acceptance criteria failed");
}
