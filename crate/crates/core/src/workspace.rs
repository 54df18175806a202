//! Sampling-based reachable workspace analysis.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::str::FromStr;

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kinematics::{chain_poses, TipFrame};
use crate::model::{JointState, KinematicModel};
use crate::num::Real;

/// Forearm length of an adult male, mm; the yardstick for `forearmMultiple`.
pub const FOREARM_LENGTH_MM: f64 = 250.0;
/// Protrusion from the mount axis below which a pose counts as compact.
/// Artifact-defined target, not a measured figure.
pub const COMPACT_PROTRUSION_LIMIT_MM: f64 = 120.0;
pub const DEFAULT_VOXEL_MM: f64 = 10.0;

const HALTON_PRIMES: [u64; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SamplingScheme {
    #[default]
    UniformRandom,
    /// Halton sequence with bases 2, 3, 5, 7, 11, 13, ... and a seeded shift.
    LowDiscrepancy,
    /// Regular lattice including the joint limits; ignores the seed.
    Grid,
}

impl FromStr for SamplingScheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform-random" | "uniform" | "random" => Ok(SamplingScheme::UniformRandom),
            "low-discrepancy" | "halton" => Ok(SamplingScheme::LowDiscrepancy),
            "grid" => Ok(SamplingScheme::Grid),
            other => Err(Error::Validation(format!(
                "unknown sampling scheme `{other}`"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
pub struct SamplingPlan<T: Real> {
    pub scheme: SamplingScheme,
    pub sample_count: usize,
    pub seed: u64,
    pub include_gripper: bool,
    /// Replace sample 0 with the straight, fully extended configuration.
    pub deterministic_extremes: bool,
    pub voxel_size: T,
}

impl<T: Real> SamplingPlan<T> {
    pub fn new(sample_count: usize, seed: u64) -> Self {
        SamplingPlan {
            scheme: SamplingScheme::UniformRandom,
            sample_count,
            seed,
            include_gripper: true,
            deterministic_extremes: true,
            voxel_size: T::lit(DEFAULT_VOXEL_MM),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.sample_count < 1 {
            return Err(Error::Validation("sampleCount must be ≥ 1".into()));
        }
        if !(self.voxel_size > T::zero()) {
            return Err(Error::Validation("voxelSize must be > 0".into()));
        }
        Ok(())
    }

    pub fn tip(&self) -> TipFrame {
        TipFrame::from_include_gripper(self.include_gripper)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
pub struct CloudPoint<T: Real> {
    pub position: [T; 3],
    pub reach: T,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PointCloud<T: Real> {
    pub points: Vec<CloudPoint<T>>,
}

impl<T: Real> PointCloud<T> {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
pub struct ReachReport<T: Real> {
    pub max_reach: T,
    pub min_reach: T,
    pub volume_estimate: T,
    pub forearm_multiple: T,
    pub sample_count: usize,
    pub voxel_size: T,
    pub frame: TipFrame,
}

/// Unit-cube coordinates of sample `index`, one per dimension.
fn unit_sample(
    plan_scheme: SamplingScheme,
    seed: u64,
    index: usize,
    count: usize,
    dims: usize,
) -> Vec<f64> {
    match plan_scheme {
        SamplingScheme::UniformRandom => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(index as u64);
            (0..dims).map(|_| rng.random::<f64>()).collect()
        }
        SamplingScheme::LowDiscrepancy => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..dims)
                .map(|d| {
                    let shift: f64 = rng.random();
                    let base = HALTON_PRIMES[d % HALTON_PRIMES.len()];
                    (radical_inverse(index as u64 + 1, base) + shift).fract()
                })
                .collect()
        }
        SamplingScheme::Grid => {
            let per_axis = grid_resolution(count, dims);
            let mut rest = index;
            (0..dims)
                .map(|_| {
                    let digit = rest % per_axis;
                    rest /= per_axis;
                    if per_axis > 1 {
                        digit as f64 / (per_axis - 1) as f64
                    } else {
                        0.5
                    }
                })
                .collect()
        }
    }
}

pub fn radical_inverse(mut n: u64, base: u64) -> f64 {
    let inv = 1.0 / base as f64;
    let mut f = inv;
    let mut r = 0.0;
    while n > 0 {
        r += (n % base) as f64 * f;
        n /= base;
        f *= inv;
    }
    r
}

/// Smallest per-axis count `k` with `k^dims ≥ count`.
fn grid_resolution(count: usize, dims: usize) -> usize {
    if dims == 0 {
        return 1;
    }
    let mut k = (count as f64).powf(1.0 / dims as f64).floor().max(1.0) as usize;
    while k.checked_pow(dims as u32).is_none_or(|v| v < count) {
        k += 1;
    }
    k
}

/// Joint state for sample `index` of the plan.
pub fn sample_state<T: Real>(
    model: &KinematicModel<T>,
    plan: &SamplingPlan<T>,
    index: usize,
) -> JointState<T> {
    if plan.deterministic_extremes && index == 0 {
        let ext = model.joints[model.extension_index()].max();
        return model.straight_state(ext);
    }
    let active = model.active_joints();
    let u = unit_sample(
        plan.scheme,
        plan.seed,
        index,
        plan.sample_count,
        active.len(),
    );
    let mut state = model.home_state();
    for (k, &i) in active.iter().enumerate() {
        let j = &model.joints[i];
        state[i] = (j.min() + j.range() * T::lit(u[k])).clamp(j.min(), j.max());
    }
    state
}

/// Samples joint space per `plan` and aggregates tip positions.
pub fn sample_workspace<T: Real>(
    model: &KinematicModel<T>,
    plan: &SamplingPlan<T>,
) -> Result<(PointCloud<T>, ReachReport<T>)> {
    plan.validate()?;
    let tip = plan.tip();
    let origin = model.base_pivot.position;
    let points: Vec<CloudPoint<T>> = (0..plan.sample_count)
        .into_par_iter()
        .map(|i| {
            let state = sample_state(model, plan, i);
            let p = tip.pose(&chain_poses(model, state.values())).position;
            CloudPoint {
                position: [p.x, p.y, p.z],
                reach: (p - origin).norm(),
            }
        })
        .collect();
    let cloud = PointCloud { points };
    let report = summarize(&cloud, plan.voxel_size, tip)?;
    Ok((cloud, report))
}

/// Reach extrema and voxel-occupancy volume of a cloud.
pub fn summarize<T: Real>(
    cloud: &PointCloud<T>,
    voxel_size: T,
    frame: TipFrame,
) -> Result<ReachReport<T>> {
    if cloud.is_empty() {
        return Err(Error::EmptyCloud);
    }
    let mut max_reach = cloud.points[0].reach;
    let mut min_reach = cloud.points[0].reach;
    for p in &cloud.points {
        max_reach = max_reach.max(p.reach);
        min_reach = min_reach.min(p.reach);
    }
    let voxels = occupied_voxels(cloud, voxel_size);
    let volume = T::lit(voxels.len() as f64) * voxel_size * voxel_size * voxel_size;
    Ok(ReachReport {
        max_reach,
        min_reach,
        volume_estimate: volume,
        forearm_multiple: max_reach / T::lit(FOREARM_LENGTH_MM),
        sample_count: cloud.len(),
        voxel_size,
        frame,
    })
}

pub fn occupied_voxels<T: Real>(cloud: &PointCloud<T>, voxel_size: T) -> HashSet<[i64; 3]> {
    cloud
        .points
        .iter()
        .map(|p| p.position.map(|c| (c / voxel_size).floor().to_f64() as i64))
        .collect()
}

/// Axis-aligned bounds of the limb in a stowed configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
pub struct CompactEnvelope<T: Real> {
    pub min: [T; 3],
    pub max: [T; 3],
    /// Largest radial distance from the mount axis (base x-axis).
    pub max_protrusion: T,
}

impl<T: Real> CompactEnvelope<T> {
    pub fn extent(&self) -> [T; 3] {
        [
            self.max[0] - self.min[0],
            self.max[1] - self.min[1],
            self.max[2] - self.min[2],
        ]
    }

    pub fn contains(&self, p: &Vector3<T>) -> bool {
        (0..3).all(|k| p[k] >= self.min[k] && p[k] <= self.max[k])
    }

    pub fn is_compact(&self) -> bool {
        self.max_protrusion <= T::lit(COMPACT_PROTRUSION_LIMIT_MM)
    }
}

const SEGMENT_SAMPLES: usize = 10;

/// Every point the envelope is built from: frame origins plus interior
/// samples along each link and the gripper.
pub fn envelope_points<T: Real>(
    model: &KinematicModel<T>,
    state: &JointState<T>,
) -> Result<Vec<Vector3<T>>> {
    model.check_len(state.len())?;
    let chain = chain_poses(model, state.values());
    let mut nodes = vec![model.base_pivot.position];
    nodes.extend(chain.joints.iter().map(|p| p.position));
    nodes.push(chain.end.position);
    nodes.push(chain.tool.position);
    let mut points = Vec::with_capacity(nodes.len() * (SEGMENT_SAMPLES + 1));
    for pair in nodes.windows(2) {
        for k in 0..=SEGMENT_SAMPLES {
            let t = T::lit(k as f64 / SEGMENT_SAMPLES as f64);
            points.push(pair[0] + (pair[1] - pair[0]) * t);
        }
    }
    points.push(chain.tool_base.position);
    Ok(points)
}

pub fn compact_envelope<T: Real>(
    model: &KinematicModel<T>,
    state: &JointState<T>,
) -> Result<CompactEnvelope<T>> {
    let points = envelope_points(model, state)?;
    let origin = model.base_pivot.position;
    let axis = model.base_pivot.world_axis(&Vector3::x());
    let mut min = points[0];
    let mut max = points[0];
    let mut protrusion = T::zero();
    for p in &points {
        min = min.inf(p);
        max = max.sup(p);
        let r = p - origin;
        protrusion = protrusion.max((r - axis * r.dot(&axis)).norm());
    }
    Ok(CompactEnvelope {
        min: [min.x, min.y, min.z],
        max: [max.x, max.y, max.z],
        max_protrusion: protrusion,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CloudFormat {
    Csv,
    Ply,
}

impl FromStr for CloudFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(CloudFormat::Csv),
            "ply" => Ok(CloudFormat::Ply),
            _ => Err(Error::UnknownFormat(s.to_string())),
        }
    }
}

/// CSV (`x_mm,y_mm,z_mm,reach_mm`) or ASCII PLY 1.0; six decimals, `\n` line ends.
pub fn export_point_cloud<T: Real>(cloud: &PointCloud<T>, format: CloudFormat) -> Result<Vec<u8>> {
    if cloud.is_empty() {
        return Err(Error::EmptyCloud);
    }
    let mut out = String::with_capacity(cloud.len() * 48 + 200);
    match format {
        CloudFormat::Csv => {
            out.push_str("x_mm,y_mm,z_mm,reach_mm\n");
            for p in &cloud.points {
                let [x, y, z] = p.position;
                let _ = writeln!(out, "{x:.6},{y:.6},{z:.6},{:.6}", p.reach);
            }
        }
        CloudFormat::Ply => {
            out.push_str("ply\nformat ascii 1.0\n");
            let _ = writeln!(out, "element vertex {}", cloud.len());
            out.push_str("property float x\nproperty float y\nproperty float z\nend_header\n");
            for p in &cloud.points {
                let [x, y, z] = p.position;
                let _ = writeln!(out, "{x:.6} {y:.6} {z:.6}");
            }
        }
    }
    Ok(out.into_bytes())
}
