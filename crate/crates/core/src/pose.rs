use nalgebra::{Matrix3, Rotation3, Unit, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::num::Real;

/// Rigid transform of a frame: position in millimeters and a world-from-frame rotation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "PoseRepr<T>", into = "PoseRepr<T>")]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
pub struct Pose<T: Real> {
    pub position: Vector3<T>,
    pub rotation: Rotation3<T>,
}

/// Wire/config form: `position = [x, y, z]`, `rotation = [r00, r01, ..., r22]` row-major.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
pub struct PoseRepr<T: Real> {
    pub position: [T; 3],
    pub rotation: [T; 9],
}

impl<T: Real> From<PoseRepr<T>> for Pose<T> {
    fn from(r: PoseRepr<T>) -> Self {
        let m = Matrix3::from_row_slice(&r.rotation);
        Pose {
            position: Vector3::from(r.position),
            rotation: Rotation3::from_matrix_unchecked(m),
        }
    }
}

impl<T: Real> From<Pose<T>> for PoseRepr<T> {
    fn from(p: Pose<T>) -> Self {
        PoseRepr {
            position: [p.position.x, p.position.y, p.position.z],
            rotation: p.rotation_row_major(),
        }
    }
}

impl<T: Real> Default for Pose<T> {
    fn default() -> Self {
        Self::identity()
    }
}

impl<T: Real> Pose<T> {
    pub fn identity() -> Self {
        Pose {
            position: Vector3::zeros(),
            rotation: Rotation3::identity(),
        }
    }

    pub fn new(position: Vector3<T>, rotation: Rotation3<T>) -> Self {
        Pose { position, rotation }
    }

    pub fn from_translation(position: Vector3<T>) -> Self {
        Pose {
            position,
            rotation: Rotation3::identity(),
        }
    }

    /// Builds a pose from a row-major 3x3 matrix, rejecting non-rotations.
    pub fn try_from_parts(position: [T; 3], rotation: [T; 9]) -> Result<Self> {
        let pose: Pose<T> = PoseRepr { position, rotation }.into();
        pose.check_orthonormal(T::lit(1e-9).max(T::validation_tol()))?;
        Ok(pose)
    }

    /// Accepts a rotation within `tol` of orthonormal (e.g. typed with few
    /// decimals) and replaces it with the nearest proper rotation.
    pub fn from_parts_projected(position: [T; 3], rotation: [T; 9], tol: T) -> Result<Self> {
        let rough: Pose<T> = PoseRepr { position, rotation }.into();
        rough.check_orthonormal(tol)?;
        let rotation = Rotation3::from_matrix_eps(
            rough.rotation.matrix(),
            T::default_epsilon(),
            0,
            Rotation3::identity(),
        );
        Ok(Pose {
            position: rough.position,
            rotation,
        })
    }

    /// `self * other`: express `other` (given in this frame) in the parent of this frame.
    pub fn compose(&self, other: &Pose<T>) -> Pose<T> {
        Pose {
            position: self.position + self.rotation * other.position,
            rotation: self.rotation * other.rotation,
        }
    }

    /// Pose advanced by `distance` along its own x-axis.
    pub fn advanced(&self, distance: T) -> Pose<T> {
        Pose {
            position: self.position + self.rotation * Vector3::x() * distance,
            rotation: self.rotation,
        }
    }

    pub fn rotated_about(&self, axis: &Unit<Vector3<T>>, angle: T) -> Pose<T> {
        Pose {
            position: self.position,
            rotation: self.rotation * Rotation3::from_axis_angle(axis, angle),
        }
    }

    /// Frame axis (given in local coordinates) expressed in the parent frame.
    pub fn world_axis(&self, local: &Vector3<T>) -> Vector3<T> {
        self.rotation * local
    }

    pub fn rotation_row_major(&self) -> [T; 9] {
        let m = self.rotation.matrix();
        [
            m[(0, 0)],
            m[(0, 1)],
            m[(0, 2)],
            m[(1, 0)],
            m[(1, 1)],
            m[(1, 2)],
            m[(2, 0)],
            m[(2, 1)],
            m[(2, 2)],
        ]
    }

    /// Largest deviation of `RᵀR` from identity, and of `det R` from +1.
    pub fn orthonormality_error(&self) -> T {
        let m = self.rotation.matrix();
        let gram = m.transpose() * m - Matrix3::identity();
        let det_err = (m.determinant() - T::one()).abs();
        gram.amax().max(det_err)
    }

    pub fn check_orthonormal(&self, tol: T) -> Result<()> {
        let err = self.orthonormality_error();
        if err > tol || !err.is_finite() {
            return Err(Error::Validation(format!(
                "rotation is not a proper orthonormal matrix (error {err})"
            )));
        }
        Ok(())
    }

    /// Axis-angle vector of `target.rotation * self.rotationᵀ`.
    pub fn rotation_error_to(&self, target: &Pose<T>) -> Vector3<T> {
        (target.rotation * self.rotation.inverse()).scaled_axis()
    }
}
