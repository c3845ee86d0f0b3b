//! Rigid object-to-camera transforms.

use nalgebra::{Matrix3, Rotation3, Vector3};
use thiserror::Error;

/// Per-entry tolerance for `R^T R = I` and `det R = 1`.
pub const ROTATION_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PoseError {
    #[error("pose contains non-finite values")]
    NonFinite,
    #[error("rotation is not orthonormal (max |R^T R - I| = {0:e})")]
    NotOrthonormal(f64),
    #[error("rotation determinant is {0}, expected +1")]
    BadDeterminant(f64),
}

/// Rotation `R` and translation `t` (millimeters) mapping model coordinates
/// into the camera frame: `x_cam = R x + t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    rotation: Matrix3<f64>,
    translation: Vector3<f64>,
}

impl Pose {
    /// Validates the rotation block; nothing is re-orthonormalized.
    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Result<Self, PoseError> {
        if rotation
            .iter()
            .chain(translation.iter())
            .any(|v| !v.is_finite())
        {
            return Err(PoseError::NonFinite);
        }
        let deviation = (rotation.transpose() * rotation - Matrix3::identity()).amax();
        if deviation > ROTATION_TOLERANCE {
            return Err(PoseError::NotOrthonormal(deviation));
        }
        let det = rotation.determinant();
        if (det - 1.0).abs() > ROTATION_TOLERANCE {
            return Err(PoseError::BadDeterminant(det));
        }
        Ok(Self {
            rotation,
            translation,
        })
    }

    /// From 9 row-major rotation entries and a translation, as stored in BOP files.
    pub fn from_row_major(r: &[f64; 9], t: &[f64; 3]) -> Result<Self, PoseError> {
        Self::new(Matrix3::from_row_slice(r), Vector3::from_row_slice(t))
    }

    pub(crate) fn from_parts_unchecked(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Self {
        Self {
            rotation,
            translation,
        }
    }

    pub fn identity() -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
        }
    }

    /// Rotation `exp([omega]x)` followed by translation `t`.
    pub fn from_axis_angle(omega: Vector3<f64>, translation: Vector3<f64>) -> Self {
        Self {
            rotation: Rotation3::new(omega).into_inner(),
            translation,
        }
    }

    pub fn from_translation(translation: Vector3<f64>) -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation,
        }
    }

    pub fn rotation(&self) -> &Matrix3<f64> {
        &self.rotation
    }

    pub fn translation(&self) -> &Vector3<f64> {
        &self.translation
    }

    #[rustfmt::skip]
    pub fn rotation_row_major(&self) -> [f64; 9] {
        let r = &self.rotation;
        [
            r[(0, 0)], r[(0, 1)], r[(0, 2)],
            r[(1, 0)], r[(1, 1)], r[(1, 2)],
            r[(2, 0)], r[(2, 1)], r[(2, 2)],
        ]
    }

    pub fn translation_array(&self) -> [f64; 3] {
        [self.translation.x, self.translation.y, self.translation.z]
    }

    pub fn transform_point(&self, x: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * x + self.translation
    }

    /// `self * other`: apply `other` first.
    pub fn compose(&self, other: &Pose) -> Pose {
        Pose {
            rotation: self.rotation * other.rotation,
            translation: self.rotation * other.translation + self.translation,
        }
    }

    pub fn inverse(&self) -> Pose {
        let rt = self.rotation.transpose();
        Pose {
            rotation: rt,
            translation: -(rt * self.translation),
        }
    }

    /// Geodesic angle (radians) between the rotation blocks.
    pub fn rotation_angle_to(&self, other: &Pose) -> f64 {
        // atan2 keeps full precision near 0 where acos of the trace does not
        let r = self.rotation.transpose() * other.rotation;
        let sin = 0.5
            * Vector3::new(
                r[(2, 1)] - r[(1, 2)],
                r[(0, 2)] - r[(2, 0)],
                r[(1, 0)] - r[(0, 1)],
            )
            .norm();
        let cos = 0.5 * (r.trace() - 1.0);
        sin.atan2(cos)
    }

    pub fn translation_distance_to(&self, other: &Pose) -> f64 {
        (self.translation - other.translation).norm()
    }
}

impl Default for Pose {
    fn default() -> Self {
        Self::identity()
    }
}
