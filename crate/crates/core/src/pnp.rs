//! Perspective-n-Point: object pose from 3D-2D correspondences.
//!
//! The solver initialises with a normalised direct linear transform on the
//! projection equations, snaps the rotation block to the closest rotation and
//! then minimises the squared reprojection error with Levenberg-Marquardt over
//! a right-multiplied axis-angle increment plus a translation increment.

use nalgebra::{
    DMatrix, DVector, Matrix2x3, Matrix3, Matrix6, Rotation3, Vector2, Vector3, Vector6, SVD,
};
use thiserror::Error;

use crate::pose::Pose;

/// Points closer to the camera plane than this are treated as behind it.
pub const MIN_DEPTH: f64 = 1e-9;
pub const MIN_CORRESPONDENCES: usize = 6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PnpError {
    #[error("need at least {MIN_CORRESPONDENCES} correspondences, got {0}")]
    InsufficientData(usize),
    #[error("degenerate point configuration (condition number {0:e})")]
    Degenerate(f64),
    #[error("linear initialisation places {behind} of {total} points behind the camera")]
    Initialization { behind: usize, total: usize },
    #[error("point {index} is behind the camera (depth {depth})")]
    BehindCamera { index: usize, depth: f64 },
    #[error("correspondence {0} has non-finite coordinates")]
    NonFinite(usize),
    #[error("invalid intrinsics: focal lengths must be positive and finite")]
    InvalidIntrinsics,
}

/// Pinhole intrinsics in pixels.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
}

impl CameraIntrinsics {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64) -> Result<Self, PnpError> {
        let k = Self { fx, fy, cx, cy };
        k.validate()?;
        Ok(k)
    }

    pub fn validate(&self) -> Result<(), PnpError> {
        let finite = [self.fx, self.fy, self.cx, self.cy]
            .iter()
            .all(|v| v.is_finite());
        if finite && self.fx > 0.0 && self.fy > 0.0 {
            Ok(())
        } else {
            Err(PnpError::InvalidIntrinsics)
        }
    }

    /// From a row-major 3x3 camera matrix.
    pub fn from_matrix_row_major(k: &[f64; 9]) -> Result<Self, PnpError> {
        Self::new(k[0], k[4], k[2], k[5])
    }

    pub fn to_matrix_row_major(&self) -> [f64; 9] {
        [self.fx, 0.0, self.cx, 0.0, self.fy, self.cy, 0.0, 0.0, 1.0]
    }
}

/// A model point (millimeters) and its observed pixel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Correspondence {
    pub point3d: Vector3<f64>,
    pub point2d: Vector2<f64>,
}

impl Correspondence {
    pub fn new(point3d: Vector3<f64>, point2d: Vector2<f64>) -> Self {
        Self { point3d, point2d }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PnpOptions {
    pub max_iterations: usize,
    /// Stop when `|J^T r|` drops below this.
    pub gradient_tolerance: f64,
    /// Stop when the proposed increment is shorter than this.
    pub step_tolerance: f64,
    pub initial_damping: f64,
    /// Largest accepted ratio between the largest and the second smallest
    /// singular value of the DLT system.
    pub condition_limit: f64,
}

impl Default for PnpOptions {
    fn default() -> Self {
        Self {
            max_iterations: 100,
            gradient_tolerance: 1e-10,
            step_tolerance: 1e-12,
            initial_damping: 1e-3,
            condition_limit: 1e12,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    GradientTolerance,
    StepTolerance,
    MaxIterations,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PnpResult {
    pub pose: Pose,
    /// Pixels.
    pub reprojection_rmse: f64,
    pub iterations: usize,
    pub converged: bool,
    pub termination: Termination,
    /// Condition number of the linear initialisation system.
    pub condition: f64,
}

fn project_camera_point(k: &CameraIntrinsics, p: &Vector3<f64>) -> Vector2<f64> {
    Vector2::new(k.fx * p.x / p.z + k.cx, k.fy * p.y / p.z + k.cy)
}

/// Pixel coordinates of model point `x` under `pose`.
pub fn project(
    pose: &Pose,
    k: &CameraIntrinsics,
    x: &Vector3<f64>,
) -> Result<Vector2<f64>, PnpError> {
    let p = pose.transform_point(x);
    if p.z <= MIN_DEPTH {
        return Err(PnpError::BehindCamera {
            index: 0,
            depth: p.z,
        });
    }
    Ok(project_camera_point(k, &p))
}

/// Stacked residuals `project(X_i) - uv_i` (2n) and their Jacobian (2n x 6)
/// with respect to `[omega, delta_t]` as applied by [`retract`].
pub fn residuals_and_jacobian(
    pose: &Pose,
    k: &CameraIntrinsics,
    correspondences: &[Correspondence],
) -> Result<(DVector<f64>, DMatrix<f64>), PnpError> {
    let n = correspondences.len();
    let mut r = DVector::zeros(2 * n);
    let mut jac = DMatrix::zeros(2 * n, 6);
    let rot = pose.rotation();
    for (i, c) in correspondences.iter().enumerate() {
        let p = pose.transform_point(&c.point3d);
        if p.z <= MIN_DEPTH {
            return Err(PnpError::BehindCamera {
                index: i,
                depth: p.z,
            });
        }
        let uv = project_camera_point(k, &p);
        r[2 * i] = uv.x - c.point2d.x;
        r[2 * i + 1] = uv.y - c.point2d.y;

        let iz = 1.0 / p.z;
        let d_proj = Matrix2x3::new(
            k.fx * iz,
            0.0,
            -k.fx * p.x * iz * iz,
            0.0,
            k.fy * iz,
            -k.fy * p.y * iz * iz,
        );
        // d(R exp(w) X)/dw at w = 0 is -R [X]x
        let d_rot = -(rot * c.point3d.cross_matrix());
        let j_rot = d_proj * d_rot;
        for row in 0..2 {
            for col in 0..3 {
                jac[(2 * i + row, col)] = j_rot[(row, col)];
                jac[(2 * i + row, col + 3)] = d_proj[(row, col)];
            }
        }
    }
    Ok((r, jac))
}

/// `R <- R exp([omega]x)`, `t <- t + delta_t` for `delta = [omega, delta_t]`.
pub fn retract(pose: &Pose, delta: &Vector6<f64>) -> Pose {
    let omega = Vector3::new(delta[0], delta[1], delta[2]);
    let dt = Vector3::new(delta[3], delta[4], delta[5]);
    let rotation = pose.rotation() * Rotation3::new(omega).into_inner();
    Pose::from_parts_unchecked(rotation, pose.translation() + dt)
}

/// `sqrt(mean_i |project(X_i) - uv_i|^2)`.
pub fn reprojection_rmse(
    pose: &Pose,
    k: &CameraIntrinsics,
    correspondences: &[Correspondence],
) -> Result<f64, PnpError> {
    if correspondences.is_empty() {
        return Ok(0.0);
    }
    let mut sum = 0.0;
    for (i, c) in correspondences.iter().enumerate() {
        let p = pose.transform_point(&c.point3d);
        if p.z <= MIN_DEPTH {
            return Err(PnpError::BehindCamera {
                index: i,
                depth: p.z,
            });
        }
        sum += (project_camera_point(k, &p) - c.point2d).norm_squared();
    }
    Ok((sum / correspondences.len() as f64).sqrt())
}

/// Solves for the model-to-camera pose with default options.
pub fn solve_pnp(
    correspondences: &[Correspondence],
    k: &CameraIntrinsics,
) -> Result<PnpResult, PnpError> {
    solve_pnp_with(correspondences, k, &PnpOptions::default())
}

pub fn solve_pnp_with(
    correspondences: &[Correspondence],
    k: &CameraIntrinsics,
    options: &PnpOptions,
) -> Result<PnpResult, PnpError> {
    k.validate()?;
    if correspondences.len() < MIN_CORRESPONDENCES {
        return Err(PnpError::InsufficientData(correspondences.len()));
    }
    for (i, c) in correspondences.iter().enumerate() {
        if c.point3d
            .iter()
            .chain(c.point2d.iter())
            .any(|v| !v.is_finite())
        {
            return Err(PnpError::NonFinite(i));
        }
    }

    let (initial, condition) = linear_initialization(correspondences, k, options.condition_limit)?;
    let behind = correspondences
        .iter()
        .filter(|c| initial.transform_point(&c.point3d).z <= MIN_DEPTH)
        .count();
    if behind > 0 {
        return Err(PnpError::Initialization {
            behind,
            total: correspondences.len(),
        });
    }

    let (pose, iterations, termination) = refine(initial, correspondences, k, options)?;
    let reprojection_rmse = reprojection_rmse(&pose, k, correspondences)?;
    Ok(PnpResult {
        pose,
        reprojection_rmse,
        iterations,
        converged: termination != Termination::MaxIterations,
        termination,
        condition,
    })
}

/// Centroid and isotropic scale so that the mean distance to the centroid
/// becomes `sqrt(dim)`.
fn normalization<const D: usize>(
    points: impl Iterator<Item = [f64; D]> + Clone,
) -> ([f64; D], f64) {
    let n = points.clone().count() as f64;
    let mut centroid = [0.0; D];
    for p in points.clone() {
        for a in 0..D {
            centroid[a] += p[a] / n;
        }
    }
    let mean_dist = points
        .map(|p| {
            (0..D)
                .map(|a| (p[a] - centroid[a]).powi(2))
                .sum::<f64>()
                .sqrt()
        })
        .sum::<f64>()
        / n;
    let scale = if mean_dist > 0.0 {
        (D as f64).sqrt() / mean_dist
    } else {
        1.0
    };
    (centroid, scale)
}

fn linear_initialization(
    correspondences: &[Correspondence],
    k: &CameraIntrinsics,
    condition_limit: f64,
) -> Result<(Pose, f64), PnpError> {
    let rays: Vec<[f64; 2]> = correspondences
        .iter()
        .map(|c| [(c.point2d.x - k.cx) / k.fx, (c.point2d.y - k.cy) / k.fy])
        .collect();
    let (c2, s2) = normalization(rays.iter().copied());
    let (c3, s3) = normalization(
        correspondences
            .iter()
            .map(|c| [c.point3d.x, c.point3d.y, c.point3d.z]),
    );

    let n = correspondences.len();
    let mut a = DMatrix::<f64>::zeros(2 * n, 12);
    for (i, (c, ray)) in correspondences.iter().zip(&rays).enumerate() {
        let xh = [
            (c.point3d.x - c3[0]) * s3,
            (c.point3d.y - c3[1]) * s3,
            (c.point3d.z - c3[2]) * s3,
            1.0,
        ];
        let u = (ray[0] - c2[0]) * s2;
        let v = (ray[1] - c2[1]) * s2;
        for j in 0..4 {
            a[(2 * i, j)] = xh[j];
            a[(2 * i, 8 + j)] = -u * xh[j];
            a[(2 * i + 1, 4 + j)] = xh[j];
            a[(2 * i + 1, 8 + j)] = -v * xh[j];
        }
    }

    let svd = SVD::new(a, false, true);
    let v_t = svd.v_t.as_ref().expect("requested V^T");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&i, &j| svd.singular_values[j].total_cmp(&svd.singular_values[i]));
    let sigma = |rank: usize| svd.singular_values[order[rank]];
    let condition = sigma(0) / sigma(10);
    if !condition.is_finite() || condition > condition_limit {
        return Err(PnpError::Degenerate(condition));
    }
    let null = v_t.row(order[11]);

    // P = T2^-1 P' T3
    let p_norm = DMatrix::from_fn(3, 4, |r, c| null[4 * r + c]);
    let t2_inv = DMatrix::from_row_slice(
        3,
        3,
        &[1.0 / s2, 0.0, c2[0], 0.0, 1.0 / s2, c2[1], 0.0, 0.0, 1.0],
    );
    let t3 = DMatrix::from_row_slice(
        4,
        4,
        &[
            s3,
            0.0,
            0.0,
            -s3 * c3[0],
            0.0,
            s3,
            0.0,
            -s3 * c3[1],
            0.0,
            0.0,
            s3,
            -s3 * c3[2],
            0.0,
            0.0,
            0.0,
            1.0,
        ],
    );
    let mut p = t2_inv * p_norm * t3;

    let depth_sum: f64 = correspondences
        .iter()
        .map(|c| {
            p[(2, 0)] * c.point3d.x + p[(2, 1)] * c.point3d.y + p[(2, 2)] * c.point3d.z + p[(2, 3)]
        })
        .sum();
    if depth_sum < 0.0 {
        p = -p;
    }

    let m = Matrix3::from_fn(|r, c| p[(r, c)]);
    let msvd = m.svd(true, true);
    let (u, vt) = (
        msvd.u.expect("requested U"),
        msvd.v_t.expect("requested V^T"),
    );
    let d = (u * vt).determinant().signum();
    let rotation = u * Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, d)) * vt;
    let scale = msvd.singular_values.sum() / 3.0;
    if !(scale.is_finite() && scale > 0.0) {
        return Err(PnpError::Degenerate(f64::INFINITY));
    }
    let translation = Vector3::new(p[(0, 3)], p[(1, 3)], p[(2, 3)]) / scale;
    Ok((Pose::from_parts_unchecked(rotation, translation), condition))
}

fn refine(
    mut pose: Pose,
    correspondences: &[Correspondence],
    k: &CameraIntrinsics,
    options: &PnpOptions,
) -> Result<(Pose, usize, Termination), PnpError> {
    let (mut r, mut jac) = residuals_and_jacobian(&pose, k, correspondences)?;
    let mut cost = r.norm_squared();
    let mut lambda = options.initial_damping;

    for iteration in 1..=options.max_iterations {
        let gradient: Vector6<f64> = Vector6::from_iterator((jac.transpose() * &r).iter().copied());
        if gradient.norm() < options.gradient_tolerance {
            return Ok((pose, iteration - 1, Termination::GradientTolerance));
        }
        let normal: Matrix6<f64> = Matrix6::from_iterator((jac.transpose() * &jac).iter().copied());
        let mut damped = normal;
        for d in 0..6 {
            damped[(d, d)] += lambda * normal[(d, d)].max(f64::MIN_POSITIVE);
        }
        let Some(chol) = damped.cholesky() else {
            lambda *= 10.0;
            continue;
        };
        let step = -chol.solve(&gradient);
        if step.norm() < options.step_tolerance {
            return Ok((pose, iteration, Termination::StepTolerance));
        }

        let candidate = retract(&pose, &step);
        match residuals_and_jacobian(&candidate, k, correspondences) {
            Ok((r_new, jac_new)) if r_new.norm_squared() < cost => {
                cost = r_new.norm_squared();
                pose = candidate;
                r = r_new;
                jac = jac_new;
                lambda = (lambda / 10.0).max(1e-15);
            }
            // uphill or through the camera plane
            _ => lambda *= 10.0,
        }
    }
    Ok((pose, options.max_iterations, Termination::MaxIterations))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn k() -> CameraIntrinsics {
        CameraIntrinsics::new(600.0, 580.0, 320.0, 240.0).unwrap()
    }

    fn cube_points() -> Vec<Vector3<f64>> {
        vec![
            Vector3::new(-50.0, -40.0, 30.0),
            Vector3::new(60.0, -45.0, -20.0),
            Vector3::new(55.0, 50.0, 40.0),
            Vector3::new(-45.0, 55.0, -35.0),
            Vector3::new(0.0, 0.0, 70.0),
            Vector3::new(10.0, -60.0, -60.0),
            Vector3::new(-70.0, 5.0, 10.0),
            Vector3::new(30.0, 20.0, -75.0),
        ]
    }

    fn synth(pose: &Pose, points: &[Vector3<f64>]) -> Vec<Correspondence> {
        points
            .iter()
            .map(|x| Correspondence::new(*x, project(pose, &k(), x).unwrap()))
            .collect()
    }

    #[test]
    fn projection_examples() {
        let unit = CameraIntrinsics::new(1.0, 1.0, 0.0, 0.0).unwrap();
        let uv = project(&Pose::identity(), &unit, &Vector3::new(0.0, 0.0, 1.0)).unwrap();
        assert_eq!(uv, Vector2::new(0.0, 0.0));

        let cam = CameraIntrinsics::new(500.0, 500.0, 320.0, 240.0).unwrap();
        let uv = project(&Pose::identity(), &cam, &Vector3::new(100.0, 0.0, 1000.0)).unwrap();
        assert!((uv - Vector2::new(370.0, 240.0)).norm() < 1e-12);

        assert!(matches!(
            project(&Pose::identity(), &cam, &Vector3::new(0.0, 0.0, -5.0)),
            Err(PnpError::BehindCamera { .. })
        ));
    }

    #[test]
    fn intrinsics_validation() {
        assert!(CameraIntrinsics::new(0.0, 1.0, 0.0, 0.0).is_err());
        assert!(CameraIntrinsics::new(1.0, f64::NAN, 0.0, 0.0).is_err());
        let m = k().to_matrix_row_major();
        assert_eq!(CameraIntrinsics::from_matrix_row_major(&m).unwrap(), k());
    }

    #[test]
    fn rmse_examples() {
        let pose = Pose::from_translation(Vector3::new(0.0, 0.0, 1000.0));
        let mut corr = synth(&pose, &cube_points());
        assert_eq!(reprojection_rmse(&pose, &k(), &corr).unwrap(), 0.0);
        let single = [Correspondence::new(
            corr[0].point3d,
            corr[0].point2d + Vector2::new(3.0, 4.0),
        )];
        assert!((reprojection_rmse(&pose, &k(), &single).unwrap() - 5.0).abs() < 1e-12);
        corr[2].point3d.z = -5000.0;
        assert!(matches!(
            reprojection_rmse(&pose, &k(), &corr),
            Err(PnpError::BehindCamera { index: 2, .. })
        ));
    }

    #[test]
    fn recovers_identity_rotation() {
        // the points sit in front of the camera, so shift them instead of the pose
        let pts: Vec<_> = cube_points()
            .iter()
            .map(|p| p + Vector3::new(0.0, 0.0, 800.0))
            .collect();
        let corr = synth(&Pose::identity(), &pts);
        let result = solve_pnp(&corr, &k()).unwrap();
        assert!(result.converged);
        assert!(result.pose.rotation_angle_to(&Pose::identity()) < 1e-8);
        assert!(result.pose.translation().norm() < 1e-8);
        assert!(result.reprojection_rmse < 1e-8);
    }

    #[test]
    fn recovers_general_pose() {
        let truth = Pose::from_axis_angle(
            Vector3::new(0.4, -0.9, 0.3),
            Vector3::new(35.0, -20.0, 950.0),
        );
        let corr = synth(&truth, &cube_points());
        let result = solve_pnp(&corr, &k()).unwrap();
        assert!(result.converged, "{result:?}");
        assert!(result.pose.rotation_angle_to(&truth) < 1e-9);
        assert!(result.pose.translation_distance_to(&truth) < 1e-6);
        assert!(Pose::new(*result.pose.rotation(), *result.pose.translation()).is_ok());
    }

    #[test]
    fn rejects_small_and_degenerate_inputs() {
        let truth = Pose::from_translation(Vector3::new(0.0, 0.0, 1000.0));
        let corr = synth(&truth, &cube_points());
        assert_eq!(
            solve_pnp(&corr[..5], &k()),
            Err(PnpError::InsufficientData(5))
        );

        let line: Vec<_> = (0..8)
            .map(|i| Vector3::new(i as f64 * 10.0, 0.0, 0.0))
            .collect();
        assert!(matches!(
            solve_pnp(&synth(&truth, &line), &k()),
            Err(PnpError::Degenerate(_))
        ));

        let plane: Vec<_> = (0..9)
            .map(|i| Vector3::new((i % 3) as f64 * 40.0, (i / 3) as f64 * 40.0, 0.0))
            .collect();
        assert!(matches!(
            solve_pnp(&synth(&truth, &plane), &k()),
            Err(PnpError::Degenerate(_))
        ));

        let mut bad = corr.clone();
        bad[3].point2d.x = f64::INFINITY;
        assert_eq!(solve_pnp(&bad, &k()), Err(PnpError::NonFinite(3)));
    }

    #[test]
    fn retract_zero_is_identity() {
        let pose = Pose::from_axis_angle(Vector3::new(0.1, 0.2, 0.3), Vector3::new(1.0, 2.0, 3.0));
        assert_eq!(retract(&pose, &Vector6::zeros()), pose);
    }
}
