use edgepose_core::pnp::{residuals_and_jacobian, retract};
use edgepose_core::{
    project, reprojection_rmse, solve_pnp, CameraIntrinsics, Correspondence, Pose,
};
use nalgebra::{Vector2, Vector3, Vector6};
use proptest::prelude::*;

fn camera() -> CameraIntrinsics {
    CameraIntrinsics::new(572.4, 573.6, 325.3, 242.0).unwrap()
}

/// A pose looking at the origin from 400..900 mm and a cloud of model
/// points spanning a few centimeters around it.
fn scene() -> impl Strategy<Value = (Pose, Vec<Vector3<f64>>)> {
    let w = (-3.0f64..3.0, -3.0f64..3.0, -3.0f64..3.0);
    let t = (-60.0f64..60.0, -60.0f64..60.0, 400.0f64..900.0);
    let pts = prop::collection::vec((-50.0f64..50.0, -50.0f64..50.0, -50.0f64..50.0), 6..40);
    (w, t, pts).prop_map(|(w, t, pts)| {
        (
            Pose::from_axis_angle(Vector3::new(w.0, w.1, w.2), Vector3::new(t.0, t.1, t.2)),
            pts.into_iter()
                .map(|(x, y, z)| Vector3::new(x, y, z))
                .collect(),
        )
    })
}

fn correspondences(pose: &Pose, pts: &[Vector3<f64>], k: &CameraIntrinsics) -> Vec<Correspondence> {
    pts.iter()
        .map(|x| Correspondence::new(*x, project(pose, k, x).unwrap()))
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn jacobian_matches_finite_differences((pose, pts) in scene(), du in -5.0f64..5.0) {
        let k = camera();
        let mut corr = correspondences(&pose, &pts, &k);
        for c in &mut corr {
            c.point2d += Vector2::new(du, -du);
        }
        let (_, jac) = residuals_and_jacobian(&pose, &k, &corr).unwrap();
        let h = 1e-6;
        for col in 0..6 {
            let mut d = Vector6::zeros();
            d[col] = h;
            let (rp, _) = residuals_and_jacobian(&retract(&pose, &d), &k, &corr).unwrap();
            d[col] = -h;
            let (rm, _) = residuals_and_jacobian(&retract(&pose, &d), &k, &corr).unwrap();
            let numeric = (rp - rm) / (2.0 * h);
            let analytic = jac.column(col);
            let scale = analytic.norm().max(1e-3);
            prop_assert!((numeric - analytic).norm() / scale < 1e-4, "column {}", col);
        }
    }

    #[test]
    fn noiseless_data_is_recovered((pose, pts) in scene()) {
        let k = camera();
        let corr = correspondences(&pose, &pts, &k);
        let result = solve_pnp(&corr, &k);
        // random clouds can be nearly planar; those may be rejected but never wrong
        if let Ok(result) = result {
            prop_assert!(result.pose.rotation_angle_to(&pose) < 1e-6);
            prop_assert!(result.pose.translation_distance_to(&pose) < 1e-3);
            prop_assert!(result.reprojection_rmse < 1e-6);
        }
    }

    #[test]
    fn refinement_reaches_at_most_the_true_cost((pose, pts) in scene(), seed in any::<u64>()) {
        let k = camera();
        let mut corr = correspondences(&pose, &pts, &k);
        let mut s = seed | 1;
        for c in &mut corr {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            let a = ((s >> 33) as f64 / (1u64 << 31) as f64 - 0.5) * 2.0;
            let b = ((s >> 11 & 0xfffff) as f64 / (1u64 << 20) as f64 - 0.5) * 2.0;
            c.point2d += Vector2::new(a, b);
        }
        if let Ok(result) = solve_pnp(&corr, &k) {
            let truth = reprojection_rmse(&pose, &k, &corr).unwrap();
            prop_assert!(result.reprojection_rmse <= truth + 1e-9, "{} > {}", result.reprojection_rmse, truth);
        }
    }

    #[test]
    fn order_of_correspondences_does_not_matter((pose, pts) in scene()) {
        let k = camera();
        let corr = correspondences(&pose, &pts, &k);
        let mut reversed = corr.clone();
        reversed.reverse();
        if let (Ok(a), Ok(b)) = (solve_pnp(&corr, &k), solve_pnp(&reversed, &k)) {
            prop_assert!(a.pose.rotation_angle_to(&b.pose) < 1e-6);
            prop_assert!(a.pose.translation_distance_to(&b.pose) < 1e-3);
        }
    }
}
