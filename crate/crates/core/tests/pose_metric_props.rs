use edgepose_core::pose_metrics::add_s_accelerated;
use edgepose_core::{add, add_s, score_pose, ModelPoints, Pose};
use nalgebra::Vector3;
use proptest::prelude::*;

fn vec3(range: f64) -> impl Strategy<Value = Vector3<f64>> {
    (-range..range, -range..range, -range..range).prop_map(|(x, y, z)| Vector3::new(x, y, z))
}

fn pose() -> impl Strategy<Value = Pose> {
    (vec3(3.0), vec3(500.0)).prop_map(|(w, t)| Pose::from_axis_angle(w, t))
}

fn model() -> impl Strategy<Value = ModelPoints> {
    prop::collection::vec(vec3(100.0), 2..60)
        .prop_filter("distinct points", |p| {
            p.iter().any(|q| (q - p[0]).norm() > 1e-3)
        })
        .prop_map(|p| ModelPoints::with_computed_diameter(p, false).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn identical_poses_score_zero(m in model(), p in pose()) {
        prop_assert!(add(&m, &p, &p).unwrap() < 1e-9);
        prop_assert!(add_s(&m, &p, &p).unwrap() < 1e-9);
    }

    #[test]
    fn add_is_symmetric(m in model(), a in pose(), b in pose()) {
        let ab = add(&m, &a, &b).unwrap();
        let ba = add(&m, &b, &a).unwrap();
        prop_assert!((ab - ba).abs() <= 1e-9 * ab.max(1.0));
    }

    #[test]
    fn add_s_never_exceeds_add(m in model(), a in pose(), b in pose()) {
        prop_assert!(add_s(&m, &a, &b).unwrap() <= add(&m, &a, &b).unwrap() + 1e-9);
    }

    #[test]
    fn invariant_under_common_camera_motion(m in model(), a in pose(), b in pose(), g in pose()) {
        let d = add(&m, &a, &b).unwrap();
        let moved = add(&m, &g.compose(&a), &g.compose(&b)).unwrap();
        prop_assert!((d - moved).abs() <= 1e-8 * d.max(1.0));
        let ds = add_s(&m, &a, &b).unwrap();
        let moved_s = add_s(&m, &g.compose(&a), &g.compose(&b)).unwrap();
        prop_assert!((ds - moved_s).abs() <= 1e-8 * ds.max(1.0));
    }

    #[test]
    fn pure_translation_offset(m in model(), p in pose(), d in vec3(50.0)) {
        let shifted = Pose::from_translation(d).compose(&p);
        prop_assert!((add(&m, &shifted, &p).unwrap() - d.norm()).abs() < 1e-9 * d.norm().max(1.0));
    }

    #[test]
    fn grid_search_is_exact(m in model(), a in pose(), b in pose()) {
        prop_assert_eq!(add_s(&m, &a, &b).unwrap().to_bits(), add_s_accelerated(&m, &a, &b).unwrap().to_bits());
    }

    #[test]
    fn threshold_is_strict(m in model(), p in pose(), ratio in 0.01f64..0.5) {
        // a translation of exactly the threshold is not accurate
        let thr = ratio * m.diameter;
        let shifted = Pose::from_translation(Vector3::new(thr, 0.0, 0.0)).compose(&p);
        let score = score_pose(&m, &shifted, &p, ratio).unwrap();
        prop_assert!((score.add_value - thr).abs() < 1e-9 * thr.max(1.0));
        if score.add_value >= score.threshold {
            prop_assert!(!score.accurate);
        } else {
            prop_assert!(score.accurate);
        }
    }
}
