use std::collections::BTreeMap;

use edgepose_core::dataset::{
    load_detections, load_pose_estimates, read_ply_points, write_detections, write_ply,
    write_pose_estimates, PlyEncoding,
};
use edgepose_core::imaging::{load_png, save_png};
use edgepose_core::{
    BBox, CameraIntrinsics, DatasetIndex, EstimateRecord, GroundTruthRecord, Image, ImageKey,
    ModelPoints, Pose,
};
use nalgebra::Vector3;
use proptest::prelude::*;

fn finite() -> impl Strategy<Value = f64> {
    prop_oneof![
        -1e4f64..1e4,
        any::<f64>().prop_filter("finite", |v| v.is_finite())
    ]
}

fn pose() -> impl Strategy<Value = Pose> {
    (
        (-3.0f64..3.0, -3.0f64..3.0, -3.0f64..3.0),
        (finite(), finite(), -1e4f64..1e4),
    )
        .prop_map(|(w, t)| {
            Pose::from_axis_angle(Vector3::new(w.0, w.1, w.2), Vector3::new(t.0, t.1, t.2))
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn estimates_round_trip(rows in prop::collection::vec((0u32..5, 0u32..50, 1u32..30, 0.0f64..=1.0, pose(), prop::option::of(0.0f64..100.0)), 0..20)) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("e.csv");
        let records: Vec<EstimateRecord> = rows
            .into_iter()
            .map(|(scene_id, image_id, object_id, score, pose, time)| EstimateRecord { scene_id, image_id, object_id, score, pose, time })
            .collect();
        write_pose_estimates(&path, &records).unwrap();
        prop_assert_eq!(load_pose_estimates(&path).unwrap(), records);
    }

    #[test]
    fn detections_round_trip(rows in prop::collection::vec((0u32..5, 0u32..50, 0u32..30, finite(), finite(), 1e-6f64..1e4, 1e-6f64..1e4, 0.0f64..=1.0), 0..20)) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.json");
        let dets: Vec<(ImageKey, BBox)> = rows
            .into_iter()
            .map(|(s, i, c, x, y, w, h, score)| (ImageKey::new(s, i), BBox::new(x, y, w, h).with_score(score).with_class(c)))
            .collect();
        write_detections(&path, &dets).unwrap();
        prop_assert_eq!(load_detections(&path).unwrap(), dets);
    }

    #[test]
    fn ply_round_trip(pts in prop::collection::vec((finite(), finite(), finite()), 1..50), enc in 0u8..3) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.ply");
        let pts: Vec<Vector3<f64>> = pts.into_iter().map(|(x, y, z)| Vector3::new(x, y, z)).collect();
        let enc = [PlyEncoding::Ascii, PlyEncoding::BinaryLittleEndian, PlyEncoding::BinaryBigEndian][enc as usize];
        write_ply(&path, &pts, enc).unwrap();
        prop_assert_eq!(read_ply_points(&path).unwrap(), pts);
    }

    #[test]
    fn png_round_trip(w in 1usize..20, h in 1usize..20, rgb in any::<bool>(), seed in any::<u8>()) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("i.png");
        let c = if rgb { 3 } else { 1 };
        let data: Vec<u8> = (0..w * h * c).map(|i| (i as u8).wrapping_mul(31).wrapping_add(seed)).collect();
        let img = Image::new(w, h, c, data).unwrap();
        save_png(&img, &path).unwrap();
        prop_assert_eq!(load_png(&path).unwrap(), img);
    }
}

#[test]
fn dataset_index_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let k = CameraIntrinsics::new(600.0, 600.5, 320.0, 240.0).unwrap();
    let mut cameras = BTreeMap::new();
    let mut ground_truth = BTreeMap::new();
    for scene_id in [1, 2] {
        for image_id in 0..3 {
            let key = ImageKey::new(scene_id, image_id);
            cameras.insert(key, k);
            let records = (1..=3)
                .map(|object_id| GroundTruthRecord {
                    scene_id,
                    image_id,
                    object_id,
                    pose: Pose::from_axis_angle(
                        Vector3::new(0.1 * object_id as f64, 0.2 * image_id as f64, -0.3),
                        Vector3::new(10.0 * object_id as f64, -5.0, 700.0 + scene_id as f64),
                    ),
                    bbox: Some(
                        BBox::new(1.0, 2.0, 30.0 + object_id as f64, 40.0).with_class(object_id),
                    ),
                })
                .collect();
            ground_truth.insert(key, records);
        }
    }
    let models = (1..=3)
        .map(|id| {
            let pts = (0..20)
                .map(|i| {
                    Vector3::new(
                        i as f64 * 0.37,
                        (i * id) as f64 % 7.0,
                        -1.0 / (i + 1) as f64,
                    )
                })
                .collect();
            (id, ModelPoints::with_computed_diameter(pts, false).unwrap())
        })
        .collect();
    let index = DatasetIndex {
        root: dir.path().to_path_buf(),
        cameras,
        ground_truth,
        models,
    };
    index.write(dir.path()).unwrap();
    assert_eq!(DatasetIndex::load(dir.path()).unwrap(), index);

    std::fs::remove_file(dir.path().join("models/obj_000002.ply")).unwrap();
    let err = DatasetIndex::load(dir.path()).unwrap_err().to_string();
    assert!(err.contains("object 2") && err.contains("scene 1"), "{err}");
}
