//! Deterministic synthetic dataset: 2 scenes x 3 images x 3 objects, with
//! models, rendered PNGs, pose estimates, detections and a PnP problem.

#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use edgepose_core::dataset::{write_detections, write_pose_estimates};
use edgepose_core::imaging::save_png;
use edgepose_core::{
    project, BBox, CameraIntrinsics, DatasetIndex, EstimateRecord, GroundTruthRecord, Image,
    ImageKey, ModelPoints, Pose,
};
use nalgebra::Vector3;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

pub const WIDTH: usize = 64;
pub const HEIGHT: usize = 48;

pub struct Fixture {
    pub root: PathBuf,
    pub images: PathBuf,
    pub estimates: PathBuf,
    pub detections: PathBuf,
    pub correspondences: PathBuf,
    pub intrinsics: PathBuf,
    pub pnp_truth: Pose,
}

pub fn camera() -> CameraIntrinsics {
    CameraIntrinsics::new(80.0, 80.0, 32.0, 24.0).unwrap()
}

fn model(id: u32, rng: &mut StdRng) -> Vec<Vector3<f64>> {
    match id {
        // cube corners and edge midpoints, 40 mm
        1 => {
            let mut pts = Vec::new();
            for x in [-20.0, 0.0, 20.0] {
                for y in [-20.0, 0.0, 20.0] {
                    for z in [-20.0, 0.0, 20.0] {
                        if [x, y, z].iter().filter(|v: &&f64| **v == 0.0).count() <= 1 {
                            pts.push(Vector3::new(x, y, z));
                        }
                    }
                }
            }
            pts
        }
        // cylinder, radius 15 mm, height 50 mm
        2 => (0..60)
            .map(|i| {
                let a = i as f64 * std::f64::consts::TAU / 12.0;
                Vector3::new(
                    15.0 * a.cos(),
                    15.0 * a.sin(),
                    -25.0 + 10.0 * (i / 12) as f64,
                )
            })
            .collect(),
        _ => (0..80)
            .map(|_| {
                Vector3::new(
                    rng.random_range(-30.0..30.0),
                    rng.random_range(-10.0..10.0),
                    rng.random_range(-20.0..20.0),
                )
            })
            .collect(),
    }
}

fn bbox_of(pose: &Pose, pts: &[Vector3<f64>], k: &CameraIntrinsics, class: u32) -> BBox {
    let uv: Vec<_> = pts.iter().map(|p| project(pose, k, p).unwrap()).collect();
    let (x0, x1) = uv
        .iter()
        .fold((f64::MAX, f64::MIN), |(a, b), p| (a.min(p.x), b.max(p.x)));
    let (y0, y1) = uv
        .iter()
        .fold((f64::MAX, f64::MIN), |(a, b), p| (a.min(p.y), b.max(p.y)));
    BBox::new(x0, y0, x1 - x0, y1 - y0).with_class(class)
}

fn render(
    records: &[GroundTruthRecord],
    models: &BTreeMap<u32, ModelPoints>,
    k: &CameraIntrinsics,
) -> Image {
    let mut data: Vec<u8> = (0..WIDTH * HEIGHT)
        .flat_map(|i| {
            let (x, y) = (i % WIDTH, i / WIDTH);
            [(40 + x) as u8, (30 + y) as u8, 90]
        })
        .collect();
    for r in records {
        for p in &models[&r.object_id].points {
            let uv = project(&r.pose, k, p).unwrap();
            let (x, y) = (uv.x.round() as i64, uv.y.round() as i64);
            for (dx, dy) in [(0, 0), (1, 0), (0, 1), (1, 1)] {
                let (px, py) = (x + dx, y + dy);
                if (0..WIDTH as i64).contains(&px) && (0..HEIGHT as i64).contains(&py) {
                    let i = (py as usize * WIDTH + px as usize) * 3;
                    data[i..i + 3].copy_from_slice(&[230, 230, 240]);
                }
            }
        }
    }
    Image::new(WIDTH, HEIGHT, 3, data).unwrap()
}

/// Writes the fixture under `dir` and returns its paths.
pub fn build(dir: &Path) -> Fixture {
    let mut rng = StdRng::seed_from_u64(0x5eed);
    let k = camera();
    let models: BTreeMap<u32, ModelPoints> = (1..=3)
        .map(|id| {
            (
                id,
                ModelPoints::with_computed_diameter(model(id, &mut rng), false).unwrap(),
            )
        })
        .collect();

    let mut cameras = BTreeMap::new();
    let mut ground_truth = BTreeMap::new();
    for scene_id in [1u32, 2] {
        for image_id in 0..3u32 {
            let key = ImageKey::new(scene_id, image_id);
            cameras.insert(key, k);
            let records: Vec<GroundTruthRecord> = (1..=3u32)
                .map(|object_id| {
                    let w = Vector3::new(
                        rng.random_range(-1.0..1.0),
                        rng.random_range(-1.0..1.0),
                        rng.random_range(-3.0..3.0),
                    );
                    let t = Vector3::new(
                        -120.0 + 120.0 * (object_id - 1) as f64,
                        rng.random_range(-40.0..40.0),
                        rng.random_range(550.0..700.0),
                    );
                    let pose = Pose::from_axis_angle(w, t);
                    GroundTruthRecord {
                        scene_id,
                        image_id,
                        object_id,
                        pose,
                        bbox: Some(bbox_of(&pose, &models[&object_id].points, &k, object_id)),
                    }
                })
                .collect();
            ground_truth.insert(key, records);
        }
    }
    let root = dir.join("dataset");
    let index = DatasetIndex {
        root: root.clone(),
        cameras,
        ground_truth,
        models,
    };
    index.write(&root).unwrap();

    let images = dir.join("images");
    for (key, records) in &index.ground_truth {
        let path = images.join(format!("{:06}/rgb/{:06}.png", key.scene_id, key.image_id));
        std::fs::create_dir_all(path.parent().unwrap()).unwrap();
        save_png(&render(records, &index.models, &k), &path).unwrap();
    }

    // Estimates: alternate accurate / far off, skip one instance, add an unknown object.
    let mut estimates = Vec::new();
    for (i, r) in index.records().enumerate() {
        if i == 4 {
            continue;
        }
        let offset = if i % 3 == 2 { 60.0 } else { 0.5 };
        estimates.push(EstimateRecord {
            scene_id: r.scene_id,
            image_id: r.image_id,
            object_id: r.object_id,
            score: 0.5 + 0.01 * i as f64,
            pose: Pose::from_translation(Vector3::new(offset, 0.0, 0.0)).compose(&r.pose),
            time: if i % 2 == 0 { Some(0.25) } else { None },
        });
    }
    estimates.push(EstimateRecord {
        scene_id: 1,
        image_id: 0,
        object_id: 9,
        score: 1.0,
        pose: Pose::identity(),
        time: None,
    });
    let estimates_path = dir.join("estimates.csv");
    write_pose_estimates(&estimates_path, &estimates).unwrap();

    // Detections: shifted boxes, one miss, one false positive per scene.
    let mut detections = Vec::new();
    for (i, r) in index.records().enumerate() {
        let b = r.bbox.unwrap();
        if i == 7 {
            continue;
        }
        let shift = if i % 4 == 3 { b.w * 0.8 } else { 0.5 };
        detections.push((
            r.key(),
            BBox {
                x: b.x + shift,
                score: 0.9 - 0.02 * i as f64,
                ..b
            },
        ));
        if r.image_id == 1 && r.object_id == 2 {
            detections.push((
                r.key(),
                BBox::new(1.0, 1.0, 5.0, 5.0).with_score(0.3).with_class(2),
            ));
        }
    }
    let detections_path = dir.join("detections.json");
    write_detections(&detections_path, &detections).unwrap();

    // PnP: a noiseless projection of model 3 under the first record's pose.
    let truth = index.records().find(|r| r.object_id == 3).unwrap().pose;
    let mut csv = String::from("x3d,y3d,z3d,u,v\n");
    for p in index.models[&3].points.iter().take(15) {
        let uv = project(&truth, &k, p).unwrap();
        csv += &format!("{},{},{},{},{}\n", p.x, p.y, p.z, uv.x, uv.y);
    }
    let correspondences = dir.join("correspondences.csv");
    std::fs::write(&correspondences, csv).unwrap();
    let intrinsics = dir.join("intrinsics.json");
    std::fs::write(&intrinsics, serde_json::to_string(&k).unwrap()).unwrap();

    Fixture {
        root,
        images,
        estimates: estimates_path,
        detections: detections_path,
        correspondences,
        intrinsics,
        pnp_truth: truth,
    }
}
