//! BOP-style dataset files: per-scene ground truth and cameras, PLY models,
//! pose estimate CSVs and detection JSON.
//!
//! Layout understood by [`DatasetIndex::load`]:
//!
//! ```text
//! <root>/models/models_info.json         optional, {"<obj_id>": {"diameter": mm, ...}}
//! <root>/models/obj_<obj_id:06>.ply
//! <root>/<scene_id:06>/scene_gt.json      {"<im_id>": [{"cam_R_m2c", "cam_t_m2c", "obj_id"}]}
//! <root>/<scene_id:06>/scene_camera.json  {"<im_id>": {"cam_K", ...}}
//! <root>/<scene_id:06>/scene_gt_info.json optional, index-aligned bbox_obj / bbox_visib
//! ```
//!
//! Every loader has a writer that produces the exact same bytes it accepts.

mod bop;
mod detections;
mod estimates;
mod ply;

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::detection::BBox;
use crate::pnp::CameraIntrinsics;
use crate::pose::Pose;
use crate::pose_metrics::ModelPoints;

pub use bop::{
    load_models, load_models_info, load_scenes, write_models_info, write_scene, SceneData,
};
pub use detections::{load_detections, write_detections};
pub use estimates::{load_pose_estimates, write_pose_estimates, ESTIMATE_HEADER};
pub use ply::{load_ply_model, read_ply_points, write_ply, PlyEncoding};

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: invalid JSON: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    /// A record that parsed syntactically but violates the schema.
    #[error("{path}: {location}: {message}")]
    Record {
        path: PathBuf,
        location: String,
        message: String,
    },
    #[error("no scene directories with scene_gt.json under {0}")]
    NoScenes(PathBuf),
    #[error("object {object_id} (scene {scene_id}, image {image_id}) has no model")]
    MissingModel {
        object_id: u32,
        scene_id: u32,
        image_id: u32,
    },
}

impl DatasetError {
    pub(crate) fn record(
        path: &Path,
        location: impl Into<String>,
        message: impl Into<String>,
    ) -> Self {
        DatasetError::Record {
            path: path.to_path_buf(),
            location: location.into(),
            message: message.into(),
        }
    }

    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        DatasetError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

/// Identifies one image of one scene.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ImageKey {
    pub scene_id: u32,
    pub image_id: u32,
}

impl ImageKey {
    pub fn new(scene_id: u32, image_id: u32) -> Self {
        Self { scene_id, image_id }
    }
}

impl fmt::Display for ImageKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "scene {} image {}", self.scene_id, self.image_id)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruthRecord {
    pub scene_id: u32,
    pub image_id: u32,
    pub object_id: u32,
    pub pose: Pose,
    pub bbox: Option<BBox>,
}

impl GroundTruthRecord {
    pub fn key(&self) -> ImageKey {
        ImageKey::new(self.scene_id, self.image_id)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimateRecord {
    pub scene_id: u32,
    pub image_id: u32,
    pub object_id: u32,
    pub score: f64,
    pub pose: Pose,
    /// Seconds; `None` is stored as -1.
    pub time: Option<f64>,
}

impl EstimateRecord {
    pub fn key(&self) -> ImageKey {
        ImageKey::new(self.scene_id, self.image_id)
    }
}

/// Ground truth, cameras and models of a dataset root.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetIndex {
    pub root: PathBuf,
    pub cameras: BTreeMap<ImageKey, CameraIntrinsics>,
    pub ground_truth: BTreeMap<ImageKey, Vec<GroundTruthRecord>>,
    pub models: BTreeMap<u32, ModelPoints>,
}

impl DatasetIndex {
    /// Loads scenes and `models/`, checking that every annotated object
    /// has a model.
    pub fn load(root: impl AsRef<Path>) -> Result<Self, DatasetError> {
        let root = root.as_ref();
        let scenes = load_scenes(root)?;
        let models = load_models(&root.join("models"))?;
        let index = Self {
            root: root.to_path_buf(),
            cameras: scenes.cameras,
            ground_truth: scenes.ground_truth,
            models,
        };
        index.check_models()?;
        Ok(index)
    }

    fn check_models(&self) -> Result<(), DatasetError> {
        for record in self.ground_truth.values().flatten() {
            if !self.models.contains_key(&record.object_id) {
                return Err(DatasetError::MissingModel {
                    object_id: record.object_id,
                    scene_id: record.scene_id,
                    image_id: record.image_id,
                });
            }
        }
        Ok(())
    }

    /// Marks the given objects as symmetric (scored with ADD-S) and all
    /// others as asymmetric.
    pub fn set_symmetric(&mut self, ids: &[u32]) {
        for (id, model) in self.models.iter_mut() {
            model.symmetric = ids.contains(id);
        }
    }

    pub fn records(&self) -> impl Iterator<Item = &GroundTruthRecord> {
        self.ground_truth.values().flatten()
    }

    /// Object ids that appear in the ground truth, ascending.
    pub fn object_ids(&self) -> Vec<u32> {
        let mut ids: Vec<u32> = self.records().map(|r| r.object_id).collect();
        ids.sort_unstable();
        ids.dedup();
        ids
    }

    /// Writes scenes, `models_info.json` and binary PLY models under `root`.
    pub fn write(&self, root: impl AsRef<Path>) -> Result<(), DatasetError> {
        let root = root.as_ref();
        let mut scenes: BTreeMap<u32, SceneData> = BTreeMap::new();
        for (key, k) in &self.cameras {
            scenes
                .entry(key.scene_id)
                .or_default()
                .cameras
                .insert(*key, *k);
        }
        for (key, records) in &self.ground_truth {
            scenes
                .entry(key.scene_id)
                .or_default()
                .ground_truth
                .insert(*key, records.clone());
        }
        for (scene_id, data) in &scenes {
            write_scene(&root.join(format!("{scene_id:06}")), data)?;
        }
        let models_dir = root.join("models");
        std::fs::create_dir_all(&models_dir).map_err(|e| DatasetError::io(&models_dir, e))?;
        let diameters: BTreeMap<u32, f64> = self
            .models
            .iter()
            .map(|(id, m)| (*id, m.diameter))
            .collect();
        write_models_info(&models_dir.join("models_info.json"), &diameters)?;
        for (id, model) in &self.models {
            write_ply(
                models_dir.join(format!("obj_{id:06}.ply")),
                &model.points,
                PlyEncoding::BinaryLittleEndian,
            )?;
        }
        Ok(())
    }
}

pub(crate) fn read_file(path: &Path) -> Result<Vec<u8>, DatasetError> {
    std::fs::read(path).map_err(|e| DatasetError::io(path, e))
}

pub(crate) fn write_file(path: &Path, bytes: &[u8]) -> Result<(), DatasetError> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent).map_err(|e| DatasetError::io(parent, e))?;
        }
    }
    std::fs::write(path, bytes).map_err(|e| DatasetError::io(path, e))
}
