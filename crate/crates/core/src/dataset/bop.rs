use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{read_file, write_file, DatasetError, GroundTruthRecord, ImageKey};
use crate::dataset::ply::load_ply_model_with_diameter;
use crate::detection::BBox;
use crate::pnp::CameraIntrinsics;
use crate::pose::Pose;
use crate::pose_metrics::ModelPoints;

#[derive(Debug, Serialize, Deserialize)]
struct GtEntry {
    #[serde(rename = "cam_R_m2c")]
    rotation: Vec<f64>,
    #[serde(rename = "cam_t_m2c")]
    translation: Vec<f64>,
    obj_id: u32,
}

#[derive(Debug, Serialize, Deserialize)]
struct CameraEntry {
    #[serde(rename = "cam_K")]
    matrix: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    depth_scale: Option<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
struct GtInfoEntry {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    bbox_obj: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    bbox_visib: Option<Vec<f64>>,
}

#[derive(Debug, Serialize, Deserialize)]
struct ModelInfoEntry {
    diameter: f64,
}

/// Cameras and ground truth of one or more scenes.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SceneData {
    pub cameras: BTreeMap<ImageKey, CameraIntrinsics>,
    pub ground_truth: BTreeMap<ImageKey, Vec<GroundTruthRecord>>,
}

fn parse_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, DatasetError> {
    let bytes = read_file(path)?;
    serde_json::from_slice(&bytes).map_err(|source| DatasetError::Json {
        path: path.to_path_buf(),
        source,
    })
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), DatasetError> {
    let mut bytes = serde_json::to_vec_pretty(value).map_err(|source| DatasetError::Json {
        path: path.to_path_buf(),
        source,
    })?;
    bytes.push(b'\n');
    write_file(path, &bytes)
}

fn parse_id(path: &Path, key: &str, what: &str) -> Result<u32, DatasetError> {
    key.parse().map_err(|_| {
        DatasetError::record(
            path,
            format!("key {key:?}"),
            format!("{what} id is not a non-negative integer"),
        )
    })
}

/// Reads every `<root>/<scene_id>/` directory that has a `scene_gt.json`.
pub fn load_scenes(root: &Path) -> Result<SceneData, DatasetError> {
    let entries = fs::read_dir(root).map_err(|e| DatasetError::io(root, e))?;
    let mut scene_dirs = BTreeMap::new();
    for entry in entries {
        let entry = entry.map_err(|e| DatasetError::io(root, e))?;
        let path = entry.path();
        let Some(scene_id) = path
            .file_name()
            .and_then(|n| n.to_str())
            .and_then(|n| n.parse::<u32>().ok())
        else {
            continue;
        };
        if path.join("scene_gt.json").is_file() {
            scene_dirs.insert(scene_id, path);
        }
    }
    if scene_dirs.is_empty() {
        return Err(DatasetError::NoScenes(root.to_path_buf()));
    }
    let mut data = SceneData::default();
    for (scene_id, dir) in scene_dirs {
        load_scene_into(&dir, scene_id, &mut data)?;
    }
    Ok(data)
}

fn load_scene_into(dir: &Path, scene_id: u32, data: &mut SceneData) -> Result<(), DatasetError> {
    let gt_path = dir.join("scene_gt.json");
    let cam_path = dir.join("scene_camera.json");
    let info_path = dir.join("scene_gt_info.json");

    let cameras: BTreeMap<String, CameraEntry> = parse_json(&cam_path)?;
    for (key, entry) in cameras {
        let image_id = parse_id(&cam_path, &key, "image")?;
        let location = format!("scene {scene_id} image {image_id}");
        let matrix: [f64; 9] = entry.matrix.as_slice().try_into().map_err(|_| {
            DatasetError::record(
                &cam_path,
                &location,
                format!("cam_K has {} values, expected 9", entry.matrix.len()),
            )
        })?;
        let k = CameraIntrinsics::from_matrix_row_major(&matrix)
            .map_err(|e| DatasetError::record(&cam_path, &location, e.to_string()))?;
        data.cameras.insert(ImageKey::new(scene_id, image_id), k);
    }

    let infos: BTreeMap<String, Vec<GtInfoEntry>> = if info_path.is_file() {
        parse_json(&info_path)?
    } else {
        BTreeMap::new()
    };

    let gt: BTreeMap<String, Vec<GtEntry>> = parse_json(&gt_path)?;
    let mut by_image: BTreeMap<u32, (String, Vec<GtEntry>)> = BTreeMap::new();
    for (key, entries) in gt {
        let image_id = parse_id(&gt_path, &key, "image")?;
        by_image.insert(image_id, (key, entries));
    }
    for (image_id, (key, entries)) in by_image {
        let image_key = ImageKey::new(scene_id, image_id);
        if !data.cameras.contains_key(&image_key) {
            return Err(DatasetError::record(
                &cam_path,
                format!("scene {scene_id} image {image_id}"),
                "image has ground truth but no camera entry",
            ));
        }
        let info = infos.get(&key);
        let mut records = Vec::with_capacity(entries.len());
        for (index, entry) in entries.into_iter().enumerate() {
            let location = format!("scene {scene_id} image {image_id} record {index}");
            let r: [f64; 9] = entry.rotation.as_slice().try_into().map_err(|_| {
                DatasetError::record(
                    &gt_path,
                    &location,
                    format!("cam_R_m2c has {} values, expected 9", entry.rotation.len()),
                )
            })?;
            let t: [f64; 3] = entry.translation.as_slice().try_into().map_err(|_| {
                DatasetError::record(
                    &gt_path,
                    &location,
                    format!(
                        "cam_t_m2c has {} values, expected 3",
                        entry.translation.len()
                    ),
                )
            })?;
            let pose = Pose::from_row_major(&r, &t).map_err(|e| {
                DatasetError::record(&gt_path, &location, format!("object {}: {e}", entry.obj_id))
            })?;
            let bbox = match info.and_then(|list| list.get(index)) {
                Some(info) => parse_info_bbox(&info_path, &location, info, entry.obj_id)?,
                None => None,
            };
            records.push(GroundTruthRecord {
                scene_id,
                image_id,
                object_id: entry.obj_id,
                pose,
                bbox,
            });
        }
        data.ground_truth.insert(image_key, records);
    }
    Ok(())
}

/// `bbox_visib` wins over `bbox_obj`; BOP marks invisible objects with
/// non-positive sizes, which yields `None`.
fn parse_info_bbox(
    path: &Path,
    location: &str,
    info: &GtInfoEntry,
    class_id: u32,
) -> Result<Option<BBox>, DatasetError> {
    let Some(values) = info.bbox_visib.as_ref().or(info.bbox_obj.as_ref()) else {
        return Ok(None);
    };
    let [x, y, w, h]: [f64; 4] = values.as_slice().try_into().map_err(|_| {
        DatasetError::record(
            path,
            location,
            format!("bbox has {} values, expected 4", values.len()),
        )
    })?;
    let bbox = BBox::new(x, y, w, h).with_class(class_id);
    Ok(bbox.is_valid().then_some(bbox))
}

/// Writes `scene_gt.json`, `scene_camera.json` and, when any record has a
/// box, `scene_gt_info.json` into `dir`.
pub fn write_scene(dir: &Path, data: &SceneData) -> Result<(), DatasetError> {
    let cameras: BTreeMap<String, CameraEntry> = data
        .cameras
        .iter()
        .map(|(key, k)| {
            (
                key.image_id.to_string(),
                CameraEntry {
                    matrix: k.to_matrix_row_major().to_vec(),
                    depth_scale: Some(1.0),
                },
            )
        })
        .collect();
    write_json(&dir.join("scene_camera.json"), &cameras)?;

    let gt: BTreeMap<String, Vec<GtEntry>> = data
        .ground_truth
        .iter()
        .map(|(key, records)| {
            let entries = records
                .iter()
                .map(|r| GtEntry {
                    rotation: r.pose.rotation_row_major().to_vec(),
                    translation: r.pose.translation_array().to_vec(),
                    obj_id: r.object_id,
                })
                .collect();
            (key.image_id.to_string(), entries)
        })
        .collect();
    write_json(&dir.join("scene_gt.json"), &gt)?;

    if data
        .ground_truth
        .values()
        .flatten()
        .any(|r| r.bbox.is_some())
    {
        let infos: BTreeMap<String, Vec<GtInfoEntry>> = data
            .ground_truth
            .iter()
            .map(|(key, records)| {
                let entries = records
                    .iter()
                    .map(|r| {
                        let bbox = r
                            .bbox
                            .map(|b| vec![b.x, b.y, b.w, b.h])
                            .unwrap_or_else(|| vec![-1.0; 4]);
                        GtInfoEntry {
                            bbox_obj: Some(bbox.clone()),
                            bbox_visib: Some(bbox),
                        }
                    })
                    .collect();
                (key.image_id.to_string(), entries)
            })
            .collect();
        write_json(&dir.join("scene_gt_info.json"), &infos)?;
    }
    Ok(())
}

/// Object diameters (millimeters) from `models_info.json`.
pub fn load_models_info(path: &Path) -> Result<BTreeMap<u32, f64>, DatasetError> {
    let raw: BTreeMap<String, ModelInfoEntry> = parse_json(path)?;
    let mut out = BTreeMap::new();
    for (key, entry) in raw {
        let id = parse_id(path, &key, "object")?;
        if !(entry.diameter.is_finite() && entry.diameter > 0.0) {
            return Err(DatasetError::record(
                path,
                format!("object {id}"),
                format!("diameter {} is not positive", entry.diameter),
            ));
        }
        out.insert(id, entry.diameter);
    }
    Ok(out)
}

pub fn write_models_info(path: &Path, diameters: &BTreeMap<u32, f64>) -> Result<(), DatasetError> {
    let raw: BTreeMap<String, ModelInfoEntry> = diameters
        .iter()
        .map(|(id, d)| (id.to_string(), ModelInfoEntry { diameter: *d }))
        .collect();
    write_json(path, &raw)
}

/// Loads every `obj_<id>.ply` in `dir`. Diameters come from
/// `models_info.json` when present.
pub fn load_models(dir: &Path) -> Result<BTreeMap<u32, ModelPoints>, DatasetError> {
    let info_path = dir.join("models_info.json");
    let diameters = if info_path.is_file() {
        load_models_info(&info_path)?
    } else {
        BTreeMap::new()
    };
    let mut models = BTreeMap::new();
    let entries = fs::read_dir(dir).map_err(|e| DatasetError::io(dir, e))?;
    for entry in entries {
        let path = entry.map_err(|e| DatasetError::io(dir, e))?.path();
        let Some(id) = object_id_from_path(&path) else {
            continue;
        };
        let model = load_ply_model_with_diameter(&path, diameters.get(&id).copied())?;
        models.insert(id, model);
    }
    Ok(models)
}

/// `obj_000012.ply` -> 12.
pub(crate) fn object_id_from_path(path: &Path) -> Option<u32> {
    if path.extension()?.to_str()? != "ply" {
        return None;
    }
    path.file_stem()?
        .to_str()?
        .strip_prefix("obj_")?
        .parse()
        .ok()
}
