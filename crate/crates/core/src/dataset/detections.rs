//! Detection JSON: an array of
//! `{"scene_id", "image_id", "category_id", "bbox": [x, y, w, h], "score"}`.
//! A missing score reads as 1.0, which suits ground-truth files.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{read_file, write_file, DatasetError, ImageKey};
use crate::detection::BBox;

#[derive(Debug, Serialize, Deserialize)]
struct Entry {
    scene_id: u32,
    image_id: u32,
    category_id: u32,
    bbox: Vec<f64>,
    #[serde(default = "one")]
    score: f64,
}

fn one() -> f64 {
    1.0
}

pub fn load_detections(path: impl AsRef<Path>) -> Result<Vec<(ImageKey, BBox)>, DatasetError> {
    let path = path.as_ref();
    let bytes = read_file(path)?;
    let entries: Vec<Entry> =
        serde_json::from_slice(&bytes).map_err(|source| DatasetError::Json {
            path: path.to_path_buf(),
            source,
        })?;
    entries
        .into_iter()
        .enumerate()
        .map(|(i, e)| {
            let location = format!("entry {i} (scene {} image {})", e.scene_id, e.image_id);
            let [x, y, w, h]: [f64; 4] = e.bbox.as_slice().try_into().map_err(|_| {
                DatasetError::record(
                    path,
                    &location,
                    format!("bbox has {} values, expected 4", e.bbox.len()),
                )
            })?;
            let bbox = BBox::new(x, y, w, h)
                .with_score(e.score)
                .with_class(e.category_id);
            if !bbox.is_valid() {
                return Err(DatasetError::record(
                    path,
                    location,
                    "bbox needs finite values and positive size",
                ));
            }
            if !(0.0..=1.0).contains(&e.score) {
                return Err(DatasetError::record(
                    path,
                    location,
                    format!("score {} outside [0, 1]", e.score),
                ));
            }
            Ok((ImageKey::new(e.scene_id, e.image_id), bbox))
        })
        .collect()
}

pub fn write_detections(
    path: impl AsRef<Path>,
    detections: &[(ImageKey, BBox)],
) -> Result<(), DatasetError> {
    let path = path.as_ref();
    let entries: Vec<Entry> = detections
        .iter()
        .map(|(key, b)| Entry {
            scene_id: key.scene_id,
            image_id: key.image_id,
            category_id: b.class_id,
            bbox: vec![b.x, b.y, b.w, b.h],
            score: b.score,
        })
        .collect();
    let mut bytes = serde_json::to_vec_pretty(&entries).map_err(|source| DatasetError::Json {
        path: path.to_path_buf(),
        source,
    })?;
    bytes.push(b'\n');
    write_file(path, &bytes)
}
