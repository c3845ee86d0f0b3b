//! Pose estimate CSV: `scene_id,im_id,obj_id,score,R,t,time`, with `R` as
//! nine and `t` as three space-separated numbers. `time` of -1 means unknown.

use std::path::Path;

use super::{read_file, write_file, DatasetError, EstimateRecord};
use crate::pose::Pose;

pub const ESTIMATE_HEADER: [&str; 7] = ["scene_id", "im_id", "obj_id", "score", "R", "t", "time"];

fn numbers<const N: usize>(field: &str) -> Option<[f64; N]> {
    let values: Vec<f64> = field
        .split_whitespace()
        .map(str::parse)
        .collect::<Result<_, _>>()
        .ok()?;
    values.try_into().ok()
}

pub fn load_pose_estimates(path: impl AsRef<Path>) -> Result<Vec<EstimateRecord>, DatasetError> {
    let path = path.as_ref();
    let bytes = read_file(path)?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(bytes.as_slice());
    let csv_err = |e: csv::Error| {
        let location = e
            .position()
            .map_or_else(|| "csv".to_string(), |p| format!("line {}", p.line()));
        DatasetError::record(path, location, e.to_string())
    };
    let header = reader.headers().map_err(csv_err)?;
    if header.iter().ne(ESTIMATE_HEADER) {
        return Err(DatasetError::record(
            path,
            "line 1",
            format!("expected header {:?}", ESTIMATE_HEADER.join(",")),
        ));
    }

    let mut out = Vec::new();
    for row in reader.records() {
        let row = row.map_err(csv_err)?;
        let location = format!("line {}", row.position().map_or(0, |p| p.line()));
        let bad = |what: &str| DatasetError::record(path, &location, what.to_string());
        if row.len() != ESTIMATE_HEADER.len() {
            return Err(bad(&format!(
                "{} fields, expected {}",
                row.len(),
                ESTIMATE_HEADER.len()
            )));
        }
        let id = |i: usize| {
            row[i].parse::<u32>().map_err(|_| {
                bad(&format!(
                    "{} is not an id: {:?}",
                    ESTIMATE_HEADER[i], &row[i]
                ))
            })
        };
        let (scene_id, image_id, object_id) = (id(0)?, id(1)?, id(2)?);
        let score: f64 = row[3].parse().map_err(|_| bad("score is not a number"))?;
        if !(0.0..=1.0).contains(&score) {
            return Err(bad(&format!("score {score} outside [0, 1]")));
        }
        let r = numbers::<9>(&row[4]).ok_or_else(|| bad("R must hold 9 numbers"))?;
        let t = numbers::<3>(&row[5]).ok_or_else(|| bad("t must hold 3 numbers"))?;
        let pose =
            Pose::from_row_major(&r, &t).map_err(|e| bad(&format!("object {object_id}: {e}")))?;
        let time: f64 = row[6].parse().map_err(|_| bad("time is not a number"))?;
        let time = if time == -1.0 { None } else { Some(time) };
        out.push(EstimateRecord {
            scene_id,
            image_id,
            object_id,
            score,
            pose,
            time,
        });
    }
    Ok(out)
}

fn join(values: &[f64]) -> String {
    values
        .iter()
        .map(f64::to_string)
        .collect::<Vec<_>>()
        .join(" ")
}

pub fn write_pose_estimates(
    path: impl AsRef<Path>,
    records: &[EstimateRecord],
) -> Result<(), DatasetError> {
    let path = path.as_ref();
    let mut writer = csv::Writer::from_writer(Vec::new());
    let csv_err = |e: csv::Error| DatasetError::record(path, "write", e.to_string());
    writer.write_record(ESTIMATE_HEADER).map_err(csv_err)?;
    for r in records {
        writer
            .write_record([
                r.scene_id.to_string(),
                r.image_id.to_string(),
                r.object_id.to_string(),
                r.score.to_string(),
                join(&r.pose.rotation_row_major()),
                join(&r.pose.translation_array()),
                r.time.unwrap_or(-1.0).to_string(),
            ])
            .map_err(csv_err)?;
    }
    let bytes = writer
        .into_inner()
        .map_err(|e| DatasetError::record(path, "write", e.to_string()))?;
    write_file(path, &bytes)
}
