//! The four subcommands as library functions, so tests can drive them
//! without spawning a process.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::Context;
use edgepose_core::dataset::{load_detections, load_pose_estimates, load_scenes};
use edgepose_core::imaging::{load_png, save_png};
use edgepose_core::pose_metrics::{score_with, PoseMetric};
use edgepose_core::{
    canny_with, composite_rgb_edges, gaussian_blur, match_detections, precision, recall, solve_pnp,
    BBox, CameraIntrinsics, CannyParams, Correspondence, DatasetIndex, EstimateRecord, ImageKey,
    MatchResult, PnpResult,
};
use nalgebra::{Vector2, Vector3};
use rayon::prelude::*;
use serde::Deserialize;
use thiserror::Error;

use crate::report::{Column, ReportTable};

#[derive(Debug, Error)]
pub enum CommandError {
    /// Unreadable or malformed input.
    #[error("{0:#}")]
    Input(anyhow::Error),
    /// Inputs were fine but the evaluation or solve did not succeed.
    #[error("{0}")]
    Failed(String),
}

impl CommandError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CommandError::Input(_) => 2,
            CommandError::Failed(_) => 1,
        }
    }
}

fn input<E: Into<anyhow::Error>>(e: E) -> CommandError {
    CommandError::Input(e.into())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PreprocessMethod {
    /// Binary edge map, edges 255 on 0.
    #[default]
    Canny,
    /// Source colors with edge pixels painted white.
    Composite,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PreprocessOptions {
    pub method: PreprocessMethod,
    pub params: CannyParams,
    /// Gaussian pre-smoothing before edge detection.
    pub blur: bool,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PreprocessSummary {
    /// Relative paths written, sorted.
    pub processed: Vec<PathBuf>,
    /// Relative path and message of every file that failed.
    pub failures: Vec<(PathBuf, String)>,
}

impl PreprocessSummary {
    pub fn render(&self) -> String {
        let mut s = format!("processed {} file(s)\n", self.processed.len());
        if !self.failures.is_empty() {
            let _ = writeln!(s, "failed {} file(s):", self.failures.len());
            for (path, msg) in &self.failures {
                let _ = writeln!(s, "  {}: {msg}", path.display());
            }
        }
        s
    }
}

fn collect_pngs(root: &Path, dir: &Path, out: &mut Vec<PathBuf>) -> std::io::Result<()> {
    for entry in std::fs::read_dir(dir)? {
        let path = entry?.path();
        if path.is_dir() {
            collect_pngs(root, &path, out)?;
        } else if path
            .extension()
            .and_then(|e| e.to_str())
            .is_some_and(|e| e.eq_ignore_ascii_case("png"))
        {
            out.push(
                path.strip_prefix(root)
                    .expect("walk stays under root")
                    .to_path_buf(),
            );
        }
    }
    Ok(())
}

fn preprocess_one(src: &Path, dst: &Path, options: &PreprocessOptions) -> anyhow::Result<()> {
    let img = load_png(src)?;
    let detect_on = if options.blur {
        gaussian_blur(&img)
    } else {
        img.clone()
    };
    let edges = canny_with(&detect_on, &options.params)?;
    let out = match options.method {
        PreprocessMethod::Canny => edges.to_image(),
        PreprocessMethod::Composite => composite_rgb_edges(&img.to_rgb(), &edges)?,
    };
    if let Some(parent) = dst.parent() {
        std::fs::create_dir_all(parent)
            .with_context(|| format!("creating {}", parent.display()))?;
    }
    save_png(&out, dst)?;
    Ok(())
}

/// Transforms every PNG under `input_dir` into the same relative path under
/// `output_dir`. Per-file failures are collected, not fatal.
pub fn cmd_preprocess(
    input_dir: &Path,
    output_dir: &Path,
    options: &PreprocessOptions,
) -> Result<PreprocessSummary, CommandError> {
    options.params.validate().map_err(input)?;
    let mut files = Vec::new();
    collect_pngs(input_dir, input_dir, &mut files)
        .with_context(|| format!("listing {}", input_dir.display()))
        .map_err(CommandError::Input)?;
    files.sort();

    let results: Vec<(PathBuf, anyhow::Result<()>)> = files
        .into_par_iter()
        .map(|rel| {
            let r = preprocess_one(&input_dir.join(&rel), &output_dir.join(&rel), options);
            (rel, r)
        })
        .collect();
    let mut summary = PreprocessSummary::default();
    for (rel, r) in results {
        match r {
            Ok(()) => summary.processed.push(rel),
            Err(e) => summary.failures.push((rel, format!("{e:#}"))),
        }
    }
    Ok(summary)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalPoseOptions {
    pub threshold_ratio: f64,
    /// Objects scored with ADD-S in the ADD(-S) column.
    pub symmetric_ids: Vec<u32>,
    /// Also report plain ADD and ADD-S columns.
    pub all_metrics: bool,
}

impl Default for EvalPoseOptions {
    fn default() -> Self {
        Self {
            threshold_ratio: edgepose_core::pose_metrics::DEFAULT_THRESHOLD_RATIO,
            symmetric_ids: Vec::new(),
            all_metrics: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PoseEvaluation {
    pub table: ReportTable,
    /// Ground-truth instances without an estimate.
    pub missing: usize,
    /// Records whose score could not be computed; counted as inaccurate.
    pub failures: Vec<String>,
}

/// Per-object ADD(-S) recall. Within one image the k-th ground-truth
/// instance of an object is paired with its k-th highest-scoring estimate.
pub fn cmd_eval_pose(
    dataset_root: &Path,
    estimates_path: &Path,
    options: &EvalPoseOptions,
) -> Result<PoseEvaluation, CommandError> {
    let mut index = DatasetIndex::load(dataset_root).map_err(input)?;
    index.set_symmetric(&options.symmetric_ids);
    let estimates = load_pose_estimates(estimates_path).map_err(input)?;

    let mut by_instance: BTreeMap<(ImageKey, u32), Vec<EstimateRecord>> = BTreeMap::new();
    for est in estimates {
        if !index.models.contains_key(&est.object_id) {
            log::warn!(
                "skipping estimate for unknown object {} ({})",
                est.object_id,
                est.key()
            );
            continue;
        }
        by_instance
            .entry((est.key(), est.object_id))
            .or_default()
            .push(est);
    }
    for list in by_instance.values_mut() {
        list.sort_by(|a, b| b.score.total_cmp(&a.score));
    }

    // (object, estimate) for every ground-truth record in index order
    let mut jobs = Vec::new();
    for (key, records) in &index.ground_truth {
        let mut seen: BTreeMap<u32, usize> = BTreeMap::new();
        for gt in records {
            let k = seen.entry(gt.object_id).or_insert(0);
            let est = by_instance
                .get(&(*key, gt.object_id))
                .and_then(|l| l.get(*k));
            *k += 1;
            jobs.push((gt, est));
        }
    }
    if jobs.iter().all(|(_, est)| est.is_none()) {
        return Err(CommandError::Failed(
            "no estimate matches any ground-truth record".into(),
        ));
    }

    let metrics: Vec<Option<PoseMetric>> = if options.all_metrics {
        vec![Some(PoseMetric::Add), Some(PoseMetric::AddS), None]
    } else {
        vec![None]
    };
    // per job: accurate flag per metric column, or an error message
    let outcomes: Vec<Result<Vec<bool>, String>> = jobs
        .par_iter()
        .map(|(gt, est)| {
            let Some(est) = est else {
                return Ok(vec![false; metrics.len()]);
            };
            let model = &index.models[&gt.object_id];
            metrics
                .iter()
                .map(|m| {
                    score_with(
                        m.unwrap_or(model.metric()),
                        model,
                        &est.pose,
                        &gt.pose,
                        options.threshold_ratio,
                    )
                    .map(|s| s.accurate)
                    .map_err(|e| format!("{} object {}: {e}", gt.key(), gt.object_id))
                })
                .collect()
        })
        .collect();

    let mut hits: BTreeMap<u32, (Vec<usize>, usize)> = BTreeMap::new();
    let mut failures = Vec::new();
    for ((gt, _), outcome) in jobs.iter().zip(outcomes) {
        let entry = hits
            .entry(gt.object_id)
            .or_insert_with(|| (vec![0; metrics.len()], 0));
        entry.1 += 1;
        match outcome {
            Ok(flags) => flags
                .iter()
                .zip(entry.0.iter_mut())
                .for_each(|(f, h)| *h += *f as usize),
            Err(msg) => failures.push(msg),
        }
    }

    let columns = metrics
        .iter()
        .map(|m| Column::recall(m.map_or("ADD(-S)", |m| m.name())))
        .collect();
    let mut table = ReportTable::new("Object", columns, "Mean");
    for (object_id, (counts, total)) in hits {
        let cells = counts
            .iter()
            .map(|&c| Some(c as f64 / total as f64))
            .collect();
        table
            .push_row(format!("#{object_id}"), cells)
            .expect("one cell per metric");
    }
    let missing = jobs.iter().filter(|(_, e)| e.is_none()).count();
    Ok(PoseEvaluation {
        table,
        missing,
        failures,
    })
}

fn load_ground_truth_boxes(gt_path: &Path) -> Result<Vec<(ImageKey, BBox)>, CommandError> {
    if gt_path.is_dir() {
        let scenes = load_scenes(gt_path).map_err(input)?;
        Ok(scenes
            .ground_truth
            .values()
            .flatten()
            .filter_map(|r| {
                r.bbox
                    .map(|b| (r.key(), b.with_class(r.object_id).with_score(1.0)))
            })
            .collect())
    } else {
        load_detections(gt_path).map_err(input)
    }
}

/// Per-object precision and recall in percent. Ground truth is a BOP root
/// (boxes from `scene_gt_info.json`) or a detection JSON file.
pub fn cmd_eval_detect(
    gt_path: &Path,
    detections_path: &Path,
    iou_min: f64,
    score_min: f64,
) -> Result<ReportTable, CommandError> {
    if !(0.0..=1.0).contains(&iou_min) {
        return Err(input(anyhow::anyhow!("iou_min {iou_min} outside [0, 1]")));
    }
    if !score_min.is_finite() {
        return Err(input(anyhow::anyhow!("score_min must be finite")));
    }
    let gts = load_ground_truth_boxes(gt_path)?;
    if gts.is_empty() {
        return Err(CommandError::Failed(format!(
            "no ground-truth boxes in {}",
            gt_path.display()
        )));
    }
    let preds = load_detections(detections_path).map_err(input)?;

    type Groups = BTreeMap<(u32, ImageKey), (Vec<BBox>, Vec<BBox>)>;
    let mut groups: Groups = BTreeMap::new();
    for (key, b) in preds {
        groups.entry((b.class_id, key)).or_default().0.push(b);
    }
    for (key, b) in gts {
        groups.entry((b.class_id, key)).or_default().1.push(b);
    }
    let results: Vec<(u32, MatchResult)> = groups
        .par_iter()
        .map(|((class, _), (p, g))| (*class, match_detections(p, g, iou_min, score_min)))
        .collect();
    let mut per_class: BTreeMap<u32, MatchResult> = BTreeMap::new();
    for (class, m) in &results {
        *per_class.entry(*class).or_default() += m;
    }

    let mut table = ReportTable::new(
        "Object",
        vec![
            Column::percent("Precision (%)"),
            Column::percent("Recall (%)"),
        ],
        "Average",
    );
    for (class, m) in per_class {
        let cells = vec![
            precision(&m).map(|v| v * 100.0),
            recall(&m).map(|v| v * 100.0),
        ];
        table
            .push_row(format!("#{class}"), cells)
            .expect("two cells");
    }
    Ok(table)
}

#[derive(Debug, Deserialize)]
struct CorrespondenceRow {
    x3d: f64,
    y3d: f64,
    z3d: f64,
    u: f64,
    v: f64,
}

/// Reads a `x3d,y3d,z3d,u,v` CSV.
pub fn load_correspondences(path: &Path) -> anyhow::Result<Vec<Correspondence>> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .with_context(|| format!("opening {}", path.display()))?;
    let header = reader.headers()?.clone();
    if header.iter().ne(["x3d", "y3d", "z3d", "u", "v"]) {
        anyhow::bail!(
            "{}: line 1: expected header x3d,y3d,z3d,u,v",
            path.display()
        );
    }
    let mut out = Vec::new();
    for row in reader.deserialize::<CorrespondenceRow>() {
        let row = row.with_context(|| path.display().to_string())?;
        out.push(Correspondence::new(
            Vector3::new(row.x3d, row.y3d, row.z3d),
            Vector2::new(row.u, row.v),
        ));
    }
    Ok(out)
}

pub fn load_intrinsics(path: &Path) -> anyhow::Result<CameraIntrinsics> {
    let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    let k: CameraIntrinsics =
        serde_json::from_slice(&bytes).with_context(|| format!("parsing {}", path.display()))?;
    k.validate().with_context(|| path.display().to_string())?;
    Ok(k)
}

/// BOP-style pose lines plus solver diagnostics.
pub fn render_pnp(result: &PnpResult) -> String {
    let join = |v: &[f64]| v.iter().map(f64::to_string).collect::<Vec<_>>().join(" ");
    format!(
        "R: {}\nt: {}\nrmse: {}\niterations: {}\nconverged: {}\ncondition: {:.3e}\n",
        join(&result.pose.rotation_row_major()),
        join(&result.pose.translation_array()),
        result.reprojection_rmse,
        result.iterations,
        result.converged,
        result.condition,
    )
}

/// Solves PnP from files. A solve that stops at the iteration limit is
/// returned; callers decide how to report it.
pub fn cmd_pnp(
    correspondences_path: &Path,
    intrinsics_path: &Path,
) -> Result<PnpResult, CommandError> {
    let corr = load_correspondences(correspondences_path).map_err(CommandError::Input)?;
    let k = load_intrinsics(intrinsics_path).map_err(CommandError::Input)?;
    solve_pnp(&corr, &k).map_err(|e| CommandError::Failed(e.to_string()))
}

/// Object ids named on the command line, deduplicated.
pub fn parse_id_list(s: &str) -> Result<Vec<u32>, String> {
    let ids: Result<BTreeSet<u32>, _> = s
        .split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| {
            t.parse::<u32>()
                .map_err(|_| format!("not an object id: {t:?}"))
        })
        .collect();
    ids.map(|set| set.into_iter().collect())
}
