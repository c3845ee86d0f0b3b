//! ADD / ADD-S pose errors and diameter-relative recall.
//!
//! All distances are in millimeters. A pose counts as accurate when its error
//! is strictly below `threshold_ratio * diameter` (0.1 by default).

use nalgebra::Vector3;
use thiserror::Error;

use crate::pose::Pose;

pub const DEFAULT_THRESHOLD_RATIO: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricError {
    #[error("model has no points")]
    EmptyModel,
    #[error("diameter needs at least 2 points, got {0}")]
    TooFewPoints(usize),
    #[error("model diameter must be positive and finite, got {0}")]
    InvalidDiameter(f64),
    #[error("threshold ratio must be positive and finite, got {0}")]
    InvalidThresholdRatio(f64),
    #[error("cannot compute recall of an empty score list")]
    NoScores,
}

/// 3D model point set with its diameter and symmetry flag.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelPoints {
    pub points: Vec<Vector3<f64>>,
    pub diameter: f64,
    /// Score with ADD-S instead of ADD.
    pub symmetric: bool,
}

impl ModelPoints {
    pub fn new(
        points: Vec<Vector3<f64>>,
        diameter: f64,
        symmetric: bool,
    ) -> Result<Self, MetricError> {
        if points.is_empty() {
            return Err(MetricError::EmptyModel);
        }
        if !(diameter.is_finite() && diameter > 0.0) {
            return Err(MetricError::InvalidDiameter(diameter));
        }
        Ok(Self {
            points,
            diameter,
            symmetric,
        })
    }

    /// Uses the maximum pairwise distance as the diameter.
    pub fn with_computed_diameter(
        points: Vec<Vector3<f64>>,
        symmetric: bool,
    ) -> Result<Self, MetricError> {
        let diameter = model_diameter(&points)?;
        Self::new(points, diameter, symmetric)
    }

    pub fn metric(&self) -> PoseMetric {
        if self.symmetric {
            PoseMetric::AddS
        } else {
            PoseMetric::Add
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PoseMetric {
    Add,
    AddS,
}

impl PoseMetric {
    pub fn evaluate(self, model: &ModelPoints, est: &Pose, gt: &Pose) -> Result<f64, MetricError> {
        match self {
            PoseMetric::Add => add(model, est, gt),
            PoseMetric::AddS => add_s(model, est, gt),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            PoseMetric::Add => "ADD",
            PoseMetric::AddS => "ADD-S",
        }
    }
}

/// Error of one estimate against its ground truth.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoseScore {
    pub metric: PoseMetric,
    /// ADD or ADD-S value, millimeters.
    pub add_value: f64,
    /// `threshold_ratio * diameter`.
    pub threshold: f64,
    pub accurate: bool,
}

/// Mean distance between corresponding model points under the two poses.
pub fn add(model: &ModelPoints, est: &Pose, gt: &Pose) -> Result<f64, MetricError> {
    if model.points.is_empty() {
        return Err(MetricError::EmptyModel);
    }
    let sum: f64 = model
        .points
        .iter()
        .map(|x| (est.transform_point(x) - gt.transform_point(x)).norm())
        .sum();
    Ok(sum / model.points.len() as f64)
}

/// Mean distance from each ground-truth-posed point to the closest
/// estimate-posed point. Exhaustive search.
pub fn add_s(model: &ModelPoints, est: &Pose, gt: &Pose) -> Result<f64, MetricError> {
    if model.points.is_empty() {
        return Err(MetricError::EmptyModel);
    }
    let posed: Vec<Vector3<f64>> = model
        .points
        .iter()
        .map(|x| est.transform_point(x))
        .collect();
    let sum: f64 = model
        .points
        .iter()
        .map(|x| {
            let target = gt.transform_point(x);
            posed
                .iter()
                .map(|p| (p - target).norm_squared())
                .fold(f64::INFINITY, f64::min)
                .sqrt()
        })
        .sum();
    Ok(sum / model.points.len() as f64)
}

/// Same value as [`add_s`], bit for bit, using a uniform grid for the
/// nearest-point queries. Worth it for models with thousands of points.
pub fn add_s_accelerated(model: &ModelPoints, est: &Pose, gt: &Pose) -> Result<f64, MetricError> {
    if model.points.is_empty() {
        return Err(MetricError::EmptyModel);
    }
    let posed: Vec<Vector3<f64>> = model
        .points
        .iter()
        .map(|x| est.transform_point(x))
        .collect();
    let grid = PointGrid::new(&posed);
    let sum: f64 = model
        .points
        .iter()
        .map(|x| grid.nearest_squared(&gt.transform_point(x)).sqrt())
        .sum();
    Ok(sum / model.points.len() as f64)
}

pub fn score_pose(
    model: &ModelPoints,
    est: &Pose,
    gt: &Pose,
    threshold_ratio: f64,
) -> Result<PoseScore, MetricError> {
    score_with(model.metric(), model, est, gt, threshold_ratio)
}

/// Like [`score_pose`] with the metric chosen by the caller.
pub fn score_with(
    metric: PoseMetric,
    model: &ModelPoints,
    est: &Pose,
    gt: &Pose,
    threshold_ratio: f64,
) -> Result<PoseScore, MetricError> {
    if !(threshold_ratio.is_finite() && threshold_ratio > 0.0) {
        return Err(MetricError::InvalidThresholdRatio(threshold_ratio));
    }
    if !(model.diameter.is_finite() && model.diameter > 0.0) {
        return Err(MetricError::InvalidDiameter(model.diameter));
    }
    let add_value = metric.evaluate(model, est, gt)?;
    let threshold = threshold_ratio * model.diameter;
    Ok(PoseScore {
        metric,
        add_value,
        threshold,
        accurate: add_value < threshold,
    })
}

/// Fraction of accurate scores.
pub fn add_recall(scores: &[PoseScore]) -> Result<f64, MetricError> {
    if scores.is_empty() {
        return Err(MetricError::NoScores);
    }
    let hits = scores.iter().filter(|s| s.accurate).count();
    Ok(hits as f64 / scores.len() as f64)
}

/// Largest pairwise distance.
pub fn model_diameter(points: &[Vector3<f64>]) -> Result<f64, MetricError> {
    if points.len() < 2 {
        return Err(MetricError::TooFewPoints(points.len()));
    }
    let mut best = 0.0f64;
    for (i, a) in points.iter().enumerate() {
        for b in &points[i + 1..] {
            best = best.max((a - b).norm_squared());
        }
    }
    Ok(best.sqrt())
}

/// Bucketed points for exact nearest-neighbor queries.
struct PointGrid<'a> {
    points: &'a [Vector3<f64>],
    origin: Vector3<f64>,
    cell: f64,
    dims: [i64; 3],
    buckets: Vec<Vec<u32>>,
}

impl<'a> PointGrid<'a> {
    const MAX_CELLS_PER_AXIS: i64 = 256;

    fn new(points: &'a [Vector3<f64>]) -> Self {
        let mut lo = points[0];
        let mut hi = points[0];
        for p in points {
            lo = lo.inf(p);
            hi = hi.sup(p);
        }
        let extent = hi - lo;
        let largest = extent.max();
        // roughly two points per occupied cell on a solid; surfaces get more
        let target_cells = (points.len() as f64 / 2.0).max(1.0);
        let volume: f64 = extent.iter().map(|e| e.max(largest * 1e-3)).product();
        let mut cell = (volume / target_cells).cbrt();
        if !(cell.is_finite() && cell > 0.0) {
            cell = 1.0;
        }
        cell = cell.max(largest / (Self::MAX_CELLS_PER_AXIS - 1) as f64);
        // same expression as cell_of, so the extreme point lands in the last cell
        let dims = [0, 1, 2].map(|a| (extent[a] / cell).floor() as i64 + 1);

        let mut grid = Self {
            points,
            origin: lo,
            cell,
            dims,
            buckets: vec![Vec::new(); (dims[0] * dims[1] * dims[2]) as usize],
        };
        for (i, p) in points.iter().enumerate() {
            let c = grid.cell_of(p).map(|(v, _)| v);
            let idx = grid.index(c);
            grid.buckets[idx].push(i as u32);
        }
        grid
    }

    fn cell_of(&self, p: &Vector3<f64>) -> [(i64, usize); 3] {
        [0, 1, 2].map(|a| (((p[a] - self.origin[a]) / self.cell).floor() as i64, a))
    }

    fn index(&self, c: [i64; 3]) -> usize {
        ((c[2] * self.dims[1] + c[1]) * self.dims[0] + c[0]) as usize
    }

    /// Squared distance to the closest stored point.
    ///
    /// Points stored in cells at Chebyshev cell distance > r from the query
    /// cell are farther than `r * cell`, so the ring search can stop once the
    /// best candidate is within that bound.
    fn nearest_squared(&self, q: &Vector3<f64>) -> f64 {
        let c = self.cell_of(q).map(|(v, _)| v);
        let mut best = f64::INFINITY;
        // rings below the grid's Chebyshev distance are empty
        let start = (0..3)
            .map(|a| (-c[a]).max(c[a] - (self.dims[a] - 1)).max(0))
            .max()
            .unwrap_or(0);
        let last = (0..3)
            .map(|a| c[a].abs().max((self.dims[a] - 1 - c[a]).abs()))
            .max()
            .unwrap_or(0);
        for r in start..=last {
            // everything left is at least (r - 1) cells away
            let bound = (r - 1) as f64 * self.cell;
            if r > 0 && best <= bound * bound {
                break;
            }
            let lo = [0, 1, 2].map(|a| (c[a] - r).max(0));
            let hi = [0, 1, 2].map(|a| (c[a] + r).min(self.dims[a] - 1));
            for z in lo[2]..=hi[2] {
                for y in lo[1]..=hi[1] {
                    for x in lo[0]..=hi[0] {
                        let ring = (x - c[0]).abs().max((y - c[1]).abs()).max((z - c[2]).abs());
                        if ring != r {
                            continue;
                        }
                        for &i in &self.buckets[self.index([x, y, z])] {
                            best = best.min((self.points[i as usize] - q).norm_squared());
                        }
                    }
                }
            }
        }
        best
    }
}
