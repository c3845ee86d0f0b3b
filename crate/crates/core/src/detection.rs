//! Detection scoring: IoU, greedy one-to-one matching and precision / recall.
//!
//! Matching is per class and per image; callers partition boxes first and
//! sum the resulting [`MatchResult`]s.

use std::ops::AddAssign;

/// Axis-aligned box in pixels, `(x, y)` is the top-left corner.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BBox {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
    /// Confidence for predictions; ground truth uses 1.0.
    pub score: f64,
    pub class_id: u32,
}

impl BBox {
    pub fn new(x: f64, y: f64, w: f64, h: f64) -> Self {
        Self {
            x,
            y,
            w,
            h,
            score: 1.0,
            class_id: 0,
        }
    }

    pub fn with_score(mut self, score: f64) -> Self {
        self.score = score;
        self
    }

    pub fn with_class(mut self, class_id: u32) -> Self {
        self.class_id = class_id;
        self
    }

    /// Width and height strictly positive, all coordinates finite.
    pub fn is_valid(&self) -> bool {
        [self.x, self.y, self.w, self.h]
            .iter()
            .all(|v| v.is_finite())
            && self.w > 0.0
            && self.h > 0.0
    }

    pub fn area(&self) -> f64 {
        self.w * self.h
    }
}

/// Intersection over union, 0 for disjoint boxes.
pub fn iou(a: &BBox, b: &BBox) -> f64 {
    let iw = (a.x + a.w).min(b.x + b.w) - a.x.max(b.x);
    let ih = (a.y + a.h).min(b.y + b.h) - a.y.max(b.y);
    if iw <= 0.0 || ih <= 0.0 {
        return 0.0;
    }
    let inter = iw * ih;
    let union = a.area() + b.area() - inter;
    (inter / union).clamp(0.0, 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Match {
    pub prediction: usize,
    pub ground_truth: usize,
    pub iou: f64,
}

/// True / false positive and false negative tallies.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MatchResult {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    /// Indices refer to the input slices of [`match_detections`].
    pub matches: Vec<Match>,
}

impl AddAssign<&MatchResult> for MatchResult {
    /// Accumulates counts; match indices are only meaningful per image, so
    /// they are not carried over.
    fn add_assign(&mut self, other: &MatchResult) {
        self.tp += other.tp;
        self.fp += other.fp;
        self.fn_ += other.fn_;
    }
}

/// Greedy score-ordered matching.
///
/// Predictions with `score >= score_min` are visited by descending score
/// (stable, so ties keep input order). Each takes the still unmatched ground
/// truth with the highest IoU, provided that IoU is positive and at least
/// `iou_min`; IoU ties go to the lower ground-truth index.
pub fn match_detections(preds: &[BBox], gts: &[BBox], iou_min: f64, score_min: f64) -> MatchResult {
    let mut order: Vec<usize> = (0..preds.len())
        .filter(|&i| preds[i].score >= score_min)
        .collect();
    order.sort_by(|&a, &b| preds[b].score.total_cmp(&preds[a].score));

    let mut taken = vec![false; gts.len()];
    let mut result = MatchResult::default();
    for &p in &order {
        let mut best: Option<(usize, f64)> = None;
        for (g, gt) in gts.iter().enumerate() {
            if taken[g] {
                continue;
            }
            let overlap = iou(&preds[p], gt);
            if overlap > 0.0 && overlap >= iou_min && best.is_none_or(|(_, b)| overlap > b) {
                best = Some((g, overlap));
            }
        }
        match best {
            Some((g, overlap)) => {
                taken[g] = true;
                result.tp += 1;
                result.matches.push(Match {
                    prediction: p,
                    ground_truth: g,
                    iou: overlap,
                });
            }
            None => result.fp += 1,
        }
    }
    result.fn_ = gts.len() - result.tp;
    result
}

/// `tp / (tp + fp)`, `None` when nothing was predicted.
pub fn precision(m: &MatchResult) -> Option<f64> {
    ratio(m.tp, m.tp + m.fp)
}

/// `tp / (tp + fn)`, `None` when there was nothing to find.
pub fn recall(m: &MatchResult) -> Option<f64> {
    ratio(m.tp, m.tp + m.fn_)
}

fn ratio(num: usize, den: usize) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}
