//! Edge pre-processing and evaluation toolkit for transparent-object 6D pose
//! benchmarks.
//!
//! The crate is split along the evaluation pipeline:
//!
//! - [`imaging`]: 8-bit rasters, Sobel gradients, Canny edge maps and the
//!   RGB + edge composite used as an alternative network input.
//! - [`pose_metrics`]: ADD / ADD-S distances and the diameter-relative recall.
//! - [`pnp`]: a DLT-initialised, Levenberg-Marquardt refined PnP solver.
//! - [`detection`]: IoU matching and precision / recall.
//! - [`dataset`]: BOP-style ground truth, models, estimate and detection files.
//!
//! Everything is a pure function of its inputs; nothing here holds global state.

pub mod dataset;
pub mod detection;
pub mod imaging;
pub mod pnp;
pub mod pose;
pub mod pose_metrics;

pub use dataset::{DatasetError, DatasetIndex, EstimateRecord, GroundTruthRecord, ImageKey};
pub use detection::{iou, match_detections, precision, recall, BBox, MatchResult};
pub use imaging::{
    canny, canny_with, composite_rgb_edges, gaussian_blur, sobel_gradients, to_grayscale,
    CannyParams, EdgeMap, GradientField, GradientNorm, Image, ImagingError,
};
pub use pnp::{
    project, reprojection_rmse, solve_pnp, CameraIntrinsics, Correspondence, PnpError, PnpOptions,
    PnpResult,
};
pub use pose::{Pose, PoseError};
pub use pose_metrics::{
    add, add_recall, add_s, model_diameter, score_pose, MetricError, ModelPoints, PoseMetric,
    PoseScore,
};
