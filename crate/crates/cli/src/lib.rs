//! Library side of the `edgepose` command: subcommand implementations and
//! report tables. The binary in `main.rs` only parses flags and prints.

pub mod commands;
pub mod report;

pub use commands::{
    cmd_eval_detect, cmd_eval_pose, cmd_pnp, cmd_preprocess, render_pnp, CommandError,
    EvalPoseOptions, PoseEvaluation, PreprocessMethod, PreprocessOptions, PreprocessSummary,
};
pub use report::{Column, ReportFormat, ReportTable};
