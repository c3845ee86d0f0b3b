use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use edgepose_cli::commands::parse_id_list;
use edgepose_cli::{
    cmd_eval_detect, cmd_eval_pose, cmd_pnp, cmd_preprocess, render_pnp, CommandError,
    EvalPoseOptions, PreprocessMethod, PreprocessOptions, ReportFormat,
};
use edgepose_core::{CannyParams, GradientNorm};

#[derive(Parser)]
#[command(
    name = "edgepose",
    version,
    about = "Edge pre-processing and pose/detection evaluation"
)]
struct Cli {
    /// Report format for eval-pose and eval-detect.
    #[arg(long, global = true, value_enum, default_value_t = Format::Md)]
    format: Format,
    /// Write output here instead of stdout.
    #[arg(long, global = true)]
    output: Option<PathBuf>,
    /// Worker threads; 0 uses all cores.
    #[arg(long, global = true, default_value_t = 0)]
    jobs: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Md,
    Csv,
}

#[derive(Clone, Copy, ValueEnum)]
enum Method {
    Canny,
    Composite,
}

#[derive(Clone, Copy, ValueEnum)]
enum Norm {
    L1,
    L2,
}

#[derive(Subcommand)]
enum Command {
    /// Edge maps or RGB+edge composites for every PNG under a directory.
    Preprocess {
        input: PathBuf,
        output_dir: PathBuf,
        #[arg(long, value_enum, default_value_t = Method::Canny)]
        method: Method,
        #[arg(long, default_value_t = 100.0)]
        low: f64,
        #[arg(long, default_value_t = 200.0)]
        high: f64,
        #[arg(long, value_enum, default_value_t = Norm::L2)]
        norm: Norm,
        /// Smooth with a 5x5 Gaussian before detecting edges.
        #[arg(long)]
        blur: bool,
    },
    /// Per-object ADD(-S) recall of a pose estimate CSV.
    EvalPose {
        dataset: PathBuf,
        estimates: PathBuf,
        #[arg(long, default_value_t = 0.1)]
        threshold_ratio: f64,
        /// Comma-separated ids of symmetric objects (scored with ADD-S).
        #[arg(long, default_value = "")]
        symmetric: String,
        /// Report ADD and ADD-S columns next to ADD(-S).
        #[arg(long)]
        all_metrics: bool,
    },
    /// Per-object detection precision and recall.
    EvalDetect {
        /// BOP dataset root or detection JSON with ground-truth boxes.
        ground_truth: PathBuf,
        detections: PathBuf,
        #[arg(long, default_value_t = 0.5)]
        iou_min: f64,
        #[arg(long, default_value_t = 0.0)]
        score_min: f64,
    },
    /// Pose from a x3d,y3d,z3d,u,v CSV and a fx/fy/cx/cy JSON.
    Pnp {
        correspondences: PathBuf,
        intrinsics: PathBuf,
    },
}

fn run(cli: Cli) -> Result<(String, u8), CommandError> {
    let format = match cli.format {
        Format::Md => ReportFormat::Markdown,
        Format::Csv => ReportFormat::Csv,
    };
    let render = |table: &edgepose_cli::ReportTable| {
        table
            .render(format)
            .map_err(|e| CommandError::Input(e.into()))
    };
    match cli.command {
        Command::Preprocess {
            input,
            output_dir,
            method,
            low,
            high,
            norm,
            blur,
        } => {
            let norm = match norm {
                Norm::L1 => GradientNorm::L1,
                Norm::L2 => GradientNorm::L2,
            };
            let options = PreprocessOptions {
                method: match method {
                    Method::Canny => PreprocessMethod::Canny,
                    Method::Composite => PreprocessMethod::Composite,
                },
                params: CannyParams::new(low, high).with_norm(norm),
                blur,
            };
            let summary = cmd_preprocess(&input, &output_dir, &options)?;
            let code = if summary.failures.is_empty() { 0 } else { 1 };
            Ok((summary.render(), code))
        }
        Command::EvalPose {
            dataset,
            estimates,
            threshold_ratio,
            symmetric,
            all_metrics,
        } => {
            let options = EvalPoseOptions {
                threshold_ratio,
                symmetric_ids: parse_id_list(&symmetric)
                    .map_err(|e| CommandError::Input(anyhow::anyhow!(e)))?,
                all_metrics,
            };
            let eval = cmd_eval_pose(&dataset, &estimates, &options)?;
            if eval.missing > 0 {
                log::info!("{} ground-truth instance(s) had no estimate", eval.missing);
            }
            for failure in &eval.failures {
                log::error!("{failure}");
            }
            let code = if eval.failures.is_empty() { 0 } else { 1 };
            Ok((render(&eval.table)?, code))
        }
        Command::EvalDetect {
            ground_truth,
            detections,
            iou_min,
            score_min,
        } => {
            let table = cmd_eval_detect(&ground_truth, &detections, iou_min, score_min)?;
            Ok((render(&table)?, 0))
        }
        Command::Pnp {
            correspondences,
            intrinsics,
        } => {
            let result = cmd_pnp(&correspondences, &intrinsics)?;
            let code = if result.converged { 0 } else { 1 };
            Ok((render_pnp(&result), code))
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if cli.jobs > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(cli.jobs)
            .build_global()
        {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    let output = cli.output.clone();
    match run(cli) {
        Ok((text, code)) => {
            let written = match &output {
                Some(path) => std::fs::write(path, &text),
                None => std::io::stdout().write_all(text.as_bytes()),
            };
            if let Err(e) = written {
                eprintln!("error: writing output: {e}");
                return ExitCode::from(1);
            }
            ExitCode::from(code)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
