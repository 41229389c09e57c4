//! Batch tooling: `convert`, `segment-fuse`, `iou` and `rotnet`.
//!
//! Exit codes: 0 success, 1 usage, 2 parse error, 3 validation error or
//! partial failure.

mod commands;
mod config;
mod convert;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};
use thiserror::Error;

pub use commands::{
    cmd_iou, cmd_rotnet, cmd_segment_fuse, descriptor_from_arrays, load_target_points, probs_from_array, IouSummary,
    RotnetReport, SegmentFuseConfig, SegmentFuseReport,
};
pub use config::{
    JobConfig, ViewSet, CLASSIFICATION_LAYERS, CLASSIFICATION_RES, CLASSIFICATION_VIEWS, DEFAULT_POINTS,
    SEGMENTATION_LAYERS, SEGMENTATION_RES,
};
pub use convert::{cmd_convert, shape_seed, ConvertReport, ShapeFailure, ERROR_REPORT_FILE, MANIFEST_FILE, TOOL_VERSION};

use crate::descriptors::DEFAULT_FILL;
use crate::io::DescriptorKind;
use crate::rotnet::AssignmentMode;
use crate::segmentation::DEFAULT_FUSION_RESOLUTION;

#[derive(Debug, Error, PartialEq)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("{0}")]
    Io(String),
    #[error("validation error: {0}")]
    Validation(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Parse(_) | CliError::Io(_) => 2,
            CliError::Validation(_) => 3,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "s2d", version, about = "Structured 2D descriptors of 3D shapes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Kind {
    Mlh,
    Slice,
    Volume,
}

impl From<Kind> for DescriptorKind {
    fn from(k: Kind) -> Self {
        match k {
            Kind::Mlh => DescriptorKind::Mlh,
            Kind::Slice => DescriptorKind::Slice,
            Kind::Volume => DescriptorKind::Volume,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Preset {
    Classification,
    Segmentation,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Mode {
    Cyclic,
    Independent,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Convert a directory of meshes (or labeled point clouds) into descriptor arrays and a manifest.
    Convert {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        #[arg(long, value_enum, default_value = "mlh")]
        descriptor: Kind,
        /// Defaults for resolution, layers and views.
        #[arg(long, value_enum, default_value = "classification")]
        preset: Preset,
        #[arg(long)]
        layers: Option<usize>,
        /// Grid resolution: `N` for N×N or `HxW`.
        #[arg(long)]
        res: Option<String>,
        /// `zring:M` or `axes3`.
        #[arg(long)]
        views: Option<ViewSet>,
        #[arg(long)]
        thickness: Option<f64>,
        #[arg(long, default_value_t = DEFAULT_POINTS)]
        points: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = DEFAULT_FILL, allow_hyphen_values = true)]
        fill: f64,
        #[arg(long)]
        workers: Option<usize>,
        /// Part count for labeled `.pts` + `.seg` inputs.
        #[arg(long)]
        classes: Option<u32>,
        #[arg(long)]
        json: bool,
    },
    /// Label a target cloud from labeled MLH views listed in a manifest.
    SegmentFuse {
        /// Manifest with MLH records carrying label maps.
        #[arg(long)]
        input: PathBuf,
        /// Target points: `x y z` text or float32 `.npy` of shape (N, 3).
        #[arg(long)]
        target: PathBuf,
        /// Output label file.
        #[arg(long)]
        output: PathBuf,
        #[arg(long)]
        classes: u32,
        #[arg(long)]
        shape: Option<String>,
        #[arg(long, default_value = "axes3")]
        views: ViewSet,
        /// Fusion voxel grid resolution per axis.
        #[arg(long, default_value_t = DEFAULT_FUSION_RESOLUTION)]
        res: usize,
        /// Use target coordinates as-is instead of centering and scaling them.
        #[arg(long)]
        no_normalize: bool,
        #[arg(long)]
        json: bool,
    },
    /// Point IoU between predicted and ground-truth label files.
    Iou {
        pred: PathBuf,
        gt: PathBuf,
        #[arg(long)]
        classes: u32,
        #[arg(long)]
        json: bool,
    },
    /// Orientation assignment and loss for a (m, m, n+1) probability tensor.
    Rotnet {
        probs: PathBuf,
        /// 1-based true class; the predicted class is used when omitted.
        #[arg(long)]
        class: Option<usize>,
        #[arg(long, value_enum, default_value = "cyclic")]
        mode: Mode,
        #[arg(long)]
        json: bool,
    },
}

fn parse_res(text: &str) -> Result<(usize, usize), CliError> {
    let bad = || CliError::Usage(format!("invalid --res `{text}`"));
    match text.split_once(['x', 'X']) {
        Some((h, w)) => Ok((h.parse().map_err(|_| bad())?, w.parse().map_err(|_| bad())?)),
        None => {
            let n = text.parse().map_err(|_| bad())?;
            Ok((n, n))
        }
    }
}

fn print_json<T: serde::Serialize>(value: &T) {
    println!("{}", serde_json::to_string_pretty(value).expect("report serializes"));
}

fn execute(command: Command) -> Result<i32, CliError> {
    match command {
        Command::Convert {
            input,
            output,
            descriptor,
            preset,
            layers,
            res,
            views,
            thickness,
            points,
            seed,
            fill,
            workers,
            classes,
            json,
        } => {
            let mut config = match preset {
                Preset::Classification => JobConfig::classification(input, output),
                Preset::Segmentation => JobConfig::segmentation(input, output),
            };
            config.kind = descriptor.into();
            if let Some(c) = layers {
                config.layers = c;
            }
            if let Some(r) = res {
                (config.height, config.width) = parse_res(&r)?;
            }
            if let Some(v) = views {
                config.views = v;
            }
            config.thickness = thickness;
            config.points = points;
            config.seed = seed;
            config.fill = fill;
            if let Some(w) = workers {
                config.workers = w;
            }
            config.classes = classes;
            let report = cmd_convert(&config)?;
            if json {
                print_json(&serde_json::json!({
                    "converted": report.converted,
                    "records": report.records.len(),
                    "out_of_bounds": report.out_of_bounds,
                    "failures": report.failures,
                }));
            } else {
                println!(
                    "converted {} shape(s), {} array file(s), {} out-of-bounds point(s)",
                    report.converted,
                    report.records.len(),
                    report.out_of_bounds
                );
                for f in &report.failures {
                    eprintln!("failed {}: {}", f.path, f.error);
                }
            }
            Ok(if report.failures.is_empty() { 0 } else { 3 })
        }
        Command::SegmentFuse { input, target, output, classes, shape, views, res, no_normalize, json } => {
            let config = SegmentFuseConfig {
                manifest: input,
                shape_id: shape,
                target,
                output,
                views,
                classes,
                fusion_resolution: res,
                normalize_target: !no_normalize,
            };
            let report = cmd_segment_fuse(&config)?;
            for w in &report.warnings {
                eprintln!("warning: {w}");
            }
            if json {
                print_json(&serde_json::json!({
                    "points": report.labels.len(),
                    "views": report.views,
                    "warnings": report.warnings,
                }));
            } else {
                println!("labeled {} point(s) from {} view(s)", report.labels.len(), report.views);
            }
            Ok(0)
        }
        Command::Iou { pred, gt, classes, json } => {
            let report = cmd_iou(&pred, &gt, classes)?;
            if json {
                print_json(&report);
            } else {
                for (k, iou) in report.per_class.iter().enumerate() {
                    println!("class {:>3}: {iou:.6}", k + 1);
                }
                println!("mean: {:.6}", report.mean);
            }
            Ok(0)
        }
        Command::Rotnet { probs, class, mode, json } => {
            let mode = match mode {
                Mode::Cyclic => AssignmentMode::Cyclic,
                Mode::Independent => AssignmentMode::Independent,
            };
            let report = cmd_rotnet(&probs, class, mode)?;
            if json {
                print_json(&report);
            } else {
                println!("predicted class: {}", report.predicted_class);
                println!("assignment (class {}): {:?}", report.class, report.orientations);
                if let Some(s) = report.shift {
                    println!("shift: {s}");
                }
                for (i, l) in report.per_view_loss.iter().enumerate() {
                    println!("view {:>3} loss: {l:.6}", i + 1);
                }
                println!("total loss: {:.6}", report.total_loss);
            }
            Ok(0)
        }
    }
}

/// Parses `args` (including the program name) and runs the chosen subcommand,
/// returning the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
