use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};
use walkdir::WalkDir;

use crate::descriptors::{compute_mlh, compute_mlh_labeled, compute_slices, compute_volume, PercentileMode};
use crate::geometry::{center_normalize, sample_mesh, GridFrame, GridSpec, LabeledPointCloud, PointCloud};
use crate::io::{
    parse_obj, parse_off, parse_points, read_labels, write_array, write_manifest, DescriptorKind, ManifestRecord,
    NpyArray,
};

use super::{CliError, JobConfig};

pub const MANIFEST_FILE: &str = "manifest.jsonl";
pub const ERROR_REPORT_FILE: &str = "errors.json";
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ShapeFailure {
    pub shape_id: String,
    pub path: String,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvertReport {
    pub converted: usize,
    pub records: Vec<ManifestRecord>,
    pub failures: Vec<ShapeFailure>,
    /// Points dropped for lying outside the grid, summed over shapes and views.
    pub out_of_bounds: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum InputKind {
    Off,
    Obj,
    /// `x y z` text, with an optional sibling `.seg` label file.
    Points,
}

#[derive(Debug, Clone)]
struct ShapeInput {
    path: PathBuf,
    shape_id: String,
    class_name: String,
    kind: InputKind,
}

/// Seed for one shape, derived from the job seed and the shape id so that the
/// samples do not depend on scheduling.
pub fn shape_seed(seed: u64, shape_id: &str) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(seed.to_le_bytes());
    hasher.update(shape_id.as_bytes());
    let digest = hasher.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("digest has 32 bytes"))
}

fn discover(input: &Path) -> Result<Vec<ShapeInput>, CliError> {
    if !input.is_dir() {
        return Err(CliError::Usage(format!("input `{}` is not a directory", input.display())));
    }
    let mut shapes = Vec::new();
    for entry in WalkDir::new(input).sort_by_file_name() {
        let entry = entry.map_err(|e| CliError::Io(e.to_string()))?;
        if !entry.file_type().is_file() {
            continue;
        }
        let path = entry.path();
        let kind = match path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref() {
            Some("off") => InputKind::Off,
            Some("obj") => InputKind::Obj,
            Some("pts") => InputKind::Points,
            _ => continue,
        };
        let rel = path.strip_prefix(input).expect("walkdir yields children of the root");
        let components: Vec<String> = rel
            .with_extension("")
            .components()
            .map(|c| c.as_os_str().to_string_lossy().into_owned())
            .collect();
        let class_name = if components.len() > 1 { components[0].clone() } else { String::new() };
        shapes.push(ShapeInput { path: path.to_path_buf(), shape_id: components.join("/"), class_name, kind });
    }
    shapes.sort_by(|a, b| a.shape_id.cmp(&b.shape_id));
    Ok(shapes)
}

struct ShapeOutput {
    records: Vec<ManifestRecord>,
    out_of_bounds: usize,
}

fn load_cloud(shape: &ShapeInput, config: &JobConfig, seed: u64) -> Result<PointCloud, String> {
    let bytes = fs::read(&shape.path).map_err(|e| e.to_string())?;
    match shape.kind {
        InputKind::Off | InputKind::Obj => {
            let mesh = if shape.kind == InputKind::Off { parse_off(&bytes) } else { parse_obj(&bytes) }
                .map_err(|e| e.to_string())?;
            sample_mesh(&mesh, config.points, seed).map_err(|e| e.to_string())
        }
        InputKind::Points => {
            let text = String::from_utf8(bytes).map_err(|e| e.to_string())?;
            let points = parse_points(&text).map_err(|e| e.to_string())?;
            let seg = shape.path.with_extension("seg");
            if !seg.is_file() {
                return PointCloud::new(points).map_err(|e| e.to_string());
            }
            let n = config.classes.ok_or("labeled input requires --classes")?;
            let labels = read_labels(&fs::read_to_string(&seg).map_err(|e| e.to_string())?)
                .map_err(|e| e.to_string())?;
            PointCloud::with_labels(points, labels, n).map_err(|e| e.to_string())
        }
    }
}

fn write_npy(root: &Path, rel: &str, array: &NpyArray) -> Result<(), String> {
    let path = root.join(rel);
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| e.to_string())?;
    }
    fs::write(&path, write_array(array)).map_err(|e| format!("{}: {e}", path.display()))
}

fn convert_shape(
    shape: &ShapeInput,
    class_id: usize,
    config: &JobConfig,
    spec: &GridSpec,
    frames: &[GridFrame],
) -> Result<ShapeOutput, String> {
    let seed = shape_seed(config.seed, &shape.shape_id);
    let cloud = center_normalize(&load_cloud(shape, config, seed)?).map_err(|e| e.to_string())?;
    let labeled = match (&cloud.labels, config.classes) {
        (Some(_), Some(n)) => {
            if config.kind != DescriptorKind::Mlh {
                return Err("labeled inputs only produce MLH descriptors".into());
            }
            Some(LabeledPointCloud::from_cloud(cloud.clone(), n).map_err(|e| e.to_string())?)
        }
        _ => None,
    };
    let shape_dims = vec![spec.height, spec.width, spec.layers];
    let mut out = ShapeOutput { records: Vec::with_capacity(frames.len()), out_of_bounds: 0 };
    for (k, frame) in frames.iter().enumerate() {
        let array_path = format!("{}/{}_o{k:02}.npy", shape.shape_id, config.kind);
        let mut label_path = None;
        let array = match (config.kind, &labeled) {
            (DescriptorKind::Mlh, Some(lc)) => {
                let (mlh, map) = compute_mlh_labeled(lc, frame, spec);
                out.out_of_bounds += mlh.out_of_bounds;
                let labels: Vec<u8> = map.labels.iter().map(|&l| l as u8).collect();
                let rel = format!("{}/labels_o{k:02}.npy", shape.shape_id);
                write_npy(&config.output, &rel, &NpyArray::u8(shape_dims.clone(), labels).expect("shape matches"))?;
                label_path = Some(rel);
                NpyArray::f32(shape_dims.clone(), mlh.with_fill(config.fill).to_f32())
            }
            (DescriptorKind::Mlh, None) => {
                let mlh = compute_mlh(&cloud, frame, spec, PercentileMode::Interpolated);
                out.out_of_bounds += mlh.out_of_bounds;
                NpyArray::f32(shape_dims.clone(), mlh.with_fill(config.fill).to_f32())
            }
            (DescriptorKind::Slice, _) => {
                let s = compute_slices(&cloud, frame, spec);
                out.out_of_bounds += s.out_of_bounds;
                NpyArray::u8(shape_dims.clone(), s.values)
            }
            (DescriptorKind::Volume, _) => {
                let v = compute_volume(&cloud, frame, spec);
                out.out_of_bounds += v.out_of_bounds;
                NpyArray::u8(shape_dims.clone(), v.values)
            }
        }
        .expect("descriptor length matches its shape");
        write_npy(&config.output, &array_path, &array)?;
        out.records.push(ManifestRecord {
            shape_id: shape.shape_id.clone(),
            class_name: shape.class_name.clone(),
            class_id,
            orientation: k,
            kind: config.kind,
            layers: spec.layers,
            array_path,
            label_path,
            seed,
            tool_version: TOOL_VERSION.to_string(),
        });
    }
    Ok(out)
}

/// Converts every OFF/OBJ/PTS file under `config.input` into one descriptor per
/// view and writes `manifest.jsonl` plus `errors.json` to `config.output`.
/// Files that fail are listed in the error report; the rest still convert.
pub fn cmd_convert(config: &JobConfig) -> Result<ConvertReport, CliError> {
    config.validate()?;
    let spec = config.grid_spec()?;
    let frames = config.views.frames();
    let shapes = discover(&config.input)?;
    if shapes.iter().any(|s| s.kind == InputKind::Points && s.path.with_extension("seg").is_file())
        && config.classes.is_none()
    {
        return Err(CliError::Usage("labeled point inputs (.pts + .seg) require --classes".into()));
    }
    let class_names: BTreeSet<&str> = shapes.iter().map(|s| s.class_name.as_str()).collect();
    let class_ids: Vec<usize> = shapes
        .iter()
        .map(|s| class_names.iter().position(|c| *c == s.class_name).expect("collected above"))
        .collect();
    fs::create_dir_all(&config.output).map_err(|e| CliError::Io(e.to_string()))?;

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers)
        .build()
        .map_err(|e| CliError::Io(e.to_string()))?;
    let results: Vec<Result<ShapeOutput, String>> = pool.install(|| {
        shapes
            .par_iter()
            .zip(class_ids.par_iter())
            .map(|(shape, &class_id)| convert_shape(shape, class_id, config, &spec, &frames))
            .collect()
    });

    let mut report = ConvertReport { converted: 0, records: Vec::new(), failures: Vec::new(), out_of_bounds: 0 };
    for (shape, result) in shapes.iter().zip(results) {
        match result {
            Ok(out) => {
                report.converted += 1;
                report.out_of_bounds += out.out_of_bounds;
                report.records.extend(out.records);
            }
            Err(error) => report.failures.push(ShapeFailure {
                shape_id: shape.shape_id.clone(),
                path: shape.path.strip_prefix(&config.input).unwrap_or(&shape.path).display().to_string(),
                error,
            }),
        }
    }
    let manifest = write_manifest(&report.records).map_err(|e| CliError::Validation(e.to_string()))?;
    fs::write(config.output.join(MANIFEST_FILE), manifest).map_err(|e| CliError::Io(e.to_string()))?;
    let errors = serde_json::to_string_pretty(&report.failures).expect("failures serialize");
    fs::write(config.output.join(ERROR_REPORT_FILE), errors + "\n").map_err(|e| CliError::Io(e.to_string()))?;
    Ok(report)
}
