use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::descriptors::{LabelMap, MlhDescriptor};
use crate::geometry::{center_normalize, GridSpec, PointCloud};
use crate::io::{parse_points, read_array, read_labels, read_manifest, write_labels, DescriptorKind, NpyArray};
use crate::rotnet::{
    best_assignment, predict_class, rotnet_total_loss, rotnet_view_loss, AssignmentMode, ClassProbs,
    OrientationAssignment,
};
use crate::segmentation::{backproject, fuse_views, point_iou, IouReport, VoxelExtent, DEFAULT_FUSION_RESOLUTION};

use super::{CliError, ViewSet};

fn read_file(path: &Path) -> Result<Vec<u8>, CliError> {
    fs::read(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn read_text(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn read_npy(path: &Path) -> Result<NpyArray, CliError> {
    read_array(&read_file(path)?).map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))
}

/// Loads a target cloud from `x y z` text or a float32 `.npy` of shape `(N, 3)`.
pub fn load_target_points(path: &Path) -> Result<PointCloud, CliError> {
    let points = if path.extension().is_some_and(|e| e == "npy") {
        let array = read_npy(path)?;
        let data = array.as_f32().map_err(|e| CliError::Parse(e.to_string()))?;
        if array.shape().len() != 2 || array.shape()[1] != 3 {
            return Err(CliError::Parse(format!("target array must have shape (N, 3), got {:?}", array.shape())));
        }
        data.chunks_exact(3).map(|c| [c[0] as f64, c[1] as f64, c[2] as f64]).collect()
    } else {
        parse_points(&read_text(path)?).map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))?
    };
    PointCloud::new(points).map_err(|e| CliError::Validation(e.to_string()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SegmentFuseConfig {
    pub manifest: PathBuf,
    pub shape_id: Option<String>,
    pub target: PathBuf,
    pub output: PathBuf,
    pub views: ViewSet,
    pub classes: u32,
    pub fusion_resolution: usize,
    /// Apply the same centering and scaling the converter used before labeling.
    pub normalize_target: bool,
}

impl SegmentFuseConfig {
    pub fn new(manifest: impl Into<PathBuf>, target: impl Into<PathBuf>, output: impl Into<PathBuf>, classes: u32) -> Self {
        Self {
            manifest: manifest.into(),
            shape_id: None,
            target: target.into(),
            output: output.into(),
            views: ViewSet::Axes3,
            classes,
            fusion_resolution: DEFAULT_FUSION_RESOLUTION,
            normalize_target: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SegmentFuseReport {
    pub labels: Vec<u32>,
    pub views: usize,
    pub warnings: Vec<String>,
}

/// Rebuilds an MLH/label-map pair from exported arrays. Bins whose first layer
/// carries the invalid label are the empty ones.
pub fn descriptor_from_arrays(
    mlh: &NpyArray,
    labels: &NpyArray,
    n_classes: u32,
) -> Result<(MlhDescriptor, LabelMap), CliError> {
    let shape = mlh.shape();
    if shape.len() != 3 || labels.shape() != shape {
        return Err(CliError::Validation(format!(
            "descriptor shape {:?} and label map shape {:?} must match and be 3-D",
            shape,
            labels.shape()
        )));
    }
    let (h, w, c) = (shape[0], shape[1], shape[2]);
    let values: Vec<f64> = mlh.as_f32().map_err(|e| CliError::Parse(e.to_string()))?.iter().map(|&v| v as f64).collect();
    let raw = labels.as_u8().map_err(|e| CliError::Parse(e.to_string()))?;
    let invalid = n_classes + 1;
    if let Some(&bad) = raw.iter().find(|&&l| l == 0 || l as u32 > invalid) {
        return Err(CliError::Validation(format!("label {bad} outside [1, {invalid}]")));
    }
    let mask = raw.chunks_exact(c).map(|bin| u8::from(bin[0] as u32 != invalid)).collect();
    Ok((
        MlhDescriptor { height: h, width: w, layers: c, values, mask, out_of_bounds: 0 },
        LabelMap { height: h, width: w, layers: c, labels: raw.iter().map(|&l| l as u32).collect(), n_classes },
    ))
}

/// Labels every target point from the labeled MLH views listed in a manifest.
pub fn cmd_segment_fuse(config: &SegmentFuseConfig) -> Result<SegmentFuseReport, CliError> {
    if config.classes == 0 || config.classes > 254 {
        return Err(CliError::Validation("--classes must be in [1, 254]".into()));
    }
    let manifest_text = read_text(&config.manifest)?;
    let records = read_manifest(&manifest_text).map_err(|e| CliError::Parse(e.to_string()))?;
    let root = config.manifest.parent().unwrap_or(Path::new("."));
    let mut records: Vec<_> = records
        .into_iter()
        .filter(|r| r.kind == DescriptorKind::Mlh && r.label_path.is_some())
        .filter(|r| config.shape_id.as_ref().is_none_or(|id| &r.shape_id == id))
        .collect();
    records.sort_by_key(|r| r.orientation);
    let Some(first) = records.first() else {
        return Err(CliError::Validation("manifest lists no labeled MLH records for the requested shape".into()));
    };
    if records.iter().any(|r| r.shape_id != first.shape_id) {
        return Err(CliError::Usage("manifest covers several shapes; select one with --shape".into()));
    }

    let frames = config.views.frames();
    let mut clouds = Vec::with_capacity(records.len());
    for r in &records {
        let frame = frames.get(r.orientation).ok_or_else(|| {
            CliError::Validation(format!("orientation {} not in view set {}", r.orientation, config.views))
        })?;
        let mlh = read_npy(&root.join(&r.array_path))?;
        let labels = read_npy(&root.join(r.label_path.as_ref().expect("filtered above")))?;
        let (mlh, map) = descriptor_from_arrays(&mlh, &labels, config.classes)?;
        let spec = GridSpec::unit(mlh.height, mlh.width, mlh.layers).map_err(|e| CliError::Validation(e.to_string()))?;
        clouds.push(backproject(&mlh, &map, frame, &spec).map_err(|e| CliError::Validation(e.to_string()))?);
    }

    let mut target = load_target_points(&config.target)?;
    if config.normalize_target {
        target = center_normalize(&target).map_err(|e| CliError::Validation(e.to_string()))?;
    }
    let mut warnings = Vec::new();
    if clouds.iter().all(|c| c.is_empty()) {
        warnings.push("all label maps are empty; every point receives the invalid label".to_string());
    }
    let labels = fuse_views(&clouds, config.fusion_resolution, VoxelExtent::default(), &target)
        .map_err(|e| CliError::Validation(e.to_string()))?;
    if let Some(parent) = config.output.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| CliError::Io(e.to_string()))?;
    }
    fs::write(&config.output, write_labels(&labels)).map_err(|e| CliError::Io(e.to_string()))?;
    Ok(SegmentFuseReport { labels, views: clouds.len(), warnings })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IouSummary {
    pub per_class: Vec<f64>,
    pub mean: f64,
}

impl From<IouReport> for IouSummary {
    fn from(r: IouReport) -> Self {
        Self { per_class: r.per_class, mean: r.mean }
    }
}

pub fn cmd_iou(pred: &Path, gt: &Path, classes: u32) -> Result<IouSummary, CliError> {
    let parse = |p: &Path| -> Result<Vec<u32>, CliError> {
        read_labels(&read_text(p)?).map_err(|e| CliError::Parse(format!("{}: {e}", p.display())))
    };
    let report = point_iou(&parse(pred)?, &parse(gt)?, classes).map_err(|e| CliError::Validation(e.to_string()))?;
    Ok(report.into())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RotnetReport {
    pub views: usize,
    pub classes: usize,
    /// Class the assignment and losses refer to.
    pub class: usize,
    pub predicted_class: usize,
    pub orientations: Vec<usize>,
    pub shift: Option<usize>,
    pub per_view_loss: Vec<f64>,
    pub total_loss: f64,
}

/// Reads `m` stacked probability tables, shape `(m, m, n + 1)`, as [`ClassProbs`].
pub fn probs_from_array(array: &NpyArray) -> Result<Vec<ClassProbs>, CliError> {
    let shape = array.shape();
    let (m, cols) = match *shape {
        [m, rows, cols] if rows == m => (m, cols),
        [1, cols] => (1, cols),
        _ => {
            return Err(CliError::Validation(format!(
                "probability tensor must have shape (m, m, n+1), got {shape:?}"
            )))
        }
    };
    if m == 0 || cols < 2 {
        return Err(CliError::Validation(format!("degenerate probability tensor shape {shape:?}")));
    }
    let data = array.as_f32().map_err(|e| CliError::Parse(e.to_string()))?;
    data.chunks_exact(m * cols)
        .map(|view| {
            ClassProbs::new(m, cols - 1, view.iter().map(|&v| v as f64).collect())
                .map_err(|e| CliError::Validation(e.to_string()))
        })
        .collect()
}

/// Best orientation assignment and RotationNet losses for one instance. With
/// `class = None` the predicted class is used.
pub fn cmd_rotnet(probs: &Path, class: Option<usize>, mode: AssignmentMode) -> Result<RotnetReport, CliError> {
    let ys = probs_from_array(&read_npy(probs)?)?;
    let (m, n) = (ys.len(), ys[0].classes());
    let (predicted_class, predicted) = predict_class(&ys, mode).map_err(|e| CliError::Validation(e.to_string()))?;
    let (class, assignment): (usize, OrientationAssignment) = match class {
        Some(c) => (c, best_assignment(&ys, c, mode).map_err(|e| CliError::Validation(e.to_string()))?),
        None => (predicted_class, predicted),
    };
    let per_view_loss = ys
        .iter()
        .zip(&assignment.orientations)
        .map(|(y, &o)| rotnet_view_loss(y, o, class))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| CliError::Validation(e.to_string()))?;
    let total_loss = rotnet_total_loss(&ys, &assignment, class).map_err(|e| CliError::Validation(e.to_string()))?;
    Ok(RotnetReport {
        views: m,
        classes: n,
        class,
        predicted_class,
        shift: if mode == AssignmentMode::Cyclic { assignment.shift() } else { None },
        orientations: assignment.orientations,
        per_view_loss,
        total_loss,
    })
}
