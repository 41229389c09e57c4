use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use crate::descriptors::DEFAULT_FILL;
use crate::geometry::{axis_orientations, z_ring_orientations, GridFrame, GridSpec};
use crate::io::DescriptorKind;

use super::CliError;

pub const CLASSIFICATION_RES: usize = 256;
pub const CLASSIFICATION_LAYERS: usize = 5;
pub const CLASSIFICATION_VIEWS: usize = 12;
pub const SEGMENTATION_RES: usize = 64;
pub const SEGMENTATION_LAYERS: usize = 2;
pub const DEFAULT_POINTS: usize = 100_000;

/// Set of grid orientations a shape is described from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ViewSet {
    /// `m` frames rotated about world Z.
    ZRing(usize),
    /// Frames looking along X, Y and Z.
    Axes3,
}

impl ViewSet {
    pub fn frames(&self) -> Vec<GridFrame> {
        match *self {
            ViewSet::ZRing(m) => z_ring_orientations(m),
            ViewSet::Axes3 => axis_orientations(),
        }
    }

    pub fn len(&self) -> usize {
        match *self {
            ViewSet::ZRing(m) => m,
            ViewSet::Axes3 => 3,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl FromStr for ViewSet {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "axes3" {
            return Ok(ViewSet::Axes3);
        }
        let m = s
            .strip_prefix("zring:")
            .ok_or_else(|| format!("unknown view set `{s}` (expected zring:M or axes3)"))?;
        match m.parse::<usize>() {
            Ok(m) if m >= 1 => Ok(ViewSet::ZRing(m)),
            _ => Err(format!("invalid view count in `{s}`")),
        }
    }
}

impl fmt::Display for ViewSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ViewSet::ZRing(m) => write!(f, "zring:{m}"),
            ViewSet::Axes3 => f.write_str("axes3"),
        }
    }
}

/// Settings of a `convert` job.
#[derive(Debug, Clone, PartialEq)]
pub struct JobConfig {
    pub input: PathBuf,
    pub output: PathBuf,
    pub kind: DescriptorKind,
    pub height: usize,
    pub width: usize,
    pub layers: usize,
    pub views: ViewSet,
    /// Slice thickness; `None` means `D / c`.
    pub thickness: Option<f64>,
    pub points: usize,
    pub seed: u64,
    pub workers: usize,
    pub fill: f64,
    /// Part count of labeled point-cloud inputs.
    pub classes: Option<u32>,
}

impl JobConfig {
    /// `256 × 256 × 5` descriptors from 12 Z-ring views.
    pub fn classification(input: impl Into<PathBuf>, output: impl Into<PathBuf>) -> Self {
        Self {
            input: input.into(),
            output: output.into(),
            kind: DescriptorKind::Mlh,
            height: CLASSIFICATION_RES,
            width: CLASSIFICATION_RES,
            layers: CLASSIFICATION_LAYERS,
            views: ViewSet::ZRing(CLASSIFICATION_VIEWS),
            thickness: None,
            points: DEFAULT_POINTS,
            seed: 0,
            workers: default_workers(),
            fill: DEFAULT_FILL,
            classes: None,
        }
    }

    /// `64 × 64 × 2` MLH from the three axis views.
    pub fn segmentation(input: impl Into<PathBuf>, output: impl Into<PathBuf>) -> Self {
        Self {
            height: SEGMENTATION_RES,
            width: SEGMENTATION_RES,
            layers: SEGMENTATION_LAYERS,
            views: ViewSet::Axes3,
            ..Self::classification(input, output)
        }
    }

    pub fn grid_spec(&self) -> Result<GridSpec, CliError> {
        let spec = GridSpec::unit(self.height, self.width, self.layers)
            .map_err(|e| CliError::Validation(e.to_string()))?;
        match self.thickness {
            Some(t) => spec.with_thickness(t).map_err(|e| CliError::Validation(e.to_string())),
            None => Ok(spec),
        }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.grid_spec()?;
        if self.views.is_empty() {
            return Err(CliError::Validation("view set is empty".into()));
        }
        if self.points == 0 {
            return Err(CliError::Validation("--points must be at least 1".into()));
        }
        if self.workers == 0 {
            return Err(CliError::Validation("--workers must be at least 1".into()));
        }
        if !self.fill.is_finite() {
            return Err(CliError::Validation("--fill must be finite".into()));
        }
        if let Some(n) = self.classes {
            if n == 0 || n > 254 {
                return Err(CliError::Validation("--classes must be in [1, 254] for uint8 label maps".into()));
            }
        }
        Ok(())
    }
}

pub(crate) fn default_workers() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}
