//! Line-delimited JSON manifest describing every array file of a converted dataset.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ManifestError {
    #[error("line {line}: {source}")]
    Json { line: usize, source: serde_json::Error },
    #[error("line {line}: duplicate record for ({shape_id}, {orientation}, {kind})")]
    Duplicate { line: usize, shape_id: String, orientation: usize, kind: DescriptorKind },
    #[error("line {line}: path `{path}` must be relative to the manifest")]
    AbsolutePath { line: usize, path: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DescriptorKind {
    Mlh,
    Slice,
    Volume,
}

impl std::fmt::Display for DescriptorKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            DescriptorKind::Mlh => "mlh",
            DescriptorKind::Slice => "slice",
            DescriptorKind::Volume => "volume",
        })
    }
}

/// One descriptor of one shape seen from one orientation. Field order here is
/// the serialized key order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestRecord {
    pub shape_id: String,
    pub class_name: String,
    pub class_id: usize,
    pub orientation: usize,
    pub kind: DescriptorKind,
    pub layers: usize,
    pub array_path: String,
    pub label_path: Option<String>,
    pub seed: u64,
    pub tool_version: String,
}

fn validate(records: &[ManifestRecord]) -> Result<(), ManifestError> {
    let mut seen = HashSet::new();
    for (n, r) in records.iter().enumerate() {
        let line = n + 1;
        for path in std::iter::once(&r.array_path).chain(r.label_path.as_ref()) {
            if path.starts_with('/') || std::path::Path::new(path).is_absolute() {
                return Err(ManifestError::AbsolutePath { line, path: path.clone() });
            }
        }
        if !seen.insert((r.shape_id.as_str(), r.orientation, r.kind)) {
            return Err(ManifestError::Duplicate {
                line,
                shape_id: r.shape_id.clone(),
                orientation: r.orientation,
                kind: r.kind,
            });
        }
    }
    Ok(())
}

/// Serializes validated records, one JSON object per LF-terminated line.
pub fn write_manifest(records: &[ManifestRecord]) -> Result<String, ManifestError> {
    validate(records)?;
    let mut out = String::new();
    for r in records {
        // serializing a plain struct of strings and integers cannot fail
        out.push_str(&serde_json::to_string(r).expect("record serializes"));
        out.push('\n');
    }
    Ok(out)
}

pub fn read_manifest(text: &str) -> Result<Vec<ManifestRecord>, ManifestError> {
    let mut records = Vec::new();
    for (n, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let record = serde_json::from_str(line).map_err(|source| ManifestError::Json { line: n + 1, source })?;
        records.push(record);
    }
    validate(&records)?;
    Ok(records)
}
