//! File formats: mesh input, `.npy` arrays, manifests, label files, point lists.

pub mod labels;
pub mod manifest;
pub mod mesh;
pub mod npy;
pub mod points;

pub use labels::{read_labels, write_labels, LabelParseError};
pub use manifest::{read_manifest, write_manifest, DescriptorKind, ManifestError, ManifestRecord};
pub use mesh::{parse_obj, parse_off, MeshParseError};
pub use npy::{read_array, write_array, ArrayData, Dtype, NpyArray, NpyError};
pub use points::{parse_points, PointsParseError};
