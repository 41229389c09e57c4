//! Structured 2D representations of 3D shapes.
//!
//! A point cloud (or a mesh sampled into one) is viewed through a grid frame
//! and summarized into an `H × W × c` tensor that a 2D convolutional network
//! can consume:
//!
//! * [`descriptors::compute_mlh`]: multi-layered height maps, `c` percentile
//!   heights per bin;
//! * [`descriptors::compute_slices`]: binary occupancy of `c` slabs;
//! * [`descriptors::compute_volume`]: binary occupancy of the `H × W × c` voxel grid.
//!
//! [`segmentation`] maps per-layer label maps back onto points, and [`rotnet`]
//! holds the loss and orientation-assignment math for multi-view classification.

pub mod cli;
pub mod descriptors;
pub mod geometry;
pub mod io;
pub mod rotnet;
pub mod segmentation;

pub use descriptors::{
    compute_mlh, compute_mlh_labeled, compute_slices, compute_volume, LabelMap, MlhDescriptor, PercentileMode,
    SliceDescriptor, VolumeDescriptor,
};
pub use geometry::{
    axis_orientations, center_normalize, sample_mesh, to_grid_coords, z_ring_orientations, GridFrame, GridSpec,
    LabeledPointCloud, PointCloud, Range, TriangleMesh,
};
