//! Turning per-layer label maps back into per-point labels: back-projection of
//! MLH entries, voxel-mode voting, multi-view fusion and point IoU.

use thiserror::Error;

use crate::descriptors::{LabelMap, MlhDescriptor};
use crate::geometry::{GridFrame, GridSpec, PointCloud, Range, Vec3, UNIT_RANGE};

/// Default fusion grid resolution per axis.
pub const DEFAULT_FUSION_RESOLUTION: usize = 64;

#[derive(Debug, Error, PartialEq)]
pub enum SegmentationError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("label count {pred} does not match ground-truth count {gt}")]
    LengthMismatch { pred: usize, gt: usize },
    #[error("at least one view is required")]
    NoViews,
    #[error("views disagree on class count ({0} vs {1})")]
    ClassCountMismatch(u32, u32),
    #[error("voxel resolution must be at least 1")]
    ZeroResolution,
}

/// Points with labels in `[1, n_classes + 1]`, where `n_classes + 1` marks
/// entries with no semantic label.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledCloud {
    pub points: Vec<Vec3>,
    pub labels: Vec<u32>,
    pub n_classes: u32,
}

impl LabeledCloud {
    pub fn invalid_label(&self) -> u32 {
        self.n_classes + 1
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Axis-aligned box covered by a voxel grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VoxelExtent {
    pub axes: [Range; 3],
}

impl VoxelExtent {
    pub fn cube(lo: f64, hi: f64) -> Self {
        Self { axes: [Range::new(lo, hi); 3] }
    }

    fn is_degenerate(&self) -> bool {
        self.axes.iter().any(|r| !(r.hi > r.lo))
    }
}

impl Default for VoxelExtent {
    fn default() -> Self {
        Self { axes: [UNIT_RANGE; 3] }
    }
}

/// `R³` voxels each holding a label in `[1, n]`, or 0 when no point voted.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledVoxelGrid {
    pub resolution: usize,
    pub extent: VoxelExtent,
    pub labels: Vec<u32>,
    pub n_classes: u32,
}

impl LabeledVoxelGrid {
    fn index(&self, [x, y, z]: [usize; 3]) -> usize {
        (x * self.resolution + y) * self.resolution + z
    }

    pub fn label_at(&self, cell: [usize; 3]) -> u32 {
        self.labels[self.index(cell)]
    }

    /// Voxel containing `p`, or `None` outside the extent.
    pub fn voxel_of(&self, p: Vec3) -> Option<[usize; 3]> {
        let r = self.resolution;
        Some([
            self.extent.axes[0].bin(p[0], r)?,
            self.extent.axes[1].bin(p[1], r)?,
            self.extent.axes[2].bin(p[2], r)?,
        ])
    }

    /// Like [`LabeledVoxelGrid::voxel_of`] but clamps outside points to the boundary voxel.
    pub fn nearest_voxel(&self, p: Vec3) -> [usize; 3] {
        let r = self.resolution;
        let mut cell = [0; 3];
        for a in 0..3 {
            let range = self.extent.axes[a];
            let x = p[a].clamp(range.lo, range.hi);
            cell[a] = range.bin(x, r).unwrap_or(0);
        }
        cell
    }

    pub fn is_empty(&self) -> bool {
        self.labels.iter().all(|&l| l == 0)
    }
}

/// Reconstructs a labeled cloud from an MLH and its label map: every entry of a
/// non-empty bin becomes a point at the bin center in the grid plane, lifted by
/// the stored height. Entries carrying the invalid label are skipped.
pub fn backproject(
    mlh: &MlhDescriptor,
    labels: &LabelMap,
    frame: &GridFrame,
    spec: &GridSpec,
) -> Result<LabeledCloud, SegmentationError> {
    let grid = [spec.height, spec.width, spec.layers];
    if mlh.shape() != labels.shape() {
        return Err(SegmentationError::ShapeMismatch(format!(
            "descriptor {:?} vs label map {:?}",
            mlh.shape(),
            labels.shape()
        )));
    }
    if mlh.shape() != grid {
        return Err(SegmentationError::ShapeMismatch(format!(
            "descriptor {:?} vs grid {:?}",
            mlh.shape(),
            grid
        )));
    }
    let invalid = labels.invalid_label();
    let (bu, bv) = (spec.bin_width_u(), spec.bin_width_v());
    let mut out = LabeledCloud { points: Vec::new(), labels: Vec::new(), n_classes: labels.n_classes };
    for i in 0..spec.height {
        for j in 0..spec.width {
            if !mlh.is_occupied(i, j) {
                continue;
            }
            let a = spec.extent_u.lo + (i as f64 + 0.5) * bu;
            let b = spec.extent_v.lo + (j as f64 + 0.5) * bv;
            for k in 0..spec.layers {
                let label = labels.label(i, j, k);
                if label == invalid {
                    continue;
                }
                out.points.push(frame.world([a, b, mlh.value(i, j, k)]));
                out.labels.push(label);
            }
        }
    }
    Ok(out)
}

/// Assigns every voxel the most frequent label among the points inside it.
/// Ties go to the smaller label; invalid-labeled and outside points do not vote.
pub fn voxel_mode_labels(
    cloud: &LabeledCloud,
    resolution: usize,
    extent: VoxelExtent,
) -> Result<LabeledVoxelGrid, SegmentationError> {
    if resolution == 0 {
        return Err(SegmentationError::ZeroResolution);
    }
    if extent.is_degenerate() {
        return Err(SegmentationError::ShapeMismatch("degenerate voxel extent".into()));
    }
    let mut grid = LabeledVoxelGrid {
        resolution,
        extent,
        labels: vec![0; resolution * resolution * resolution],
        n_classes: cloud.n_classes,
    };
    let mut votes: Vec<(usize, u32)> = cloud
        .points
        .iter()
        .zip(&cloud.labels)
        .filter(|&(_, &l)| l >= 1 && l <= cloud.n_classes)
        .filter_map(|(&p, &l)| grid.voxel_of(p).map(|cell| (grid.index(cell), l)))
        .collect();
    votes.sort_unstable();

    let mut start = 0;
    while start < votes.len() {
        let voxel = votes[start].0;
        let mut best = (0usize, 0u32);
        let mut pos = start;
        while pos < votes.len() && votes[pos].0 == voxel {
            let label = votes[pos].1;
            let run = votes[pos..].iter().take_while(|v| **v == (voxel, label)).count();
            // labels ascend within a voxel, so strict > keeps the smallest on ties
            if run > best.0 {
                best = (run, label);
            }
            pos += run;
        }
        grid.labels[voxel] = best.1;
        start = pos;
    }
    Ok(grid)
}

/// For every voxel, the label of the nearest labeled voxel in 6-connected
/// (L1) distance, ties broken toward the smaller label.
fn fill_by_nearest(grid: &LabeledVoxelGrid) -> Vec<u32> {
    let r = grid.resolution;
    let mut filled = grid.labels.clone();
    let mut dist = vec![u32::MAX; filled.len()];
    let mut frontier: Vec<usize> = Vec::new();
    for (idx, &l) in filled.iter().enumerate() {
        if l != 0 {
            dist[idx] = 0;
            frontier.push(idx);
        }
    }
    let mut level = 0u32;
    // labels of a level are final before the next level expands from them
    while !frontier.is_empty() {
        level += 1;
        let mut next = Vec::new();
        for &idx in &frontier {
            let (x, rest) = (idx / (r * r), idx % (r * r));
            let (y, z) = (rest / r, rest % r);
            let label = filled[idx];
            let mut visit = |n: usize| {
                if dist[n] == u32::MAX {
                    dist[n] = level;
                    filled[n] = label;
                    next.push(n);
                } else if dist[n] == level && label < filled[n] {
                    filled[n] = label;
                }
            };
            if x > 0 { visit(idx - r * r); }
            if x + 1 < r { visit(idx + r * r); }
            if y > 0 { visit(idx - r); }
            if y + 1 < r { visit(idx + r); }
            if z > 0 { visit(idx - 1); }
            if z + 1 < r { visit(idx + 1); }
        }
        frontier = next;
    }
    filled
}

/// Labels each point with its voxel's label. Points in empty voxels take the
/// label of the nearest labeled voxel; if the grid holds no labels at all every
/// point gets the invalid label `n + 1`. Points outside the extent use the
/// closest boundary voxel.
pub fn transfer_labels(grid: &LabeledVoxelGrid, cloud: &PointCloud) -> Vec<u32> {
    if grid.is_empty() {
        return vec![grid.n_classes + 1; cloud.len()];
    }
    let filled = fill_by_nearest(grid);
    cloud
        .points
        .iter()
        .map(|&p| filled[grid.index(grid.nearest_voxel(p))])
        .collect()
}

/// Pools the back-projected clouds of all views, votes once on the combined
/// cloud and transfers the result to `target`.
pub fn fuse_views(
    views: &[LabeledCloud],
    resolution: usize,
    extent: VoxelExtent,
    target: &PointCloud,
) -> Result<Vec<u32>, SegmentationError> {
    let first = views.first().ok_or(SegmentationError::NoViews)?;
    let mut combined = LabeledCloud { points: Vec::new(), labels: Vec::new(), n_classes: first.n_classes };
    for view in views {
        if view.n_classes != first.n_classes {
            return Err(SegmentationError::ClassCountMismatch(first.n_classes, view.n_classes));
        }
        if view.points.len() != view.labels.len() {
            return Err(SegmentationError::ShapeMismatch("view points and labels differ in length".into()));
        }
        combined.points.extend_from_slice(&view.points);
        combined.labels.extend_from_slice(&view.labels);
    }
    let grid = voxel_mode_labels(&combined, resolution, extent)?;
    Ok(transfer_labels(&grid, target))
}

#[derive(Debug, Clone, PartialEq)]
pub struct IouReport {
    /// IoU of classes `1..=n`; classes absent from both labelings score 1.
    pub per_class: Vec<f64>,
    /// Mean over classes present in the prediction or the ground truth.
    pub mean: f64,
}

/// Per-class intersection over union between predicted and ground-truth point labels.
pub fn point_iou(pred: &[u32], gt: &[u32], n_classes: u32) -> Result<IouReport, SegmentationError> {
    if pred.len() != gt.len() {
        return Err(SegmentationError::LengthMismatch { pred: pred.len(), gt: gt.len() });
    }
    let n = n_classes as usize;
    let mut inter = vec![0usize; n + 1];
    let mut union = vec![0usize; n + 1];
    for (&p, &g) in pred.iter().zip(gt) {
        let p = p as usize;
        let g = g as usize;
        if p == g {
            if (1..=n).contains(&p) {
                inter[p] += 1;
                union[p] += 1;
            }
        } else {
            if (1..=n).contains(&p) {
                union[p] += 1;
            }
            if (1..=n).contains(&g) {
                union[g] += 1;
            }
        }
    }
    let mut per_class = Vec::with_capacity(n);
    let mut sum = 0.0;
    let mut present = 0usize;
    for k in 1..=n {
        if union[k] == 0 {
            per_class.push(1.0);
        } else {
            let iou = inter[k] as f64 / union[k] as f64;
            per_class.push(iou);
            sum += iou;
            present += 1;
        }
    }
    let mean = if present == 0 { 1.0 } else { sum / present as f64 };
    Ok(IouReport { per_class, mean })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::descriptors::compute_mlh_labeled;
    use crate::geometry::LabeledPointCloud;

    fn cloud_of(points: Vec<Vec3>, labels: Vec<u32>, n: u32) -> LabeledCloud {
        LabeledCloud { points, labels, n_classes: n }
    }

    #[test]
    fn backproject_single_bin() {
        let spec = GridSpec::unit(2, 2, 1).unwrap();
        let mut mlh = MlhDescriptor {
            height: 2,
            width: 2,
            layers: 1,
            values: vec![-2.0; 4],
            mask: vec![0; 4],
            out_of_bounds: 0,
        };
        mlh.values[0] = 0.5;
        mlh.mask[0] = 1;
        let map = LabelMap { height: 2, width: 2, layers: 1, labels: vec![3, 5, 5, 5], n_classes: 4 };
        let out = backproject(&mlh, &map, &GridFrame::identity(), &spec).unwrap();
        assert_eq!(out.points, vec![[-0.5, -0.5, 0.5]]);
        assert_eq!(out.labels, vec![3]);
    }

    #[test]
    fn backproject_rejects_mismatched_shapes() {
        let spec = GridSpec::unit(2, 2, 1).unwrap();
        let mlh = MlhDescriptor { height: 2, width: 2, layers: 1, values: vec![0.0; 4], mask: vec![0; 4], out_of_bounds: 0 };
        let map = LabelMap { height: 2, width: 2, layers: 2, labels: vec![1; 8], n_classes: 1 };
        assert!(matches!(
            backproject(&mlh, &map, &GridFrame::identity(), &spec),
            Err(SegmentationError::ShapeMismatch(_))
        ));
    }

    #[test]
    fn backproject_empty_descriptor() {
        let spec = GridSpec::unit(3, 3, 2).unwrap();
        let cloud = LabeledPointCloud::new(vec![[5.0, 5.0, 5.0]], vec![1], 2).unwrap();
        let (mlh, map) = compute_mlh_labeled(&cloud, &GridFrame::identity(), &spec);
        let out = backproject(&mlh, &map, &GridFrame::identity(), &spec).unwrap();
        assert!(out.is_empty());
    }

    #[test]
    fn backproject_isolated_points_recovers_heights() {
        let spec = GridSpec::unit(8, 8, 1).unwrap();
        let frame = crate::geometry::z_ring_orientations(12)[1];
        // one point per bin: place points at distinct bin centers plus an in-plane offset
        let mut pts = Vec::new();
        let mut labels = Vec::new();
        for (n, (i, j)) in [(0usize, 1usize), (3, 3), (7, 2), (5, 6)].into_iter().enumerate() {
            let a = -1.0 + (i as f64 + 0.3) * 0.25;
            let b = -1.0 + (j as f64 + 0.8) * 0.25;
            let h = -0.7 + 0.4 * n as f64;
            pts.push(frame.world([a, b, h]));
            labels.push(n as u32 + 1);
        }
        let cloud = LabeledPointCloud::new(pts.clone(), labels.clone(), 4).unwrap();
        let (mlh, map) = compute_mlh_labeled(&cloud, &frame, &spec);
        let out = backproject(&mlh, &map, &frame, &spec).unwrap();
        assert_eq!(out.len(), 4);
        for (p, l) in pts.iter().zip(&labels) {
            let [a, b, h] = frame.local(*p);
            let want = [
                -1.0 + ((a + 1.0) / 0.25).floor() * 0.25 + 0.125,
                -1.0 + ((b + 1.0) / 0.25).floor() * 0.25 + 0.125,
                h,
            ];
            let found = out.points.iter().zip(&out.labels).find(|(q, _)| {
                let lq = frame.local(**q);
                (0..3).all(|k| (lq[k] - want[k]).abs() < 1e-12)
            });
            assert_eq!(found.map(|(_, l)| *l), Some(*l));
        }
    }

    #[test]
    fn voxel_mode_majority_and_ties() {
        let c = cloud_of(vec![[0.1, 0.1, 0.1]; 3], vec![2, 2, 1], 3);
        let g = voxel_mode_labels(&c, 2, VoxelExtent::default()).unwrap();
        assert_eq!(g.label_at([1, 1, 1]), 2);
        let c = cloud_of(vec![[0.1, 0.1, 0.1]; 2], vec![2, 1], 3);
        let g = voxel_mode_labels(&c, 2, VoxelExtent::default()).unwrap();
        assert_eq!(g.label_at([1, 1, 1]), 1);
        assert_eq!(g.labels.iter().filter(|&&l| l != 0).count(), 1);
    }

    #[test]
    fn voxel_mode_ignores_invalid_and_empty() {
        let c = cloud_of(vec![[0.1, 0.1, 0.1]; 3], vec![4, 4, 1], 3);
        let g = voxel_mode_labels(&c, 2, VoxelExtent::default()).unwrap();
        assert_eq!(g.label_at([1, 1, 1]), 1);
        let empty = cloud_of(vec![], vec![], 3);
        assert!(voxel_mode_labels(&empty, 4, VoxelExtent::default()).unwrap().is_empty());
        assert_eq!(voxel_mode_labels(&empty, 0, VoxelExtent::default()), Err(SegmentationError::ZeroResolution));
    }

    #[test]
    fn transfer_direct_and_neighbor() {
        let mut grid = LabeledVoxelGrid { resolution: 3, extent: VoxelExtent::cube(0.0, 3.0), labels: vec![0; 27], n_classes: 4 };
        let center = grid.index([1, 1, 1]);
        grid.labels[center] = 4;
        let cloud = PointCloud::new(vec![[1.5, 1.5, 1.5]]).unwrap();
        assert_eq!(transfer_labels(&grid, &cloud), vec![4]);

        let mut grid = LabeledVoxelGrid { resolution: 3, extent: VoxelExtent::cube(0.0, 3.0), labels: vec![0; 27], n_classes: 4 };
        let face = grid.index([1, 2, 1]);
        grid.labels[face] = 2;
        assert_eq!(transfer_labels(&grid, &cloud), vec![2]);
    }

    #[test]
    fn transfer_on_empty_grid_is_invalid() {
        let grid = LabeledVoxelGrid { resolution: 4, extent: VoxelExtent::default(), labels: vec![0; 64], n_classes: 3 };
        let cloud = PointCloud::new(vec![[0.0; 3], [0.5, 0.5, 0.5]]).unwrap();
        assert_eq!(transfer_labels(&grid, &cloud), vec![4, 4]);
    }

    #[test]
    fn transfer_equidistant_takes_smaller_label() {
        let mut grid = LabeledVoxelGrid { resolution: 3, extent: VoxelExtent::cube(0.0, 3.0), labels: vec![0; 27], n_classes: 5 };
        let a = grid.index([0, 1, 1]);
        let b = grid.index([2, 1, 1]);
        grid.labels[a] = 5;
        grid.labels[b] = 3;
        let cloud = PointCloud::new(vec![[1.5, 1.5, 1.5], [-4.0, 1.5, 1.5]]).unwrap();
        assert_eq!(transfer_labels(&grid, &cloud), vec![3, 5]);
    }

    #[test]
    fn fuse_single_view_matches_pipeline() {
        let view = cloud_of(vec![[0.5, 0.5, 0.5], [-0.5, -0.5, -0.5]], vec![1, 2], 2);
        let target = PointCloud::new(vec![[0.4, 0.6, 0.5], [-0.1, -0.9, -0.5], [0.0, 0.0, 0.9]]).unwrap();
        let fused = fuse_views(std::slice::from_ref(&view), 8, VoxelExtent::default(), &target).unwrap();
        let grid = voxel_mode_labels(&view, 8, VoxelExtent::default()).unwrap();
        assert_eq!(fused, transfer_labels(&grid, &target));
        let twice = fuse_views(&[view.clone(), view], 8, VoxelExtent::default(), &target).unwrap();
        assert_eq!(twice, fused);
        assert_eq!(fuse_views(&[], 8, VoxelExtent::default(), &target), Err(SegmentationError::NoViews));
    }

    #[test]
    fn iou_examples() {
        let r = point_iou(&[1, 1, 2, 2], &[1, 2, 2, 2], 2).unwrap();
        assert!((r.per_class[0] - 0.5).abs() < 1e-12);
        assert!((r.per_class[1] - 2.0 / 3.0).abs() < 1e-12);
        assert!((r.mean - 7.0 / 12.0).abs() < 1e-12);

        let r = point_iou(&[1, 1, 1], &[2, 2, 2], 2).unwrap();
        assert_eq!(r.mean, 0.0);

        let r = point_iou(&[3, 1, 3], &[3, 1, 3], 4).unwrap();
        assert_eq!(r.mean, 1.0);
        assert_eq!(r.per_class, vec![1.0; 4]);

        assert_eq!(
            point_iou(&[1], &[1, 2], 2),
            Err(SegmentationError::LengthMismatch { pred: 1, gt: 2 })
        );
    }
}
