//! Structured `H × W × c` descriptors of a point cloud seen from one grid frame:
//! layered height maps (MLH), occupancy slices and occupancy volumes, plus the
//! per-entry label maps used for segmentation.
//!
//! All tensors are row-major with layout `[i][j][k]`: `i` indexes the bin along
//! the frame's `u` axis, `j` along `v`, `k` the layer.

use crate::geometry::{grid_coord, GridFrame, GridSpec, LabeledPointCloud, PointCloud, Vec3};

/// Height stored in every layer of an empty bin. Normalized shapes never reach it.
pub const DEFAULT_FILL: f64 = -2.0;

/// How a bin's sorted heights are reduced to `c` layers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PercentileMode {
    /// Linear interpolation at fractional rank `(M - 1) p / 100`.
    #[default]
    Interpolated,
    /// The order statistic at `round((M - 1) p / 100)`.
    NearestRank,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlhDescriptor {
    pub height: usize,
    pub width: usize,
    pub layers: usize,
    pub values: Vec<f64>,
    pub mask: Vec<u8>,
    /// Points dropped because they fell outside the grid extents or depth.
    pub out_of_bounds: usize,
}

impl MlhDescriptor {
    pub fn value(&self, i: usize, j: usize, k: usize) -> f64 {
        self.values[(i * self.width + j) * self.layers + k]
    }

    pub fn bin(&self, i: usize, j: usize) -> &[f64] {
        let start = (i * self.width + j) * self.layers;
        &self.values[start..start + self.layers]
    }

    pub fn is_occupied(&self, i: usize, j: usize) -> bool {
        self.mask[i * self.width + j] != 0
    }

    pub fn shape(&self) -> [usize; 3] {
        [self.height, self.width, self.layers]
    }

    /// Replaces the height of every empty bin with `fill`.
    pub fn with_fill(mut self, fill: f64) -> Self {
        let c = self.layers;
        for (bin, &m) in self.mask.iter().enumerate() {
            if m == 0 {
                self.values[bin * c..(bin + 1) * c].fill(fill);
            }
        }
        self
    }

    pub fn to_f32(&self) -> Vec<f32> {
        self.values.iter().map(|&v| v as f32).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SliceDescriptor {
    pub height: usize,
    pub width: usize,
    pub layers: usize,
    pub values: Vec<u8>,
    /// Slice centers along the frame normal, in model units.
    pub slice_centers: Vec<f64>,
    pub thickness: f64,
    pub out_of_bounds: usize,
}

impl SliceDescriptor {
    pub fn value(&self, i: usize, j: usize, k: usize) -> u8 {
        self.values[(i * self.width + j) * self.layers + k]
    }

    pub fn shape(&self) -> [usize; 3] {
        [self.height, self.width, self.layers]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VolumeDescriptor {
    pub height: usize,
    pub width: usize,
    pub layers: usize,
    pub values: Vec<u8>,
    pub out_of_bounds: usize,
}

impl VolumeDescriptor {
    pub fn value(&self, i: usize, j: usize, k: usize) -> u8 {
        self.values[(i * self.width + j) * self.layers + k]
    }

    pub fn shape(&self) -> [usize; 3] {
        [self.height, self.width, self.layers]
    }
}

/// Per-entry segmentation labels aligned with an [`MlhDescriptor`]. Entries of
/// empty bins hold `n_classes + 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelMap {
    pub height: usize,
    pub width: usize,
    pub layers: usize,
    pub labels: Vec<u32>,
    pub n_classes: u32,
}

impl LabelMap {
    pub fn invalid_label(&self) -> u32 {
        self.n_classes + 1
    }

    pub fn label(&self, i: usize, j: usize, k: usize) -> u32 {
        self.labels[(i * self.width + j) * self.layers + k]
    }

    pub fn shape(&self) -> [usize; 3] {
        [self.height, self.width, self.layers]
    }
}

/// In-bounds points grouped by bin, with heights sorted ascending.
struct BinnedHeights {
    /// `offsets[b]..offsets[b + 1]` indexes `entries` for bin `b`.
    offsets: Vec<usize>,
    /// (height, source point index)
    entries: Vec<(f64, usize)>,
    out_of_bounds: usize,
}

fn bin_heights(points: &[Vec3], frame: &GridFrame, spec: &GridSpec) -> BinnedHeights {
    let bins = spec.height * spec.width;
    let mut placed = Vec::with_capacity(points.len());
    let mut out_of_bounds = 0;
    let mut counts = vec![0usize; bins + 1];
    for (idx, &p) in points.iter().enumerate() {
        let g = grid_coord(p, frame, spec);
        if g.in_bounds {
            let bin = g.i * spec.width + g.j;
            counts[bin + 1] += 1;
            placed.push((bin, g.height, idx));
        } else {
            out_of_bounds += 1;
        }
    }
    for b in 0..bins {
        counts[b + 1] += counts[b];
    }
    let mut cursor = counts.clone();
    let mut entries = vec![(0.0, 0); placed.len()];
    for (bin, h, idx) in placed {
        entries[cursor[bin]] = (h, idx);
        cursor[bin] += 1;
    }
    for b in 0..bins {
        // points enter in index order, so the stable sort breaks height ties by index
        entries[counts[b]..counts[b + 1]].sort_by(|a, b| a.0.total_cmp(&b.0));
    }
    BinnedHeights { offsets: counts, entries, out_of_bounds }
}

/// Fractional rank of layer `k` (0-based) among `m` sorted values, i.e. the
/// `k / (c - 1) * 100`-th percentile. A single layer takes the minimum.
fn layer_rank(m: usize, k: usize, layers: usize) -> f64 {
    if layers == 1 {
        return 0.0;
    }
    ((m - 1) * k) as f64 / (layers - 1) as f64
}

/// Index `round((m - 1) k / (c - 1))` with halves rounded up.
fn nearest_rank(m: usize, k: usize, layers: usize) -> usize {
    if layers == 1 {
        return 0;
    }
    let den = layers - 1;
    (2 * (m - 1) * k + den) / (2 * den)
}

fn interpolated(sorted: &[(f64, usize)], rank: f64) -> f64 {
    let lo = rank.floor() as usize;
    let frac = rank - lo as f64;
    let a = sorted[lo].0;
    if frac == 0.0 || lo + 1 >= sorted.len() {
        return a;
    }
    let b = sorted[lo + 1].0;
    (a + frac * (b - a)).clamp(a, b)
}

fn empty_mlh(spec: &GridSpec, out_of_bounds: usize) -> MlhDescriptor {
    MlhDescriptor {
        height: spec.height,
        width: spec.width,
        layers: spec.layers,
        values: vec![DEFAULT_FILL; spec.cells()],
        mask: vec![0; spec.height * spec.width],
        out_of_bounds,
    }
}

/// Multi-layered height map: layer `k` of a bin holds the `(k-1)/(c-1) · 100`-th
/// percentile of the heights of the points in that bin.
pub fn compute_mlh(
    cloud: &PointCloud,
    frame: &GridFrame,
    spec: &GridSpec,
    mode: PercentileMode,
) -> MlhDescriptor {
    let binned = bin_heights(&cloud.points, frame, spec);
    let mut out = empty_mlh(spec, binned.out_of_bounds);
    let c = spec.layers;
    for bin in 0..spec.height * spec.width {
        let sorted = &binned.entries[binned.offsets[bin]..binned.offsets[bin + 1]];
        if sorted.is_empty() {
            continue;
        }
        out.mask[bin] = 1;
        let m = sorted.len();
        let layers = &mut out.values[bin * c..(bin + 1) * c];
        for (k, slot) in layers.iter_mut().enumerate() {
            *slot = match mode {
                PercentileMode::Interpolated => interpolated(sorted, layer_rank(m, k, c)),
                PercentileMode::NearestRank => sorted[nearest_rank(m, k, c)].0,
            };
        }
    }
    out
}

/// MLH with nearest-rank percentiles, so that every entry is the height of a
/// single source point, together with that point's label.
pub fn compute_mlh_labeled(
    cloud: &LabeledPointCloud,
    frame: &GridFrame,
    spec: &GridSpec,
) -> (MlhDescriptor, LabelMap) {
    let binned = bin_heights(cloud.points(), frame, spec);
    let mut mlh = empty_mlh(spec, binned.out_of_bounds);
    let mut map = LabelMap {
        height: spec.height,
        width: spec.width,
        layers: spec.layers,
        labels: vec![cloud.invalid_label(); spec.cells()],
        n_classes: cloud.n_classes(),
    };
    let c = spec.layers;
    let source_labels = cloud.labels();
    for bin in 0..spec.height * spec.width {
        let sorted = &binned.entries[binned.offsets[bin]..binned.offsets[bin + 1]];
        if sorted.is_empty() {
            continue;
        }
        mlh.mask[bin] = 1;
        for k in 0..c {
            let (h, src) = sorted[nearest_rank(sorted.len(), k, c)];
            mlh.values[bin * c + k] = h;
            map.labels[bin * c + k] = source_labels[src];
        }
    }
    (mlh, map)
}

/// Slice centers along the frame normal: `d_min + (k - ½) D / c` for `k = 1..=c`.
pub fn slice_centers(spec: &GridSpec) -> Vec<f64> {
    let d = spec.depth.len();
    let c = spec.layers as f64;
    (0..spec.layers).map(|k| spec.depth.lo + (k as f64 + 0.5) * d / c).collect()
}

/// Binary occupancy of `c` equidistant slabs of thickness `t` centered at
/// [`slice_centers`]. A slab covers `[center - t/2, center + t/2)`; the slab
/// reaching the far end of the depth range also includes `d_max`.
pub fn compute_slices(cloud: &PointCloud, frame: &GridFrame, spec: &GridSpec) -> SliceDescriptor {
    let c = spec.layers;
    let depth = spec.depth;
    let thickness = spec.slice_thickness();
    // work in slice units, where slab k is centered at k + 0.5
    let half = thickness * c as f64 / (2.0 * depth.len());
    let mut values = vec![0u8; spec.cells()];
    let mut out_of_bounds = 0;
    for &p in &cloud.points {
        let g = grid_coord(p, frame, spec);
        if !g.in_bounds {
            out_of_bounds += 1;
            continue;
        }
        let s = (g.height - depth.lo) / depth.len() * c as f64;
        let at_far_end = g.height == depth.hi;
        let base = (g.i * spec.width + g.j) * c;
        for k in 0..c {
            let center = k as f64 + 0.5;
            let lo = center - half;
            let hi = center + half;
            if s >= lo && (s < hi || (at_far_end && hi >= c as f64)) {
                values[base + k] = 1;
            }
        }
    }
    SliceDescriptor {
        height: spec.height,
        width: spec.width,
        layers: c,
        values,
        slice_centers: slice_centers(spec),
        thickness,
        out_of_bounds,
    }
}

/// Binary occupancy of the `H × W × c` voxelization of the grid's box.
pub fn compute_volume(cloud: &PointCloud, frame: &GridFrame, spec: &GridSpec) -> VolumeDescriptor {
    let c = spec.layers;
    let mut values = vec![0u8; spec.cells()];
    let mut out_of_bounds = 0;
    for &p in &cloud.points {
        let g = grid_coord(p, frame, spec);
        match spec.depth.bin(g.height, c) {
            Some(k) if g.in_bounds => values[(g.i * spec.width + g.j) * c + k] = 1,
            _ => out_of_bounds += 1,
        }
    }
    VolumeDescriptor { height: spec.height, width: spec.width, layers: c, values, out_of_bounds }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Range, UNIT_RANGE};

    /// 1×1 grid on the identity frame so every point shares one bin and the
    /// height is the z coordinate.
    fn single_bin(layers: usize) -> (GridFrame, GridSpec) {
        (GridFrame::identity(), GridSpec::unit(1, 1, layers).unwrap())
    }

    fn column(heights: &[f64]) -> PointCloud {
        PointCloud::new(heights.iter().map(|&h| [0.1, -0.1, h / 4.0]).collect()).unwrap()
    }

    fn scaled(values: &[f64]) -> Vec<f64> {
        values.iter().map(|v| v * 4.0).collect()
    }

    #[test]
    fn percentiles_on_order_statistics() {
        let (frame, spec) = single_bin(5);
        let mlh = compute_mlh(&column(&[3.0, 0.0, 4.0, 1.0, 2.0]), &frame, &spec, PercentileMode::Interpolated);
        assert_eq!(scaled(mlh.bin(0, 0)), vec![0.0, 1.0, 2.0, 3.0, 4.0]);
        let nr = compute_mlh(&column(&[3.0, 0.0, 4.0, 1.0, 2.0]), &frame, &spec, PercentileMode::NearestRank);
        assert_eq!(nr.bin(0, 0), mlh.bin(0, 0));
    }

    #[test]
    fn interpolated_midpoint() {
        let (frame, spec) = single_bin(3);
        let mlh = compute_mlh(&column(&[0.0, 4.0]), &frame, &spec, PercentileMode::Interpolated);
        assert_eq!(scaled(mlh.bin(0, 0)), vec![0.0, 2.0, 4.0]);
        let nr = compute_mlh(&column(&[0.0, 4.0]), &frame, &spec, PercentileMode::NearestRank);
        // rank 0.5 rounds up
        assert_eq!(scaled(nr.bin(0, 0)), vec![0.0, 4.0, 4.0]);
    }

    #[test]
    fn single_point_fills_all_layers() {
        let (frame, spec) = single_bin(5);
        let cloud = PointCloud::new(vec![[0.0, 0.0, 0.7]]).unwrap();
        let mlh = compute_mlh(&cloud, &frame, &spec, PercentileMode::Interpolated);
        assert_eq!(mlh.bin(0, 0), &[0.7; 5]);
        assert!(mlh.is_occupied(0, 0));
    }

    #[test]
    fn one_layer_takes_minimum() {
        let (frame, spec) = single_bin(1);
        let mlh = compute_mlh(&column(&[2.0, -1.0, 3.0]), &frame, &spec, PercentileMode::Interpolated);
        assert_eq!(scaled(mlh.bin(0, 0)), vec![-1.0]);
    }

    #[test]
    fn empty_bins_use_fill() {
        let spec = GridSpec::unit(2, 2, 5).unwrap();
        let cloud = PointCloud::new(vec![[-0.5, -0.5, 0.2]]).unwrap();
        let mlh = compute_mlh(&cloud, &GridFrame::identity(), &spec, PercentileMode::Interpolated);
        assert_eq!(mlh.bin(1, 1), &[-2.0; 5]);
        assert!(!mlh.is_occupied(1, 1));
        assert!(mlh.is_occupied(0, 0));
        let refilled = mlh.with_fill(0.0);
        assert_eq!(refilled.bin(1, 1), &[0.0; 5]);
        assert_eq!(refilled.bin(0, 0), &[0.2; 5]);
    }

    #[test]
    fn out_of_bounds_points_are_counted() {
        let spec = GridSpec::unit(2, 2, 2).unwrap();
        let cloud = PointCloud::new(vec![[0.5, 0.5, 0.5], [3.0, 0.0, 0.0], [0.0, 0.0, -1.5]]).unwrap();
        let frame = GridFrame::identity();
        assert_eq!(compute_mlh(&cloud, &frame, &spec, PercentileMode::Interpolated).out_of_bounds, 2);
        assert_eq!(compute_slices(&cloud, &frame, &spec).out_of_bounds, 2);
        assert_eq!(compute_volume(&cloud, &frame, &spec).out_of_bounds, 2);
    }

    #[test]
    fn slice_membership() {
        let spec = GridSpec::unit(2, 2, 5).unwrap().with_thickness(0.4).unwrap();
        let cloud = PointCloud::new(vec![[0.5, 0.5, 0.1]]).unwrap();
        let s = compute_slices(&cloud, &GridFrame::identity(), &spec);
        // centers -0.8, -0.4, 0.0, 0.4, 0.8; 0.1 lies in [-0.2, 0.2)
        let set: Vec<u8> = (0..5).map(|k| s.value(1, 1, k)).collect();
        assert_eq!(set, vec![0, 0, 1, 0, 0]);
        assert_eq!(s.values.iter().map(|&v| v as usize).sum::<usize>(), 1);
        for (c, want) in s.slice_centers.iter().zip([-0.8, -0.4, 0.0, 0.4, 0.8]) {
            assert!((c - want).abs() < 1e-12);
        }
    }

    #[test]
    fn thin_slices_miss_points_between_them() {
        let spec = GridSpec::unit(1, 1, 2).unwrap().with_thickness(0.2).unwrap();
        // centers at -0.5 and 0.5
        let cloud = PointCloud::new(vec![[0.0, 0.0, 0.0], [0.0, 0.0, 0.55]]).unwrap();
        let s = compute_slices(&cloud, &GridFrame::identity(), &spec);
        assert_eq!(s.values, vec![0, 1]);
    }

    #[test]
    fn single_slice_sits_at_mid_section() {
        let spec = GridSpec::new(1, 1, 1, UNIT_RANGE, UNIT_RANGE, Range::new(0.0, 4.0), Some(1.0)).unwrap();
        let s = compute_slices(&PointCloud::new(vec![[0.0, 0.0, 2.2]]).unwrap(), &GridFrame::identity(), &spec);
        assert_eq!(s.slice_centers, vec![2.0]);
        assert_eq!(s.values, vec![1]);
    }

    #[test]
    fn empty_cloud_gives_zero_occupancy() {
        let spec = GridSpec::unit(3, 3, 4).unwrap();
        let cloud = PointCloud::new(vec![]).unwrap();
        let frame = GridFrame::identity();
        assert!(compute_slices(&cloud, &frame, &spec).values.iter().all(|&v| v == 0));
        assert!(compute_volume(&cloud, &frame, &spec).values.iter().all(|&v| v == 0));
        let mlh = compute_mlh(&cloud, &frame, &spec, PercentileMode::Interpolated);
        assert!(mlh.mask.iter().all(|&m| m == 0));
    }

    #[test]
    fn volume_single_cell() {
        let spec = GridSpec::unit(2, 2, 2).unwrap();
        let cloud = PointCloud::new(vec![[-0.5, -0.5, 0.5]]).unwrap();
        let v = compute_volume(&cloud, &GridFrame::identity(), &spec);
        let mut want = vec![0u8; 8];
        want[1] = 1; // (0, 0, 1)
        assert_eq!(v.values, want);
        assert_eq!(v.value(0, 0, 1), 1);
    }

    #[test]
    fn volume_ignores_duplicates() {
        let spec = GridSpec::unit(8, 8, 4).unwrap();
        let pts: Vec<Vec3> = (0..50).map(|i| {
            let t = i as f64 / 50.0;
            [t * 1.6 - 0.8, (t * 7.0).sin() * 0.9, (t * 3.0).cos() * 0.9]
        }).collect();
        let single = PointCloud::new(pts.clone()).unwrap();
        let doubled = PointCloud::new([pts.clone(), pts].concat()).unwrap();
        let frame = GridFrame::identity();
        assert_eq!(compute_volume(&single, &frame, &spec).values, compute_volume(&doubled, &frame, &spec).values);
    }

    #[test]
    fn far_end_point_is_kept_in_last_layer() {
        let spec = GridSpec::unit(1, 1, 4).unwrap();
        let cloud = PointCloud::new(vec![[0.0, 0.0, 1.0]]).unwrap();
        let frame = GridFrame::identity();
        assert_eq!(compute_volume(&cloud, &frame, &spec).values, vec![0, 0, 0, 1]);
        assert_eq!(compute_slices(&cloud, &frame, &spec).values, vec![0, 0, 0, 1]);
    }

    fn labeled_column(heights: &[f64], labels: &[u32], n: u32) -> LabeledPointCloud {
        LabeledPointCloud::new(
            heights.iter().map(|&h| [0.0, 0.0, h / 4.0]).collect(),
            labels.to_vec(),
            n,
        )
        .unwrap()
    }

    #[test]
    fn labeled_endpoints() {
        let (frame, spec) = single_bin(2);
        let (mlh, labels) = compute_mlh_labeled(&labeled_column(&[4.0, 0.0], &[2, 1], 2), &frame, &spec);
        assert_eq!(scaled(mlh.bin(0, 0)), vec![0.0, 4.0]);
        assert_eq!(labels.labels, vec![1, 2]);
    }

    #[test]
    fn labeled_nearest_rank() {
        let (frame, spec) = single_bin(3);
        let (_, labels) = compute_mlh_labeled(&labeled_column(&[2.0, 0.0, 1.0], &[3, 1, 2], 3), &frame, &spec);
        assert_eq!(labels.labels, vec![1, 2, 3]);
    }

    #[test]
    fn labeled_empty_bins_are_invalid() {
        let spec = GridSpec::unit(2, 2, 2).unwrap();
        let cloud = LabeledPointCloud::new(vec![[0.5, 0.5, 0.0]], vec![3], 4).unwrap();
        let (mlh, map) = compute_mlh_labeled(&cloud, &GridFrame::identity(), &spec);
        assert_eq!(map.invalid_label(), 5);
        for i in 0..2 {
            for j in 0..2 {
                for k in 0..2 {
                    let want = if mlh.is_occupied(i, j) { 3 } else { 5 };
                    assert_eq!(map.label(i, j, k), want);
                }
            }
        }
    }

    #[test]
    fn rank_helpers() {
        assert_eq!(nearest_rank(3, 1, 3), 1);
        assert_eq!(nearest_rank(2, 1, 3), 1);
        assert_eq!(nearest_rank(4, 1, 3), 2); // 1.5 rounds up
        assert_eq!(nearest_rank(7, 3, 4), 6);
        assert_eq!(layer_rank(5, 4, 5), 4.0);
        assert_eq!(layer_rank(9, 2, 1), 0.0);
    }
}
