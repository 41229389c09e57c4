//! Fixtures and independent oracles shared by the integration suites.
#![allow(dead_code)]

use std::collections::BTreeMap;

use rand::Rng;
use structured2d::geometry::{GridFrame, GridSpec, PointCloud, TriangleMesh, Vec3};
use structured2d::segmentation::{backproject, fuse_views, point_iou, VoxelExtent};
use structured2d::{axis_orientations, center_normalize, compute_mlh_labeled, sample_mesh, LabeledPointCloud};

/// Uniform points in the ball of radius `radius`.
pub fn random_ball_cloud<R: Rng>(rng: &mut R, n: usize, radius: f64) -> Vec<Vec3> {
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let p = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
        if p[0] * p[0] + p[1] * p[1] + p[2] * p[2] <= 1.0 {
            out.push([p[0] * radius, p[1] * radius, p[2] * radius]);
        }
    }
    out
}

/// Random cloud clustered around a few centers, so bins hold varying counts.
pub fn random_clustered_cloud<R: Rng>(rng: &mut R, n: usize) -> Vec<Vec3> {
    let centers: Vec<Vec3> = (0..rng.gen_range(1..6))
        .map(|_| [rng.gen_range(-0.7..0.7), rng.gen_range(-0.7..0.7), rng.gen_range(-0.7..0.7)])
        .collect();
    (0..n)
        .map(|_| {
            let c = centers[rng.gen_range(0..centers.len())];
            let s: f64 = rng.gen_range(0.02..0.3);
            [
                (c[0] + rng.gen_range(-s..s)).clamp(-1.0, 1.0),
                (c[1] + rng.gen_range(-s..s)).clamp(-1.0, 1.0),
                (c[2] + rng.gen_range(-s..s)).clamp(-1.0, 1.0),
            ]
        })
        .collect()
}

fn dot(a: Vec3, b: Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// Bin index by direct search over bin edges `lo + k * width`.
fn oracle_bin(x: f64, lo: f64, hi: f64, bins: usize) -> Option<usize> {
    if x < lo || x > hi {
        return None;
    }
    let width = (hi - lo) / bins as f64;
    (0..bins).find(|&k| x < lo + (k + 1) as f64 * width).or(Some(bins - 1))
}

/// Per-bin percentile heights computed the slow way: group, sort, then
/// interpolate at `pos = (M - 1) · p / 100` with `p = (k - 1)/(c - 1) · 100`.
pub fn brute_force_mlh(points: &[Vec3], frame: &GridFrame, spec: &GridSpec) -> BTreeMap<(usize, usize), Vec<f64>> {
    let mut bins: BTreeMap<(usize, usize), Vec<f64>> = BTreeMap::new();
    for &p in points {
        let d = [p[0] - frame.origin[0], p[1] - frame.origin[1], p[2] - frame.origin[2]];
        let (a, b, h) = (dot(d, frame.u), dot(d, frame.v), dot(d, frame.w));
        if h < spec.depth.lo || h > spec.depth.hi {
            continue;
        }
        let (Some(i), Some(j)) = (
            oracle_bin(a, spec.extent_u.lo, spec.extent_u.hi, spec.height),
            oracle_bin(b, spec.extent_v.lo, spec.extent_v.hi, spec.width),
        ) else {
            continue;
        };
        bins.entry((i, j)).or_default().push(h);
    }
    let c = spec.layers;
    bins.into_iter()
        .map(|(key, mut hs)| {
            hs.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let m = hs.len();
            let layers = (1..=c)
                .map(|k| {
                    let p = if c == 1 { 0.0 } else { (k - 1) as f64 / (c - 1) as f64 * 100.0 };
                    let pos = (m - 1) as f64 * p / 100.0;
                    let lo = pos.floor() as usize;
                    let hi = pos.ceil().min((m - 1) as f64) as usize;
                    hs[lo] + (pos - lo as f64) * (hs[hi] - hs[lo])
                })
                .collect();
            (key, layers)
        })
        .collect()
}

fn box_mesh(lo: Vec3, hi: Vec3) -> TriangleMesh {
    let v = |x: usize, y: usize, z: usize| {
        [if x == 0 { lo[0] } else { hi[0] }, if y == 0 { lo[1] } else { hi[1] }, if z == 0 { lo[2] } else { hi[2] }]
    };
    let vertices: Vec<Vec3> = (0..8).map(|i| v(i & 1, (i >> 1) & 1, (i >> 2) & 1)).collect();
    let quads = [[0, 1, 3, 2], [4, 6, 7, 5], [0, 4, 5, 1], [2, 3, 7, 6], [0, 2, 6, 4], [1, 5, 7, 3]];
    let faces = quads.iter().flat_map(|q| [[q[0], q[1], q[2]], [q[0], q[2], q[3]]]).collect();
    TriangleMesh::new(vertices, faces).unwrap()
}

/// Surface samples of labeled boxes, `(lo, hi, points)` per part; part `k` gets label `k + 1`.
fn boxes_fixture(parts: &[(Vec3, Vec3, usize)], seed: u64) -> (Vec<Vec3>, Vec<u32>) {
    let mut points = Vec::new();
    let mut labels = Vec::new();
    for (k, &(lo, hi, n)) in parts.iter().enumerate() {
        let cloud = sample_mesh(&box_mesh(lo, hi), n, seed + k as u64).unwrap();
        labels.extend(std::iter::repeat_n(k as u32 + 1, cloud.len()));
        points.extend(cloud.points);
    }
    (points, labels)
}

/// Two separated boxes, 1500 surface points each.
pub fn two_box_fixture() -> (Vec<Vec3>, Vec<u32>, u32) {
    let (p, l) = boxes_fixture(
        &[
            ([-0.9, -0.35, -0.35], [-0.15, 0.35, 0.35], 1500),
            ([0.15, -0.3, -0.4], [0.85, 0.3, 0.4], 1500),
        ],
        11,
    );
    (p, l, 2)
}

/// Lamp-like shape: base plate, pole, arm and shade, 3000 points in total.
pub fn lamp_fixture() -> (Vec<Vec3>, Vec<u32>, u32) {
    let (p, l) = boxes_fixture(
        &[
            ([-0.5, -0.5, -0.95], [0.5, 0.5, -0.82], 900),
            ([-0.06, -0.06, -0.74], [0.06, 0.06, 0.40], 500),
            ([-0.06, -0.08, 0.48], [0.55, 0.08, 0.58], 500),
            ([0.30, -0.30, 0.66], [0.90, 0.30, 0.95], 1100),
        ],
        23,
    );
    (p, l, 4)
}

/// Labels the cloud through the full pipeline: 3 axis views of `res × res × c`
/// labeled MLH, back-projection, fusion on a `fusion³` grid and transfer.
pub fn segmentation_roundtrip(points: &[Vec3], labels: &[u32], n: u32, res: usize, c: usize, fusion: usize) -> f64 {
    let cloud = PointCloud::with_labels(points.to_vec(), labels.to_vec(), n).unwrap();
    let normalized = center_normalize(&cloud).unwrap();
    let labeled = LabeledPointCloud::from_cloud(normalized.clone(), n).unwrap();
    let spec = GridSpec::unit(res, res, c).unwrap();
    let views: Vec<_> = axis_orientations()
        .iter()
        .map(|frame| {
            let (mlh, map) = compute_mlh_labeled(&labeled, frame, &spec);
            backproject(&mlh, &map, frame, &spec).unwrap()
        })
        .collect();
    let target = PointCloud::new(normalized.points).unwrap();
    let pred = fuse_views(&views, fusion, VoxelExtent::default(), &target).unwrap();
    point_iou(&pred, labels, n).unwrap().mean
}
