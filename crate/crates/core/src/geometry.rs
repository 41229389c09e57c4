//! Mesh and point-cloud primitives, orientation frames, and the mapping from
//! world coordinates onto a sampling grid.

use std::f64::consts::PI;

use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

pub type Vec3 = [f64; 3];

/// Tolerance used when validating frame orthonormality.
pub const FRAME_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error, PartialEq)]
pub enum GeometryError {
    #[error("face {face} references vertex {index} but the mesh has {count} vertices")]
    FaceIndexOutOfRange { face: usize, index: usize, count: usize },
    #[error("face {0} repeats a vertex index")]
    RepeatedFaceIndex(usize),
    #[error("mesh has no faces")]
    EmptyMesh,
    #[error("mesh has zero total surface area")]
    ZeroArea,
    #[error("point cloud is empty")]
    EmptyCloud,
    #[error("point {0} has a non-finite coordinate")]
    NonFinite(usize),
    #[error("all points coincide; cannot normalize scale")]
    ZeroScale,
    #[error("label count {labels} does not match point count {points}")]
    LabelCountMismatch { points: usize, labels: usize },
    #[error("label {label} at point {index} outside [1, {n_classes}]")]
    LabelOutOfRange { index: usize, label: u32, n_classes: u32 },
    #[error("frame axes are not orthonormal")]
    NotOrthonormal,
    #[error("invalid grid spec: {0}")]
    InvalidSpec(String),
}

pub(crate) fn dot(a: Vec3, b: Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub(crate) fn sub(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub(crate) fn cross(a: Vec3, b: Vec3) -> Vec3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn norm(a: Vec3) -> f64 {
    dot(a, a).sqrt()
}

#[derive(Debug, Clone, PartialEq)]
pub struct TriangleMesh {
    vertices: Vec<Vec3>,
    faces: Vec<[usize; 3]>,
}

impl TriangleMesh {
    pub fn new(vertices: Vec<Vec3>, faces: Vec<[usize; 3]>) -> Result<Self, GeometryError> {
        let count = vertices.len();
        for (fi, face) in faces.iter().enumerate() {
            if let Some(&index) = face.iter().find(|&&i| i >= count) {
                return Err(GeometryError::FaceIndexOutOfRange { face: fi, index, count });
            }
            if face[0] == face[1] || face[1] == face[2] || face[0] == face[2] {
                return Err(GeometryError::RepeatedFaceIndex(fi));
            }
        }
        Ok(Self { vertices, faces })
    }

    pub fn vertices(&self) -> &[Vec3] {
        &self.vertices
    }

    pub fn faces(&self) -> &[[usize; 3]] {
        &self.faces
    }

    fn corners(&self, face: usize) -> [Vec3; 3] {
        let [a, b, c] = self.faces[face];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    pub fn triangle_area(&self, face: usize) -> f64 {
        let [a, b, c] = self.corners(face);
        0.5 * norm(cross(sub(b, a), sub(c, a)))
    }

    pub fn surface_area(&self) -> f64 {
        (0..self.faces.len()).map(|f| self.triangle_area(f)).sum()
    }
}

/// An unordered set of 3D points with optional per-point segmentation labels.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    pub points: Vec<Vec3>,
    pub labels: Option<Vec<u32>>,
}

impl PointCloud {
    pub fn new(points: Vec<Vec3>) -> Result<Self, GeometryError> {
        check_finite(&points)?;
        Ok(Self { points, labels: None })
    }

    /// Attaches labels in `[1, n_classes]`.
    pub fn with_labels(
        points: Vec<Vec3>,
        labels: Vec<u32>,
        n_classes: u32,
    ) -> Result<Self, GeometryError> {
        check_finite(&points)?;
        check_labels(points.len(), &labels, n_classes)?;
        Ok(Self { points, labels: Some(labels) })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn centroid(&self) -> Option<Vec3> {
        if self.points.is_empty() {
            return None;
        }
        let n = self.points.len() as f64;
        let mut sum = [0.0; 3];
        for p in &self.points {
            for a in 0..3 {
                sum[a] += p[a];
            }
        }
        Some([sum[0] / n, sum[1] / n, sum[2] / n])
    }
}

/// A point cloud whose every point carries a label in `[1, n_classes]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledPointCloud {
    points: Vec<Vec3>,
    labels: Vec<u32>,
    n_classes: u32,
}

impl LabeledPointCloud {
    pub fn new(points: Vec<Vec3>, labels: Vec<u32>, n_classes: u32) -> Result<Self, GeometryError> {
        check_finite(&points)?;
        check_labels(points.len(), &labels, n_classes)?;
        Ok(Self { points, labels, n_classes })
    }

    pub fn from_cloud(cloud: PointCloud, n_classes: u32) -> Result<Self, GeometryError> {
        let labels = cloud.labels.ok_or(GeometryError::LabelCountMismatch {
            points: cloud.points.len(),
            labels: 0,
        })?;
        Self::new(cloud.points, labels, n_classes)
    }

    pub fn points(&self) -> &[Vec3] {
        &self.points
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn n_classes(&self) -> u32 {
        self.n_classes
    }

    pub fn invalid_label(&self) -> u32 {
        self.n_classes + 1
    }
}

fn check_finite(points: &[Vec3]) -> Result<(), GeometryError> {
    match points.iter().position(|p| p.iter().any(|x| !x.is_finite())) {
        Some(i) => Err(GeometryError::NonFinite(i)),
        None => Ok(()),
    }
}

fn check_labels(points: usize, labels: &[u32], n_classes: u32) -> Result<(), GeometryError> {
    if labels.len() != points {
        return Err(GeometryError::LabelCountMismatch { points, labels: labels.len() });
    }
    if let Some(index) = labels.iter().position(|&l| l == 0 || l > n_classes) {
        return Err(GeometryError::LabelOutOfRange { index, label: labels[index], n_classes });
    }
    Ok(())
}

/// Draws `n_points` samples uniformly over the mesh surface.
///
/// Triangles are picked with probability proportional to their area, then a
/// point is placed with the square-root barycentric parameterization. The
/// generator is ChaCha8 seeded from `seed`, so output depends only on
/// `(mesh, n_points, seed)`.
pub fn sample_mesh(
    mesh: &TriangleMesh,
    n_points: usize,
    seed: u64,
) -> Result<PointCloud, GeometryError> {
    if mesh.faces.is_empty() {
        return Err(GeometryError::EmptyMesh);
    }
    let areas: Vec<f64> = (0..mesh.faces.len()).map(|f| mesh.triangle_area(f)).collect();
    let total: f64 = areas.iter().sum();
    if !(total > 0.0) || !total.is_finite() {
        return Err(GeometryError::ZeroArea);
    }
    // zero-weight (degenerate) triangles are never drawn
    let picker = WeightedIndex::new(&areas).map_err(|_| GeometryError::ZeroArea)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points = Vec::with_capacity(n_points);
    for _ in 0..n_points {
        let [a, b, c] = mesh.corners(picker.sample(&mut rng));
        let r1: f64 = rng.gen::<f64>().sqrt();
        let r2: f64 = rng.gen();
        let wa = 1.0 - r1;
        let wb = r1 * (1.0 - r2);
        let wc = r1 * r2;
        points.push([
            wa * a[0] + wb * b[0] + wc * c[0],
            wa * a[1] + wb * b[1] + wc * c[1],
            wa * a[2] + wb * b[2] + wc * c[2],
        ]);
    }
    Ok(PointCloud { points, labels: None })
}

/// Translates the centroid to the origin and scales so the farthest point
/// lies on the unit sphere. Labels are carried over unchanged.
pub fn center_normalize(cloud: &PointCloud) -> Result<PointCloud, GeometryError> {
    let centroid = cloud.centroid().ok_or(GeometryError::EmptyCloud)?;
    let centered: Vec<Vec3> = cloud.points.iter().map(|&p| sub(p, centroid)).collect();
    let radius = centered.iter().map(|&p| norm(p)).fold(0.0, f64::max);
    if !(radius > 0.0) {
        return Err(GeometryError::ZeroScale);
    }
    let points = centered
        .into_iter()
        .map(|p| [p[0] / radius, p[1] / radius, p[2] / radius])
        .collect();
    Ok(PointCloud { points, labels: cloud.labels.clone() })
}

/// Placement of a sampling grid: `u`, `v` span the grid plane and `w` is the
/// viewing direction along which heights are measured.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridFrame {
    pub origin: Vec3,
    pub u: Vec3,
    pub v: Vec3,
    pub w: Vec3,
}

impl GridFrame {
    pub fn new(origin: Vec3, u: Vec3, v: Vec3, w: Vec3) -> Result<Self, GeometryError> {
        let frame = Self { origin, u, v, w };
        if !frame.is_orthonormal(FRAME_TOLERANCE) {
            return Err(GeometryError::NotOrthonormal);
        }
        Ok(frame)
    }

    /// World axes: u = X, v = Y, w = Z.
    pub fn identity() -> Self {
        Self { origin: [0.0; 3], u: [1.0, 0.0, 0.0], v: [0.0, 1.0, 0.0], w: [0.0, 0.0, 1.0] }
    }

    /// Builds a frame through the origin with `u = w × v`.
    fn from_normal_and_up(w: Vec3, v: Vec3) -> Self {
        Self { origin: [0.0; 3], u: cross(w, v), v, w }
    }

    pub fn is_orthonormal(&self, tol: f64) -> bool {
        let axes = [self.u, self.v, self.w];
        for (i, a) in axes.iter().enumerate() {
            if (dot(*a, *a) - 1.0).abs() > tol {
                return false;
            }
            for b in &axes[i + 1..] {
                if dot(*a, *b).abs() > tol {
                    return false;
                }
            }
        }
        true
    }

    /// Coordinates of a world point in this frame: (along u, along v, height along w).
    pub fn local(&self, p: Vec3) -> Vec3 {
        let d = sub(p, self.origin);
        [dot(d, self.u), dot(d, self.v), dot(d, self.w)]
    }

    /// Inverse of [`GridFrame::local`].
    pub fn world(&self, local: Vec3) -> Vec3 {
        let [a, b, h] = local;
        let mut out = self.origin;
        for k in 0..3 {
            out[k] += a * self.u[k] + b * self.v[k] + h * self.w[k];
        }
        out
    }
}

/// `m` frames obtained by turning the X-facing reference frame about world Z
/// in steps of `2π/m`. Up (`v`) is world Z for every frame.
pub fn z_ring_orientations(m: usize) -> Vec<GridFrame> {
    (0..m)
        .map(|k| {
            let angle = 2.0 * PI * (k as f64) / (m as f64);
            let (s, c) = angle.sin_cos();
            GridFrame::from_normal_and_up([c, s, 0.0], [0.0, 0.0, 1.0])
        })
        .collect()
}

/// Three frames looking along world X, Y and Z.
pub fn axis_orientations() -> Vec<GridFrame> {
    vec![
        GridFrame::from_normal_and_up([1.0, 0.0, 0.0], [0.0, 0.0, 1.0]),
        GridFrame::from_normal_and_up([0.0, 1.0, 0.0], [0.0, 0.0, 1.0]),
        GridFrame::from_normal_and_up([0.0, 0.0, 1.0], [0.0, 1.0, 0.0]),
    ]
}

/// Half-open physical interval `[lo, hi)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Range {
    pub lo: f64,
    pub hi: f64,
}

impl Range {
    pub const fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    pub fn len(&self) -> f64 {
        self.hi - self.lo
    }

    /// Bin of `x` among `bins` equal subdivisions. The last bin is closed on the
    /// right; values outside the range give `None`.
    pub fn bin(&self, x: f64, bins: usize) -> Option<usize> {
        if !(x >= self.lo && x <= self.hi) {
            return None;
        }
        let t = (x - self.lo) / self.len() * bins as f64;
        Some((t.floor() as usize).min(bins - 1))
    }
}

/// Resolution and physical placement of a sampling grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub height: usize,
    pub width: usize,
    pub layers: usize,
    pub extent_u: Range,
    pub extent_v: Range,
    pub depth: Range,
    pub thickness: Option<f64>,
}

pub const UNIT_RANGE: Range = Range::new(-1.0, 1.0);

impl GridSpec {
    pub fn new(
        height: usize,
        width: usize,
        layers: usize,
        extent_u: Range,
        extent_v: Range,
        depth: Range,
        thickness: Option<f64>,
    ) -> Result<Self, GeometryError> {
        if height == 0 || width == 0 || layers == 0 {
            return Err(GeometryError::InvalidSpec("H, W and c must be at least 1".into()));
        }
        for (name, r) in [("extent_u", extent_u), ("extent_v", extent_v), ("depth", depth)] {
            if !(r.lo.is_finite() && r.hi.is_finite() && r.hi > r.lo) {
                return Err(GeometryError::InvalidSpec(format!("{name} is degenerate")));
            }
        }
        if let Some(t) = thickness {
            if !(t > 0.0 && t <= depth.len()) {
                return Err(GeometryError::InvalidSpec(format!(
                    "thickness {t} outside (0, {}]",
                    depth.len()
                )));
            }
        }
        Ok(Self { height, width, layers, extent_u, extent_v, depth, thickness })
    }

    /// `H × W × c` grid over the normalized cube `[-1, 1]³`.
    pub fn unit(height: usize, width: usize, layers: usize) -> Result<Self, GeometryError> {
        Self::new(height, width, layers, UNIT_RANGE, UNIT_RANGE, UNIT_RANGE, None)
    }

    pub fn with_thickness(mut self, thickness: f64) -> Result<Self, GeometryError> {
        self.thickness = Some(thickness);
        Self::new(
            self.height,
            self.width,
            self.layers,
            self.extent_u,
            self.extent_v,
            self.depth,
            self.thickness,
        )
    }

    pub fn bin_width_u(&self) -> f64 {
        self.extent_u.len() / self.height as f64
    }

    pub fn bin_width_v(&self) -> f64 {
        self.extent_v.len() / self.width as f64
    }

    /// Slice thickness, falling back to `D / c`.
    pub fn slice_thickness(&self) -> f64 {
        self.thickness.unwrap_or(self.depth.len() / self.layers as f64)
    }

    pub fn cells(&self) -> usize {
        self.height * self.width * self.layers
    }
}

/// Grid placement of a single point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridCoord {
    pub i: usize,
    pub j: usize,
    pub height: f64,
    pub in_bounds: bool,
}

pub(crate) fn grid_coord(p: Vec3, frame: &GridFrame, spec: &GridSpec) -> GridCoord {
    let [a, b, height] = frame.local(p);
    let bi = spec.extent_u.bin(a, spec.height);
    let bj = spec.extent_v.bin(b, spec.width);
    let depth_ok = height >= spec.depth.lo && height <= spec.depth.hi;
    match (bi, bj) {
        (Some(i), Some(j)) => GridCoord { i, j, height, in_bounds: depth_ok },
        _ => GridCoord { i: 0, j: 0, height, in_bounds: false },
    }
}

/// Projects every point into the grid. Out-of-bounds points keep their height
/// but report `in_bounds = false` and bins `(0, 0)`.
pub fn to_grid_coords(cloud: &PointCloud, frame: &GridFrame, spec: &GridSpec) -> Vec<GridCoord> {
    cloud.points.iter().map(|&p| grid_coord(p, frame, spec)).collect()
}

/// Rotation of `p` about world Z by `angle` radians.
pub fn rotate_z(p: Vec3, angle: f64) -> Vec3 {
    let (s, c) = angle.sin_cos();
    [c * p[0] - s * p[1], s * p[0] + c * p[1], p[2]]
}
