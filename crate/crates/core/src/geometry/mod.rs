//! Planar geometry kernel: points, simple polygons, convex clipping,
//! Minkowski growth and sensor shadow casting.
//!
//! All polygons are stored counter-clockwise. Functions are pure and work on
//! values, so they can be shared freely between threads.

mod clip;
mod shadow;

use alloc::vec::Vec;
use core::ops::{Add, Mul, Neg, Sub};

pub use clip::{clip, clip_all, convex_decomposition};
pub use shadow::{occlusion_shadow, shadow_cells, ShadowOptions, DEFAULT_CHORD_TOLERANCE};

/// Polygons with less area than this are treated as degenerate and dropped.
pub const AREA_EPS: f64 = 1e-9;

/// Distance tolerance for boundary tests.
pub const DIST_EPS: f64 = 1e-9;

/// Number of sides of the circumscribed polygon used for disc approximations.
pub const DISC_SEGMENTS: usize = 32;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GeometryError {
    #[error("polygon needs at least 3 distinct vertices, got {0}")]
    TooFewVertices(usize),
    #[error("polygon has a non-finite coordinate")]
    NonFinite,
    #[error("polygon area {0:e} is below the degeneracy threshold")]
    Degenerate(f64),
    #[error("polygon edges {0} and {1} intersect")]
    SelfIntersecting(usize, usize),
    #[error("clip window is not convex")]
    NonConvexWindow,
    #[error("shadow origin lies inside the occluder")]
    OriginInsideOccluder,
    #[error("range must be positive and finite, got {0}")]
    InvalidRange(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    /// Point at distance `r` from the origin in direction `angle`.
    pub fn polar(r: f64, angle: f64) -> Self {
        Self::new(r * libm::cos(angle), r * libm::sin(angle))
    }

    pub fn dot(self, other: Self) -> f64 {
        self.x * other.x + self.y * other.y
    }

    /// z-component of the 3D cross product.
    pub fn cross(self, other: Self) -> f64 {
        self.x * other.y - self.y * other.x
    }

    pub fn norm(self) -> f64 {
        libm::hypot(self.x, self.y)
    }

    pub fn dist(self, other: Self) -> f64 {
        (self - other).norm()
    }

    pub fn angle(self) -> f64 {
        libm::atan2(self.y, self.x)
    }

    /// Rotate counter-clockwise about the origin.
    pub fn rotate(self, angle: f64) -> Self {
        let (s, c) = (libm::sin(angle), libm::cos(angle));
        Self::new(c * self.x - s * self.y, s * self.x + c * self.y)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    /// Linear interpolation, `t = 0` gives `self`.
    pub fn lerp(self, other: Self, t: f64) -> Self {
        self + (other - self) * t
    }
}

impl Add for Point2 {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self::new(self.x + o.x, self.y + o.y)
    }
}

impl Sub for Point2 {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Self::new(self.x - o.x, self.y - o.y)
    }
}

impl Mul<f64> for Point2 {
    type Output = Self;
    fn mul(self, s: f64) -> Self {
        Self::new(self.x * s, self.y * s)
    }
}

impl Neg for Point2 {
    type Output = Self;
    fn neg(self) -> Self {
        Self::new(-self.x, -self.y)
    }
}

/// Axis-aligned bounding box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aabb {
    pub min: Point2,
    pub max: Point2,
}

impl Aabb {
    pub fn intersects(&self, other: &Aabb) -> bool {
        self.min.x <= other.max.x
            && other.min.x <= self.max.x
            && self.min.y <= other.max.y
            && other.min.y <= self.max.y
    }
}

/// Simple polygon with counter-clockwise vertex order and positive area.
#[derive(Debug, Clone, PartialEq)]
pub struct Polygon {
    vertices: Vec<Point2>,
}

impl Polygon {
    /// Validates and normalizes a vertex loop.
    ///
    /// Repeated consecutive vertices are removed and clockwise input is
    /// reversed. Self-intersecting or degenerate loops are rejected.
    pub fn new(vertices: Vec<Point2>) -> Result<Self, GeometryError> {
        if vertices.iter().any(|p| !p.is_finite()) {
            return Err(GeometryError::NonFinite);
        }
        let mut vertices = dedup_loop(vertices);
        if vertices.len() < 3 {
            return Err(GeometryError::TooFewVertices(vertices.len()));
        }
        if let Some((i, j)) = find_self_intersection(&vertices) {
            return Err(GeometryError::SelfIntersecting(i, j));
        }
        let area = signed_area(&vertices);
        if area.abs() < AREA_EPS {
            return Err(GeometryError::Degenerate(area.abs()));
        }
        if area < 0.0 {
            vertices.reverse();
        }
        Ok(Self { vertices })
    }

    /// Skips the simplicity check; for loops that are simple by construction.
    pub(crate) fn new_unchecked_simple(vertices: Vec<Point2>) -> Option<Self> {
        if vertices.iter().any(|p| !p.is_finite()) {
            return None;
        }
        let mut vertices = dedup_loop(vertices);
        if vertices.len() < 3 {
            return None;
        }
        let area = signed_area(&vertices);
        if area.abs() < AREA_EPS {
            return None;
        }
        if area < 0.0 {
            vertices.reverse();
        }
        Some(Self { vertices })
    }

    pub fn rectangle(min: Point2, max: Point2) -> Result<Self, GeometryError> {
        Self::new(alloc::vec![
            min,
            Point2::new(max.x, min.y),
            max,
            Point2::new(min.x, max.y),
        ])
    }

    /// Rectangle of the given size centred on `center` and rotated by `heading`.
    pub fn oriented_box(
        center: Point2,
        heading: f64,
        length: f64,
        width: f64,
    ) -> Result<Self, GeometryError> {
        let (hl, hw) = (0.5 * length, 0.5 * width);
        let corners = [(-hl, -hw), (hl, -hw), (hl, hw), (-hl, hw)];
        Self::new(
            corners
                .iter()
                .map(|&(x, y)| center + Point2::new(x, y).rotate(heading))
                .collect(),
        )
    }

    /// Convex hull of a point cloud (collinear points removed).
    pub fn convex_hull(points: &[Point2]) -> Result<Self, GeometryError> {
        if points.iter().any(|p| !p.is_finite()) {
            return Err(GeometryError::NonFinite);
        }
        let hull = convex_hull_points(points);
        Self::new(hull)
    }

    pub fn vertices(&self) -> &[Point2] {
        &self.vertices
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn edges(&self) -> impl Iterator<Item = (Point2, Point2)> + '_ {
        let n = self.vertices.len();
        (0..n).map(move |i| (self.vertices[i], self.vertices[(i + 1) % n]))
    }

    pub fn signed_area(&self) -> f64 {
        signed_area(&self.vertices)
    }

    pub fn area(&self) -> f64 {
        self.signed_area().abs()
    }

    pub fn centroid(&self) -> Point2 {
        let a = self.signed_area();
        let (mut cx, mut cy) = (0.0, 0.0);
        for (p, q) in self.edges() {
            let w = p.cross(q);
            cx += (p.x + q.x) * w;
            cy += (p.y + q.y) * w;
        }
        Point2::new(cx / (6.0 * a), cy / (6.0 * a))
    }

    pub fn bbox(&self) -> Aabb {
        let mut min = self.vertices[0];
        let mut max = self.vertices[0];
        for p in &self.vertices[1..] {
            min.x = min.x.min(p.x);
            min.y = min.y.min(p.y);
            max.x = max.x.max(p.x);
            max.y = max.y.max(p.y);
        }
        Aabb { min, max }
    }

    /// Convex when no vertex turns clockwise (collinear vertices allowed).
    pub fn is_convex(&self) -> bool {
        let n = self.vertices.len();
        let scale = self.bbox_scale();
        (0..n).all(|i| {
            let a = self.vertices[i];
            let b = self.vertices[(i + 1) % n];
            let c = self.vertices[(i + 2) % n];
            (b - a).cross(c - b) >= -1e-12 * scale * scale
        })
    }

    fn bbox_scale(&self) -> f64 {
        let bb = self.bbox();
        (bb.max.x - bb.min.x).max(bb.max.y - bb.min.y).max(1.0)
    }

    /// Point-in-polygon test; points on the boundary count as inside.
    pub fn contains(&self, p: Point2) -> bool {
        if self.boundary_distance(p) <= DIST_EPS {
            return true;
        }
        let mut inside = false;
        for (a, b) in self.edges() {
            if (a.y > p.y) != (b.y > p.y) {
                let x = a.x + (p.y - a.y) / (b.y - a.y) * (b.x - a.x);
                if x > p.x {
                    inside = !inside;
                }
            }
        }
        inside
    }

    /// Unsigned distance from `p` to the polygon boundary.
    pub fn boundary_distance(&self, p: Point2) -> f64 {
        self.edges()
            .map(|(a, b)| point_segment_distance(p, a, b))
            .fold(f64::INFINITY, f64::min)
    }

    /// Distance from `p` to the closed polygon region (zero inside).
    pub fn distance(&self, p: Point2) -> f64 {
        if self.contains(p) {
            0.0
        } else {
            self.boundary_distance(p)
        }
    }

    pub fn translate(&self, by: Point2) -> Self {
        Self {
            vertices: self.vertices.iter().map(|&p| p + by).collect(),
        }
    }

    /// Rigid rotation about `pivot`.
    pub fn rotate_about(&self, pivot: Point2, angle: f64) -> Self {
        Self {
            vertices: self
                .vertices
                .iter()
                .map(|&p| pivot + (p - pivot).rotate(angle))
                .collect(),
        }
    }

    /// Mirror across the x-axis (orientation restored to counter-clockwise).
    pub fn mirror_y(&self) -> Self {
        let mut vertices: Vec<Point2> =
            self.vertices.iter().map(|p| Point2::new(p.x, -p.y)).collect();
        vertices.reverse();
        Self { vertices }
    }

    /// Lateral extent of the polygon restricted to `x_min <= x <= x_max`.
    pub fn y_extent_in_slab(&self, x_min: f64, x_max: f64) -> Option<(f64, f64)> {
        let bb = self.bbox();
        if bb.max.x < x_min || bb.min.x > x_max {
            return None;
        }
        let slab = Polygon::rectangle(
            Point2::new(x_min, bb.min.y - 1.0),
            Point2::new(x_max, bb.max.y + 1.0),
        )
        .ok()?;
        let pieces = clip(self, &slab).ok()?;
        let mut ext: Option<(f64, f64)> = None;
        for piece in &pieces {
            let b = piece.bbox();
            ext = Some(match ext {
                None => (b.min.y, b.max.y),
                Some((lo, hi)) => (lo.min(b.min.y), hi.max(b.max.y)),
            });
        }
        ext
    }
}

/// Minkowski sum of `region` with a disc of radius `r`.
///
/// The disc is replaced by a circumscribed regular polygon with
/// [`DISC_SEGMENTS`] sides, so the result always contains the exact sum.
/// Non-convex regions are grown through their convex hull, which is again an
/// outer approximation.
pub fn grow_region(region: &Polygon, r: f64) -> Polygon {
    if r <= 0.0 {
        return region.clone();
    }
    let disc = disc_vertices(Point2::default(), r, DISC_SEGMENTS);
    minkowski_hull(region.vertices(), &disc)
}

/// Minkowski sum of a region with the segment from `-back * dir` to
/// `forward * dir` (`dir` a unit vector).
pub fn sweep_region(region: &Polygon, dir: Point2, back: f64, forward: f64) -> Polygon {
    if back <= 0.0 && forward <= 0.0 {
        return region.clone();
    }
    minkowski_hull(region.vertices(), &[dir * -back, dir * forward])
}

fn minkowski_hull(a: &[Point2], b: &[Point2]) -> Polygon {
    let mut pts = Vec::with_capacity(a.len() * b.len());
    for &p in a {
        for &q in b {
            pts.push(p + q);
        }
    }
    let hull = convex_hull_points(&pts);
    Polygon::new_unchecked_simple(hull).expect("Minkowski sum of a valid polygon is non-degenerate")
}

/// Vertices of a regular polygon circumscribing the circle of radius `r`.
///
/// Edge midpoints touch the circle at angles `k * 2π / n`, so for `n`
/// divisible by four the axis-aligned extent is exactly `r`.
pub fn disc_vertices(center: Point2, r: f64, n: usize) -> Vec<Point2> {
    let step = core::f64::consts::TAU / n as f64;
    let rv = r / libm::cos(0.5 * step);
    (0..n)
        .map(|k| center + Point2::polar(rv, (k as f64 + 0.5) * step))
        .collect()
}

pub fn point_segment_distance(p: Point2, a: Point2, b: Point2) -> f64 {
    let ab = b - a;
    let len2 = ab.dot(ab);
    if len2 == 0.0 {
        return p.dist(a);
    }
    let t = ((p - a).dot(ab) / len2).clamp(0.0, 1.0);
    p.dist(a + ab * t)
}

/// Proper or touching intersection of closed segments `ab` and `cd`.
pub fn segments_intersect(a: Point2, b: Point2, c: Point2, d: Point2) -> bool {
    let d1 = orient(c, d, a);
    let d2 = orient(c, d, b);
    let d3 = orient(a, b, c);
    let d4 = orient(a, b, d);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
    {
        return true;
    }
    (d1 == 0.0 && on_segment(c, d, a))
        || (d2 == 0.0 && on_segment(c, d, b))
        || (d3 == 0.0 && on_segment(a, b, c))
        || (d4 == 0.0 && on_segment(a, b, d))
}

/// Intersection point of segments `ab` and `cd` when they cross at a single point.
pub fn segment_intersection(a: Point2, b: Point2, c: Point2, d: Point2) -> Option<Point2> {
    let r = b - a;
    let s = d - c;
    let denom = r.cross(s);
    if denom.abs() < 1e-15 * (r.norm() * s.norm()).max(1e-300) {
        return None;
    }
    let t = (c - a).cross(s) / denom;
    let u = (c - a).cross(r) / denom;
    if (-1e-12..=1.0 + 1e-12).contains(&t) && (-1e-12..=1.0 + 1e-12).contains(&u) {
        Some(a + r * t)
    } else {
        None
    }
}

fn orient(a: Point2, b: Point2, c: Point2) -> f64 {
    (b - a).cross(c - a)
}

fn on_segment(a: Point2, b: Point2, p: Point2) -> bool {
    p.x >= a.x.min(b.x) && p.x <= a.x.max(b.x) && p.y >= a.y.min(b.y) && p.y <= a.y.max(b.y)
}

pub(crate) fn signed_area(v: &[Point2]) -> f64 {
    let n = v.len();
    let mut s = 0.0;
    for i in 0..n {
        s += v[i].cross(v[(i + 1) % n]);
    }
    0.5 * s
}

fn dedup_loop(mut v: Vec<Point2>) -> Vec<Point2> {
    v.dedup_by(|a, b| a.dist(*b) <= 1e-12);
    while v.len() > 1 && v[0].dist(v[v.len() - 1]) <= 1e-12 {
        v.pop();
    }
    v
}

fn find_self_intersection(v: &[Point2]) -> Option<(usize, usize)> {
    let n = v.len();
    if n <= 3 {
        return None;
    }
    for i in 0..n {
        let (a, b) = (v[i], v[(i + 1) % n]);
        for j in (i + 2)..n {
            if i == 0 && j == n - 1 {
                continue;
            }
            let (c, d) = (v[j], v[(j + 1) % n]);
            if segments_intersect(a, b, c, d) {
                return Some((i, j));
            }
        }
    }
    None
}

/// Andrew's monotone chain; returns the hull counter-clockwise without
/// collinear points.
pub(crate) fn convex_hull_points(points: &[Point2]) -> Vec<Point2> {
    let mut pts: Vec<Point2> = points.to_vec();
    pts.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
    pts.dedup_by(|a, b| a.dist(*b) <= 1e-12);
    if pts.len() < 3 {
        return pts;
    }
    let mut hull: Vec<Point2> = Vec::with_capacity(2 * pts.len());
    for &p in &pts {
        while hull.len() >= 2 && orient(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
            hull.pop();
        }
        hull.push(p);
    }
    let lower = hull.len() + 1;
    for &p in pts.iter().rev().skip(1) {
        while hull.len() >= lower && orient(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
            hull.pop();
        }
        hull.push(p);
    }
    hull.pop();
    hull
}

/// Total area of a list of (disjoint) polygons.
pub fn total_area(polys: &[Polygon]) -> f64 {
    polys.iter().map(Polygon::area).sum()
}

/// True if any polygon in the list contains `p`.
pub fn any_contains(polys: &[Polygon], p: Point2) -> bool {
    polys.iter().any(|poly| poly.contains(p))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn unit_square() -> Polygon {
        Polygon::rectangle(Point2::new(0.0, 0.0), Point2::new(1.0, 1.0)).unwrap()
    }

    #[test]
    fn contains_examples() {
        let sq = unit_square();
        assert!(sq.contains(Point2::new(0.5, 0.5)));
        assert!(!sq.contains(Point2::new(2.0, 0.0)));
        assert!(sq.contains(Point2::new(1.0, 0.5)));
        assert!(sq.contains(Point2::new(0.0, 0.0)));
    }

    #[test]
    fn new_reorients_clockwise_input() {
        let p = Polygon::new(vec![
            Point2::new(0.0, 0.0),
            Point2::new(0.0, 1.0),
            Point2::new(1.0, 1.0),
            Point2::new(1.0, 0.0),
        ])
        .unwrap();
        assert!(p.signed_area() > 0.0);
    }

    #[test]
    fn new_rejects_bad_loops() {
        assert_eq!(
            Polygon::new(vec![Point2::new(0.0, 0.0), Point2::new(1.0, 0.0)]),
            Err(GeometryError::TooFewVertices(2))
        );
        assert!(matches!(
            Polygon::new(vec![
                Point2::new(0.0, 0.0),
                Point2::new(1.0, 0.0),
                Point2::new(2.0, 0.0)
            ]),
            Err(GeometryError::Degenerate(_))
        ));
        // bow tie
        assert!(matches!(
            Polygon::new(vec![
                Point2::new(0.0, 0.0),
                Point2::new(1.0, 1.0),
                Point2::new(1.0, 0.0),
                Point2::new(0.0, 1.0)
            ]),
            Err(GeometryError::SelfIntersecting(..))
        ));
        assert_eq!(
            Polygon::new(vec![
                Point2::new(f64::NAN, 0.0),
                Point2::new(1.0, 0.0),
                Point2::new(1.0, 1.0)
            ]),
            Err(GeometryError::NonFinite)
        );
    }

    #[test]
    fn hull_drops_interior_and_collinear_points() {
        let pts = [
            Point2::new(0.0, 0.0),
            Point2::new(0.5, 0.0),
            Point2::new(1.0, 0.0),
            Point2::new(1.0, 1.0),
            Point2::new(0.0, 1.0),
            Point2::new(0.3, 0.4),
        ];
        let hull = Polygon::convex_hull(&pts).unwrap();
        assert_eq!(hull.len(), 4);
        assert!((hull.area() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn grow_zero_radius_is_identity() {
        let sq = unit_square();
        assert_eq!(grow_region(&sq, 0.0), sq);
    }

    #[test]
    fn grow_unit_square_area_within_outer_bound() {
        let grown = grow_region(&unit_square(), 1.0);
        let exact = 1.0 + 4.0 + core::f64::consts::PI;
        let a = grown.area();
        assert!(a >= exact - 1e-9, "outer approximation must not shrink: {a}");
        assert!(a <= exact * 1.02, "area {a} exceeds +2% of {exact}");
    }

    #[test]
    fn grow_point_like_region() {
        let eps = 1e-4;
        let sq = Polygon::rectangle(Point2::new(-eps, -eps), Point2::new(eps, eps)).unwrap();
        let grown = grow_region(&sq, 1.45);
        assert!(grown.contains(Point2::new(1.44, 0.0)));
        assert!(!grown.contains(Point2::new(1.52, 0.0)));
    }

    #[test]
    fn disc_axis_extent_is_exact() {
        let v = disc_vertices(Point2::default(), 2.0, DISC_SEGMENTS);
        let max_x = v.iter().map(|p| p.x).fold(f64::MIN, f64::max);
        assert!((max_x - 2.0).abs() < 1e-12);
    }

    #[test]
    fn y_extent_in_slab_of_triangle() {
        let tri = Polygon::new(vec![
            Point2::new(0.0, 0.0),
            Point2::new(4.0, 0.0),
            Point2::new(0.0, 4.0),
        ])
        .unwrap();
        let (lo, hi) = tri.y_extent_in_slab(1.0, 2.0).unwrap();
        assert!(lo.abs() < 1e-12);
        assert!((hi - 3.0).abs() < 1e-12);
        assert!(tri.y_extent_in_slab(5.0, 6.0).is_none());
    }

    #[test]
    fn centroid_of_rectangle() {
        let r = Polygon::rectangle(Point2::new(1.0, 2.0), Point2::new(3.0, 6.0)).unwrap();
        let c = r.centroid();
        assert!((c.x - 2.0).abs() < 1e-12 && (c.y - 4.0).abs() < 1e-12);
    }
}
