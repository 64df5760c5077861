//! World model: a straight road along the x-axis, typed lane markings,
//! static and dynamic objects, the ego vehicle and its sensor.

use alloc::vec::Vec;
use core::f64::consts::{FRAC_PI_2, TAU};

use crate::geometry::{self, GeometryError, Point2, Polygon};

/// Default sensor range in meters.
pub const DEFAULT_SENSOR_RANGE: f64 = 80.0;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SceneError {
    #[error("lane markings must be strictly ordered by lateral offset")]
    UnorderedMarkings,
    #[error("drivable band is empty")]
    EmptyDrivableBand,
    #[error("walkable band [{0}, {1}] overlaps the drivable band")]
    WalkableOverlap(f64, f64),
    #[error("invalid band [{0}, {1}]")]
    InvalidBand(f64, f64),
    #[error("ego footprint overlaps static object {0}")]
    EgoCollision(usize),
    #[error("invalid value for {name}: {value}")]
    OutOfRange { name: &'static str, value: f64 },
    #[error("geometry: {0}")]
    Geometry(#[from] GeometryError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MarkingKind {
    Solid,
    Dashed,
    RoadEdge,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LaneMarking {
    pub lateral_offset: f64,
    pub kind: MarkingKind,
}

/// Closed lateral interval `[y_min, y_max]` along the whole road.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Band {
    pub y_min: f64,
    pub y_max: f64,
}

impl Band {
    pub const fn new(y_min: f64, y_max: f64) -> Self {
        Self { y_min, y_max }
    }

    pub fn width(&self) -> f64 {
        self.y_max - self.y_min
    }

    pub fn center(&self) -> f64 {
        0.5 * (self.y_min + self.y_max)
    }

    pub fn contains(&self, y: f64) -> bool {
        y >= self.y_min && y <= self.y_max
    }

    /// Rectangle covering the band between `x_min` and `x_max`.
    pub fn rectangle(&self, x_min: f64, x_max: f64) -> Option<Polygon> {
        Polygon::rectangle(Point2::new(x_min, self.y_min), Point2::new(x_max, self.y_max)).ok()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoadModel {
    pub markings: Vec<LaneMarking>,
    pub drivable: Band,
    pub walkable: Vec<Band>,
}

impl RoadModel {
    pub fn validate(&self) -> Result<(), SceneError> {
        if self
            .markings
            .windows(2)
            .any(|w| w[1].lateral_offset <= w[0].lateral_offset)
        {
            return Err(SceneError::UnorderedMarkings);
        }
        if !(self.drivable.width() > 0.0) {
            return Err(SceneError::EmptyDrivableBand);
        }
        for b in &self.walkable {
            if !(b.width() > 0.0) {
                return Err(SceneError::InvalidBand(b.y_min, b.y_max));
            }
            if b.y_min < self.drivable.y_max && b.y_max > self.drivable.y_min {
                return Err(SceneError::WalkableOverlap(b.y_min, b.y_max));
            }
        }
        Ok(())
    }

    /// Lanes as lateral intervals between consecutive markings inside the
    /// drivable band, ordered right to left. The band edges act as
    /// boundaries when no marking sits there.
    pub fn lanes(&self) -> Vec<Band> {
        let mut cuts: Vec<f64> = Vec::new();
        cuts.push(self.drivable.y_min);
        for m in &self.markings {
            if m.lateral_offset > self.drivable.y_min + 1e-9
                && m.lateral_offset < self.drivable.y_max - 1e-9
            {
                cuts.push(m.lateral_offset);
            }
        }
        cuts.push(self.drivable.y_max);
        cuts.windows(2).map(|w| Band::new(w[0], w[1])).collect()
    }

    pub fn lane_index(&self, y: f64) -> Option<usize> {
        self.lanes().iter().position(|l| l.contains(y))
    }

    /// Marking bounding the lane containing `y` on its left side, if it is
    /// an interior marking (not the road edge).
    pub fn left_marking(&self, y: f64) -> Option<LaneMarking> {
        let lane = self.lanes()[self.lane_index(y)?];
        self.markings
            .iter()
            .copied()
            .find(|m| (m.lateral_offset - lane.y_max).abs() <= 1e-9 && m.kind != MarkingKind::RoadEdge)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    pub heading: f64,
}

impl Pose {
    pub const fn new(x: f64, y: f64, heading: f64) -> Self {
        Self { x, y, heading }
    }

    pub fn position(&self) -> Point2 {
        Point2::new(self.x, self.y)
    }

    pub fn direction(&self) -> Point2 {
        Point2::polar(1.0, self.heading)
    }

    /// Maps a point from the body frame to the world frame.
    pub fn transform(&self, p: Point2) -> Point2 {
        self.position() + p.rotate(self.heading)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ObjectKind {
    Vehicle,
    Pedestrian,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DynamicObject {
    pub pose: Pose,
    /// Footprint in the body frame (x forward).
    pub footprint: Polygon,
    pub speed: f64,
    /// Worst-case acceleration used for prediction.
    pub max_accel: f64,
    pub kind: ObjectKind,
}

impl DynamicObject {
    pub fn world_footprint(&self) -> Polygon {
        self.footprint
            .rotate_about(Point2::default(), self.pose.heading)
            .translate(self.pose.position())
    }

    /// Constant-velocity ground-truth motion over `dt`.
    pub fn advanced(&self, dt: f64) -> Self {
        let mut next = self.clone();
        let d = self.pose.direction() * (self.speed * dt);
        next.pose.x += d.x;
        next.pose.y += d.y;
        next
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EgoState {
    pub pose: Pose,
    pub speed: f64,
    pub max_decel: f64,
    pub length: f64,
    pub width: f64,
}

impl EgoState {
    pub fn footprint(&self) -> Polygon {
        Polygon::oriented_box(self.pose.position(), self.pose.heading, self.length, self.width)
            .expect("validated ego dimensions")
    }

    pub fn half_width(&self) -> f64 {
        0.5 * self.width
    }

    /// Station of the front bumper along `dir`.
    pub fn front(&self, dir: Point2) -> f64 {
        self.pose.position().dot(dir) + 0.5 * self.length
    }

    /// Station of the rear bumper along `dir`.
    pub fn rear(&self, dir: Point2) -> f64 {
        self.pose.position().dot(dir) - 0.5 * self.length
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SensorSpec {
    /// Mounting position in the ego body frame.
    pub mount_offset: Point2,
    pub max_range: f64,
    /// Full opening angle, centred on the ego heading.
    pub fov: f64,
}

impl Default for SensorSpec {
    fn default() -> Self {
        Self {
            mount_offset: Point2::default(),
            max_range: DEFAULT_SENSOR_RANGE,
            fov: TAU,
        }
    }
}

impl SensorSpec {
    pub fn origin(&self, ego: &EgoState) -> Point2 {
        ego.pose.transform(self.mount_offset)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub road: RoadModel,
    pub ego: EgoState,
    pub statics: Vec<Polygon>,
    pub dynamics: Vec<DynamicObject>,
    pub sensor: SensorSpec,
}

fn positive(name: &'static str, value: f64) -> Result<(), SceneError> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(SceneError::OutOfRange { name, value })
    }
}

fn non_negative(name: &'static str, value: f64) -> Result<(), SceneError> {
    if value.is_finite() && value >= 0.0 {
        Ok(())
    } else {
        Err(SceneError::OutOfRange { name, value })
    }
}

impl Scene {
    /// Builds a scene after checking every invariant.
    pub fn new(
        road: RoadModel,
        ego: EgoState,
        statics: Vec<Polygon>,
        dynamics: Vec<DynamicObject>,
        sensor: SensorSpec,
    ) -> Result<Self, SceneError> {
        let scene = Self {
            road,
            ego,
            statics,
            dynamics,
            sensor,
        };
        scene.validate()?;
        Ok(scene)
    }

    pub fn validate(&self) -> Result<(), SceneError> {
        self.road.validate()?;
        non_negative("ego.speed", self.ego.speed)?;
        positive("ego.max_decel", self.ego.max_decel)?;
        positive("ego.length", self.ego.length)?;
        positive("ego.width", self.ego.width)?;
        positive("sensor.range", self.sensor.max_range)?;
        if !(self.sensor.fov > 0.0 && self.sensor.fov <= TAU + 1e-12) {
            return Err(SceneError::OutOfRange {
                name: "sensor.fov",
                value: self.sensor.fov,
            });
        }
        for o in &self.dynamics {
            non_negative("object.speed", o.speed)?;
            non_negative("object.max_accel", o.max_accel)?;
        }
        let ego = self.ego.footprint();
        for (i, s) in self.statics.iter().enumerate() {
            if overlaps(&ego, s) {
                return Err(SceneError::EgoCollision(i));
            }
        }
        Ok(())
    }

    pub fn sensor_origin(&self) -> Point2 {
        self.sensor.origin(&self.ego)
    }

    /// Footprints of everything that can block the line of sight.
    pub fn occluders(&self) -> Vec<Polygon> {
        self.statics
            .iter()
            .cloned()
            .chain(self.dynamics.iter().map(DynamicObject::world_footprint))
            .collect()
    }

    /// Space hidden from the sensor, clipped to the field of view and to
    /// drivable and walkable space, as disjoint convex polygons.
    ///
    /// Occluders that contain the sensor origin are skipped.
    pub fn compute_occlusions(&self) -> Vec<Polygon> {
        let origin = self.sensor_origin();
        let range = self.sensor.max_range;
        let occluders: Vec<Polygon> = self
            .occluders()
            .into_iter()
            .filter(|o| !o.contains(origin))
            .collect();
        if occluders.is_empty() {
            return Vec::new();
        }
        let mut cells =
            geometry::shadow_cells(origin, &occluders, range, Default::default()).unwrap_or_default();
        if self.sensor.fov < TAU - 1e-12 {
            let sectors = fov_sectors(origin, self.ego.pose.heading, self.sensor.fov, 2.0 * range);
            cells = sectors
                .iter()
                .flat_map(|w| geometry::clip_all(&cells, w).unwrap_or_default())
                .collect();
        }
        let (x0, x1) = (origin.x - range - 1.0, origin.x + range + 1.0);
        self.space_bands()
            .iter()
            .filter_map(|b| b.rectangle(x0, x1))
            .flat_map(|w| geometry::clip_all(&cells, &w).unwrap_or_default())
            .collect()
    }

    /// Drivable and walkable bands, ordered by lateral position.
    pub fn space_bands(&self) -> Vec<Band> {
        let mut v: Vec<Band> = self.road.walkable.clone();
        v.push(self.road.drivable);
        v.sort_by(|a, b| a.y_min.total_cmp(&b.y_min));
        v
    }

    /// Static footprints inflated by the ego half-width.
    pub fn inflated_statics(&self) -> Vec<Polygon> {
        let hw = self.ego.half_width();
        self.statics
            .iter()
            .map(|s| geometry::grow_region(s, hw))
            .collect()
    }

    /// Drivable band (within sensor range of the ego) minus the inflated
    /// statics, as disjoint convex pieces.
    pub fn free_space(&self) -> FreeSpace {
        let range = self.sensor.max_range;
        let x = self.ego.pose.x;
        let mut pieces: Vec<Polygon> = self
            .road
            .drivable
            .rectangle(x - range, x + range)
            .into_iter()
            .collect();
        for obstacle in self.inflated_statics() {
            pieces = pieces
                .iter()
                .flat_map(|p| convex_difference(p, &obstacle))
                .collect();
        }
        FreeSpace { pieces }
    }

    /// Copy with every position shifted by `by`.
    pub fn translated(&self, by: Point2) -> Self {
        let mut s = self.clone();
        s.road.drivable = Band::new(s.road.drivable.y_min + by.y, s.road.drivable.y_max + by.y);
        for b in &mut s.road.walkable {
            *b = Band::new(b.y_min + by.y, b.y_max + by.y);
        }
        for m in &mut s.road.markings {
            m.lateral_offset += by.y;
        }
        s.ego.pose.x += by.x;
        s.ego.pose.y += by.y;
        s.statics = s.statics.iter().map(|p| p.translate(by)).collect();
        for o in &mut s.dynamics {
            o.pose.x += by.x;
            o.pose.y += by.y;
        }
        s
    }

    /// Moves the dynamic objects forward by `dt` at constant velocity.
    pub fn advance_objects(&mut self, dt: f64) {
        for o in &mut self.dynamics {
            *o = o.advanced(dt);
        }
    }
}

fn overlaps(a: &Polygon, b: &Polygon) -> bool {
    if !a.bbox().intersects(&b.bbox()) {
        return false;
    }
    let window = if b.is_convex() { b } else { a };
    let subject = if b.is_convex() { a } else { b };
    if !window.is_convex() {
        return a.vertices().iter().any(|&p| b.contains(p))
            || b.vertices().iter().any(|&p| a.contains(p));
    }
    geometry::clip(subject, window).map_or(false, |v| !v.is_empty())
}

/// Convex wedges of opening at most π/2 that together cover the field of
/// view out to `radius`.
fn fov_sectors(origin: Point2, heading: f64, fov: f64, radius: f64) -> Vec<Polygon> {
    let m = libm::ceil(fov / FRAC_PI_2).max(1.0) as usize;
    let h = fov / m as f64;
    let start = heading - 0.5 * fov;
    (0..m)
        .filter_map(|i| {
            let a = start + i as f64 * h;
            let b = a + h;
            let mid = 0.5 * (a + b);
            Polygon::new(alloc::vec![
                origin,
                origin + Point2::polar(radius, a),
                origin + Point2::polar(radius / libm::cos(0.5 * h), mid),
                origin + Point2::polar(radius, b),
            ])
            .ok()
        })
        .collect()
}

/// `piece \ obstacle` for a convex piece and a convex obstacle, split into
/// disjoint convex polygons (one per obstacle edge that cuts the piece).
pub(crate) fn convex_difference(piece: &Polygon, obstacle: &Polygon) -> Vec<Polygon> {
    if !piece.bbox().intersects(&obstacle.bbox()) {
        return alloc::vec![piece.clone()];
    }
    let mut out = Vec::new();
    let mut remaining = Some(piece.clone());
    for (a, b) in obstacle.edges() {
        let Some(rest) = remaining.take() else { break };
        if let Some(outside) = clip_halfplane(&rest, b, a) {
            out.push(outside);
        }
        remaining = clip_halfplane(&rest, a, b);
    }
    out
}

/// Part of a convex polygon on the left of the directed line `a → b`.
pub(crate) fn clip_halfplane(poly: &Polygon, a: Point2, b: Point2) -> Option<Polygon> {
    let e = b - a;
    let scale = e.norm().max(1e-300);
    let side = |p: Point2| e.cross(p - a) / scale;
    let v = poly.vertices();
    let n = v.len();
    let mut out = Vec::with_capacity(n + 1);
    for i in 0..n {
        let cur = v[i];
        let prev = v[(i + n - 1) % n];
        let (sc, sp) = (side(cur), side(prev));
        if sc >= 0.0 {
            if sp < 0.0 {
                out.push(prev.lerp(cur, sp / (sp - sc)));
            }
            out.push(cur);
        } else if sp >= 0.0 {
            out.push(prev.lerp(cur, sp / (sp - sc)));
        }
    }
    Polygon::new_unchecked_simple(out)
}

/// Drivable space as disjoint convex pieces.
#[derive(Debug, Clone, PartialEq)]
pub struct FreeSpace {
    pub pieces: Vec<Polygon>,
}

impl FreeSpace {
    pub fn contains(&self, p: Point2) -> bool {
        geometry::any_contains(&self.pieces, p)
    }

    pub fn area(&self) -> f64 {
        geometry::total_area(&self.pieces)
    }

    /// Number of connected components; pieces connect through shared edges
    /// of positive length.
    pub fn components(&self) -> usize {
        let n = self.pieces.len();
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(parent: &mut [usize], mut i: usize) -> usize {
            while parent[i] != i {
                parent[i] = parent[parent[i]];
                i = parent[i];
            }
            i
        }
        for i in 0..n {
            for j in (i + 1)..n {
                if share_edge(&self.pieces[i], &self.pieces[j]) {
                    let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                    parent[ri] = rj;
                }
            }
        }
        (0..n).filter(|&i| find(&mut parent, i) == i).count()
    }
}

fn share_edge(p: &Polygon, q: &Polygon) -> bool {
    const TOL: f64 = 1e-7;
    for (a, b) in p.edges() {
        let e = b - a;
        let len = e.norm();
        if len < TOL {
            continue;
        }
        let u = e * (1.0 / len);
        for (c, d) in q.edges() {
            let on_line = |p: Point2| u.cross(p - a).abs() <= TOL;
            if !(on_line(c) && on_line(d)) {
                continue;
            }
            let (s0, s1) = ((c - a).dot(u), (d - a).dot(u));
            let overlap = s0.max(s1).min(len) - s0.min(s1).max(0.0);
            if overlap > TOL {
                return true;
            }
        }
    }
    false
}
