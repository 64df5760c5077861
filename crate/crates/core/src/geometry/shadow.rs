//! Sensor shadows of convex occluders.
//!
//! A point `q` within range is shadowed when the segment from the sensor
//! origin to `q` crosses an occluder's interior and `q` itself lies beyond
//! the occluder. In polar coordinates around the origin the shadow of a set of
//! occluders is `{ (θ, r) : near(θ) <= r <= R }`, where `near(θ)` is the
//! smallest exit distance of the ray at `θ` over all occluders it crosses.
//!
//! The angular axis is split at every angle where `near` could change its
//! defining edge (vertex directions, edge crossings, range crossings). On each
//! resulting sub-interval `near` follows a single straight edge, so the
//! shadow restricted to it is the convex cell bounded by two rays, that edge
//! and the range arc. The arc is replaced by an outer polygonal chain.

use alloc::vec::Vec;
use core::f64::consts::{PI, TAU};

use super::{GeometryError, Point2, Polygon};

/// Maximum radial gap between the range arc and its polygonal replacement.
pub const DEFAULT_CHORD_TOLERANCE: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShadowOptions {
    pub chord_tolerance: f64,
}

impl Default for ShadowOptions {
    fn default() -> Self {
        Self {
            chord_tolerance: DEFAULT_CHORD_TOLERANCE,
        }
    }
}

/// Shadow cast by a single occluder, as simple polygons.
///
/// Usually a single polygon; an occluder that crosses the range circle
/// twice can split its shadow into separate pieces. Empty when the occluder
/// lies beyond `max_range`. The occluder is replaced by its convex hull.
pub fn occlusion_shadow(
    origin: Point2,
    occluder: &Polygon,
    max_range: f64,
) -> Result<Vec<Polygon>, GeometryError> {
    check_range(max_range)?;
    if occluder.contains(origin) {
        return Err(GeometryError::OriginInsideOccluder);
    }
    let hull = hull_of(occluder);
    let cut = (centroid_of(&hull) - origin).angle() - PI;
    let env = Envelope::build(origin, &[hull], cut, max_range);
    Ok(env.run_polygons(ShadowOptions::default().chord_tolerance))
}

/// Merged shadow of several occluders as a list of disjoint convex cells.
///
/// Overlapping shadows are merged: every shadowed point belongs to exactly
/// one cell (up to shared edges).
pub fn shadow_cells(
    origin: Point2,
    occluders: &[Polygon],
    max_range: f64,
    options: ShadowOptions,
) -> Result<Vec<Polygon>, GeometryError> {
    check_range(max_range)?;
    if occluders.iter().any(|o| o.contains(origin)) {
        return Err(GeometryError::OriginInsideOccluder);
    }
    let hulls: Vec<Vec<Point2>> = occluders
        .iter()
        .map(hull_of)
        .filter(|h| distance_to_hull(origin, h) < max_range)
        .collect();
    if hulls.is_empty() {
        return Ok(Vec::new());
    }
    let cut = choose_cut(origin, &hulls);
    let env = Envelope::build(origin, &hulls, cut, max_range);
    Ok(env.cells(options.chord_tolerance))
}

fn check_range(r: f64) -> Result<(), GeometryError> {
    if r.is_finite() && r > 0.0 {
        Ok(())
    } else {
        Err(GeometryError::InvalidRange(r))
    }
}

fn hull_of(p: &Polygon) -> Vec<Point2> {
    if p.is_convex() {
        p.vertices().to_vec()
    } else {
        super::convex_hull_points(p.vertices())
    }
}

fn centroid_of(hull: &[Point2]) -> Point2 {
    let n = hull.len() as f64;
    let s = hull.iter().fold(Point2::default(), |acc, &p| acc + p);
    s * (1.0 / n)
}

fn distance_to_hull(origin: Point2, hull: &[Point2]) -> f64 {
    let n = hull.len();
    (0..n)
        .map(|i| super::point_segment_distance(origin, hull[i], hull[(i + 1) % n]))
        .fold(f64::INFINITY, f64::min)
}

fn wrap_tau(a: f64) -> f64 {
    let r = libm::fmod(a, TAU);
    if r < 0.0 {
        r + TAU
    } else {
        r
    }
}

/// Absolute angular interval `(start, width)` subtended by a hull.
fn subtended(origin: Point2, hull: &[Point2]) -> (f64, f64) {
    let center = (centroid_of(hull) - origin).angle();
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &v in hull {
        let d = v - origin;
        let dc = Point2::polar(1.0, center);
        let phi = libm::atan2(dc.cross(d), dc.dot(d));
        lo = lo.min(phi);
        hi = hi.max(phi);
    }
    (center + lo, hi - lo)
}

/// Frame origin placed in an angular gap, so no interval wraps around.
fn choose_cut(origin: Point2, hulls: &[Vec<Point2>]) -> f64 {
    let spans: Vec<(f64, f64)> = hulls
        .iter()
        .map(|h| {
            let (s, w) = subtended(origin, h);
            (wrap_tau(s), w)
        })
        .collect();
    let covered = |a: f64| {
        spans.iter().any(|&(s, w)| {
            let rel = wrap_tau(a - s);
            rel < w + 1e-12
        })
    };
    for &(s, w) in &spans {
        let candidate = wrap_tau(s + w + 1e-9);
        if !covered(candidate) {
            return candidate;
        }
    }
    0.0
}

#[derive(Debug, Clone, Copy)]
struct Cell {
    a: f64,
    b: f64,
    edge: (Point2, Point2),
}

struct Envelope {
    origin: Point2,
    cut: f64,
    range: f64,
    /// consecutive angular sub-intervals; `None` where nothing is shadowed
    slots: Vec<(f64, f64, Option<Cell>)>,
}

impl Envelope {
    fn build(origin: Point2, hulls: &[Vec<Point2>], cut: f64, range: f64) -> Self {
        let rel = |p: Point2| wrap_tau((p - origin).angle() - cut);

        // per hull relative intervals (split when wrapping past 2π)
        let mut intervals: Vec<Vec<(f64, f64)>> = Vec::with_capacity(hulls.len());
        let mut crit: Vec<f64> = alloc::vec![0.0, TAU];
        for h in hulls {
            let (s, w) = subtended(origin, h);
            let a = wrap_tau(s - cut);
            let b = a + w;
            let mut iv = Vec::new();
            if b <= TAU {
                iv.push((a, b));
            } else {
                iv.push((a, TAU));
                iv.push((0.0, b - TAU));
            }
            for &(x, y) in &iv {
                crit.push(x);
                crit.push(y);
            }
            intervals.push(iv);
            for &v in h {
                crit.push(rel(v));
            }
            let n = h.len();
            for i in 0..n {
                let (p, q) = (h[i], h[(i + 1) % n]);
                for t in circle_crossings(origin, range, p, q) {
                    crit.push(rel(p.lerp(q, t)));
                }
            }
        }
        for (i, hi) in hulls.iter().enumerate() {
            for hj in hulls.iter().skip(i + 1) {
                for k in 0..hi.len() {
                    let (a, b) = (hi[k], hi[(k + 1) % hi.len()]);
                    for l in 0..hj.len() {
                        let (c, d) = (hj[l], hj[(l + 1) % hj.len()]);
                        if let Some(x) = super::segment_intersection(a, b, c, d) {
                            crit.push(rel(x));
                        }
                    }
                }
            }
        }
        crit.retain(|a| (0.0..=TAU).contains(a));
        crit.sort_by(f64::total_cmp);
        crit.dedup_by(|a, b| (*a - *b).abs() <= 1e-13);

        let mut slots = Vec::with_capacity(crit.len());
        for w in crit.windows(2) {
            let (a, b) = (w[0], w[1]);
            if b - a <= 1e-12 {
                continue;
            }
            let mid = 0.5 * (a + b);
            let dir = Point2::polar(1.0, cut + mid);
            let mut best: Option<(f64, (Point2, Point2))> = None;
            for (h, iv) in hulls.iter().zip(&intervals) {
                if !iv.iter().any(|&(x, y)| mid > x && mid < y) {
                    continue;
                }
                if let Some((t, e)) = ray_exit(origin, dir, h) {
                    if best.map_or(true, |(bt, _)| t < bt) {
                        best = Some((t, e));
                    }
                }
            }
            let cell = match best {
                Some((t, edge)) if t < range => Some(Cell { a, b, edge }),
                _ => None,
            };
            slots.push((a, b, cell));
        }
        Self {
            origin,
            cut,
            range,
            slots,
        }
    }

    fn near_point(&self, angle: f64, edge: (Point2, Point2)) -> Point2 {
        let d = Point2::polar(1.0, self.cut + angle);
        let (p, q) = edge;
        let e = q - p;
        let denom = d.cross(e);
        let t = if denom.abs() > 1e-15 * e.norm() {
            (p - self.origin).cross(e) / denom
        } else {
            (p - self.origin).norm().min((q - self.origin).norm())
        };
        self.origin + d * t.clamp(0.0, self.range)
    }

    /// Outer polygonal replacement of the range arc, running from angle `b`
    /// down to angle `a`.
    fn outer_arc(&self, a: f64, b: f64, tol: f64) -> Vec<Point2> {
        let r = self.range;
        let max_step = 2.0 * libm::acos(r / (r + tol));
        let m = libm::ceil((b - a) / max_step).max(1.0) as usize;
        let h = (b - a) / m as f64;
        let rv = r / libm::cos(0.5 * h);
        let mut out = Vec::with_capacity(m + 2);
        out.push(self.origin + Point2::polar(r, self.cut + b));
        for k in (0..m).rev() {
            out.push(self.origin + Point2::polar(rv, self.cut + a + (k as f64 + 0.5) * h));
        }
        out.push(self.origin + Point2::polar(r, self.cut + a));
        out
    }

    fn cells(&self, tol: f64) -> Vec<Polygon> {
        self.slots
            .iter()
            .filter_map(|&(_, _, c)| c)
            .filter_map(|c| {
                let mut v = alloc::vec![self.near_point(c.a, c.edge), self.near_point(c.b, c.edge)];
                v.extend(self.outer_arc(c.a, c.b, tol));
                Polygon::new_unchecked_simple(v)
            })
            .collect()
    }

    fn run_polygons(&self, tol: f64) -> Vec<Polygon> {
        let mut out = Vec::new();
        let mut run: Vec<Cell> = Vec::new();
        let flush = |run: &mut Vec<Cell>, out: &mut Vec<Polygon>| {
            if run.is_empty() {
                return;
            }
            let mut v = Vec::with_capacity(2 * run.len() + 8);
            for c in run.iter() {
                v.push(self.near_point(c.a, c.edge));
                v.push(self.near_point(c.b, c.edge));
            }
            v.extend(self.outer_arc(run[0].a, run[run.len() - 1].b, tol));
            if let Some(p) = Polygon::new_unchecked_simple(v) {
                out.push(p);
            }
            run.clear();
        };
        for &(a, _, cell) in &self.slots {
            match cell {
                Some(c) => {
                    if let Some(last) = run.last() {
                        if (last.b - a).abs() > 1e-12 {
                            flush(&mut run, &mut out);
                        }
                    }
                    run.push(c);
                }
                None => flush(&mut run, &mut out),
            }
        }
        flush(&mut run, &mut out);
        out
    }
}

/// Largest ray parameter at which the ray leaves the convex hull.
fn ray_exit(origin: Point2, dir: Point2, hull: &[Point2]) -> Option<(f64, (Point2, Point2))> {
    let n = hull.len();
    let mut best: Option<(f64, (Point2, Point2))> = None;
    for i in 0..n {
        let (p, q) = (hull[i], hull[(i + 1) % n]);
        let e = q - p;
        let denom = dir.cross(e);
        if denom.abs() <= 1e-15 * e.norm() {
            continue;
        }
        let w = p - origin;
        let t = w.cross(e) / denom;
        let u = w.cross(dir) / denom;
        if t > 0.0 && (-1e-12..=1.0 + 1e-12).contains(&u) && best.map_or(true, |(bt, _)| t > bt) {
            best = Some((t, (p, q)));
        }
    }
    best
}

/// Parameters `t ∈ [0, 1]` where segment `p + t (q - p)` meets the circle.
fn circle_crossings(center: Point2, r: f64, p: Point2, q: Point2) -> Vec<f64> {
    let d = q - p;
    let f = p - center;
    let a = d.dot(d);
    let b = 2.0 * f.dot(d);
    let c = f.dot(f) - r * r;
    let disc = b * b - 4.0 * a * c;
    let mut out = Vec::new();
    if a <= 0.0 || disc < 0.0 {
        return out;
    }
    let s = libm::sqrt(disc);
    for t in [(-b - s) / (2.0 * a), (-b + s) / (2.0 * a)] {
        if (0.0..=1.0).contains(&t) {
            out.push(t);
        }
    }
    out
}
