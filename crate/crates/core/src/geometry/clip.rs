use alloc::vec;
use alloc::vec::Vec;

use super::{GeometryError, Point2, Polygon};

/// Intersection of `subject` with a convex `window`.
///
/// Convex subjects are clipped directly (Sutherland-Hodgman). Non-convex
/// subjects are first split into convex pieces, so the result may hold
/// several polygons whose union is the intersection. Slivers below
/// [`super::AREA_EPS`] are dropped.
pub fn clip(subject: &Polygon, window: &Polygon) -> Result<Vec<Polygon>, GeometryError> {
    if !window.is_convex() {
        return Err(GeometryError::NonConvexWindow);
    }
    if !subject.bbox().intersects(&window.bbox()) {
        return Ok(Vec::new());
    }
    if subject.vertices().iter().all(|&p| window.contains(p)) {
        return Ok(vec![subject.clone()]);
    }
    if subject.is_convex() {
        return Ok(sutherland_hodgman(subject, window).into_iter().collect());
    }
    Ok(convex_decomposition(subject)
        .iter()
        .filter_map(|piece| sutherland_hodgman(piece, window))
        .collect())
}

/// Clips every polygon of `subjects` and concatenates the results.
pub fn clip_all(subjects: &[Polygon], window: &Polygon) -> Result<Vec<Polygon>, GeometryError> {
    let mut out = Vec::new();
    for s in subjects {
        out.extend(clip(s, window)?);
    }
    Ok(out)
}

fn sutherland_hodgman(subject: &Polygon, window: &Polygon) -> Option<Polygon> {
    let mut output: Vec<Point2> = subject.vertices().to_vec();
    for (a, b) in window.edges() {
        if output.is_empty() {
            break;
        }
        let edge = b - a;
        let scale = edge.norm().max(1e-300);
        let side = |p: Point2| edge.cross(p - a) / scale;
        let input = core::mem::take(&mut output);
        let n = input.len();
        for i in 0..n {
            let cur = input[i];
            let prev = input[(i + n - 1) % n];
            let (sc, sp) = (side(cur), side(prev));
            let cur_in = sc >= -1e-12;
            let prev_in = sp >= -1e-12;
            if cur_in {
                if !prev_in {
                    output.push(prev.lerp(cur, sp / (sp - sc)));
                }
                output.push(cur);
            } else if prev_in {
                output.push(prev.lerp(cur, sp / (sp - sc)));
            }
        }
    }
    Polygon::new_unchecked_simple(drop_collinear(output))
}

fn drop_collinear(mut v: Vec<Point2>) -> Vec<Point2> {
    let mut changed = true;
    while changed && v.len() > 3 {
        changed = false;
        let n = v.len();
        for i in 0..n {
            let a = v[(i + n - 1) % n];
            let b = v[i];
            let c = v[(i + 1) % n];
            let len = (c - a).norm().max(1e-300);
            if ((b - a).cross(c - a) / len).abs() <= 1e-12 && (b - a).dot(c - b) >= 0.0 {
                v.remove(i);
                changed = true;
                break;
            }
        }
    }
    v
}

/// Splits a simple polygon into convex pieces: ear-clipping triangulation
/// followed by greedy merging across diagonals while the union stays convex.
pub fn convex_decomposition(poly: &Polygon) -> Vec<Polygon> {
    if poly.is_convex() {
        return vec![poly.clone()];
    }
    let verts = poly.vertices();
    let mut pieces: Vec<Vec<usize>> = ear_clip(verts);
    loop {
        let mut merged = false;
        'outer: for i in 0..pieces.len() {
            for j in (i + 1)..pieces.len() {
                if let Some(m) = try_merge(&pieces[i], &pieces[j], verts) {
                    pieces[i] = m;
                    pieces.swap_remove(j);
                    merged = true;
                    break 'outer;
                }
            }
        }
        if !merged {
            break;
        }
    }
    pieces
        .into_iter()
        .filter_map(|idx| Polygon::new_unchecked_simple(idx.iter().map(|&k| verts[k]).collect()))
        .collect()
}

fn ear_clip(verts: &[Point2]) -> Vec<Vec<usize>> {
    let mut idx: Vec<usize> = (0..verts.len()).collect();
    let mut tris = Vec::new();
    while idx.len() > 3 {
        let m = idx.len();
        let mut clipped = false;
        for i in 0..m {
            let (ip, ic, inx) = (idx[(i + m - 1) % m], idx[i], idx[(i + 1) % m]);
            let (a, b, c) = (verts[ip], verts[ic], verts[inx]);
            let turn = (b - a).cross(c - b);
            let scale = (b - a).norm() * (c - b).norm();
            if turn.abs() <= 1e-14 * scale.max(1e-300) {
                // collinear vertex, no area to cut
                idx.remove(i);
                clipped = true;
                break;
            }
            if turn < 0.0 {
                continue;
            }
            let blocked = idx.iter().any(|&k| {
                k != ip && k != ic && k != inx && point_in_triangle(verts[k], a, b, c)
            });
            if !blocked {
                tris.push(vec![ip, ic, inx]);
                idx.remove(i);
                clipped = true;
                break;
            }
        }
        if !clipped {
            // numerically stuck; keep the remainder as one piece
            tris.push(idx.clone());
            return tris;
        }
    }
    tris.push(idx);
    tris
}

fn point_in_triangle(p: Point2, a: Point2, b: Point2, c: Point2) -> bool {
    let d1 = (b - a).cross(p - a);
    let d2 = (c - b).cross(p - b);
    let d3 = (a - c).cross(p - c);
    d1 >= 0.0 && d2 >= 0.0 && d3 >= 0.0
}

fn try_merge(p: &[usize], q: &[usize], verts: &[Point2]) -> Option<Vec<usize>> {
    let np = p.len();
    let nq = q.len();
    for i in 0..np {
        let (a, b) = (p[i], p[(i + 1) % np]);
        for j in 0..nq {
            if q[j] == b && q[(j + 1) % nq] == a {
                // p rotated to run b .. a, then q's interior from after a to before b
                let mut merged: Vec<usize> = (0..np).map(|k| p[(i + 1 + k) % np]).collect();
                merged.extend((2..nq).map(|k| q[(j + k) % nq]));
                return is_convex_loop(&merged, verts).then_some(merged);
            }
        }
    }
    None
}

fn is_convex_loop(idx: &[usize], verts: &[Point2]) -> bool {
    let n = idx.len();
    (0..n).all(|i| {
        let a = verts[idx[i]];
        let b = verts[idx[(i + 1) % n]];
        let c = verts[idx[(i + 2) % n]];
        (b - a).cross(c - b) >= -1e-12
    })
}
