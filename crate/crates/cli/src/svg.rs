//! SVG plots of simulation logs.
//!
//! Output depends only on the input data, so identical logs give
//! byte-identical documents.

use std::fmt::Write;
use std::str::FromStr;

use occmpc_core::geometry::{clip, Point2, Polygon};
use occmpc_core::scene::MarkingKind;
use occmpc_core::sim::SimLog;

use crate::export::Row;

const WIDTH: f64 = 900.0;
const HEIGHT: f64 = 360.0;
const MARGIN_L: f64 = 70.0;
const MARGIN_R: f64 = 20.0;
const MARGIN_T: f64 = 40.0;
const MARGIN_B: f64 = 50.0;
/// Footprint snapshot spacing in cycles.
const SNAPSHOT_EVERY: usize = 10;

const STYLE: &str = "\
.axis{stroke:#000;stroke-width:1}\
.grid{stroke:#ddd;stroke-width:0.5}\
.road{fill:#f2f2f2;stroke:none}\
.walk{fill:#e0e6d8;stroke:none}\
.edge{stroke:#000;stroke-width:1.5;fill:none}\
.solid{stroke:#555;stroke-width:1.5;fill:none}\
.dashed{stroke:#555;stroke-width:1.5;stroke-dasharray:8 6;fill:none}\
.static{fill:#4a6fa5;stroke:#1d3557}\
.dynamic{fill:#8fb3de;stroke:#1d3557}\
.occlusion{fill:#999;fill-opacity:0.35;stroke:none}\
.occupancy{fill:#d62828;fill-opacity:0.3;stroke:#d62828;stroke-width:0.5}\
.plan{stroke:#2a9d8f;stroke-width:1.5;stroke-dasharray:4 3;fill:none}\
.path{stroke:#e76f51;stroke-width:2;fill:none}\
.ego{fill:none;stroke:#e76f51;stroke-width:1}\
.series{stroke:#264653;stroke-width:1.5;fill:none}\
text{font-family:sans-serif;font-size:12px}";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlotKind {
    Trajectory,
    Slack,
}

impl PlotKind {
    pub fn name(self) -> &'static str {
        match self {
            PlotKind::Trajectory => "trajectory",
            PlotKind::Slack => "slack",
        }
    }
}

impl FromStr for PlotKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "trajectory" => Ok(PlotKind::Trajectory),
            "slack" => Ok(PlotKind::Slack),
            _ => Err(format!("unknown plot kind {s:?}, expected trajectory or slack")),
        }
    }
}

/// A polyline or polygon in data coordinates, drawn with a CSS class.
#[derive(Debug, Clone, PartialEq)]
pub struct Shape {
    pub class: &'static str,
    pub points: Vec<(f64, f64)>,
    pub closed: bool,
}

impl Shape {
    fn polygon(class: &'static str, p: &Polygon) -> Self {
        Self {
            class,
            points: p.vertices().iter().map(|v| (v.x, v.y)).collect(),
            closed: true,
        }
    }

    fn line(class: &'static str, points: Vec<(f64, f64)>) -> Self {
        Self {
            class,
            points,
            closed: false,
        }
    }

    fn rect(class: &'static str, x0: f64, x1: f64, y0: f64, y1: f64) -> Self {
        Self {
            class,
            points: vec![(x0, y0), (x1, y0), (x1, y1), (x0, y1)],
            closed: true,
        }
    }
}

/// Everything a plot draws, in drawing order.
#[derive(Debug, Clone, PartialEq)]
pub struct PlotData {
    pub title: String,
    pub x_label: &'static str,
    pub y_label: &'static str,
    pub shapes: Vec<Shape>,
}

impl PlotData {
    fn empty(kind: PlotKind) -> Self {
        let (x_label, y_label) = match kind {
            PlotKind::Trajectory => ("x [m]", "y [m]"),
            PlotKind::Slack => ("t [s]", "slack cost"),
        };
        Self {
            title: kind.name().to_string(),
            x_label,
            y_label,
            shapes: Vec::new(),
        }
    }

    pub fn from_log(log: &SimLog, kind: PlotKind) -> Self {
        let mut d = Self::empty(kind);
        if log.cycles.is_empty() {
            return d;
        }
        match kind {
            PlotKind::Trajectory => trajectory(log, &mut d),
            PlotKind::Slack => {
                let pts = log.cycles.iter().map(|c| (c.t, c.slack_cost)).collect();
                d.shapes.push(Shape::line("series", pts));
            }
        }
        d
    }

    /// Plot from exported CSV rows. Without the scene only the path is
    /// drawn; `reference_y` shifts `e` to world ordinates.
    pub fn from_rows(rows: &[Row], kind: PlotKind, reference_y: f64) -> Self {
        let mut d = Self::empty(kind);
        if rows.is_empty() {
            return d;
        }
        let pts = match kind {
            PlotKind::Trajectory => rows.iter().map(|r| (r.x_station, reference_y + r.e)).collect(),
            PlotKind::Slack => rows.iter().map(|r| (r.t, r.slack_cost)).collect(),
        };
        d.shapes.push(Shape::line(
            match kind {
                PlotKind::Trajectory => "path",
                PlotKind::Slack => "series",
            },
            pts,
        ));
        d
    }
}

fn trajectory(log: &SimLog, d: &mut PlotData) {
    let scene = &log.initial;
    let ego = &scene.ego;
    let first = &log.cycles[0];
    let mut path: Vec<(f64, f64)> = log
        .cycles
        .iter()
        .map(|c| (c.station, log.reference_y + c.state.e))
        .collect();
    path.push((log.final_station, log.reference_y + log.final_state.e));

    let x_min = ego.pose.x - ego.length;
    let mut x_max = log.final_station + ego.length;
    let dynamics: Vec<Polygon> = scene.dynamics.iter().map(|o| o.world_footprint()).collect();
    for p in scene.statics.iter().chain(&dynamics) {
        x_max = x_max.max(p.bbox().max.x);
    }
    if let Some(plan) = &first.plan {
        x_max = x_max.max(first.station + first.speed * plan.dt * plan.horizon() as f64);
    }

    let road = &scene.road;
    for w in &road.walkable {
        d.shapes.push(Shape::rect("walk", x_min, x_max, w.y_min, w.y_max));
    }
    d.shapes.push(Shape::rect("road", x_min, x_max, road.drivable.y_min, road.drivable.y_max));
    for m in &road.markings {
        let class = match m.kind {
            MarkingKind::RoadEdge => "edge",
            MarkingKind::Solid => "solid",
            MarkingKind::Dashed => "dashed",
        };
        let y = m.lateral_offset;
        d.shapes.push(Shape::line(class, vec![(x_min, y), (x_max, y)]));
    }
    let (mut y_min, mut y_max) = (road.drivable.y_min, road.drivable.y_max);
    for w in &road.walkable {
        y_min = y_min.min(w.y_min);
        y_max = y_max.max(w.y_max);
    }
    let (lo, hi) = (Point2::new(x_min, y_min - 1.0), Point2::new(x_max, y_max + 1.0));
    for p in first.occlusions.iter().flat_map(|p| clip_to(p, lo, hi)) {
        d.shapes.push(Shape::polygon("occlusion", &p));
    }
    for p in first.occupancy.iter().flat_map(|p| clip_to(p, lo, hi)) {
        d.shapes.push(Shape::polygon("occupancy", &p));
    }
    for p in &scene.statics {
        d.shapes.push(Shape::polygon("static", p));
    }
    for p in &dynamics {
        d.shapes.push(Shape::polygon("dynamic", p));
    }
    if let Some(plan) = &first.plan {
        let pts = plan
            .states
            .iter()
            .enumerate()
            .map(|(k, x)| (first.station + first.speed * plan.dt * k as f64, log.reference_y + x.e))
            .collect();
        d.shapes.push(Shape::line("plan", pts));
    }
    for c in log.cycles.iter().step_by(SNAPSHOT_EVERY) {
        let mut pose = *ego;
        pose.pose.x = c.station;
        pose.pose.y = log.reference_y + c.state.e;
        pose.pose.heading = c.state.dpsi;
        d.shapes.push(Shape::polygon("ego", &pose.footprint()));
    }
    d.shapes.push(Shape::line("path", path));
}

/// Parts of a polygon inside the plotted window. Shadows reach to the
/// sensor range, far past the road.
fn clip_to(p: &Polygon, min: Point2, max: Point2) -> Vec<Polygon> {
    Polygon::rectangle(min, max)
        .and_then(|w| clip(p, &w))
        .unwrap_or_else(|_| vec![p.clone()])
}

fn bounds(shapes: &[Shape]) -> ((f64, f64), (f64, f64)) {
    let mut xs = (f64::INFINITY, f64::NEG_INFINITY);
    let mut ys = (f64::INFINITY, f64::NEG_INFINITY);
    for (x, y) in shapes.iter().flat_map(|s| s.points.iter()) {
        if x.is_finite() && y.is_finite() {
            xs = (xs.0.min(*x), xs.1.max(*x));
            ys = (ys.0.min(*y), ys.1.max(*y));
        }
    }
    let fix = |(lo, hi): (f64, f64)| {
        if !lo.is_finite() {
            (0.0, 1.0)
        } else if hi - lo < 1e-9 {
            (lo - 0.5, hi + 0.5)
        } else {
            (lo, hi)
        }
    };
    (fix(xs), fix(ys))
}

/// Tick positions at 1, 2 or 5 times a power of ten.
fn ticks(lo: f64, hi: f64) -> Vec<f64> {
    let raw = (hi - lo) / 8.0;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0]
        .iter()
        .map(|m| m * mag)
        .find(|s| *s >= raw)
        .unwrap_or(10.0 * mag);
    let mut v = Vec::new();
    let mut t = (lo / step).ceil() * step;
    while t <= hi + 1e-9 * step {
        v.push(if t.abs() < 1e-9 * step { 0.0 } else { t });
        t += step;
    }
    v
}

fn num(v: f64) -> String {
    let s = format!("{v:.2}");
    if s == "-0.00" {
        "0.00".into()
    } else {
        s
    }
}

fn tick_label(v: f64) -> String {
    let s = format!("{v}");
    if s.len() > 8 {
        format!("{v:.3e}")
    } else {
        s
    }
}

pub fn render(d: &PlotData) -> String {
    let ((x0, x1), (y0, y1)) = bounds(&d.shapes);
    let pw = WIDTH - MARGIN_L - MARGIN_R;
    let ph = HEIGHT - MARGIN_T - MARGIN_B;
    let sx = |x: f64| MARGIN_L + (x - x0) / (x1 - x0) * pw;
    let sy = |y: f64| MARGIN_T + (y1 - y) / (y1 - y0) * ph;

    let mut s = String::new();
    let _ = writeln!(
        s,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">",
        w = WIDTH,
        h = HEIGHT
    );
    let _ = writeln!(s, "<style>{STYLE}</style>");
    let _ = writeln!(s, "<title>{}</title>", d.title);
    let _ = writeln!(
        s,
        "<clipPath id=\"plot\"><rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\"/></clipPath>",
        num(MARGIN_L),
        num(MARGIN_T),
        num(pw),
        num(ph)
    );

    let _ = writeln!(s, "<g class=\"ticks\">");
    for t in ticks(x0, x1) {
        let x = num(sx(t));
        let _ = writeln!(
            s,
            "<line class=\"grid\" x1=\"{x}\" y1=\"{}\" x2=\"{x}\" y2=\"{}\"/><text x=\"{x}\" y=\"{}\" text-anchor=\"middle\">{}</text>",
            num(MARGIN_T),
            num(MARGIN_T + ph),
            num(MARGIN_T + ph + 16.0),
            tick_label(t)
        );
    }
    for t in ticks(y0, y1) {
        let y = num(sy(t));
        let _ = writeln!(
            s,
            "<line class=\"grid\" x1=\"{}\" y1=\"{y}\" x2=\"{}\" y2=\"{y}\"/><text x=\"{}\" y=\"{y}\" text-anchor=\"end\" dominant-baseline=\"middle\">{}</text>",
            num(MARGIN_L),
            num(MARGIN_L + pw),
            num(MARGIN_L - 6.0),
            tick_label(t)
        );
    }
    let _ = writeln!(s, "</g>");

    let _ = writeln!(s, "<g clip-path=\"url(#plot)\">");
    for shape in &d.shapes {
        let pts: Vec<String> = shape
            .points
            .iter()
            .filter(|(x, y)| x.is_finite() && y.is_finite())
            .map(|(x, y)| format!("{},{}", num(sx(*x)), num(sy(*y))))
            .collect();
        let tag = if shape.closed { "polygon" } else { "polyline" };
        let _ = writeln!(s, "<{tag} class=\"{}\" points=\"{}\"/>", shape.class, pts.join(" "));
    }
    let _ = writeln!(s, "</g>");

    let _ = writeln!(
        s,
        "<line class=\"axis\" x1=\"{l}\" y1=\"{b}\" x2=\"{r}\" y2=\"{b}\"/>\n<line class=\"axis\" x1=\"{l}\" y1=\"{t}\" x2=\"{l}\" y2=\"{b}\"/>",
        l = num(MARGIN_L),
        r = num(MARGIN_L + pw),
        t = num(MARGIN_T),
        b = num(MARGIN_T + ph)
    );
    let _ = writeln!(
        s,
        "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{}</text>",
        num(MARGIN_L + pw / 2.0),
        num(HEIGHT - 10.0),
        d.x_label
    );
    let _ = writeln!(
        s,
        "<text x=\"16\" y=\"{y}\" text-anchor=\"middle\" transform=\"rotate(-90 16 {y})\">{}</text>",
        d.y_label,
        y = num(MARGIN_T + ph / 2.0)
    );
    let _ = writeln!(
        s,
        "<text x=\"{}\" y=\"24\" text-anchor=\"middle\">{}</text>",
        num(WIDTH / 2.0),
        d.title
    );
    s.push_str("</svg>\n");
    s
}

pub fn emit_plot(log: &SimLog, kind: PlotKind) -> String {
    render(&PlotData::from_log(log, kind))
}
