//! Scenario files.
//!
//! A scenario is a TOML document. All quantities are SI: meters, seconds,
//! radians, m/s, m/s². Every key listed below is required unless marked
//! optional; unknown keys are rejected.
//!
//! ```toml
//! [road]
//! drivable = [-3.5, 3.5]              # lateral band [y_min, y_max]
//! walkable = [[-6.0, -3.5]]           # sidewalks, may be empty
//! markings = [{ offset = 0.0, kind = "dashed" }]   # solid | dashed | road_edge
//!
//! [ego]
//! x = 0.0
//! y = -1.75
//! heading = 0.0
//! speed = 8.0
//! max_decel = 9.0
//! length = 4.5
//! width = 1.8
//!
//! [sensor]
//! range = 25.0
//! fov = 6.283185307179586
//! mount = [0.0, 0.0]                  # body frame
//!
//! [[objects]]                         # write `objects = []` for none
//! kind = "static"                     # static | vehicle | pedestrian
//! polygon = [[20.0, -3.9], [24.0, -3.9], [24.0, -2.05], [20.0, -2.05]]
//! # vehicles and pedestrians instead give x, y, heading, length, width,
//! # speed and max_accel
//!
//! [hidden_params]
//! v0 = 1.3
//! a_wc = 0.3
//! horizon = 1.5                       # prediction horizon
//! lateral_rate = 0.2                  # spreading of perceived vehicles
//!
//! [mpc]
//! horizon = 60                        # steps
//! dt = 0.1
//! weights = [1.0, 5.0, 5.0, 100.0]    # Q diagonal over e, dpsi, beta, omega
//! input_weight = 100.0
//! slack_factor = 3.0                  # s = factor * max(Q, R)
//! slack_bound = 3.0                   # inf for unbounded
//! steer_limit = 0.6
//!
//! [vehicle]                           # optional, nominal car by default
//! mass = 1500.0
//! yaw_inertia = 2500.0
//! lf = 1.2
//! lr = 1.5
//! cf = 80000.0
//! cr = 80000.0
//!
//! [tactical]
//! maneuver = "auto"                   # auto or a maneuver name
//! centerline = "auto"                 # auto | hard | soft | ignored
//! occupancy = "soft"                  # hard | soft
//! passing_side = "left_only"          # left_only | both
//! safety_gate = "enforce"             # enforce | log_only
//! cruise_speed = 8.0                  # optional, current speed by default
//!
//! [sim]
//! cycles = 60
//! accel = 2.0                         # optional
//! disturbance = [0.0, 0.0, 0.0, 0.0]  # optional amplitude per state
//! seed = 0                            # optional
//! ```

use std::collections::BTreeSet;
use std::f64::consts::TAU;
use std::path::Path;

use occmpc_core::geometry::{Point2, Polygon};
use occmpc_core::mpc::MpcConfig;
use occmpc_core::prediction::{HiddenObjectParams, PredictionConfig};
use occmpc_core::scene::{
    Band, DynamicObject, EgoState, LaneMarking, MarkingKind, ObjectKind, Pose, RoadModel, Scene, SensorSpec,
};
use occmpc_core::sim::{Disturbance, SafetyGate, SimConfig};
use occmpc_core::tactical::{Maneuver, OccupancyTreatment, PassingSide, Treatment};
use occmpc_core::vehicle::SingleTrackParams;
use toml::{Table, Value};

#[derive(Debug, thiserror::Error)]
pub enum ScenarioError {
    #[error("cannot read {0}: {1}")]
    Io(String, std::io::Error),
    #[error("syntax error: {0}")]
    Syntax(String),
    #[error("missing key {0}")]
    Missing(String),
    #[error("unknown key {0}")]
    Unknown(String),
    #[error("key {key}: expected {expected}")]
    Type { key: String, expected: &'static str },
    #[error("key {key}: {msg}")]
    Range { key: String, msg: String },
    #[error("invalid scenario: {0}")]
    Invalid(String),
}

impl ScenarioError {
    /// Key the error refers to, if any.
    pub fn key(&self) -> Option<&str> {
        match self {
            ScenarioError::Missing(k) | ScenarioError::Unknown(k) => Some(k),
            ScenarioError::Type { key, .. } | ScenarioError::Range { key, .. } => Some(key),
            _ => None,
        }
    }
}

type Result<T> = std::result::Result<T, ScenarioError>;

/// Everything needed to run one simulation.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub scene: Scene,
    pub sim: SimConfig,
    /// Slack weight relative to the largest state or input weight.
    pub slack_factor: f64,
    /// Prediction horizon in seconds as written in the file.
    pub prediction_horizon: f64,
}

pub fn load(path: &Path) -> Result<Scenario> {
    let text = std::fs::read_to_string(path).map_err(|e| ScenarioError::Io(path.display().to_string(), e))?;
    parse(&text)
}

pub fn parse(text: &str) -> Result<Scenario> {
    let table: Table = text.parse().map_err(|e: toml::de::Error| ScenarioError::Syntax(e.to_string()))?;
    from_table(&table)
}

/// Table reader that remembers which keys were consumed.
struct Section<'a> {
    path: String,
    table: &'a Table,
    used: BTreeSet<String>,
}

impl<'a> Section<'a> {
    fn new(path: impl Into<String>, table: &'a Table) -> Self {
        Self {
            path: path.into(),
            table,
            used: BTreeSet::new(),
        }
    }

    fn key(&self, k: &str) -> String {
        if self.path.is_empty() {
            k.to_string()
        } else {
            format!("{}.{k}", self.path)
        }
    }

    fn opt(&mut self, k: &str) -> Option<&'a Value> {
        self.used.insert(k.to_string());
        self.table.get(k)
    }

    fn req(&mut self, k: &str) -> Result<&'a Value> {
        self.opt(k).ok_or_else(|| ScenarioError::Missing(self.key(k)))
    }

    fn float_of(&self, k: &str, v: &Value) -> Result<f64> {
        match v {
            Value::Float(f) => Ok(*f),
            Value::Integer(i) => Ok(*i as f64),
            _ => Err(ScenarioError::Type {
                key: self.key(k),
                expected: "a number",
            }),
        }
    }

    fn f64(&mut self, k: &str) -> Result<f64> {
        let v = self.req(k)?;
        let f = self.float_of(k, v)?;
        if f.is_nan() {
            return Err(self.range(k, "must not be NaN"));
        }
        Ok(f)
    }

    fn opt_f64(&mut self, k: &str) -> Result<Option<f64>> {
        if self.table.contains_key(k) {
            self.f64(k).map(Some)
        } else {
            self.used.insert(k.to_string());
            Ok(None)
        }
    }

    fn finite(&mut self, k: &str) -> Result<f64> {
        let f = self.f64(k)?;
        if !f.is_finite() {
            return Err(self.range(k, "must be finite"));
        }
        Ok(f)
    }

    fn positive(&mut self, k: &str) -> Result<f64> {
        let f = self.finite(k)?;
        if f <= 0.0 {
            return Err(self.range(k, &format!("must be > 0, got {f}")));
        }
        Ok(f)
    }

    fn non_negative(&mut self, k: &str) -> Result<f64> {
        let f = self.finite(k)?;
        if f < 0.0 {
            return Err(self.range(k, &format!("must be >= 0, got {f}")));
        }
        Ok(f)
    }

    fn usize(&mut self, k: &str) -> Result<usize> {
        match self.req(k)? {
            Value::Integer(i) if *i >= 0 => Ok(*i as usize),
            Value::Integer(i) => Err(self.range(k, &format!("must be >= 0, got {i}"))),
            _ => Err(ScenarioError::Type {
                key: self.key(k),
                expected: "an integer",
            }),
        }
    }

    fn str(&mut self, k: &str) -> Result<&'a str> {
        match self.req(k)? {
            Value::String(s) => Ok(s),
            _ => Err(ScenarioError::Type {
                key: self.key(k),
                expected: "a string",
            }),
        }
    }

    fn floats(&mut self, k: &str, len: Option<usize>) -> Result<Vec<f64>> {
        let arr = match self.req(k)? {
            Value::Array(a) => a,
            _ => {
                return Err(ScenarioError::Type {
                    key: self.key(k),
                    expected: "an array of numbers",
                })
            }
        };
        let v = arr
            .iter()
            .map(|x| self.float_of(k, x))
            .collect::<Result<Vec<f64>>>()?;
        if let Some(n) = len {
            if v.len() != n {
                return Err(self.range(k, &format!("needs {n} values, got {}", v.len())));
            }
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(self.range(k, "values must be finite"));
        }
        Ok(v)
    }

    fn points(&mut self, k: &str) -> Result<Vec<Point2>> {
        let arr = match self.req(k)? {
            Value::Array(a) => a,
            _ => {
                return Err(ScenarioError::Type {
                    key: self.key(k),
                    expected: "an array of [x, y] pairs",
                })
            }
        };
        arr.iter()
            .map(|p| match p.as_array().map(|a| a.as_slice()) {
                Some([x, y]) => Ok(Point2::new(self.float_of(k, x)?, self.float_of(k, y)?)),
                _ => Err(ScenarioError::Type {
                    key: self.key(k),
                    expected: "an array of [x, y] pairs",
                }),
            })
            .collect()
    }

    fn table(&mut self, k: &str) -> Result<Section<'a>> {
        let key = self.key(k);
        match self.req(k)? {
            Value::Table(t) => Ok(Section::new(key, t)),
            _ => Err(ScenarioError::Type { key, expected: "a table" }),
        }
    }

    fn opt_table(&mut self, k: &str) -> Result<Option<Section<'a>>> {
        if self.table.contains_key(k) {
            self.table(k).map(Some)
        } else {
            self.used.insert(k.to_string());
            Ok(None)
        }
    }

    fn tables(&mut self, k: &str) -> Result<Vec<Section<'a>>> {
        let key = self.key(k);
        let v = self.req(k)?;
        let arr = v.as_array().ok_or(ScenarioError::Type {
            key: key.clone(),
            expected: "an array of tables",
        })?;
        arr.iter()
            .enumerate()
            .map(|(i, t)| match t {
                Value::Table(t) => Ok(Section::new(format!("{key}[{i}]"), t)),
                _ => Err(ScenarioError::Type {
                    key: format!("{key}[{i}]"),
                    expected: "a table",
                }),
            })
            .collect()
    }

    fn range(&self, k: &str, msg: &str) -> ScenarioError {
        ScenarioError::Range {
            key: self.key(k),
            msg: msg.to_string(),
        }
    }

    /// Rejects keys that were never read.
    fn finish(self) -> Result<()> {
        for k in self.table.keys() {
            if !self.used.contains(k) {
                return Err(ScenarioError::Unknown(self.key(k)));
            }
        }
        Ok(())
    }
}

fn band(s: &mut Section, k: &str) -> Result<Band> {
    let v = s.floats(k, Some(2))?;
    if !(v[0] < v[1]) {
        return Err(s.range(k, "needs y_min < y_max"));
    }
    Ok(Band::new(v[0], v[1]))
}

fn marking_kind(name: &str) -> Option<MarkingKind> {
    match name {
        "solid" => Some(MarkingKind::Solid),
        "dashed" => Some(MarkingKind::Dashed),
        "road_edge" => Some(MarkingKind::RoadEdge),
        _ => None,
    }
}

fn marking_name(kind: MarkingKind) -> &'static str {
    match kind {
        MarkingKind::Solid => "solid",
        MarkingKind::Dashed => "dashed",
        MarkingKind::RoadEdge => "road_edge",
    }
}

fn choice<T>(s: &mut Section, k: &str, parse: impl Fn(&str) -> Option<T>, expected: &'static str) -> Result<T> {
    let v = s.str(k)?;
    parse(v).ok_or_else(|| ScenarioError::Type {
        key: s.key(k),
        expected,
    })
}

fn read_road(root: &mut Section) -> Result<RoadModel> {
    let mut s = root.table("road")?;
    let drivable = band(&mut s, "drivable")?;
    let walkable = match s.req("walkable")? {
        Value::Array(a) => {
            let mut out = Vec::new();
            for (i, b) in a.iter().enumerate() {
                let key = format!("{}[{i}]", s.key("walkable"));
                let pair = b.as_array().filter(|p| p.len() == 2).ok_or(ScenarioError::Type {
                    key: key.clone(),
                    expected: "a [y_min, y_max] pair",
                })?;
                let lo = s.float_of("walkable", &pair[0])?;
                let hi = s.float_of("walkable", &pair[1])?;
                if !(lo < hi) {
                    return Err(ScenarioError::Range {
                        key,
                        msg: "needs y_min < y_max".into(),
                    });
                }
                out.push(Band::new(lo, hi));
            }
            out
        }
        _ => {
            return Err(ScenarioError::Type {
                key: s.key("walkable"),
                expected: "an array of bands",
            })
        }
    };
    let mut markings = Vec::new();
    for mut m in s.tables("markings")? {
        let lateral_offset = m.finite("offset")?;
        let kind = choice(&mut m, "kind", marking_kind, "solid, dashed or road_edge")?;
        m.finish()?;
        markings.push(LaneMarking { lateral_offset, kind });
    }
    s.finish()?;
    let road = RoadModel {
        markings,
        drivable,
        walkable,
    };
    road.validate()
        .map_err(|e| ScenarioError::Invalid(format!("road: {e}")))?;
    Ok(road)
}

fn read_ego(root: &mut Section) -> Result<EgoState> {
    let mut s = root.table("ego")?;
    let ego = EgoState {
        pose: Pose::new(s.finite("x")?, s.finite("y")?, s.finite("heading")?),
        speed: s.non_negative("speed")?,
        max_decel: s.positive("max_decel")?,
        length: s.positive("length")?,
        width: s.positive("width")?,
    };
    s.finish()?;
    Ok(ego)
}

fn read_sensor(root: &mut Section) -> Result<SensorSpec> {
    let mut s = root.table("sensor")?;
    let max_range = s.positive("range")?;
    let fov = s.positive("fov")?;
    if fov > TAU + 1e-9 {
        return Err(s.range("fov", "must not exceed a full turn"));
    }
    let m = s.floats("mount", Some(2))?;
    s.finish()?;
    Ok(SensorSpec {
        mount_offset: Point2::new(m[0], m[1]),
        max_range,
        fov: fov.min(TAU),
    })
}

fn read_objects(root: &mut Section) -> Result<(Vec<Polygon>, Vec<DynamicObject>)> {
    let mut statics = Vec::new();
    let mut dynamics = Vec::new();
    for mut o in root.tables("objects")? {
        let kind = o.str("kind")?;
        match kind {
            "static" => {
                let pts = o.points("polygon")?;
                let poly = Polygon::new(pts).map_err(|e| o.range("polygon", &e.to_string()))?;
                statics.push(poly);
            }
            "vehicle" | "pedestrian" => {
                let pose = Pose::new(o.finite("x")?, o.finite("y")?, o.finite("heading")?);
                let length = o.positive("length")?;
                let width = o.positive("width")?;
                let footprint = Polygon::oriented_box(Point2::default(), 0.0, length, width)
                    .map_err(|e| o.range("length", &e.to_string()))?;
                dynamics.push(DynamicObject {
                    pose,
                    footprint,
                    speed: o.non_negative("speed")?,
                    max_accel: o.non_negative("max_accel")?,
                    kind: if kind == "vehicle" {
                        ObjectKind::Vehicle
                    } else {
                        ObjectKind::Pedestrian
                    },
                });
            }
            _ => {
                return Err(ScenarioError::Type {
                    key: o.key("kind"),
                    expected: "static, vehicle or pedestrian",
                })
            }
        }
        o.finish()?;
    }
    Ok((statics, dynamics))
}

fn read_vehicle(root: &mut Section) -> Result<SingleTrackParams> {
    let Some(mut s) = root.opt_table("vehicle")? else {
        return Ok(SingleTrackParams::nominal(10.0));
    };
    let p = SingleTrackParams {
        mass: s.positive("mass")?,
        yaw_inertia: s.positive("yaw_inertia")?,
        lf: s.positive("lf")?,
        lr: s.positive("lr")?,
        cf: s.positive("cf")?,
        cr: s.positive("cr")?,
        v: 10.0,
    };
    s.finish()?;
    Ok(p)
}

fn from_table(table: &Table) -> Result<Scenario> {
    let mut root = Section::new("", table);
    let road = read_road(&mut root)?;
    let ego = read_ego(&mut root)?;
    let sensor = read_sensor(&mut root)?;
    let (statics, dynamics) = read_objects(&mut root)?;

    let mut h = root.table("hidden_params")?;
    let hidden = HiddenObjectParams {
        v0: h.non_negative("v0")?,
        a_wc: h.non_negative("a_wc")?,
    };
    let prediction_horizon = h.positive("horizon")?;
    let lateral_rate = h.non_negative("lateral_rate")?;
    h.finish()?;

    let mut m = root.table("mpc")?;
    let horizon_n = m.usize("horizon")?;
    if horizon_n < 2 {
        return Err(m.range("horizon", "must be at least 2"));
    }
    let dt = m.positive("dt")?;
    let w = m.floats("weights", Some(4))?;
    if w.iter().any(|x| *x < 0.0) {
        return Err(m.range("weights", "must be >= 0"));
    }
    let input_weight = m.non_negative("input_weight")?;
    let slack_factor = m.positive("slack_factor")?;
    let slack_bound = m.f64("slack_bound")?;
    if slack_bound < 0.0 {
        return Err(m.range("slack_bound", "must be >= 0"));
    }
    let steer_limit = m.positive("steer_limit")?;
    m.finish()?;
    let mut mpc = MpcConfig {
        horizon_n,
        dt,
        state_weights: [w[0], w[1], w[2], w[3]],
        input_weight,
        slack_bound: slack_bound.is_finite().then_some(slack_bound),
        steer_limit,
        ..MpcConfig::default()
    };
    mpc.slack_weight = mpc.factor_slack_weight(slack_factor);

    let vehicle = read_vehicle(&mut root)?;

    let mut t = root.table("tactical")?;
    let maneuver = match t.str("maneuver")? {
        "auto" => None,
        name => Some(Maneuver::from_name(name).ok_or(ScenarioError::Type {
            key: t.key("maneuver"),
            expected: "auto or a maneuver name",
        })?),
    };
    let centerline = match t.str("centerline")? {
        "auto" => None,
        name => Some(Treatment::from_name(name).ok_or(ScenarioError::Type {
            key: t.key("centerline"),
            expected: "auto, hard, soft or ignored",
        })?),
    };
    let occupancy = choice(&mut t, "occupancy", OccupancyTreatment::from_name, "hard or soft")?;
    let passing_side = choice(
        &mut t,
        "passing_side",
        |s| match s {
            "left_only" => Some(PassingSide::LeftOnly),
            "both" => Some(PassingSide::Both),
            _ => None,
        },
        "left_only or both",
    )?;
    let safety_gate = choice(
        &mut t,
        "safety_gate",
        |s| match s {
            "enforce" => Some(SafetyGate::Enforce),
            "log_only" => Some(SafetyGate::LogOnly),
            _ => None,
        },
        "enforce or log_only",
    )?;
    let cruise_speed = t.opt_f64("cruise_speed")?;
    if cruise_speed.is_some_and(|v| !(v >= 0.0 && v.is_finite())) {
        return Err(t.range("cruise_speed", "must be >= 0"));
    }
    t.finish()?;

    let mut s = root.table("sim")?;
    let cycles = s.usize("cycles")?;
    let accel = s.opt_f64("accel")?.unwrap_or(2.0);
    if !(accel > 0.0 && accel.is_finite()) {
        return Err(s.range("accel", "must be > 0"));
    }
    let amplitude = if s.table.contains_key("disturbance") {
        let a = s.floats("disturbance", Some(4))?;
        if a.iter().any(|x| *x < 0.0) {
            return Err(s.range("disturbance", "must be >= 0"));
        }
        Some([a[0], a[1], a[2], a[3]])
    } else {
        s.used.insert("disturbance".into());
        None
    };
    let seed = match s.opt("seed") {
        None => 0,
        Some(Value::Integer(i)) if *i >= 0 => *i as u64,
        Some(_) => {
            return Err(ScenarioError::Type {
                key: s.key("seed"),
                expected: "a non-negative integer",
            })
        }
    };
    s.finish()?;
    root.finish()?;

    let scene = Scene::new(road, ego, statics, dynamics, sensor)
        .map_err(|e| ScenarioError::Invalid(e.to_string()))?;
    let mut sim = SimConfig {
        cycles,
        mpc,
        prediction: PredictionConfig {
            horizon_n: ((prediction_horizon / dt).round() as usize).max(1),
            dt,
            lateral_rate,
        },
        hidden,
        safety_gate,
        rules: Default::default(),
        vehicle,
        accel,
        disturbance: amplitude.map(|amplitude| Disturbance { amplitude, seed }),
        ..SimConfig::default()
    };
    sim.rules.passing_side = passing_side;
    sim.safety.free_range = scene.sensor.max_range;
    sim.tactical.maneuver = maneuver;
    sim.tactical.centerline = centerline;
    sim.tactical.occupancy = occupancy;
    sim.tactical.cruise_speed = cruise_speed;
    sim.validate().map_err(|e| ScenarioError::Invalid(e.to_string()))?;
    Ok(Scenario {
        scene,
        sim,
        slack_factor,
        prediction_horizon: sim_horizon_seconds(prediction_horizon, dt),
    })
}

/// Horizon rounded to whole prediction steps.
fn sim_horizon_seconds(h: f64, dt: f64) -> f64 {
    ((h / dt).round().max(1.0)) * dt
}

fn float_array(v: &[f64]) -> Value {
    Value::Array(v.iter().map(|x| Value::Float(*x)).collect())
}

fn point_array(pts: &[Point2]) -> Value {
    Value::Array(pts.iter().map(|p| float_array(&[p.x, p.y])).collect())
}

fn table<const N: usize>(entries: [(&str, Value); N]) -> Value {
    Value::Table(entries.into_iter().map(|(k, v)| (k.to_string(), v)).collect())
}

fn string(s: &str) -> Value {
    Value::String(s.to_string())
}

/// Writes a scenario back to its file format.
pub fn to_toml(sc: &Scenario) -> String {
    let scene = &sc.scene;
    let sim = &sc.sim;
    let mut root = Table::new();
    root.insert(
        "road".into(),
        table([
            ("drivable", float_array(&[scene.road.drivable.y_min, scene.road.drivable.y_max])),
            (
                "walkable",
                Value::Array(scene.road.walkable.iter().map(|b| float_array(&[b.y_min, b.y_max])).collect()),
            ),
            (
                "markings",
                Value::Array(
                    scene
                        .road
                        .markings
                        .iter()
                        .map(|m| {
                            table([
                                ("offset", Value::Float(m.lateral_offset)),
                                ("kind", string(marking_name(m.kind))),
                            ])
                        })
                        .collect(),
                ),
            ),
        ]),
    );
    let e = &scene.ego;
    root.insert(
        "ego".into(),
        table([
            ("x", Value::Float(e.pose.x)),
            ("y", Value::Float(e.pose.y)),
            ("heading", Value::Float(e.pose.heading)),
            ("speed", Value::Float(e.speed)),
            ("max_decel", Value::Float(e.max_decel)),
            ("length", Value::Float(e.length)),
            ("width", Value::Float(e.width)),
        ]),
    );
    root.insert(
        "sensor".into(),
        table([
            ("range", Value::Float(scene.sensor.max_range)),
            ("fov", Value::Float(scene.sensor.fov)),
            (
                "mount",
                float_array(&[scene.sensor.mount_offset.x, scene.sensor.mount_offset.y]),
            ),
        ]),
    );
    let mut objects: Vec<Value> = scene
        .statics
        .iter()
        .map(|p| table([("kind", string("static")), ("polygon", point_array(p.vertices()))]))
        .collect();
    for o in &scene.dynamics {
        let b = o.footprint.bbox();
        objects.push(table([
            (
                "kind",
                string(match o.kind {
                    ObjectKind::Vehicle => "vehicle",
                    ObjectKind::Pedestrian => "pedestrian",
                }),
            ),
            ("x", Value::Float(o.pose.x)),
            ("y", Value::Float(o.pose.y)),
            ("heading", Value::Float(o.pose.heading)),
            ("length", Value::Float(b.max.x - b.min.x)),
            ("width", Value::Float(b.max.y - b.min.y)),
            ("speed", Value::Float(o.speed)),
            ("max_accel", Value::Float(o.max_accel)),
        ]));
    }
    root.insert("objects".into(), Value::Array(objects));
    root.insert(
        "hidden_params".into(),
        table([
            ("v0", Value::Float(sim.hidden.v0)),
            ("a_wc", Value::Float(sim.hidden.a_wc)),
            ("horizon", Value::Float(sc.prediction_horizon)),
            ("lateral_rate", Value::Float(sim.prediction.lateral_rate)),
        ]),
    );
    let m = &sim.mpc;
    root.insert(
        "mpc".into(),
        table([
            ("horizon", Value::Integer(m.horizon_n as i64)),
            ("dt", Value::Float(m.dt)),
            ("weights", float_array(&m.state_weights)),
            ("input_weight", Value::Float(m.input_weight)),
            ("slack_factor", Value::Float(sc.slack_factor)),
            ("slack_bound", Value::Float(m.slack_bound.unwrap_or(f64::INFINITY))),
            ("steer_limit", Value::Float(m.steer_limit)),
        ]),
    );
    let v = &sim.vehicle;
    root.insert(
        "vehicle".into(),
        table([
            ("mass", Value::Float(v.mass)),
            ("yaw_inertia", Value::Float(v.yaw_inertia)),
            ("lf", Value::Float(v.lf)),
            ("lr", Value::Float(v.lr)),
            ("cf", Value::Float(v.cf)),
            ("cr", Value::Float(v.cr)),
        ]),
    );
    let t = &sim.tactical;
    let mut tactical = Table::new();
    tactical.insert("maneuver".into(), string(t.maneuver.map_or("auto", |m| m.name())));
    tactical.insert("centerline".into(), string(t.centerline.map_or("auto", |c| c.name())));
    tactical.insert("occupancy".into(), string(t.occupancy.name()));
    tactical.insert(
        "passing_side".into(),
        string(match sim.rules.passing_side {
            PassingSide::LeftOnly => "left_only",
            PassingSide::Both => "both",
        }),
    );
    tactical.insert(
        "safety_gate".into(),
        string(match sim.safety_gate {
            SafetyGate::Enforce => "enforce",
            SafetyGate::LogOnly => "log_only",
        }),
    );
    if let Some(c) = t.cruise_speed {
        tactical.insert("cruise_speed".into(), Value::Float(c));
    }
    root.insert("tactical".into(), Value::Table(tactical));
    let mut s = Table::new();
    s.insert("cycles".into(), Value::Integer(sim.cycles as i64));
    s.insert("accel".into(), Value::Float(sim.accel));
    if let Some(d) = &sim.disturbance {
        s.insert("disturbance".into(), float_array(&d.amplitude));
        s.insert("seed".into(), Value::Integer(d.seed as i64));
    }
    root.insert("sim".into(), Value::Table(s));
    toml::to_string(&root).expect("scenario tables serialize")
}
