//! Reference implementations used only as test oracles. They share no code
//! with the library algorithms they check.
#![allow(dead_code)]

pub mod qp_oracle;

use occmpc_core::geometry::{Point2, Polygon};

/// Brute-force visibility: `q` is hidden when the sight line from `origin`
/// passes through the occluder's interior before reaching `q`.
pub fn ray_cast_hidden(origin: Point2, occluder: &Polygon, q: Point2, range: f64) -> bool {
    if origin.dist(q) > range || occluder.contains(q) {
        return false;
    }
    // march along the segment; a sample strictly inside the occluder blocks it
    let steps = 2000;
    (1..steps).any(|k| {
        let p = origin.lerp(q, k as f64 / steps as f64);
        occluder.contains(p) && occluder.boundary_distance(p) > 1e-9
    })
}

/// Classical RK4 on `ẋ = A x + B u` with constant input.
pub fn rk4(
    a: &nalgebra::Matrix4<f64>,
    b: &nalgebra::Vector4<f64>,
    x0: nalgebra::Vector4<f64>,
    u: f64,
    t: f64,
    h: f64,
) -> nalgebra::Vector4<f64> {
    let f = |x: &nalgebra::Vector4<f64>| a * x + b * u;
    let steps = (t / h).round() as usize;
    let mut x = x0;
    for _ in 0..steps {
        let k1 = f(&x);
        let k2 = f(&(x + k1 * (h / 2.0)));
        let k3 = f(&(x + k2 * (h / 2.0)));
        let k4 = f(&(x + k3 * h));
        x += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
    }
    x
}

/// Distance from `p` to the polygon boundary, or zero inside.
pub fn outside_distance(poly: &Polygon, p: Point2) -> f64 {
    if poly.contains(p) {
        0.0
    } else {
        poly.boundary_distance(p)
    }
}

pub mod scenes {
    use occmpc_core::geometry::{Point2, Polygon};
    use occmpc_core::scene::*;

    pub fn marking(y: f64, kind: MarkingKind) -> LaneMarking {
        LaneMarking { lateral_offset: y, kind }
    }

    /// Two lanes of `lane` width on either side of `y = 0`.
    pub fn two_lane_road(lane: f64, center: MarkingKind, sidewalk: Option<(f64, f64)>) -> RoadModel {
        RoadModel {
            markings: vec![
                marking(-lane, MarkingKind::RoadEdge),
                marking(0.0, center),
                marking(lane, MarkingKind::RoadEdge),
            ],
            drivable: Band::new(-lane, lane),
            walkable: sidewalk.map(|(a, b)| Band::new(a, b)).into_iter().collect(),
        }
    }

    pub fn ego(x: f64, y: f64, speed: f64, length: f64, width: f64) -> EgoState {
        EgoState {
            pose: Pose::new(x, y, 0.0),
            speed,
            max_decel: 9.0,
            length,
            width,
        }
    }

    pub fn rect(x0: f64, y0: f64, x1: f64, y1: f64) -> Polygon {
        Polygon::rectangle(Point2::new(x0, y0), Point2::new(x1, y1)).unwrap()
    }

    /// Parked van hiding the sidewalk; the hidden occupancy after 1 s ends
    /// 5 m ahead of the ego's front bumper.
    pub fn fig1() -> Scene {
        Scene::new(
            two_lane_road(3.0, MarkingKind::Dashed, Some((-4.45, -3.0))),
            ego(2.5645, -1.5, 10.0, 4.765, 2.2),
            vec![rect(7.397, -4.8, 11.397, -2.6)],
            vec![],
            SensorSpec {
                mount_offset: Point2::new(-1.2645, 0.0),
                max_range: 50.0,
                ..SensorSpec::default()
            },
        )
        .unwrap()
    }

    /// Van at the right road edge 20 m ahead; `solid` selects the center line.
    pub fn fig2(solid: bool) -> Scene {
        let center = if solid { MarkingKind::Solid } else { MarkingKind::Dashed };
        Scene::new(
            two_lane_road(3.5, center, Some((-6.0, -3.5))),
            ego(0.0, -1.75, 8.0, 4.5, 1.8),
            vec![rect(20.0, -3.9, 24.0, -2.05)],
            vec![],
            SensorSpec {
                max_range: 25.0,
                ..SensorSpec::default()
            },
        )
        .unwrap()
    }

    pub fn empty_road(speed: f64) -> Scene {
        Scene::new(
            two_lane_road(3.5, MarkingKind::Dashed, None),
            ego(0.0, -1.75, speed, 4.5, 1.8),
            vec![],
            vec![],
            SensorSpec::default(),
        )
        .unwrap()
    }

    /// Vehicle of `length` x `width` centered at `(x, y)`, driving along +x.
    pub fn vehicle(x: f64, y: f64, speed: f64, length: f64, width: f64) -> DynamicObject {
        DynamicObject {
            pose: Pose::new(x, y, 0.0),
            footprint: Polygon::oriented_box(Point2::default(), 0.0, length, width).unwrap(),
            speed,
            max_accel: 2.0,
            kind: ObjectKind::Vehicle,
        }
    }

    pub fn with_dynamics(scene: &Scene, dynamics: Vec<DynamicObject>) -> Scene {
        Scene::new(
            scene.road.clone(),
            scene.ego,
            scene.statics.clone(),
            dynamics,
            scene.sensor,
        )
        .unwrap()
    }

    /// Settings of the parked-van scenario.
    pub fn fig1_config() -> occmpc_core::sim::SimConfig {
        let mut cfg = occmpc_core::sim::SimConfig::default();
        cfg.prediction.horizon_n = 10;
        cfg.mpc.slack_bound = None;
        cfg.safety.free_range = 50.0;
        cfg.cycles = 30;
        cfg
    }

    /// Settings of the center-line pair.
    pub fn fig2_config() -> occmpc_core::sim::SimConfig {
        let mut cfg = occmpc_core::sim::SimConfig::default();
        cfg.prediction.horizon_n = 15;
        cfg.mpc.slack_weight = cfg.mpc.factor_slack_weight(3.0);
        cfg.mpc.slack_bound = Some(3.0);
        cfg.safety.free_range = 25.0;
        cfg.safety_gate = occmpc_core::sim::SafetyGate::LogOnly;
        cfg.cycles = 60;
        cfg
    }
}
