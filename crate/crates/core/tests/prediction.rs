mod common;

use common::outside_distance;
use common::scenes::{ego, fig1, rect, two_lane_road};
use occmpc_core::geometry::{grow_region, total_area, Point2, Polygon};
use occmpc_core::prediction::{
    occupancy_schedule, occupancy_schedule_with, raw_occupancy, reachable_radius, HiddenObjectParams,
    PredictionConfig, PredictionError,
};
use occmpc_core::scene::{DynamicObject, MarkingKind, ObjectKind, Pose, Scene, SensorSpec};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const PED: HiddenObjectParams = HiddenObjectParams { v0: 1.3, a_wc: 0.3 };

fn oncoming(x: f64, speed: f64, accel: f64) -> DynamicObject {
    DynamicObject {
        pose: Pose::new(x, 1.5, std::f64::consts::PI),
        footprint: Polygon::oriented_box(Point2::default(), 0.0, 4.5, 1.8).unwrap(),
        speed,
        max_accel: accel,
        kind: ObjectKind::Vehicle,
    }
}

fn busy_scene() -> Scene {
    let mut s = fig1();
    s.dynamics.push(oncoming(35.0, 4.7, 0.1));
    s.dynamics.push(DynamicObject {
        pose: Pose::new(20.0, -3.7, 1.0),
        footprint: Polygon::oriented_box(Point2::default(), 0.0, 0.5, 0.5).unwrap(),
        speed: 1.0,
        max_accel: 0.5,
        kind: ObjectKind::Pedestrian,
    });
    s
}

#[test]
fn reachable_radius_examples() {
    assert!((reachable_radius(1.3, 0.3, 1.0).unwrap() - 1.45).abs() < 1e-12);
    assert_eq!(reachable_radius(7.0, 2.0, 0.0).unwrap(), 0.0);
    assert!((reachable_radius(4.7, 0.1, 1.0).unwrap() - 4.75).abs() < 1e-12);
    assert!(matches!(reachable_radius(1.0, 1.0, -0.1), Err(PredictionError::NegativeTime(_))));
}

#[test]
fn point_like_region_grows_to_a_disc() {
    let dot = Polygon::rectangle(Point2::new(-1e-4, -1e-4), Point2::new(1e-4, 1e-4)).unwrap();
    let g = grow_region(&dot, 1.45);
    assert!(g.contains(Point2::new(1.44, 0.0)));
    assert!(!g.contains(Point2::new(1.52, 0.0)));
}

#[test]
fn grown_unit_square_area_is_close_to_the_minkowski_area() {
    let sq = Polygon::rectangle(Point2::new(0.0, 0.0), Point2::new(1.0, 1.0)).unwrap();
    assert!(grow_region(&sq, 0.0) == sq);
    let exact = 1.0 + 4.0 + std::f64::consts::PI;
    let area = grow_region(&sq, 1.0).area();
    assert!(area >= exact && area <= 1.02 * exact, "{area}");
}

#[test]
fn empty_scene_has_empty_occupancy() {
    let scene = Scene::new(
        two_lane_road(3.5, MarkingKind::Dashed, None),
        ego(0.0, -1.75, 10.0, 4.5, 1.8),
        vec![],
        vec![],
        SensorSpec::default(),
    )
    .unwrap();
    let occ = occupancy_schedule(&scene, PED, 10, 0.1).unwrap();
    assert_eq!(occ.len(), 10);
    assert!(occ.is_clear());
}

#[test]
fn hidden_occupancy_after_one_second_matches_disc_growth() {
    let scene = fig1();
    let occlusions = scene.compute_occlusions();
    let occ = occupancy_schedule(&scene, PED, 10, 0.1).unwrap();
    let last = &occ.steps[9];
    let r = 1.45;
    let bands = scene.space_bands();
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let (mut inside, mut outside) = (0, 0);
    while inside + outside < 2000 {
        let p = Point2::new(rng.gen_range(0.0..30.0), rng.gen_range(-4.45..3.0));
        if !bands.iter().any(|b| b.contains(p.y)) {
            continue;
        }
        let d = occlusions.iter().map(|o| outside_distance(o, p)).fold(f64::INFINITY, f64::min);
        if d <= r - 1e-6 {
            assert!(last.hidden.iter().any(|h| h.contains(p)), "{p:?} at {d}");
            inside += 1;
        } else if d > 1.02 * r {
            assert!(!last.hidden.iter().any(|h| h.contains(p)), "{p:?} at {d}");
            outside += 1;
        }
    }
    assert!(inside > 100 && outside > 100);
}

#[test]
fn oncoming_vehicle_leading_edge_advances() {
    let mut scene = fig1();
    scene.statics.clear();
    scene.dynamics.push(oncoming(30.0, 4.7, 0.1));
    let step = raw_occupancy(&scene, PED, 0.2, 1.0).unwrap();
    let front = 30.0 - 2.25;
    let lead = step.perceived[0].bbox().min.x;
    assert!((front - lead - 4.75).abs() < 1e-9, "{lead}");
    // lateral spread of 0.2 m/s on each side
    let b = step.perceived[0].bbox();
    assert!((b.max.y - b.min.y - (1.8 + 0.4)).abs() < 1e-9);
}

#[test]
fn zero_hidden_parameters_reproduce_the_occlusions() {
    let scene = fig1();
    let raw = total_area(&scene.compute_occlusions());
    let cfg = PredictionConfig { horizon_n: 10, dt: 0.1, lateral_rate: 0.2 };
    let occ = occupancy_schedule_with(&scene, HiddenObjectParams { v0: 0.0, a_wc: 0.0 }, &cfg).unwrap();
    for step in &occ.steps {
        assert!((total_area(&step.hidden) - raw).abs() < 1e-6);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn raw_occupancy_grows_monotonically(t in 0.0..2.0f64, dt in 0.01..0.5f64, seed in any::<u64>()) {
        let scene = busy_scene();
        let a = raw_occupancy(&scene, PED, 0.2, t).unwrap();
        let b = raw_occupancy(&scene, PED, 0.2, t + dt).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..1000 {
            let p = Point2::new(rng.gen_range(-5.0..60.0), rng.gen_range(-6.0..5.0));
            if a.contains(p) {
                prop_assert!(b.contains(p), "{:?}", p);
            }
        }
    }

    #[test]
    fn occupancy_stays_in_drivable_or_walkable_space(seed in any::<u64>()) {
        let scene = busy_scene();
        let occ = occupancy_schedule(&scene, PED, 15, 0.1).unwrap();
        let bands = scene.space_bands();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for step in &occ.steps {
            for p in step.polygons() {
                for v in p.vertices() {
                    prop_assert!(bands.iter().any(|b| v.y >= b.y_min - 1e-9 && v.y <= b.y_max + 1e-9));
                }
            }
            for _ in 0..100 {
                let p = Point2::new(rng.gen_range(-5.0..60.0), rng.gen_range(-7.0..6.0));
                if step.contains(p) {
                    prop_assert!(bands.iter().any(|b| b.contains(p.y)));
                }
            }
        }
    }

    #[test]
    fn reachable_radius_is_monotone(v in 0.0..10.0f64, a in 0.0..5.0f64, t in 0.0..5.0f64, d in 0.0..1.0f64) {
        let r = reachable_radius(v, a, t).unwrap();
        prop_assert!(reachable_radius(v + d, a, t).unwrap() >= r);
        prop_assert!(reachable_radius(v, a + d, t).unwrap() >= r);
        prop_assert!(reachable_radius(v, a, t + d).unwrap() >= r);
    }

    #[test]
    fn grown_region_contains_the_exact_minkowski_sum(r in 0.0..3.0f64, seed in any::<u64>()) {
        let poly = rect(0.0, 0.0, 2.0, 1.0);
        let g = grow_region(&poly, r);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..200 {
            let p = Point2::new(rng.gen_range(-4.0..6.0), rng.gen_range(-4.0..5.0));
            if outside_distance(&poly, p) <= r {
                prop_assert!(g.contains(p));
            }
        }
    }
}
