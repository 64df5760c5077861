mod common;

use common::ray_cast_hidden;
use common::scenes::{ego, fig1, rect, two_lane_road};
use occmpc_core::geometry::{total_area, Point2};
use occmpc_core::scene::{MarkingKind, Scene, SensorSpec};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn hidden_in(scene: &Scene, p: Point2) -> bool {
    scene.compute_occlusions().iter().any(|o| o.contains(p))
}

#[test]
fn sidewalk_behind_the_van_is_occluded() {
    let scene = fig1();
    let p = Point2::new(11.397 + 2.0, -3.7);
    assert!(hidden_in(&scene, p));
    let origin = scene.sensor_origin();
    assert!(ray_cast_hidden(origin, &scene.statics[0], p, scene.sensor.max_range));
    // a strip of the ego lane just behind the van is hidden as well
    let q = Point2::new(14.0, -2.98);
    assert!(scene.road.drivable.contains(q.y));
    assert!(hidden_in(&scene, q));
    assert!(ray_cast_hidden(origin, &scene.statics[0], q, scene.sensor.max_range));
}

#[test]
fn forward_sensor_does_not_see_objects_behind() {
    let scene = Scene::new(
        two_lane_road(3.5, MarkingKind::Dashed, None),
        ego(0.0, -1.75, 5.0, 4.5, 1.8),
        vec![rect(-15.0, -3.0, -11.0, -1.0)],
        vec![],
        SensorSpec {
            fov: std::f64::consts::PI,
            ..SensorSpec::default()
        },
    )
    .unwrap();
    assert!(scene.compute_occlusions().is_empty());
}

#[test]
fn free_space_has_a_notch_at_the_van() {
    let scene = fig1();
    let free = scene.free_space();
    let hw = 0.5 * scene.ego.width;
    let van = &scene.statics[0];
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..2000 {
        let p = Point2::new(rng.gen_range(-10.0..40.0), rng.gen_range(-3.0..3.0));
        let d = if van.contains(p) { 0.0 } else { van.boundary_distance(p) };
        let strictly_free = free.contains(p) && free.pieces.iter().all(|q| q.boundary_distance(p) > 1e-6);
        // the inflation disc is an outer polygon, so leave a small band undecided
        if d < hw - 1e-3 {
            assert!(!strictly_free, "{p:?} is within the inflated van");
        } else if d > 1.01 * hw {
            assert!(free.contains(p), "{p:?} should be free");
        }
    }
}

#[test]
fn full_width_blockage_disconnects_free_space() {
    let scene = Scene::new(
        two_lane_road(3.5, MarkingKind::Dashed, None),
        ego(0.0, -1.75, 5.0, 4.5, 1.8),
        vec![rect(20.0, -3.6, 24.0, 3.6)],
        vec![],
        SensorSpec::default(),
    )
    .unwrap();
    assert_eq!(scene.free_space().components(), 2);
}

fn shifted(scene: &Scene, by: Point2) -> Scene {
    scene.translated(by)
}

proptest! {
    #[test]
    fn occlusions_lie_within_sensor_range(x in 4.0..30.0f64, y in -3.0..2.0f64, range in 10.0..60.0f64) {
        let mut scene = fig1();
        scene.statics = vec![rect(x, y, x + 3.0, y + 1.0)];
        scene.sensor.max_range = range;
        let origin = scene.sensor_origin();
        for p in scene.compute_occlusions() {
            for v in p.vertices() {
                prop_assert!(v.dist(origin) <= range + 0.05 + 1e-9);
            }
        }
    }

    #[test]
    fn translation_leaves_areas_unchanged(dx in -50.0..50.0f64, dy in -5.0..5.0f64) {
        let a = fig1();
        let b = shifted(&a, Point2::new(dx, dy));
        prop_assert!((total_area(&a.compute_occlusions()) - total_area(&b.compute_occlusions())).abs() < 1e-9);
        prop_assert!((a.free_space().area() - b.free_space().area()).abs() < 1e-9);
    }

    #[test]
    fn occlusions_avoid_the_occluder_interior(x in 4.0..30.0f64, y in -3.0..2.0f64, seed in any::<u64>()) {
        let mut scene = fig1();
        let occ = rect(x, y, x + 3.0, y + 1.0);
        scene.statics = vec![occ.clone()];
        let shadows = scene.compute_occlusions();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..200 {
            let p = Point2::new(rng.gen_range(x..x + 3.0), rng.gen_range(y..y + 1.0));
            if occ.boundary_distance(p) > 1e-6 {
                prop_assert!(!shadows.iter().any(|s| s.contains(p) && s.boundary_distance(p) > 1e-6));
            }
        }
    }
}
