mod common;

use common::scenes::*;
use occmpc_core::geometry::{Point2, Polygon};
use occmpc_core::scene::{DynamicObject, EgoState, ObjectKind, Pose, Scene};
use occmpc_core::sim::*;
use occmpc_core::tactical::Maneuver;

fn run(scene: &Scene, cfg: &SimConfig) -> SimLog {
    run_closed_loop(scene, cfg, &mut NullClock).unwrap()
}

/// Clock advancing 1.5 ms per reading.
struct Ticking(f64);

impl Clock for Ticking {
    fn now_ms(&mut self) -> f64 {
        self.0 += 1.5;
        self.0
    }
}

fn offset_road() -> Scene {
    let mut s = empty_road(10.0);
    s.ego.pose.y += 0.3;
    s
}

#[test]
fn empty_road_stays_on_the_lane_center() {
    let cfg = SimConfig {
        cycles: 50,
        ..SimConfig::default()
    };
    let log = run(&empty_road(10.0), &cfg);
    assert_eq!(log.cycles.len(), 50);
    assert_eq!(log.termination, Termination::Completed);
    assert!(log.final_state.e.abs() < 1e-4);
    assert!(log.cycles.iter().all(|c| c.slack == 0.0 && c.slack_cost == 0.0));
    assert!(log.cycles.iter().all(|c| c.issue.is_none()));
    assert!((log.final_station - 50.0).abs() < 1e-9);
}

#[test]
fn lateral_offset_decays() {
    let cfg = SimConfig {
        cycles: 50,
        ..SimConfig::default()
    };
    let log = run(&offset_road(), &cfg);
    assert!((log.cycles[0].state.e - 0.3).abs() < 1e-12);
    assert!(log.final_state.e.abs() < 0.05);
    assert!(log.states().iter().all(|x| x.e.abs() <= 0.3 + 1e-9));
    assert_eq!(log.total_slack_cost(), 0.0);
}

#[test]
fn van_scene_clearance_respects_the_soft_bound_up_to_the_slack() {
    let log = run(&fig2(false), &fig2_config());
    let max_eps = log
        .cycles
        .iter()
        .filter_map(|c| c.plan.as_ref())
        .flat_map(|p| p.slack.iter().copied())
        .fold(0.0, f64::max);
    assert!(max_eps > 0.0 && max_eps <= 3.0);
    let states = log.states();
    for (c, next) in log.cycles.iter().zip(&states[1..]) {
        let bound = c.schedule.as_ref().unwrap().steps[0].soft_e_min;
        assert!(next.e >= bound - max_eps - 1e-9, "cycle {}", c.cycle);
    }
}

#[test]
fn van_scene_keeps_the_footprint_clear() {
    let scene = fig2(false);
    let log = run(&scene, &fig2_config());
    let van = &scene.statics[0];
    for c in &log.cycles {
        assert!(c.issue.is_none(), "cycle {}: {:?}", c.cycle, c.issue);
        let ego = EgoState {
            pose: Pose::new(c.station, log.reference_y + c.state.e, c.state.dpsi),
            ..scene.ego
        };
        let fp = ego.footprint();
        assert!(
            occmpc_core::geometry::clip(&fp, van).unwrap().is_empty(),
            "cycle {} overlaps the van",
            c.cycle
        );
        for v in fp.vertices() {
            assert!(scene.road.drivable.contains(v.y));
        }
    }
}

#[test]
fn logged_plans_satisfy_their_hard_bounds() {
    for solid in [false, true] {
        let log = run(&fig2(solid), &fig2_config());
        for c in &log.cycles {
            let (Some(s), Some(p)) = (&c.schedule, &c.plan) else {
                panic!("cycle {} has no plan", c.cycle);
            };
            assert!(hard_violation(s, p) < 1e-6);
        }
    }
}

#[test]
fn replay_reproduces_the_states_bitwise() {
    let cfg = SimConfig {
        cycles: 40,
        disturbance: Some(Disturbance {
            amplitude: [0.02, 0.005, 0.0, 0.01],
            seed: 11,
        }),
        ..SimConfig::default()
    };
    let log = run(&offset_road(), &cfg);
    assert!(log.cycles.iter().any(|c| c.disturbance != [0.0; 4]));
    let replayed = replay(&log).unwrap();
    let logged = log.states();
    assert_eq!(replayed.len(), logged.len());
    for (a, b) in replayed.iter().zip(&logged) {
        assert_eq!(a.to_vector(), b.to_vector());
    }
}

#[test]
fn runs_are_deterministic() {
    let cfg = fig2_config();
    let a = run(&fig2(true), &cfg);
    let b = run(&fig2(true), &cfg);
    assert_eq!(a, b);
    let timed = run_closed_loop(&fig2(true), &cfg, &mut Ticking(0.0)).unwrap();
    assert!(timed.cycles.iter().all(|c| c.planning_ms == 1.5));
    assert_eq!(timed.without_timing(), a);

    let seeded = |seed| SimConfig {
        cycles: 20,
        disturbance: Some(Disturbance {
            amplitude: [0.02, 0.0, 0.0, 0.0],
            seed,
        }),
        ..SimConfig::default()
    };
    assert_eq!(run(&offset_road(), &seeded(5)), run(&offset_road(), &seeded(5)));
    assert_ne!(run(&offset_road(), &seeded(5)), run(&offset_road(), &seeded(6)));
}

#[test]
fn pedestrian_at_the_bumper_stops_the_ego() {
    let base = empty_road(10.0);
    let ped = DynamicObject {
        pose: Pose::new(2.6, -1.75, 0.0),
        footprint: Polygon::oriented_box(Point2::default(), 0.0, 0.5, 0.5).unwrap(),
        speed: 0.0,
        max_accel: 1.0,
        kind: ObjectKind::Pedestrian,
    };
    let scene = with_dynamics(&base, vec![ped]);
    let log = run(&scene, &SimConfig::default());
    assert_eq!(log.cycles[0].directive.maneuver, Maneuver::Stop);
    assert!(!log.cycles[0].verdict.guaranteed);
    assert!(log.cycles.iter().all(|c| c.directive.maneuver == Maneuver::Stop));
    // full braking at 9 m/s² from 10 m/s: 9.1, 8.2, ..., 0.1, then standstill
    let speeds: Vec<f64> = log.cycles.iter().map(|c| c.speed).collect();
    assert_eq!(speeds.len(), 12);
    for (k, v) in speeds.iter().enumerate() {
        assert!((v - (10.0 - 0.9 * k as f64)).abs() < 1e-9);
    }
    assert_eq!(log.final_speed, 0.0);
    assert_eq!(log.termination, Termination::Stopped { cycle: 11 });
}

#[test]
fn identical_logs_compare_equal() {
    let log = run(&fig2(false), &fig2_config());
    let c = compare_runs(&log, &log).unwrap();
    assert_eq!(c.max_abs_diff, 0.0);
    assert_eq!(c.total_a, c.total_b);
    assert!(!c.b_exceeds_a());
    assert_eq!(c.first_contact().0, c.first_contact().1);
}

#[test]
fn runs_without_active_soft_bounds_have_zero_totals() {
    let cfg = SimConfig {
        cycles: 10,
        ..SimConfig::default()
    };
    let c = compare_runs(&run(&empty_road(10.0), &cfg), &run(&offset_road(), &cfg)).unwrap();
    assert_eq!((c.total_a, c.total_b), (0.0, 0.0));
    assert_eq!(c.first_contact(), (None, None));
}

#[test]
fn logs_of_different_length_do_not_compare() {
    let a = run(&offset_road(), &SimConfig { cycles: 5, ..SimConfig::default() });
    let b = run(&offset_road(), &SimConfig { cycles: 6, ..SimConfig::default() });
    assert_eq!(compare_runs(&a, &b), Err(SimError::CycleMismatch(5, 6)));
}

#[test]
fn solid_center_line_costs_more_slack() {
    let a = run(&fig2(false), &fig2_config());
    let b = run(&fig2(true), &fig2_config());
    let c = compare_runs(&a, &b).unwrap();
    assert!(c.b_exceeds_a());
    let peak = |log: &SimLog| log.states().iter().map(|x| x.e).fold(f64::NEG_INFINITY, f64::max);
    assert!(peak(&a) > peak(&b));
}

#[test]
fn invalid_settings_are_rejected() {
    let cfg = SimConfig {
        accel: 0.0,
        ..SimConfig::default()
    };
    assert_eq!(
        run_closed_loop(&offset_road(), &cfg, &mut NullClock),
        Err(SimError::InvalidConfig("accel"))
    );
}
