mod common;

use common::scenes::*;
use occmpc_core::geometry::{Point2, Polygon};
use occmpc_core::mpc::{plan, MpcConfig};
use occmpc_core::prediction::{occupancy_schedule_with, OccupancySchedule, OccupancyStep};
use occmpc_core::safety::{assess, max_safe_speed, SafetyVerdict};
use occmpc_core::scene::{MarkingKind, Scene};
use occmpc_core::sim::SimConfig;
use occmpc_core::tactical::*;
use occmpc_core::vehicle::{DiscreteModel, LateralState, SingleTrackParams};
use proptest::prelude::*;

fn safe() -> SafetyVerdict {
    SafetyVerdict {
        guaranteed: true,
        min_gap: 80.0,
        stopping_distance: 0.0,
        margin: 80.0,
        binding_step: None,
        required_speed: f64::INFINITY,
    }
}

/// Unsafe verdict for a 10 m/s ego braking at 9 m/s².
fn unsafe_gap(gap: f64) -> SafetyVerdict {
    let sd = 100.0 / 18.0;
    SafetyVerdict {
        guaranteed: false,
        min_gap: gap,
        stopping_distance: sd,
        margin: gap - sd,
        binding_step: Some(1),
        required_speed: max_safe_speed(gap, 9.0).unwrap(),
    }
}

fn no_occupancy() -> OccupancySchedule {
    OccupancySchedule { dt: 0.1, steps: vec![] }
}

fn occupancy_of(scene: &Scene, cfg: &SimConfig) -> OccupancySchedule {
    occupancy_schedule_with(scene, cfg.hidden, &cfg.prediction).unwrap()
}

fn verdict_of(scene: &Scene, cfg: &SimConfig) -> SafetyVerdict {
    assess(&scene.ego, &occupancy_of(scene, cfg), Point2::new(1.0, 0.0), &cfg.safety).unwrap()
}

/// Empty two-lane road with a lead vehicle in the ego lane whose rear is at `rear`.
fn with_lead(rear: f64, lead_speed: f64) -> Scene {
    with_dynamics(&empty_road(10.0), vec![vehicle(rear + 2.25, -1.75, lead_speed, 4.5, 1.8)])
}

#[test]
fn follow_pose_keeps_the_time_gap() {
    let cfg = TacticalConfig::default();
    let rules = RuleContext::default();
    // 2 s at 10 m/s behind a lead whose rear is 40 m ahead
    let p = select_target_pose(&with_lead(40.0, 5.0), Maneuver::Follow, &rules, &cfg).unwrap();
    assert!((p.station - 20.0).abs() < 1e-12);
    assert_eq!(p.e, 0.0);
    // too close: the pose stays min_gap ahead of the ego
    let p = select_target_pose(&with_lead(14.0, 5.0), Maneuver::Follow, &rules, &cfg).unwrap();
    assert!((p.station - 5.0).abs() < 1e-12);
}

#[test]
fn lane_change_pose_is_in_the_adjacent_lane() {
    let p = select_target_pose(
        &with_lead(40.0, 5.0),
        Maneuver::LaneChangeLeft,
        &RuleContext::default(),
        &TacticalConfig::default(),
    )
    .unwrap();
    assert!((p.e - 3.5).abs() < 1e-12);
    assert!((p.station - (44.5 + 20.0)).abs() < 1e-12);
}

#[test]
fn passing_on_the_right_is_rule_gated() {
    let scene = with_lead(40.0, 5.0);
    let cfg = TacticalConfig::default();
    let left_only = RuleContext::default();
    assert_eq!(
        select_target_pose(&scene, Maneuver::LaneChangeRight, &left_only, &cfg),
        Err(TacticalError::RuleViolation(Maneuver::LaneChangeRight))
    );
    let both = RuleContext {
        passing_side: PassingSide::Both,
        ..left_only
    };
    // the ego already drives in the rightmost lane
    assert_eq!(
        select_target_pose(&scene, Maneuver::LaneChangeRight, &both, &cfg),
        Err(TacticalError::NoSuchLane(Maneuver::LaneChangeRight))
    );
    assert_eq!(
        select_target_pose(&scene, Maneuver::Stop, &both, &cfg),
        Err(TacticalError::NoTargetPose(Maneuver::Stop))
    );
}

#[test]
fn slower_blocking_lead_triggers_a_lane_change_only_across_a_dashed_line() {
    let rules = RuleContext::default();
    let cfg = TacticalConfig::default();
    let dashed = with_lead(30.0, 3.0);
    let d = decide(&dashed, &no_occupancy(), &safe(), &rules, &cfg);
    assert_eq!(d.maneuver, Maneuver::LaneChangeLeft);
    assert_eq!(d.centerline_treatment, Treatment::Ignored);

    let mut solid = dashed.clone();
    solid.road.markings[1].kind = MarkingKind::Solid;
    let d = decide(&solid, &no_occupancy(), &safe(), &rules, &cfg);
    assert_eq!(d.maneuver, Maneuver::Follow);
    assert_eq!(d.centerline_treatment, Treatment::Hard);

    // oncoming traffic in the left lane
    let busy = with_dynamics(
        &dashed,
        vec![dashed.dynamics[0].clone(), vehicle(40.0, 1.75, 10.0, 4.5, 1.8)],
    );
    assert_eq!(decide(&busy, &no_occupancy(), &safe(), &rules, &cfg).maneuver, Maneuver::Follow);
}

#[test]
fn narrow_obstacle_is_passed_inside_the_lane() {
    // parked object covering only the outer 0.6 m of the ego lane
    let scene = Scene::new(
        empty_road(10.0).road,
        empty_road(10.0).ego,
        vec![rect(30.0, -3.6, 34.0, -2.9)],
        vec![],
        Default::default(),
    )
    .unwrap();
    let d = decide(&scene, &no_occupancy(), &safe(), &RuleContext::default(), &TacticalConfig::default());
    assert_eq!(d.maneuver, Maneuver::EvadeInLane);
    assert_eq!(d.target_pose.e, 0.0);
}

#[test]
fn parked_van_scene_keeps_driving_at_the_admissible_speed() {
    let scene = fig1();
    let cfg = fig1_config();
    let v = verdict_of(&scene, &cfg);
    assert!(!v.guaranteed);
    let d = decide(&scene, &occupancy_of(&scene, &cfg), &v, &cfg.rules, &cfg.tactical);
    assert_ne!(d.maneuver, Maneuver::Stop);
    assert!((d.speed_setpoint - 90f64.sqrt()).abs() < 1e-3);
    assert!(d.validate(&scene).is_ok());
}

#[test]
fn tiny_gap_stops_but_a_small_one_does_not() {
    let scene = empty_road(10.0);
    let rules = RuleContext::default();
    let cfg = TacticalConfig::default();
    let d = decide(&scene, &no_occupancy(), &unsafe_gap(0.1), &rules, &cfg);
    assert_eq!(d.maneuver, Maneuver::Follow);
    assert!((d.speed_setpoint - 1.8f64.sqrt()).abs() < 1e-12);

    let d = decide(&scene, &no_occupancy(), &unsafe_gap(0.001), &rules, &cfg);
    assert_eq!(d.maneuver, Maneuver::Stop);
    assert_eq!(d.speed_setpoint, 0.0);
    assert!((d.target_pose.station - 100.0 / 18.0).abs() < 1e-12);
    assert!(d.validate(&scene).is_ok());
}

#[test]
fn empty_road_follows_at_cruise_speed() {
    let cfg = TacticalConfig {
        cruise_speed: Some(13.0),
        ..TacticalConfig::default()
    };
    let scene = empty_road(10.0);
    let d = decide(&scene, &no_occupancy(), &safe(), &RuleContext::default(), &cfg);
    assert_eq!(d.maneuver, Maneuver::Follow);
    assert_eq!(d.speed_setpoint, 13.0);
    assert_eq!(d.target_pose.e, 0.0);
    assert!((d.target_pose.station - 80.0).abs() < 1e-12);
}

#[test]
fn forced_maneuver_decides_the_terminal_offset() {
    let scene = with_lead(40.0, 10.0);
    let mpc = MpcConfig::default();
    let model = DiscreteModel::new(&SingleTrackParams::nominal(10.0), mpc.dt).unwrap();
    let mut ends = vec![];
    for m in [Maneuver::Follow, Maneuver::LaneChangeLeft] {
        let cfg = TacticalConfig {
            maneuver: Some(m),
            ..TacticalConfig::default()
        };
        let d = decide(&scene, &no_occupancy(), &safe(), &RuleContext::default(), &cfg);
        assert_eq!(d.maneuver, m);
        let s = make_schedule(&scene, &no_occupancy(), &d, &mpc).unwrap();
        let t = plan(&model, &mpc, &s, LateralState::default()).unwrap();
        assert!(t.feasible);
        ends.push(t.states.last().unwrap().e);
    }
    assert!(ends[0].abs() < 1e-6);
    assert!((ends[1] - 3.5).abs() < 1e-6);
}

fn fig2_schedule(solid: bool) -> occmpc_core::mpc::ConstraintSchedule {
    let scene = fig2(solid);
    let cfg = fig2_config();
    let occ = occupancy_of(&scene, &cfg);
    let d = decide(&scene, &occ, &safe(), &cfg.rules, &cfg.tactical);
    make_schedule(&scene, &occ, &d, &cfg.mpc).unwrap()
}

#[test]
fn center_line_bounds_follow_the_marking() {
    let dashed = fig2_schedule(false);
    let solid = fig2_schedule(true);
    // ego half-width 0.9, reference at -1.75
    for b in &dashed.steps {
        assert!((b.hard_e_max - (3.5 - 0.9 + 1.75)).abs() < 1e-12);
    }
    for b in &solid.steps {
        assert!((b.hard_e_max - (0.0 - 0.9 + 1.75)).abs() < 1e-12);
    }
    // the van shadow is a soft lower bound near the van in both cases
    for s in [&dashed, &solid] {
        assert!(s.steps.iter().any(|b| b.soft_e_min.is_finite()));
        assert!(s.steps.iter().all(|b| b.soft_e_max == f64::INFINITY));
    }
    assert_eq!(dashed.target_e, 0.0);
}

#[test]
fn hard_occupancy_across_the_lane_is_over_constrained() {
    let scene = fig2(true);
    let cfg = fig2_config();
    let wall = Polygon::rectangle(Point2::new(10.0, -3.5), Point2::new(20.0, -0.5)).unwrap();
    let occ = OccupancySchedule {
        dt: 0.1,
        steps: vec![
            OccupancyStep {
                hidden: vec![wall],
                perceived: vec![],
            };
            15
        ],
    };
    let tcfg = TacticalConfig {
        occupancy: OccupancyTreatment::Hard,
        ..cfg.tactical
    };
    let d = decide(&scene, &occ, &safe(), &cfg.rules, &tcfg);
    assert_eq!(d.centerline_treatment, Treatment::Hard);
    match make_schedule(&scene, &occ, &d, &cfg.mpc) {
        Err(TacticalError::OverConstrained { step }) => {
            // first step whose footprint [x - 2.25, x + 2.25] reaches x = 10 at 8 m/s
            assert_eq!(step, 10);
        }
        other => panic!("expected over-constrained, got {other:?}"),
    }
    // the same occupancy as a soft constraint leaves a feasible schedule
    let soft = TacticalDirective {
        occupancy_treatment: OccupancyTreatment::Soft,
        ..d
    };
    assert!(make_schedule(&scene, &occ, &soft, &cfg.mpc).is_ok());
}

#[test]
fn decisions_are_deterministic() {
    let scene = fig2(false);
    let cfg = fig2_config();
    let occ = occupancy_of(&scene, &cfg);
    let v = verdict_of(&scene, &cfg);
    let a = decide(&scene, &occ, &v, &cfg.rules, &cfg.tactical);
    let b = decide(&scene, &occ, &v, &cfg.rules, &cfg.tactical);
    assert_eq!(a, b);
    assert_eq!(a.log_line(3), b.log_line(3));
    assert_eq!(
        make_schedule(&scene, &occ, &a, &cfg.mpc),
        make_schedule(&scene, &occ, &b, &cfg.mpc)
    );
}

proptest! {
    #[test]
    fn speed_setpoint_grows_with_the_gap(g1 in 0.0..60.0f64, g2 in 0.0..60.0f64, cruise in 1.0..20.0f64) {
        let (lo, hi) = if g1 <= g2 { (g1, g2) } else { (g2, g1) };
        let scene = empty_road(10.0);
        let cfg = TacticalConfig { cruise_speed: Some(cruise), ..TacticalConfig::default() };
        let rules = RuleContext::default();
        let a = decide(&scene, &no_occupancy(), &unsafe_gap(lo), &rules, &cfg);
        let b = decide(&scene, &no_occupancy(), &unsafe_gap(hi), &rules, &cfg);
        prop_assert!(a.speed_setpoint <= b.speed_setpoint);
        prop_assert!(b.speed_setpoint <= cruise);
        prop_assert!(a.validate(&scene).is_ok());
    }
}
