//! Maneuver selection and planner configuration.
//!
//! The tactical layer decides what the planner should do: which maneuver,
//! which target pose, how the lane center line and predicted occupancy
//! enter the QP (hard, soft or not at all) and which speed is allowed.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::mpc::{ConstraintSchedule, MpcConfig, StepBounds};
use crate::prediction::{OccupancySchedule, OccupancyStep};
use crate::safety::SafetyVerdict;
use crate::scene::{Band, MarkingKind, Scene};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Maneuver {
    Follow,
    LaneChangeLeft,
    LaneChangeRight,
    EvadeInLane,
    Stop,
}

impl Maneuver {
    pub fn name(self) -> &'static str {
        match self {
            Maneuver::Follow => "follow",
            Maneuver::LaneChangeLeft => "lane_change_left",
            Maneuver::LaneChangeRight => "lane_change_right",
            Maneuver::EvadeInLane => "evade_in_lane",
            Maneuver::Stop => "stop",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        [
            Maneuver::Follow,
            Maneuver::LaneChangeLeft,
            Maneuver::LaneChangeRight,
            Maneuver::EvadeInLane,
            Maneuver::Stop,
        ]
        .into_iter()
        .find(|m| m.name() == s)
    }
}

impl fmt::Display for Maneuver {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// How a rule enters the planning problem.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Treatment {
    Hard,
    Soft,
    Ignored,
}

impl Treatment {
    pub fn name(self) -> &'static str {
        match self {
            Treatment::Hard => "hard",
            Treatment::Soft => "soft",
            Treatment::Ignored => "ignored",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        [Treatment::Hard, Treatment::Soft, Treatment::Ignored]
            .into_iter()
            .find(|t| t.name() == s)
    }
}

impl fmt::Display for Treatment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Predicted occupancy is always respected, either strictly or with slack.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OccupancyTreatment {
    Hard,
    Soft,
}

impl OccupancyTreatment {
    pub fn name(self) -> &'static str {
        match self {
            OccupancyTreatment::Hard => "hard",
            OccupancyTreatment::Soft => "soft",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        match s {
            "hard" => Some(OccupancyTreatment::Hard),
            "soft" => Some(OccupancyTreatment::Soft),
            _ => None,
        }
    }
}

impl fmt::Display for OccupancyTreatment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Jurisdiction {
    #[default]
    RightHandTraffic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PassingSide {
    #[default]
    LeftOnly,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct RuleContext {
    pub jurisdiction: Jurisdiction,
    pub passing_side: PassingSide,
}

/// Terminal pose in path coordinates; `e` is relative to the reference
/// lane center.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TargetPose {
    pub station: f64,
    pub e: f64,
    pub dpsi: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TacticalDirective {
    pub maneuver: Maneuver,
    pub target_pose: TargetPose,
    /// Lateral ordinate of the reference path that `e` is measured from.
    pub reference_y: f64,
    pub centerline_treatment: Treatment,
    pub occupancy_treatment: OccupancyTreatment,
    pub slack_weight_override: Option<f64>,
    pub speed_setpoint: f64,
}

impl TacticalDirective {
    pub fn validate(&self, scene: &Scene) -> Result<(), TacticalError> {
        if self.maneuver == Maneuver::Stop && self.speed_setpoint != 0.0 {
            return Err(TacticalError::InvalidDirective("stop requires a zero speed setpoint"));
        }
        if !scene.road.drivable.contains(self.reference_y + self.target_pose.e) {
            return Err(TacticalError::InvalidDirective("target pose is off the drivable band"));
        }
        if !(self.speed_setpoint >= 0.0) {
            return Err(TacticalError::InvalidDirective("negative speed setpoint"));
        }
        Ok(())
    }

    /// One-line trace of the decision.
    pub fn log_line(&self, cycle: usize) -> String {
        let p = self.target_pose;
        let slack = match self.slack_weight_override {
            Some(s) => alloc::format!("{s:.3}"),
            None => String::from("default"),
        };
        alloc::format!(
            "cycle={cycle} maneuver={} target=({:.3},{:.3},{:.3}) centerline={} occupancy={} slack_weight={slack} speed={:.3}",
            self.maneuver,
            p.station,
            p.e,
            p.dpsi,
            self.centerline_treatment,
            self.occupancy_treatment,
            self.speed_setpoint,
        )
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TacticalError {
    #[error("maneuver {0} needs a lane that does not exist")]
    NoSuchLane(Maneuver),
    #[error("maneuver {0} is not allowed by the traffic rules")]
    RuleViolation(Maneuver),
    #[error("maneuver {0} has no target pose")]
    NoTargetPose(Maneuver),
    #[error("invalid directive: {0}")]
    InvalidDirective(&'static str),
    #[error("constraints leave no lateral room at step {step}")]
    OverConstrained { step: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TacticalConfig {
    /// Speed used when nothing limits it; `None` keeps the current speed.
    pub cruise_speed: Option<f64>,
    pub time_gap: f64,
    pub min_gap: f64,
    /// Below this admissible speed the ego stops instead of creeping.
    pub stop_threshold: f64,
    /// Lane whose center is the reference path; `None` uses the ego lane.
    pub reference_lane: Option<usize>,
    /// Overrides the treatment derived from the center-line marking.
    pub centerline: Option<Treatment>,
    pub occupancy: OccupancyTreatment,
    pub slack_weight_override: Option<f64>,
    /// Forces the maneuver instead of using the rule table.
    pub maneuver: Option<Maneuver>,
}

impl Default for TacticalConfig {
    fn default() -> Self {
        Self {
            cruise_speed: None,
            time_gap: 2.0,
            min_gap: 5.0,
            stop_threshold: 1.0,
            reference_lane: None,
            centerline: None,
            occupancy: OccupancyTreatment::Soft,
            slack_weight_override: None,
            maneuver: None,
        }
    }
}

/// Longitudinal and lateral extent of an object relative to a lane.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Obstacle {
    rear: f64,
    front: f64,
    y_lo: f64,
    y_hi: f64,
    speed: f64,
}

fn reference_lane(scene: &Scene, cfg: &TacticalConfig) -> Option<Band> {
    let lanes = scene.road.lanes();
    match cfg.reference_lane {
        Some(i) => lanes.get(i).copied(),
        None => scene.road.lane_index(scene.ego.pose.y).map(|i| lanes[i]),
    }
}

/// Lateral ordinate of the reference path.
pub fn reference_y(scene: &Scene, cfg: &TacticalConfig) -> f64 {
    reference_lane(scene, cfg).map_or(scene.ego.pose.y, |l| l.center())
}

fn obstacles_ahead(scene: &Scene, lane: Band) -> Vec<Obstacle> {
    let ego_x = scene.ego.pose.x;
    let horizon = ego_x + scene.sensor.max_range;
    let statics = scene.statics.iter().map(|p| (p.bbox(), 0.0));
    let dynamics = scene
        .dynamics
        .iter()
        .map(|o| (o.world_footprint().bbox(), o.speed * o.pose.direction().x));
    let mut v: Vec<Obstacle> = statics
        .chain(dynamics)
        .filter(|(b, _)| b.min.x > ego_x && b.min.x < horizon)
        .filter(|(b, _)| b.max.y > lane.y_min && b.min.y < lane.y_max)
        .map(|(b, speed)| Obstacle {
            rear: b.min.x,
            front: b.max.x,
            y_lo: b.min.y,
            y_hi: b.max.y,
            speed,
        })
        .collect();
    v.sort_by(|a, b| a.rear.total_cmp(&b.rear));
    v
}

/// Width left in `lane` beside an obstacle.
fn room_beside(lane: Band, o: &Obstacle) -> f64 {
    (lane.y_max - o.y_hi).max(o.y_lo - lane.y_min).max(0.0)
}

fn lane_offset(scene: &Scene, cfg: &TacticalConfig, by: isize) -> Option<Band> {
    let lanes = scene.road.lanes();
    let here = match cfg.reference_lane {
        Some(i) => i,
        None => scene.road.lane_index(scene.ego.pose.y)?,
    };
    let idx = here as isize + by;
    if idx < 0 {
        return None;
    }
    lanes.get(idx as usize).copied()
}

fn follow_distance(scene: &Scene, cfg: &TacticalConfig) -> f64 {
    (cfg.time_gap * scene.ego.speed).max(cfg.min_gap)
}

/// Terminal pose realizing `maneuver`.
///
/// Follow poses sit one time gap (at least `min_gap`) behind the lead
/// vehicle and never closer than `min_gap` ahead of the ego. Passing poses
/// sit one time gap beyond the blocking object. Without an object the pose
/// is placed at the end of the sensor range.
pub fn select_target_pose(
    scene: &Scene,
    maneuver: Maneuver,
    rules: &RuleContext,
    cfg: &TacticalConfig,
) -> Result<TargetPose, TacticalError> {
    let ref_y = reference_y(scene, cfg);
    let ego_x = scene.ego.pose.x;
    let far = ego_x + scene.sensor.max_range;
    let gap = follow_distance(scene, cfg);
    let own = reference_lane(scene, cfg).unwrap_or(Band::new(ref_y - 0.5, ref_y + 0.5));
    let lead = obstacles_ahead(scene, own).first().copied();
    let beyond_lead = lead.map_or(far, |o| o.front + gap);
    let pose = |station: f64, lane: Band| TargetPose {
        station,
        e: lane.center() - ref_y,
        dpsi: 0.0,
    };
    match maneuver {
        Maneuver::Stop => Err(TacticalError::NoTargetPose(maneuver)),
        Maneuver::Follow => {
            let station = lead.map_or(far, |o| (o.rear - gap).max(ego_x + cfg.min_gap));
            Ok(pose(station, own))
        }
        Maneuver::EvadeInLane => Ok(pose(beyond_lead, own)),
        Maneuver::LaneChangeLeft => {
            let lane = lane_offset(scene, cfg, 1).ok_or(TacticalError::NoSuchLane(maneuver))?;
            Ok(pose(beyond_lead, lane))
        }
        Maneuver::LaneChangeRight => {
            if rules.passing_side == PassingSide::LeftOnly {
                return Err(TacticalError::RuleViolation(maneuver));
            }
            let lane = lane_offset(scene, cfg, -1).ok_or(TacticalError::NoSuchLane(maneuver))?;
            Ok(pose(beyond_lead, lane))
        }
    }
}

/// Treatment of the center line bounding the reference lane on the left:
/// solid lines are hard, dashed lines are not constraints.
pub fn centerline_treatment(scene: &Scene, cfg: &TacticalConfig) -> Treatment {
    if let Some(t) = cfg.centerline {
        return t;
    }
    match scene.road.left_marking(reference_y(scene, cfg)).map(|m| m.kind) {
        Some(MarkingKind::Solid) => Treatment::Hard,
        _ => Treatment::Ignored,
    }
}

fn left_lane_free(scene: &Scene, cfg: &TacticalConfig, until: f64) -> bool {
    let Some(lane) = lane_offset(scene, cfg, 1) else {
        return false;
    };
    let from = scene.ego.pose.x - scene.ego.length;
    scene
        .dynamics
        .iter()
        .map(|o| o.world_footprint().bbox())
        .chain(scene.statics.iter().map(|p| p.bbox()))
        .all(|b| b.max.y <= lane.y_min || b.min.y >= lane.y_max || b.max.x < from || b.min.x > until)
}

/// Maneuver from the fixed rule table.
fn choose_maneuver(scene: &Scene, cfg: &TacticalConfig, centerline: Treatment) -> Maneuver {
    if let Some(m) = cfg.maneuver {
        return m;
    }
    let Some(lane) = reference_lane(scene, cfg) else {
        return Maneuver::Follow;
    };
    let Some(lead) = obstacles_ahead(scene, lane).first().copied() else {
        return Maneuver::Follow;
    };
    let needed = scene.ego.width + crate::safety::CORRIDOR_MARGIN;
    let blocked = room_beside(lane, &lead) < needed;
    let slower = lead.speed < scene.ego.speed;
    if blocked && slower {
        let until = lead.front + follow_distance(scene, cfg);
        if centerline != Treatment::Hard && left_lane_free(scene, cfg, until) {
            return Maneuver::LaneChangeLeft;
        }
        return Maneuver::Follow;
    }
    if !blocked {
        return Maneuver::EvadeInLane;
    }
    Maneuver::Follow
}

/// Picks the directive for the current cycle.
///
/// An unsafe verdict whose admissible speed is below the stop threshold
/// yields a stop; otherwise the maneuver comes from the rule table and the
/// speed setpoint is the lower of cruise speed and admissible speed.
/// The occupancy only reaches the decision through the verdict.
pub fn decide(
    scene: &Scene,
    _occupancy: &OccupancySchedule,
    verdict: &SafetyVerdict,
    rules: &RuleContext,
    cfg: &TacticalConfig,
) -> TacticalDirective {
    let ref_y = reference_y(scene, cfg);
    let mut centerline = centerline_treatment(scene, cfg);
    let base = TacticalDirective {
        maneuver: Maneuver::Stop,
        target_pose: TargetPose {
            station: scene.ego.pose.x,
            e: (scene.ego.pose.y - ref_y).clamp(
                scene.road.drivable.y_min - ref_y,
                scene.road.drivable.y_max - ref_y,
            ),
            dpsi: 0.0,
        },
        reference_y: ref_y,
        centerline_treatment: centerline,
        occupancy_treatment: cfg.occupancy,
        slack_weight_override: cfg.slack_weight_override,
        speed_setpoint: 0.0,
    };
    if !verdict.guaranteed && verdict.required_speed < cfg.stop_threshold {
        return TacticalDirective {
            target_pose: TargetPose {
                station: scene.ego.pose.x + verdict.stopping_distance,
                ..base.target_pose
            },
            ..base
        };
    }
    let mut maneuver = choose_maneuver(scene, cfg, centerline);
    let pose = match select_target_pose(scene, maneuver, rules, cfg) {
        Ok(p) => p,
        Err(_) => {
            maneuver = Maneuver::Follow;
            select_target_pose(scene, maneuver, rules, cfg).expect("follow always has a pose")
        }
    };
    if matches!(maneuver, Maneuver::LaneChangeLeft | Maneuver::LaneChangeRight) && cfg.centerline.is_none() {
        // crossing the line is the decision itself
        centerline = Treatment::Ignored;
    }
    let cruise = cfg.cruise_speed.unwrap_or(scene.ego.speed);
    TacticalDirective {
        maneuver,
        target_pose: pose,
        centerline_treatment: centerline,
        speed_setpoint: cruise.min(verdict.required_speed).max(0.0),
        ..base
    }
}

/// Lateral extent of `poly` over the ego footprint's station interval.
fn extent(poly: &crate::geometry::Polygon, x0: f64, x1: f64) -> Option<(f64, f64)> {
    poly.y_extent_in_slab(x0, x1)
}

/// Subtracts `holes` from `[lo, hi]` and returns the remaining piece
/// closest to `near`.
fn free_piece(lo: f64, hi: f64, holes: &mut Vec<(f64, f64)>, near: f64) -> Option<(f64, f64)> {
    holes.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut pieces = Vec::new();
    let mut cur = lo;
    for &(a, b) in holes.iter() {
        if a > cur {
            pieces.push((cur, a.min(hi)));
        }
        cur = cur.max(b);
        if cur >= hi {
            break;
        }
    }
    if cur < hi {
        pieces.push((cur, hi));
    }
    pieces.retain(|(a, b)| b >= a);
    let dist = |p: &(f64, f64)| {
        if near < p.0 {
            p.0 - near
        } else if near > p.1 {
            near - p.1
        } else {
            0.0
        }
    };
    // ties go to the left piece
    pieces
        .into_iter()
        .rev()
        .min_by(|a, b| dist(a).total_cmp(&dist(b)))
}

/// Polygons of a step that constrain the lateral motion. Perceived
/// occupancy inside the reference lane belongs to the longitudinal
/// (speed) decision and is left out.
fn lateral_occupancy<'a>(step: &'a OccupancyStep, lane: Option<Band>) -> impl Iterator<Item = &'a crate::geometry::Polygon> {
    step.hidden.iter().chain(
        step.perceived
            .iter()
            .filter(move |p| lane.map_or(true, |l| !l.contains(p.centroid().y))),
    )
}

/// Turns a directive and the predicted occupancy into per-step lateral
/// bounds for the planner.
///
/// Step `k` looks at the stations covered by the ego footprint at
/// `x + v·k·dt`. Hard bounds come from the drivable band and the statics
/// (both shrunk by the ego half-width), plus the center line when it is
/// hard. Each occupancy polygon bounds `e` from the side with more room.
pub fn make_schedule(
    scene: &Scene,
    occupancy: &OccupancySchedule,
    directive: &TacticalDirective,
    config: &MpcConfig,
) -> Result<ConstraintSchedule, TacticalError> {
    let ego = &scene.ego;
    let hw = ego.half_width();
    let ref_y = directive.reference_y;
    let lane = scene
        .road
        .lane_index(ref_y)
        .map(|i| scene.road.lanes()[i]);
    let centerline = scene.road.left_marking(ref_y).map(|m| m.lateral_offset);
    let inflated = scene.inflated_statics();
    let band_lo = scene.road.drivable.y_min + hw;
    let band_hi = scene.road.drivable.y_max - hw;
    let mut near = ego.pose.y;
    let mut steps = Vec::with_capacity(config.horizon_n);
    for k in 1..=config.horizon_n {
        let xk = ego.pose.x + ego.speed * k as f64 * config.dt;
        let (x0, x1) = (xk - 0.5 * ego.length, xk + 0.5 * ego.length);
        let mut holes: Vec<(f64, f64)> = inflated.iter().filter_map(|p| extent(p, x0, x1)).collect();
        let occ: Vec<(f64, f64)> = occupancy
            .at(k)
            .map(|s| lateral_occupancy(s, lane).filter_map(|p| extent(p, x0, x1)).collect())
            .unwrap_or_default();
        let physical = free_piece(band_lo, band_hi, &mut holes.clone(), near);

        let mut hi = band_hi;
        if directive.centerline_treatment == Treatment::Hard {
            if let Some(c) = centerline {
                hi = hi.min(c - hw);
            }
        }
        if directive.occupancy_treatment == OccupancyTreatment::Hard {
            holes.extend(occ.iter().map(|(a, b)| (a - hw, b + hw)));
        }
        let (lo_k, hi_k) = free_piece(band_lo, hi, &mut holes, near)
            .filter(|(a, b)| a <= b)
            .ok_or(TacticalError::OverConstrained { step: k })?;
        near = near.clamp(lo_k, hi_k);

        let mut b = StepBounds {
            hard_e_min: lo_k - ref_y,
            hard_e_max: hi_k - ref_y,
            ..StepBounds::FREE
        };
        if directive.occupancy_treatment == OccupancyTreatment::Soft {
            let (p_lo, p_hi) = physical.unwrap_or((band_lo, band_hi));
            for &(a, c) in &occ {
                let push_up = (c + hw - p_hi).max(0.0);
                let push_down = (p_lo - (a - hw)).max(0.0);
                let below = if push_up != push_down {
                    push_up < push_down
                } else {
                    0.5 * (a + c) < ref_y
                };
                if below {
                    b.soft_e_min = b.soft_e_min.max(c + hw - ref_y);
                } else {
                    b.soft_e_max = b.soft_e_max.min(a - hw - ref_y);
                }
            }
        }
        if directive.centerline_treatment == Treatment::Soft {
            if let Some(c) = centerline {
                b.soft_e_max = b.soft_e_max.min(c - hw - ref_y);
            }
        }
        steps.push(b);
    }
    let last = steps.last().copied().unwrap_or(StepBounds::FREE);
    let target_e = directive.target_pose.e;
    if target_e < last.hard_e_min - 1e-9 || target_e > last.hard_e_max + 1e-9 {
        return Err(TacticalError::OverConstrained { step: config.horizon_n });
    }
    Ok(ConstraintSchedule {
        steps,
        target_e,
        target_dpsi: directive.target_pose.dpsi,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_round_trip() {
        for m in [
            Maneuver::Follow,
            Maneuver::LaneChangeLeft,
            Maneuver::LaneChangeRight,
            Maneuver::EvadeInLane,
            Maneuver::Stop,
        ] {
            assert_eq!(Maneuver::from_name(m.name()), Some(m));
        }
        for t in [Treatment::Hard, Treatment::Soft, Treatment::Ignored] {
            assert_eq!(Treatment::from_name(t.name()), Some(t));
        }
        assert_eq!(OccupancyTreatment::from_name("ignored"), None);
    }

    #[test]
    fn free_piece_picks_the_nearest_gap() {
        let mut holes = alloc::vec![(-1.0, 1.0)];
        assert_eq!(free_piece(-3.0, 3.0, &mut holes, -0.2), Some((-3.0, -1.0)));
        assert_eq!(free_piece(-3.0, 3.0, &mut holes, 0.0), Some((1.0, 3.0)));
        let mut all = alloc::vec![(-4.0, 4.0)];
        assert_eq!(free_piece(-3.0, 3.0, &mut all, 0.0), None);
    }
}
