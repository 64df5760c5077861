//! Stopping-distance safety checks against predicted occupancy.

use alloc::vec::Vec;

use crate::geometry::{self, Point2, Polygon};
use crate::prediction::OccupancySchedule;
use crate::scene::EgoState;

/// Lateral margin added to the ego width when forming the driving corridor.
pub const CORRIDOR_MARGIN: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, thiserror::Error)]
pub enum SafetyError {
    #[error("deceleration must be positive, got {0}")]
    InvalidDeceleration(f64),
    #[error("speed must be non-negative, got {0}")]
    NegativeSpeed(f64),
    #[error("gap must be non-negative, got {0}")]
    NegativeGap(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SafetyConfig {
    /// Delay before braking starts, seconds.
    pub reaction_time: f64,
    /// Gap reported when nothing intrudes into the corridor (sensor range).
    pub free_range: f64,
    pub corridor_margin: f64,
}

impl Default for SafetyConfig {
    fn default() -> Self {
        Self {
            reaction_time: 0.0,
            free_range: crate::scene::DEFAULT_SENSOR_RANGE,
            corridor_margin: CORRIDOR_MARGIN,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SafetyVerdict {
    pub guaranteed: bool,
    /// Smallest distance from the front bumper to occupancy in the corridor.
    pub min_gap: f64,
    pub stopping_distance: f64,
    /// `min_gap - stopping_distance`; positive exactly when guaranteed.
    pub margin: f64,
    /// 1-based prediction step that produced `min_gap`.
    pub binding_step: Option<usize>,
    /// Highest speed that can still stop within `min_gap`.
    pub required_speed: f64,
}

/// Braking distance `v² / (2a)` under constant deceleration.
pub fn stopping_distance(v: f64, a_dec: f64) -> Result<f64, SafetyError> {
    stopping_distance_with_reaction(v, a_dec, 0.0)
}

/// Braking distance with an initial reaction delay at constant speed.
pub fn stopping_distance_with_reaction(
    v: f64,
    a_dec: f64,
    reaction_time: f64,
) -> Result<f64, SafetyError> {
    if !(a_dec > 0.0) {
        return Err(SafetyError::InvalidDeceleration(a_dec));
    }
    if !(v >= 0.0) {
        return Err(SafetyError::NegativeSpeed(v));
    }
    Ok(v * reaction_time + v * v / (2.0 * a_dec))
}

/// Highest speed whose braking distance equals `gap`.
pub fn max_safe_speed(gap: f64, a_dec: f64) -> Result<f64, SafetyError> {
    max_safe_speed_with_reaction(gap, a_dec, 0.0)
}

pub fn max_safe_speed_with_reaction(
    gap: f64,
    a_dec: f64,
    reaction_time: f64,
) -> Result<f64, SafetyError> {
    if !(a_dec > 0.0) {
        return Err(SafetyError::InvalidDeceleration(a_dec));
    }
    if !(gap >= 0.0) {
        return Err(SafetyError::NegativeGap(gap));
    }
    if reaction_time <= 0.0 {
        return Ok(libm::sqrt(2.0 * a_dec * gap));
    }
    let tr = reaction_time;
    Ok(a_dec * (libm::sqrt(tr * tr + 2.0 * gap / a_dec) - tr))
}

/// Gap from the front bumper to the first occupancy intruding into the ego
/// corridor, for every prediction step.
///
/// The corridor runs along `lane_direction` from the front bumper, with the
/// ego width plus the configured margin. `None` marks steps without
/// intrusion.
pub fn corridor_gaps(
    ego: &EgoState,
    schedule: &OccupancySchedule,
    lane_direction: Point2,
    cfg: &SafetyConfig,
) -> Vec<Option<f64>> {
    let dir = lane_direction * (1.0 / lane_direction.norm());
    let angle = dir.angle();
    let to_frame = |p: &Polygon| p.rotate_about(Point2::default(), -angle);
    let ego_pos = ego.pose.position().rotate(-angle);
    let half = 0.5 * (ego.width + cfg.corridor_margin);
    let front = ego.front(dir);
    let far = front + cfg.free_range.max(1.0) * 4.0 + 1e3;
    let corridor = Polygon::rectangle(
        Point2::new(front, ego_pos.y - half),
        Point2::new(far, ego_pos.y + half),
    )
    .expect("corridor has positive size");
    schedule
        .steps
        .iter()
        .map(|step| {
            step.polygons()
                .filter_map(|p| {
                    let pieces = geometry::clip(&to_frame(p), &corridor).ok()?;
                    pieces
                        .iter()
                        .flat_map(|q| q.vertices().iter().map(|v| v.x))
                        .reduce(f64::min)
                })
                .reduce(f64::min)
                .map(|x| (x - front).max(0.0))
        })
        .collect()
}

/// Checks whether the ego can stop before every predicted occupancy.
pub fn assess(
    ego: &EgoState,
    schedule: &OccupancySchedule,
    lane_direction: Point2,
    cfg: &SafetyConfig,
) -> Result<SafetyVerdict, SafetyError> {
    let sd = stopping_distance_with_reaction(ego.speed, ego.max_decel, cfg.reaction_time)?;
    let mut min_gap = cfg.free_range;
    let mut binding_step = None;
    for (k, gap) in corridor_gaps(ego, schedule, lane_direction, cfg)
        .into_iter()
        .enumerate()
    {
        if let Some(g) = gap {
            if binding_step.is_none() || g < min_gap {
                min_gap = g;
                binding_step = Some(k + 1);
            }
        }
    }
    let margin = min_gap - sd;
    Ok(SafetyVerdict {
        guaranteed: margin > 0.0,
        min_gap,
        stopping_distance: sd,
        margin,
        binding_step,
        required_speed: max_safe_speed_with_reaction(min_gap, ego.max_decel, cfg.reaction_time)?,
    })
}
