//! Worst-case occupancy prediction for hidden and perceived road users.

use alloc::vec::Vec;

use crate::geometry::{self, Point2, Polygon};
use crate::scene::{ObjectKind, Scene};

/// Default lateral spreading rate of perceived vehicles, m/s.
pub const DEFAULT_LATERAL_RATE: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, thiserror::Error)]
pub enum PredictionError {
    #[error("negative prediction time {0}")]
    NegativeTime(f64),
    #[error("invalid prediction parameter {name}: {value}")]
    InvalidParameter { name: &'static str, value: f64 },
}

/// Bounds on an object that may be hidden in occluded space.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HiddenObjectParams {
    pub v0: f64,
    pub a_wc: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PredictionConfig {
    pub horizon_n: usize,
    pub dt: f64,
    pub lateral_rate: f64,
}

impl Default for PredictionConfig {
    fn default() -> Self {
        Self {
            horizon_n: 10,
            dt: 0.1,
            lateral_rate: DEFAULT_LATERAL_RATE,
        }
    }
}

/// Possibly occupied space at one prediction step.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct OccupancyStep {
    /// Grown occlusions (objects that may emerge from hidden space).
    pub hidden: Vec<Polygon>,
    /// Worst-case sets of perceived objects.
    pub perceived: Vec<Polygon>,
}

impl OccupancyStep {
    pub fn polygons(&self) -> impl Iterator<Item = &Polygon> {
        self.hidden.iter().chain(self.perceived.iter())
    }

    pub fn is_empty(&self) -> bool {
        self.hidden.is_empty() && self.perceived.is_empty()
    }

    pub fn contains(&self, p: Point2) -> bool {
        self.polygons().any(|q| q.contains(p))
    }
}

/// Occupancy for steps `k = 1..=N`; `steps[k - 1]` holds time `k * dt`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct OccupancySchedule {
    pub dt: f64,
    pub steps: Vec<OccupancyStep>,
}

impl OccupancySchedule {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// True if no step holds any polygon.
    pub fn is_clear(&self) -> bool {
        self.steps.iter().all(OccupancyStep::is_empty)
    }

    /// Step for planner index `k` (1-based); indices past the prediction
    /// horizon reuse the last step.
    pub fn at(&self, k: usize) -> Option<&OccupancyStep> {
        if self.steps.is_empty() {
            return None;
        }
        Some(&self.steps[k.clamp(1, self.steps.len()) - 1])
    }
}

/// Distance a hidden object can cover within `t` seconds.
pub fn reachable_radius(v0: f64, a_wc: f64, t: f64) -> Result<f64, PredictionError> {
    if t < 0.0 || t.is_nan() {
        return Err(PredictionError::NegativeTime(t));
    }
    Ok(v0 * t + 0.5 * a_wc * t * t)
}

/// Occupancy schedule with the default lateral spreading rate.
pub fn occupancy_schedule(
    scene: &Scene,
    hidden: HiddenObjectParams,
    horizon_n: usize,
    dt: f64,
) -> Result<OccupancySchedule, PredictionError> {
    occupancy_schedule_with(
        scene,
        hidden,
        &PredictionConfig {
            horizon_n,
            dt,
            lateral_rate: DEFAULT_LATERAL_RATE,
        },
    )
}

pub fn occupancy_schedule_with(
    scene: &Scene,
    hidden: HiddenObjectParams,
    cfg: &PredictionConfig,
) -> Result<OccupancySchedule, PredictionError> {
    check(cfg, hidden)?;
    let occlusions = scene.compute_occlusions();
    let steps = (1..=cfg.horizon_n)
        .map(|k| {
            let raw = raw_step(scene, &occlusions, hidden, cfg.lateral_rate, k as f64 * cfg.dt);
            clip_step(scene, raw)
        })
        .collect();
    Ok(OccupancySchedule { dt: cfg.dt, steps })
}

/// Occupancy at time `t` before clipping to drivable and walkable space.
pub fn raw_occupancy(
    scene: &Scene,
    hidden: HiddenObjectParams,
    lateral_rate: f64,
    t: f64,
) -> Result<OccupancyStep, PredictionError> {
    reachable_radius(0.0, 0.0, t)?;
    Ok(raw_step(scene, &scene.compute_occlusions(), hidden, lateral_rate, t))
}

fn check(cfg: &PredictionConfig, h: HiddenObjectParams) -> Result<(), PredictionError> {
    let bad = |name, value: f64| Err(PredictionError::InvalidParameter { name, value });
    if cfg.horizon_n == 0 {
        return bad("horizon_n", 0.0);
    }
    if !(cfg.dt > 0.0 && cfg.dt.is_finite()) {
        return bad("dt", cfg.dt);
    }
    if !(cfg.lateral_rate >= 0.0) {
        return bad("lateral_rate", cfg.lateral_rate);
    }
    if !(h.v0 >= 0.0) {
        return bad("v0", h.v0);
    }
    if !(h.a_wc >= 0.0) {
        return bad("a_wc", h.a_wc);
    }
    Ok(())
}

fn raw_step(
    scene: &Scene,
    occlusions: &[Polygon],
    hidden: HiddenObjectParams,
    lateral_rate: f64,
    t: f64,
) -> OccupancyStep {
    let r = hidden.v0 * t + 0.5 * hidden.a_wc * t * t;
    let hidden = occlusions.iter().map(|o| geometry::grow_region(o, r)).collect();
    let perceived = scene
        .dynamics
        .iter()
        .map(|o| {
            let fp = o.world_footprint();
            let reach = o.speed * t + 0.5 * o.max_accel * t * t;
            match o.kind {
                ObjectKind::Vehicle => {
                    let dir = o.pose.direction();
                    let swept = geometry::sweep_region(&fp, dir, 0.0, reach);
                    let side = lateral_rate * t;
                    geometry::sweep_region(&swept, Point2::new(-dir.y, dir.x), side, side)
                }
                ObjectKind::Pedestrian => geometry::grow_region(&fp, reach),
            }
        })
        .collect();
    OccupancyStep { hidden, perceived }
}

fn clip_step(scene: &Scene, raw: OccupancyStep) -> OccupancyStep {
    let span = |polys: &[Polygon]| {
        polys.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
            let b = p.bbox();
            (lo.min(b.min.x), hi.max(b.max.x))
        })
    };
    let clip_to = |polys: &[Polygon], walkable: bool| -> Vec<Polygon> {
        let (x0, x1) = span(polys);
        if !(x0 < x1) {
            return Vec::new();
        }
        let bands = if walkable {
            scene.space_bands()
        } else {
            alloc::vec![scene.road.drivable]
        };
        bands
            .iter()
            .filter_map(|b| b.rectangle(x0 - 1.0, x1 + 1.0))
            .flat_map(|w| geometry::clip_all(polys, &w).unwrap_or_default())
            .collect()
    };
    // vehicles stay on the road, pedestrians may use the sidewalk
    let (mut vehicles, mut walkers) = (Vec::new(), Vec::new());
    for (p, o) in raw.perceived.into_iter().zip(&scene.dynamics) {
        match o.kind {
            ObjectKind::Vehicle => vehicles.push(p),
            ObjectKind::Pedestrian => walkers.push(p),
        }
    }
    let mut perceived = clip_to(&vehicles, false);
    perceived.extend(clip_to(&walkers, true));
    OccupancyStep {
        hidden: clip_to(&raw.hidden, true),
        perceived,
    }
}
