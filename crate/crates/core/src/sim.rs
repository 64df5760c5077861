//! Closed-loop receding-horizon simulation.
//!
//! Every cycle recomputes occlusions and occupancy from the current ego
//! pose, assesses safety, asks the tactical layer for a directive, plans,
//! applies the first steering input to the plant and advances the traffic.
//! The plant is the planning model, optionally with a bounded random state
//! disturbance.

use alloc::string::String;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::geometry::{Point2, Polygon};
use crate::mpc::{ConstraintSchedule, Diagnostic, MpcConfig, MpcError, Planner, Trajectory};
use crate::prediction::{self, HiddenObjectParams, PredictionConfig, PredictionError};
use crate::safety::{self, SafetyConfig, SafetyError, SafetyVerdict};
use crate::scene::{Scene, SceneError};
use crate::tactical::{self, Maneuver, RuleContext, TacticalConfig, TacticalDirective, TacticalError};
use crate::vehicle::{ControlInput, DiscreteModel, LateralState, SingleTrackParams, VehicleError, MIN_SPEED};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SimError {
    #[error("scene: {0}")]
    Scene(#[from] SceneError),
    #[error("prediction: {0}")]
    Prediction(#[from] PredictionError),
    #[error("safety: {0}")]
    Safety(#[from] SafetyError),
    #[error("vehicle: {0}")]
    Vehicle(#[from] VehicleError),
    #[error("planner: {0}")]
    Mpc(#[from] MpcError),
    #[error("invalid simulation setting {0}")]
    InvalidConfig(&'static str),
    #[error("logs have {0} and {1} cycles")]
    CycleMismatch(usize, usize),
}

/// Whether the safety verdict may change the directive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SafetyGate {
    #[default]
    Enforce,
    /// Verdicts are recorded but the tactical layer never sees them.
    LogOnly,
}

/// Uniform additive disturbance on the lateral state, per cycle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Disturbance {
    pub amplitude: [f64; 4],
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub cycles: usize,
    pub mpc: MpcConfig,
    pub prediction: PredictionConfig,
    pub hidden: HiddenObjectParams,
    pub safety: SafetyConfig,
    pub safety_gate: SafetyGate,
    pub tactical: TacticalConfig,
    pub rules: RuleContext,
    /// Vehicle parameters; the speed field is replaced every cycle.
    pub vehicle: SingleTrackParams,
    /// Acceleration used to reach a higher speed setpoint, m/s².
    pub accel: f64,
    pub disturbance: Option<Disturbance>,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            cycles: 60,
            mpc: MpcConfig::default(),
            prediction: PredictionConfig::default(),
            hidden: HiddenObjectParams { v0: 1.3, a_wc: 0.3 },
            safety: SafetyConfig::default(),
            safety_gate: SafetyGate::Enforce,
            tactical: TacticalConfig::default(),
            rules: RuleContext::default(),
            vehicle: SingleTrackParams::nominal(10.0),
            accel: 2.0,
            disturbance: None,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        self.mpc.validate()?;
        if !(self.accel > 0.0) {
            return Err(SimError::InvalidConfig("accel"));
        }
        if let Some(d) = &self.disturbance {
            if d.amplitude.iter().any(|a| !(*a >= 0.0 && a.is_finite())) {
                return Err(SimError::InvalidConfig("disturbance.amplitude"));
            }
        }
        self.vehicle.with_speed(MIN_SPEED + 1.0).validate()?;
        Ok(())
    }
}

/// Source of wall-clock time for the planning-time record.
pub trait Clock {
    fn now_ms(&mut self) -> f64;
}

/// Clock that always reads zero.
#[derive(Debug, Clone, Copy, Default)]
pub struct NullClock;

impl Clock for NullClock {
    fn now_ms(&mut self) -> f64 {
        0.0
    }
}

#[cfg(feature = "std")]
#[derive(Debug, Clone, Copy)]
pub struct StdClock(std::time::Instant);

#[cfg(feature = "std")]
impl Default for StdClock {
    fn default() -> Self {
        Self(std::time::Instant::now())
    }
}

#[cfg(feature = "std")]
impl Clock for StdClock {
    fn now_ms(&mut self) -> f64 {
        self.0.elapsed().as_secs_f64() * 1e3
    }
}

/// Why a cycle did not produce a regular plan.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CycleIssue {
    /// Hard constraints leave no room at this step.
    OverConstrained { step: usize },
    /// The QP was infeasible or did not converge.
    PlanFailed(Option<Diagnostic>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct CycleRecord {
    pub cycle: usize,
    pub t: f64,
    pub station: f64,
    pub speed: f64,
    /// Lateral state at the start of the cycle.
    pub state: LateralState,
    pub directive: TacticalDirective,
    pub verdict: SafetyVerdict,
    pub schedule: Option<ConstraintSchedule>,
    pub plan: Option<Trajectory>,
    pub applied: ControlInput,
    /// Slack of the first planned step.
    pub slack: f64,
    /// Slack term of this cycle's plan, `Σ s·ε(k)²` over the horizon.
    pub slack_cost: f64,
    pub disturbance: [f64; 4],
    pub issue: Option<CycleIssue>,
    pub occlusions: Vec<Polygon>,
    /// Occupancy at the end of the prediction horizon.
    pub occupancy: Vec<Polygon>,
    pub planning_ms: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    Completed,
    /// The ego reached standstill after a stop directive.
    Stopped { cycle: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimLog {
    pub initial: Scene,
    pub dt: f64,
    pub reference_y: f64,
    pub slack_weight: f64,
    pub vehicle: SingleTrackParams,
    pub cycles: Vec<CycleRecord>,
    /// State after the last cycle.
    pub final_state: LateralState,
    pub final_station: f64,
    pub final_speed: f64,
    pub termination: Termination,
}

impl SimLog {
    pub fn slack_costs(&self) -> Vec<f64> {
        self.cycles.iter().map(|c| c.slack_cost).collect()
    }

    pub fn total_slack_cost(&self) -> f64 {
        self.cycles.iter().map(|c| c.slack_cost).sum()
    }

    pub fn directive_log(&self) -> Vec<String> {
        self.cycles.iter().map(|c| c.directive.log_line(c.cycle)).collect()
    }

    /// Copy with the wall-clock fields cleared.
    pub fn without_timing(&self) -> Self {
        let mut log = self.clone();
        for c in &mut log.cycles {
            c.planning_ms = 0.0;
        }
        log
    }

    /// Lateral states at the start of every cycle followed by the final
    /// state.
    pub fn states(&self) -> Vec<LateralState> {
        let mut v: Vec<LateralState> = self.cycles.iter().map(|c| c.state).collect();
        v.push(self.final_state);
        v
    }
}

fn no_constraint_verdict(v: &SafetyVerdict) -> SafetyVerdict {
    SafetyVerdict {
        guaranteed: true,
        required_speed: f64::INFINITY,
        ..*v
    }
}

/// Runs the perceive, predict, assess, decide, plan and act loop.
pub fn run_closed_loop(scene: &Scene, cfg: &SimConfig, clock: &mut dyn Clock) -> Result<SimLog, SimError> {
    scene.validate()?;
    cfg.validate()?;
    let dt = cfg.mpc.dt;
    let mut world = scene.clone();
    let mut tactical_cfg = cfg.tactical;
    if tactical_cfg.reference_lane.is_none() {
        // the reference path stays fixed for the whole run
        tactical_cfg.reference_lane = world.road.lane_index(world.ego.pose.y);
    }
    let ref_y = tactical::reference_y(&world, &tactical_cfg);
    let mut x = LateralState::new(world.ego.pose.y - ref_y, world.ego.pose.heading, 0.0, 0.0);
    let mut mpc_cfg = cfg.mpc;
    if let Some(s) = cfg.tactical.slack_weight_override {
        mpc_cfg.slack_weight = s;
    }
    let mut planner = Planner::new(mpc_cfg);
    let mut rng = cfg.disturbance.map(|d| ChaCha8Rng::seed_from_u64(d.seed));
    let mut stopping = false;
    let mut cycles = Vec::with_capacity(cfg.cycles);
    let mut termination = Termination::Completed;

    for cycle in 0..cfg.cycles {
        world.ego.pose.y = ref_y + x.e;
        world.ego.pose.heading = x.dpsi;
        let occupancy = prediction::occupancy_schedule_with(&world, cfg.hidden, &cfg.prediction)?;
        let verdict = safety::assess(&world.ego, &occupancy, Point2::new(1.0, 0.0), &cfg.safety)?;
        let seen = match cfg.safety_gate {
            SafetyGate::Enforce => verdict,
            SafetyGate::LogOnly => no_constraint_verdict(&verdict),
        };
        let mut directive = tactical::decide(&world, &occupancy, &seen, &cfg.rules, &tactical_cfg);
        if stopping || directive.maneuver == Maneuver::Stop {
            stopping = true;
            directive = stop_directive(&world, &directive, &verdict);
        }

        let speed = world.ego.speed;
        let started = clock.now_ms();
        let mut issue = None;
        let mut schedule = None;
        let mut plan = None;
        let mut applied = ControlInput::default();
        let mut model = None;
        if speed > MIN_SPEED {
            let m = DiscreteModel::new(&cfg.vehicle.with_speed(speed), dt)?;
            match tactical::make_schedule(&world, &occupancy, &directive, &mpc_cfg) {
                Ok(s) => {
                    let t = planner.plan(&m, &s, x)?;
                    if t.feasible {
                        applied = t.inputs[0];
                    } else {
                        issue = Some(CycleIssue::PlanFailed(t.diagnostic));
                    }
                    plan = Some(t);
                    schedule = Some(s);
                }
                Err(TacticalError::OverConstrained { step }) => {
                    issue = Some(CycleIssue::OverConstrained { step });
                }
                Err(_) => issue = Some(CycleIssue::PlanFailed(None)),
            }
            model = Some(m);
        }
        let planning_ms = clock.now_ms() - started;
        if issue.is_some() && !stopping {
            // recovery: brake to standstill while holding the wheel straight
            stopping = true;
            directive = stop_directive(&world, &directive, &verdict);
            planner.reset();
        }

        let (slack, slack_cost) = match (&plan, issue) {
            (Some(t), None) => (t.slack[0], t.total_slack_cost()),
            _ => (0.0, 0.0),
        };
        let mut disturbance = [0.0; 4];
        if let (Some(d), Some(r)) = (&cfg.disturbance, rng.as_mut()) {
            for (i, a) in d.amplitude.iter().enumerate() {
                if *a > 0.0 {
                    disturbance[i] = r.gen_range(-*a..=*a);
                }
            }
        }
        let occlusions = world.compute_occlusions();
        let last_occupancy = occupancy
            .steps
            .last()
            .map(|s| s.polygons().cloned().collect())
            .unwrap_or_default();
        cycles.push(CycleRecord {
            cycle,
            t: cycle as f64 * dt,
            station: world.ego.pose.x,
            speed,
            state: x,
            directive,
            verdict,
            schedule,
            plan,
            applied,
            slack,
            slack_cost,
            disturbance,
            issue,
            occlusions,
            occupancy: last_occupancy,
            planning_ms,
        });

        x = propagate(model.as_ref(), x, applied, disturbance);
        let next_speed = longitudinal(speed, directive.speed_setpoint, world.ego.max_decel, cfg.accel, dt);
        world.ego.pose.x += 0.5 * (speed + next_speed) * dt;
        world.ego.speed = next_speed;
        world.advance_objects(dt);
        if stopping && next_speed == 0.0 {
            termination = Termination::Stopped { cycle };
            break;
        }
    }

    Ok(SimLog {
        initial: scene.clone(),
        dt,
        reference_y: ref_y,
        slack_weight: mpc_cfg.slack_weight,
        vehicle: cfg.vehicle,
        cycles,
        final_state: x,
        final_station: world.ego.pose.x,
        final_speed: world.ego.speed,
        termination,
    })
}

fn stop_directive(scene: &Scene, current: &TacticalDirective, verdict: &SafetyVerdict) -> TacticalDirective {
    let e = scene.ego.pose.y - current.reference_y;
    TacticalDirective {
        maneuver: Maneuver::Stop,
        target_pose: tactical::TargetPose {
            station: scene.ego.pose.x + verdict.stopping_distance,
            e,
            dpsi: 0.0,
        },
        speed_setpoint: 0.0,
        ..*current
    }
}

/// Plant step shared by the simulation and [`replay`].
fn propagate(model: Option<&DiscreteModel>, x: LateralState, u: ControlInput, w: [f64; 4]) -> LateralState {
    let next = match model {
        Some(m) => m.step(x, u),
        // below the model speed the lateral state is frozen
        None => x,
    };
    LateralState::new(next.e + w[0], next.dpsi + w[1], next.beta + w[2], next.omega + w[3])
}

fn longitudinal(v: f64, setpoint: f64, decel: f64, accel: f64, dt: f64) -> f64 {
    if setpoint < v {
        (v - decel * dt).max(setpoint).max(0.0)
    } else {
        (v + accel * dt).min(setpoint)
    }
}

/// Re-propagates the logged inputs open loop through the plant.
pub fn replay(log: &SimLog) -> Result<Vec<LateralState>, SimError> {
    let mut x = log.cycles.first().map_or(log.final_state, |c| c.state);
    let mut out = Vec::with_capacity(log.cycles.len() + 1);
    out.push(x);
    for c in &log.cycles {
        let model = if c.speed > MIN_SPEED {
            Some(DiscreteModel::new(&log.vehicle.with_speed(c.speed), log.dt)?)
        } else {
            None
        };
        x = propagate(model.as_ref(), x, c.applied, c.disturbance);
        out.push(x);
    }
    Ok(out)
}

/// Paired slack costs of two runs.
#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    /// Slack term of every cycle's plan.
    pub series_a: Vec<f64>,
    pub series_b: Vec<f64>,
    pub total_a: f64,
    pub total_b: f64,
    /// Per-step slack cost over the horizon of the first plan.
    pub first_plan_a: Vec<f64>,
    pub first_plan_b: Vec<f64>,
    /// Largest per-cycle absolute difference.
    pub max_abs_diff: f64,
}

impl Comparison {
    /// True if run `b` accumulates strictly more slack cost than run `a`.
    pub fn b_exceeds_a(&self) -> bool {
        self.total_b > self.total_a
    }

    /// First cycle with non-zero slack cost in each run.
    pub fn first_contact(&self) -> (Option<usize>, Option<usize>) {
        let first = |s: &[f64]| s.iter().position(|c| *c > 0.0);
        (first(&self.series_a), first(&self.series_b))
    }
}

pub fn compare_runs(a: &SimLog, b: &SimLog) -> Result<Comparison, SimError> {
    if a.cycles.len() != b.cycles.len() {
        return Err(SimError::CycleMismatch(a.cycles.len(), b.cycles.len()));
    }
    let series_a = a.slack_costs();
    let series_b = b.slack_costs();
    let max_abs_diff = series_a
        .iter()
        .zip(&series_b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max);
    let first_plan = |log: &SimLog| {
        log.cycles
            .first()
            .and_then(|c| c.plan.as_ref())
            .map(|t| t.slack_cost.clone())
            .unwrap_or_default()
    };
    Ok(Comparison {
        first_plan_a: first_plan(a),
        first_plan_b: first_plan(b),
        total_a: series_a.iter().sum(),
        total_b: series_b.iter().sum(),
        series_a,
        series_b,
        max_abs_diff,
    })
}

/// Largest violation of a logged plan against its own hard bounds.
pub fn hard_violation(schedule: &ConstraintSchedule, plan: &Trajectory) -> f64 {
    let mut worst: f64 = 0.0;
    for (b, x) in schedule.steps.iter().zip(plan.states.iter().skip(1)) {
        worst = worst.max(b.hard_e_min - x.e).max(x.e - b.hard_e_max);
    }
    if let Some(last) = plan.states.last() {
        worst = worst
            .max((last.e - schedule.target_e).abs())
            .max((last.dpsi - schedule.target_dpsi).abs());
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn longitudinal_profile() {
        assert_eq!(longitudinal(10.0, 0.0, 9.0, 2.0, 0.1), 9.1);
        assert_eq!(longitudinal(0.5, 0.0, 9.0, 2.0, 0.1), 0.0);
        assert!((longitudinal(5.0, 6.0, 9.0, 2.0, 0.1) - 5.2).abs() < 1e-12);
        assert_eq!(longitudinal(5.0, 5.1, 9.0, 2.0, 0.1), 5.1);
    }

    #[test]
    fn frozen_plant_below_model_speed() {
        let x = LateralState::new(0.3, 0.01, 0.0, 0.0);
        assert_eq!(propagate(None, x, ControlInput { delta_f: 0.2 }, [0.0; 4]), x);
    }
}
