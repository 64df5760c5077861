//! Receding-horizon lateral trajectory planning with soft constraints.
//!
//! The QP is condensed: states are eliminated through the discrete
//! dynamics, so the decision vector holds only the inputs. Each step
//! contributes the pair `[δf(k), ε(k)]`, where `ε` is a non-negative slack
//! input shared by the lower and upper soft bound on `e(k + 1)`.
//!
//! Cost: `Σ x(k)ᵀ Q x(k) + R δf(k)² + s ε(k)²` over the horizon.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector, Matrix4, Vector4};

use crate::qp::{self, QpError, QpProblem, QpSettings, QpSolution, QpSolver, QpStatus, WarmStart, WorkingSet};
use crate::vehicle::{self, ControlInput, DiscreteModel, LateralState, DEFAULT_STEER_LIMIT};

/// Inequality rows per step: hard bound, soft lower, soft upper.
const ROWS_PER_STEP: usize = 3;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MpcError {
    #[error("invalid MPC configuration: {0}")]
    InvalidConfig(&'static str),
    #[error("constraint schedule has {got} steps, expected {expected}")]
    ScheduleLength { expected: usize, got: usize },
    #[error("hard bounds are empty at step {step}")]
    OverConstrained { step: usize },
    #[error("non-finite value in the constraint schedule at step {step}")]
    NonFinite { step: usize },
    #[error("QP: {0}")]
    Qp(#[from] QpError),
}

/// Penalty applied to the slack input.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SlackPenalty {
    #[default]
    Quadratic,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MpcConfig {
    pub horizon_n: usize,
    pub dt: f64,
    /// Diagonal of `Q` over `[e, dpsi, beta, omega]`.
    pub state_weights: [f64; 4],
    pub input_weight: f64,
    pub slack_weight: f64,
    pub slack_penalty: SlackPenalty,
    /// Upper bound on `ε`, meters; `None` leaves it unbounded.
    pub slack_bound: Option<f64>,
    pub steer_limit: f64,
}

impl Default for MpcConfig {
    fn default() -> Self {
        let mut cfg = Self {
            horizon_n: 60,
            dt: 0.1,
            state_weights: [1.0, 5.0, 5.0, 100.0],
            input_weight: 100.0,
            slack_weight: 0.0,
            slack_penalty: SlackPenalty::Quadratic,
            slack_bound: None,
            steer_limit: DEFAULT_STEER_LIMIT,
        };
        cfg.slack_weight = cfg.factor_slack_weight(3.0);
        cfg
    }
}

impl MpcConfig {
    /// Slack weight `factor` times the largest state or input weight.
    pub fn factor_slack_weight(&self, factor: f64) -> f64 {
        factor
            * self
                .state_weights
                .iter()
                .copied()
                .fold(self.input_weight, f64::max)
    }

    pub fn validate(&self) -> Result<(), MpcError> {
        if self.horizon_n < 2 {
            return Err(MpcError::InvalidConfig("horizon_n must be at least 2"));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(MpcError::InvalidConfig("dt must be positive"));
        }
        let weights = self
            .state_weights
            .iter()
            .chain([&self.input_weight, &self.slack_weight]);
        if weights.clone().any(|w| !(*w >= 0.0 && w.is_finite())) {
            return Err(MpcError::InvalidConfig("weights must be non-negative"));
        }
        if !(self.steer_limit > 0.0) {
            return Err(MpcError::InvalidConfig("steer_limit must be positive"));
        }
        if let Some(b) = self.slack_bound {
            if !(b >= 0.0) {
                return Err(MpcError::InvalidConfig("slack_bound must be non-negative"));
            }
        }
        Ok(())
    }
}

/// Lateral bounds on `e` at one step; infinite values mean "no bound".
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepBounds {
    pub hard_e_min: f64,
    pub hard_e_max: f64,
    pub soft_e_min: f64,
    pub soft_e_max: f64,
}

impl StepBounds {
    pub const FREE: Self = Self {
        hard_e_min: f64::NEG_INFINITY,
        hard_e_max: f64::INFINITY,
        soft_e_min: f64::NEG_INFINITY,
        soft_e_max: f64::INFINITY,
    };

    pub fn has_soft(&self) -> bool {
        self.soft_e_min.is_finite() || self.soft_e_max.is_finite()
    }
}

impl Default for StepBounds {
    fn default() -> Self {
        Self::FREE
    }
}

/// Per-step bounds for `e(k)`, `k = 1..=N`, plus the terminal target.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintSchedule {
    /// `steps[k - 1]` constrains `e(k)`.
    pub steps: Vec<StepBounds>,
    pub target_e: f64,
    pub target_dpsi: f64,
}

impl ConstraintSchedule {
    /// No bounds at all, terminal target on the reference path.
    pub fn free(n: usize) -> Self {
        Self {
            steps: vec![StepBounds::FREE; n],
            target_e: 0.0,
            target_dpsi: 0.0,
        }
    }

    /// Rejects empty hard intervals and NaN bounds.
    pub fn validate(&self) -> Result<(), MpcError> {
        for (i, s) in self.steps.iter().enumerate() {
            let step = i + 1;
            let vals = [s.hard_e_min, s.hard_e_max, s.soft_e_min, s.soft_e_max];
            if vals.iter().any(|v| v.is_nan()) {
                return Err(MpcError::NonFinite { step });
            }
            if s.hard_e_min > s.hard_e_max
                || s.hard_e_min == f64::INFINITY
                || s.hard_e_max == f64::NEG_INFINITY
            {
                return Err(MpcError::OverConstrained { step });
            }
        }
        if !(self.target_e.is_finite() && self.target_dpsi.is_finite()) {
            return Err(MpcError::NonFinite { step: self.steps.len() });
        }
        Ok(())
    }

    /// Same bounds one step later; the last step is repeated.
    pub fn shifted(&self) -> Self {
        let mut steps: Vec<StepBounds> = self.steps.iter().skip(1).copied().collect();
        if let Some(last) = self.steps.last() {
            steps.push(*last);
        }
        Self { steps, ..*self }
    }
}

/// Which constraint blocks a plan.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BindingConstraint {
    HardLower,
    HardUpper,
    Terminal,
    SteerLimit,
    SlackBound,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Diagnostic {
    /// 1-based step of the binding constraint.
    pub step: usize,
    pub constraint: BindingConstraint,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub dt: f64,
    /// `N + 1` states, starting with the initial one.
    pub states: Vec<LateralState>,
    pub inputs: Vec<ControlInput>,
    pub slack: Vec<f64>,
    /// `s·ε(k)²` per step.
    pub slack_cost: Vec<f64>,
    pub feasible: bool,
    pub status: QpStatus,
    pub objective: f64,
    pub iterations: usize,
    pub diagnostic: Option<Diagnostic>,
}

impl Trajectory {
    pub fn horizon(&self) -> usize {
        self.inputs.len()
    }

    pub fn total_slack_cost(&self) -> f64 {
        self.slack_cost.iter().sum()
    }

    /// Largest `‖x(k+1) − Ad x(k) − Bd δf(k)‖∞` over the horizon.
    pub fn dynamics_residual(&self, model: &DiscreteModel) -> f64 {
        self.states
            .windows(2)
            .zip(&self.inputs)
            .map(|(w, u)| (w[1].to_vector() - model.ad * w[0].to_vector() - model.bd * u.delta_f).amax())
            .fold(0.0, f64::max)
    }
}

/// Per-step slack cost of a planned trajectory.
pub fn slack_cost_series(traj: &Trajectory) -> Vec<f64> {
    traj.slack_cost.clone()
}

/// Prediction matrices of the condensed formulation:
/// `x(k) = Φ(k) x0 + Σ_j Γ(k, j) δf(j)` for `k = 1..=N`.
struct Condensed {
    /// Row block `k - 1` holds `A^k`.
    phi: Vec<Matrix4<f64>>,
    /// `4N × N`, row block `k - 1` holds the input response of `x(k)`.
    gamma: DMatrix<f64>,
}

fn condense(model: &DiscreteModel, n: usize) -> Condensed {
    let mut phi = Vec::with_capacity(n);
    let mut a_pow = Matrix4::identity();
    // impulse[i] = A^i B
    let mut impulse: Vec<Vector4<f64>> = Vec::with_capacity(n);
    for _ in 0..n {
        impulse.push(a_pow * model.bd);
        a_pow = model.ad * a_pow;
        phi.push(a_pow);
    }
    let mut gamma = DMatrix::zeros(4 * n, n);
    for k in 1..=n {
        for j in 0..k {
            gamma
                .fixed_view_mut::<4, 1>(4 * (k - 1), j)
                .copy_from(&impulse[k - 1 - j]);
        }
    }
    Condensed { phi, gamma }
}

/// Builds the condensed QP over `z = [δf(0), ε(0), …, δf(N−1), ε(N−1)]`.
///
/// Inequality row `3(k−1)` is the hard bound on `e(k)`, followed by the
/// soft lower row `e(k) + ε(k−1)` and the soft upper row `e(k) − ε(k−1)`.
/// The two equalities fix `e(N)` and `dpsi(N)`.
pub fn build_problem(
    model: &DiscreteModel,
    config: &MpcConfig,
    schedule: &ConstraintSchedule,
    x0: LateralState,
) -> Result<QpProblem, MpcError> {
    config.validate()?;
    let n = config.horizon_n;
    if schedule.steps.len() != n {
        return Err(MpcError::ScheduleLength {
            expected: n,
            got: schedule.steps.len(),
        });
    }
    schedule.validate()?;
    let Condensed { phi, gamma } = condense(model, n);
    let x0 = x0.to_vector();
    let q = config.state_weights;

    // δ-block: 2 (Γᵀ Q̄ Γ + R I); linear term 2 Γᵀ Q̄ Φ x0
    let mut qgamma = gamma.clone();
    for r in 0..4 * n {
        qgamma.row_mut(r).scale_mut(q[r % 4]);
    }
    let hdd = (gamma.transpose() * &qgamma + DMatrix::identity(n, n) * config.input_weight) * 2.0;
    let mut free = DVector::zeros(4 * n);
    for k in 0..n {
        free.fixed_rows_mut::<4>(4 * k).copy_from(&(phi[k] * x0));
    }
    let gd = qgamma.transpose() * &free * 2.0;

    let nz = 2 * n;
    let mut h = DMatrix::zeros(nz, nz);
    let mut g = DVector::zeros(nz);
    for i in 0..n {
        for j in 0..n {
            h[(2 * i, 2 * j)] = hdd[(i, j)];
        }
        h[(2 * i + 1, 2 * i + 1)] = 2.0 * config.slack_weight;
        g[2 * i] = gd[i];
    }
    // exact symmetry for the solver's check
    h = (&h + h.transpose()) * 0.5;

    let rows = ROWS_PER_STEP * n;
    let mut c = DMatrix::zeros(rows, nz);
    let mut l = DVector::from_element(rows, f64::NEG_INFINITY);
    let mut u = DVector::from_element(rows, f64::INFINITY);
    for k in 1..=n {
        let b = schedule.steps[k - 1];
        let e_free = free[4 * (k - 1)];
        let r = ROWS_PER_STEP * (k - 1);
        for j in 0..k {
            let coef = gamma[(4 * (k - 1), j)];
            for row in r..r + ROWS_PER_STEP {
                c[(row, 2 * j)] = coef;
            }
        }
        c[(r + 1, 2 * (k - 1) + 1)] = 1.0;
        c[(r + 2, 2 * (k - 1) + 1)] = -1.0;
        l[r] = b.hard_e_min - e_free;
        u[r] = b.hard_e_max - e_free;
        l[r + 1] = b.soft_e_min - e_free;
        u[r + 2] = b.soft_e_max - e_free;
    }

    let mut a_eq = DMatrix::zeros(2, nz);
    for j in 0..n {
        a_eq[(0, 2 * j)] = gamma[(4 * (n - 1), j)];
        a_eq[(1, 2 * j)] = gamma[(4 * (n - 1) + 1, j)];
    }
    let b_eq = DVector::from_vec(vec![
        schedule.target_e - free[4 * (n - 1)],
        schedule.target_dpsi - free[4 * (n - 1) + 1],
    ]);

    let slack_max = config.slack_bound.unwrap_or(f64::INFINITY);
    let mut zl = DVector::zeros(nz);
    let mut zu = DVector::zeros(nz);
    for i in 0..n {
        zl[2 * i] = -config.steer_limit;
        zu[2 * i] = config.steer_limit;
        zl[2 * i + 1] = 0.0;
        zu[2 * i + 1] = slack_max;
    }

    Ok(QpProblem::new(h, g)
        .with_equalities(a_eq, b_eq)
        .with_inequalities(c, l, u)
        .with_bounds(zl, zu))
}

/// Default solver settings for planning problems.
pub fn solver_settings() -> QpSettings {
    QpSettings {
        tol: 1e-8,
        max_iter: 1000,
    }
}

/// Plans from a cold start.
pub fn plan(
    model: &DiscreteModel,
    config: &MpcConfig,
    schedule: &ConstraintSchedule,
    x0: LateralState,
) -> Result<Trajectory, MpcError> {
    Planner::new(*config).plan(model, schedule, x0)
}

/// Planner that warm-starts each solve from the previous plan shifted by
/// one step.
#[derive(Debug, Clone)]
pub struct Planner {
    pub config: MpcConfig,
    solver: QpSolver,
}

impl Planner {
    pub fn new(config: MpcConfig) -> Self {
        Self {
            config,
            solver: QpSolver::new(solver_settings()),
        }
    }

    /// Drops the warm start.
    pub fn reset(&mut self) {
        self.solver.set_warm_start(None);
    }

    pub fn plan(
        &mut self,
        model: &DiscreteModel,
        schedule: &ConstraintSchedule,
        x0: LateralState,
    ) -> Result<Trajectory, MpcError> {
        let problem = build_problem(model, &self.config, schedule, x0)?;
        let sol = self.solver.solve(&problem)?;
        if sol.status == QpStatus::Optimal {
            self.solver.set_warm_start(Some(shift_warm_start(&sol)));
        } else {
            self.solver.set_warm_start(None);
        }
        Ok(self.trajectory(model, &problem, &sol, x0))
    }

    fn trajectory(&self, model: &DiscreteModel, problem: &QpProblem, sol: &QpSolution, x0: LateralState) -> Trajectory {
        let n = self.config.horizon_n;
        let feasible = sol.status == QpStatus::Optimal;
        let mut inputs = Vec::with_capacity(n);
        let mut slack = Vec::with_capacity(n);
        for k in 0..n {
            let d = sol.z[2 * k].clamp(-self.config.steer_limit, self.config.steer_limit);
            inputs.push(ControlInput { delta_f: d });
            slack.push(sol.z[2 * k + 1].max(0.0));
        }
        let mut states = Vec::with_capacity(n + 1);
        states.push(x0);
        for u in &inputs {
            let x = *states.last().expect("non-empty");
            states.push(vehicle::step(&model.ad, &model.bd, x, *u));
        }
        let s = self.config.slack_weight;
        Trajectory {
            dt: self.config.dt,
            states,
            inputs,
            slack_cost: slack.iter().map(|e| s * e * e).collect(),
            slack,
            feasible,
            status: sol.status,
            objective: sol.objective,
            iterations: sol.iterations,
            diagnostic: if feasible { None } else { diagnose(problem, sol) },
        }
    }
}

fn shift_warm_start(sol: &QpSolution) -> WarmStart {
    let shift = |v: &[Option<qp::Side>], by: usize| -> Vec<Option<qp::Side>> {
        let mut out: Vec<_> = v.iter().skip(by).copied().collect();
        out.extend(core::iter::repeat(None).take(by.min(v.len())));
        out
    };
    let nz = sol.z.len();
    let mut z = DVector::zeros(nz);
    for i in 0..nz {
        z[i] = sol.z[(i + 2).min(nz - 2 + i % 2)];
    }
    WarmStart {
        z,
        working_set: Some(WorkingSet {
            rows: shift(&sol.working_set.rows, ROWS_PER_STEP),
            bounds: shift(&sol.working_set.bounds, 2),
        }),
    }
}

/// Locates the hard constraint carrying the largest infeasibility
/// multiplier.
fn diagnose(problem: &QpProblem, sol: &QpSolution) -> Option<Diagnostic> {
    let y = &sol.certificate.as_ref()?.y;
    let n = problem.n() / 2;
    let mut best: Option<(f64, Diagnostic)> = None;
    let mut consider = |w: f64, d: Diagnostic| {
        if w > 1e-12 && best.map_or(true, |(b, _)| w > b) {
            best = Some((w, d));
        }
    };
    for v in y.eq.iter() {
        consider(v.abs(), Diagnostic { step: n, constraint: BindingConstraint::Terminal });
    }
    for (i, v) in y.ineq.iter().enumerate() {
        let step = i / ROWS_PER_STEP + 1;
        let constraint = match (i % ROWS_PER_STEP, *v > 0.0) {
            (0, true) => BindingConstraint::HardLower,
            (0, false) => BindingConstraint::HardUpper,
            _ => BindingConstraint::SlackBound,
        };
        consider(v.abs(), Diagnostic { step, constraint });
    }
    for (i, v) in y.bounds.iter().enumerate() {
        let constraint = if i % 2 == 0 {
            BindingConstraint::SteerLimit
        } else {
            BindingConstraint::SlackBound
        };
        consider(v.abs(), Diagnostic { step: i / 2 + 1, constraint });
    }
    best.map(|(_, d)| d)
}
