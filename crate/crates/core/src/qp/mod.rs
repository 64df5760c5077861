//! Dense convex quadratic programming.
//!
//! ```text
//! minimize    ½ zᵀ H z + gᵀ z
//! subject to  Aeq z = beq
//!             l ≤ C z ≤ u
//!             zl ≤ z ≤ zu
//! ```
//!
//! Solved by a primal active-set method with range-space KKT solves and an
//! elastic phase 1 for feasibility. Infinite entries in `l`, `u`, `zl`, `zu`
//! mean "no bound".

mod active_set;
pub mod dump;
pub mod kkt;

use alloc::vec::Vec;
use nalgebra::{DMatrix, DVector};

pub use active_set::Side;

/// Default optimality and feasibility tolerance.
pub const DEFAULT_TOL: f64 = 1e-6;
/// Default iteration limit.
pub const DEFAULT_MAX_ITER: usize = 200;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum QpError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(&'static str),
    #[error("Hessian is not symmetric (asymmetry {0:e})")]
    NotSymmetric(f64),
    #[error("Hessian is not positive semidefinite")]
    NotPsd,
    #[error("lower bound exceeds upper bound in {0} {1}")]
    InvalidBounds(&'static str, usize),
    #[error("non-finite entry in {0}")]
    NonFinite(&'static str),
}

#[derive(Debug, Clone, PartialEq)]
pub struct QpProblem {
    pub h: DMatrix<f64>,
    pub g: DVector<f64>,
    pub a_eq: DMatrix<f64>,
    pub b_eq: DVector<f64>,
    pub c: DMatrix<f64>,
    pub l: DVector<f64>,
    pub u: DVector<f64>,
    pub zl: DVector<f64>,
    pub zu: DVector<f64>,
}

impl QpProblem {
    /// Unconstrained problem.
    pub fn new(h: DMatrix<f64>, g: DVector<f64>) -> Self {
        let n = g.len();
        Self {
            h,
            g,
            a_eq: DMatrix::zeros(0, n),
            b_eq: DVector::zeros(0),
            c: DMatrix::zeros(0, n),
            l: DVector::zeros(0),
            u: DVector::zeros(0),
            zl: DVector::from_element(n, f64::NEG_INFINITY),
            zu: DVector::from_element(n, f64::INFINITY),
        }
    }

    pub fn with_equalities(mut self, a_eq: DMatrix<f64>, b_eq: DVector<f64>) -> Self {
        self.a_eq = a_eq;
        self.b_eq = b_eq;
        self
    }

    pub fn with_inequalities(mut self, c: DMatrix<f64>, l: DVector<f64>, u: DVector<f64>) -> Self {
        self.c = c;
        self.l = l;
        self.u = u;
        self
    }

    pub fn with_bounds(mut self, zl: DVector<f64>, zu: DVector<f64>) -> Self {
        self.zl = zl;
        self.zu = zu;
        self
    }

    pub fn n(&self) -> usize {
        self.g.len()
    }

    pub fn n_eq(&self) -> usize {
        self.b_eq.len()
    }

    pub fn n_ineq(&self) -> usize {
        self.l.len()
    }

    pub fn objective(&self, z: &DVector<f64>) -> f64 {
        0.5 * z.dot(&(&self.h * z)) + self.g.dot(z)
    }

    /// Largest constraint violation at `z`.
    pub fn max_violation(&self, z: &DVector<f64>) -> f64 {
        let mut v: f64 = 0.0;
        if self.n_eq() > 0 {
            v = v.max((&self.a_eq * z - &self.b_eq).amax());
        }
        if self.n_ineq() > 0 {
            let cz = &self.c * z;
            for i in 0..self.n_ineq() {
                v = v.max(self.l[i] - cz[i]).max(cz[i] - self.u[i]);
            }
        }
        for j in 0..self.n() {
            v = v.max(self.zl[j] - z[j]).max(z[j] - self.zu[j]);
        }
        v
    }

    /// Checks shapes, symmetry, bound ordering and finiteness.
    pub fn validate(&self) -> Result<(), QpError> {
        let n = self.n();
        if self.h.shape() != (n, n) {
            return Err(QpError::DimensionMismatch("H"));
        }
        if self.a_eq.shape() != (self.n_eq(), n) {
            return Err(QpError::DimensionMismatch("Aeq"));
        }
        if self.c.shape() != (self.n_ineq(), n) || self.u.len() != self.n_ineq() {
            return Err(QpError::DimensionMismatch("C"));
        }
        if self.zl.len() != n || self.zu.len() != n {
            return Err(QpError::DimensionMismatch("bounds"));
        }
        let finite = |m: &[f64]| m.iter().all(|x| x.is_finite());
        for (name, data) in [
            ("H", self.h.as_slice()),
            ("g", self.g.as_slice()),
            ("Aeq", self.a_eq.as_slice()),
            ("beq", self.b_eq.as_slice()),
            ("C", self.c.as_slice()),
        ] {
            if !finite(data) {
                return Err(QpError::NonFinite(name));
            }
        }
        for (name, lo, hi) in [("row", &self.l, &self.u), ("variable", &self.zl, &self.zu)] {
            for i in 0..lo.len() {
                if lo[i].is_nan() || hi[i].is_nan() {
                    return Err(QpError::NonFinite(name));
                }
                if lo[i] > hi[i] || lo[i] == f64::INFINITY || hi[i] == f64::NEG_INFINITY {
                    return Err(QpError::InvalidBounds(name, i));
                }
            }
        }
        let asym = (&self.h - self.h.transpose()).amax();
        if asym > 1e-9 {
            return Err(QpError::NotSymmetric(asym));
        }
        let reg = &self.h + DMatrix::identity(n, n) * 1e-10;
        if n > 0 && reg.cholesky().is_none() {
            return Err(QpError::NotPsd);
        }
        Ok(())
    }
}

/// Multipliers with the sign convention
/// `H z + g = Aeqᵀ y_eq + Cᵀ y_ineq + y_bounds`.
///
/// Inequality and bound multipliers are non-negative on active lower
/// bounds and non-positive on active upper bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct Duals {
    pub eq: DVector<f64>,
    pub ineq: DVector<f64>,
    pub bounds: DVector<f64>,
}

impl Duals {
    pub fn zeros(p: &QpProblem) -> Self {
        Self {
            eq: DVector::zeros(p.n_eq()),
            ineq: DVector::zeros(p.n_ineq()),
            bounds: DVector::zeros(p.n()),
        }
    }
}

/// Proof of infeasibility: multipliers `y` with `Aᵀ y ≈ 0` whose support
/// value over the constraint bounds is positive.
#[derive(Debug, Clone, PartialEq)]
pub struct FarkasCertificate {
    pub y: Duals,
    /// Support value `beqᵀ y_eq + Σ min(y l, y u)`; positive for a valid proof.
    pub value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QpStatus {
    Optimal,
    PrimalInfeasible,
    /// The objective decreases without bound along a feasible ray.
    Unbounded,
    MaxIterations,
}

/// Active constraints at a solution, reusable as a warm start.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct WorkingSet {
    pub rows: Vec<Option<Side>>,
    pub bounds: Vec<Option<Side>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QpSolution {
    pub z: DVector<f64>,
    pub duals: Duals,
    pub status: QpStatus,
    pub objective: f64,
    pub iterations: usize,
    pub certificate: Option<FarkasCertificate>,
    pub working_set: WorkingSet,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QpSettings {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for QpSettings {
    fn default() -> Self {
        Self {
            tol: DEFAULT_TOL,
            max_iter: DEFAULT_MAX_ITER,
        }
    }
}

/// Initial guess for the solver.
#[derive(Debug, Clone, PartialEq)]
pub struct WarmStart {
    pub z: DVector<f64>,
    /// Constraints to try first when building the initial working set.
    pub working_set: Option<WorkingSet>,
}

/// Solves a QP from a cold start.
pub fn solve(problem: &QpProblem, settings: QpSettings) -> Result<QpSolution, QpError> {
    solve_warm(problem, settings, None)
}

/// Solves a QP starting from `warm` when its dimensions fit.
pub fn solve_warm(
    problem: &QpProblem,
    settings: QpSettings,
    warm: Option<&WarmStart>,
) -> Result<QpSolution, QpError> {
    problem.validate()?;
    let warm = warm.filter(|w| w.z.len() == problem.n());
    Ok(active_set::solve(problem, settings, warm))
}

/// Solver that keeps the last solution as warm start for the next call.
#[derive(Debug, Clone, Default)]
pub struct QpSolver {
    pub settings: QpSettings,
    warm: Option<WarmStart>,
}

impl QpSolver {
    pub fn new(settings: QpSettings) -> Self {
        Self { settings, warm: None }
    }

    /// Overrides the warm start used by the next solve.
    pub fn set_warm_start(&mut self, warm: Option<WarmStart>) {
        self.warm = warm;
    }

    pub fn warm_start(&self) -> Option<&WarmStart> {
        self.warm.as_ref()
    }

    pub fn solve(&mut self, problem: &QpProblem) -> Result<QpSolution, QpError> {
        let sol = solve_warm(problem, self.settings, self.warm.as_ref())?;
        if sol.status == QpStatus::Optimal {
            self.warm = Some(WarmStart {
                z: sol.z.clone(),
                working_set: Some(sol.working_set.clone()),
            });
        }
        Ok(sol)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_by_two() -> QpProblem {
        QpProblem::new(DMatrix::identity(2, 2), DVector::from_vec(alloc::vec![-1.0, -1.0]))
    }

    #[test]
    fn unconstrained_minimum() {
        let s = solve(&two_by_two(), QpSettings::default()).unwrap();
        assert_eq!(s.status, QpStatus::Optimal);
        assert!((s.z[0] - 1.0).abs() < 1e-12 && (s.z[1] - 1.0).abs() < 1e-12);
        assert!((s.objective + 1.0).abs() < 1e-12);
    }

    #[test]
    fn bound_projects_the_minimum() {
        let p = two_by_two().with_bounds(
            DVector::from_vec(alloc::vec![f64::NEG_INFINITY, f64::NEG_INFINITY]),
            DVector::from_vec(alloc::vec![0.5, f64::INFINITY]),
        );
        let s = solve(&p, QpSettings::default()).unwrap();
        assert_eq!(s.status, QpStatus::Optimal);
        assert!((s.z[0] - 0.5).abs() < 1e-12 && (s.z[1] - 1.0).abs() < 1e-12);
        assert!((s.duals.bounds[0] + 0.5).abs() < 1e-12);
    }

    #[test]
    fn contradictory_rows_are_infeasible() {
        let c = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 1.0, 0.0]);
        let p = two_by_two().with_inequalities(
            c,
            DVector::from_vec(alloc::vec![1.0, f64::NEG_INFINITY]),
            DVector::from_vec(alloc::vec![f64::INFINITY, 0.0]),
        );
        let s = solve(&p, QpSettings::default()).unwrap();
        assert_eq!(s.status, QpStatus::PrimalInfeasible);
        let cert = s.certificate.unwrap();
        let (residual, value) = kkt::check_certificate(&p, &cert.y);
        assert!(residual < 1e-6 && value >= 1e-6, "{residual} {value}");
    }

    #[test]
    fn rejects_bad_input() {
        let mut p = two_by_two();
        p.h[(0, 0)] = -1.0;
        assert_eq!(solve(&p, QpSettings::default()), Err(QpError::NotPsd));
        let p = QpProblem::new(DMatrix::identity(3, 3), DVector::zeros(2));
        assert!(matches!(solve(&p, QpSettings::default()), Err(QpError::DimensionMismatch(_))));
    }

    #[test]
    fn equality_constrained() {
        let p = two_by_two().with_equalities(
            DMatrix::from_row_slice(1, 2, &[1.0, 1.0]),
            DVector::from_vec(alloc::vec![1.0]),
        );
        let s = solve(&p, QpSettings::default()).unwrap();
        assert!((s.z[0] - 0.5).abs() < 1e-12 && (s.z[1] - 0.5).abs() < 1e-12);
        assert!(kkt::check_kkt(&p, &s.z, &s.duals).passes(1e-9));
    }

    #[test]
    fn singular_hessian_with_box() {
        // linear objective over a box: optimum at a vertex
        let p = QpProblem::new(DMatrix::zeros(2, 2), DVector::from_vec(alloc::vec![1.0, -2.0]))
            .with_bounds(
                DVector::from_vec(alloc::vec![-1.0, -1.0]),
                DVector::from_vec(alloc::vec![1.0, 1.0]),
            );
        let s = solve(&p, QpSettings::default()).unwrap();
        assert_eq!(s.status, QpStatus::Optimal);
        assert!((s.z[0] + 1.0).abs() < 1e-9 && (s.z[1] - 1.0).abs() < 1e-9);
        assert!((s.objective + 3.0).abs() < 1e-9);
    }

    #[test]
    fn unbounded_linear_objective() {
        let p = QpProblem::new(DMatrix::zeros(1, 1), DVector::from_vec(alloc::vec![1.0]));
        let s = solve(&p, QpSettings::default()).unwrap();
        assert_eq!(s.status, QpStatus::Unbounded);
    }

    #[test]
    fn warm_start_reproduces_the_solution() {
        let p = two_by_two().with_inequalities(
            DMatrix::from_row_slice(1, 2, &[1.0, 1.0]),
            DVector::from_vec(alloc::vec![f64::NEG_INFINITY]),
            DVector::from_vec(alloc::vec![1.0]),
        );
        let mut solver = QpSolver::new(QpSettings::default());
        let cold = solver.solve(&p).unwrap();
        let warm = solver.solve(&p).unwrap();
        assert_eq!(cold.z, warm.z);
        assert!(warm.iterations <= 2);
    }
}
