//! Independent check of KKT conditions and infeasibility certificates.

use nalgebra::DVector;

use super::{Duals, QpProblem};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KktReport {
    /// `‖H z + g − Aeqᵀ y_eq − Cᵀ y_ineq − y_bounds‖∞`
    pub stationarity: f64,
    pub primal_infeasibility: f64,
    /// Multipliers with the wrong sign or attached to an infinite bound.
    pub dual_infeasibility: f64,
    /// Largest `|y|·slack` over inequality rows and bounds.
    pub complementarity: f64,
}

impl KktReport {
    pub fn passes(&self, tol: f64) -> bool {
        self.stationarity <= tol
            && self.primal_infeasibility <= tol
            && self.dual_infeasibility <= tol
            && self.complementarity <= tol
    }
}

fn side_terms(y: f64, value: f64, lo: f64, hi: f64) -> (f64, f64) {
    // (dual infeasibility, complementarity) of one two-sided constraint
    if y > 0.0 {
        if lo.is_finite() {
            (0.0, y * (value - lo).abs())
        } else {
            (y, 0.0)
        }
    } else if y < 0.0 {
        if hi.is_finite() {
            (0.0, -y * (hi - value).abs())
        } else {
            (-y, 0.0)
        }
    } else {
        (0.0, 0.0)
    }
}

pub fn check_kkt(p: &QpProblem, z: &DVector<f64>, y: &Duals) -> KktReport {
    let mut r = &p.h * z + &p.g - &y.bounds;
    if p.n_eq() > 0 {
        r -= p.a_eq.transpose() * &y.eq;
    }
    if p.n_ineq() > 0 {
        r -= p.c.transpose() * &y.ineq;
    }
    let mut dual_inf: f64 = 0.0;
    let mut comp: f64 = 0.0;
    let cz = &p.c * z;
    for i in 0..p.n_ineq() {
        let (d, c) = side_terms(y.ineq[i], cz[i], p.l[i], p.u[i]);
        dual_inf = dual_inf.max(d);
        comp = comp.max(c);
    }
    for j in 0..p.n() {
        let (d, c) = side_terms(y.bounds[j], z[j], p.zl[j], p.zu[j]);
        dual_inf = dual_inf.max(d);
        comp = comp.max(c);
    }
    KktReport {
        stationarity: if r.is_empty() { 0.0 } else { r.amax() },
        primal_infeasibility: p.max_violation(z),
        dual_infeasibility: dual_inf,
        complementarity: comp,
    }
}

/// Returns `(‖Aᵀ y‖∞, support value)` for a candidate Farkas certificate.
///
/// For every feasible `z`, `yᵀ A z` is at least the support value, so a
/// residual near zero together with a positive value proves infeasibility.
/// Multipliers attached to infinite bounds make the value `-∞`.
pub fn check_certificate(p: &QpProblem, y: &Duals) -> (f64, f64) {
    let mut r = y.bounds.clone();
    if p.n_eq() > 0 {
        r += p.a_eq.transpose() * &y.eq;
    }
    if p.n_ineq() > 0 {
        r += p.c.transpose() * &y.ineq;
    }
    let support = |yi: f64, lo: f64, hi: f64| {
        if yi > 0.0 {
            yi * lo
        } else if yi < 0.0 {
            yi * hi
        } else {
            0.0
        }
    };
    let mut value = p.b_eq.dot(&y.eq);
    for i in 0..p.n_ineq() {
        value += support(y.ineq[i], p.l[i], p.u[i]);
    }
    for j in 0..p.n() {
        value += support(y.bounds[j], p.zl[j], p.zu[j]);
    }
    (if r.is_empty() { 0.0 } else { r.amax() }, value)
}
