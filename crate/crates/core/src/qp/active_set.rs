//! Primal active-set iteration.
//!
//! Working-set subproblems are solved in range-space form on the free
//! variables: with `H_FF = L Lᵀ`, `V = L⁻¹ A_Fᵀ` and `w = L⁻¹ ∇f_F`, the
//! multipliers solve `Vᵀ V λ = Vᵀ w + r` (via QR of `V`), where `r` is the
//! residual of the active constraints, and the step is `p_F = -L⁻ᵀ (w - V λ)`. Variables sitting on an active bound
//! are removed from the subproblem; their multipliers are read off the
//! gradient residual.

use alloc::vec::Vec;
use nalgebra::{DMatrix, DVector};

use super::{
    kkt, Duals, FarkasCertificate, QpProblem, QpSettings, QpSolution, QpStatus, WarmStart,
    WorkingSet,
};

/// Which side of a two-sided constraint is active.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Side {
    Lower,
    Upper,
}

impl Side {
    pub fn sign(self) -> f64 {
        match self {
            Side::Lower => 1.0,
            Side::Upper => -1.0,
        }
    }
}

/// Proximal weights on the elastic phase-1 objective. The larger weights
/// give projection-like solutions with few active constraints; the last one
/// makes the objective an almost pure sum of shifts.
const PHASE1_REG: [f64; 4] = [1.0, 1e-3, 1e-6, 1e-9];
const MAX_PROX_ROUNDS: usize = 500;

#[derive(Debug, Clone, Copy, PartialEq)]
enum Outcome {
    Optimal,
    MaxIterations,
    Stalled,
}

#[derive(Debug, Clone, Copy)]
enum Act {
    Eq(usize),
    Row(usize, Side),
}

#[derive(Debug, Clone, Copy)]
enum Block {
    Row(usize, Side),
    Bound(usize, Side),
}

struct Eqp {
    p: DVector<f64>,
    /// multipliers of equality rows
    eq: Vec<(usize, f64)>,
    /// sign-normalized multipliers of active rows (non-negative when optimal)
    rows: Vec<(usize, Side, f64)>,
    /// sign-normalized multipliers of active bounds
    bounds: Vec<(usize, Side, f64)>,
}

struct Engine<'a> {
    p: &'a QpProblem,
    h: DMatrix<f64>,
    g: DVector<f64>,
    z: DVector<f64>,
    eq_on: Vec<bool>,
    rows: Vec<Option<Side>>,
    bounds: Vec<Option<Side>>,
    row_norms: Vec<f64>,
    chol: Option<(Vec<usize>, DMatrix<f64>)>,
    dual_tol: f64,
    iterations: usize,
    last: Option<Eqp>,
}

fn finite(x: f64) -> bool {
    x.is_finite()
}

impl<'a> Engine<'a> {
    fn new(p: &'a QpProblem, h: DMatrix<f64>, g: DVector<f64>, z: DVector<f64>) -> Self {
        let scale = 1f64.max(g.amax()).max(h.amax());
        let row_norms = (0..p.n_ineq()).map(|i| p.c.row(i).norm()).collect();
        Self {
            p,
            h,
            g,
            z,
            eq_on: alloc::vec![false; p.n_eq()],
            rows: alloc::vec![None; p.n_ineq()],
            bounds: alloc::vec![None; p.n()],
            row_norms,
            chol: None,
            dual_tol: 1e-10 * scale,
            iterations: 0,
            last: None,
        }
    }

    /// Greedy working set: every constraint tight at `z` whose normal is
    /// independent of those already chosen. Hinted constraints go first.
    fn init_working_set(&mut self, hint: Option<&WorkingSet>) {
        let n = self.p.n();
        let mut basis: Vec<DVector<f64>> = Vec::new();
        let mut independent = |v: DVector<f64>| -> bool {
            let norm0 = v.norm();
            if norm0 == 0.0 {
                return false;
            }
            let mut r = v;
            for _ in 0..2 {
                for q in &basis {
                    let c = q.dot(&r);
                    r.axpy(-c, q, 1.0);
                }
            }
            let nr = r.norm();
            if nr <= 1e-9 * norm0 {
                return false;
            }
            basis.push(r / nr);
            true
        };
        for i in 0..self.p.n_eq() {
            self.eq_on[i] = independent(self.p.a_eq.row(i).transpose());
        }
        let tight = |value: f64, bound: f64| finite(bound) && (value - bound).abs() <= 1e-9 * (1.0 + bound.abs());
        let cz = &self.p.c * &self.z;
        let mut candidates: Vec<Block> = Vec::new();
        if let Some(ws) = hint.filter(|w| w.rows.len() == self.rows.len() && w.bounds.len() == n) {
            candidates.extend(ws.rows.iter().enumerate().filter_map(|(i, s)| s.map(|s| Block::Row(i, s))));
            candidates.extend(ws.bounds.iter().enumerate().filter_map(|(j, s)| s.map(|s| Block::Bound(j, s))));
        }
        for i in 0..self.p.n_ineq() {
            candidates.push(Block::Row(i, Side::Lower));
            candidates.push(Block::Row(i, Side::Upper));
        }
        for j in 0..n {
            candidates.push(Block::Bound(j, Side::Lower));
            candidates.push(Block::Bound(j, Side::Upper));
        }
        for cand in candidates {
            match cand {
                Block::Row(i, side) => {
                    let bound = if side == Side::Lower { self.p.l[i] } else { self.p.u[i] };
                    if self.rows[i].is_none() && tight(cz[i], bound) && independent(self.p.c.row(i).transpose()) {
                        self.rows[i] = Some(side);
                    }
                }
                Block::Bound(j, side) => {
                    let bound = if side == Side::Lower { self.p.zl[j] } else { self.p.zu[j] };
                    if self.bounds[j].is_none() && tight(self.z[j], bound) {
                        let mut e = DVector::zeros(n);
                        e[j] = 1.0;
                        if independent(e) {
                            self.bounds[j] = Some(side);
                            self.z[j] = bound;
                        }
                    }
                }
            }
        }
    }

    fn active(&self) -> Vec<Act> {
        let eq = (0..self.p.n_eq()).filter(|&i| self.eq_on[i]).map(Act::Eq);
        let rows = self
            .rows
            .iter()
            .enumerate()
            .filter_map(|(i, s)| s.map(|s| Act::Row(i, s)));
        eq.chain(rows).collect()
    }

    fn coef(&self, a: Act, j: usize) -> f64 {
        match a {
            Act::Eq(i) => self.p.a_eq[(i, j)],
            Act::Row(i, s) => s.sign() * self.p.c[(i, j)],
        }
    }

    /// `b - a·z` for each active constraint, in the sign convention of `coef`.
    fn active_residual(&self, act: &[Act]) -> DVector<f64> {
        DVector::from_iterator(
            act.len(),
            act.iter().map(|&a| match a {
                Act::Eq(i) => self.p.b_eq[i] - self.p.a_eq.row(i).dot(&self.z.transpose()),
                Act::Row(i, s) => {
                    let bound = if s == Side::Lower { self.p.l[i] } else { self.p.u[i] };
                    s.sign() * (bound - self.p.c.row(i).dot(&self.z.transpose()))
                }
            }),
        )
    }

    fn factor(&mut self, free: &[usize]) -> Option<&DMatrix<f64>> {
        let stale = self.chol.as_ref().map_or(true, |(f, _)| f.as_slice() != free);
        if stale {
            let nf = free.len();
            let hff = DMatrix::from_fn(nf, nf, |r, c| self.h[(free[r], free[c])]);
            let l = hff.cholesky()?.l();
            self.chol = Some((free.to_vec(), l));
        }
        self.chol.as_ref().map(|(_, l)| l)
    }

    fn eqp(&mut self) -> Option<Eqp> {
        let n = self.p.n();
        let free: Vec<usize> = (0..n).filter(|&j| self.bounds[j].is_none()).collect();
        let grad = &self.h * &self.z + &self.g;
        let act = self.active();
        let m = act.len();
        let nf = free.len();
        let mut p = DVector::zeros(n);
        let mut lambda = DVector::zeros(m);
        if nf > 0 {
            let aft = DMatrix::from_fn(nf, m, |r, c| self.coef(act[c], free[r]));
            let gf = DVector::from_iterator(nf, free.iter().map(|&j| grad[j]));
            let l = self.factor(&free)?.clone();
            let w = l.solve_lower_triangular(&gf)?;
            if m > nf {
                return None;
            }
            let resid = if m > 0 {
                let v = l.solve_lower_triangular(&aft)?;
                let qr = v.clone().qr();
                let r = qr.r();
                let rmax = r.diagonal().amax();
                if r.diagonal().iter().any(|d| d.abs() <= 1e-13 * rmax.max(1e-300)) {
                    return None;
                }
                // A p = -(residual of the active set) removes round-off drift
                let y = r.transpose().solve_lower_triangular(&self.active_residual(&act))?;
                lambda = r.solve_upper_triangular(&(qr.q().transpose() * &w + y))?;
                &w - &v * &lambda
            } else {
                w
            };
            let pf = -l.tr_solve_lower_triangular(&resid)?;
            for (r, &j) in free.iter().enumerate() {
                p[j] = pf[r];
            }
        } else if m > 0 {
            return None;
        }
        let mut resid = grad + &self.h * &p;
        for (c, &a) in act.iter().enumerate() {
            match a {
                Act::Eq(i) => {
                    for j in 0..n {
                        resid[j] -= lambda[c] * self.p.a_eq[(i, j)];
                    }
                }
                Act::Row(i, s) => {
                    let f = lambda[c] * s.sign();
                    for j in 0..n {
                        resid[j] -= f * self.p.c[(i, j)];
                    }
                }
            }
        }
        let mut out = Eqp {
            p,
            eq: Vec::new(),
            rows: Vec::new(),
            bounds: Vec::new(),
        };
        for (c, &a) in act.iter().enumerate() {
            match a {
                Act::Eq(i) => out.eq.push((i, lambda[c])),
                Act::Row(i, s) => out.rows.push((i, s, lambda[c])),
            }
        }
        for j in 0..n {
            if let Some(s) = self.bounds[j] {
                out.bounds.push((j, s, s.sign() * resid[j]));
            }
        }
        Some(out)
    }

    fn ratio_test(&self, p: &DVector<f64>) -> (f64, Option<Block>) {
        let mut alpha = 1.0;
        let mut block = None;
        let pmax = p.amax();
        if self.p.n_ineq() > 0 {
            let cp = &self.p.c * p;
            let cz = &self.p.c * &self.z;
            for i in 0..self.p.n_ineq() {
                if self.rows[i].is_some() {
                    continue;
                }
                let thr = 1e-12 * self.row_norms[i] * pmax;
                if cp[i] < -thr && finite(self.p.l[i]) {
                    let a = ((cz[i] - self.p.l[i]) / -cp[i]).max(0.0);
                    if a < alpha {
                        alpha = a;
                        block = Some(Block::Row(i, Side::Lower));
                    }
                }
                if cp[i] > thr && finite(self.p.u[i]) {
                    let a = ((self.p.u[i] - cz[i]) / cp[i]).max(0.0);
                    if a < alpha {
                        alpha = a;
                        block = Some(Block::Row(i, Side::Upper));
                    }
                }
            }
        }
        let thr = 1e-12 * pmax;
        for j in 0..self.p.n() {
            if self.bounds[j].is_some() {
                continue;
            }
            if p[j] < -thr && finite(self.p.zl[j]) {
                let a = ((self.z[j] - self.p.zl[j]) / -p[j]).max(0.0);
                if a < alpha {
                    alpha = a;
                    block = Some(Block::Bound(j, Side::Lower));
                }
            }
            if p[j] > thr && finite(self.p.zu[j]) {
                let a = ((self.p.zu[j] - self.z[j]) / p[j]).max(0.0);
                if a < alpha {
                    alpha = a;
                    block = Some(Block::Bound(j, Side::Upper));
                }
            }
        }
        (alpha, block)
    }

    fn run(&mut self, budget: usize) -> Outcome {
        loop {
            if self.iterations >= budget {
                return Outcome::MaxIterations;
            }
            self.iterations += 1;
            let Some(e) = self.eqp() else {
                return Outcome::Stalled;
            };
            // a step is negligible when it is tiny or barely lowers the objective;
            // the second test absorbs round-off in steps on nearly flat models
            let hp = &self.h * &e.p;
            let decrease = 0.5 * e.p.dot(&hp);
            let f = 0.5 * self.z.dot(&(&self.h * &self.z)) + self.g.dot(&self.z);
            if e.p.amax() <= 1e-11 * (1.0 + self.z.amax()) || decrease <= 1e-15 * (1.0 + f.abs()) {
                let mut worst: Option<(f64, Block)> = None;
                for &(i, s, nu) in &e.rows {
                    if nu < -self.dual_tol && worst.map_or(true, |(v, _)| nu < v) {
                        worst = Some((nu, Block::Row(i, s)));
                    }
                }
                for &(j, s, nu) in &e.bounds {
                    if nu < -self.dual_tol && worst.map_or(true, |(v, _)| nu < v) {
                        worst = Some((nu, Block::Bound(j, s)));
                    }
                }
                match worst {
                    None => {
                        self.last = Some(e);
                        return Outcome::Optimal;
                    }
                    Some((_, Block::Row(i, _))) => self.rows[i] = None,
                    Some((_, Block::Bound(j, _))) => self.bounds[j] = None,
                }
                continue;
            }
            // at a vertex the step only corrects residual drift
            let vertex = self.active().len() >= self.bounds.iter().filter(|b| b.is_none()).count();
            let (alpha, block) = if vertex { (1.0, None) } else { self.ratio_test(&e.p) };
            self.z.axpy(alpha, &e.p, 1.0);
            match block {
                Some(Block::Row(i, s)) => self.rows[i] = Some(s),
                Some(Block::Bound(j, s)) => {
                    self.bounds[j] = Some(s);
                    self.z[j] = if s == Side::Lower { self.p.zl[j] } else { self.p.zu[j] };
                }
                None => {}
            }
        }
    }

    fn duals(&self) -> Duals {
        let mut d = Duals::zeros(self.p);
        if let Some(e) = &self.last {
            for &(i, v) in &e.eq {
                d.eq[i] = v;
            }
            for &(i, s, nu) in &e.rows {
                d.ineq[i] = s.sign() * nu;
            }
            for &(j, s, nu) in &e.bounds {
                d.bounds[j] = s.sign() * nu;
            }
        }
        d
    }

    fn working_set(&self) -> WorkingSet {
        WorkingSet {
            rows: self.rows.clone(),
            bounds: self.bounds.clone(),
        }
    }
}

enum Phase1 {
    Feasible(DVector<f64>),
    Infeasible(DVector<f64>, FarkasCertificate),
    MaxIterations(DVector<f64>),
}

/// Elastic feasibility problem: every violated row gets its own
/// non-negative shift `t`, and `Σ t + δ/2 (‖z − z0‖² + ‖t‖²)` is minimized
/// from the (feasible) point `(z0, violations)`.
fn phase1(p: &QpProblem, z0: &DVector<f64>, settings: QpSettings, iterations: &mut usize) -> Phase1 {
    let n = p.n();
    let (me, mi) = (p.n_eq(), p.n_ineq());
    let req = &p.a_eq * z0 - &p.b_eq;
    let cz = &p.c * z0;
    // (row, is_equality, sign, initial shift)
    let mut elastic: Vec<(usize, bool, f64, f64)> = Vec::new();
    for i in 0..me {
        if req[i].abs() > 1e-12 * (1.0 + p.b_eq[i].abs()) {
            elastic.push((i, true, req[i].signum(), req[i].abs()));
        }
    }
    for i in 0..mi {
        if cz[i] < p.l[i] - 1e-12 * (1.0 + p.l[i].abs()) {
            elastic.push((i, false, 1.0, p.l[i] - cz[i]));
        } else if cz[i] > p.u[i] + 1e-12 * (1.0 + p.u[i].abs()) {
            elastic.push((i, false, -1.0, cz[i] - p.u[i]));
        }
    }
    let ne = elastic.len();
    let nn = n + ne;
    let mut a_eq = DMatrix::zeros(me, nn);
    a_eq.view_mut((0, 0), (me, n)).copy_from(&p.a_eq);
    let mut c = DMatrix::zeros(mi, nn);
    c.view_mut((0, 0), (mi, n)).copy_from(&p.c);
    let mut w0 = DVector::zeros(nn);
    w0.rows_mut(0, n).copy_from(z0);
    let mut g = DVector::zeros(nn);
    for (k, &(i, is_eq, s, t0)) in elastic.iter().enumerate() {
        if is_eq {
            a_eq[(i, n + k)] = -s;
        } else {
            c[(i, n + k)] = s;
        }
        w0[n + k] = t0;
        g[n + k] = 1.0;
    }
    let mut zl = DVector::zeros(nn);
    let mut zu = DVector::from_element(nn, f64::INFINITY);
    zl.rows_mut(0, n).copy_from(&p.zl);
    zu.rows_mut(0, n).copy_from(&p.zu);
    let mut aux = QpProblem {
        h: DMatrix::zeros(nn, nn),
        g,
        a_eq,
        b_eq: p.b_eq.clone(),
        c,
        l: p.l.clone(),
        u: p.u.clone(),
        zl,
        zu,
    };
    let mut w = w0;
    let mut last = None;
    for (stage, &reg) in PHASE1_REG.iter().enumerate() {
        aux.h = DMatrix::identity(nn, nn) * reg;
        aux.g.rows_mut(0, n).copy_from(&(z0 * -reg));
        let mut eng = Engine::new(&aux, aux.h.clone(), aux.g.clone(), w.clone());
        eng.dual_tol = 1e-12;
        eng.init_working_set(None);
        let outcome = eng.run(settings.max_iter.saturating_sub(*iterations));
        *iterations += eng.iterations;
        let final_stage = stage + 1 == PHASE1_REG.len();
        if outcome != Outcome::Optimal {
            if final_stage || *iterations >= settings.max_iter {
                return Phase1::MaxIterations(eng.z.rows(0, n).into_owned());
            }
            continue;
        }
        w = eng.z.clone();
        let shift: f64 = w.rows(n, ne).sum();
        if shift <= settings.tol {
            return Phase1::Feasible(w.rows(0, n).into_owned());
        }
        if final_stage {
            last = Some(eng.duals());
        }
    }
    let z = w.rows(0, n).into_owned();
    let Some(d) = last else {
        return Phase1::MaxIterations(z);
    };
    let y = Duals {
        eq: d.eq,
        ineq: d.ineq,
        bounds: d.bounds.rows(0, n).into_owned(),
    };
    let (_, value) = kkt::check_certificate(p, &y);
    Phase1::Infeasible(z, FarkasCertificate { y, value })
}

fn project(z: &mut DVector<f64>, p: &QpProblem) {
    for j in 0..z.len() {
        z[j] = z[j].clamp(p.zl[j], p.zu[j]);
    }
}

fn finish(
    p: &QpProblem,
    z: DVector<f64>,
    duals: Duals,
    status: QpStatus,
    iterations: usize,
    certificate: Option<FarkasCertificate>,
    working_set: WorkingSet,
) -> QpSolution {
    QpSolution {
        objective: p.objective(&z),
        z,
        duals,
        status,
        iterations,
        certificate,
        working_set,
    }
}

/// A step that a bounded problem could not take: no curvature, descent,
/// and no constraint stops it.
fn is_recession_direction(p: &QpProblem, d: &DVector<f64>) -> bool {
    let nd = d.amax();
    if nd == 0.0 {
        return false;
    }
    let d = d / nd;
    let hs = 1f64.max(p.h.amax());
    let tol = 1e-9;
    if (&p.h * &d).amax() > tol * hs || p.g.dot(&d) >= -tol {
        return false;
    }
    if p.n_eq() > 0 && (&p.a_eq * &d).amax() > tol * 1f64.max(p.a_eq.amax()) {
        return false;
    }
    let cd = &p.c * &d;
    for i in 0..p.n_ineq() {
        if (cd[i] < -tol && finite(p.l[i])) || (cd[i] > tol && finite(p.u[i])) {
            return false;
        }
    }
    (0..p.n()).all(|j| !((d[j] < -tol && finite(p.zl[j])) || (d[j] > tol && finite(p.zu[j]))))
}

pub(super) fn solve(p: &QpProblem, settings: QpSettings, warm: Option<&WarmStart>) -> QpSolution {
    let n = p.n();
    let mut z0 = warm.map_or_else(|| DVector::zeros(n), |w| w.z.clone());
    project(&mut z0, p);
    let hint = warm.and_then(|w| w.working_set.as_ref());
    let mut iterations = 0;
    let empty_ws = || WorkingSet {
        rows: alloc::vec![None; p.n_ineq()],
        bounds: alloc::vec![None; n],
    };

    let scale = 1f64.max(p.b_eq.amax()).max(
        p.l.iter()
            .chain(p.u.iter())
            .filter(|x| x.is_finite())
            .fold(0.0, |a: f64, x| a.max(x.abs())),
    );
    if p.max_violation(&z0) > 1e-12 * scale {
        match phase1(p, &z0, settings, &mut iterations) {
            Phase1::Feasible(z) => z0 = z,
            Phase1::Infeasible(z, cert) => {
                return finish(p, z, Duals::zeros(p), QpStatus::PrimalInfeasible, iterations, Some(cert), empty_ws());
            }
            Phase1::MaxIterations(z) => {
                return finish(p, z, Duals::zeros(p), QpStatus::MaxIterations, iterations, None, empty_ws());
            }
        }
    }

    let max_diag = p.h.diagonal().amax();
    let positive_definite = n == 0
        || p.h.clone().cholesky().is_some_and(|c| {
            let d = c.l_dirty().diagonal().min();
            d * d > 1e-10 * 1f64.max(max_diag)
        });
    if positive_definite {
        let mut eng = Engine::new(p, p.h.clone(), p.g.clone(), z0);
        eng.init_working_set(hint);
        let outcome = eng.run(settings.max_iter.saturating_sub(iterations));
        iterations += eng.iterations;
        let status = match outcome {
            Outcome::Optimal => QpStatus::Optimal,
            _ => QpStatus::MaxIterations,
        };
        let duals = eng.duals();
        let ws = eng.working_set();
        return finish(p, eng.z, duals, status, iterations, None, ws);
    }

    // proximal point iteration on H + ρI for singular Hessians
    let rho = 1e-6 * 1f64.max(max_diag);
    let h = &p.h + DMatrix::identity(n, n) * rho;
    let mut eng = Engine::new(p, h, p.g.clone(), z0.clone());
    eng.init_working_set(hint);
    let mut center = z0;
    let base = iterations;
    for _ in 0..MAX_PROX_ROUNDS {
        eng.g = &p.g - &center * rho;
        let outcome = eng.run(settings.max_iter.saturating_sub(base));
        iterations = base + eng.iterations;
        if outcome != Outcome::Optimal {
            let ws = eng.working_set();
            return finish(p, eng.z.clone(), Duals::zeros(p), QpStatus::MaxIterations, iterations, None, ws);
        }
        let step = &eng.z - &center;
        if step.amax() <= 1e-10 * (1.0 + eng.z.amax()) {
            let duals = eng.duals();
            let ws = eng.working_set();
            return finish(p, eng.z.clone(), duals, QpStatus::Optimal, iterations, None, ws);
        }
        if is_recession_direction(p, &step) {
            let ws = eng.working_set();
            return finish(p, eng.z.clone(), Duals::zeros(p), QpStatus::Unbounded, iterations, None, ws);
        }
        center = eng.z.clone();
    }
    let ws = eng.working_set();
    finish(p, eng.z.clone(), Duals::zeros(p), QpStatus::MaxIterations, iterations, None, ws)
}
