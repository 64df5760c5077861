//! Operator-splitting (ADMM) reference solver and random QP generator.

use nalgebra::{DMatrix, DVector};
use occmpc_core::qp::QpProblem;
use rand::Rng;

/// Solves the QP with ADMM on the stacked constraint set
/// `lo ≤ [Aeq; C; I] z ≤ hi`, projecting onto the box each sweep.
/// Returns the objective at the (nearly feasible) limit point.
pub fn admm(p: &QpProblem, iters: usize) -> (DVector<f64>, f64) {
    let n = p.n();
    let m = p.n_eq() + p.n_ineq() + n;
    let mut a = DMatrix::zeros(m, n);
    let mut lo = DVector::zeros(m);
    let mut hi = DVector::zeros(m);
    let mut r = 0;
    for i in 0..p.n_eq() {
        a.row_mut(r).copy_from(&p.a_eq.row(i));
        lo[r] = p.b_eq[i];
        hi[r] = p.b_eq[i];
        r += 1;
    }
    for i in 0..p.n_ineq() {
        a.row_mut(r).copy_from(&p.c.row(i));
        lo[r] = p.l[i];
        hi[r] = p.u[i];
        r += 1;
    }
    for j in 0..n {
        a[(r, j)] = 1.0;
        lo[r] = p.zl[j];
        hi[r] = p.zu[j];
        r += 1;
    }
    let sigma = 1e-8;
    let alpha = 1.6;
    let mut rho = 0.5;
    let factor = |rho: f64| {
        let k = &p.h + DMatrix::identity(n, n) * sigma + a.transpose() * &a * rho;
        k.cholesky().expect("ADMM system is positive definite")
    };
    let mut kkt = factor(rho);
    let mut x = DVector::zeros(n);
    let mut z = DVector::zeros(m);
    let mut y = DVector::zeros(m);
    for it in 0..iters {
        let rhs = &x * sigma - &p.g + a.transpose() * (&z * rho - &y);
        let xt = kkt.solve(&rhs);
        let zt = &a * &xt;
        x = &xt * alpha + &x * (1.0 - alpha);
        let relaxed = &zt * alpha + &z * (1.0 - alpha);
        let mut zn = &relaxed + &y / rho;
        for i in 0..m {
            zn[i] = zn[i].clamp(lo[i], hi[i]);
        }
        y += (&relaxed - &zn) * rho;
        z = zn;
        if it % 200 == 199 {
            let ax = &a * &x;
            let aty = a.transpose() * &y;
            let hx = &p.h * &x;
            let prim = (&ax - &z).amax();
            let dual = (&hx + &p.g + &aty).amax();
            if prim < 1e-12 && dual < 1e-12 {
                break;
            }
            // balance the scaled primal and dual residuals
            let prim_rel = prim / ax.amax().max(z.amax()).max(1e-12);
            let dual_rel = dual / hx.amax().max(aty.amax()).max(p.g.amax()).max(1e-12);
            let ratio = ((prim_rel + 1e-16) / (dual_rel + 1e-16)).sqrt().clamp(0.2, 5.0);
            if !(0.5..=2.0).contains(&ratio) {
                rho = (rho * ratio).clamp(1e-6, 1e6);
                kkt = factor(rho);
            }
        }
    }
    let obj = p.objective(&x);
    (x, obj)
}

pub struct RandomQp {
    pub problem: QpProblem,
    /// Known feasible point (meaningless for infeasible instances).
    pub feasible: DVector<f64>,
    pub infeasible: bool,
}

/// Random convex QP with every variable boxed, built around a known
/// feasible point. With `infeasible`, a contradictory pair of rows is added.
pub fn random_qp<R: Rng>(rng: &mut R, infeasible: bool) -> RandomQp {
    let n = rng.gen_range(2..=12);
    let rank = rng.gen_range(1..=n);
    let m = DMatrix::from_fn(rank, n, |_, _| rng.gen_range(-1.0..1.0));
    let mut h = m.transpose() * m;
    if rng.gen_bool(0.5) {
        h += DMatrix::identity(n, n) * rng.gen_range(0.01..1.0);
    }
    let h = (&h + h.transpose()) * 0.5;
    let g = DVector::from_fn(n, |_, _| rng.gen_range(-3.0..3.0));
    let zf = DVector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0));
    let zl = DVector::from_fn(n, |j, _| zf[j] - rng.gen_range(0.2..3.0));
    let zu = DVector::from_fn(n, |j, _| zf[j] + rng.gen_range(0.2..3.0));
    let me = rng.gen_range(0..=(n - 1).min(3));
    let a_eq = DMatrix::from_fn(me, n, |_, _| rng.gen_range(-1.0..1.0));
    let b_eq = &a_eq * &zf;
    let mut mi = rng.gen_range(0..=18);
    if infeasible {
        mi += 2;
    }
    let mut c = DMatrix::from_fn(mi, n, |_, _| rng.gen_range(-1.0..1.0));
    let mut l = DVector::zeros(mi);
    let mut u = DVector::zeros(mi);
    for i in 0..mi {
        let s = c.row(i).dot(&zf.transpose());
        l[i] = if rng.gen_bool(0.7) { s - rng.gen_range(0.0..1.0) } else { f64::NEG_INFINITY };
        u[i] = if rng.gen_bool(0.7) { s + rng.gen_range(0.0..1.0) } else { f64::INFINITY };
    }
    if infeasible {
        let row: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let (a, b) = (mi - 2, mi - 1);
        for j in 0..n {
            c[(a, j)] = row[j];
            c[(b, j)] = row[j];
        }
        let s: f64 = (0..n).map(|j| row[j] * zf[j]).sum();
        l[a] = s + 1.0;
        u[a] = f64::INFINITY;
        l[b] = f64::NEG_INFINITY;
        u[b] = s;
    }
    let problem = QpProblem::new(h, g)
        .with_equalities(a_eq, b_eq)
        .with_inequalities(c, l, u)
        .with_bounds(zl, zu);
    RandomQp {
        problem,
        feasible: zf,
        infeasible,
    }
}
