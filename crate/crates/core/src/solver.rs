//! Mixed-integer solver for one plane of the ramp objective.
//!
//! The ramp losses decompose into a difference of hinges, so for fixed sign
//! vectors (p1, p2) the objective
//!
//!   G(u, p1, p2) = 0.5||u||^2
//!     + c1 sum (-1+delta - z'u)+ + c1 sum (-1+delta + z'u)+
//!     + c2 sum ( 1+delta - zh'u)+ + c2 sum ( 1+delta + zh'u)+
//!     + c1 p1'Z'u + c2 p2'Zh'u
//!
//! is convex in the augmented plane u = (w; b).  Alternating a convex solve
//! with the closed-form p-update walks downhill on the original ramp
//! objective: the hinge terms of G majorize the concave ramp caps, so each
//! round is a majorize-minimize step.  The trace therefore records the ramp
//! objective itself, which is the quantity that decreases; G alone jumps by
//! the saturation constants whenever p changes support.
//!
//! The convex subproblem is solved by a damped Newton method on a Huber
//! smoothing of the hinges.  Its Hessian is the identity plus one rank-one
//! term per sample sitting inside the smoothing band, so the Newton system
//! is solved through the Woodbury identity whenever that set is small.

use nalgebra::{Cholesky, DMatrix, DVector};

use crate::data::ClusterSplit;
use crate::ramp::{plane_objective, HyperParams, Plane};

#[derive(Debug, Clone)]
pub struct SolverOptions {
    /// Cap on p-update rounds.
    pub max_iter: usize,
    /// Gradient-norm stop for the convex subproblem.
    pub subproblem_tol: f64,
    /// Huber half-width for the hinge corners.
    pub smoothing: f64,
    /// Stop once the ramp objective decreases by no more than this.
    pub objective_tol: f64,
    /// Cap on Newton steps per subproblem.
    pub newton_max_iter: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            max_iter: 200,
            subproblem_tol: 1e-8,
            smoothing: 1e-6,
            objective_tol: 1e-10,
            newton_max_iter: 100,
        }
    }
}

/// Closed-form sign update.  Boundaries go to 0: a deviation exactly at a
/// saturation point needs no linearization.
pub fn update_p(plane: &Plane, split: &ClusterSplit, delta: f64, s: f64) -> (Vec<i8>, Vec<i8>) {
    let u = plane.stacked();
    assert_eq!(u.len(), split.aug_dim(), "plane/split dimension mismatch");
    let th = 2.0 - delta - s;
    let p1 = split
        .within
        .tr_mul(&u)
        .iter()
        .map(|&t| {
            if t > th {
                -1
            } else if t < -th {
                1
            } else {
                0
            }
        })
        .collect();
    let p2 = split
        .between
        .tr_mul(&u)
        .iter()
        .map(|&t| {
            if t > -s {
                -1
            } else if t < s {
                1
            } else {
                0
            }
        })
        .collect();
    (p1, p2)
}

/// G(u, p1, p2) with exact (unsmoothed) hinges.
pub fn fixed_p_objective(
    plane: &Plane,
    split: &ClusterSplit,
    p1: &[i8],
    p2: &[i8],
    hp: &HyperParams,
) -> f64 {
    let u = plane.stacked();
    assert_eq!(u.len(), split.aug_dim(), "plane/split dimension mismatch");
    assert_eq!(p1.len(), split.n_within(), "p1 length mismatch");
    assert_eq!(p2.len(), split.n_between(), "p2 length mismatch");
    let pos = |a: f64| a.max(0.0);
    let mut obj = 0.5 * u.norm_squared();
    for (j, t) in split.within.tr_mul(&u).iter().enumerate() {
        obj += hp.c1 * (pos(-1.0 + hp.delta - t) + pos(-1.0 + hp.delta + t) + f64::from(p1[j]) * t);
    }
    for (j, t) in split.between.tr_mul(&u).iter().enumerate() {
        obj += hp.c2 * (pos(1.0 + hp.delta - t) + pos(1.0 + hp.delta + t) + f64::from(p2[j]) * t);
    }
    obj
}

fn huber_d(a: f64, eps: f64) -> f64 {
    if a <= -eps {
        0.0
    } else if a >= eps {
        1.0
    } else {
        (a + eps) / (2.0 * eps)
    }
}

#[derive(Debug, Clone)]
pub struct SubproblemResult {
    pub plane: Plane,
    pub converged: bool,
    pub newton_iterations: usize,
}

/// Minimize the Huber-smoothed G(., p1, p2) by damped Newton with Armijo
/// backtracking, warm-started from `u0`.
pub fn solve_subproblem(
    split: &ClusterSplit,
    p1: &[i8],
    p2: &[i8],
    hp: &HyperParams,
    opts: &SolverOptions,
    u0: &Plane,
) -> SubproblemResult {
    let dim = split.aug_dim();
    let eps = opts.smoothing;
    let mut u = u0.stacked();
    assert_eq!(u.len(), dim, "warm start dimension mismatch");
    assert_eq!(p1.len(), split.n_within(), "p1 length mismatch");
    assert_eq!(p2.len(), split.n_between(), "p2 length mismatch");

    let mut zu = split.within.tr_mul(&u);
    let mut zhu = split.between.tr_mul(&u);
    let mut converged = false;
    let mut iterations = 0;

    for _ in 0..opts.newton_max_iter {
        // gradient: u + Z q1 + Zhat q2 with per-column chain coefficients
        let mut grad = u.clone();
        let mut active: Vec<(bool, usize, f64)> = Vec::new();
        let band = |off: f64, t: f64| {
            let mut n = 0.0;
            if (off - t).abs() < eps {
                n += 1.0;
            }
            if (off + t).abs() < eps {
                n += 1.0;
            }
            n
        };
        if split.n_within() > 0 {
            let q1 = DVector::from_fn(split.n_within(), |j, _| {
                let t = zu[j];
                let off = -1.0 + hp.delta;
                hp.c1 * (huber_d(off + t, eps) - huber_d(off - t, eps) + f64::from(p1[j]))
            });
            grad.gemv(1.0, &split.within, &q1, 1.0);
            for (j, &t) in zu.iter().enumerate() {
                let n = band(-1.0 + hp.delta, t);
                if n > 0.0 {
                    active.push((true, j, hp.c1 * n / (2.0 * eps)));
                }
            }
        }
        if split.n_between() > 0 {
            let q2 = DVector::from_fn(split.n_between(), |j, _| {
                let t = zhu[j];
                let off = 1.0 + hp.delta;
                hp.c2 * (huber_d(off + t, eps) - huber_d(off - t, eps) + f64::from(p2[j]))
            });
            grad.gemv(1.0, &split.between, &q2, 1.0);
            for (j, &t) in zhu.iter().enumerate() {
                let n = band(1.0 + hp.delta, t);
                if n > 0.0 {
                    active.push((false, j, hp.c2 * n / (2.0 * eps)));
                }
            }
        }

        if grad.norm() <= opts.subproblem_tol {
            converged = true;
            break;
        }
        iterations += 1;

        let col_of = |&(within, j, _): &(bool, usize, f64)| {
            if within {
                split.within.column(j)
            } else {
                split.between.column(j)
            }
        };
        let mut d = if active.is_empty() {
            -&grad
        } else if active.len() <= (2 * dim) / 3 {
            // Woodbury: (I + V D V')^-1 g = g - V (D^-1 + V'V)^-1 V'g
            let a = active.len();
            let mut v = DMatrix::zeros(dim, a);
            for (l, entry) in active.iter().enumerate() {
                v.column_mut(l).copy_from(&col_of(entry));
            }
            let mut cap = v.tr_mul(&v);
            for (l, &(_, _, coef)) in active.iter().enumerate() {
                cap[(l, l)] += 1.0 / coef;
            }
            match Cholesky::new(cap) {
                Some(ch) => {
                    let y = ch.solve(&v.tr_mul(&grad));
                    let mut d = -&grad;
                    d.gemv(1.0, &v, &y, 1.0);
                    d
                }
                None => -&grad,
            }
        } else {
            let mut h = DMatrix::identity(dim, dim);
            for entry in &active {
                let col = col_of(entry).into_owned();
                h.ger(entry.2, &col, &col, 1.0);
            }
            match Cholesky::new(h) {
                Some(ch) => -ch.solve(&grad),
                None => -&grad,
            }
        };

        if grad.dot(&d) >= 0.0 {
            d = -&grad;
        }

        // Exact line search: the directional derivative is nondecreasing, so
        // bracket its zero and bisect.  This lands exactly on hinge corners,
        // where backtracking alone hovers outside the smoothing band.
        let zd = split.within.tr_mul(&d);
        let zhd = split.between.tr_mul(&d);
        let (ud, dd) = (u.dot(&d), d.norm_squared());
        let dphi = |t: f64| {
            let mut v = ud + t * dd;
            for (j, (&z, &zl)) in zu.iter().zip(zd.iter()).enumerate() {
                let arg = z + t * zl;
                let off = -1.0 + hp.delta;
                v += hp.c1
                    * zl
                    * (huber_d(off + arg, eps) - huber_d(off - arg, eps) + f64::from(p1[j]));
            }
            for (j, (&z, &zl)) in zhu.iter().zip(zhd.iter()).enumerate() {
                let arg = z + t * zl;
                let off = 1.0 + hp.delta;
                v += hp.c2
                    * zl
                    * (huber_d(off + arg, eps) - huber_d(off - arg, eps) + f64::from(p2[j]));
            }
            v
        };
        let mut hi = 1.0;
        let mut doubling = 0;
        while dphi(hi) < 0.0 && doubling < 60 {
            hi *= 2.0;
            doubling += 1;
        }
        let mut lo = 0.0;
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if dphi(mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let t = hi;
        u.axpy(t, &d, 1.0);
        zu.axpy(t, &zd, 1.0);
        zhu.axpy(t, &zhd, 1.0);
    }

    // Descent happened on the smoothed objective; near a solution the exact
    // one can tick up by a smoothing-scale amount.  Never hand back an
    // iterate the warm start already beats.
    let plane = Plane::from_stacked(&u);
    let plane = if fixed_p_objective(&plane, split, p1, p2, hp)
        > fixed_p_objective(u0, split, p1, p2, hp)
    {
        u0.clone()
    } else {
        plane
    };

    SubproblemResult {
        plane,
        converged,
        newton_iterations: iterations,
    }
}

/// One row of the solve trace, taken at an iterate u with p = update_p(u).
#[derive(Debug, Clone)]
pub struct IterRecord {
    /// Ramp objective at this iterate; non-increasing along the trace.
    pub objective: f64,
    pub nnz_p1: usize,
    pub nnz_p2: usize,
    /// c1 * p1' Z'u; the sign convention keeps this <= 0.
    pub sign_within: f64,
    /// c2 * p2' Zhat'u, also <= 0.
    pub sign_between: f64,
}

#[derive(Debug, Clone)]
pub struct CccpState {
    /// Final sign vectors; always consistent with the returned plane.
    pub p1: Vec<i8>,
    pub p2: Vec<i8>,
    /// Record 0 is the warm start; one more per subproblem solve.
    pub trace: Vec<IterRecord>,
    /// Number of subproblem solves.
    pub iterations: usize,
    /// False only when the iteration cap ended the loop.
    pub converged: bool,
    /// False when some inner Newton solve hit its own cap.
    pub subproblems_ok: bool,
}

impl CccpState {
    pub fn objective_trace(&self) -> Vec<f64> {
        self.trace.iter().map(|r| r.objective).collect()
    }

    pub fn final_objective(&self) -> f64 {
        self.trace.last().map(|r| r.objective).unwrap_or(f64::NAN)
    }
}

fn record(
    plane: &Plane,
    split: &ClusterSplit,
    hp: &HyperParams,
    p1: &[i8],
    p2: &[i8],
) -> IterRecord {
    let u = plane.stacked();
    let sign = |m: &DMatrix<f64>, p: &[i8], c: f64| {
        c * m
            .tr_mul(&u)
            .iter()
            .zip(p)
            .map(|(&t, &pj)| f64::from(pj) * t)
            .sum::<f64>()
    };
    IterRecord {
        objective: plane_objective(plane, split, hp),
        nnz_p1: p1.iter().filter(|&&v| v != 0).count(),
        nnz_p2: p2.iter().filter(|&&v| v != 0).count(),
        sign_within: sign(&split.within, p1, hp.c1),
        sign_between: sign(&split.between, p2, hp.c2),
    }
}

/// Alternate sign updates with convex solves until the signs repeat or the
/// ramp objective stalls.  Returns the plane together with the solve trace.
pub fn solve_plane_cccp(
    split: &ClusterSplit,
    hp: &HyperParams,
    opts: &SolverOptions,
    u0: &Plane,
) -> (Plane, CccpState) {
    let mut plane = u0.clone();
    let (mut p1, mut p2) = update_p(&plane, split, hp.delta, hp.s);
    let mut trace = vec![record(&plane, split, hp, &p1, &p2)];
    let mut converged = false;
    let mut subproblems_ok = true;
    let mut iterations = 0;

    for _ in 0..opts.max_iter {
        let sub = solve_subproblem(split, &p1, &p2, hp, opts, &plane);
        subproblems_ok &= sub.converged;
        plane = sub.plane;
        iterations += 1;
        let (q1, q2) = update_p(&plane, split, hp.delta, hp.s);
        trace.push(record(&plane, split, hp, &q1, &q2));
        let repeated = q1 == p1 && q2 == p2;
        let decrease = trace[trace.len() - 2].objective - trace[trace.len() - 1].objective;
        p1 = q1;
        p2 = q2;
        if repeated || decrease <= opts.objective_tol {
            converged = true;
            break;
        }
    }

    (
        plane,
        CccpState {
            p1,
            p2,
            trace,
            iterations,
            converged,
            subproblems_ok,
        },
    )
}
