//! Ramp loss functions and the per-plane clustering objective.
//!
//! A plane should pass through its own cluster and keep everything else at
//! deviation at least 1.  Plain hinge versions of those two goals are
//! unbounded, so far-away points dominate; the ramp pair below caps both
//! losses.  `r1` penalizes within-cluster deviations once |dev| leaves the
//! flat zone `[0, 1-delta]` and saturates at `1-s`; `r2` rewards
//! between-cluster deviations, falling from `2+2delta` to its floor
//! `1+delta-s` once |dev| reaches `1+delta`.

use nalgebra::{DMatrix, DVector};

use crate::data::ClusterSplit;
use crate::error::{Error, Result};

/// Ramp parameters plus the trade-off and kernel knobs.
///
/// `delta` in [0,1) widens the flat zones; `s` in (-1,0] sets where the
/// losses saturate; `c1`/`c2` weight the within/between terms; `mu` is the
/// Gaussian kernel width; `c` is the PPC trade-off.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HyperParams {
    pub c1: f64,
    pub c2: f64,
    pub delta: f64,
    pub s: f64,
    pub mu: f64,
    pub c: f64,
}

impl Default for HyperParams {
    fn default() -> Self {
        HyperParams {
            c1: 1.0,
            c2: 1.0,
            delta: 0.3,
            s: -0.2,
            mu: 1.0,
            c: 1.0,
        }
    }
}

impl HyperParams {
    pub fn new(c1: f64, c2: f64, delta: f64, s: f64, mu: f64, c: f64) -> Result<Self> {
        let hp = HyperParams { c1, c2, delta, s, mu, c };
        hp.validate()?;
        Ok(hp)
    }

    pub fn validate(&self) -> Result<()> {
        let check = |name, value: f64, ok: bool, range| {
            if ok && value.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidParam { name, value, range })
            }
        };
        check("c1", self.c1, self.c1 > 0.0, "(0, inf)")?;
        check("c2", self.c2, self.c2 > 0.0, "(0, inf)")?;
        check("delta", self.delta, (0.0..1.0).contains(&self.delta), "[0, 1)")?;
        check("s", self.s, self.s > -1.0 && self.s <= 0.0, "(-1, 0]")?;
        check("mu", self.mu, self.mu > 0.0, "(0, inf)")?;
        check("c", self.c, self.c > 0.0, "(0, inf)")
    }
}

/// A hyperplane w'x + b = 0.  The augmented form u = (w; b) is what the
/// solver optimizes; `deviation` is the signed value w'x + b.
#[derive(Debug, Clone, PartialEq)]
pub struct Plane {
    pub w: DVector<f64>,
    pub b: f64,
}

impl Plane {
    pub fn zeros(n: usize) -> Self {
        Plane {
            w: DVector::zeros(n),
            b: 0.0,
        }
    }

    /// Feature dimension (without the bias).
    pub fn dim(&self) -> usize {
        self.w.len()
    }

    /// Stack into the augmented vector (w; b).
    pub fn stacked(&self) -> DVector<f64> {
        let mut u = DVector::zeros(self.w.len() + 1);
        u.rows_mut(0, self.w.len()).copy_from(&self.w);
        u[self.w.len()] = self.b;
        u
    }

    pub fn from_stacked(u: &DVector<f64>) -> Self {
        assert!(u.len() >= 2, "augmented vector needs at least (w1; b)");
        Plane {
            w: u.rows(0, u.len() - 1).into_owned(),
            b: u[u.len() - 1],
        }
    }

    /// Signed deviation of one sample, given as a feature slice.
    pub fn deviation(&self, x: &[f64]) -> f64 {
        assert_eq!(x.len(), self.w.len(), "sample dimension mismatch");
        self.w.iter().zip(x).map(|(wi, xi)| wi * xi).sum::<f64>() + self.b
    }

    /// Deviations of every row of a feature matrix at once.
    pub fn deviations(&self, features: &DMatrix<f64>) -> DVector<f64> {
        assert_eq!(features.ncols(), self.w.len(), "sample dimension mismatch");
        let mut out = DVector::from_element(features.nrows(), self.b);
        out.gemv(1.0, features, &self.w, 1.0);
        out
    }
}

/// Within-cluster ramp loss.
pub fn ramp_r1(dev: f64, delta: f64, s: f64) -> f64 {
    let a = dev.abs();
    if a <= 1.0 - delta {
        0.0
    } else if a >= 2.0 - delta - s {
        1.0 - s
    } else {
        a - 1.0 + delta
    }
}

/// Between-cluster ramp loss (decreasing in |dev|, floored at 1+delta-s).
pub fn ramp_r2(dev: f64, delta: f64, s: f64) -> f64 {
    let a = dev.abs();
    if a <= -s {
        2.0 + 2.0 * delta
    } else if a >= 1.0 + delta {
        1.0 + delta - s
    } else {
        -a + 2.0 + 2.0 * delta - s
    }
}

/// The per-plane objective: 0.5 (||w||^2 + b^2) plus ramped within and
/// between losses over an augmented split.
pub fn plane_objective(plane: &Plane, split: &ClusterSplit, hp: &HyperParams) -> f64 {
    let u = plane.stacked();
    assert_eq!(u.len(), split.aug_dim(), "plane/split dimension mismatch");
    let mut obj = 0.5 * u.norm_squared();
    for t in split.within.tr_mul(&u).iter() {
        obj += hp.c1 * ramp_r1(*t, hp.delta, hp.s);
    }
    for t in split.between.tr_mul(&u).iter() {
        obj += hp.c2 * ramp_r2(*t, hp.delta, hp.s);
    }
    obj
}

/// One row of the loss-curve table: both ramps next to the classical
/// quadratic, absolute and hinge-style between losses at the same deviation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossRow {
    pub dev: f64,
    pub r1: f64,
    pub r2: f64,
    pub quad: f64,
    pub abs: f64,
    pub twsvc_between: f64,
}

pub fn loss_curves(delta: f64, s: f64, grid: &[f64]) -> Vec<LossRow> {
    grid.iter()
        .map(|&dev| LossRow {
            dev,
            r1: ramp_r1(dev, delta, s),
            r2: ramp_r2(dev, delta, s),
            quad: dev * dev,
            abs: dev.abs(),
            twsvc_between: (1.0 - dev.abs()).max(0.0),
        })
        .collect()
}

pub fn write_loss_curves<W: std::io::Write>(out: &mut W, rows: &[LossRow]) -> std::io::Result<()> {
    writeln!(out, "dev,r1,r2,quad,abs,twsvc_between")?;
    for r in rows {
        writeln!(
            out,
            "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
            r.dev, r.r1, r.r2, r.quad, r.abs, r.twsvc_between
        )?;
    }
    Ok(())
}
