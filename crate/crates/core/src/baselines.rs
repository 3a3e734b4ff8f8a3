//! Baseline clustering methods: kmeans, k-plane clustering (kPC) and
//! proximal plane clustering (PPC).  The plane baselines share the outer
//! loop and assignment machinery of `cluster`; their per-cluster solves are
//! closed-form eigenproblems instead of ramp solves.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::cluster::{outer_loop, PlaneModel, PlaneSolve, TrainingMeta};
use crate::data::{random_init, ClusterSplit, Dataset, Labels, ScaleMode};
use crate::error::{Error, Result};
use crate::ramp::{HyperParams, Plane};

/// kmeans model: one centroid per cluster (rows of `centers`).
#[derive(Debug, Clone)]
pub struct CentroidModel {
    pub centers: DMatrix<f64>,
    pub meta: Option<TrainingMeta>,
}

impl CentroidModel {
    pub fn k(&self) -> usize {
        self.centers.nrows()
    }

    pub fn n(&self) -> usize {
        self.centers.ncols()
    }

    /// Nearest-centroid assignment, ties to the smaller cluster id.
    pub fn assign(&self, x: &DMatrix<f64>) -> Result<Labels> {
        if x.ncols() != self.n() {
            return Err(Error::Dimension {
                context: "kmeans model input",
                expected: self.n(),
                got: x.ncols(),
            });
        }
        let d = distances(&self.centers, x);
        let assignment = (0..x.nrows())
            .map(|j| {
                let mut best = 0;
                for i in 1..self.k() {
                    if d[(j, i)] < d[(j, best)] {
                        best = i;
                    }
                }
                best + 1
            })
            .collect();
        Labels::new(assignment, self.k())
    }
}

/// Squared distances from every row of `x` to every center row.
fn distances(centers: &DMatrix<f64>, x: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(x.nrows(), centers.nrows());
    for i in 0..centers.nrows() {
        for j in 0..x.nrows() {
            out[(j, i)] = (x.row(j) - centers.row(i)).norm_squared();
        }
    }
    out
}

fn means(x: &DMatrix<f64>, labels: &Labels, k: usize) -> DMatrix<f64> {
    let mut centers = DMatrix::zeros(k, x.ncols());
    let counts = labels.counts();
    for (j, &a) in labels.as_slice().iter().enumerate() {
        for c in 0..x.ncols() {
            centers[(a - 1, c)] += x[(j, c)];
        }
    }
    for i in 0..k {
        if counts[i + 1] > 0 {
            let inv = 1.0 / counts[i + 1] as f64;
            centers.row_mut(i).iter_mut().for_each(|v| *v *= inv);
        }
    }
    centers
}

/// Lloyd's algorithm from a seeded uniform assignment.  Empty clusters are
/// repaired by moving the worst-fitting sample out of the largest cluster.
pub fn kmeans_fit(d: &Dataset, k: usize, seed: u64, outer_max: usize) -> Result<CentroidModel> {
    let x = d.samples();
    let mut labels = random_init(d, k, seed)?;
    let mut centers = means(x, &labels, k);
    let mut outer = 1;
    let mut converged = false;
    loop {
        let dist = distances(&centers, x);
        let mut next: Vec<usize> = (0..x.nrows())
            .map(|j| {
                let mut best = 0;
                for i in 1..k {
                    if dist[(j, i)] < dist[(j, best)] {
                        best = i;
                    }
                }
                best + 1
            })
            .collect();
        let repaired = crate::cluster::repair_empty(&mut next, k, &dist);
        let next = Labels::new(next, k)?;
        if !repaired && next == labels {
            converged = true;
            break;
        }
        if outer == outer_max {
            break;
        }
        labels = next;
        centers = means(x, &labels, k);
        outer += 1;
    }

    let model = CentroidModel {
        centers,
        meta: None,
    };
    let final_labels = model.assign(x)?;
    let dist = distances(&model.centers, x);
    let wcss = final_labels
        .as_slice()
        .iter()
        .enumerate()
        .map(|(j, &a)| dist[(j, a - 1)])
        .sum();
    Ok(CentroidModel {
        meta: Some(TrainingMeta {
            hp: HyperParams::default(),
            outer_iterations: outer,
            final_labels,
            scale: ScaleMode::None,
            converged,
            objective: wcss,
            seed: Some(seed),
        }),
        ..model
    })
}

/// Unit eigenvector for the smallest eigenvalue, ties to the smaller index,
/// sign fixed so the largest-magnitude entry is positive.
fn smallest_eigenvector(sym: DMatrix<f64>) -> (f64, DVector<f64>) {
    let se = SymmetricEigen::new(sym);
    let mut bi = 0;
    for i in 1..se.eigenvalues.len() {
        if se.eigenvalues[i] < se.eigenvalues[bi] {
            bi = i;
        }
    }
    let mut v = se.eigenvectors.column(bi).into_owned();
    let mut mi = 0;
    for i in 1..v.len() {
        if v[i].abs() > v[mi].abs() {
            mi = i;
        }
    }
    if v[mi] < 0.0 {
        v.neg_mut();
    }
    (se.eigenvalues[bi], v)
}

/// Least-squares plane of the within side: w is the smallest eigenvector of
/// the centered scatter, b places the plane through the centroid.
pub fn kpc_plane(split: &ClusterSplit) -> Plane {
    let m = split.n_within();
    assert!(m >= 1, "kpc plane needs a non-empty cluster");
    let n = split.aug_dim() - 1;
    let pts = split.within.rows(0, n);
    let mean = pts.column_sum() / m as f64;
    let mut scatter = DMatrix::zeros(n, n);
    for j in 0..m {
        let c = pts.column(j) - &mean;
        scatter.ger(1.0, &c, &c, 1.0);
    }
    let (_, w) = smallest_eigenvector(scatter);
    let b = -w.dot(&mean);
    Plane { w, b }
}

/// Proximal plane: smallest eigenvector of G - cH (+ a tiny ridge), where G
/// and H are the augmented within/between second-moment matrices.  The
/// returned (w; b) has unit augmented norm.
pub fn ppc_plane(split: &ClusterSplit, c: f64) -> Plane {
    assert!(split.n_within() >= 1, "ppc plane needs a non-empty cluster");
    assert!(c > 0.0 && c.is_finite(), "ppc trade-off must be positive");
    let dim = split.aug_dim();
    let mut m = DMatrix::zeros(dim, dim);
    for j in 0..split.n_within() {
        let z = split.within.column(j).into_owned();
        m.ger(1.0, &z, &z, 1.0);
    }
    for j in 0..split.n_between() {
        let z = split.between.column(j).into_owned();
        m.ger(-c, &z, &z, 1.0);
    }
    for i in 0..dim {
        m[(i, i)] += 1e-8;
    }
    let (_, u) = smallest_eigenvector(m);
    Plane::from_stacked(&u)
}

fn plane_baseline_fit<F, O>(
    d: &Dataset,
    k: usize,
    init: &Labels,
    outer_max: usize,
    solve_one: F,
    per_objective: O,
) -> Result<PlaneModel>
where
    F: Fn(&ClusterSplit) -> Plane + Sync,
    O: Fn(&Plane, &ClusterSplit) -> f64,
{
    let solve = |_: usize, split: &ClusterSplit, _: Option<&Plane>| -> PlaneSolve {
        let plane = if split.n_within() == 0 {
            Plane::zeros(split.aug_dim() - 1)
        } else {
            solve_one(split)
        };
        PlaneSolve {
            plane,
            ok: true,
            records: None,
        }
    };
    let outcome = outer_loop(d.samples(), k, init, outer_max, per_objective, solve, false)?;
    Ok(PlaneModel {
        planes: outcome.planes,
        meta: Some(TrainingMeta {
            hp: HyperParams::default(),
            outer_iterations: outcome.outer_iterations,
            final_labels: outcome.labels,
            scale: ScaleMode::None,
            converged: outcome.converged,
            objective: outcome.objective,
            seed: None,
        }),
    })
}

/// k-plane clustering: least-squares planes alternated with
/// minimum-deviation assignment.
pub fn kpc_fit(d: &Dataset, k: usize, init: &Labels, outer_max: usize) -> Result<PlaneModel> {
    plane_baseline_fit(d, k, init, outer_max, kpc_plane, |p, sp| {
        sp.within.tr_mul(&p.stacked()).norm_squared()
    })
}

/// Proximal plane clustering with between-cluster push weight `c`.
pub fn ppc_fit(
    d: &Dataset,
    k: usize,
    c: f64,
    init: &Labels,
    outer_max: usize,
) -> Result<PlaneModel> {
    if !(c > 0.0 && c.is_finite()) {
        return Err(Error::InvalidParam {
            name: "c",
            value: c,
            range: "(0, inf)",
        });
    }
    let mut model = plane_baseline_fit(
        d,
        k,
        init,
        outer_max,
        |sp| ppc_plane(sp, c),
        |p, sp| {
            let u = p.stacked();
            sp.within.tr_mul(&u).norm_squared() - c * sp.between.tr_mul(&u).norm_squared()
        },
    )?;
    if let Some(meta) = &mut model.meta {
        meta.hp.c = c;
    }
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::split_cluster;
    use nalgebra::dmatrix;

    #[test]
    fn kmeans_two_points_two_clusters() {
        let d = Dataset::new(dmatrix![0.0, 0.0; 10.0, 0.0]).unwrap();
        let m = kmeans_fit(&d, 2, 0, 50).unwrap();
        let meta = m.meta.as_ref().unwrap();
        let l = meta.final_labels.as_slice();
        assert_ne!(l[0], l[1]);
        assert!(meta.objective.abs() < 1e-12);
        assert!(meta.converged);
        // centers are the points themselves, in label order
        let c0 = m.centers.row(l[0] - 1);
        assert_eq!((c0[0], c0[1]), (0.0, 0.0));
    }

    #[test]
    fn kmeans_square_single_cluster_centroid() {
        let d = Dataset::new(dmatrix![0.0, 0.0; 1.0, 0.0; 0.0, 1.0; 1.0, 1.0]).unwrap();
        let m = kmeans_fit(&d, 1, 3, 50).unwrap();
        assert_eq!(m.centers.row(0).iter().cloned().collect::<Vec<_>>(), vec![0.5, 0.5]);
        let meta = m.meta.as_ref().unwrap();
        assert!((meta.objective - 4.0 * 0.5).abs() < 1e-12);
    }

    #[test]
    fn kmeans_separates_blobs_and_is_seeded() {
        let mut rows = Vec::new();
        for i in 0..8 {
            rows.push([i as f64 * 0.01, 0.0]);
        }
        for i in 0..8 {
            rows.push([i as f64 * 0.01 + 30.0, 0.0]);
        }
        let d = Dataset::new(DMatrix::from_fn(16, 2, |r, c| rows[r][c])).unwrap();
        let m = kmeans_fit(&d, 2, 7, 50).unwrap();
        let l = m.meta.as_ref().unwrap().final_labels.as_slice().to_vec();
        assert!(l[..8].iter().all(|&a| a == l[0]));
        assert!(l[8..].iter().all(|&a| a == l[8]));
        assert_ne!(l[0], l[8]);

        let m2 = kmeans_fit(&d, 2, 7, 50).unwrap();
        assert_eq!(m.centers, m2.centers);

        // predict matches stored labels
        let pred = m.assign(d.samples()).unwrap();
        assert_eq!(pred.as_slice(), &l[..]);
    }

    fn whole_split(d: &Dataset) -> ClusterSplit {
        let l = Labels::new(vec![1; d.m()], 1).unwrap();
        split_cluster(d, &l, 1).unwrap()
    }

    #[test]
    fn kpc_plane_fits_horizontal_line() {
        let d = Dataset::new(dmatrix![0.0, 2.0; 1.0, 2.0; 2.0, 2.0]).unwrap();
        let p = kpc_plane(&whole_split(&d));
        assert!((p.w[0]).abs() < 1e-10);
        assert!((p.w[1] - 1.0).abs() < 1e-10);
        assert!((p.b + 2.0).abs() < 1e-10);
        for j in 0..3 {
            assert!(p.deviation(&[d.samples()[(j, 0)], 2.0]).abs() < 1e-9);
        }
    }

    #[test]
    fn kpc_plane_diagonal_line_sign_fixed() {
        let d = Dataset::new(dmatrix![0.0, 1.0; 1.0, 0.0; 0.5, 0.5]).unwrap();
        let p = kpc_plane(&whole_split(&d));
        let r = 0.5f64.sqrt();
        assert!((p.w[0] - r).abs() < 1e-10);
        assert!((p.w[1] - r).abs() < 1e-10);
        assert!((p.b + r).abs() < 1e-10);
    }

    #[test]
    fn kpc_plane_single_point_zero_residual() {
        let d = Dataset::new(dmatrix![3.0, -1.0]).unwrap();
        let p = kpc_plane(&whole_split(&d));
        assert!((p.w.norm() - 1.0).abs() < 1e-12);
        assert!(p.deviation(&[3.0, -1.0]).abs() < 1e-12);
    }

    fn lines_split() -> ClusterSplit {
        let mut rows = Vec::new();
        for i in 0..5 {
            rows.push([i as f64, 0.0]);
        }
        for i in 0..5 {
            rows.push([i as f64, 5.0]);
        }
        let d = Dataset::new(DMatrix::from_fn(10, 2, |r, c| rows[r][c])).unwrap();
        let mut lab = vec![1usize; 5];
        lab.extend(vec![2usize; 5]);
        let l = Labels::new(lab, 2).unwrap();
        split_cluster(&d, &l, 1).unwrap()
    }

    #[test]
    fn ppc_plane_prefers_within_side() {
        let sp = lines_split();
        let p = ppc_plane(&sp, 0.1);
        let u = p.stacked();
        assert!((u.norm() - 1.0).abs() < 1e-9);
        // within deviations much smaller than between deviations
        let win: f64 = sp.within.tr_mul(&u).iter().map(|t| t.abs()).sum::<f64>() / 5.0;
        let bet: f64 = sp.between.tr_mul(&u).iter().map(|t| t.abs()).sum::<f64>() / 5.0;
        assert!(win * 10.0 < bet, "win {win} bet {bet}");

        // swapping the sides can only raise the objective of this u
        let swapped = ClusterSplit {
            within: sp.between.clone(),
            between: sp.within.clone(),
        };
        let value = |s: &ClusterSplit, plane: &Plane| {
            let v = plane.stacked();
            s.within.tr_mul(&v).norm_squared() - 0.1 * s.between.tr_mul(&v).norm_squared()
        };
        assert!(value(&sp, &p) <= value(&swapped, &p) + 1e-12);
    }

    #[test]
    fn plane_baselines_separate_parallel_lines() {
        let mut rows = Vec::new();
        for i in 0..6 {
            rows.push([i as f64, 0.0]);
        }
        for i in 0..6 {
            rows.push([i as f64, 5.0]);
        }
        let d = Dataset::new(DMatrix::from_fn(12, 2, |r, c| rows[r][c])).unwrap();
        let init = crate::data::nng_init(&d, 2, 0).unwrap();

        let kpc = kpc_fit(&d, 2, &init, 50).unwrap();
        let l = kpc.meta.as_ref().unwrap().final_labels.clone();
        assert_eq!(l.as_slice(), init.as_slice());
        assert_eq!(&kpc.assign(d.samples()).unwrap(), &l);

        let ppc = ppc_fit(&d, 2, 1.0, &init, 50).unwrap();
        let lp = ppc.meta.as_ref().unwrap().final_labels.clone();
        assert_eq!(lp.as_slice(), init.as_slice());

        assert!(matches!(
            ppc_fit(&d, 2, 0.0, &init, 50),
            Err(Error::InvalidParam { .. })
        ));
    }

    #[test]
    fn kmeans_rejects_bad_k() {
        let d = Dataset::new(dmatrix![1.0; 2.0]).unwrap();
        assert!(matches!(kmeans_fit(&d, 0, 0, 50), Err(Error::BadClusterCount { .. })));
        assert!(matches!(kmeans_fit(&d, 3, 0, 50), Err(Error::BadClusterCount { .. })));
    }

    #[test]
    fn eigenvector_helper_sign_and_tie_rules() {
        // diag(2, 1): smallest eigenvalue 1 along e2
        let (ev, v) = smallest_eigenvector(dmatrix![2.0, 0.0; 0.0, 1.0]);
        assert!((ev - 1.0).abs() < 1e-12);
        assert!((v[1] - 1.0).abs() < 1e-12);
        assert!(v[0].abs() < 1e-12);

        // scaled identity: degenerate, still unit and sign-fixed
        let (_, v2) = smallest_eigenvector(dmatrix![3.0, 0.0; 0.0, 3.0]);
        assert!((v2.norm() - 1.0).abs() < 1e-12);
        assert!(v2.iter().cloned().fold(f64::NEG_INFINITY, f64::max) > 0.0);
    }
}
