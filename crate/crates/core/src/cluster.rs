//! The clustering outer loop: alternate per-cluster plane solves with
//! minimum-deviation reassignment until the labels settle.

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::baselines::kpc_plane;
use crate::data::{split_rows, ClusterSplit, Dataset, Labels, ScaleMode};
use crate::error::{Error, Result};
use crate::ramp::{plane_objective, HyperParams, Plane};
use crate::solver::{solve_plane_cccp, IterRecord, SolverOptions};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KernelKind {
    Gaussian { mu: f64 },
    DotProduct,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Mode {
    Linear,
    Kernel(KernelKind),
}

/// Kernel matrix with k(a_i, b_j) at (i, j); rows of `a` and `b` are samples.
pub fn gram(a: &DMatrix<f64>, b: &DMatrix<f64>, kernel: KernelKind) -> DMatrix<f64> {
    assert_eq!(a.ncols(), b.ncols(), "kernel operands disagree in dimension");
    let mut prod = a * b.transpose();
    match kernel {
        KernelKind::DotProduct => prod,
        KernelKind::Gaussian { mu } => {
            assert!(mu > 0.0, "gaussian width must be positive");
            let an: Vec<f64> = a.row_iter().map(|r| r.norm_squared()).collect();
            let bn: Vec<f64> = b.row_iter().map(|r| r.norm_squared()).collect();
            for j in 0..prod.ncols() {
                for i in 0..prod.nrows() {
                    let d2 = (an[i] + bn[j] - 2.0 * prod[(i, j)]).max(0.0);
                    prod[(i, j)] = (-mu * d2).exp();
                }
            }
            prod
        }
    }
}

/// Absolute deviations of every sample (row of `features`) from every plane.
pub(crate) fn abs_deviations(planes: &[Plane], features: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(features.nrows(), planes.len());
    for (i, plane) in planes.iter().enumerate() {
        let devs = plane.deviations(features);
        for (j, &v) in devs.iter().enumerate() {
            out[(j, i)] = v.abs();
        }
    }
    out
}

/// Assign each sample to the plane it deviates least from (ties to the
/// smaller cluster id).
pub fn assign_to_planes(planes: &[Plane], features: &DMatrix<f64>) -> Result<Labels> {
    if planes.is_empty() {
        return Err(Error::BadClusterCount {
            k: 0,
            m: features.nrows(),
        });
    }
    if features.ncols() != planes[0].dim() {
        return Err(Error::Dimension {
            context: "assignment features",
            expected: planes[0].dim(),
            got: features.ncols(),
        });
    }
    let devs = abs_deviations(planes, features);
    let assignment = (0..features.nrows())
        .map(|j| {
            let mut best = 0;
            for i in 1..planes.len() {
                if devs[(j, i)] < devs[(j, best)] {
                    best = i;
                }
            }
            best + 1
        })
        .collect();
    Labels::new(assignment, planes.len())
}

/// Move the worst-fitting sample of the largest cluster into each empty
/// cluster.  Returns true when anything moved.
pub(crate) fn repair_empty(assignment: &mut [usize], k: usize, devs: &DMatrix<f64>) -> bool {
    let mut repaired = false;
    loop {
        let mut counts = vec![0usize; k + 1];
        for &a in assignment.iter() {
            counts[a] += 1;
        }
        let Some(empty) = (1..=k).find(|&c| counts[c] == 0) else {
            return repaired;
        };
        let largest = (1..=k).max_by_key(|&c| (counts[c], k - c)).unwrap();
        let mut victim = usize::MAX;
        let mut worst = f64::NEG_INFINITY;
        for (j, &a) in assignment.iter().enumerate() {
            if a != largest {
                continue;
            }
            let fit = (0..k).map(|i| devs[(j, i)]).fold(f64::INFINITY, f64::min);
            if fit > worst {
                worst = fit;
                victim = j;
            }
        }
        assignment[victim] = empty;
        repaired = true;
    }
}

pub(crate) struct PlaneSolve {
    pub plane: Plane,
    pub ok: bool,
    pub records: Option<Vec<IterRecord>>,
}

/// Per-cluster solve trace for one outer iteration.
#[derive(Debug, Clone)]
pub struct SolveTrace {
    pub outer: usize,
    pub cluster: usize,
    pub records: Vec<IterRecord>,
}

pub(crate) struct OuterOutcome {
    pub planes: Vec<Plane>,
    pub labels: Labels,
    pub outer_iterations: usize,
    pub converged: bool,
    pub objective: f64,
    pub all_solves_ok: bool,
    pub traces: Vec<SolveTrace>,
}

fn validate_init(m: usize, k: usize, init: &Labels) -> Result<()> {
    if k == 0 || k > m {
        return Err(Error::BadClusterCount { k, m });
    }
    if init.len() != m {
        return Err(Error::LabelLength {
            left: m,
            right: init.len(),
        });
    }
    if init.k() != k {
        return Err(Error::Dimension {
            context: "initial labels",
            expected: k,
            got: init.k(),
        });
    }
    if let Some(c) = (1..=k).find(|&c| init.counts()[c] == 0) {
        return Err(Error::EmptyInitCluster { cluster: c });
    }
    Ok(())
}

/// Generic plane-based Lloyd loop.  Labels stop changing, a 2-cycle guard
/// fires (keeping the lower-objective state), or `outer_max` is reached.
/// The returned labels are always the raw minimum-deviation assignment of
/// the returned planes, so reapplying `assign_to_planes` reproduces them.
pub(crate) fn outer_loop<F, O>(
    features: &DMatrix<f64>,
    k: usize,
    init: &Labels,
    outer_max: usize,
    per_objective: O,
    solve: F,
    collect_traces: bool,
) -> Result<OuterOutcome>
where
    F: Fn(usize, &ClusterSplit, Option<&Plane>) -> PlaneSolve + Sync,
    O: Fn(&Plane, &ClusterSplit) -> f64,
{
    validate_init(features.nrows(), k, init)?;
    assert!(outer_max >= 1, "outer_max must be at least 1");

    let mut traces: Vec<SolveTrace> = Vec::new();
    let solve_all = |labels: &Labels,
                         warm: Option<&[Plane]>,
                         outer: usize,
                         traces: &mut Vec<SolveTrace>|
     -> Result<(Vec<Plane>, f64, bool)> {
        let splits = (1..=k)
            .map(|i| split_rows(features, labels, i))
            .collect::<Result<Vec<_>>>()?;
        let mut solved: Vec<PlaneSolve> = splits
            .par_iter()
            .enumerate()
            .map(|(idx, sp)| solve(idx + 1, sp, warm.map(|w| &w[idx])))
            .collect();
        let ok = solved.iter().all(|s| s.ok);
        let objective = solved
            .iter()
            .zip(&splits)
            .map(|(s, sp)| per_objective(&s.plane, sp))
            .sum();
        if collect_traces {
            for (idx, s) in solved.iter_mut().enumerate() {
                if let Some(records) = s.records.take() {
                    traces.push(SolveTrace {
                        outer,
                        cluster: idx + 1,
                        records,
                    });
                }
            }
        }
        Ok((solved.into_iter().map(|s| s.plane).collect(), objective, ok))
    };

    let mut labels = init.clone();
    let (mut planes, mut objective, mut all_ok) = solve_all(&labels, None, 1, &mut traces)?;
    let mut outer = 1;
    let mut prev: Option<(Labels, Vec<Plane>, f64)> = None;
    let mut converged = false;

    loop {
        let devs = abs_deviations(&planes, features);
        let mut next = assign_to_planes(&planes, features)?.as_slice().to_vec();
        let repaired = repair_empty(&mut next, k, &devs);
        let next = Labels::new(next, k)?;

        if !repaired && next == labels {
            converged = true;
            break;
        }
        if let Some((two_back, old_planes, old_objective)) = &prev {
            if *two_back == next {
                if *old_objective < objective {
                    planes = old_planes.clone();
                    objective = *old_objective;
                }
                converged = true;
                break;
            }
        }
        if outer == outer_max {
            break;
        }

        prev = Some((labels.clone(), planes.clone(), objective));
        labels = next;
        let warm = planes;
        let solved = solve_all(&labels, Some(&warm), outer + 1, &mut traces)?;
        planes = solved.0;
        objective = solved.1;
        all_ok &= solved.2;
        outer += 1;
    }

    let labels = assign_to_planes(&planes, features)?;
    Ok(OuterOutcome {
        planes,
        labels,
        outer_iterations: outer,
        converged,
        objective,
        all_solves_ok: all_ok,
        traces,
    })
}

/// Facts recorded about a completed training run.
#[derive(Debug, Clone)]
pub struct TrainingMeta {
    pub hp: HyperParams,
    pub outer_iterations: usize,
    pub final_labels: Labels,
    pub scale: ScaleMode,
    pub converged: bool,
    pub objective: f64,
    pub seed: Option<u64>,
}

/// Linear plane model: one hyperplane in feature space per cluster.
#[derive(Debug, Clone)]
pub struct PlaneModel {
    pub planes: Vec<Plane>,
    pub meta: Option<TrainingMeta>,
}

impl PlaneModel {
    pub fn k(&self) -> usize {
        self.planes.len()
    }

    /// Feature dimension expected by `assign`.
    pub fn n(&self) -> usize {
        self.planes[0].dim()
    }

    pub fn assign(&self, x: &DMatrix<f64>) -> Result<Labels> {
        assign_to_planes(&self.planes, x)
    }
}

/// Kernelized model: planes live in the span of the stored support samples.
#[derive(Debug, Clone)]
pub struct KernelModel {
    pub planes: Vec<Plane>,
    pub support: DMatrix<f64>,
    pub kernel: KernelKind,
    pub meta: Option<TrainingMeta>,
}

impl KernelModel {
    pub fn k(&self) -> usize {
        self.planes.len()
    }

    /// Feature dimension of raw inputs (columns of the support matrix).
    pub fn n(&self) -> usize {
        self.support.ncols()
    }

    pub fn assign(&self, x: &DMatrix<f64>) -> Result<Labels> {
        if x.ncols() != self.n() {
            return Err(Error::Dimension {
                context: "kernel model input",
                expected: self.n(),
                got: x.ncols(),
            });
        }
        assign_to_planes(&self.planes, &gram(x, &self.support, self.kernel))
    }
}

#[derive(Debug, Clone)]
pub enum FittedModel {
    Linear(PlaneModel),
    Kernel(KernelModel),
}

impl FittedModel {
    pub fn predict(&self, x: &DMatrix<f64>) -> Result<Labels> {
        match self {
            FittedModel::Linear(m) => m.assign(x),
            FittedModel::Kernel(m) => m.assign(x),
        }
    }

    pub fn k(&self) -> usize {
        match self {
            FittedModel::Linear(m) => m.k(),
            FittedModel::Kernel(m) => m.k(),
        }
    }

    pub fn meta(&self) -> Option<&TrainingMeta> {
        match self {
            FittedModel::Linear(m) => m.meta.as_ref(),
            FittedModel::Kernel(m) => m.meta.as_ref(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct FitOptions {
    pub outer_max: usize,
    pub solver: SolverOptions,
    /// Recorded into the model so results name their preprocessing.
    pub scale: ScaleMode,
    pub collect_traces: bool,
    /// Warm starts for the first outer iteration, one per cluster; when
    /// absent each cluster starts from its least-squares plane.
    pub initial_planes: Option<Vec<Plane>>,
    pub seed: Option<u64>,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            outer_max: 50,
            solver: SolverOptions::default(),
            scale: ScaleMode::None,
            collect_traces: false,
            initial_planes: None,
            seed: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct FitReport {
    pub outer_iterations: usize,
    pub converged: bool,
    pub objective: f64,
    pub all_solves_ok: bool,
    pub traces: Vec<SolveTrace>,
}

/// Default warm start for a cluster: its least-squares plane, or the zero
/// plane when the cluster is empty.
///
/// An eigenvector plane has arbitrary scale, and the ramp losses are not
/// scale-invariant: their thresholds sit at deviations of magnitude ~1, so a
/// unit-norm plane on data scaled into [0,1] leaves every other-cluster
/// deviation inside the flat |dev| <= -s band, where the subproblem degenerates
/// to pure regularization and the plane collapses to zero. Rescale the seed so
/// the mean absolute deviation of other-cluster samples is 1, putting the
/// start inside the sloped region of the losses.
fn seed_plane(split: &ClusterSplit) -> Plane {
    if split.n_within() == 0 {
        return Plane::zeros(split.aug_dim() - 1);
    }
    let plane = kpc_plane(split);
    if split.n_between() == 0 {
        return plane;
    }
    let devs = split.between.tr_mul(&plane.stacked());
    let mean = devs.iter().map(|t| t.abs()).sum::<f64>() / devs.len() as f64;
    let scale = 1.0 / mean.max(1e-6);
    Plane {
        w: plane.w * scale,
        b: plane.b * scale,
    }
}

/// Train one plane per cluster under the ramp objective.
pub fn fit(
    d: &Dataset,
    k: usize,
    hp: &HyperParams,
    mode: Mode,
    init: &Labels,
    opts: &FitOptions,
) -> Result<(FittedModel, FitReport)> {
    hp.validate()?;
    let features = match mode {
        Mode::Linear => d.samples().clone(),
        Mode::Kernel(kind) => gram(d.samples(), d.samples(), kind),
    };
    if let Some(ws) = &opts.initial_planes {
        if ws.len() != k {
            return Err(Error::Dimension {
                context: "initial planes",
                expected: k,
                got: ws.len(),
            });
        }
        if let Some(p) = ws.iter().find(|p| p.dim() != features.ncols()) {
            return Err(Error::Dimension {
                context: "initial plane dimension",
                expected: features.ncols(),
                got: p.dim(),
            });
        }
    }

    let solve = |cluster: usize, split: &ClusterSplit, warm: Option<&Plane>| -> PlaneSolve {
        let u0 = match warm {
            Some(p) => p.clone(),
            None => match &opts.initial_planes {
                Some(ws) => ws[cluster - 1].clone(),
                None => seed_plane(split),
            },
        };
        let (plane, state) = solve_plane_cccp(split, hp, &opts.solver, &u0);
        PlaneSolve {
            plane,
            ok: state.converged && state.subproblems_ok,
            records: Some(state.trace),
        }
    };

    let outcome = outer_loop(
        &features,
        k,
        init,
        opts.outer_max,
        |p, sp| plane_objective(p, sp, hp),
        solve,
        opts.collect_traces,
    )?;

    let meta = TrainingMeta {
        hp: *hp,
        outer_iterations: outcome.outer_iterations,
        final_labels: outcome.labels,
        scale: opts.scale,
        converged: outcome.converged,
        objective: outcome.objective,
        seed: opts.seed,
    };
    let report = FitReport {
        outer_iterations: outcome.outer_iterations,
        converged: outcome.converged,
        objective: outcome.objective,
        all_solves_ok: outcome.all_solves_ok,
        traces: outcome.traces,
    };
    let model = match mode {
        Mode::Linear => FittedModel::Linear(PlaneModel {
            planes: outcome.planes,
            meta: Some(meta),
        }),
        Mode::Kernel(kind) => FittedModel::Kernel(KernelModel {
            planes: outcome.planes,
            support: d.samples().clone(),
            kernel: kind,
            meta: Some(meta),
        }),
    };
    Ok((model, report))
}
