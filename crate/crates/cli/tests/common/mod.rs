//! Helpers shared by the integration suites: binary invocation, dataset
//! paths, random problem instances, and the independent reference
//! implementations ("oracles") the acceptance gates compare against.

#![allow(dead_code)]

use std::path::PathBuf;
use std::process::{Command, Output};
use std::sync::{Mutex, MutexGuard, OnceLock};

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use planeclust::data::ClusterSplit;
use planeclust::ramp::HyperParams;

/// Serializes the timed suites so wall-clock budgets are measured without
/// the other tests competing for cores.
pub fn timed_section() -> MutexGuard<'static, ()> {
    static LOCK: OnceLock<Mutex<()>> = OnceLock::new();
    LOCK.get_or_init(|| Mutex::new(()))
        .lock()
        .unwrap_or_else(|poisoned| poisoned.into_inner())
}

pub fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_planeclust"))
}

/// Bundled dataset, addressed from the workspace root.
pub fn data_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../data")
        .join(name)
}

pub fn run_ok(cmd: &mut Command) -> Output {
    let out = cmd.output().expect("failed to spawn planeclust binary");
    assert!(
        out.status.success(),
        "command {:?} failed with {:?}\nstdout: {}\nstderr: {}",
        cmd,
        out.status.code(),
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

pub fn stdout_of(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).expect("binary wrote non-UTF-8 to stdout")
}

/// Rows of a results CSV keyed by (dataset, method, mode-prefix of params).
pub fn csv_cell(results: &str, dataset: &str, method: &str, mode: &str) -> (f64, f64) {
    for line in results.lines().skip(1) {
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() >= 5
            && cols[0] == dataset
            && cols[1] == method
            && cols[4].starts_with(&format!("mode={mode}"))
        {
            let ac = cols[2].parse().expect("ac column should be numeric");
            let mi = cols[3].parse().expect("mi column should be numeric");
            return (ac, mi);
        }
    }
    panic!("no row for {dataset}/{method}/{mode} in results:\n{results}");
}

/// Prints the verdict line for one acceptance gate.  `pass()` disarms it;
/// a panic unwinding past an armed gate prints FAIL on the way out.
pub struct Gate {
    number: usize,
    name: &'static str,
    armed: bool,
}

impl Gate {
    pub fn new(number: usize, name: &'static str) -> Gate {
        Gate {
            number,
            name,
            armed: true,
        }
    }

    pub fn pass(mut self) {
        self.armed = false;
        println!("ACCEPTANCE {} ({}): PASS", self.number, self.name);
    }

    pub fn fail(mut self, reason: &str) -> ! {
        self.armed = false;
        println!("ACCEPTANCE {} ({}): FAIL — {reason}", self.number, self.name);
        panic!("acceptance {} ({}) failed: {reason}", self.number, self.name);
    }
}

impl Drop for Gate {
    fn drop(&mut self) {
        if self.armed {
            println!("ACCEPTANCE {} ({}): FAIL", self.number, self.name);
        }
    }
}

/// Random augmented split: features uniform in [-scale, scale], last row 1.
pub fn random_split(
    rng: &mut ChaCha8Rng,
    n_features: usize,
    n_within: usize,
    n_between: usize,
    scale: f64,
) -> ClusterSplit {
    let fill = |rng: &mut ChaCha8Rng, cols: usize| {
        let mut v = Vec::with_capacity((n_features + 1) * cols);
        for _ in 0..cols {
            for _ in 0..n_features {
                v.push(rng.gen_range(-scale..=scale));
            }
            v.push(1.0);
        }
        DMatrix::from_vec(n_features + 1, cols, v)
    };
    ClusterSplit {
        within: fill(rng, n_within),
        between: fill(rng, n_between),
    }
}

pub fn random_signs(rng: &mut ChaCha8Rng, len: usize) -> Vec<i8> {
    (0..len).map(|_| rng.gen_range(-1i8..=1)).collect()
}

/// Exact fixed-sign objective
///
///     0.5||u||^2
///     + c1 sum_j [ (d-1-t_j)_+ + (d-1+t_j)_+ + p1_j t_j ]
///     + c2 sum_j [ (d+1-s_j)_+ + (d+1+s_j)_+ + p2_j s_j ]
///
/// with t = Z'u over within columns and s = Zhat'u over between columns.
/// Written against raw columns, independently of the library solver.
pub fn exact_fixed_sign_objective(
    u: &DVector<f64>,
    split: &ClusterSplit,
    p1: &[i8],
    p2: &[i8],
    hp: &HyperParams,
) -> f64 {
    let pos = |a: f64| a.max(0.0);
    let mut obj = 0.5 * u.norm_squared();
    for (j, col) in split.within.column_iter().enumerate() {
        let t = col.dot(u);
        obj += hp.c1 * (pos(hp.delta - 1.0 - t) + pos(hp.delta - 1.0 + t) + f64::from(p1[j]) * t);
    }
    for (j, col) in split.between.column_iter().enumerate() {
        let t = col.dot(u);
        obj += hp.c2 * (pos(hp.delta + 1.0 - t) + pos(hp.delta + 1.0 + t) + f64::from(p2[j]) * t);
    }
    obj
}

/// Subgradient descent on the fixed-sign objective with the classic
/// diminishing schedule for a 1-strongly-convex function, eta_t = 1/(t+1),
/// reporting the best exact objective along the trajectory.
pub fn subgradient_best(
    split: &ClusterSplit,
    p1: &[i8],
    p2: &[i8],
    hp: &HyperParams,
    steps: usize,
) -> f64 {
    let dim = split.aug_dim();
    // columns copied into plain vectors once; the loop below is allocation-free
    let cols = |m: &DMatrix<f64>| -> Vec<Vec<f64>> {
        m.column_iter().map(|c| c.iter().copied().collect()).collect()
    };
    let within = cols(&split.within);
    let between = cols(&split.between);
    let mut u = vec![0.0f64; dim];
    let mut g = vec![0.0f64; dim];
    let mut best = f64::INFINITY;
    for t in 0..steps {
        let mut obj = 0.0;
        for (gi, ui) in g.iter_mut().zip(&u) {
            obj += 0.5 * ui * ui;
            *gi = *ui;
        }
        let mut side = |cols: &[Vec<f64>], p: &[i8], c: f64, margin: f64| {
            for (col, &pj) in cols.iter().zip(p) {
                let v: f64 = col.iter().zip(&u).map(|(a, b)| a * b).sum();
                let lo = margin - v;
                let hi = margin + v;
                obj += c * (lo.max(0.0) + hi.max(0.0) + f64::from(pj) * v);
                let mut coef = f64::from(pj);
                if lo > 0.0 {
                    coef -= 1.0;
                }
                if hi > 0.0 {
                    coef += 1.0;
                }
                if coef != 0.0 {
                    let cc = c * coef;
                    for (gi, a) in g.iter_mut().zip(col) {
                        *gi += cc * a;
                    }
                }
            }
        };
        side(&within, p1, hp.c1, hp.delta - 1.0);
        side(&between, p2, hp.c2, hp.delta + 1.0);
        best = best.min(obj);
        let eta = 1.0 / (t as f64 + 1.0);
        for (ui, gi) in u.iter_mut().zip(&g) {
            *ui -= eta * gi;
        }
    }
    best
}

/// Pairwise-agreement accuracy by literal enumeration of all sample pairs.
pub fn ac_by_pair_enumeration(truth: &[usize], pred: &[usize]) -> f64 {
    assert_eq!(truth.len(), pred.len());
    let m = truth.len();
    assert!(m >= 2);
    let mut agree = 0u64;
    let mut total = 0u64;
    for i in 0..m {
        for j in i + 1..m {
            total += 1;
            if (truth[i] == truth[j]) == (pred[i] == pred[j]) {
                agree += 1;
            }
        }
    }
    100.0 * agree as f64 / total as f64
}

fn entropy_of(dist: &[f64]) -> f64 {
    dist.iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| -p * p.ln())
        .sum()
}

/// Normalized mutual information from probability tables and the entropy
/// identity I = H(T) + H(P) - H(T,P), independent of the library's
/// count-ratio form.
pub fn mi_by_entropies(truth: &[usize], pred: &[usize]) -> f64 {
    assert_eq!(truth.len(), pred.len());
    let m = truth.len() as f64;
    let kt = *truth.iter().max().expect("nonempty") + 1;
    let kp = *pred.iter().max().expect("nonempty") + 1;
    let mut joint = vec![0.0f64; kt * kp];
    let mut pt = vec![0.0f64; kt];
    let mut pp = vec![0.0f64; kp];
    for (&t, &p) in truth.iter().zip(pred) {
        joint[t * kp + p] += 1.0 / m;
        pt[t] += 1.0 / m;
        pp[p] += 1.0 / m;
    }
    let ht = entropy_of(&pt);
    let hp = entropy_of(&pp);
    if ht == 0.0 && hp == 0.0 {
        return 100.0;
    }
    if ht == 0.0 || hp == 0.0 {
        return 0.0;
    }
    let info = ht + hp - entropy_of(&joint);
    100.0 * info / ht.max(hp)
}

pub fn seeded(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
