//! Dataset loading, scaling, cluster splits and label initialization.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::DMatrix;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Sample matrix (rows are samples, columns are features) plus optional
/// ground-truth labels and feature names taken from a CSV header.
#[derive(Debug, Clone)]
pub struct Dataset {
    samples: DMatrix<f64>,
    truth: Option<Labels>,
    feature_names: Option<Vec<String>>,
}

impl Dataset {
    pub fn new(samples: DMatrix<f64>) -> Result<Self> {
        if samples.nrows() == 0 || samples.ncols() == 0 {
            return Err(Error::EmptyData("sample matrix must be non-empty".into()));
        }
        if samples.iter().any(|v| !v.is_finite()) {
            return Err(Error::EmptyData("sample matrix contains non-finite values".into()));
        }
        Ok(Dataset {
            samples,
            truth: None,
            feature_names: None,
        })
    }

    pub fn with_truth(samples: DMatrix<f64>, truth: Labels) -> Result<Self> {
        let mut d = Dataset::new(samples)?;
        if truth.len() != d.m() {
            return Err(Error::LabelLength {
                left: d.m(),
                right: truth.len(),
            });
        }
        d.truth = Some(truth);
        Ok(d)
    }

    /// Number of samples.
    pub fn m(&self) -> usize {
        self.samples.nrows()
    }

    /// Number of features.
    pub fn n(&self) -> usize {
        self.samples.ncols()
    }

    pub fn samples(&self) -> &DMatrix<f64> {
        &self.samples
    }

    pub fn truth(&self) -> Option<&Labels> {
        self.truth.as_ref()
    }

    pub fn feature_names(&self) -> Option<&[String]> {
        self.feature_names.as_deref()
    }
}

/// A cluster assignment: one 1-based id per sample, ids in `1..=k`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Labels {
    assignment: Vec<usize>,
    k: usize,
}

impl Labels {
    pub fn new(assignment: Vec<usize>, k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::BadClusterCount {
                k,
                m: assignment.len(),
            });
        }
        for &a in &assignment {
            if a == 0 || a > k {
                return Err(Error::LabelRange { value: a as i64, k });
            }
        }
        Ok(Labels { assignment, k })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.assignment.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignment.is_empty()
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.assignment
    }

    /// Per-cluster sizes, index 0 unused so that `counts[i]` is cluster i.
    pub fn counts(&self) -> Vec<usize> {
        let mut c = vec![0usize; self.k + 1];
        for &a in &self.assignment {
            c[a] += 1;
        }
        c
    }
}

/// Which CSV column holds the ground-truth label.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ColumnSelector {
    Index(usize),
    Name(String),
    Last,
}

/// Load a CSV file of numeric features with an optional label column.
///
/// A header row is assumed when any field of the first row fails numeric
/// parsing — the label column excluded, since labels may be strings.  Labels
/// (strings or numbers) are re-coded densely to `1..=k` in order of first
/// appearance.
pub fn load_csv(path: &Path, label: Option<&ColumnSelector>) -> Result<Dataset> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_csv(&text, label)
}

pub fn parse_csv(text: &str, label: Option<&ColumnSelector>) -> Result<Dataset> {
    let rows: Vec<(usize, Vec<&str>)> = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| (i + 1, l.split(',').map(str::trim).collect()))
        .collect();
    if rows.is_empty() {
        return Err(Error::EmptyData("no rows in csv input".into()));
    }
    let ncols = rows[0].1.len();
    for (line, fields) in &rows {
        if fields.len() != ncols {
            return Err(Error::Csv {
                row: *line,
                col: fields.len().min(ncols) + 1,
                msg: format!("ragged row: expected {} fields, got {}", ncols, fields.len()),
            });
        }
    }

    let numeric = |s: &str| s.parse::<f64>().ok().filter(|v| v.is_finite());

    // Resolve the label column; `Name` forces the first row to be a header.
    let (label_idx, mut header) = match label {
        None => (None, false),
        Some(ColumnSelector::Last) => (Some(ncols - 1), false),
        Some(ColumnSelector::Index(i)) => {
            if *i >= ncols {
                return Err(Error::LabelColumn(format!(
                    "index {} out of range for {} columns",
                    i, ncols
                )));
            }
            (Some(*i), false)
        }
        Some(ColumnSelector::Name(name)) => {
            let idx = rows[0]
                .1
                .iter()
                .position(|f| *f == name)
                .ok_or_else(|| Error::LabelColumn(name.clone()))?;
            (Some(idx), true)
        }
    };
    if !header {
        header = rows[0]
            .1
            .iter()
            .enumerate()
            .any(|(c, f)| Some(c) != label_idx && numeric(f).is_none());
    }

    let feature_names = if header {
        Some(
            rows[0]
                .1
                .iter()
                .enumerate()
                .filter(|(c, _)| Some(*c) != label_idx)
                .map(|(_, f)| f.to_string())
                .collect::<Vec<_>>(),
        )
    } else {
        None
    };
    let data = if header { &rows[1..] } else { &rows[..] };
    if data.is_empty() {
        return Err(Error::EmptyData("csv contains a header but no data rows".into()));
    }
    let n = ncols - usize::from(label_idx.is_some());
    if n == 0 {
        return Err(Error::EmptyData("csv has no feature columns".into()));
    }

    let m = data.len();
    let mut values = Vec::with_capacity(m * n);
    let mut raw_labels: Vec<&str> = Vec::with_capacity(if label_idx.is_some() { m } else { 0 });
    for (line, fields) in data {
        for (c, field) in fields.iter().enumerate() {
            if Some(c) == label_idx {
                raw_labels.push(field);
            } else {
                values.push(numeric(field).ok_or_else(|| Error::Csv {
                    row: *line,
                    col: c + 1,
                    msg: format!("cannot parse {:?} as a finite number", field),
                })?);
            }
        }
    }
    let samples = DMatrix::from_row_slice(m, n, &values);

    let truth = if label_idx.is_some() {
        let mut seen: Vec<&str> = Vec::new();
        let assignment = raw_labels
            .iter()
            .map(|&l| {
                if let Some(pos) = seen.iter().position(|&s| s == l) {
                    pos + 1
                } else {
                    seen.push(l);
                    seen.len()
                }
            })
            .collect::<Vec<_>>();
        Some(Labels::new(assignment, seen.len())?)
    } else {
        None
    };

    let mut d = match truth {
        Some(t) => Dataset::with_truth(samples, t)?,
        None => Dataset::new(samples)?,
    };
    d.feature_names = feature_names;
    Ok(d)
}

/// Write features (and the truth column, when present) back out.  Floats use
/// 17 significant digits so a round-trip through `load_csv` is exact.
pub fn write_csv(d: &Dataset, path: &Path) -> Result<()> {
    let mut out = String::new();
    for r in 0..d.m() {
        for c in 0..d.n() {
            if c > 0 {
                out.push(',');
            }
            let _ = write!(out, "{:.16e}", d.samples[(r, c)]);
        }
        if let Some(t) = &d.truth {
            let _ = write!(out, ",{}", t.as_slice()[r]);
        }
        out.push('\n');
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Feature scaling applied before clustering.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScaleMode {
    MinMax,
    ZScore,
    None,
}

impl ScaleMode {
    pub fn tag(&self) -> &'static str {
        match self {
            ScaleMode::MinMax => "minmax",
            ScaleMode::ZScore => "zscore",
            ScaleMode::None => "none",
        }
    }

    pub fn parse(s: &str) -> Option<ScaleMode> {
        match s {
            "minmax" => Some(ScaleMode::MinMax),
            "zscore" => Some(ScaleMode::ZScore),
            "none" => Some(ScaleMode::None),
            _ => None,
        }
    }
}

/// Column-wise rescaling; constant columns map to all zeros in either mode.
/// Z-scoring uses the population standard deviation.
pub fn standardize(d: &Dataset, mode: ScaleMode) -> Dataset {
    let mut out = d.clone();
    let m = d.m() as f64;
    match mode {
        ScaleMode::None => {}
        ScaleMode::MinMax => {
            for mut col in out.samples.column_iter_mut() {
                let lo = col.iter().cloned().fold(f64::INFINITY, f64::min);
                let hi = col.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                if hi > lo {
                    col.iter_mut().for_each(|v| *v = (*v - lo) / (hi - lo));
                } else {
                    col.fill(0.0);
                }
            }
        }
        ScaleMode::ZScore => {
            for mut col in out.samples.column_iter_mut() {
                let mean = col.iter().sum::<f64>() / m;
                let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / m;
                let sd = var.sqrt();
                if sd > 0.0 {
                    col.iter_mut().for_each(|v| *v = (*v - mean) / sd);
                } else {
                    col.fill(0.0);
                }
            }
        }
    }
    out
}

/// Augmented within/between matrices for one cluster: columns are samples
/// extended by a trailing 1, `within` holds cluster `i`, `between` the rest.
#[derive(Debug, Clone)]
pub struct ClusterSplit {
    pub within: DMatrix<f64>,
    pub between: DMatrix<f64>,
}

impl ClusterSplit {
    /// Augmented dimension, i.e. feature count + 1.
    pub fn aug_dim(&self) -> usize {
        self.within.nrows()
    }

    pub fn n_within(&self) -> usize {
        self.within.ncols()
    }

    pub fn n_between(&self) -> usize {
        self.between.ncols()
    }
}

/// Split any feature matrix (rows are samples) by a cluster id.  Sample order
/// is preserved within each side; either side may be empty.
pub fn split_rows(features: &DMatrix<f64>, labels: &Labels, cluster: usize) -> Result<ClusterSplit> {
    if labels.len() != features.nrows() {
        return Err(Error::LabelLength {
            left: features.nrows(),
            right: labels.len(),
        });
    }
    if cluster == 0 || cluster > labels.k() {
        return Err(Error::LabelRange {
            value: cluster as i64,
            k: labels.k(),
        });
    }
    let dim = features.ncols() + 1;
    let fill = |ids: &[usize]| {
        DMatrix::from_fn(dim, ids.len(), |r, c| {
            if r < dim - 1 {
                features[(ids[c], r)]
            } else {
                1.0
            }
        })
    };
    let (mut ins, mut outs) = (Vec::new(), Vec::new());
    for (j, &a) in labels.as_slice().iter().enumerate() {
        if a == cluster {
            ins.push(j);
        } else {
            outs.push(j);
        }
    }
    Ok(ClusterSplit {
        within: fill(&ins),
        between: fill(&outs),
    })
}

pub fn split_cluster(d: &Dataset, labels: &Labels, cluster: usize) -> Result<ClusterSplit> {
    split_rows(d.samples(), labels, cluster)
}

fn check_k(k: usize, m: usize) -> Result<()> {
    if k == 0 || k > m {
        Err(Error::BadClusterCount { k, m })
    } else {
        Ok(())
    }
}

/// How nearest-neighbour-graph components are merged down to k clusters.
///
/// `Centroid` (the default) merges the pair of components whose mean points
/// are closest; it behaves well on blob-shaped clusters.  `Single` merges the
/// pair with the closest individual samples, which follows the graph's own
/// geometry: components chain along dense manifolds (ring arcs, line
/// segments) before jumping gaps, at the cost of the usual single-linkage
/// chaining on overlapping blobs.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Linkage {
    #[default]
    Centroid,
    Single,
}

/// Initial labels from the 1-nearest-neighbour graph: connect every sample to
/// its nearest neighbour (ties to the smaller index), take connected
/// components, then merge the closest pair under `linkage` while there are
/// more than k components and split the largest one by seeded 2-means while
/// there are fewer.  Deterministic in (data, k, seed); every cluster is
/// non-empty.
pub fn nng_init(d: &Dataset, k: usize, seed: u64) -> Result<Labels> {
    nng_init_linked(d, k, seed, Linkage::Centroid)
}

/// `nng_init` with an explicit component-merge rule.
pub fn nng_init_linked(d: &Dataset, k: usize, seed: u64, linkage: Linkage) -> Result<Labels> {
    let m = d.m();
    check_k(k, m)?;
    if m == 1 {
        return Labels::new(vec![1], 1);
    }
    let x = d.samples();

    let mut parent: Vec<usize> = (0..m).collect();
    fn find(parent: &mut Vec<usize>, i: usize) -> usize {
        if parent[i] != i {
            let r = find(parent, parent[i]);
            parent[i] = r;
        }
        parent[i]
    }
    for j in 0..m {
        let mut best = usize::MAX;
        let mut best_d = f64::INFINITY;
        for l in 0..m {
            if l == j {
                continue;
            }
            let dist = (x.row(j) - x.row(l)).norm_squared();
            if dist < best_d {
                best_d = dist;
                best = l;
            }
        }
        let (a, b) = (find(&mut parent, j), find(&mut parent, best));
        if a != b {
            parent[a.max(b)] = a.min(b);
        }
    }

    let mut comps: Vec<Vec<usize>> = Vec::new();
    {
        let mut root_of = vec![usize::MAX; m];
        for j in 0..m {
            let r = find(&mut parent, j);
            if root_of[r] == usize::MAX {
                root_of[r] = comps.len();
                comps.push(Vec::new());
            }
            comps[root_of[r]].push(j);
        }
    }
    comps.sort_by_key(|c| c[0]);

    let centroid = |ids: &[usize]| {
        let mut c = nalgebra::DVector::zeros(x.ncols());
        for &j in ids {
            c += x.row(j).transpose();
        }
        c / ids.len() as f64
    };
    let pair_distance = |a: &[usize], b: &[usize]| match linkage {
        Linkage::Centroid => (centroid(a) - centroid(b)).norm_squared(),
        Linkage::Single => {
            let mut link = f64::INFINITY;
            for &i in a {
                for &j in b {
                    let dist = (x.row(i) - x.row(j)).norm_squared();
                    if dist < link {
                        link = dist;
                    }
                }
            }
            link
        }
    };

    while comps.len() > k {
        let (mut ba, mut bb, mut bd) = (0, 1, f64::INFINITY);
        for a in 0..comps.len() {
            for b in a + 1..comps.len() {
                let dist = pair_distance(&comps[a], &comps[b]);
                if dist < bd {
                    bd = dist;
                    ba = a;
                    bb = b;
                }
            }
        }
        let moved = comps.remove(bb);
        comps[ba].extend(moved);
        comps[ba].sort_unstable();
        comps.sort_by_key(|c| c[0]);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    while comps.len() < k {
        let largest = (0..comps.len())
            .max_by_key(|&i| (comps[i].len(), usize::MAX - comps[i][0]))
            .unwrap();
        let ids = comps.remove(largest);
        let (p, q) = two_means_split(&ids, x, &mut rng);
        comps.push(p);
        comps.push(q);
        comps.sort_by_key(|c| c[0]);
    }

    let mut assignment = vec![0usize; m];
    for (i, comp) in comps.iter().enumerate() {
        for &j in comp {
            assignment[j] = i + 1;
        }
    }
    Labels::new(assignment, k)
}

/// Split an index set into two non-empty parts by 2-means with seeded center
/// picks.  Falls back to {first point} vs rest when all points coincide.
fn two_means_split(
    ids: &[usize],
    x: &DMatrix<f64>,
    rng: &mut ChaCha8Rng,
) -> (Vec<usize>, Vec<usize>) {
    debug_assert!(ids.len() >= 2);
    let same = |a: usize, b: usize| (x.row(a) - x.row(b)).norm_squared() == 0.0;
    let a = ids[rng.gen_range(0..ids.len())];
    let mut b = None;
    for _ in 0..64 {
        let cand = ids[rng.gen_range(0..ids.len())];
        if !same(a, cand) {
            b = Some(cand);
            break;
        }
    }
    let b = b.or_else(|| ids.iter().copied().find(|&j| !same(a, j)));
    let Some(b) = b else {
        return (vec![ids[0]], ids[1..].to_vec());
    };

    let mut c0 = x.row(a).transpose();
    let mut c1 = x.row(b).transpose();
    let mut side = vec![0u8; ids.len()];
    for _ in 0..100 {
        let mut changed = false;
        for (t, &j) in ids.iter().enumerate() {
            let r = x.row(j).transpose();
            let s = if (&r - &c1).norm_squared() < (&r - &c0).norm_squared() {
                1
            } else {
                0
            };
            if s != side[t] {
                side[t] = s;
                changed = true;
            }
        }
        for want in [0u8, 1u8] {
            if !side.contains(&want) {
                let other = if want == 0 { &c1 } else { &c0 };
                let far = (0..ids.len())
                    .max_by(|&p, &q| {
                        let dp = (x.row(ids[p]).transpose() - other).norm_squared();
                        let dq = (x.row(ids[q]).transpose() - other).norm_squared();
                        dp.partial_cmp(&dq).unwrap()
                    })
                    .unwrap();
                side[far] = want;
            }
        }
        if !changed {
            break;
        }
        let mean = |s: u8| {
            let members: Vec<usize> = ids
                .iter()
                .zip(&side)
                .filter(|(_, &sd)| sd == s)
                .map(|(&j, _)| j)
                .collect();
            centroid_of(&members, x)
        };
        c0 = mean(0);
        c1 = mean(1);
    }
    let mut p = Vec::new();
    let mut q = Vec::new();
    for (t, &j) in ids.iter().enumerate() {
        if side[t] == 0 {
            p.push(j);
        } else {
            q.push(j);
        }
    }
    (p, q)
}

fn centroid_of(ids: &[usize], x: &DMatrix<f64>) -> nalgebra::DVector<f64> {
    let mut c = nalgebra::DVector::zeros(x.ncols());
    for &j in ids {
        c += x.row(j).transpose();
    }
    c / ids.len() as f64
}

/// Uniform seeded assignment; empty clusters are repaired by moving the
/// lowest-index sample out of the largest cluster, one per empty cluster.
pub fn random_init(d: &Dataset, k: usize, seed: u64) -> Result<Labels> {
    let m = d.m();
    check_k(k, m)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut assignment: Vec<usize> = (0..m).map(|_| rng.gen_range(1..=k)).collect();
    loop {
        let mut counts = vec![0usize; k + 1];
        for &a in &assignment {
            counts[a] += 1;
        }
        let Some(empty) = (1..=k).find(|&c| counts[c] == 0) else {
            break;
        };
        let largest = (1..=k).max_by_key(|&c| (counts[c], k - c)).unwrap();
        let victim = assignment.iter().position(|&a| a == largest).unwrap();
        assignment[victim] = empty;
    }
    Labels::new(assignment, k)
}
