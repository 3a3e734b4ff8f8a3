use std::collections::HashMap;
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::Args;
use rayon::prelude::*;

use planeclust::data::{Dataset, Labels, ScaleMode};
use planeclust::metrics::report;
use planeclust::ramp::HyperParams;

use crate::commands::{
    fit_method, initial_labels, parse_init, parse_scale, parse_truth_column, InitKind, Method,
    ModeArg,
};
use crate::config::{parse_grid, powers_of_two, FileConfig};
use crate::CliError;

#[derive(Args)]
pub struct BenchArgs {
    /// key=value file supplying any of the long flags below
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Dataset as name=path; repeat for several datasets
    #[arg(long = "dataset")]
    pub datasets: Vec<String>,
    /// Comma list from ramptwsvc,kmeans,kpc,ppc (default: all)
    #[arg(long)]
    pub methods: Option<String>,
    /// linear | kernel | both (default: both)
    #[arg(long)]
    pub mode: Option<String>,
    /// nng | nng-single | random (default: nng)
    #[arg(long)]
    pub init: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// minmax | zscore | none (default: minmax)
    #[arg(long)]
    pub scale: Option<String>,
    /// last | none | name:<header> | index:<zero-based> (default: last)
    #[arg(long)]
    pub truth_column: Option<String>,
    #[arg(long)]
    pub outer_max: Option<usize>,
    /// kmeans repetitions for the mean±std cell (default: 10)
    #[arg(long)]
    pub repetitions: Option<usize>,
    /// Comma list of c1 values (default: 2^-8..2^7)
    #[arg(long)]
    pub grid_c1: Option<String>,
    /// Comma list of c2 values (default: 2^-8..2^7)
    #[arg(long)]
    pub grid_c2: Option<String>,
    /// Comma list of PPC c values (default: 2^-8..2^7)
    #[arg(long)]
    pub grid_c: Option<String>,
    /// Comma list of Gaussian mu values (default: 2^-10..2^5)
    #[arg(long)]
    pub grid_mu: Option<String>,
    /// Progress journal; completed grid points are reloaded, not recomputed
    #[arg(long)]
    pub journal: Option<PathBuf>,
    /// Results CSV path (default: results.csv)
    #[arg(long)]
    pub results_csv: Option<PathBuf>,
    /// Also write the text table here (it always goes to stdout)
    #[arg(long)]
    pub table_out: Option<PathBuf>,
    #[arg(long)]
    pub workers: Option<usize>,
}

/// One grid point: a full method configuration to fit and score.
#[derive(Clone)]
struct Job {
    dataset: usize,
    method: Method,
    mode: ModeArg,
    hp: HyperParams,
    seed: u64,
    /// Human-readable parameter coordinates, also the journal key.
    params: String,
}

impl Job {
    fn key(&self, datasets: &[Loaded]) -> String {
        format!(
            "{},{},{},{},{}",
            datasets[self.dataset].name,
            self.method.tag(),
            self.mode.tag(),
            self.params,
            self.seed
        )
    }
}

struct Loaded {
    name: String,
    data: Dataset,
    k: usize,
    init: Labels,
}

/// Best-over-grid cell: AC decides, MI breaks ties, enumeration order breaks
/// the rest (ascending grids, so the lexicographically smallest parameters).
#[derive(Clone)]
struct Best {
    ac: f64,
    mi: f64,
    params: String,
    seed: String,
}

enum Cell {
    Absent,
    Best(Best),
    MeanStd { ac: f64, ac_std: f64, mi: f64, mi_std: f64, seeds: String },
}

pub fn bench(mut args: BenchArgs) -> Result<(), CliError> {
    let cfg = match &args.config {
        Some(path) => FileConfig::load(path)?,
        None => FileConfig::empty(),
    };
    cfg.extend(&mut args.datasets, "dataset");
    cfg.fill(&mut args.methods, "methods")?;
    cfg.fill(&mut args.mode, "mode")?;
    cfg.fill(&mut args.init, "init")?;
    cfg.fill(&mut args.seed, "seed")?;
    cfg.fill(&mut args.scale, "scale")?;
    cfg.fill(&mut args.truth_column, "truth_column")?;
    cfg.fill(&mut args.outer_max, "outer_max")?;
    cfg.fill(&mut args.repetitions, "repetitions")?;
    cfg.fill(&mut args.grid_c1, "grid_c1")?;
    cfg.fill(&mut args.grid_c2, "grid_c2")?;
    cfg.fill(&mut args.grid_c, "grid_c")?;
    cfg.fill(&mut args.grid_mu, "grid_mu")?;
    cfg.fill(&mut args.journal, "journal")?;
    cfg.fill(&mut args.results_csv, "results_csv")?;
    cfg.fill(&mut args.table_out, "table_out")?;
    cfg.finish()?;

    if args.datasets.is_empty() {
        return Err(CliError::config(
            "at least one --dataset name=path is required",
        ));
    }
    let methods: Vec<Method> = args
        .methods
        .as_deref()
        .unwrap_or("kmeans,kpc,ppc,ramptwsvc")
        .split(',')
        .map(|m| Method::parse(m.trim()))
        .collect::<Result<_, _>>()?;
    let modes: Vec<ModeArg> = match args.mode.as_deref().unwrap_or("both") {
        "both" => vec![ModeArg::Linear, ModeArg::Kernel],
        other => vec![ModeArg::parse(other)?],
    };
    let init = parse_init(args.init.as_deref().unwrap_or("nng"))?;
    let seed = args.seed.unwrap_or(0);
    let scale = parse_scale(args.scale.as_deref().unwrap_or("minmax"))?;
    let truth = parse_truth_column(args.truth_column.as_deref().unwrap_or("last"))?;
    if truth.is_none() {
        return Err(CliError::config("bench needs ground truth: --truth-column none is not allowed"));
    }
    let outer_max = args.outer_max.unwrap_or(50);
    let repetitions = args.repetitions.unwrap_or(10).max(1);
    let grid_c1 = grid_or(&args.grid_c1, "grid_c1", powers_of_two(-8, 7))?;
    let grid_c2 = grid_or(&args.grid_c2, "grid_c2", powers_of_two(-8, 7))?;
    let grid_c = grid_or(&args.grid_c, "grid_c", powers_of_two(-8, 7))?;
    let grid_mu = grid_or(&args.grid_mu, "grid_mu", powers_of_two(-10, 5))?;
    let results_csv = args
        .results_csv
        .unwrap_or_else(|| PathBuf::from("results.csv"));

    let datasets = load_datasets(&args.datasets, &truth, scale, init, seed)?;

    // Enumerate every grid point in deterministic ascending order.
    let mut jobs: Vec<Job> = Vec::new();
    for di in 0..datasets.len() {
        for &mode in &modes {
            for &method in &methods {
                jobs.extend(method_jobs(
                    di,
                    method,
                    mode,
                    &grid_c1,
                    &grid_c2,
                    &grid_c,
                    &grid_mu,
                    seed,
                    repetitions,
                ));
            }
        }
    }

    // Resume: reload completed points, compute the rest, append as we go.
    let mut done: HashMap<String, (f64, f64)> = HashMap::new();
    if let Some(path) = &args.journal {
        if path.exists() {
            for (idx, line) in std::fs::read_to_string(path)
                .map_err(|e| CliError::runtime(format!("reading journal {}: {e}", path.display())))?
                .lines()
                .enumerate()
            {
                if line.trim().is_empty() {
                    continue;
                }
                let mut parts = line.rsplitn(3, ',');
                let (mi, ac, key) = match (parts.next(), parts.next(), parts.next()) {
                    (Some(mi), Some(ac), Some(key)) => (mi, ac, key),
                    _ => {
                        return Err(CliError::runtime(format!(
                            "journal {} line {}: expected key,ac,mi",
                            path.display(),
                            idx + 1
                        )))
                    }
                };
                let parse = |raw: &str| {
                    raw.parse::<f64>().map_err(|e| {
                        CliError::runtime(format!(
                            "journal {} line {}: bad number {raw:?}: {e}",
                            path.display(),
                            idx + 1
                        ))
                    })
                };
                done.insert(key.to_string(), (parse(ac)?, parse(mi)?));
            }
        }
    }
    let todo: Vec<&Job> = jobs
        .iter()
        .filter(|j| !done.contains_key(&j.key(&datasets)))
        .collect();
    let skipped = jobs.len() - todo.len();
    if skipped > 0 {
        println!("bench: resumed {skipped} completed grid points from journal");
    }

    let computed: Vec<(String, (f64, f64))> = todo
        .par_iter()
        .map(|job| {
            let scored = run_job(job, &datasets, scale, outer_max)?;
            Ok((job.key(&datasets), scored))
        })
        .collect::<Result<_, CliError>>()?;
    if let Some(path) = &args.journal {
        let mut file = std::fs::OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(|e| CliError::runtime(format!("opening journal {}: {e}", path.display())))?;
        for (key, (ac, mi)) in &computed {
            writeln!(file, "{key},{ac:.16e},{mi:.16e}")
                .map_err(|e| CliError::runtime(format!("appending journal: {e}")))?;
        }
    }
    done.extend(computed);

    // Reduce to one cell per (dataset, mode, method).
    let mut csv = String::from("dataset,method,ac,mi,params,seed\n");
    let mut cells: HashMap<(usize, &'static str, &'static str), Cell> = HashMap::new();
    for (di, loaded) in datasets.iter().enumerate() {
        for &mode in &modes {
            for &method in &methods {
                let points: Vec<&Job> = jobs
                    .iter()
                    .filter(|j| j.dataset == di && j.method == method && j.mode == mode)
                    .collect();
                let cell = reduce_cell(&points, &datasets, &done);
                if let Some(row) = csv_row(&cell, loaded, method, mode) {
                    csv.push_str(&row);
                }
                cells.insert((di, mode.tag(), method.tag()), cell);
            }
        }
    }
    std::fs::write(&results_csv, &csv)
        .map_err(|e| CliError::runtime(format!("writing {}: {e}", results_csv.display())))?;

    let mut table = String::new();
    for &mode in &modes {
        render_table(&mut table, mode, &methods, &datasets, &cells);
    }
    print!("{table}");
    if let Some(path) = &args.table_out {
        std::fs::write(path, &table)
            .map_err(|e| CliError::runtime(format!("writing {}: {e}", path.display())))?;
    }
    Ok(())
}

fn grid_or(raw: &Option<String>, flag: &str, default: Vec<f64>) -> Result<Vec<f64>, CliError> {
    match raw {
        Some(text) => parse_grid(text, flag),
        None => Ok(default),
    }
}

fn load_datasets(
    specs: &[String],
    truth: &Option<planeclust::data::ColumnSelector>,
    scale: ScaleMode,
    init: InitKind,
    seed: u64,
) -> Result<Vec<Loaded>, CliError> {
    let mut out = Vec::new();
    for spec in specs {
        let (name, path) = spec.split_once('=').ok_or_else(|| {
            CliError::config(format!("--dataset {spec:?}: expected name=path"))
        })?;
        let data = crate::commands::load_dataset(Path::new(path), truth, scale)?;
        let truth_labels = data
            .truth()
            .ok_or_else(|| CliError::runtime(format!("{path}: dataset has no truth labels")))?;
        let k = truth_labels.k();
        let init_labels = initial_labels(&data, k, init, seed)?;
        out.push(Loaded {
            name: name.to_string(),
            data,
            k,
            init: init_labels,
        });
    }
    Ok(out)
}

#[allow(clippy::too_many_arguments)]
fn method_jobs(
    dataset: usize,
    method: Method,
    mode: ModeArg,
    grid_c1: &[f64],
    grid_c2: &[f64],
    grid_c: &[f64],
    grid_mu: &[f64],
    seed: u64,
    repetitions: usize,
) -> Vec<Job> {
    let base = HyperParams::default();
    let mut jobs = Vec::new();
    match (method, mode) {
        (Method::RampTwsvc, ModeArg::Linear) => {
            for &c1 in grid_c1 {
                for &c2 in grid_c2 {
                    jobs.push(Job {
                        dataset,
                        method,
                        mode,
                        hp: HyperParams { c1, c2, ..base },
                        seed,
                        params: format!("c1={c1};c2={c2}"),
                    });
                }
            }
        }
        (Method::RampTwsvc, ModeArg::Kernel) => {
            for &c1 in grid_c1 {
                for &c2 in grid_c2 {
                    for &mu in grid_mu {
                        jobs.push(Job {
                            dataset,
                            method,
                            mode,
                            hp: HyperParams { c1, c2, mu, ..base },
                            seed,
                            params: format!("c1={c1};c2={c2};mu={mu}"),
                        });
                    }
                }
            }
        }
        (Method::Ppc, ModeArg::Linear) => {
            for &c in grid_c {
                jobs.push(Job {
                    dataset,
                    method,
                    mode,
                    hp: HyperParams { c, ..base },
                    seed,
                    params: format!("c={c}"),
                });
            }
        }
        (Method::Kpc, ModeArg::Linear) => {
            jobs.push(Job {
                dataset,
                method,
                mode,
                hp: base,
                seed,
                params: String::new(),
            });
        }
        (Method::Kmeans, ModeArg::Linear) => {
            for rep in 0..repetitions {
                jobs.push(Job {
                    dataset,
                    method,
                    mode,
                    hp: base,
                    seed: seed + rep as u64,
                    params: String::new(),
                });
            }
        }
        // The baselines are linear-only; their kernel cells render as "-".
        (Method::Kmeans | Method::Kpc | Method::Ppc, ModeArg::Kernel) => {}
    }
    jobs
}

fn run_job(
    job: &Job,
    datasets: &[Loaded],
    scale: ScaleMode,
    outer_max: usize,
) -> Result<(f64, f64), CliError> {
    let loaded = &datasets[job.dataset];
    // kmeans draws fresh centroids from job.seed; grid methods share the
    // precomputed init labels, so every grid point starts identically.
    let fitted = fit_method(
        &loaded.data,
        loaded.k,
        job.method,
        job.mode,
        &job.hp,
        &loaded.init,
        job.seed,
        scale,
        outer_max,
    )?;
    let meta = fitted.meta().expect("fitted models carry metadata");
    let truth = loaded.data.truth().expect("bench datasets carry truth");
    let rep = report(truth, &meta.final_labels).map_err(|e| CliError::lib("scoring", e))?;
    Ok((rep.ac, rep.mi))
}

fn reduce_cell(points: &[&Job], datasets: &[Loaded], done: &HashMap<String, (f64, f64)>) -> Cell {
    if points.is_empty() {
        return Cell::Absent;
    }
    if points[0].method == Method::Kmeans {
        let scores: Vec<(f64, f64)> = points
            .iter()
            .map(|j| done[&j.key(datasets)])
            .collect();
        let n = scores.len() as f64;
        let mean = |f: &dyn Fn(&(f64, f64)) -> f64| scores.iter().map(f).sum::<f64>() / n;
        let ac = mean(&|s| s.0);
        let mi = mean(&|s| s.1);
        let std = |f: &dyn Fn(&(f64, f64)) -> f64, m: f64| {
            if scores.len() < 2 {
                0.0
            } else {
                (scores.iter().map(|s| (f(s) - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
            }
        };
        let first = points[0].seed;
        let last = points[points.len() - 1].seed;
        return Cell::MeanStd {
            ac,
            ac_std: std(&|s| s.0, ac),
            mi,
            mi_std: std(&|s| s.1, mi),
            seeds: format!("{first}..{last}"),
        };
    }
    let mut best: Option<Best> = None;
    for job in points {
        let (ac, mi) = done[&job.key(datasets)];
        let better = match &best {
            None => true,
            Some(b) => ac > b.ac || (ac == b.ac && mi > b.mi),
        };
        if better {
            best = Some(Best {
                ac,
                mi,
                params: job.params.clone(),
                seed: job.seed.to_string(),
            });
        }
    }
    Cell::Best(best.expect("non-empty grid"))
}

fn csv_row(cell: &Cell, loaded: &Loaded, method: Method, mode: ModeArg) -> Option<String> {
    match cell {
        Cell::Absent => None,
        Cell::Best(b) => {
            let params = if b.params.is_empty() {
                format!("mode={}", mode.tag())
            } else {
                format!("mode={};{}", mode.tag(), b.params)
            };
            Some(format!(
                "{},{},{:.2},{:.2},{},{}\n",
                loaded.name,
                method.tag(),
                b.ac,
                b.mi,
                params,
                b.seed
            ))
        }
        Cell::MeanStd { ac, ac_std, mi, mi_std, seeds } => Some(format!(
            "{},{},{:.2},{:.2},mode={};std_ac={:.2};std_mi={:.2},{}\n",
            loaded.name,
            method.tag(),
            ac,
            mi,
            mode.tag(),
            ac_std,
            mi_std,
            seeds
        )),
    }
}

/// One block per mode, datasets as rows, methods as columns, AC on the
/// first line of each row and MI beneath it.
fn render_table(
    out: &mut String,
    mode: ModeArg,
    methods: &[Method],
    datasets: &[Loaded],
    cells: &HashMap<(usize, &'static str, &'static str), Cell>,
) {
    let mut header: Vec<String> = vec!["dataset".to_string()];
    header.extend(methods.iter().map(|m| m.tag().to_string()));
    let mut rows: Vec<Vec<String>> = Vec::new();
    for (di, loaded) in datasets.iter().enumerate() {
        let mut ac_row = vec![format!(
            "{} (m={},n={},k={})",
            loaded.name,
            loaded.data.m(),
            loaded.data.n(),
            loaded.k
        )];
        let mut mi_row = vec![String::new()];
        for method in methods {
            let (ac, mi) = match &cells[&(di, mode.tag(), method.tag())] {
                Cell::Absent => ("-".to_string(), "-".to_string()),
                Cell::Best(b) => (format!("{:.2}", b.ac), format!("{:.2}", b.mi)),
                Cell::MeanStd { ac, ac_std, mi, mi_std, .. } => (
                    format!("{ac:.2}\u{b1}{ac_std:.2}"),
                    format!("{mi:.2}\u{b1}{mi_std:.2}"),
                ),
            };
            ac_row.push(ac);
            mi_row.push(mi);
        }
        rows.push(ac_row);
        rows.push(mi_row);
    }
    let mut widths: Vec<usize> = header.iter().map(|h| h.chars().count()).collect();
    for row in &rows {
        for (i, cell) in row.iter().enumerate() {
            widths[i] = widths[i].max(cell.chars().count());
        }
    }
    let _ = writeln!(
        out,
        "{} methods (cells: best-over-grid AC, MI beneath; kmeans mean\u{b1}std over seeds)",
        mode.tag()
    );
    let fmt_row = |out: &mut String, row: &[String]| {
        let mut line = String::new();
        for (i, cell) in row.iter().enumerate() {
            let pad = widths[i] - cell.chars().count();
            line.push_str(cell);
            line.extend(std::iter::repeat_n(' ', pad + 2));
        }
        let _ = writeln!(out, "{}", line.trim_end());
    };
    fmt_row(out, &header);
    for row in &rows {
        fmt_row(out, row);
    }
    let _ = writeln!(out);
}
