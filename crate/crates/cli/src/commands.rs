use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::Args;

use planeclust::baselines::{kmeans_fit, kpc_fit, ppc_fit};
use planeclust::cluster::{fit, FitOptions, FittedModel, KernelKind, Mode};
use planeclust::data::{
    load_csv, nng_init_linked, random_init, standardize, ColumnSelector, Dataset, Labels, Linkage,
    ScaleMode,
};
use planeclust::metrics::report;
use planeclust::model::SavedModel;
use planeclust::ramp::{loss_curves, write_loss_curves, HyperParams};

use crate::config::FileConfig;
use crate::CliError;

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Method {
    RampTwsvc,
    Kmeans,
    Kpc,
    Ppc,
}

impl Method {
    pub fn parse(raw: &str) -> Result<Method, CliError> {
        match raw {
            "ramptwsvc" => Ok(Method::RampTwsvc),
            "kmeans" => Ok(Method::Kmeans),
            "kpc" => Ok(Method::Kpc),
            "ppc" => Ok(Method::Ppc),
            other => Err(CliError::config(format!(
                "unknown method {other:?}: expected ramptwsvc, kmeans, kpc, or ppc"
            ))),
        }
    }

    pub fn tag(&self) -> &'static str {
        match self {
            Method::RampTwsvc => "ramptwsvc",
            Method::Kmeans => "kmeans",
            Method::Kpc => "kpc",
            Method::Ppc => "ppc",
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum ModeArg {
    Linear,
    Kernel,
}

impl ModeArg {
    pub fn parse(raw: &str) -> Result<ModeArg, CliError> {
        match raw {
            "linear" => Ok(ModeArg::Linear),
            "kernel" => Ok(ModeArg::Kernel),
            other => Err(CliError::config(format!(
                "unknown mode {other:?}: expected linear or kernel"
            ))),
        }
    }

    pub fn tag(&self) -> &'static str {
        match self {
            ModeArg::Linear => "linear",
            ModeArg::Kernel => "kernel",
        }
    }
}

pub fn parse_init(raw: &str) -> Result<InitKind, CliError> {
    match raw {
        "nng" => Ok(InitKind::Nng(Linkage::Centroid)),
        "nng-single" => Ok(InitKind::Nng(Linkage::Single)),
        "random" => Ok(InitKind::Random),
        other => Err(CliError::config(format!(
            "unknown init {other:?}: expected nng, nng-single, or random"
        ))),
    }
}

#[derive(Clone, Copy, Debug)]
pub enum InitKind {
    Nng(Linkage),
    Random,
}

pub fn initial_labels(d: &Dataset, k: usize, init: InitKind, seed: u64) -> Result<Labels, CliError> {
    match init {
        InitKind::Nng(linkage) => nng_init_linked(d, k, seed, linkage),
        InitKind::Random => random_init(d, k, seed),
    }
    .map_err(|e| CliError::lib("initializing labels", e))
}

pub fn parse_scale(raw: &str) -> Result<ScaleMode, CliError> {
    ScaleMode::parse(raw).ok_or_else(|| {
        CliError::config(format!(
            "unknown scale {raw:?}: expected minmax, zscore, or none"
        ))
    })
}

pub fn parse_truth_column(raw: &str) -> Result<Option<ColumnSelector>, CliError> {
    if raw == "none" {
        return Ok(None);
    }
    if raw == "last" {
        return Ok(Some(ColumnSelector::Last));
    }
    if let Some(name) = raw.strip_prefix("name:") {
        return Ok(Some(ColumnSelector::Name(name.to_string())));
    }
    if let Some(idx) = raw.strip_prefix("index:") {
        let i: usize = idx
            .parse()
            .map_err(|e| CliError::config(format!("truth column index {idx:?}: {e}")))?;
        return Ok(Some(ColumnSelector::Index(i)));
    }
    Err(CliError::config(format!(
        "unknown truth column {raw:?}: expected last, none, name:<header>, or index:<zero-based>"
    )))
}

pub fn load_dataset(
    path: &Path,
    truth: &Option<ColumnSelector>,
    scale: ScaleMode,
) -> Result<Dataset, CliError> {
    let d = load_csv(path, truth.as_ref())
        .map_err(|e| CliError::lib(&format!("loading {}", path.display()), e))?;
    Ok(standardize(&d, scale))
}

/// Predicted labels as a two-column CSV with a header; indices are 0-based
/// data rows (header excluded when the dataset file has one).
pub fn write_labels(path: &Path, labels: &Labels) -> Result<(), CliError> {
    let mut out = String::from("index,label\n");
    for (i, l) in labels.as_slice().iter().enumerate() {
        out.push_str(&format!("{i},{l}\n"));
    }
    std::fs::write(path, out)
        .map_err(|e| CliError::runtime(format!("writing labels {}: {e}", path.display())))
}

/// Read a label file: either the `index,label` CSV written by `cluster` or a
/// bare one-label-per-line list.  Labels are recoded densely by first
/// appearance, so external conventions (0-based, arbitrary ids) evaluate as-is.
pub fn read_labels(path: &Path) -> Result<Labels, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::runtime(format!("reading labels {}: {e}", path.display())))?;
    let mut raw: Vec<i64> = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let field = match line.split_once(',') {
            Some((_, second)) => second.trim(),
            None => line,
        };
        match field.parse::<i64>() {
            Ok(v) => raw.push(v),
            Err(e) => {
                if idx == 0 {
                    continue; // header line
                }
                return Err(CliError::runtime(format!(
                    "label file {} line {}: {e}",
                    path.display(),
                    idx + 1
                )));
            }
        }
    }
    if raw.is_empty() {
        return Err(CliError::runtime(format!(
            "label file {} contains no labels",
            path.display()
        )));
    }
    let mut order: Vec<i64> = Vec::new();
    let assignment: Vec<usize> = raw
        .iter()
        .map(|v| {
            if let Some(pos) = order.iter().position(|o| o == v) {
                pos + 1
            } else {
                order.push(*v);
                order.len()
            }
        })
        .collect();
    Labels::new(assignment, order.len()).map_err(|e| CliError::lib("decoding labels", e))
}

#[derive(Args)]
pub struct ClusterArgs {
    /// key=value file supplying any of the long flags below
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Dataset CSV (numeric features, optional label column)
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Number of clusters
    #[arg(long)]
    pub k: Option<usize>,
    /// ramptwsvc | kmeans | kpc | ppc
    #[arg(long)]
    pub method: Option<String>,
    /// linear | kernel (Gaussian); kernel applies to ramptwsvc only
    #[arg(long)]
    pub mode: Option<String>,
    #[arg(long)]
    pub c1: Option<f64>,
    #[arg(long)]
    pub c2: Option<f64>,
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub s: Option<f64>,
    /// Gaussian kernel width
    #[arg(long)]
    pub mu: Option<f64>,
    /// PPC between-cluster weight
    #[arg(long)]
    pub c: Option<f64>,
    /// nng | nng-single | random
    #[arg(long)]
    pub init: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// minmax | zscore | none
    #[arg(long)]
    pub scale: Option<String>,
    /// last | none | name:<header> | index:<zero-based>
    #[arg(long)]
    pub truth_column: Option<String>,
    #[arg(long)]
    pub outer_max: Option<usize>,
    #[arg(long)]
    pub labels_out: Option<PathBuf>,
    #[arg(long)]
    pub model_out: Option<PathBuf>,
    #[arg(long)]
    pub workers: Option<usize>,
}

pub fn cluster(mut args: ClusterArgs) -> Result<(), CliError> {
    let cfg = match &args.config {
        Some(path) => FileConfig::load(path)?,
        None => FileConfig::empty(),
    };
    cfg.fill(&mut args.data, "data")?;
    cfg.fill(&mut args.k, "k")?;
    cfg.fill(&mut args.method, "method")?;
    cfg.fill(&mut args.mode, "mode")?;
    cfg.fill(&mut args.c1, "c1")?;
    cfg.fill(&mut args.c2, "c2")?;
    cfg.fill(&mut args.delta, "delta")?;
    cfg.fill(&mut args.s, "s")?;
    cfg.fill(&mut args.mu, "mu")?;
    cfg.fill(&mut args.c, "c")?;
    cfg.fill(&mut args.init, "init")?;
    cfg.fill(&mut args.seed, "seed")?;
    cfg.fill(&mut args.scale, "scale")?;
    cfg.fill(&mut args.truth_column, "truth_column")?;
    cfg.fill(&mut args.outer_max, "outer_max")?;
    cfg.fill(&mut args.labels_out, "labels_out")?;
    cfg.fill(&mut args.model_out, "model_out")?;
    cfg.finish()?;

    let data = args
        .data
        .ok_or_else(|| CliError::config("--data is required (flag or config)"))?;
    let k = args
        .k
        .ok_or_else(|| CliError::config("--k is required (flag or config)"))?;
    let method = Method::parse(args.method.as_deref().unwrap_or("ramptwsvc"))?;
    let mode = ModeArg::parse(args.mode.as_deref().unwrap_or("linear"))?;
    let defaults = HyperParams::default();
    let hp = HyperParams {
        c1: args.c1.unwrap_or(defaults.c1),
        c2: args.c2.unwrap_or(defaults.c2),
        delta: args.delta.unwrap_or(defaults.delta),
        s: args.s.unwrap_or(defaults.s),
        mu: args.mu.unwrap_or(defaults.mu),
        c: args.c.unwrap_or(defaults.c),
    };
    hp.validate().map_err(|e| CliError::lib("validating parameters", e))?;
    let init = parse_init(args.init.as_deref().unwrap_or("nng"))?;
    let seed = args.seed.unwrap_or(0);
    let scale = parse_scale(args.scale.as_deref().unwrap_or("minmax"))?;
    let truth = parse_truth_column(args.truth_column.as_deref().unwrap_or("last"))?;
    let outer_max = args.outer_max.unwrap_or(50);
    let labels_out = args.labels_out.unwrap_or_else(|| PathBuf::from("labels.csv"));
    let model_out = args.model_out.unwrap_or_else(|| PathBuf::from("model.txt"));

    let d = load_dataset(&data, &truth, scale)?;
    let start = Instant::now();
    let init_labels = initial_labels(&d, k, init, seed)?;
    let fitted = fit_method(&d, k, method, mode, &hp, &init_labels, seed, scale, outer_max)?;
    let wall = start.elapsed().as_secs_f64();

    let meta = fitted.meta().expect("fitted models carry metadata");
    write_labels(&labels_out, &meta.final_labels)?;
    fitted
        .saved()
        .save(&model_out)
        .map_err(|e| CliError::lib("writing model", e))?;
    println!(
        "cluster: method={} mode={} k={k} objective={:.6} outer_iterations={} converged={} wall_time_s={:.3} labels={} model={}",
        method.tag(),
        mode.tag(),
        meta.objective,
        meta.outer_iterations,
        meta.converged,
        wall,
        labels_out.display(),
        model_out.display()
    );
    Ok(())
}

/// A fitted model of any method, unified for saving and metadata access.
pub struct Fitted(pub SavedModel);

impl Fitted {
    pub fn meta(&self) -> Option<&planeclust::cluster::TrainingMeta> {
        match &self.0 {
            SavedModel::RampLinear(m) => m.meta.as_ref(),
            SavedModel::RampKernel(m) => m.meta.as_ref(),
            SavedModel::Kpc(m) | SavedModel::Ppc(m) => m.meta.as_ref(),
            SavedModel::Kmeans(m) => m.meta.as_ref(),
        }
    }

    pub fn saved(&self) -> &SavedModel {
        &self.0
    }
}

#[allow(clippy::too_many_arguments)]
pub fn fit_method(
    d: &Dataset,
    k: usize,
    method: Method,
    mode: ModeArg,
    hp: &HyperParams,
    init: &Labels,
    seed: u64,
    scale: ScaleMode,
    outer_max: usize,
) -> Result<Fitted, CliError> {
    let stage = format!("fitting {}", method.tag());
    if mode == ModeArg::Kernel && method != Method::RampTwsvc {
        return Err(CliError::config(format!(
            "{} supports linear mode only",
            method.tag()
        )));
    }
    let saved = match (method, mode) {
        (Method::RampTwsvc, ModeArg::Linear) | (Method::RampTwsvc, ModeArg::Kernel) => {
            let mode = match mode {
                ModeArg::Linear => Mode::Linear,
                ModeArg::Kernel => Mode::Kernel(KernelKind::Gaussian { mu: hp.mu }),
            };
            let opts = FitOptions {
                outer_max,
                scale,
                seed: Some(seed),
                ..FitOptions::default()
            };
            let (model, _) = fit(d, k, hp, mode, init, &opts).map_err(|e| CliError::lib(&stage, e))?;
            match model {
                FittedModel::Linear(m) => SavedModel::RampLinear(m),
                FittedModel::Kernel(m) => SavedModel::RampKernel(m),
            }
        }
        (Method::Kmeans, _) => {
            let model = kmeans_fit(d, k, seed, outer_max).map_err(|e| CliError::lib(&stage, e))?;
            SavedModel::Kmeans(model)
        }
        (Method::Kpc, _) => {
            let model = kpc_fit(d, k, init, outer_max).map_err(|e| CliError::lib(&stage, e))?;
            SavedModel::Kpc(model)
        }
        (Method::Ppc, _) => {
            let model = ppc_fit(d, k, hp.c, init, outer_max).map_err(|e| CliError::lib(&stage, e))?;
            SavedModel::Ppc(model)
        }
    };
    Ok(Fitted(saved))
}

#[derive(Args)]
pub struct EvalArgs {
    /// Predicted labels file (index,label CSV or one label per line)
    #[arg(long)]
    pub pred: PathBuf,
    /// Ground-truth labels file in the same formats
    #[arg(long)]
    pub truth: Option<PathBuf>,
    /// Alternatively: dataset CSV carrying the truth column
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// last | none | name:<header> | index:<zero-based>
    #[arg(long)]
    pub truth_column: Option<String>,
    /// Optional CSV output ("ac,mi" header plus one row)
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn eval(args: EvalArgs) -> Result<(), CliError> {
    let pred = read_labels(&args.pred)?;
    let truth = match (&args.truth, &args.data) {
        (Some(path), None) => read_labels(path)?,
        (None, Some(path)) => {
            let selector = parse_truth_column(args.truth_column.as_deref().unwrap_or("last"))?
                .ok_or_else(|| CliError::config("--truth-column none leaves no truth to evaluate"))?;
            let d = load_dataset(path, &Some(selector), ScaleMode::None)?;
            d.truth()
                .ok_or_else(|| {
                    CliError::runtime(format!("{} has no truth labels", path.display()))
                })?
                .clone()
        }
        _ => {
            return Err(CliError::config(
                "provide exactly one truth source: --truth <file> or --data <csv>",
            ))
        }
    };
    let rep = report(&truth, &pred).map_err(|e| CliError::lib("computing metrics", e))?;
    println!("ac={:.2} mi={:.2}", rep.ac, rep.mi);
    if let Some(out) = args.out {
        std::fs::write(&out, format!("ac,mi\n{:.2},{:.2}\n", rep.ac, rep.mi))
            .map_err(|e| CliError::runtime(format!("writing {}: {e}", out.display())))?;
    }
    Ok(())
}

#[derive(Args)]
pub struct LosscurveArgs {
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub s: Option<f64>,
    /// Grid start (default -3)
    #[arg(long, allow_hyphen_values = true)]
    pub from: Option<f64>,
    /// Grid end (default 3)
    #[arg(long, allow_hyphen_values = true)]
    pub to: Option<f64>,
    /// Grid step (default 0.01)
    #[arg(long)]
    pub step: Option<f64>,
    /// Output CSV path; stdout when omitted
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn losscurve(args: LosscurveArgs) -> Result<(), CliError> {
    let defaults = HyperParams::default();
    let hp = HyperParams {
        delta: args.delta.unwrap_or(defaults.delta),
        s: args.s.unwrap_or(defaults.s),
        ..defaults
    };
    hp.validate().map_err(|e| CliError::lib("validating parameters", e))?;
    let from = args.from.unwrap_or(-3.0);
    let to = args.to.unwrap_or(3.0);
    let step = args.step.unwrap_or(0.01);
    let grid_ok =
        step.is_finite() && step > 0.0 && from.is_finite() && to.is_finite() && to > from;
    if !grid_ok {
        return Err(CliError::config(format!(
            "bad grid: from={from} to={to} step={step} (need step > 0 and to > from)"
        )));
    }
    // Integer-indexed grid so step rounding cannot drop or duplicate the end.
    let count = ((to - from) / step).round() as usize + 1;
    let grid: Vec<f64> = (0..count).map(|i| from + step * i as f64).collect();
    let rows = loss_curves(hp.delta, hp.s, &grid);
    match args.out {
        Some(path) => {
            let mut buf = Vec::new();
            write_loss_curves(&mut buf, &rows)
                .map_err(|e| CliError::runtime(format!("formatting loss curves: {e}")))?;
            std::fs::write(&path, buf)
                .map_err(|e| CliError::runtime(format!("writing {}: {e}", path.display())))?;
        }
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            write_loss_curves(&mut lock, &rows)
                .map_err(|e| CliError::runtime(format!("writing loss curves: {e}")))?;
        }
    }
    Ok(())
}
