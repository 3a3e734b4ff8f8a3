//! Plain-text model files.
//!
//! Version-1 layout: a single header line
//!
//!   planeclust-model v1 mode=<linear|kernel|kmeans|kpc|ppc> k=<k> n=<n> [m=<m> mu=<mu>]
//!
//! followed by one whitespace-separated line per plane (w then b) for plane
//! models, per center for kmeans, and — in kernel mode — one line per
//! support sample after the planes.  Floats carry 17 significant digits, so
//! saving and loading is lossless.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::DMatrix;

use crate::baselines::CentroidModel;
use crate::cluster::{KernelKind, KernelModel, PlaneModel};
use crate::data::Labels;
use crate::error::{Error, Result};
use crate::ramp::Plane;

/// Any trained model, tagged by the method that produced it so a file can be
/// loaded and applied without further context.
#[derive(Debug, Clone)]
pub enum SavedModel {
    RampLinear(PlaneModel),
    RampKernel(KernelModel),
    Kpc(PlaneModel),
    Ppc(PlaneModel),
    Kmeans(CentroidModel),
}

impl SavedModel {
    pub fn mode_tag(&self) -> &'static str {
        match self {
            SavedModel::RampLinear(_) => "linear",
            SavedModel::RampKernel(_) => "kernel",
            SavedModel::Kpc(_) => "kpc",
            SavedModel::Ppc(_) => "ppc",
            SavedModel::Kmeans(_) => "kmeans",
        }
    }

    pub fn k(&self) -> usize {
        match self {
            SavedModel::RampLinear(m) | SavedModel::Kpc(m) | SavedModel::Ppc(m) => m.k(),
            SavedModel::RampKernel(m) => m.k(),
            SavedModel::Kmeans(m) => m.k(),
        }
    }

    /// Raw input dimension expected by `predict`.
    pub fn n(&self) -> usize {
        match self {
            SavedModel::RampLinear(m) | SavedModel::Kpc(m) | SavedModel::Ppc(m) => m.n(),
            SavedModel::RampKernel(m) => m.n(),
            SavedModel::Kmeans(m) => m.n(),
        }
    }

    pub fn predict(&self, x: &DMatrix<f64>) -> Result<Labels> {
        match self {
            SavedModel::RampLinear(m) | SavedModel::Kpc(m) | SavedModel::Ppc(m) => m.assign(x),
            SavedModel::RampKernel(m) => m.assign(x),
            SavedModel::Kmeans(m) => m.assign(x),
        }
    }

    pub fn to_text(&self) -> Result<String> {
        let mut out = String::new();
        let planes_of = |out: &mut String, planes: &[Plane]| {
            for p in planes {
                for v in p.w.iter() {
                    let _ = write!(out, "{:.16e} ", v);
                }
                let _ = writeln!(out, "{:.16e}", p.b);
            }
        };
        match self {
            SavedModel::RampLinear(m) | SavedModel::Kpc(m) | SavedModel::Ppc(m) => {
                let _ = writeln!(
                    out,
                    "planeclust-model v1 mode={} k={} n={}",
                    self.mode_tag(),
                    m.k(),
                    m.n()
                );
                planes_of(&mut out, &m.planes);
            }
            SavedModel::RampKernel(m) => {
                let mu = match m.kernel {
                    KernelKind::Gaussian { mu } => mu,
                    KernelKind::DotProduct => {
                        return Err(Error::Unsupported(
                            "dot-product kernel models have no file format".into(),
                        ))
                    }
                };
                let _ = writeln!(
                    out,
                    "planeclust-model v1 mode=kernel k={} n={} m={} mu={:.16e}",
                    m.k(),
                    m.n(),
                    m.support.nrows(),
                    mu
                );
                planes_of(&mut out, &m.planes);
                for r in 0..m.support.nrows() {
                    for c in 0..m.support.ncols() {
                        if c > 0 {
                            out.push(' ');
                        }
                        let _ = write!(out, "{:.16e}", m.support[(r, c)]);
                    }
                    out.push('\n');
                }
            }
            SavedModel::Kmeans(m) => {
                let _ = writeln!(
                    out,
                    "planeclust-model v1 mode=kmeans k={} n={}",
                    m.k(),
                    m.n()
                );
                for r in 0..m.centers.nrows() {
                    for c in 0..m.centers.ncols() {
                        if c > 0 {
                            out.push(' ');
                        }
                        let _ = write!(out, "{:.16e}", m.centers[(r, c)]);
                    }
                    out.push('\n');
                }
            }
        }
        Ok(out)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<SavedModel> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        SavedModel::parse(&text)
    }

    pub fn parse(text: &str) -> Result<SavedModel> {
        let bad = |line: usize, msg: String| Error::ModelFormat { line, msg };
        let nlines = text.lines().count().max(1);
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, head) = lines
            .next()
            .ok_or_else(|| bad(1, "empty model file".into()))?;
        let mut fields = head.split_whitespace();
        if fields.next() != Some("planeclust-model") || fields.next() != Some("v1") {
            return Err(bad(1, "expected 'planeclust-model v1' header".into()));
        }
        let mut mode = None;
        let mut k = None;
        let mut n = None;
        let mut m = None;
        let mut mu = None;
        for f in fields {
            let (key, value) = f
                .split_once('=')
                .ok_or_else(|| bad(1, format!("malformed header field {:?}", f)))?;
            match key {
                "mode" => mode = Some(value.to_string()),
                "k" => k = value.parse::<usize>().ok(),
                "n" => n = value.parse::<usize>().ok(),
                "m" => m = value.parse::<usize>().ok(),
                "mu" => mu = value.parse::<f64>().ok(),
                _ => return Err(bad(1, format!("unknown header key {:?}", key))),
            }
        }
        let mode = mode.ok_or_else(|| bad(1, "missing mode".into()))?;
        let k = k.filter(|&k| k >= 1).ok_or_else(|| bad(1, "missing or invalid k".into()))?;
        let n = n.filter(|&n| n >= 1).ok_or_else(|| bad(1, "missing or invalid n".into()))?;

        let mut row = |want: usize| -> Result<Vec<f64>> {
            let (idx, line) = lines
                .next()
                .ok_or_else(|| bad(nlines, "model file ended early".into()))?;
            let vals = line
                .split_whitespace()
                .map(|t| t.parse::<f64>().map_err(|_| bad(idx + 1, format!("bad float {:?}", t))))
                .collect::<Result<Vec<f64>>>()?;
            if vals.len() != want {
                return Err(bad(idx + 1, format!("expected {} values, got {}", want, vals.len())));
            }
            Ok(vals)
        };

        let planes = |row: &mut dyn FnMut(usize) -> Result<Vec<f64>>, dim: usize| -> Result<Vec<Plane>> {
            (0..k)
                .map(|_| {
                    let vals = row(dim + 1)?;
                    Ok(Plane {
                        w: nalgebra::DVector::from_vec(vals[..dim].to_vec()),
                        b: vals[dim],
                    })
                })
                .collect()
        };

        let parsed = match mode.as_str() {
            "linear" | "kpc" | "ppc" => {
                let ps = planes(&mut row, n)?;
                let pm = PlaneModel { planes: ps, meta: None };
                match mode.as_str() {
                    "linear" => SavedModel::RampLinear(pm),
                    "kpc" => SavedModel::Kpc(pm),
                    _ => SavedModel::Ppc(pm),
                }
            }
            "kernel" => {
                let m = m.filter(|&m| m >= 1).ok_or_else(|| bad(1, "kernel mode needs m".into()))?;
                let mu = mu
                    .filter(|&v| v > 0.0 && v.is_finite())
                    .ok_or_else(|| bad(1, "kernel mode needs a positive mu".into()))?;
                let ps = planes(&mut row, m)?;
                let mut support = DMatrix::zeros(m, n);
                for r in 0..m {
                    let vals = row(n)?;
                    for (c, v) in vals.into_iter().enumerate() {
                        support[(r, c)] = v;
                    }
                }
                SavedModel::RampKernel(KernelModel {
                    planes: ps,
                    support,
                    kernel: KernelKind::Gaussian { mu },
                    meta: None,
                })
            }
            "kmeans" => {
                let mut centers = DMatrix::zeros(k, n);
                for r in 0..k {
                    let vals = row(n)?;
                    for (c, v) in vals.into_iter().enumerate() {
                        centers[(r, c)] = v;
                    }
                }
                SavedModel::Kmeans(CentroidModel { centers, meta: None })
            }
            other => return Err(bad(1, format!("unknown mode {:?}", other))),
        };
        if let Some((idx, _)) = lines.next() {
            return Err(bad(idx + 1, "unexpected trailing content".into()));
        }
        Ok(parsed)
    }
}
