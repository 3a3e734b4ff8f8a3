//! Plane-based clustering.
//!
//! Each cluster is represented by a hyperplane f_i(x) = w_i'x + b_i = 0 rather
//! than a centroid; samples go to the plane they deviate least from.  The main
//! method (`cluster::fit`) trains the planes under a bounded ramp loss with a
//! CCCP-style mixed-integer solver, in a linear and a Gaussian-kernel variant.
//! `baselines` carries kmeans, kPC and PPC for comparison, `metrics` the
//! accuracy/mutual-information scores used to judge partitions against ground
//! truth, and `model` a plain-text serialization for every trained model kind.

pub mod baselines;
pub mod cluster;
pub mod data;
pub mod error;
pub mod metrics;
pub mod model;
pub mod ramp;
pub mod solver;

pub use cluster::{fit, FitOptions, FitReport, FittedModel, KernelKind, KernelModel, Mode, PlaneModel};
pub use data::{load_csv, standardize, ColumnSelector, Dataset, Labels, Linkage, ScaleMode};
pub use error::{Error, Result};
pub use metrics::MetricReport;
pub use ramp::{HyperParams, Plane};
