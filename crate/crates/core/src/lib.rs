//! Adaptive conditional density estimation with blockwise shrinkage in a
//! cosine/Fourier basis, plus the oracle and minimax risk machinery needed to
//! benchmark it.

// `!(a < b)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod data;
pub mod design;
pub mod error;
pub mod fourier;
pub mod model;
pub mod oracle;
pub mod quadrature;
pub mod risk;
pub mod estimator;
pub mod schedule;
pub mod sim;
pub mod study;

pub use data::{DesignKind, Loss, SamplePairs};
pub use design::{estimate_design, DesignDensityEstimate, DesignSpec, PredictorDensity};
pub use error::{Error, Result};
pub use model::{ResponseDomain, TrueModel};
pub use estimator::{fit, CondDensityFit, DensityGrid};
pub use schedule::{build_schedule, BlockSchedule};
