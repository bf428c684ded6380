//! Continuum particle systems with ferromagnetic convolution interactions.
//!
//! The crate samples finite-window Gibbs point processes by birth–death
//! Metropolis–Hastings, evaluates the convolution field `phi = G * eta` and
//! its holomorphic extension, and checks correlation inequalities and
//! (non-)invariance statements against Monte Carlo estimates and an exact
//! Poisson-series oracle.
// Negated comparisons reject NaN along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod configurations;
pub mod error;
pub mod fields;
pub mod geometry;
pub mod interaction;
pub mod oracle;
pub mod kernels;
pub mod quad;
pub mod sampler;
pub mod stats;

pub use analysis::{Check, Functional, Model, TestReport};
pub use configurations::{Configuration, TestFunction};
pub use error::{Error, Result};
pub use fields::{field_complex, ComplexBox, CorrelationEstimate};
pub use geometry::{ComplexPoint, GroupElement, Slice, Space, Window};
pub use interaction::{ConditionsReport, PotentialParams, PotentialSpec, Profile, QuadratureGrid};
pub use kernels::{FourierQuadrature, KernelParams, KernelSpec};
pub use oracle::{Observable, SeriesParams, SeriesSpec, SeriesValue};
pub use sampler::{ChainState, Diagnostics, RunOutput, SamplerConfig};
