//! Semi-parametric Bayesian inference for multivariate threshold excesses
//! under censoring.
//!
//! The model couples generalized-Pareto margins above per-station thresholds
//! with a Dirichlet-mixture angular measure for the dependence structure of
//! extremes, expressed as a Poisson process of standardized exceedances so
//! that censoring intervals overlapping the threshold keep a well-defined
//! likelihood. The intractable pieces of the censored likelihood (integrals
//! over censoring boxes and exponential failure-region terms) are traded for
//! augmentation variables: latent coordinates with exact truncated-Beta
//! mixture full conditionals, and auxiliary Poisson processes with a
//! geometric weight whose expectation restores the exponential terms.
//! A Metropolis-within-Gibbs sampler with reversible jumps over the mixture
//! size targets the joint augmented posterior of marginal and dependence
//! parameters.
//!
//! Module map:
//! * [`dm`] — Dirichlet-mixture angular measure, exponent densities,
//!   marginalization, exponent-measure estimates, exact sampling;
//! * [`margins`] — GPD margins, Fréchet standardization, Jacobians, return
//!   levels;
//! * [`data`] — censored observations, threshold classification, the
//!   censoring transform, summaries, run-declustering;
//! * [`augment`] — latent-coordinate full conditionals and auxiliary Poisson
//!   processes;
//! * [`sampler`] — priors, move kernels, the chain driver;
//! * [`experiments`] — data simulation, censoring patterns, scores,
//!   predictive summaries;
//! * [`diagnostics`] — potential scale reduction, stationarity tests,
//!   mixture functionals;
//! * [`special`], [`numeric`] — the underlying numerics.

pub mod augment;
pub mod data;
pub mod diagnostics;
pub mod dm;
pub mod error;
pub mod experiments;
pub mod margins;
pub mod numeric;
pub mod sampler;
pub mod special;

pub use error::{Error, Result};
