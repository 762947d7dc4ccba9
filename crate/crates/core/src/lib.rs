//! Training implicit generative models with the invariant statistical loss (ISL).
//!
//! The loss compares a batch of real observations with samples from a generator
//! through the rank statistic `A_K`: the number of `K` generated samples that fall
//! at or below an observation. When the generator reproduces the data law the rank
//! is uniform on `{0, ..., K}`, whatever that law is. A soft (sigmoid + RBF)
//! histogram of the ranks makes the deviation from uniformity differentiable.
//!
//! Modules:
//!
//! * [`distributions`]: seeded noise and target samplers, CDFs and quantiles.
//! * [`rank_stats`]: hard ranks, rank histograms, `d_K` and the Pearson gate.
//! * [`isl_loss`]: soft ranks, RBF histograms, 1D / sliced / marginal losses.
//! * [`diff_engine`]: reverse-mode tape, MLP generator, Adam, checkpoints.
//! * [`training`]: progressive-K training, ISL-slicing, Pareto-ISL setup.
//! * [`metrics`]: KS distance, optimal-map MAE/MSE, tail area, mode coverage, KL/JS.

// `!(x > 0.0)` is how parameter checks reject NaN along with non-positive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod diff_engine;
pub mod distributions;
pub mod error;
pub mod isl_loss;
pub mod matrix;
pub mod metrics;
pub mod rank_stats;
pub mod rng;
pub mod special;
pub mod training;

pub use error::{IslError, Result};
pub use matrix::Matrix;
pub use rng::RandomSource;
