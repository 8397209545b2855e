//! Analysis toolkit for trained image classifiers and static costing of
//! sequential CNN architectures.
//!
//! The crate is organised around a handful of independent modules:
//!
//! * [`confmat`]: confusion matrices, accuracy-style metrics and the
//!   regularised cross-entropy loss.
//! * [`ordering`]: class permutations minimising the distance-weighted
//!   confusion mass, via simulated annealing or exhaustive search.
//! * [`clustering`]: cutting an ordered matrix into class clusters and
//!   scoring clusterings against a coarse ground truth.
//! * [`netarch`] / [`netcalc`]: a line-oriented architecture language,
//!   shape inference and parameter / FLOPs / memory accounting.
//! * [`predops`]: ensembles, label smoothing, activation functions,
//!   filter correlation and weight-update statistics.
//! * [`datagen`]: linear filtering, pooling and crop extraction on rasters.
//! * [`render`]: SVG heatmaps and diagonal-block tiling.
//! * [`cli`]: the `convlens` command-line front end.
//!
//! Interchangeable algorithms (orderers, threshold strategies, activation
//! functions) live behind traits and are looked up by name in registries,
//! so the CLI selects them at runtime.

pub mod cli;
pub mod clustering;
pub mod confmat;
pub mod datagen;
pub mod error;
pub mod netarch;
pub mod netcalc;
pub mod ordering;
pub mod predops;
pub mod render;
pub mod rng;
pub mod tensor;

pub use confmat::{ConfusionMatrix, MetricsReport};
pub use error::{Error, Result};
pub use ordering::{AnnealSchedule, OrderingResult, Permutation};
