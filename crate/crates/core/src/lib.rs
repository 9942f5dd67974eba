//! Debiased graph embeddings by factorizing residual random-walk statistics.
//!
//! A graph is summarised by its window-averaged random-walk transition
//! probabilities `P_d(j|i)`. A null random-graph model (a degree-corrected
//! stochastic block model or one of its special cases) supplies a baseline
//! `P_0(j|i)`, and the embedding is the truncated SVD of the positive part of
//! `ln P_d(j|i) - ln P_0(j|i)`.
//!
//! The crate is organised bottom-up:
//!
//! * [`graph`]: sparse weighted undirected graphs, I/O, spanning trees.
//! * [`null_model`]: dcSBM baselines with analytic window probabilities and a sampler.
//! * [`transition`]: exact, simulated and block-approximated walk statistics.
//! * [`residual`]: residual matrix, SVD factorization and the end-to-end pipeline.
//! * [`sgns`]: a small skip-gram trainer used to check what negative sampling fits.
//! * [`bench`]: link-prediction and community-detection evaluation.

pub mod bench;
pub mod error;
pub mod graph;
pub mod null_model;
pub mod residual;
pub mod rng;
pub mod sgns;
pub mod stats;
pub mod svd;
pub mod transition;

pub use error::{Error, Result};
pub use graph::{Graph, NodeLabels, TransitionMatrix};
pub use null_model::{BaselineModel, NodeGrouping, NullKind, WindowedBaseline};
pub use residual::{residual2vec, Embedding, NullSpec, R2vConfig, ResidualMatrix};
pub use transition::{WalkCorpus, WindowTransition};
