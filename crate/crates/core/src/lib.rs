//! Detection of coordinated accounts in online social networks from
//! activity traces alone.
//!
//! The pipeline bins each user's event timestamps into a fixed-length count
//! series, reconstructs a lagged-coordinate shadow manifold per user, and
//! cross maps every candidate pair: if one user's manifold predicts another
//! user's series with a correlation that grows with the library length and
//! clears a threshold, an influence flow is asserted and both users are
//! marked as suspected coordinated. Topic clustering (TF-IDF + NMF) can
//! prune the quadratic pair search to intra-topic pairs. Granger causality
//! and a majority-language classifier are included as baselines, and the
//! eval module scores any of them against labelled ground truth.
//!
//! Modules follow the pipeline order:
//!
//! - [`ingest`]: event logs -> per-user activity traces
//! - [`series`]: traces -> binned count vectors with a train/test split
//! - [`ccm`]: shadow manifolds, cross-map prediction, pairwise scan
//! - [`graph`]: influence graph, marking, net-degree, communities
//! - [`topics`]: TF-IDF + NMF topic clustering and the pair filter
//! - [`baselines`]: Granger causality and the language classifier
//! - [`eval`]: metrics, ROC/AUC, histograms, agreement curves
//! - [`synth`]: seeded synthetic corpora with known ground truth
//! - [`io`]: file formats shared by the CLI and external tools

pub mod baselines;
pub mod ccm;
pub mod error;
pub mod eval;
pub mod graph;
pub mod ingest;
pub mod io;
pub mod louvain;
pub mod series;
pub mod stats;
pub mod synth;
pub mod topics;

pub use ccm::{CrossMapResult, EmbeddingParams, ShadowManifold};
pub use error::{Error, Result};
pub use eval::{EdgeRecord, Histogram, PairBreakdown, RocCurve, UserMetrics};
pub use graph::{InfluenceEdge, InfluenceGraph, NodeDegreeReport};
pub use ingest::{ActivityTrace, AnalysisWindow, Event, InputFormat, Label};
pub use series::{BinnedSeries, SplitSeries, TrainRatio};
pub use synth::{FollowLag, ScenarioKind, ScenarioSpec};
pub use topics::{TfidfCorpus, TopicModel, UserTopicAssignment};
