//! Presentation attack detection toolkit.
//!
//! Trains a small two-layer head on frozen backbone embeddings and evaluates
//! any score source with ISO/IEC 30107-3 metrics (per-PAI APCER, BPCER, EER,
//! BPCER10/20/100 and DET curves).

pub mod cli;
pub mod det;
pub mod embedding;
pub mod head;
pub mod manifest;
pub mod metrics;
pub mod scores;
pub mod synth;
pub mod train;

pub use embedding::{join, read_embeddings, write_embeddings, Dataset, EmbeddingSet};
pub use head::MlpHead;
pub use manifest::{parse_manifest, summarize, Label, Manifest, PaiSpecies, Partition};
pub use metrics::{full_report, MetricsReport, PaiScope};
pub use scores::{ScoreEntry, ScoreSet};
pub use train::{grid_search, score, train, TrainConfig};
