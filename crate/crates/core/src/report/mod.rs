//! Persistence and evaluation: binary checkpoints, score CSVs, per-class
//! summaries, ranking metrics and the latent-space JSON export.

mod checkpoint;
mod evaluation;
mod export;

pub use checkpoint::{
    checkpoint_bytes, load_checkpoint, load_checkpoint_for, parse_checkpoint, save_checkpoint, CheckpointManifest,
    LayerManifest, CHECKPOINT_MAGIC, CHECKPOINT_VERSION,
};
pub use evaluation::{
    aggregate_runs, auc_and_precision_at_k, per_class_mean_scores, precision_at_k, rank_entries, read_score_csv,
    roc_auc, write_score_csv, write_summary_csv, ClassScore, ClassScoreSummary, RankingMetrics, PRECISION_KS,
};
pub use export::{
    export_latent_json, latent_records, meta_path, read_latent_export, read_latent_json, AttributeValue,
    ExportMeta, LatentExport, LatentRecord,
};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed file: {0}")]
    Format(String),
    #[error("checkpoint format version {found} is not supported (expected {supported})")]
    Version { found: u32, supported: u32 },
    #[error("checkpoint was trained on encoding spec {expected}, data uses {actual}")]
    DigestMismatch { expected: String, actual: String },
    #[error("checkpoint truncated or length corrupted: needs {expected} bytes, file has {actual}")]
    Truncated { expected: usize, actual: usize },
    #[error("checkpoint payload checksum mismatch")]
    Checksum,
    #[error("scores carry no labels")]
    MissingLabels,
    #[error("metric needs both anomalous and regular entries")]
    SingleClass,
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}
