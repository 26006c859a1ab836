//! On-disk formats: binary matrices, dataset manifests, score tables and
//! fitted-model containers.

mod dataset;
mod matrix;
mod models;
mod scores;

pub use dataset::{write_dataset, Dataset, DatasetManifest, FileRef, SplitFiles, StoredSplit, MANIFEST_FILE};
pub use matrix::{
    read_matrix, read_mc, sha256_hex, write_matrix, write_mc, Matrix, McTensor, FORMAT_VERSION, MATRIX_MAGIC, MC_MAGIC,
};
pub use models::{encode_models, read_models, write_models, ModelFile, MODELS_MAGIC};
pub use scores::{ScoreRow, ScoreTable, ScorerUnits};
