//! Uncertainty quantification for selective prediction.
//!
//! The crate computes per-instance uncertainty scores over exported classifier
//! outputs (probabilities, MC-dropout samples and penultimate-layer
//! embeddings), combines aleatoric and epistemic scores with the rank-based
//! hybrids, and evaluates abstention with rejection curves and normalized
//! areas under them.
//!
//! Every score follows one convention: higher means more uncertain.

pub mod baseline;
pub mod density;
pub mod error;
pub mod hybrid;
pub mod io;
pub(crate) mod linalg;
pub mod mc;
pub mod methods;
pub mod rank;
pub mod rng;
pub mod selective;
mod serde_float;
pub mod synth;
pub mod types;

pub use error::{Error, Result};
pub use linalg::Precision;
pub use rank::{rank, RankTable};
pub use rng::{seeded_rng, DetRng};
pub use types::{ClassProbability, Embedding, Label, LabeledSplit, McSamples, Record, SplitRole, Task};
