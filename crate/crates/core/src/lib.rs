//! capsdec decomposes the static embedding of an ambiguous word into
//! morpheme-like capsule vectors via dynamic routing, recomposes them with
//! global/local context attention into a context-specific sense vector, and
//! trains the whole pipeline through binary word-sense matching.
//!
//! The crate is organized bottom-up:
//!
//! * [`numerics`] — dense vectors/matrices, a reverse-mode compute graph,
//!   parameter storage, optimizers and gradient checking.
//! * [`capsule`] — embedding expansion and routing-by-agreement.
//! * [`context`] — sentences, vocabularies, the pluggable context encoder
//!   and the local window.
//! * [`compose`] — context attention and squared-norm composition.
//! * [`model`] / [`matcher`] / [`trainer`] — the assembled model, the pair
//!   classifier, training and sense prediction.
//! * [`data`] — corpus loaders, pair generation, the synthetic
//!   pseudo-ambiguous benchmark and metrics.
//! * [`checkpoint`] — self-describing binary model files.

pub mod capsule;
pub mod checkpoint;
pub mod compose;
pub mod context;
pub mod data;
mod error;
pub mod matcher;
pub mod model;
pub mod numerics;
pub mod trainer;

pub use error::{Error, Result};

pub use capsule::{DecomposerConfig, DecomposerParams};
pub use compose::SenseRepresentation;
pub use context::{ContextRepr, EncoderSpec, Sentence, Vocab};
pub use data::{SenseInventory, SyntheticSpec, WSDInstance};
pub use matcher::{MatchClassifier, MatchingPair};
pub use model::{Ablation, DecompositionModel, EncoderKind, ModelConfig, SenseAnalysis};
pub use numerics::{ParameterStore, RealMatrix, RealVector};
pub use trainer::{TrainConfig, TrainReport};
