//! Behavioral client embeddings from aggregated transaction tables.
//!
//! The crate turns client × category tables of signed yearly amounts into
//! vector embeddings (a marginalized stacked denoising autoencoder, plus raw,
//! sociodemographic and token/skip-gram baselines) and evaluates them on
//! segmentation, missing-category prediction and campaign retrieval.

pub mod embedding;
pub mod error;
pub mod methods;
pub mod msda;
pub mod preprocess;
pub mod retrieval;
pub mod seed;
pub mod segment;
pub mod synth;
pub mod table;
pub mod tokens;
pub mod tuner;

pub use embedding::{Embedding, EmbeddingSet};
pub use error::{Error, Result};
pub use msda::{MsdaConfig, MsdaLayer, MsdaModel, OutputMode, Ridge};
pub use preprocess::PreprocSpec;
pub use table::{CategoryId, SociodemoTable, SplitSpec, TransactionTable};
