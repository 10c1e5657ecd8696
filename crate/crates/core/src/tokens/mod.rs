//! Bag-of-tokens baseline: percentile bins, skip-gram token vectors and
//! pooling into client vectors.

pub mod bins;
pub mod pooling;
pub mod skipgram;

pub use bins::{fit_bins, tokenize, BinDictionary, CategoryBins, TokenCorpus};
pub use pooling::{pool_mean, pool_vlad, Pooling, TokenConfig, TokenModel};
pub use skipgram::{sgns_loss_grad, train_skipgram, TokenVectors, W2vConfig};
