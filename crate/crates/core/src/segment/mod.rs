//! Clustering of embeddings and segment quality measures.

pub mod dispersion;
pub mod kmeans;
pub mod typical;

pub use dispersion::{dispersion, dispersion_split, median_cluster_spread, DispersionConfig, DispersionReport, TargetSpread};
pub use kmeans::{adjusted_rand_index, kmeans, Clustering, KMeansConfig};
pub use typical::{pattern_matrix, typical_members, PatternMatrix, TypicalSelection};
