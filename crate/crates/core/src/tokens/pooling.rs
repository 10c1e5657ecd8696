//! Client vectors from bags of token vectors.

use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::bins::{fit_bins, tokenize, BinDictionary, TokenCorpus};
use super::skipgram::{train_skipgram, TokenVectors, TrainStats, W2vConfig};
use crate::embedding::EmbeddingSet;
use crate::error::{Error, Result};
use crate::segment::kmeans::{kmeans, nearest, KMeansConfig};
use crate::seed;
use crate::table::TransactionTable;

/// Arithmetic mean of the bag's token vectors. An empty bag gives zeros.
pub fn pool_mean(bag: &[u32], vectors: &TokenVectors) -> Vec<f64> {
    let mut out = vec![0.0; vectors.dim()];
    if bag.is_empty() {
        return out;
    }
    for &t in bag {
        for (o, v) in out.iter_mut().zip(vectors.vector(t)) {
            *o += v;
        }
    }
    let inv = 1.0 / bag.len() as f64;
    out.iter_mut().for_each(|o| *o *= inv);
    out
}

/// Cluster the token vectors into a VLAD codebook, `dim × n_centers`.
pub fn fit_vlad(vectors: &TokenVectors, n_centers: usize, seed: u64) -> Result<DMatrix<f64>> {
    let clustering = kmeans(
        &vectors.vectors,
        &KMeansConfig::new(n_centers, seed::derive_seed(seed, "vlad")),
    )?;
    Ok(clustering.centroids)
}

/// Residuals to the nearest center, summed per center, concatenated and
/// L2 normalized. Length is `dim * n_centers`; an empty bag gives zeros.
pub fn pool_vlad(bag: &[u32], vectors: &TokenVectors, centers: &DMatrix<f64>) -> Vec<f64> {
    let d = vectors.dim();
    let mut out = vec![0.0; d * centers.ncols()];
    for &t in bag {
        let v = vectors.vector(t);
        let (c, _) = nearest(v, centers);
        let mu = centers.column(c);
        for k in 0..d {
            out[c * d + k] += v[k] - mu[k];
        }
    }
    let norm = out.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        out.iter_mut().for_each(|x| *x /= norm);
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Pooling {
    Mean,
    Vlad { centers: usize },
}

impl std::str::FromStr for Pooling {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mean" => Ok(Pooling::Mean),
            _ => match s.strip_prefix("vlad:").map(str::parse::<usize>) {
                Some(Ok(c)) if c > 0 => Ok(Pooling::Vlad { centers: c }),
                _ => Err(Error::Config(format!("unknown pooling {s:?}; expected mean or vlad:<centers>"))),
            },
        }
    }
}

impl std::fmt::Display for Pooling {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Pooling::Mean => write!(f, "mean"),
            Pooling::Vlad { centers } => write!(f, "vlad:{centers}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenConfig {
    pub n_bins: usize,
    pub w2v: W2vConfig,
    pub pooling: Pooling,
}

impl Default for TokenConfig {
    fn default() -> Self {
        Self {
            n_bins: 10,
            w2v: W2vConfig::default(),
            pooling: Pooling::Mean,
        }
    }
}

impl TokenConfig {
    pub fn tag(&self) -> String {
        format!(
            "w2v:bins={},dim={},window={},neg={},epochs={},pool={}",
            self.n_bins, self.w2v.embed_dim, self.w2v.window, self.w2v.negatives, self.w2v.epochs, self.pooling
        )
    }
}

/// Everything needed to embed new clients: bins, token vectors and the
/// pooling codebook.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenModel {
    pub config: TokenConfig,
    pub dictionary: BinDictionary,
    pub vectors: TokenVectors,
    pub centers: Option<DMatrix<f64>>,
}

impl TokenModel {
    pub fn train(table: &TransactionTable, config: &TokenConfig) -> Result<(Self, TrainStats)> {
        let dictionary = fit_bins(table, config.n_bins)?;
        let corpus = tokenize(table, &dictionary)?;
        let (vectors, stats) = train_skipgram(&corpus, &config.w2v)?;
        let centers = match config.pooling {
            Pooling::Mean => None,
            Pooling::Vlad { centers } => Some(fit_vlad(&vectors, centers, config.w2v.seed)?),
        };
        Ok((
            Self {
                config: config.clone(),
                dictionary,
                vectors,
                centers,
            },
            stats,
        ))
    }

    pub fn tokenize(&self, table: &TransactionTable) -> Result<TokenCorpus> {
        tokenize(table, &self.dictionary)
    }

    pub fn pool(&self, bag: &[u32]) -> Vec<f64> {
        match &self.centers {
            None => pool_mean(bag, &self.vectors),
            Some(c) => pool_vlad(bag, &self.vectors, c),
        }
    }

    pub fn embed(&self, table: &TransactionTable) -> Result<EmbeddingSet> {
        let corpus = self.tokenize(table)?;
        let dim = match &self.centers {
            None => self.vectors.dim(),
            Some(c) => self.vectors.dim() * c.ncols(),
        };
        let mut data = Vec::with_capacity(dim * corpus.bags.len());
        for bag in &corpus.bags {
            data.extend(self.pool(bag));
        }
        EmbeddingSet::new(
            corpus.client_ids,
            DMatrix::from_vec(dim, table.n_clients(), data),
            self.config.tag(),
        )
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        serde_json::to_writer(std::io::BufWriter::new(file), self).map_err(|e| Error::Format(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_reader(std::io::BufReader::new(file)).map_err(|e| Error::Format(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vectors() -> TokenVectors {
        TokenVectors {
            labels: vec!["a".into(), "b".into(), "c".into()],
            vectors: DMatrix::from_vec(2, 3, vec![1.0, 0.0, 0.0, 2.0, -1.0, -1.0]),
        }
    }

    #[test]
    fn mean_pooling() {
        let tv = vectors();
        assert_eq!(pool_mean(&[0, 1], &tv), vec![0.5, 1.0]);
        assert_eq!(pool_mean(&[], &tv), vec![0.0, 0.0]);
    }

    #[test]
    fn vlad_matches_brute_force() {
        let tv = vectors();
        let centers = DMatrix::from_vec(2, 2, vec![0.5, 0.5, -1.0, -0.5]);
        let got = pool_vlad(&[0, 1, 2], &tv, &centers);
        // a -> c0 (0.5,-0.5), b -> c0 (-0.5,1.5), c -> c1 (0,-0.5)
        let raw = [0.0, 1.0, 0.0, -0.5];
        let n = (1.0f64 + 0.25).sqrt();
        for (g, r) in got.iter().zip(raw) {
            assert!((g - r / n).abs() < 1e-12);
        }
        assert_eq!(got.len(), 4);
        assert!(pool_vlad(&[], &tv, &centers).iter().all(|&x| x == 0.0));
    }

    #[test]
    fn pooling_parses() {
        assert_eq!("mean".parse::<Pooling>().unwrap(), Pooling::Mean);
        assert_eq!("vlad:8".parse::<Pooling>().unwrap(), Pooling::Vlad { centers: 8 });
        assert!("vlad:0".parse::<Pooling>().is_err());
        assert!("max".parse::<Pooling>().is_err());
    }
}
