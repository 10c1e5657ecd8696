//! Exact nearest-neighbor search and retrieval metrics.
//!
//! Rankings always order by descending score and break ties by ascending
//! index, so every list here is fully deterministic.

use std::cmp::Ordering;
use std::io::Write;

use nalgebra::DMatrix;
use rand::seq::index;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::embedding::EmbeddingSet;
use crate::error::{Error, Result};
use crate::methods::Method;
use crate::seed;
use crate::table::TransactionTable;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Similarity {
    #[default]
    Dot,
    Cosine,
}

impl std::str::FromStr for Similarity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dot" => Ok(Similarity::Dot),
            "cosine" => Ok(Similarity::Cosine),
            _ => Err(Error::Config(format!("unknown similarity {s:?}; expected dot or cosine"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    pub index: usize,
    pub score: f64,
}

fn by_rank(a: &(f64, u32), b: &(f64, u32)) -> Ordering {
    b.0.total_cmp(&a.0).then(a.1.cmp(&b.1))
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Immutable database of embeddings (`dim × n`).
#[derive(Debug, Clone)]
pub struct NeighborIndex {
    database: DMatrix<f64>,
    similarity: Similarity,
    inv_norms: Option<Vec<f64>>,
}

impl NeighborIndex {
    pub fn new(database: DMatrix<f64>, similarity: Similarity) -> Self {
        let inv_norms = (similarity == Similarity::Cosine).then(|| {
            database
                .column_iter()
                .map(|c| {
                    let n = c.norm();
                    if n > 0.0 {
                        1.0 / n
                    } else {
                        0.0
                    }
                })
                .collect()
        });
        Self {
            database,
            similarity,
            inv_norms,
        }
    }

    pub fn from_embeddings(set: &EmbeddingSet, similarity: Similarity) -> Self {
        Self::new(set.matrix().clone(), similarity)
    }

    pub fn len(&self) -> usize {
        self.database.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dim(&self) -> usize {
        self.database.nrows()
    }

    pub fn similarity(&self) -> Similarity {
        self.similarity
    }

    /// Similarity of `query` to every database vector.
    pub fn scores(&self, query: &[f64]) -> Result<Vec<f64>> {
        if query.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: query.len(),
            });
        }
        let d = self.dim();
        let q_scale = match self.similarity {
            Similarity::Dot => 1.0,
            Similarity::Cosine => {
                let n = norm(query);
                if n > 0.0 {
                    1.0 / n
                } else {
                    0.0
                }
            }
        };
        Ok(self
            .database
            .as_slice()
            .chunks_exact(d.max(1))
            .take(self.len())
            .enumerate()
            .map(|(i, col)| {
                let s: f64 = col.iter().zip(query).map(|(a, b)| a * b).sum();
                match &self.inv_norms {
                    Some(inv) => s * inv[i] * q_scale,
                    None => s,
                }
            })
            .collect())
    }

    fn top_k(&self, query: &[f64], k: usize) -> Result<Vec<(f64, u32)>> {
        if k > self.len() {
            return Err(Error::InvalidArgument(format!("k={k} exceeds database size {}", self.len())));
        }
        let mut ranked: Vec<(f64, u32)> = self.scores(query)?.into_iter().zip(0u32..).collect();
        if k == 0 {
            return Ok(Vec::new());
        }
        if k < ranked.len() {
            ranked.select_nth_unstable_by(k - 1, by_rank);
            ranked.truncate(k);
        }
        ranked.sort_unstable_by(by_rank);
        Ok(ranked)
    }

    /// The `k` most similar database vectors, best first.
    pub fn knn(&self, query: &[f64], k: usize) -> Result<Vec<Neighbor>> {
        Ok(self
            .top_k(query, k)?
            .into_iter()
            .map(|(score, i)| Neighbor {
                index: i as usize,
                score,
            })
            .collect())
    }

    /// Neighbor index lists for every column of `queries`, in query order.
    pub fn knn_batch(&self, queries: &DMatrix<f64>, k: usize) -> Result<Vec<Vec<u32>>> {
        let d = queries.nrows();
        (0..queries.ncols())
            .into_par_iter()
            .map(|q| {
                let col = &queries.as_slice()[q * d..(q + 1) * d];
                Ok(self.top_k(col, k)?.into_iter().map(|(_, i)| i).collect())
            })
            .collect()
    }
}

/// `θ_t(x) = |sgn x_t|`: 1 when the client has a nonzero amount in `t`.
pub fn theta(table: &TransactionTable, category: usize) -> Result<Vec<u8>> {
    if category >= table.n_categories() {
        return Err(Error::InvalidArgument(format!("category {category} out of range")));
    }
    Ok(table
        .column(category)
        .into_iter()
        .map(|v| u8::from(v.is_some_and(|x| x != 0.0)))
        .collect())
}

/// `μ_M(x)`: 1 when any descriptor in `m` has a nonzero amount.
pub fn mu_relevance(row: &[Option<f64>], m: &[usize]) -> Result<u8> {
    if m.is_empty() {
        return Err(Error::InvalidArgument("descriptor set must be non-empty".into()));
    }
    let mut hit = false;
    for &d in m {
        let v = row
            .get(d)
            .ok_or_else(|| Error::InvalidArgument(format!("descriptor {d} out of range for {} columns", row.len())))?;
        hit |= v.is_some_and(|x| x != 0.0);
    }
    Ok(u8::from(hit))
}

pub fn mu_labels(table: &TransactionTable, m: &[usize]) -> Result<Vec<u8>> {
    table.rows().map(|r| mu_relevance(r, m)).collect()
}

/// Mean label over the `k` nearest database entries.
pub fn predict_theta(index: &NeighborIndex, labels: &[u8], query: &[f64], k: usize) -> Result<f64> {
    if labels.len() != index.len() {
        return Err(Error::DimensionMismatch {
            expected: index.len(),
            found: labels.len(),
        });
    }
    if k == 0 {
        return Err(Error::InvalidArgument("k must be positive".into()));
    }
    let nn = index.top_k(query, k)?;
    Ok(nn.iter().map(|&(_, i)| labels[i as usize] as f64).sum::<f64>() / k as f64)
}

/// Ranking of item indices by descending score, ties by ascending index.
pub fn rank(scores: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    order
}

/// AP of a relevance sequence already in rank order; `None` when nothing is
/// relevant.
pub fn ranked_ap<I: IntoIterator<Item = bool>>(ranked: I) -> Option<f64> {
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (r, rel) in ranked.into_iter().enumerate() {
        if rel {
            hits += 1;
            sum += hits as f64 / (r + 1) as f64;
        }
    }
    (hits > 0).then(|| sum / hits as f64)
}

pub fn average_precision(scores: &[f64], relevance: &[u8]) -> Result<f64> {
    if scores.len() != relevance.len() {
        return Err(Error::DimensionMismatch {
            expected: scores.len(),
            found: relevance.len(),
        });
    }
    ranked_ap(rank(scores).into_iter().map(|i| relevance[i] != 0)).ok_or(Error::UndefinedAp)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrecisionAt {
    pub value: f64,
    pub cutoff: usize,
    /// Items actually ranked: `min(cutoff, n)`.
    pub evaluated: usize,
    pub truncated: bool,
}

pub fn precision_at(scores: &[f64], relevance: &[u8], cutoff: usize) -> Result<PrecisionAt> {
    if cutoff == 0 {
        return Err(Error::InvalidArgument("cutoff must be at least 1".into()));
    }
    if scores.len() != relevance.len() {
        return Err(Error::DimensionMismatch {
            expected: scores.len(),
            found: relevance.len(),
        });
    }
    let evaluated = cutoff.min(scores.len());
    let hits = rank(scores).into_iter().take(evaluated).filter(|&i| relevance[i] != 0).count();
    Ok(PrecisionAt {
        value: if evaluated == 0 { 0.0 } else { hits as f64 / evaluated as f64 },
        cutoff,
        evaluated,
        truncated: evaluated < cutoff,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapAtK {
    pub k: usize,
    /// Mean AP with zero-relevant queries counted as 0.
    pub map: f64,
    /// Queries whose k-list held no relevant item.
    pub zero_relevant: usize,
    pub queries: usize,
}

impl MapAtK {
    /// Mean over only the queries that had a relevant neighbor.
    pub fn map_excluding_zero(&self) -> f64 {
        let kept = self.queries - self.zero_relevant;
        if kept == 0 {
            0.0
        } else {
            self.map * self.queries as f64 / kept as f64
        }
    }
}

fn map_from_lists(lists: &[Vec<u32>], relevance: &[u8], ks: &[usize]) -> Vec<MapAtK> {
    ks.iter()
        .map(|&k| {
            let aps: Vec<Option<f64>> = lists
                .par_iter()
                .map(|l| ranked_ap(l.iter().take(k).map(|&i| relevance[i as usize] != 0)))
                .collect();
            let zero = aps.iter().filter(|a| a.is_none()).count();
            let sum: f64 = aps.iter().map(|a| a.unwrap_or(0.0)).sum();
            MapAtK {
                k,
                map: if lists.is_empty() { 0.0 } else { sum / lists.len() as f64 },
                zero_relevant: zero,
                queries: lists.len(),
            }
        })
        .collect()
}

fn check_ks(ks: &[usize], n: usize) -> Result<usize> {
    if ks.is_empty() || ks.contains(&0) {
        return Err(Error::InvalidArgument("k values must be positive and non-empty".into()));
    }
    let max = *ks.iter().max().expect("non-empty");
    if max > n {
        return Err(Error::InvalidArgument(format!("k={max} exceeds database size {n}")));
    }
    Ok(max)
}

/// MAP@k for each k: mean over queries of the AP inside each query's own
/// k-neighbor list.
pub fn map_at_k(queries: &DMatrix<f64>, index: &NeighborIndex, relevance: &[u8], ks: &[usize]) -> Result<Vec<MapAtK>> {
    if queries.ncols() == 0 {
        return Err(Error::InvalidArgument("at least one query is required".into()));
    }
    if relevance.len() != index.len() {
        return Err(Error::DimensionMismatch {
            expected: index.len(),
            found: relevance.len(),
        });
    }
    let max = check_ks(ks, index.len())?;
    let lists = index.knn_batch(queries, max)?;
    Ok(map_from_lists(&lists, relevance, ks))
}

/// MAP@k when every query receives a uniformly random k-subset of the
/// database in random order.
pub fn random_map_at_k(relevance: &[u8], n_queries: usize, ks: &[usize], seed: u64) -> Result<Vec<MapAtK>> {
    let max = check_ks(ks, relevance.len())?;
    let lists: Vec<Vec<u32>> = (0..n_queries)
        .into_par_iter()
        .map(|q| {
            let mut rng = seed::rng(seed::derive_indexed(seed, "random_map/query", q as u64));
            index::sample(&mut rng, relevance.len(), max).into_iter().map(|i| i as u32).collect()
        })
        .collect();
    Ok(map_from_lists(&lists, relevance, ks))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub k: usize,
    /// Distinct relevant items in the union of all top-k lists, over all
    /// relevant database items.
    pub recall: f64,
    /// `R(k)`: distinct database items in the union.
    pub retrieved: usize,
    /// `r(k) = R(k) / |D|`.
    pub diversity: f64,
}

/// Pooled recall and diversity at each depth, from neighbor lists at least
/// as long as the largest depth.
pub fn curves(lists: &[Vec<u32>], relevance: &[u8], depths: &[usize]) -> Result<Vec<CurvePoint>> {
    let n = relevance.len();
    if let Some(&k) = depths.iter().find(|&&k| k == 0 || lists.iter().any(|l| l.len() < k)) {
        return Err(Error::InvalidArgument(format!("depth {k} is zero or longer than a neighbor list")));
    }
    let mut first = vec![usize::MAX; n];
    for l in lists {
        for (r, &i) in l.iter().enumerate() {
            let f = &mut first[i as usize];
            *f = (*f).min(r);
        }
    }
    let total_relevant = relevance.iter().filter(|&&r| r != 0).count();
    Ok(depths
        .iter()
        .map(|&k| {
            let mut retrieved = 0;
            let mut hits = 0;
            for (i, &f) in first.iter().enumerate() {
                if f < k {
                    retrieved += 1;
                    hits += usize::from(relevance[i] != 0);
                }
            }
            CurvePoint {
                k,
                recall: if total_relevant == 0 { 0.0 } else { hits as f64 / total_relevant as f64 },
                retrieved,
                diversity: if n == 0 { 0.0 } else { retrieved as f64 / n as f64 },
            }
        })
        .collect())
}

pub fn recall_curve(
    queries: &DMatrix<f64>,
    index: &NeighborIndex,
    relevance: &[u8],
    depths: &[usize],
) -> Result<Vec<CurvePoint>> {
    let max = check_ks(depths, index.len())?;
    curves(&index.knn_batch(queries, max)?, relevance, depths)
}

/// Everything `retrieve` reports for one query set against one database.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievalReport {
    pub similarity: Similarity,
    pub queries: usize,
    pub database: usize,
    pub relevant: usize,
    pub map: Vec<MapAtK>,
    pub curve: Vec<CurvePoint>,
}

pub fn evaluate_retrieval(
    queries: &DMatrix<f64>,
    index: &NeighborIndex,
    relevance: &[u8],
    ks: &[usize],
    depths: &[usize],
) -> Result<RetrievalReport> {
    if relevance.len() != index.len() {
        return Err(Error::DimensionMismatch {
            expected: index.len(),
            found: relevance.len(),
        });
    }
    if queries.ncols() == 0 {
        return Err(Error::InvalidArgument("at least one query is required".into()));
    }
    let max = check_ks(ks, index.len())?.max(check_ks(depths, index.len())?);
    let lists = index.knn_batch(queries, max)?;
    Ok(RetrievalReport {
        similarity: index.similarity(),
        queries: queries.ncols(),
        database: index.len(),
        relevant: relevance.iter().filter(|&&r| r != 0).count(),
        map: map_from_lists(&lists, relevance, ks),
        curve: curves(&lists, relevance, depths)?,
    })
}

impl RetrievalReport {
    /// `metric,k,value` rows after `# key = value` provenance lines.
    pub fn write_csv<W: Write>(&self, mut w: W, provenance: &[(String, String)]) -> std::io::Result<()> {
        for (k, v) in provenance {
            writeln!(w, "# {k} = {v}")?;
        }
        writeln!(w, "metric,k,value")?;
        for m in &self.map {
            writeln!(w, "map,{},{}", m.k, m.map)?;
            writeln!(w, "map_excluding_zero,{},{}", m.k, m.map_excluding_zero())?;
            writeln!(w, "zero_relevant_queries,{},{}", m.k, m.zero_relevant)?;
        }
        for c in &self.curve {
            writeln!(w, "recall,{},{}", c.k, c.recall)?;
            writeln!(w, "retrieved,{},{}", c.k, c.retrieved)?;
            writeln!(w, "diversity,{},{}", c.k, c.diversity)?;
        }
        Ok(())
    }

    /// Two-column curve file: `k,<column>`.
    pub fn write_curve<W: Write>(&self, mut w: W, column: &str) -> std::io::Result<()> {
        writeln!(w, "k,{column}")?;
        for c in &self.curve {
            match column {
                "recall" => writeln!(w, "{},{}", c.k, c.recall)?,
                _ => writeln!(w, "{},{}", c.k, c.diversity)?,
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryScore {
    pub category: String,
    pub ap: f64,
    pub p_at_100: PrecisionAt,
    pub positives: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MissingCategoryReport {
    pub method: String,
    pub k: usize,
    pub similarity: Similarity,
    pub categories: Vec<CategoryScore>,
    pub mean_ap: f64,
    pub mean_p_at_100: f64,
}

impl MissingCategoryReport {
    pub fn write_csv<W: Write>(&self, mut w: W, provenance: &[(String, String)]) -> std::io::Result<()> {
        for (k, v) in provenance {
            writeln!(w, "# {k} = {v}")?;
        }
        writeln!(w, "# method = {}", self.method)?;
        writeln!(w, "# k = {}", self.k)?;
        writeln!(w, "category,ap,p_at_100,p_evaluated,p_truncated,positives")?;
        for c in &self.categories {
            writeln!(
                w,
                "{},{},{},{},{},{}",
                c.category, c.ap, c.p_at_100.value, c.p_at_100.evaluated, c.p_at_100.truncated, c.positives
            )?;
        }
        writeln!(w, "mean,{},{},,,", self.mean_ap, self.mean_p_at_100)
    }
}

/// Missing-category prediction: for each target `t`, fit the method on the
/// training clients with `t` removed, score every evaluation client by the
/// share of its `k` nearest training clients that transacted in `t`, and
/// rank evaluation clients by that score.
pub fn missing_category(
    train: &TransactionTable,
    eval: &TransactionTable,
    method: &Method,
    targets: &[usize],
    k: usize,
    similarity: Similarity,
) -> Result<MissingCategoryReport> {
    if targets.is_empty() {
        return Err(Error::InvalidArgument("at least one target category is required".into()));
    }
    if train.labels() != eval.labels() {
        return Err(Error::InvalidArgument("train and evaluation tables have different categories".into()));
    }
    let mut categories = Vec::with_capacity(targets.len());
    for &t in targets {
        let train_t = train.drop_column(t)?;
        let eval_t = eval.drop_column(t)?;
        let fitted = method.fit(&train_t)?;
        let index = NeighborIndex::from_embeddings(&fitted.embed(&train_t)?, similarity);
        let queries = fitted.embed(&eval_t)?;
        let labels = theta(train, t)?;
        let truth = theta(eval, t)?;
        let lists = index.knn_batch(queries.matrix(), k)?;
        let scores: Vec<f64> = lists
            .iter()
            .map(|l| l.iter().map(|&i| labels[i as usize] as f64).sum::<f64>() / k as f64)
            .collect();
        categories.push(CategoryScore {
            category: train.categories()[t].label.clone(),
            ap: average_precision(&scores, &truth)?,
            p_at_100: precision_at(&scores, &truth, 100)?,
            positives: truth.iter().filter(|&&x| x != 0).count(),
        });
    }
    let n = categories.len() as f64;
    Ok(MissingCategoryReport {
        method: method.tag(),
        k,
        similarity,
        mean_ap: categories.iter().map(|c| c.ap).sum::<f64>() / n,
        mean_p_at_100: categories.iter().map(|c| c.p_at_100.value).sum::<f64>() / n,
        categories,
    })
}
