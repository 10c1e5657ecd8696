//! Skip-gram with negative sampling over unordered client bags.
//!
//! Bags carry no order, so the context of a token occurrence is up to
//! `window` other occurrences drawn uniformly without replacement from the
//! same bag. Negatives come from the unigram distribution raised to 0.75.

use std::io::{BufRead, Write};

use nalgebra::DMatrix;
use rand::seq::{index, SliceRandom};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::bins::TokenCorpus;
use crate::error::{Error, Result};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct W2vConfig {
    pub embed_dim: usize,
    pub window: usize,
    pub negatives: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub seed: u64,
    /// 1 = sequential SGD. More workers train shards in parallel and
    /// average their parameters after every epoch.
    #[serde(default = "one")]
    pub workers: usize,
}

fn one() -> usize {
    1
}

impl Default for W2vConfig {
    fn default() -> Self {
        Self {
            embed_dim: 32,
            window: 5,
            negatives: 5,
            epochs: 5,
            learning_rate: 0.025,
            seed: 0,
            workers: 1,
        }
    }
}

impl W2vConfig {
    fn validate(&self) -> Result<()> {
        if self.embed_dim == 0 || self.window == 0 || self.negatives == 0 || self.epochs == 0 || self.workers == 0 {
            return Err(Error::Config("skip-gram dimensions, window, negatives, epochs and workers must be positive".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config("learning rate must be positive".into()));
        }
        Ok(())
    }
}

/// Learned token vectors, `dim × vocab`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenVectors {
    pub labels: Vec<String>,
    pub vectors: DMatrix<f64>,
}

impl TokenVectors {
    pub fn dim(&self) -> usize {
        self.vectors.nrows()
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn vector(&self, id: u32) -> &[f64] {
        let d = self.dim();
        &self.vectors.as_slice()[id as usize * d..(id as usize + 1) * d]
    }

    /// `label v1 v2 ... vd` per line.
    pub fn write_text<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for (i, label) in self.labels.iter().enumerate() {
            write!(w, "{label}")?;
            for v in self.vector(i as u32) {
                write!(w, " {v}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }

    pub fn read_text<R: BufRead>(r: R) -> Result<Self> {
        let mut labels = Vec::new();
        let mut data = Vec::new();
        let mut dim = None;
        for (row, line) in r.lines().enumerate() {
            let line = line.map_err(|e| Error::Parse {
                row: row + 1,
                column: 0,
                message: e.to_string(),
            })?;
            let mut parts = line.split_whitespace();
            let Some(label) = parts.next() else { continue };
            let values = parts
                .enumerate()
                .map(|(c, s)| {
                    s.parse::<f64>().map_err(|_| Error::Parse {
                        row: row + 1,
                        column: c + 2,
                        message: format!("not a number: {s:?}"),
                    })
                })
                .collect::<Result<Vec<f64>>>()?;
            if *dim.get_or_insert(values.len()) != values.len() {
                return Err(Error::Parse {
                    row: row + 1,
                    column: values.len() + 1,
                    message: "inconsistent vector length".into(),
                });
            }
            labels.push(label.to_owned());
            data.extend(values);
        }
        let dim = dim.unwrap_or(0);
        let n = labels.len();
        Ok(Self {
            labels,
            vectors: DMatrix::from_vec(dim, n, data),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SgnsGrad {
    pub loss: f64,
    pub center: Vec<f64>,
    pub context: Vec<f64>,
    pub negatives: Vec<Vec<f64>>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^z)` without overflow.
fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

/// Loss `-ln σ(c·u) - Σ ln σ(-c·n)` of one (center, context) pair and its
/// gradient with respect to the center input vector `c`, the context output
/// vector `u` and each negative output vector `n`.
pub fn sgns_loss_grad(center: &[f64], context: &[f64], negatives: &[&[f64]]) -> SgnsGrad {
    let s = dot(center, context);
    let mut loss = softplus(-s);
    let g_pos = sigmoid(s) - 1.0;
    let mut d_center: Vec<f64> = context.iter().map(|u| g_pos * u).collect();
    let d_context: Vec<f64> = center.iter().map(|c| g_pos * c).collect();
    let mut d_neg = Vec::with_capacity(negatives.len());
    for n in negatives {
        let t = dot(center, n);
        loss += softplus(t);
        let g = sigmoid(t);
        for (dc, nv) in d_center.iter_mut().zip(n.iter()) {
            *dc += g * nv;
        }
        d_neg.push(center.iter().map(|c| g * c).collect());
    }
    SgnsGrad {
        loss,
        center: d_center,
        context: d_context,
        negatives: d_neg,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainStats {
    /// Mean pair loss per epoch.
    pub epoch_loss: Vec<f64>,
}

#[derive(Clone)]
struct Params {
    input: Vec<f64>,
    output: Vec<f64>,
}

struct NegativeSampler {
    cumulative: Vec<f64>,
}

impl NegativeSampler {
    fn new(counts: &[u64]) -> Self {
        let cumulative = counts
            .iter()
            .scan(0.0, |acc, &c| {
                *acc += (c as f64).powf(0.75);
                Some(*acc)
            })
            .collect();
        Self { cumulative }
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> u32 {
        let total = *self.cumulative.last().expect("non-empty vocabulary");
        let r = rng.random::<f64>() * total;
        self.cumulative.partition_point(|&c| c <= r).min(self.cumulative.len() - 1) as u32
    }
}

struct Schedule {
    lr0: f64,
    total: f64,
}

impl Schedule {
    fn at(&self, done: f64) -> f64 {
        self.lr0 * (1.0 - done / self.total).max(1e-4)
    }
}

#[allow(clippy::too_many_arguments)]
fn train_shard(
    params: &mut Params,
    bags: &[&[u32]],
    cfg: &W2vConfig,
    sampler: &NegativeSampler,
    rng: &mut ChaCha8Rng,
    schedule: &Schedule,
    done: &mut f64,
) -> (f64, usize) {
    let d = cfg.embed_dim;
    let mut order: Vec<usize> = (0..bags.len()).collect();
    order.shuffle(rng);
    let mut loss = 0.0;
    let mut pairs = 0usize;
    let mut negs: Vec<u32> = Vec::with_capacity(cfg.negatives);
    for &b in &order {
        let bag = bags[b];
        let len = bag.len();
        if len < 2 {
            *done += len as f64;
            continue;
        }
        for i in 0..len {
            let lr = schedule.at(*done);
            let n_ctx = cfg.window.min(len - 1);
            for j in index::sample(rng, len - 1, n_ctx) {
                let j = if j >= i { j + 1 } else { j };
                let (center, context) = (bag[i] as usize, bag[j] as usize);
                negs.clear();
                for _ in 0..cfg.negatives {
                    let n = sampler.sample(rng);
                    if n as usize != context {
                        negs.push(n);
                    }
                }
                let c_vec = params.input[center * d..(center + 1) * d].to_vec();
                let u_vec = params.output[context * d..(context + 1) * d].to_vec();
                let n_vecs: Vec<Vec<f64>> = negs
                    .iter()
                    .map(|&n| params.output[n as usize * d..(n as usize + 1) * d].to_vec())
                    .collect();
                let n_refs: Vec<&[f64]> = n_vecs.iter().map(Vec::as_slice).collect();
                let g = sgns_loss_grad(&c_vec, &u_vec, &n_refs);
                loss += g.loss;
                pairs += 1;
                for (p, gv) in params.input[center * d..(center + 1) * d].iter_mut().zip(&g.center) {
                    *p -= lr * gv;
                }
                for (p, gv) in params.output[context * d..(context + 1) * d].iter_mut().zip(&g.context) {
                    *p -= lr * gv;
                }
                for (&n, gn) in negs.iter().zip(&g.negatives) {
                    let n = n as usize;
                    for (p, gv) in params.output[n * d..(n + 1) * d].iter_mut().zip(gn) {
                        *p -= lr * gv;
                    }
                }
            }
            *done += 1.0;
        }
    }
    (loss, pairs)
}

/// Train token input vectors over the corpus.
pub fn train_skipgram(corpus: &TokenCorpus, cfg: &W2vConfig) -> Result<(TokenVectors, TrainStats)> {
    cfg.validate()?;
    let vocab = corpus.vocabulary.len();
    if vocab == 0 {
        return Err(Error::InvalidArgument("empty vocabulary".into()));
    }
    let max_bag = corpus.max_bag_len();
    if cfg.window > max_bag {
        return Err(Error::InvalidArgument(format!(
            "window {} is larger than every bag (largest has {max_bag} tokens)",
            cfg.window
        )));
    }
    let d = cfg.embed_dim;
    let mut counts = vec![0u64; vocab];
    for &t in corpus.bags.iter().flatten() {
        counts[t as usize] += 1;
    }
    let sampler = NegativeSampler::new(&counts);
    let mut init_rng = seed::rng(seed::derive_seed(cfg.seed, "skipgram/init"));
    let mut params = Params {
        input: (0..vocab * d).map(|_| (init_rng.random::<f64>() - 0.5) / d as f64).collect(),
        output: vec![0.0; vocab * d],
    };

    let workers = cfg.workers.min(corpus.bags.len().max(1));
    let shards: Vec<Vec<&[u32]>> = (0..workers)
        .map(|w| corpus.bags.iter().skip(w).step_by(workers).map(Vec::as_slice).collect())
        .collect();
    let mut epoch_loss = Vec::with_capacity(cfg.epochs);
    let mut done = vec![0.0; workers];
    for epoch in 0..cfg.epochs {
        let results: Vec<(Params, f64, usize, f64)> = shards
            .par_iter()
            .enumerate()
            .map(|(w, shard)| {
                let mut local = params.clone();
                let mut rng = seed::rng(seed::derive_indexed(
                    cfg.seed,
                    "skipgram/epoch",
                    (epoch * workers + w) as u64,
                ));
                let shard_tokens: usize = shard.iter().map(|b| b.len()).sum();
                let schedule = Schedule {
                    lr0: cfg.learning_rate,
                    total: (shard_tokens * cfg.epochs).max(1) as f64,
                };
                let mut shard_done = done[w];
                let (loss, pairs) = train_shard(&mut local, shard, cfg, &sampler, &mut rng, &schedule, &mut shard_done);
                (local, loss, pairs, shard_done)
            })
            .collect();
        let total_pairs: usize = results.iter().map(|r| r.2).sum();
        epoch_loss.push(results.iter().map(|r| r.1).sum::<f64>() / total_pairs.max(1) as f64);
        for (w, r) in results.iter().enumerate() {
            done[w] = r.3;
        }
        if workers == 1 {
            params = results.into_iter().next().expect("one worker").0;
        } else {
            let inv = 1.0 / workers as f64;
            for (k, p) in params.input.iter_mut().enumerate() {
                *p = results.iter().map(|r| r.0.input[k]).sum::<f64>() * inv;
            }
            for (k, p) in params.output.iter_mut().enumerate() {
                *p = results.iter().map(|r| r.0.output[k]).sum::<f64>() * inv;
            }
        }
    }
    Ok((
        TokenVectors {
            labels: corpus.vocabulary.clone(),
            vectors: DMatrix::from_vec(d, vocab, params.input),
        },
        TrainStats { epoch_loss },
    ))
}
