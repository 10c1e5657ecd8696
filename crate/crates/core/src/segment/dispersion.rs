//! Leave-one-category-out dispersion Δ(E).
//!
//! For each target category `t`, drop column `t`, embed the remaining table,
//! cluster the embeddings and measure how spread the held-out values `x_t`
//! are inside each cluster (population standard deviation, absent = 0).
//! The per-target score is the median spread over non-empty clusters and Δ
//! is the mean of those medians. Lower means more homogeneous segments.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::kmeans::{kmeans, KMeansConfig};
use crate::error::{Error, Result};
use crate::methods::Method;
use crate::seed;
use crate::table::TransactionTable;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DispersionConfig {
    pub k: usize,
    pub seed: u64,
    pub max_iter: usize,
    pub tol: f64,
}

impl DispersionConfig {
    pub fn new(k: usize, seed: u64) -> Self {
        let base = KMeansConfig::new(k, seed);
        Self {
            k,
            seed,
            max_iter: base.max_iter,
            tol: base.tol,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetSpread {
    pub category: String,
    pub median_std: f64,
    pub clusters: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DispersionReport {
    pub method: String,
    pub config: DispersionConfig,
    /// Always "population": spreads divide by the cluster size.
    pub std_kind: String,
    pub targets: Vec<TargetSpread>,
    pub delta: f64,
}

impl DispersionReport {
    /// Provenance as `# key = value` lines, then `target,median_std,clusters`
    /// rows and a final `delta` row.
    pub fn write_csv<W: Write>(&self, mut w: W, provenance: &[(String, String)]) -> std::io::Result<()> {
        for (k, v) in provenance {
            writeln!(w, "# {k} = {v}")?;
        }
        writeln!(w, "# method = {}", self.method)?;
        writeln!(w, "# k = {}", self.config.k)?;
        writeln!(w, "# seed = {}", self.config.seed)?;
        writeln!(w, "# max_iter = {}", self.config.max_iter)?;
        writeln!(w, "# tol = {}", self.config.tol)?;
        writeln!(w, "# std = {}", self.std_kind)?;
        writeln!(w, "target,median_std,clusters")?;
        for t in &self.targets {
            writeln!(w, "{},{},{}", t.category, t.median_std, t.clusters)?;
        }
        writeln!(w, "delta,{},", self.delta)
    }
}

fn population_std(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n).sqrt()
}

fn median(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

/// Median over non-empty clusters of the population std of `values` within
/// each cluster. Returns the median and the number of non-empty clusters.
pub fn median_cluster_spread(values: &[f64], assignments: &[usize], k: usize) -> Result<(f64, usize)> {
    if values.len() != assignments.len() {
        return Err(Error::DimensionMismatch {
            expected: values.len(),
            found: assignments.len(),
        });
    }
    let mut members: Vec<Vec<f64>> = vec![Vec::new(); k];
    for (&v, &a) in values.iter().zip(assignments) {
        members
            .get_mut(a)
            .ok_or_else(|| Error::InvalidArgument(format!("cluster index {a} out of range for k={k}")))?
            .push(v);
    }
    let mut spreads: Vec<f64> = members.iter().filter(|m| !m.is_empty()).map(|m| population_std(m)).collect();
    if spreads.is_empty() {
        return Err(Error::InvalidArgument("no non-empty clusters".into()));
    }
    spreads.sort_by(f64::total_cmp);
    Ok((median(&spreads), spreads.len()))
}

/// Δ for `method` over the given target columns of `table`, fitting and
/// clustering the same clients.
pub fn dispersion(
    table: &TransactionTable,
    method: &Method,
    targets: &[usize],
    config: &DispersionConfig,
) -> Result<DispersionReport> {
    dispersion_split(table, table, method, targets, config)
}

/// Δ with the method fitted on `fit` and the clustering and spreads
/// computed on `eval`.
pub fn dispersion_split(
    fit: &TransactionTable,
    eval: &TransactionTable,
    method: &Method,
    targets: &[usize],
    config: &DispersionConfig,
) -> Result<DispersionReport> {
    if targets.is_empty() {
        return Err(Error::InvalidArgument("dispersion needs at least one target category".into()));
    }
    if config.k == 0 || config.k > eval.n_clients() {
        return Err(Error::InvalidArgument(format!(
            "k={} must be in 1..={}",
            config.k,
            eval.n_clients()
        )));
    }
    if fit.labels() != eval.labels() {
        return Err(Error::InvalidArgument("fit and evaluation tables have different categories".into()));
    }
    if let Some(&t) = targets.iter().find(|&&t| t >= eval.n_categories()) {
        return Err(Error::InvalidArgument(format!("target category {t} out of range")));
    }
    let same = std::ptr::eq(fit, eval);
    let spreads = targets
        .par_iter()
        .map(|&t| {
            let eval_t = eval.drop_column(t)?;
            let emb = if same {
                method.fit_embed(&eval_t)?
            } else {
                method.fit(&fit.drop_column(t)?)?.embed(&eval_t)?
            };
            let km = KMeansConfig {
                k: config.k,
                seed: seed::derive_indexed(config.seed, "dispersion/target", t as u64),
                max_iter: config.max_iter,
                tol: config.tol,
            };
            let clustering = kmeans(emb.matrix(), &km)?;
            let values: Vec<f64> = eval.column(t).into_iter().map(|v| v.unwrap_or(0.0)).collect();
            let (median_std, clusters) = median_cluster_spread(&values, &clustering.assignments, config.k)?;
            Ok(TargetSpread {
                category: eval.categories()[t].label.clone(),
                median_std,
                clusters,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let delta = spreads.iter().map(|s| s.median_std).sum::<f64>() / spreads.len() as f64;
    Ok(DispersionReport {
        method: method.tag(),
        config: *config,
        std_kind: "population".into(),
        targets: spreads,
        delta,
    })
}
