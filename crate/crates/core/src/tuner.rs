//! Exhaustive grid search over embedding hyperparameters.
//!
//! Combinations are enumerated in lexicographic grid order (the last axis
//! varies fastest), each is fitted on the training table and scored on the
//! validation table. The leaderboard is stably sorted by score, so among
//! equal scores the earliest grid position wins.

use std::io::Write;
use std::sync::Arc;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::methods::{Method, MethodConfig};
use crate::msda::{MsdaConfig, Ridge};
use crate::preprocess::PreprocSpec;
use crate::retrieval::{map_at_k, missing_category, mu_labels, NeighborIndex, Similarity};
use crate::segment::dispersion::{dispersion_split, DispersionConfig};
use crate::table::{SociodemoTable, TransactionTable};
use crate::tokens::TokenConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodKind {
    Msda,
    Raw,
    W2v,
}

impl std::str::FromStr for MethodKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "msda" => Ok(MethodKind::Msda),
            "raw" => Ok(MethodKind::Raw),
            "w2v" => Ok(MethodKind::W2v),
            _ => Err(Error::Config(format!("unknown tunable method {s:?}; expected msda, raw or w2v"))),
        }
    }
}

/// Axis values. Only the axes relevant to the tuned method are used.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Grid {
    pub preproc: Vec<PreprocSpec>,
    pub noise_p: Vec<f64>,
    pub layers: Vec<usize>,
    pub ridge: Vec<Ridge>,
    pub embed_dim: Vec<usize>,
    pub window: Vec<usize>,
}

impl Default for Grid {
    fn default() -> Self {
        let msda = MsdaConfig::default();
        let w2v = TokenConfig::default().w2v;
        Self {
            preproc: vec![msda.preproc],
            noise_p: vec![msda.noise_p],
            layers: vec![msda.n_layers],
            ridge: vec![msda.ridge],
            embed_dim: vec![w2v.embed_dim],
            window: vec![w2v.window],
        }
    }
}

impl Grid {
    /// Every configuration for `kind`, in lexicographic order. `base`
    /// supplies the values of fields the grid does not cover.
    pub fn combinations(&self, kind: MethodKind, base: &BaseConfigs) -> Result<Vec<MethodConfig>> {
        let axes_ok = |name: &str, len: usize| {
            if len == 0 {
                Err(Error::Config(format!("grid axis {name} is empty")))
            } else {
                Ok(())
            }
        };
        let mut out = Vec::new();
        match kind {
            MethodKind::Raw => {
                axes_ok("preproc", self.preproc.len())?;
                out.extend(self.preproc.iter().map(|&p| MethodConfig::Raw { preproc: p }));
            }
            MethodKind::Msda => {
                axes_ok("preproc", self.preproc.len())?;
                axes_ok("noise_p", self.noise_p.len())?;
                axes_ok("layers", self.layers.len())?;
                axes_ok("ridge", self.ridge.len())?;
                for &preproc in &self.preproc {
                    for &noise_p in &self.noise_p {
                        for &n_layers in &self.layers {
                            for &ridge in &self.ridge {
                                out.push(MethodConfig::Msda(MsdaConfig {
                                    preproc,
                                    noise_p,
                                    n_layers,
                                    ridge,
                                    ..base.msda
                                }));
                            }
                        }
                    }
                }
            }
            MethodKind::W2v => {
                axes_ok("embed_dim", self.embed_dim.len())?;
                axes_ok("window", self.window.len())?;
                for &embed_dim in &self.embed_dim {
                    for &window in &self.window {
                        let mut c = base.w2v.clone();
                        c.w2v.embed_dim = embed_dim;
                        c.w2v.window = window;
                        out.push(MethodConfig::W2v(c));
                    }
                }
            }
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct BaseConfigs {
    pub msda: MsdaConfig,
    pub w2v: TokenConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "objective", rename_all = "snake_case")]
pub enum Objective {
    /// Minimize Δ on the validation clients.
    Dispersion { k: usize, targets: Vec<usize> },
    /// Maximize mean missing-category AP on the validation clients.
    MissingAp { k: usize, targets: Vec<usize> },
    /// Maximize MAP@k of validation clients relevant under `descriptors`
    /// used as queries against the training clients.
    MapAtK { k: usize, descriptors: Vec<usize> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Minimize,
    Maximize,
}

impl Objective {
    pub fn name(&self) -> &'static str {
        match self {
            Objective::Dispersion { .. } => "dispersion",
            Objective::MissingAp { .. } => "missing_ap",
            Objective::MapAtK { .. } => "map_at_k",
        }
    }

    pub fn direction(&self) -> Direction {
        match self {
            Objective::Dispersion { .. } => Direction::Minimize,
            _ => Direction::Maximize,
        }
    }

    fn score(&self, train: &TransactionTable, val: &TransactionTable, method: &Method, seed: u64) -> Result<f64> {
        match self {
            Objective::Dispersion { k, targets } => {
                Ok(dispersion_split(train, val, method, targets, &DispersionConfig::new(*k, seed))?.delta)
            }
            Objective::MissingAp { k, targets } => {
                Ok(missing_category(train, val, method, targets, *k, Similarity::Dot)?.mean_ap)
            }
            Objective::MapAtK { k, descriptors } => {
                let fitted = method.fit(train)?;
                let index = NeighborIndex::from_embeddings(&fitted.embed(train)?, Similarity::Dot);
                let relevance = mu_labels(train, descriptors)?;
                let positives: Vec<usize> = mu_labels(val, descriptors)?
                    .iter()
                    .enumerate()
                    .filter(|(_, &r)| r != 0)
                    .map(|(i, _)| i)
                    .collect();
                if positives.is_empty() {
                    return Err(Error::InvalidArgument("no relevant validation clients to use as queries".into()));
                }
                let queries = fitted.embed(&val.select_rows(&positives)?)?;
                Ok(map_at_k(queries.matrix(), &index, &relevance, &[*k])?[0].map)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", content = "detail", rename_all = "snake_case")]
pub enum EntryStatus {
    Ok,
    Failed(String),
    Skipped,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeaderboardEntry {
    pub grid_index: usize,
    pub config: MethodConfig,
    pub score: Option<f64>,
    pub status: EntryStatus,
    pub runtime: Duration,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TunerResult {
    pub method: MethodKind,
    pub objective: Objective,
    pub direction: Direction,
    pub seed: u64,
    /// Scored entries best first, then failed and skipped ones in grid order.
    pub leaderboard: Vec<LeaderboardEntry>,
}

impl TunerResult {
    pub fn best(&self) -> &LeaderboardEntry {
        &self.leaderboard[0]
    }

    /// `rank,grid_index,status,score,config[,runtime_s]`. Runtime is only
    /// written on request because it changes between otherwise identical
    /// runs.
    pub fn write_csv<W: Write>(&self, mut w: W, include_runtime: bool, provenance: &[(String, String)]) -> std::io::Result<()> {
        for (k, v) in provenance {
            writeln!(w, "# {k} = {v}")?;
        }
        writeln!(w, "# objective = {} ({:?})", self.objective.name(), self.direction)?;
        write!(w, "rank,grid_index,status,score,config")?;
        if include_runtime {
            write!(w, ",runtime_s")?;
        }
        writeln!(w)?;
        for (r, e) in self.leaderboard.iter().enumerate() {
            let status = match &e.status {
                EntryStatus::Ok => "ok".to_string(),
                EntryStatus::Failed(m) => format!("failed: {}", m.replace([',', '\n'], ";")),
                EntryStatus::Skipped => "skipped".to_string(),
            };
            let score = e.score.map(|s| s.to_string()).unwrap_or_default();
            write!(w, "{},{},{},{},\"{}\"", r + 1, e.grid_index, status, score, e.config.tag())?;
            if include_runtime {
                write!(w, ",{}", e.runtime.as_secs_f64())?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default)]
pub struct TuneOptions {
    pub seed: u64,
    pub base: BaseConfigs,
    /// Wall-clock limit; combinations not started in time are skipped.
    pub budget: Option<Duration>,
    /// Needed only when a sociodemographic side table is relevant.
    pub sociodemo: Option<Arc<SociodemoTable>>,
}

/// Run the grid. Only training and validation tables enter here.
pub fn tune(
    train: &TransactionTable,
    val: &TransactionTable,
    kind: MethodKind,
    grid: &Grid,
    objective: &Objective,
    options: &TuneOptions,
) -> Result<TunerResult> {
    let configs = grid.combinations(kind, &options.base)?;
    let start = Instant::now();
    let mut entries = Vec::with_capacity(configs.len());
    for (i, mut config) in configs.into_iter().enumerate() {
        if let MethodConfig::W2v(c) = &mut config {
            c.w2v.seed = options.seed;
        }
        if options.budget.is_some_and(|b| start.elapsed() >= b) {
            entries.push(LeaderboardEntry {
                grid_index: i,
                config,
                score: None,
                status: EntryStatus::Skipped,
                runtime: Duration::ZERO,
            });
            continue;
        }
        let method = match &options.sociodemo {
            Some(sd) => Method::with_sociodemo(config.clone(), sd.clone()),
            None => Method::new(config.clone()),
        };
        let t0 = Instant::now();
        let (score, status) = match objective.score(train, val, &method, options.seed) {
            Ok(s) if s.is_finite() => (Some(s), EntryStatus::Ok),
            Ok(s) => (None, EntryStatus::Failed(format!("non-finite score {s}"))),
            Err(e) => (None, EntryStatus::Failed(e.to_string())),
        };
        entries.push(LeaderboardEntry {
            grid_index: i,
            config,
            score,
            status,
            runtime: t0.elapsed(),
        });
    }
    let n_ok = entries.iter().filter(|e| e.status == EntryStatus::Ok).count();
    if n_ok == 0 {
        return Err(Error::AllCombinationsFailed(entries.len()));
    }
    let direction = objective.direction();
    entries.sort_by(|a, b| match (a.score, b.score) {
        (Some(x), Some(y)) => match direction {
            Direction::Minimize => x.total_cmp(&y),
            Direction::Maximize => y.total_cmp(&x),
        },
        (Some(_), None) => std::cmp::Ordering::Less,
        (None, Some(_)) => std::cmp::Ordering::Greater,
        (None, None) => a.grid_index.cmp(&b.grid_index),
    });
    Ok(TunerResult {
        method: kind,
        objective: objective.clone(),
        direction,
        seed: options.seed,
        leaderboard: entries,
    })
}
