//! Uniform fit/embed interface over every embedding method.

use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::embedding::EmbeddingSet;
use crate::error::{Error, Result};
use crate::msda::{MsdaConfig, MsdaModel};
use crate::preprocess::{raw_embedding, PreprocSpec, SociodemoEncoder};
use crate::table::{SociodemoTable, TransactionTable};
use crate::tokens::{TokenConfig, TokenModel};

pub const DEFAULT_SOCIODEMO_DIM: usize = 16;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum MethodConfig {
    Raw { preproc: PreprocSpec },
    Msda(MsdaConfig),
    Sociodemo { dim: usize },
    W2v(TokenConfig),
}

impl MethodConfig {
    pub fn tag(&self) -> String {
        match self {
            MethodConfig::Raw { preproc } => format!("raw:{preproc}"),
            MethodConfig::Msda(c) => c.tag(),
            MethodConfig::Sociodemo { dim } => format!("sociodemo:dim={dim}"),
            MethodConfig::W2v(c) => c.tag(),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            MethodConfig::Raw { .. } => "raw",
            MethodConfig::Msda(_) => "msda",
            MethodConfig::Sociodemo { .. } => "sociodemo",
            MethodConfig::W2v(_) => "w2v",
        }
    }
}

impl fmt::Display for MethodConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.tag())
    }
}

/// A method configuration plus any side data it needs. The sociodemographic
/// method ignores transactions and looks clients up by id.
#[derive(Debug, Clone)]
pub struct Method {
    pub config: MethodConfig,
    sociodemo: Option<Arc<SociodemoTable>>,
}

impl Method {
    pub fn new(config: MethodConfig) -> Self {
        Self { config, sociodemo: None }
    }

    pub fn with_sociodemo(config: MethodConfig, table: Arc<SociodemoTable>) -> Self {
        Self {
            config,
            sociodemo: Some(table),
        }
    }

    pub fn raw(preproc: PreprocSpec) -> Self {
        Self::new(MethodConfig::Raw { preproc })
    }

    pub fn msda(config: MsdaConfig) -> Self {
        Self::new(MethodConfig::Msda(config))
    }

    pub fn w2v(config: TokenConfig) -> Self {
        Self::new(MethodConfig::W2v(config))
    }

    pub fn tag(&self) -> String {
        self.config.tag()
    }

    pub fn fit(&self, train: &TransactionTable) -> Result<Fitted> {
        Ok(match &self.config {
            MethodConfig::Raw { preproc } => Fitted::Raw(*preproc),
            MethodConfig::Msda(cfg) => Fitted::Msda(MsdaModel::train(train, *cfg)?),
            MethodConfig::W2v(cfg) => Fitted::W2v(TokenModel::train(train, cfg)?.0),
            MethodConfig::Sociodemo { dim } => {
                let table = self
                    .sociodemo
                    .clone()
                    .ok_or_else(|| Error::Config("sociodemo method needs a sociodemographic table".into()))?;
                let index: HashMap<String, usize> = table
                    .client_ids()
                    .iter()
                    .enumerate()
                    .map(|(i, id)| (id.clone(), i))
                    .collect();
                let rows = lookup(&index, train.client_ids())?;
                let encoder = SociodemoEncoder::fit(&table.select_rows(&rows)?, *dim)?;
                Fitted::Sociodemo {
                    encoder,
                    table,
                    index,
                }
            }
        })
    }

    /// Fit on `table` and embed the same clients.
    pub fn fit_embed(&self, table: &TransactionTable) -> Result<EmbeddingSet> {
        self.fit(table)?.embed(table)
    }
}

fn lookup(index: &HashMap<String, usize>, ids: &[String]) -> Result<Vec<usize>> {
    ids.iter()
        .map(|id| {
            index
                .get(id)
                .copied()
                .ok_or_else(|| Error::InvalidArgument(format!("client {id:?} has no sociodemographic record")))
        })
        .collect()
}

#[derive(Debug, Clone)]
pub enum Fitted {
    Raw(PreprocSpec),
    Msda(MsdaModel),
    W2v(TokenModel),
    Sociodemo {
        encoder: SociodemoEncoder,
        table: Arc<SociodemoTable>,
        index: HashMap<String, usize>,
    },
}

impl Fitted {
    pub fn embed(&self, table: &TransactionTable) -> Result<EmbeddingSet> {
        match self {
            Fitted::Raw(p) => raw_embedding(table, *p),
            Fitted::Msda(m) => m.embed(table),
            Fitted::W2v(m) => m.embed(table),
            Fitted::Sociodemo { encoder, table: sd, index } => {
                let rows = lookup(index, table.client_ids())?;
                encoder.transform(&sd.select_rows(&rows)?)
            }
        }
    }
}
