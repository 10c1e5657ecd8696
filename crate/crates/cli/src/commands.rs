use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use anyhow::Context;
use clap::Args;
use serde::{Deserialize, Serialize};

use txembed::methods::{Method, MethodConfig, DEFAULT_SOCIODEMO_DIM};
use txembed::msda::{MsdaConfig, MsdaModel, OutputMode, Ridge};
use txembed::retrieval::{self, evaluate_retrieval, mu_labels, random_map_at_k, NeighborIndex, Similarity};
use txembed::segment::{self, dispersion, typical_members, DispersionConfig, KMeansConfig};
use txembed::synth::Preset;
use txembed::table::{split, SplitSpec};
use txembed::tokens::{Pooling, TokenConfig, TokenModel, W2vConfig};
use txembed::tuner::{self, BaseConfigs, Grid, MethodKind, Objective, TuneOptions};
use txembed::{EmbeddingSet, PreprocSpec, SociodemoTable, TransactionTable};

use crate::config::provenance;
use crate::CliError;

pub struct Env {
    pub data_dir: PathBuf,
}

impl Env {
    fn path(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.data_dir.join(p)
        }
    }

    fn required(&self, p: &Option<PathBuf>, flag: &str) -> Result<PathBuf, CliError> {
        p.as_deref()
            .map(|p| self.path(p))
            .ok_or_else(|| CliError::Usage(format!("missing required option --{flag}")))
    }
}

fn parse<T: std::str::FromStr<Err = txembed::Error>>(s: &str) -> Result<T, CliError> {
    s.parse::<T>().map_err(CliError::from)
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
    }
    Ok(BufWriter::new(
        File::create(path).with_context(|| format!("cannot write {}", path.display()))?,
    ))
}

fn write_provenance<W: Write>(w: &mut W, prov: &[(String, String)]) -> std::io::Result<()> {
    for (k, v) in prov {
        writeln!(w, "# {k} = {v}")?;
    }
    Ok(())
}

/// Integer counts written either plainly or in scientific form (`2E4`).
fn parse_count(s: &str) -> Result<usize, CliError> {
    let v: f64 = s
        .trim()
        .parse()
        .map_err(|_| CliError::Usage(format!("not a count: {s:?}")))?;
    if v < 1.0 || v.fract() != 0.0 || v > 1e15 {
        return Err(CliError::Usage(format!("count must be a positive integer, got {s:?}")));
    }
    Ok(v as usize)
}

fn category_indices(table: &TransactionTable, labels: &[String]) -> Result<Vec<usize>, CliError> {
    labels
        .iter()
        .map(|l| {
            table
                .category_index(l)
                .ok_or_else(|| CliError::Usage(format!("unknown category {l:?}")))
        })
        .collect()
}

#[derive(Debug, Args, Serialize, Deserialize)]
pub struct GenArgs {
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, default_value_t = 1000)]
    pub clients: usize,
    #[arg(long, default_value_t = 70)]
    pub categories: usize,
    #[arg(long, default_value_t = 5)]
    pub archetypes: usize,
    /// random, travel or targeting. Named presets fix their own categories.
    #[arg(long, default_value = "random")]
    pub preset: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 0.0)]
    pub sociodemo_correlation: f64,
}

pub fn gen(env: &Env, a: GenArgs) -> Result<(), CliError> {
    let out = a.out.as_deref().map_or_else(|| env.data_dir.clone(), |p| env.path(p));
    let preset = match a.preset.as_str() {
        "random" => Preset::random(a.archetypes, a.categories, a.seed),
        other => Preset::by_name(other, a.categories, a.seed)?,
    };
    let ds = preset.generate(a.clients, a.seed, a.sociodemo_correlation)?;
    ds.save(&out)?;
    println!(
        "wrote {} clients x {} categories to {}",
        ds.transactions.n_clients(),
        ds.transactions.n_categories(),
        out.display()
    );
    Ok(())
}

/// Hyperparameters shared by every command that builds an embedding method.
#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct MethodArgs {
    /// msda, raw, sociodemo or w2v.
    #[arg(long, default_value = "msda")]
    pub method: String,
    /// binarize, l2, log, max, rescale or none.
    #[arg(long, default_value = "log")]
    pub preproc: String,
    #[arg(long, default_value_t = 0.5)]
    pub noise_p: f64,
    #[arg(long, default_value_t = 1)]
    pub layers: usize,
    /// auto, auto:<scale> or a fixed value.
    #[arg(long, default_value = "auto")]
    pub ridge: String,
    /// last_layer or concat_all.
    #[arg(long, default_value = "last_layer")]
    pub output_mode: String,
    #[arg(long, default_value_t = DEFAULT_SOCIODEMO_DIM)]
    pub sociodemo_dim: usize,
    #[arg(long, default_value_t = 10)]
    pub n_bins: usize,
    #[arg(long, default_value_t = 32)]
    pub embed_dim: usize,
    #[arg(long, default_value_t = 5)]
    pub window: usize,
    #[arg(long, default_value_t = 5)]
    pub negatives: usize,
    #[arg(long, default_value_t = 5)]
    pub epochs: usize,
    #[arg(long, default_value_t = 0.025)]
    pub learning_rate: f64,
    #[arg(long, default_value_t = 1)]
    pub workers: usize,
    /// mean or vlad:<centers>.
    #[arg(long, default_value = "mean")]
    pub pooling: String,
}

impl MethodArgs {
    fn msda(&self) -> Result<MsdaConfig, CliError> {
        Ok(MsdaConfig {
            noise_p: self.noise_p,
            n_layers: self.layers,
            ridge: parse::<Ridge>(&self.ridge)?,
            preproc: parse::<PreprocSpec>(&self.preproc)?,
            output_mode: parse::<OutputMode>(&self.output_mode)?,
        })
    }

    fn w2v(&self, seed: u64) -> Result<TokenConfig, CliError> {
        Ok(TokenConfig {
            n_bins: self.n_bins,
            w2v: W2vConfig {
                embed_dim: self.embed_dim,
                window: self.window,
                negatives: self.negatives,
                epochs: self.epochs,
                learning_rate: self.learning_rate,
                seed,
                workers: self.workers,
            },
            pooling: parse::<Pooling>(&self.pooling)?,
        })
    }

    fn config(&self, seed: u64) -> Result<MethodConfig, CliError> {
        Ok(match self.method.as_str() {
            "msda" => MethodConfig::Msda(self.msda()?),
            "raw" => MethodConfig::Raw {
                preproc: parse(&self.preproc)?,
            },
            "sociodemo" => MethodConfig::Sociodemo { dim: self.sociodemo_dim },
            "w2v" => MethodConfig::W2v(self.w2v(seed)?),
            other => {
                return Err(CliError::Usage(format!(
                    "unknown method {other:?}; expected msda, raw, sociodemo or w2v"
                )))
            }
        })
    }
}

#[derive(Debug, Args, Serialize, Deserialize)]
pub struct TrainArgs {
    /// Transaction table CSV.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Model file to write.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    #[serde(flatten)]
    pub method: MethodArgs,
}

pub fn train(env: &Env, a: TrainArgs) -> Result<(), CliError> {
    let data = env.required(&a.data, "data")?;
    let out = env.required(&a.out, "out")?;
    let config = a.method.config(a.seed)?;
    let table = TransactionTable::load_csv(&data)?;
    match config {
        MethodConfig::Msda(cfg) => {
            let model = MsdaModel::train(&table, cfg)?;
            model.save(&out)?;
            println!("trained {} ({} -> {})", cfg.tag(), model.input_dim(), model.output_dim());
        }
        MethodConfig::W2v(cfg) => {
            let (model, stats) = TokenModel::train(&table, &cfg)?;
            model.save(&out)?;
            println!(
                "trained {} (vocabulary {}, final loss {:.4})",
                cfg.tag(),
                model.vectors.len(),
                stats.epoch_loss.last().copied().unwrap_or(f64::NAN)
            );
        }
        other => {
            return Err(CliError::Usage(format!(
                "{} has no trainable model; use msda or w2v",
                other.name()
            )))
        }
    }
    Ok(())
}

enum Model {
    Msda(MsdaModel),
    Tokens(TokenModel),
}

impl Model {
    fn load(path: &Path) -> Result<Self, CliError> {
        let mut magic = [0u8; 4];
        let mut f = File::open(path).with_context(|| format!("cannot open model {}", path.display()))?;
        let n = std::io::Read::read(&mut f, &mut magic)?;
        if n == 4 && &magic == b"MSDA" {
            Ok(Model::Msda(MsdaModel::load(path)?))
        } else {
            Ok(Model::Tokens(TokenModel::load(path)?))
        }
    }

    fn embed(&self, table: &TransactionTable) -> txembed::Result<EmbeddingSet> {
        match self {
            Model::Msda(m) => m.embed(table),
            Model::Tokens(m) => m.embed(table),
        }
    }
}

#[derive(Debug, Args, Serialize, Deserialize)]
pub struct EmbedArgs {
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Transaction table CSV.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Embedding CSV to write.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn embed(env: &Env, a: EmbedArgs) -> Result<(), CliError> {
    let model = Model::load(&env.required(&a.model, "model")?)?;
    let table = TransactionTable::load_csv(env.required(&a.data, "data")?)?;
    let out = env.required(&a.out, "out")?;
    let emb = model.embed(&table)?;
    let mut w = create(&out)?;
    write_provenance(&mut w, &provenance("embed", &a))?;
    writeln!(w, "# source = {}", emb.source())?;
    emb.write_csv(&mut w)?;
    w.flush()?;
    println!("wrote {} embeddings of dimension {}", emb.len(), emb.dim());
    Ok(())
}

#[derive(Debug, Args, Serialize, Deserialize)]
pub struct EvalArgs {
    /// dispersion or missing_ap.
    #[arg(long, default_value = "dispersion")]
    pub task: String,
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Sociodemographic CSV, needed by the sociodemo method.
    #[arg(long)]
    pub sociodemo: Option<PathBuf>,
    /// Clusters for dispersion, neighbors for missing_ap.
    #[arg(long, default_value_t = 30)]
    pub k: usize,
    /// Target category labels; all categories when omitted.
    #[arg(long, value_delimiter = ',')]
    pub targets: Vec<String>,
    /// train,validation,test sizes for missing_ap; 80/10/10 when omitted.
    #[arg(long, value_delimiter = ',')]
    pub split: Vec<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Report CSV to write.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    #[serde(flatten)]
    pub method: MethodArgs,
}

fn build_method(env: &Env, m: &MethodArgs, sociodemo: &Option<PathBuf>, seed: u64) -> Result<Method, CliError> {
    let config = m.config(seed)?;
    Ok(match (&config, sociodemo) {
        (MethodConfig::Sociodemo { .. }, None) => {
            return Err(CliError::Usage("the sociodemo method needs --sociodemo".into()))
        }
        (_, Some(p)) => Method::with_sociodemo(config, Arc::new(SociodemoTable::load_csv(env.path(p))?)),
        (_, None) => Method::new(config),
    })
}

fn default_split(n: usize, given: &[usize]) -> Result<SplitSpec, CliError> {
    match given {
        [] => {
            let v = n / 10;
            Ok(SplitSpec::new(n - 2 * v, v, v))
        }
        [a, b, c] => Ok(SplitSpec::new(*a, *b, *c)),
        _ => Err(CliError::Usage("--split takes three sizes: train,validation,test".into())),
    }
}

pub fn eval(env: &Env, a: EvalArgs) -> Result<(), CliError> {
    let data = env.required(&a.data, "data")?;
    let out = env.required(&a.out, "out")?;
    if a.task != "dispersion" && a.task != "missing_ap" {
        return Err(CliError::Usage(format!(
            "unknown task {:?}; expected dispersion or missing_ap",
            a.task
        )));
    }
    let method = build_method(env, &a.method, &a.sociodemo, a.seed)?;
    let table = TransactionTable::load_csv(data)?;
    let targets = if a.targets.is_empty() {
        (0..table.n_categories()).collect()
    } else {
        category_indices(&table, &a.targets)?
    };
    let prov = provenance("eval", &a);
    let mut w = create(&out)?;
    match a.task.as_str() {
        "dispersion" => {
            let report = dispersion(&table, &method, &targets, &DispersionConfig::new(a.k, a.seed))?;
            report.write_csv(&mut w, &prov)?;
            println!("delta = {}", report.delta);
        }
        "missing_ap" => {
            let spec = default_split(table.n_clients(), &a.split)?;
            let (train, _, test) = split(&table, spec, a.seed)?;
            let report = retrieval::missing_category(&train, &test, &method, &targets, a.k, Similarity::Dot)?;
            report.write_csv(&mut w, &prov)?;
            println!("mean AP = {}, mean P@100 = {}", report.mean_ap, report.mean_p_at_100);
        }
        other => {
            return Err(CliError::Usage(format!(
                "unknown task {other:?}; expected dispersion or missing_ap"
            )))
        }
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Args, Serialize, Deserialize)]
pub struct RetrieveArgs {
    /// Query embedding CSV.
    #[arg(long)]
    pub queries: Option<PathBuf>,
    /// Database embedding CSV.
    #[arg(long)]
    pub database: Option<PathBuf>,
    /// Transaction table holding the database clients' descriptors.
    #[arg(long)]
    pub relevance: Option<PathBuf>,
    /// Descriptor labels; a client is relevant if it has any of them.
    #[arg(long, value_delimiter = ',')]
    pub descriptors: Vec<String>,
    /// Neighbor counts, e.g. `--k 50 2E4 5E4`.
    #[arg(long, num_args = 1.., default_values_t = vec!["50".to_string()])]
    pub k: Vec<String>,
    /// dot or cosine.
    #[arg(long, default_value = "dot")]
    pub similarity: String,
    /// Also report MAP@k of random rankings.
    #[arg(long)]
    pub random_baseline: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Report CSV; a JSON summary and two curve files are written next to it.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn sibling(out: &Path, suffix: &str) -> PathBuf {
    let stem = out.file_stem().and_then(|s| s.to_str()).unwrap_or("report");
    out.with_file_name(format!("{stem}{suffix}"))
}

pub fn retrieve(env: &Env, a: RetrieveArgs) -> Result<(), CliError> {
    let queries = EmbeddingSet::load_csv(env.required(&a.queries, "queries")?)?;
    let database = EmbeddingSet::load_csv(env.required(&a.database, "database")?)?;
    let table = TransactionTable::load_csv(env.required(&a.relevance, "relevance")?)?;
    let out = env.required(&a.out, "out")?;
    if a.descriptors.is_empty() {
        return Err(CliError::Usage("missing required option --descriptors".into()));
    }
    let ks = a.k.iter().map(|s| parse_count(s)).collect::<Result<Vec<_>, _>>()?;
    let descriptors = category_indices(&table, &a.descriptors)?;
    let by_id: std::collections::HashMap<&str, usize> =
        table.client_ids().iter().enumerate().map(|(i, id)| (id.as_str(), i)).collect();
    let rows = database
        .client_ids()
        .iter()
        .map(|id| {
            by_id
                .get(id.as_str())
                .copied()
                .ok_or_else(|| CliError::Runtime(anyhow::anyhow!("database client {id:?} missing from relevance table")))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let relevance = mu_labels(&table.select_rows(&rows)?, &descriptors)?;
    let index = NeighborIndex::from_embeddings(&database, parse::<Similarity>(&a.similarity)?);
    let report = evaluate_retrieval(queries.matrix(), &index, &relevance, &ks, &ks)?;

    let prov = provenance("retrieve", &a);
    let mut w = create(&out)?;
    report.write_csv(&mut w, &prov)?;
    let random = if a.random_baseline {
        let r = random_map_at_k(&relevance, queries.len(), &ks, a.seed)?;
        for m in &r {
            writeln!(w, "random_map,{},{}", m.k, m.map)?;
        }
        Some(r)
    } else {
        None
    };
    w.flush()?;
    let summary = serde_json::json!({
        "config": prov.iter().cloned().collect::<std::collections::BTreeMap<_, _>>(),
        "report": report,
        "random_map": random,
    });
    let mut s = create(&sibling(&out, ".summary.json"))?;
    serde_json::to_writer_pretty(&mut s, &summary).map_err(|e| CliError::Runtime(e.into()))?;
    writeln!(s)?;
    s.flush()?;
    for (suffix, column) in [(".recall.csv", "recall"), (".diversity.csv", "diversity")] {
        let mut c = create(&sibling(&out, suffix))?;
        report.write_curve(&mut c, column)?;
        c.flush()?;
    }
    let header: Vec<String> = report.map.iter().map(|m| format!("MAP@{}", m.k)).collect();
    let values: Vec<String> = report.map.iter().map(|m| format!("{:.4}", m.map)).collect();
    println!("{}\n{}", header.join("\t"), values.join("\t"));
    Ok(())
}

#[derive(Debug, Args, Serialize, Deserialize)]
pub struct TuneArgs {
    /// Training transaction table.
    #[arg(long)]
    pub train: Option<PathBuf>,
    /// Validation transaction table.
    #[arg(long)]
    pub val: Option<PathBuf>,
    /// msda, raw or w2v.
    #[arg(long, default_value = "msda")]
    pub method: String,
    /// dispersion, missing_ap or map_at_k.
    #[arg(long, default_value = "dispersion")]
    pub objective: String,
    /// Clusters (dispersion) or neighbors (missing_ap, map_at_k).
    #[arg(long, default_value_t = 30)]
    pub k: usize,
    /// Target categories for dispersion and missing_ap; all when omitted.
    #[arg(long, value_delimiter = ',')]
    pub targets: Vec<String>,
    /// Relevance descriptors for map_at_k.
    #[arg(long, value_delimiter = ',')]
    pub descriptors: Vec<String>,
    #[arg(long, value_delimiter = ',', default_values_t = vec!["log".to_string()])]
    pub preproc: Vec<String>,
    #[arg(long, value_delimiter = ',', default_values_t = vec![0.5])]
    pub noise_p: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_values_t = vec![1])]
    pub layers: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_values_t = vec!["auto".to_string()])]
    pub ridge: Vec<String>,
    #[arg(long, value_delimiter = ',', default_values_t = vec![32])]
    pub embed_dim: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_values_t = vec![5])]
    pub window: Vec<usize>,
    /// Stop starting new combinations after this many seconds.
    #[arg(long)]
    pub budget_secs: Option<f64>,
    /// Add a runtime column to the leaderboard (not reproducible).
    #[arg(long)]
    pub include_runtime: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Directory for leaderboard.csv and best.toml.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

fn method_section(config: &MethodConfig) -> toml::Table {
    let mut t = toml::Table::new();
    let mut set = |k: &str, v: toml::Value| {
        t.insert(k.to_string(), v);
    };
    set("method", config.name().into());
    match config {
        MethodConfig::Raw { preproc } => set("preproc", preproc.token().into()),
        MethodConfig::Msda(c) => {
            set("preproc", c.preproc.token().into());
            set("noise_p", c.noise_p.into());
            set("layers", (c.n_layers as i64).into());
            set("ridge", c.ridge.to_string().into());
            let mode = match c.output_mode {
                OutputMode::LastLayer => "last_layer",
                OutputMode::ConcatAll => "concat_all",
            };
            set("output_mode", mode.into());
        }
        MethodConfig::Sociodemo { dim } => set("sociodemo_dim", (*dim as i64).into()),
        MethodConfig::W2v(c) => {
            set("n_bins", (c.n_bins as i64).into());
            set("embed_dim", (c.w2v.embed_dim as i64).into());
            set("window", (c.w2v.window as i64).into());
            set("negatives", (c.w2v.negatives as i64).into());
            set("epochs", (c.w2v.epochs as i64).into());
            set("learning_rate", c.w2v.learning_rate.into());
            set("pooling", c.pooling.to_string().into());
        }
    }
    t
}

pub fn tune(env: &Env, a: TuneArgs) -> Result<(), CliError> {
    let train = TransactionTable::load_csv(env.required(&a.train, "train")?)?;
    let val = TransactionTable::load_csv(env.required(&a.val, "val")?)?;
    let out_dir = env.required(&a.out_dir, "out-dir")?;
    let kind = parse::<MethodKind>(&a.method)?;
    let targets = if a.targets.is_empty() {
        (0..train.n_categories()).collect()
    } else {
        category_indices(&train, &a.targets)?
    };
    let objective = match a.objective.as_str() {
        "dispersion" => Objective::Dispersion { k: a.k, targets },
        "missing_ap" => Objective::MissingAp { k: a.k, targets },
        "map_at_k" => {
            if a.descriptors.is_empty() {
                return Err(CliError::Usage("map_at_k needs --descriptors".into()));
            }
            Objective::MapAtK {
                k: a.k,
                descriptors: category_indices(&train, &a.descriptors)?,
            }
        }
        other => {
            return Err(CliError::Usage(format!(
                "unknown objective {other:?}; expected dispersion, missing_ap or map_at_k"
            )))
        }
    };
    let grid = Grid {
        preproc: a.preproc.iter().map(|s| parse(s)).collect::<Result<_, _>>()?,
        noise_p: a.noise_p.clone(),
        layers: a.layers.clone(),
        ridge: a.ridge.iter().map(|s| parse(s)).collect::<Result<_, _>>()?,
        embed_dim: a.embed_dim.clone(),
        window: a.window.clone(),
    };
    let options = TuneOptions {
        seed: a.seed,
        base: BaseConfigs::default(),
        budget: a.budget_secs.map(Duration::from_secs_f64),
        sociodemo: None,
    };
    let n = grid.combinations(kind, &options.base)?.len();
    eprintln!("evaluating {n} combinations");
    let result = tuner::tune(&train, &val, kind, &grid, &objective, &options)?;

    let prov = provenance("tune", &a);
    let mut w = create(&out_dir.join("leaderboard.csv"))?;
    result.write_csv(&mut w, a.include_runtime, &prov)?;
    w.flush()?;

    let best = result.best();
    let mut doc = toml::Table::new();
    doc.insert("seed".into(), (a.seed as i64).into());
    doc.insert("train".into(), toml::Value::Table(method_section(&best.config)));
    let mut b = create(&out_dir.join("best.toml"))?;
    write_provenance(&mut b, &prov)?;
    writeln!(b, "# score = {}", best.score.unwrap_or(f64::NAN))?;
    write!(b, "{}", toml::to_string(&doc).map_err(|e| CliError::Runtime(e.into()))?)?;
    b.flush()?;
    println!("best: {} score {}", best.config.tag(), best.score.unwrap_or(f64::NAN));
    Ok(())
}

#[derive(Debug, Args, Serialize, Deserialize)]
pub struct ReportArgs {
    /// Embedding CSV.
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
    /// Transaction table of the same clients.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Clusters for k-means.
    #[arg(long, default_value_t = 30)]
    pub k: usize,
    /// Densest clusters to report.
    #[arg(long, default_value_t = 10)]
    pub clusters: usize,
    /// Most central members per cluster.
    #[arg(long, default_value_t = 10)]
    pub members: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Pattern-matrix CSV to write.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn report(env: &Env, a: ReportArgs) -> Result<(), CliError> {
    let emb = EmbeddingSet::load_csv(env.required(&a.embeddings, "embeddings")?)?;
    let table = TransactionTable::load_csv(env.required(&a.data, "data")?)?;
    let out = env.required(&a.out, "out")?;
    if emb.client_ids() != table.client_ids() {
        return Err(CliError::Runtime(anyhow::anyhow!(
            "embeddings and table list different clients"
        )));
    }
    let clustering = segment::kmeans(emb.matrix(), &KMeansConfig::new(a.k, a.seed))?;
    let selection = typical_members(emb.matrix(), &clustering, a.clusters, a.members)?;
    let pattern = segment::pattern_matrix(&table, &selection)?;
    let mut w = create(&out)?;
    write_provenance(&mut w, &provenance("report", &a))?;
    for c in &selection.clusters {
        writeln!(
            w,
            "# selected cluster={} size={} density={} short={}",
            c.cluster, c.size, c.density, c.short
        )?;
    }
    pattern.write_csv(&mut w)?;
    w.flush()?;
    println!("wrote {} rows from {} clusters", pattern.rows.len(), selection.clusters.len());
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts_accept_scientific_notation() {
        assert_eq!(parse_count("2E4").unwrap(), 20_000);
        assert_eq!(parse_count("50").unwrap(), 50);
        assert_eq!(parse_count("9e4").unwrap(), 90_000);
        assert!(parse_count("1.5").is_err());
        assert!(parse_count("0").is_err());
        assert!(parse_count("many").is_err());
    }
}
