//! Marginalized stacked denoising autoencoder.
//!
//! Each layer is a linear reconstruction `M = [W | b]` trained in closed form
//! against the expectation over Bernoulli masking noise: every input feature
//! is zeroed independently with probability `p`, the constant bias feature
//! never is. With `S = X̃ X̃ᵀ` over inputs augmented by a trailing 1 and
//! `q = (1-p, ..., 1-p, 1)`:
//!
//! ```text
//! E[Q]_ij = S_ij q_i q_j   (i != j)      E[Q]_ii = S_ii q_i
//! E[P]_ij = S_ij q_j       (i < d)
//! M (E[Q] + λI) = E[P]
//! ```
//!
//! Layers are stacked through `h = tanh(M [h_prev; 1])`.
//!
//! # Model file layout
//!
//! All integers and floats little-endian; floats are raw IEEE-754 bits, so a
//! save/load round trip is lossless.
//!
//! ```text
//! magic        4 bytes  "MSDA"
//! version      u32      1
//! noise_p      f64
//! ridge tag    u8       0 = auto (value is the trace scale), 1 = fixed λ
//! ridge value  f64
//! preproc      u8 length + ASCII token
//! output mode  u8       0 = last layer, 1 = concatenate all layers
//! input dim d  u32
//! n_labels     u32      0 or d
//! labels       n_labels × (u16 length + UTF-8 bytes)
//! n_layers     u32
//! per layer:   f64 λ used, then d × (d+1) f64 row-major
//! ```

use std::fmt;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use nalgebra::{Cholesky, DMatrix};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::embedding::EmbeddingSet;
use crate::error::{Error, Result};
use crate::preprocess::PreprocSpec;
use crate::table::TransactionTable;

/// Column block size of the scatter reduction. Partial sums are added in
/// block order, so results do not depend on the number of worker threads.
pub const SCATTER_BLOCK: usize = 2048;

pub const DEFAULT_RIDGE_SCALE: f64 = 1e-5;

/// Ridge added to `E[Q]` before solving.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Ridge {
    /// `scale * trace(E[Q]) / (d + 1)`, recomputed per layer.
    Auto { scale: f64 },
    Fixed(f64),
}

impl Default for Ridge {
    fn default() -> Self {
        Ridge::Auto {
            scale: DEFAULT_RIDGE_SCALE,
        }
    }
}

impl Ridge {
    pub fn lambda_for(self, eq: &DMatrix<f64>) -> f64 {
        match self {
            Ridge::Auto { scale } => scale * eq.trace() / eq.nrows() as f64,
            Ridge::Fixed(l) => l,
        }
    }
}

impl fmt::Display for Ridge {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Ridge::Auto { scale } if *scale == DEFAULT_RIDGE_SCALE => f.write_str("auto"),
            Ridge::Auto { scale } => write!(f, "auto:{scale}"),
            Ridge::Fixed(l) => write!(f, "{l}"),
        }
    }
}

impl FromStr for Ridge {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = || Error::Config(format!("ridge must be `auto`, `auto:<scale>` or a number >= 0, got {s:?}"));
        if s == "auto" {
            return Ok(Ridge::default());
        }
        let (auto, num) = match s.strip_prefix("auto:") {
            Some(rest) => (true, rest),
            None => (false, s),
        };
        let v: f64 = num.parse().map_err(|_| bad())?;
        if !(v.is_finite() && v >= 0.0) {
            return Err(bad());
        }
        Ok(if auto { Ridge::Auto { scale: v } } else { Ridge::Fixed(v) })
    }
}

impl TryFrom<String> for Ridge {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Ridge> for String {
    fn from(r: Ridge) -> String {
        r.to_string()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputMode {
    LastLayer,
    ConcatAll,
}

impl FromStr for OutputMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "last_layer" | "last" => Ok(OutputMode::LastLayer),
            "concat_all" | "concat" => Ok(OutputMode::ConcatAll),
            _ => Err(Error::Config(format!("unknown output mode {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MsdaConfig {
    pub noise_p: f64,
    pub n_layers: usize,
    pub ridge: Ridge,
    pub preproc: PreprocSpec,
    pub output_mode: OutputMode,
}

impl Default for MsdaConfig {
    fn default() -> Self {
        Self {
            noise_p: 0.5,
            n_layers: 1,
            ridge: Ridge::default(),
            preproc: PreprocSpec::LogNormalize,
            output_mode: OutputMode::LastLayer,
        }
    }
}

impl MsdaConfig {
    pub fn tag(&self) -> String {
        format!(
            "msda:p={},layers={},ridge={},preproc={}",
            self.noise_p, self.n_layers, self.ridge, self.preproc
        )
    }

    fn validate(&self) -> Result<()> {
        check_noise(self.noise_p)?;
        if self.n_layers == 0 {
            return Err(Error::Config("an mSDA needs at least one layer".into()));
        }
        Ok(())
    }
}

fn check_noise(p: f64) -> Result<()> {
    if !(0.0..1.0).contains(&p) {
        return Err(Error::InvalidArgument(format!(
            "masking probability must be in [0, 1), got {p}"
        )));
    }
    Ok(())
}

/// `S = Σ x̃ x̃ᵀ` over the columns of `x` (features × samples), with the
/// bias feature appended last.
pub fn scatter(x: &DMatrix<f64>) -> DMatrix<f64> {
    let (d, n) = x.shape();
    let partials: Vec<(DMatrix<f64>, Vec<f64>, usize)> = (0..n.div_ceil(SCATTER_BLOCK))
        .into_par_iter()
        .map(|b| {
            let start = b * SCATTER_BLOCK;
            let len = SCATTER_BLOCK.min(n - start);
            let block = x.columns(start, len);
            let gram = block * block.transpose();
            let sums: Vec<f64> = (0..d).map(|i| block.row(i).iter().sum()).collect();
            (gram, sums, len)
        })
        .collect();
    let mut s = DMatrix::zeros(d + 1, d + 1);
    for (gram, sums, len) in partials {
        let mut top = s.view_mut((0, 0), (d, d));
        top += gram;
        for i in 0..d {
            s[(i, d)] += sums[i];
        }
        s[(d, d)] += len as f64;
    }
    for i in 0..d {
        s[(d, i)] = s[(i, d)];
    }
    s
}

/// `(E[P], E[Q])` from a precomputed scatter matrix.
pub fn expected_from_scatter(s: &DMatrix<f64>, p: f64) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    check_noise(p)?;
    let dim = s.nrows();
    let d = dim - 1;
    let keep = |i: usize| if i < d { 1.0 - p } else { 1.0 };
    let eq = DMatrix::from_fn(dim, dim, |i, j| {
        if i == j {
            s[(i, i)] * keep(i)
        } else {
            s[(i, j)] * keep(i) * keep(j)
        }
    });
    let ep = DMatrix::from_fn(d, dim, |i, j| s[(i, j)] * keep(j));
    Ok((ep, eq))
}

/// Expected clean/noisy cross scatter `E[P]` (d × d+1) and noisy scatter
/// `E[Q]` ((d+1) × (d+1)) of `x` (features × samples) under masking noise `p`.
pub fn expected_scatter(x: &DMatrix<f64>, p: f64) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    check_noise(p)?;
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("input has non-finite entries".into()));
    }
    expected_from_scatter(&scatter(x), p)
}

/// One marginalized denoising layer: `weights = [W | b]`, `d × (d+1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct MsdaLayer {
    weights: DMatrix<f64>,
    lambda: f64,
}

impl MsdaLayer {
    pub fn from_weights(weights: DMatrix<f64>, lambda: f64) -> Result<Self> {
        let (d, c) = weights.shape();
        if c != d + 1 || d == 0 {
            return Err(Error::Format(format!("layer weights must be d × (d+1), got {d} × {c}")));
        }
        if weights.iter().any(|v| !v.is_finite()) {
            return Err(Error::Format("layer weights contain non-finite values".into()));
        }
        Ok(Self { weights, lambda })
    }

    pub fn input_dim(&self) -> usize {
        self.weights.nrows()
    }

    pub fn weights(&self) -> &DMatrix<f64> {
        &self.weights
    }

    /// Ridge λ that was added to `E[Q]` when this layer was solved.
    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// `tanh(W h + b)` for every column of `h`.
    pub fn forward(&self, h: &DMatrix<f64>) -> DMatrix<f64> {
        let d = self.input_dim();
        let w = self.weights.columns(0, d);
        let b = self.weights.column(d);
        let mut out = w * h;
        for mut col in out.column_iter_mut() {
            col += &b;
            col.apply(|v| *v = v.tanh());
        }
        out
    }
}

/// Solve `M (E[Q] + λI) = E[P]` for the layer weights.
pub fn solve_layer(ep: &DMatrix<f64>, eq: &DMatrix<f64>, lambda: f64) -> Result<MsdaLayer> {
    let dim = eq.nrows();
    let mut a = eq.clone();
    for i in 0..dim {
        a[(i, i)] += lambda;
    }
    let rhs = ep.transpose();
    let tiny = f64::EPSILON * dim as f64;
    let max_diag = (0..dim).map(|i| a[(i, i)].abs()).fold(0.0, f64::max);
    if max_diag == 0.0 {
        return Err(Error::Singular { lambda });
    }

    // A is symmetric; try Cholesky first.
    if let Some(chol) = Cholesky::new(a.clone()) {
        let l = chol.l_dirty();
        let min_pivot = (0..dim).map(|i| l[(i, i)] * l[(i, i)]).fold(f64::INFINITY, f64::min);
        if min_pivot > tiny * max_diag {
            let sol = chol.solve(&rhs);
            if sol.iter().all(|v| v.is_finite()) {
                return MsdaLayer::from_weights(sol.transpose(), lambda);
            }
        }
    }

    let lu = a.lu();
    let u = lu.u();
    let max_u = (0..dim).map(|i| u[(i, i)].abs()).fold(0.0, f64::max);
    let min_u = (0..dim).map(|i| u[(i, i)].abs()).fold(f64::INFINITY, f64::min);
    if max_u == 0.0 || min_u <= tiny * max_u {
        return Err(Error::Singular { lambda });
    }
    let sol = lu.solve(&rhs).ok_or(Error::Singular { lambda })?;
    if sol.iter().any(|v| !v.is_finite()) {
        return Err(Error::Singular { lambda });
    }
    MsdaLayer::from_weights(sol.transpose(), lambda)
}

/// Train one layer on `x` (features × samples).
pub fn train_layer(x: &DMatrix<f64>, p: f64, ridge: Ridge) -> Result<MsdaLayer> {
    if x.ncols() == 0 || x.nrows() == 0 {
        return Err(Error::InvalidArgument("training needs at least one sample and one feature".into()));
    }
    let (ep, eq) = expected_scatter(x, p)?;
    let lambda = ridge.lambda_for(&eq);
    solve_layer(&ep, &eq, lambda)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MsdaModel {
    config: MsdaConfig,
    layers: Vec<MsdaLayer>,
    input_labels: Vec<String>,
}

impl MsdaModel {
    /// Preprocess `raw` (features × samples) and fit `n_layers` stacked layers,
    /// each on the tanh output of the previous one.
    pub fn train_matrix(raw: &DMatrix<f64>, config: MsdaConfig) -> Result<Self> {
        config.validate()?;
        let mut h = raw.clone();
        config.preproc.apply_matrix(&mut h);
        let mut layers = Vec::with_capacity(config.n_layers);
        for _ in 0..config.n_layers {
            let layer = train_layer(&h, config.noise_p, config.ridge)?;
            if layers.len() + 1 < config.n_layers {
                h = layer.forward(&h);
            }
            layers.push(layer);
        }
        Ok(Self {
            config,
            layers,
            input_labels: Vec::new(),
        })
    }

    pub fn train(table: &TransactionTable, config: MsdaConfig) -> Result<Self> {
        if table.n_clients() == 0 {
            return Err(Error::InvalidArgument("cannot train on an empty table".into()));
        }
        let mut model = Self::train_matrix(&table.dense(), config)?;
        model.input_labels = table.labels();
        Ok(model)
    }

    pub fn from_parts(config: MsdaConfig, layers: Vec<MsdaLayer>, input_labels: Vec<String>) -> Result<Self> {
        config.validate()?;
        let d = layers.first().map(MsdaLayer::input_dim).ok_or_else(|| Error::Format("no layers".into()))?;
        if layers.len() != config.n_layers || layers.iter().any(|l| l.input_dim() != d) {
            return Err(Error::Format("inconsistent layer shapes".into()));
        }
        if !input_labels.is_empty() && input_labels.len() != d {
            return Err(Error::Format("label count differs from input dimension".into()));
        }
        Ok(Self {
            config,
            layers,
            input_labels,
        })
    }

    pub fn config(&self) -> &MsdaConfig {
        &self.config
    }

    pub fn layers(&self) -> &[MsdaLayer] {
        &self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].input_dim()
    }

    pub fn input_labels(&self) -> &[String] {
        &self.input_labels
    }

    pub fn output_dim(&self) -> usize {
        match self.config.output_mode {
            OutputMode::LastLayer => self.input_dim(),
            OutputMode::ConcatAll => self.input_dim() * self.layers.len(),
        }
    }

    /// Embed raw (not yet preprocessed) columns of `raw`.
    pub fn embed_matrix(&self, raw: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let d = self.input_dim();
        if raw.nrows() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: raw.nrows(),
            });
        }
        let mut h = raw.clone();
        self.config.preproc.apply_matrix(&mut h);
        match self.config.output_mode {
            OutputMode::LastLayer => {
                for layer in &self.layers {
                    h = layer.forward(&h);
                }
                Ok(h)
            }
            OutputMode::ConcatAll => {
                let n = raw.ncols();
                let mut out = DMatrix::zeros(d * self.layers.len(), n);
                for (l, layer) in self.layers.iter().enumerate() {
                    h = layer.forward(&h);
                    out.view_mut((l * d, 0), (d, n)).copy_from(&h);
                }
                Ok(out)
            }
        }
    }

    pub fn embed(&self, table: &TransactionTable) -> Result<EmbeddingSet> {
        if !self.input_labels.is_empty() && table.n_categories() == self.input_dim() {
            let labels = table.labels();
            if labels != self.input_labels {
                return Err(Error::InvalidArgument(
                    "table categories differ from the categories the model was trained on".into(),
                ));
            }
        }
        let m = self.embed_matrix(&table.dense())?;
        EmbeddingSet::new(table.client_ids().to_vec(), m, self.config.tag())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut buf = Vec::new();
        self.write_to(&mut buf).map_err(|e| Error::io(path, e))?;
        std::fs::write(path, buf).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::read_from(&mut bytes.as_slice())
    }

    pub fn write_to<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        let c = &self.config;
        w.write_all(b"MSDA")?;
        w.write_all(&1u32.to_le_bytes())?;
        w.write_all(&c.noise_p.to_le_bytes())?;
        let (tag, value) = match c.ridge {
            Ridge::Auto { scale } => (0u8, scale),
            Ridge::Fixed(l) => (1u8, l),
        };
        w.write_all(&[tag])?;
        w.write_all(&value.to_le_bytes())?;
        let token = c.preproc.token().as_bytes();
        w.write_all(&[token.len() as u8])?;
        w.write_all(token)?;
        w.write_all(&[match c.output_mode {
            OutputMode::LastLayer => 0,
            OutputMode::ConcatAll => 1,
        }])?;
        let d = self.input_dim();
        w.write_all(&(d as u32).to_le_bytes())?;
        w.write_all(&(self.input_labels.len() as u32).to_le_bytes())?;
        for label in &self.input_labels {
            w.write_all(&(label.len() as u16).to_le_bytes())?;
            w.write_all(label.as_bytes())?;
        }
        w.write_all(&(self.layers.len() as u32).to_le_bytes())?;
        for layer in &self.layers {
            w.write_all(&layer.lambda.to_le_bytes())?;
            for i in 0..d {
                for j in 0..=d {
                    w.write_all(&layer.weights[(i, j)].to_le_bytes())?;
                }
            }
        }
        Ok(())
    }

    pub fn read_from<R: Read>(r: &mut R) -> Result<Self> {
        let mut magic = [0u8; 4];
        read_exact(r, &mut magic)?;
        if &magic != b"MSDA" {
            return Err(Error::Format("not an mSDA model file".into()));
        }
        let version = read_u32(r)?;
        if version != 1 {
            return Err(Error::Format(format!("unsupported version {version}")));
        }
        let noise_p = read_f64(r)?;
        let tag = read_u8(r)?;
        let value = read_f64(r)?;
        let ridge = match tag {
            0 => Ridge::Auto { scale: value },
            1 => Ridge::Fixed(value),
            t => return Err(Error::Format(format!("bad ridge tag {t}"))),
        };
        let len = read_u8(r)? as usize;
        let mut token = vec![0u8; len];
        read_exact(r, &mut token)?;
        let preproc: PreprocSpec = std::str::from_utf8(&token)
            .map_err(|_| Error::Format("preprocessing token is not UTF-8".into()))?
            .parse()?;
        let output_mode = match read_u8(r)? {
            0 => OutputMode::LastLayer,
            1 => OutputMode::ConcatAll,
            t => return Err(Error::Format(format!("bad output mode {t}"))),
        };
        let d = read_u32(r)? as usize;
        let n_labels = read_u32(r)? as usize;
        let mut input_labels = Vec::with_capacity(n_labels);
        for _ in 0..n_labels {
            let mut b = [0u8; 2];
            read_exact(r, &mut b)?;
            let mut s = vec![0u8; u16::from_le_bytes(b) as usize];
            read_exact(r, &mut s)?;
            input_labels.push(String::from_utf8(s).map_err(|_| Error::Format("label is not UTF-8".into()))?);
        }
        let n_layers = read_u32(r)? as usize;
        let mut layers = Vec::with_capacity(n_layers);
        for _ in 0..n_layers {
            let lambda = read_f64(r)?;
            let mut data = Vec::with_capacity(d * (d + 1));
            for _ in 0..d * (d + 1) {
                data.push(read_f64(r)?);
            }
            layers.push(MsdaLayer::from_weights(DMatrix::from_row_slice(d, d + 1, &data), lambda)?);
        }
        let mut rest = Vec::new();
        r.read_to_end(&mut rest).map_err(|e| Error::Format(e.to_string()))?;
        if !rest.is_empty() {
            return Err(Error::Format("trailing bytes after last layer".into()));
        }
        let config = MsdaConfig {
            noise_p,
            n_layers,
            ridge,
            preproc,
            output_mode,
        };
        Self::from_parts(config, layers, input_labels)
    }
}

fn read_exact<R: Read>(r: &mut R, buf: &mut [u8]) -> Result<()> {
    r.read_exact(buf).map_err(|e| Error::Format(format!("truncated model file: {e}")))
}

fn read_u8<R: Read>(r: &mut R) -> Result<u8> {
    let mut b = [0u8; 1];
    read_exact(r, &mut b)?;
    Ok(b[0])
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    read_exact(r, &mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_f64<R: Read>(r: &mut R) -> Result<f64> {
    let mut b = [0u8; 8];
    read_exact(r, &mut b)?;
    Ok(f64::from_le_bytes(b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn random_matrix(d: usize, n: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = crate::seed::rng(seed);
        DMatrix::from_fn(d, n, |_, _| rng.random_range(-2.0..2.0))
    }

    #[test]
    fn zero_noise_is_plain_scatter() {
        let x = random_matrix(4, 9, 1);
        let (ep, eq) = expected_scatter(&x, 0.0).unwrap();
        let s = scatter(&x);
        assert_eq!(eq, s);
        assert_eq!(ep, s.rows(0, 4).into_owned());
    }

    #[test]
    fn single_sample_single_feature() {
        let x = DMatrix::from_vec(1, 1, vec![2.0]);
        assert_eq!(scatter(&x), DMatrix::from_row_slice(2, 2, &[4.0, 2.0, 2.0, 1.0]));
        let (ep, eq) = expected_scatter(&x, 0.5).unwrap();
        assert_eq!(eq, DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 1.0]));
        assert_eq!(ep, DMatrix::from_row_slice(1, 2, &[2.0, 2.0]));
    }

    #[test]
    fn noise_out_of_range() {
        let x = random_matrix(2, 3, 1);
        assert!(expected_scatter(&x, 1.0).is_err());
        assert!(expected_scatter(&x, -0.1).is_err());
    }

    #[test]
    fn scatter_block_order_independent_of_blocking() {
        let x = random_matrix(3, SCATTER_BLOCK * 2 + 17, 5);
        let xt = DMatrix::from_fn(4, x.ncols(), |i, j| if i < 3 { x[(i, j)] } else { 1.0 });
        let direct = &xt * xt.transpose();
        let s = scatter(&x);
        assert!((s - direct).abs().max() < 1e-9);
    }

    #[test]
    fn identity_limit() {
        let x = random_matrix(5, 40, 2);
        let layer = train_layer(&x, 0.0, Ridge::Fixed(0.0)).unwrap();
        let mut expected = DMatrix::zeros(5, 6);
        expected.view_mut((0, 0), (5, 5)).fill_with_identity();
        assert!((layer.weights() - expected).abs().max() < 1e-8);
    }

    #[test]
    fn always_absent_feature_is_singular_without_ridge() {
        let mut x = random_matrix(3, 20, 3);
        x.row_mut(1).fill(0.0);
        match train_layer(&x, 0.3, Ridge::Fixed(0.0)) {
            Err(Error::Singular { .. }) => {}
            other => panic!("expected singular, got {other:?}"),
        }
        let layer = train_layer(&x, 0.3, Ridge::default()).unwrap();
        assert!(layer.weights().iter().all(|v| v.is_finite()));
    }

    #[test]
    fn duplicated_samples_give_same_weights() {
        let x = random_matrix(4, 15, 4);
        let doubled = DMatrix::from_fn(4, 30, |i, j| x[(i, j % 15)]);
        let a = train_layer(&x, 0.4, Ridge::Fixed(0.0)).unwrap();
        let b = train_layer(&doubled, 0.4, Ridge::Fixed(0.0)).unwrap();
        assert!((a.weights() - b.weights()).abs().max() < 1e-10);
    }

    #[test]
    fn ridge_parsing() {
        assert_eq!("auto".parse::<Ridge>().unwrap(), Ridge::default());
        assert_eq!("0.5".parse::<Ridge>().unwrap(), Ridge::Fixed(0.5));
        assert_eq!("auto:0.01".parse::<Ridge>().unwrap(), Ridge::Auto { scale: 0.01 });
        assert!("-1".parse::<Ridge>().is_err());
        for r in [Ridge::default(), Ridge::Fixed(1e-3), Ridge::Auto { scale: 2.0 }] {
            assert_eq!(r.to_string().parse::<Ridge>().unwrap(), r);
        }
    }
}
