//! Input normalizations and the two non-learned baseline embeddings: raw
//! transaction rows and reduced one-hot sociodemographic attributes.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::embedding::EmbeddingSet;
use crate::error::{Error, Result};
use crate::table::{SociodemoTable, TransactionTable, SOCIODEMO_ATTRIBUTES};

/// Per-client normalization applied before embedding. Absent cells are 0.0
/// before any mode runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum PreprocSpec {
    /// 1 where the client transacted (nonzero amount), else 0.
    Binarize,
    /// Scale to unit Euclidean norm; zero vectors stay zero.
    L2Normalize,
    /// `sign(x) * ln(1 + |x|)`.
    LogNormalize,
    /// Divide by the largest absolute value; zero vectors stay zero.
    MaxNormalize,
    /// Affine map of the client's own `[min, max]` onto `[-1, 1]`.
    RescaleNeg1To1,
    None,
}

impl PreprocSpec {
    pub const ALL: [PreprocSpec; 6] = [
        PreprocSpec::Binarize,
        PreprocSpec::L2Normalize,
        PreprocSpec::LogNormalize,
        PreprocSpec::MaxNormalize,
        PreprocSpec::RescaleNeg1To1,
        PreprocSpec::None,
    ];

    pub fn token(self) -> &'static str {
        match self {
            PreprocSpec::Binarize => "binarize",
            PreprocSpec::L2Normalize => "l2",
            PreprocSpec::LogNormalize => "log",
            PreprocSpec::MaxNormalize => "max",
            PreprocSpec::RescaleNeg1To1 => "rescale",
            PreprocSpec::None => "none",
        }
    }

    /// Normalize one client vector in place.
    pub fn apply_vector(self, x: &mut [f64]) {
        match self {
            PreprocSpec::None => {}
            PreprocSpec::Binarize => x.iter_mut().for_each(|v| *v = if *v != 0.0 { 1.0 } else { 0.0 }),
            PreprocSpec::LogNormalize => x.iter_mut().for_each(|v| *v = v.signum() * v.abs().ln_1p()),
            PreprocSpec::L2Normalize => {
                let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
                if norm > 0.0 {
                    x.iter_mut().for_each(|v| *v /= norm);
                }
            }
            PreprocSpec::MaxNormalize => {
                let m = x.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
                if m > 0.0 {
                    x.iter_mut().for_each(|v| *v /= m);
                }
            }
            PreprocSpec::RescaleNeg1To1 => {
                let (lo, hi) = x
                    .iter()
                    .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
                let span = hi - lo;
                if span > 0.0 && span.is_finite() {
                    x.iter_mut()
                        .for_each(|v| *v = (2.0 * (*v - lo) / span - 1.0).clamp(-1.0, 1.0));
                } else {
                    // constant vector: map to the midpoint
                    x.iter_mut().for_each(|v| *v = 0.0);
                }
            }
        }
    }

    /// Normalize every column (client) of a `features × clients` matrix.
    pub fn apply_matrix(self, m: &mut DMatrix<f64>) {
        let d = m.nrows();
        if d == 0 {
            return;
        }
        m.as_mut_slice()
            .chunks_mut(d)
            .for_each(|col| self.apply_vector(col));
    }
}

impl fmt::Display for PreprocSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

impl FromStr for PreprocSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.contains(['+', ',', '|']) {
            return Err(Error::Config(format!(
                "preprocessing {s:?} chains several modes; exactly one mode is allowed"
            )));
        }
        Self::ALL
            .into_iter()
            .find(|m| m.token() == s)
            .ok_or_else(|| Error::Config(format!("unknown preprocessing mode {s:?}")))
    }
}

impl TryFrom<String> for PreprocSpec {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<PreprocSpec> for String {
    fn from(p: PreprocSpec) -> String {
        p.token().to_owned()
    }
}

/// Preprocessed `categories × clients` matrix.
pub fn apply(table: &TransactionTable, spec: PreprocSpec) -> Result<DMatrix<f64>> {
    if table.n_clients() == 0 || table.n_categories() == 0 {
        return Err(Error::InvalidArgument("cannot preprocess an empty table".into()));
    }
    let mut m = table.dense();
    spec.apply_matrix(&mut m);
    Ok(m)
}

/// The client's own (normalized) row as its embedding.
pub fn raw_embedding(table: &TransactionTable, spec: PreprocSpec) -> Result<EmbeddingSet> {
    let m = apply(table, spec)?;
    EmbeddingSet::new(table.client_ids().to_vec(), m, format!("raw:{spec}"))
}

/// One-hot encoding of the six attributes followed by a centered principal
/// component projection, fitted on one table and applicable to others.
#[derive(Debug, Clone, PartialEq)]
pub struct SociodemoEncoder {
    vocabularies: [Vec<String>; 6],
    offsets: [usize; 6],
    mean: DVector<f64>,
    /// `target_dim × one_hot_width`, rows are principal axes.
    components: DMatrix<f64>,
}

impl SociodemoEncoder {
    /// Fit the vocabulary (values present in `table`) and the projection.
    pub fn fit(table: &SociodemoTable, target_dim: usize) -> Result<Self> {
        if table.n_clients() == 0 {
            return Err(Error::InvalidArgument("cannot fit on an empty sociodemographic table".into()));
        }
        let vocabularies: [Vec<String>; 6] = std::array::from_fn(|a| {
            let mut used = vec![false; table.vocabularies()[a].len()];
            for row in table.codes() {
                used[row[a] as usize] = true;
            }
            let mut v: Vec<String> = table.vocabularies()[a]
                .iter()
                .zip(used)
                .filter(|(_, u)| *u)
                .map(|(s, _)| s.clone())
                .collect();
            v.sort();
            v
        });
        let mut offsets = [0usize; 6];
        let mut width = 0;
        for a in 0..6 {
            offsets[a] = width;
            width += vocabularies[a].len();
        }
        if target_dim == 0 || target_dim > width {
            return Err(Error::InvalidArgument(format!(
                "target dimension {target_dim} must be in 1..={width} (one-hot width)"
            )));
        }
        let mut enc = Self {
            vocabularies,
            offsets,
            mean: DVector::zeros(width),
            components: DMatrix::zeros(0, width),
        };
        let x = enc.one_hot(table)?;
        let n = x.ncols() as f64;
        let mean = x.column_mean();
        let mut centered = x;
        for mut col in centered.column_iter_mut() {
            col -= &mean;
        }
        let cov = (&centered * centered.transpose()) / n;
        let eig = SymmetricEigen::new(cov);
        let mut order: Vec<usize> = (0..width).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
        let mut components = DMatrix::zeros(target_dim, width);
        for (r, &c) in order.iter().take(target_dim).enumerate() {
            let mut axis = eig.eigenvectors.column(c).into_owned();
            // largest-magnitude loading is positive
            let lead = axis.iter().enumerate().fold(0, |best, (i, v)| {
                if v.abs() > axis[best].abs() { i } else { best }
            });
            if axis[lead] < 0.0 {
                axis.neg_mut();
            }
            components.set_row(r, &axis.transpose());
        }
        enc.mean = mean;
        enc.components = components;
        Ok(enc)
    }

    pub fn one_hot_width(&self) -> usize {
        self.mean.len()
    }

    pub fn target_dim(&self) -> usize {
        self.components.nrows()
    }

    /// `width × clients` one-hot matrix; values outside the fitted vocabulary
    /// are an error naming the attribute.
    pub fn one_hot(&self, table: &SociodemoTable) -> Result<DMatrix<f64>> {
        let width: usize = self.vocabularies.iter().map(Vec::len).sum();
        let mut m = DMatrix::zeros(width, table.n_clients());
        for i in 0..table.n_clients() {
            for a in 0..6 {
                let value = table.value(i, a);
                let pos = self.vocabularies[a]
                    .binary_search_by(|v| v.as_str().cmp(value))
                    .map_err(|_| Error::UnseenValue {
                        attribute: SOCIODEMO_ATTRIBUTES[a].to_owned(),
                        value: value.to_owned(),
                    })?;
                m[(self.offsets[a] + pos, i)] = 1.0;
            }
        }
        Ok(m)
    }

    pub fn transform(&self, table: &SociodemoTable) -> Result<EmbeddingSet> {
        let mut x = self.one_hot(table)?;
        for mut col in x.column_iter_mut() {
            col -= &self.mean;
        }
        let projected = &self.components * x;
        EmbeddingSet::new(
            table.client_ids().to_vec(),
            projected,
            format!("sociodemo:pca{}", self.target_dim()),
        )
    }
}

/// Fit the encoder on `table` and embed the same clients.
pub fn sociodemo_embedding(table: &SociodemoTable, target_dim: usize) -> Result<EmbeddingSet> {
    SociodemoEncoder::fit(table, target_dim)?.transform(table)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn one_row(values: Vec<Option<f64>>) -> TransactionTable {
        let labels = (1..=values.len()).map(|i| format!("CAT{i}")).collect();
        TransactionTable::new(vec!["c".into()], labels, values).unwrap()
    }

    #[test]
    fn binarize_fig1_row() {
        let t = one_row(vec![Some(-10.15), None, Some(1250.67)]);
        let m = apply(&t, PreprocSpec::Binarize).unwrap();
        assert_eq!(m.as_slice(), &[1.0, 0.0, 1.0]);
    }

    #[test]
    fn zero_row_l2_stays_zero() {
        let t = one_row(vec![None, Some(0.0), None]);
        for mode in PreprocSpec::ALL {
            let m = apply(&t, mode).unwrap();
            assert!(m.iter().all(|v| *v == 0.0), "{mode}");
        }
    }

    #[test]
    fn log_hand_values() {
        let e1 = std::f64::consts::E - 1.0;
        let t = one_row(vec![Some(e1), Some(-e1), None]);
        let m = apply(&t, PreprocSpec::LogNormalize).unwrap();
        assert!((m[0] - 1.0).abs() < 1e-15);
        assert!((m[1] + 1.0).abs() < 1e-15);
        assert_eq!(m[2], 0.0);
    }

    #[test]
    fn identity_mode_keeps_row() {
        let t = one_row(vec![Some(-10.15), Some(-527.11), Some(1250.67), None]);
        let e = raw_embedding(&t, PreprocSpec::None).unwrap();
        assert_eq!(e.vector(0), &[-10.15, -527.11, 1250.67, 0.0]);
        assert_eq!(e.source(), "raw:none");
    }

    #[test]
    fn chained_modes_rejected() {
        assert!(matches!("binarize+l2".parse::<PreprocSpec>(), Err(Error::Config(_))));
        assert!("bogus".parse::<PreprocSpec>().is_err());
        for m in PreprocSpec::ALL {
            assert_eq!(m.token().parse::<PreprocSpec>().unwrap(), m);
        }
    }

    #[test]
    fn l2_rows_have_unit_norm() {
        let t = TransactionTable::new(
            vec!["a".into(), "b".into(), "c".into()],
            vec!["X".into(), "Y".into(), "Z".into()],
            vec![Some(3.0), Some(-4.0), None, Some(1e-3), Some(2e5), Some(-7.0), None, None, Some(-0.5)],
        )
        .unwrap();
        let e = raw_embedding(&t, PreprocSpec::L2Normalize).unwrap();
        for i in 0..3 {
            let n: f64 = e.vector(i).iter().map(|v| v * v).sum();
            assert!((n - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn rescale_constant_row_is_finite() {
        let mut x = [5.0, 5.0, 5.0];
        PreprocSpec::RescaleNeg1To1.apply_vector(&mut x);
        assert_eq!(x, [0.0; 3]);
        let mut x = [-2.0, 0.0, 6.0];
        PreprocSpec::RescaleNeg1To1.apply_vector(&mut x);
        assert_eq!(x, [-1.0, -0.5, 1.0]);
    }

    proptest! {
        #[test]
        fn modes_finite_and_bounded(xs in prop::collection::vec(-1e9f64..1e9, 1..12), single in 0usize..12) {
            let mut variants = vec![xs.clone()];
            let mut one = vec![0.0; xs.len()];
            one[single % xs.len()] = xs[0];
            variants.push(one);
            for x in variants {
                for mode in PreprocSpec::ALL {
                    let mut y = x.clone();
                    mode.apply_vector(&mut y);
                    prop_assert!(y.iter().all(|v| v.is_finite()));
                    match mode {
                        PreprocSpec::Binarize => prop_assert!(y.iter().all(|v| *v == 0.0 || *v == 1.0)),
                        PreprocSpec::RescaleNeg1To1 => prop_assert!(y.iter().all(|v| (-1.0..=1.0).contains(v))),
                        _ => {}
                    }
                }
            }
        }

        #[test]
        fn binarize_and_l2_idempotent(xs in prop::collection::vec(-1e6f64..1e6, 1..12)) {
            for mode in [PreprocSpec::Binarize, PreprocSpec::L2Normalize] {
                let mut once = xs.clone();
                mode.apply_vector(&mut once);
                let mut twice = once.clone();
                mode.apply_vector(&mut twice);
                for (a, b) in once.iter().zip(&twice) {
                    prop_assert!((a - b).abs() <= 1e-12);
                }
            }
        }
    }

    fn sociodemo(rows: &[[&str; 6]]) -> SociodemoTable {
        let csv: String = std::iter::once("client_id,age_range,gender,income_range,postcode,city,province".to_owned())
            .chain(rows.iter().enumerate().map(|(i, r)| format!("c{i},{}", r.join(","))))
            .collect::<Vec<_>>()
            .join("\n");
        SociodemoTable::read_csv(csv.as_bytes()).unwrap()
    }

    fn distances(e: &EmbeddingSet) -> Vec<f64> {
        let mut out = Vec::new();
        for i in 0..e.len() {
            for j in i + 1..e.len() {
                let d: f64 = e.vector(i).iter().zip(e.vector(j)).map(|(a, b)| (a - b).powi(2)).sum();
                out.push(d.sqrt());
            }
        }
        out
    }

    #[test]
    fn identical_attributes_identical_embeddings() {
        let s = sociodemo(&[
            ["18-24", "F", "low", "1", "A", "P"],
            ["25-34", "M", "high", "2", "B", "P"],
            ["18-24", "F", "low", "1", "A", "P"],
            ["35-44", "M", "mid", "3", "B", "Q"],
        ]);
        let e = sociodemo_embedding(&s, 3).unwrap();
        assert_eq!(e.vector(0), e.vector(2));
    }

    #[test]
    fn full_width_projection_preserves_distances() {
        let s = sociodemo(&[
            ["18-24", "F", "low", "1", "A", "P"],
            ["25-34", "M", "high", "2", "B", "P"],
            ["35-44", "F", "mid", "1", "C", "Q"],
            ["35-44", "M", "mid", "3", "B", "Q"],
            ["18-24", "M", "high", "2", "A", "P"],
        ]);
        let enc = SociodemoEncoder::fit(&s, 1).unwrap();
        let width = enc.one_hot_width();
        let e = sociodemo_embedding(&s, width).unwrap();
        let oh = enc.one_hot(&s).unwrap();
        let oh_set = EmbeddingSet::new(s.client_ids().to_vec(), oh, "oh").unwrap();
        for (a, b) in distances(&e).iter().zip(distances(&oh_set)) {
            assert!((a - b).abs() < 1e-8, "{a} vs {b}");
        }
    }

    #[test]
    fn single_attribute_symmetry() {
        let s = sociodemo(&[
            ["a", "F", "x", "1", "A", "P"],
            ["b", "F", "x", "1", "A", "P"],
            ["c", "F", "x", "1", "A", "P"],
            ["a", "F", "x", "1", "A", "P"],
        ]);
        let e = sociodemo_embedding(&s, 2).unwrap();
        let d01 = distances(&e)[0]; // a-b
        let d02 = distances(&e)[1]; // a-c
        let d12 = distances(&e)[3]; // b-c
        for d in [d01, d02, d12] {
            assert!((d - 2f64.sqrt()).abs() < 1e-10, "{d}");
        }
    }

    #[test]
    fn unseen_value_names_attribute() {
        let train = sociodemo(&[["a", "F", "x", "1", "A", "P"], ["b", "M", "x", "1", "A", "P"]]);
        let test = sociodemo(&[["a", "F", "x", "9", "A", "P"]]);
        let enc = SociodemoEncoder::fit(&train, 2).unwrap();
        match enc.transform(&test) {
            Err(Error::UnseenValue { attribute, .. }) => assert_eq!(attribute, "postcode"),
            other => panic!("unexpected {other:?}"),
        }
        assert!(SociodemoEncoder::fit(&train, 100).is_err());
    }
}
