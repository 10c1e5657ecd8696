//! Client × category transaction tables, sociodemographic tables, splits and
//! their CSV formats.
//!
//! Transaction CSV: header `client_id,CAT1,...,CATK`, one client per line,
//! an empty cell marks a category with no activity. Amounts are signed
//! (negative = expense, positive = income) and parsed with a dot decimal
//! separator regardless of locale.

use std::collections::HashSet;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CategoryId {
    pub index: usize,
    pub label: String,
}

/// Aggregated signed amounts, one row per client and one column per category.
///
/// Cells are `None` when the client had no transaction in the category; this
/// is kept distinct from a present `0.0`.
#[derive(Debug, Clone, PartialEq)]
pub struct TransactionTable {
    client_ids: Vec<String>,
    categories: Vec<CategoryId>,
    values: Vec<Option<f64>>,
}

impl TransactionTable {
    /// Build a table from row-major cells.
    pub fn new(
        client_ids: Vec<String>,
        labels: Vec<String>,
        values: Vec<Option<f64>>,
    ) -> Result<Self> {
        let n = client_ids.len();
        let k = labels.len();
        if values.len() != n * k {
            return Err(Error::DimensionMismatch {
                expected: n * k,
                found: values.len(),
            });
        }
        check_unique(&client_ids, "client id")?;
        check_unique(&labels, "category label")?;
        if let Some(pos) = values.iter().position(|v| v.is_some_and(|x| !x.is_finite())) {
            return Err(Error::Parse {
                row: pos / k.max(1) + 1,
                column: pos % k.max(1) + 2,
                message: "non-finite amount".into(),
            });
        }
        let categories = labels
            .into_iter()
            .enumerate()
            .map(|(index, label)| CategoryId { index, label })
            .collect();
        Ok(Self {
            client_ids,
            categories,
            values,
        })
    }

    pub fn n_clients(&self) -> usize {
        self.client_ids.len()
    }

    pub fn n_categories(&self) -> usize {
        self.categories.len()
    }

    pub fn client_ids(&self) -> &[String] {
        &self.client_ids
    }

    pub fn categories(&self) -> &[CategoryId] {
        &self.categories
    }

    pub fn labels(&self) -> Vec<String> {
        self.categories.iter().map(|c| c.label.clone()).collect()
    }

    pub fn category_index(&self, label: &str) -> Option<usize> {
        self.categories.iter().position(|c| c.label == label)
    }

    #[inline]
    pub fn get(&self, client: usize, category: usize) -> Option<f64> {
        self.values[client * self.categories.len() + category]
    }

    pub fn row(&self, client: usize) -> &[Option<f64>] {
        let k = self.categories.len();
        &self.values[client * k..(client + 1) * k]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[Option<f64>]> {
        let k = self.categories.len().max(1);
        self.values.chunks(k).take(self.client_ids.len())
    }

    /// Values of one category, absent cells as `None`.
    pub fn column(&self, category: usize) -> Vec<Option<f64>> {
        (0..self.n_clients()).map(|i| self.get(i, category)).collect()
    }

    /// Number of present cells.
    pub fn present_count(&self) -> usize {
        self.values.iter().filter(|v| v.is_some()).count()
    }

    /// The table without `category`; remaining categories are re-indexed densely.
    pub fn drop_column(&self, category: usize) -> Result<Self> {
        let k = self.n_categories();
        if category >= k {
            return Err(Error::InvalidArgument(format!(
                "category index {category} out of range for {k} categories"
            )));
        }
        let labels = self
            .categories
            .iter()
            .filter(|c| c.index != category)
            .map(|c| c.label.clone())
            .collect();
        let values = self
            .rows()
            .flat_map(|row| {
                row.iter()
                    .enumerate()
                    .filter(move |(j, _)| *j != category)
                    .map(|(_, v)| *v)
            })
            .collect();
        Self::new(self.client_ids.clone(), labels, values)
    }

    /// A table holding the given rows, in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> Result<Self> {
        let mut ids = Vec::with_capacity(rows.len());
        let mut values = Vec::with_capacity(rows.len() * self.n_categories());
        for &r in rows {
            if r >= self.n_clients() {
                return Err(Error::InvalidArgument(format!("row {r} out of range")));
            }
            ids.push(self.client_ids[r].clone());
            values.extend_from_slice(self.row(r));
        }
        Self::new(ids, self.labels(), values)
    }

    /// Dense `categories × clients` matrix with absent cells mapped to 0.0.
    pub fn dense(&self) -> DMatrix<f64> {
        let k = self.n_categories();
        DMatrix::from_iterator(
            k,
            self.n_clients(),
            self.values.iter().map(|v| v.unwrap_or(0.0)),
        )
    }

    pub fn load_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_csv(file)
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .flexible(true)
            .from_reader(reader);
        let header = rdr.headers().map_err(|e| csv_error(e, 1))?.clone();
        if header.is_empty() || header.iter().all(str::is_empty) {
            return Err(Error::Parse {
                row: 1,
                column: 1,
                message: "missing header row".into(),
            });
        }
        let labels: Vec<String> = header.iter().skip(1).map(str::to_owned).collect();
        let k = labels.len();
        let mut ids = Vec::new();
        let mut values = Vec::new();
        for (i, record) in rdr.records().enumerate() {
            let line = i + 2;
            let record = record.map_err(|e| csv_error(e, line))?;
            if record.len() != k + 1 {
                return Err(Error::Parse {
                    row: line,
                    column: record.len().min(k + 1),
                    message: format!("expected {} fields, found {}", k + 1, record.len()),
                });
            }
            ids.push(record[0].to_owned());
            for (j, cell) in record.iter().skip(1).enumerate() {
                values.push(parse_cell(cell, line, j + 2)?);
            }
        }
        Self::new(ids, labels, values)
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(file).map_err(|e| Error::io(path, e))
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> std::io::Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        let mut header = vec!["client_id".to_owned()];
        header.extend(self.labels());
        wtr.write_record(&header)?;
        let mut record = Vec::with_capacity(header.len());
        for (id, row) in self.client_ids.iter().zip(self.rows()) {
            record.clear();
            record.push(id.clone());
            record.extend(row.iter().map(|v| v.map(|x| x.to_string()).unwrap_or_default()));
            wtr.write_record(&record)?;
        }
        wtr.flush()
    }
}

fn parse_cell(cell: &str, row: usize, column: usize) -> Result<Option<f64>> {
    let cell = cell.trim();
    if cell.is_empty() {
        return Ok(None);
    }
    match cell.parse::<f64>() {
        Ok(x) if x.is_finite() => Ok(Some(x)),
        _ => Err(Error::Parse {
            row,
            column,
            message: format!("not a number: {cell:?}"),
        }),
    }
}

fn csv_error(e: csv::Error, row: usize) -> Error {
    Error::Parse {
        row,
        column: 0,
        message: e.to_string(),
    }
}

fn check_unique(items: &[String], what: &str) -> Result<()> {
    let mut seen = HashSet::with_capacity(items.len());
    for item in items {
        if !seen.insert(item.as_str()) {
            return Err(Error::InvalidArgument(format!("duplicate {what} {item:?}")));
        }
    }
    Ok(())
}

/// Sociodemographic attributes, in CSV column order.
pub const SOCIODEMO_ATTRIBUTES: [&str; 6] =
    ["age_range", "gender", "income_range", "postcode", "city", "province"];

/// Categorical sociodemographic attributes per client.
///
/// Each attribute is stored as a code into its declared vocabulary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SociodemoTable {
    client_ids: Vec<String>,
    vocabularies: [Vec<String>; 6],
    codes: Vec<[u32; 6]>,
}

impl SociodemoTable {
    pub fn new(
        client_ids: Vec<String>,
        vocabularies: [Vec<String>; 6],
        codes: Vec<[u32; 6]>,
    ) -> Result<Self> {
        if client_ids.len() != codes.len() {
            return Err(Error::DimensionMismatch {
                expected: client_ids.len(),
                found: codes.len(),
            });
        }
        check_unique(&client_ids, "client id")?;
        for (a, vocab) in vocabularies.iter().enumerate() {
            check_unique(vocab, SOCIODEMO_ATTRIBUTES[a])?;
        }
        for (i, row) in codes.iter().enumerate() {
            for (a, &code) in row.iter().enumerate() {
                if code as usize >= vocabularies[a].len() {
                    return Err(Error::Parse {
                        row: i + 2,
                        column: a + 2,
                        message: format!("code {code} outside {} vocabulary", SOCIODEMO_ATTRIBUTES[a]),
                    });
                }
            }
        }
        Ok(Self {
            client_ids,
            vocabularies,
            codes,
        })
    }

    pub fn n_clients(&self) -> usize {
        self.client_ids.len()
    }

    pub fn client_ids(&self) -> &[String] {
        &self.client_ids
    }

    pub fn vocabularies(&self) -> &[Vec<String>; 6] {
        &self.vocabularies
    }

    pub fn codes(&self) -> &[[u32; 6]] {
        &self.codes
    }

    pub fn value(&self, client: usize, attribute: usize) -> &str {
        &self.vocabularies[attribute][self.codes[client][attribute] as usize]
    }

    pub fn select_rows(&self, rows: &[usize]) -> Result<Self> {
        let mut ids = Vec::with_capacity(rows.len());
        let mut codes = Vec::with_capacity(rows.len());
        for &r in rows {
            if r >= self.n_clients() {
                return Err(Error::InvalidArgument(format!("row {r} out of range")));
            }
            ids.push(self.client_ids[r].clone());
            codes.push(self.codes[r]);
        }
        Self::new(ids, self.vocabularies.clone(), codes)
    }

    pub fn load_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_csv(file)
    }

    /// Reads the six-attribute CSV. Vocabularies are the sorted distinct values
    /// found in the file.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().flexible(true).from_reader(reader);
        let header = rdr.headers().map_err(|e| csv_error(e, 1))?.clone();
        let expected: Vec<&str> = std::iter::once("client_id")
            .chain(SOCIODEMO_ATTRIBUTES)
            .collect();
        if header.iter().collect::<Vec<_>>() != expected {
            return Err(Error::Parse {
                row: 1,
                column: 1,
                message: format!("expected header {}", expected.join(",")),
            });
        }
        let mut ids = Vec::new();
        let mut raw: Vec<[String; 6]> = Vec::new();
        for (i, record) in rdr.records().enumerate() {
            let line = i + 2;
            let record = record.map_err(|e| csv_error(e, line))?;
            if record.len() != 7 {
                return Err(Error::Parse {
                    row: line,
                    column: record.len().min(7),
                    message: format!("expected 7 fields, found {}", record.len()),
                });
            }
            ids.push(record[0].to_owned());
            raw.push(std::array::from_fn(|a| record[a + 1].to_owned()));
        }
        let vocabularies: [Vec<String>; 6] = std::array::from_fn(|a| {
            let mut v: Vec<String> = raw.iter().map(|r| r[a].clone()).collect();
            v.sort();
            v.dedup();
            v
        });
        let codes = raw
            .iter()
            .map(|r| {
                std::array::from_fn(|a| {
                    vocabularies[a].binary_search(&r[a]).expect("value in vocabulary") as u32
                })
            })
            .collect();
        Self::new(ids, vocabularies, codes)
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(file).map_err(|e| Error::io(path, e))
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> std::io::Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        wtr.write_record(std::iter::once("client_id").chain(SOCIODEMO_ATTRIBUTES))?;
        for (i, id) in self.client_ids.iter().enumerate() {
            wtr.write_record(
                std::iter::once(id.as_str()).chain((0..6).map(|a| self.value(i, a))),
            )?;
        }
        wtr.flush()
    }
}

/// Sizes of the train / validation / test partitions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train: usize,
    pub validation: usize,
    pub test: usize,
}

impl SplitSpec {
    pub fn new(train: usize, validation: usize, test: usize) -> Self {
        Self {
            train,
            validation,
            test,
        }
    }
}

/// Row indices of each partition.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitIndices {
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
    pub test: Vec<usize>,
}

/// Shuffle rows with a seeded permutation and cut it into partitions.
pub fn split_indices(n_rows: usize, spec: SplitSpec, seed: u64) -> Result<SplitIndices> {
    let total = spec.train + spec.validation + spec.test;
    if total > n_rows {
        return Err(Error::InvalidArgument(format!(
            "split sizes sum to {total} but only {n_rows} rows are available"
        )));
    }
    let mut order: Vec<usize> = (0..n_rows).collect();
    order.shuffle(&mut seed::rng(seed::derive_seed(seed, "split")));
    let test = order[spec.train + spec.validation..total].to_vec();
    let validation = order[spec.train..spec.train + spec.validation].to_vec();
    order.truncate(spec.train);
    Ok(SplitIndices {
        train: order,
        validation,
        test,
    })
}

pub fn split(
    table: &TransactionTable,
    spec: SplitSpec,
    seed: u64,
) -> Result<(TransactionTable, TransactionTable, TransactionTable)> {
    let idx = split_indices(table.n_clients(), spec, seed)?;
    Ok((
        table.select_rows(&idx.train)?,
        table.select_rows(&idx.validation)?,
        table.select_rows(&idx.test)?,
    ))
}
