//! Dense client embeddings.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// One client's embedding together with the tag of the method that made it.
#[derive(Debug, Clone, PartialEq)]
pub struct Embedding {
    values: Vec<f64>,
    source: String,
}

impl Embedding {
    pub fn new(values: Vec<f64>, source: impl Into<String>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidArgument("embedding dimension must be positive".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("embedding has non-finite entries".into()));
        }
        Ok(Self {
            values,
            source: source.into(),
        })
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn source(&self) -> &str {
        &self.source
    }
}

/// Embeddings for a set of clients, stored as a `dim × n_clients` matrix so
/// each client's vector is a contiguous column.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingSet {
    client_ids: Vec<String>,
    vectors: DMatrix<f64>,
    source: String,
}

impl EmbeddingSet {
    pub fn new(client_ids: Vec<String>, vectors: DMatrix<f64>, source: impl Into<String>) -> Result<Self> {
        if vectors.ncols() != client_ids.len() {
            return Err(Error::DimensionMismatch {
                expected: client_ids.len(),
                found: vectors.ncols(),
            });
        }
        if vectors.nrows() == 0 {
            return Err(Error::InvalidArgument("embedding dimension must be positive".into()));
        }
        if vectors.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("embedding has non-finite entries".into()));
        }
        Ok(Self {
            client_ids,
            vectors,
            source: source.into(),
        })
    }

    pub fn len(&self) -> usize {
        self.client_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.client_ids.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.vectors.nrows()
    }

    pub fn client_ids(&self) -> &[String] {
        &self.client_ids
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.vectors
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.vectors
    }

    /// The vector of client `i`.
    pub fn vector(&self, i: usize) -> &[f64] {
        let d = self.dim();
        &self.vectors.as_slice()[i * d..(i + 1) * d]
    }

    pub fn get(&self, i: usize) -> Embedding {
        Embedding {
            values: self.vector(i).to_vec(),
            source: self.source.clone(),
        }
    }

    pub fn select(&self, rows: &[usize]) -> Result<Self> {
        let d = self.dim();
        let mut data = Vec::with_capacity(rows.len() * d);
        let mut ids = Vec::with_capacity(rows.len());
        for &r in rows {
            if r >= self.len() {
                return Err(Error::InvalidArgument(format!("row {r} out of range")));
            }
            data.extend_from_slice(self.vector(r));
            ids.push(self.client_ids[r].clone());
        }
        Self::new(ids, DMatrix::from_vec(d, rows.len(), data), self.source.clone())
    }

    pub fn load_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let name = path.file_stem().and_then(|s| s.to_str()).unwrap_or("file");
        Self::read_csv(file, format!("file:{name}"))
    }

    /// Reads `client_id,e0,...,e{d-1}`.
    pub fn read_csv<R: Read>(reader: R, source: impl Into<String>) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .flexible(true)
            .comment(Some(b'#'))
            .from_reader(reader);
        let header = rdr.headers().map_err(|e| Error::Parse {
            row: 1,
            column: 0,
            message: e.to_string(),
        })?;
        let dim = header.len().saturating_sub(1);
        let mut ids = Vec::new();
        let mut data = Vec::new();
        for (i, record) in rdr.records().enumerate() {
            let line = i + 2;
            let record = record.map_err(|e| Error::Parse {
                row: line,
                column: 0,
                message: e.to_string(),
            })?;
            if record.len() != dim + 1 {
                return Err(Error::Parse {
                    row: line,
                    column: record.len(),
                    message: format!("expected {} fields, found {}", dim + 1, record.len()),
                });
            }
            ids.push(record[0].to_owned());
            for (j, cell) in record.iter().skip(1).enumerate() {
                let v = cell.trim().parse::<f64>().map_err(|_| Error::Parse {
                    row: line,
                    column: j + 2,
                    message: format!("not a number: {cell:?}"),
                })?;
                data.push(v);
            }
        }
        let n = ids.len();
        Self::new(ids, DMatrix::from_vec(dim, n, data), source)
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(file).map_err(|e| Error::io(path, e))
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> std::io::Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        let header: Vec<String> = std::iter::once("client_id".to_owned())
            .chain((0..self.dim()).map(|j| format!("e{j}")))
            .collect();
        wtr.write_record(&header)?;
        let mut record = Vec::with_capacity(header.len());
        for (i, id) in self.client_ids.iter().enumerate() {
            record.clear();
            record.push(id.clone());
            record.extend(self.vector(i).iter().map(f64::to_string));
            wtr.write_record(&record)?;
        }
        wtr.flush()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_non_finite() {
        assert!(Embedding::new(vec![1.0, f64::NAN], "x").is_err());
        assert!(Embedding::new(vec![], "x").is_err());
        let m = DMatrix::from_vec(2, 1, vec![0.0, f64::INFINITY]);
        assert!(EmbeddingSet::new(vec!["a".into()], m, "x").is_err());
    }

    #[test]
    fn csv_is_lossless() {
        let m = DMatrix::from_vec(3, 2, vec![0.1, -1.0 / 3.0, 1e-300, 2.5, 0.0, -7.25e10]);
        let e = EmbeddingSet::new(vec!["a".into(), "b".into()], m, "t").unwrap();
        let mut buf = Vec::new();
        e.write_csv(&mut buf).unwrap();
        let back = EmbeddingSet::read_csv(buf.as_slice(), "t").unwrap();
        assert_eq!(back, e);
        assert_eq!(back.vector(1), &[2.5, 0.0, -7.25e10]);
    }
}
