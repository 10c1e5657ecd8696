//! Typical members of the densest clusters and their sign patterns.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::kmeans::{column, sq_dist, Clustering};
use crate::error::{Error, Result};
use crate::table::TransactionTable;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectedCluster {
    pub cluster: usize,
    pub size: usize,
    /// Inverse mean squared distance of members to the centroid.
    pub density: f64,
    /// Fewer members than requested; all of them were returned.
    pub short: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TypicalMember {
    pub cluster: usize,
    pub client: usize,
    pub sq_distance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TypicalSelection {
    /// Densest first.
    pub clusters: Vec<SelectedCluster>,
    /// Grouped by cluster in the order of `clusters`, closest first.
    pub members: Vec<TypicalMember>,
}

/// Pick the `n_clusters` densest clusters and the `n_members` members of each
/// closest to its centroid. Density ties go to the larger cluster, then the
/// lower index; member ties to the lower client index.
pub fn typical_members(
    points: &DMatrix<f64>,
    clustering: &Clustering,
    n_clusters: usize,
    n_members: usize,
) -> Result<TypicalSelection> {
    let k = clustering.k();
    if n_clusters > k {
        return Err(Error::InvalidArgument(format!("n_clusters={n_clusters} exceeds k={k}")));
    }
    if points.ncols() != clustering.assignments.len() {
        return Err(Error::DimensionMismatch {
            expected: clustering.assignments.len(),
            found: points.ncols(),
        });
    }
    let mut by_cluster: Vec<Vec<(usize, f64)>> = vec![Vec::new(); k];
    for (i, &c) in clustering.assignments.iter().enumerate() {
        let d = sq_dist(column(points, i), column(&clustering.centroids, c));
        by_cluster[c].push((i, d));
    }
    let mut stats: Vec<(usize, usize, f64)> = by_cluster
        .iter()
        .enumerate()
        .filter(|(_, m)| !m.is_empty())
        .map(|(c, m)| {
            let mean = m.iter().map(|x| x.1).sum::<f64>() / m.len() as f64;
            let density = if mean > 0.0 { 1.0 / mean } else { f64::INFINITY };
            (c, m.len(), density)
        })
        .collect();
    stats.sort_by(|a, b| b.2.total_cmp(&a.2).then(b.1.cmp(&a.1)).then(a.0.cmp(&b.0)));
    let mut clusters = Vec::new();
    let mut members = Vec::new();
    for &(c, size, density) in stats.iter().take(n_clusters) {
        let mut m = by_cluster[c].clone();
        m.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
        clusters.push(SelectedCluster {
            cluster: c,
            size,
            density,
            short: size < n_members,
        });
        members.extend(m.into_iter().take(n_members).map(|(client, sq_distance)| TypicalMember {
            cluster: c,
            client,
            sq_distance,
        }));
    }
    Ok(TypicalSelection { clusters, members })
}

/// Clients × categories matrix of -1 (expense), +1 (income), 0 (absent).
#[derive(Debug, Clone, PartialEq)]
pub struct PatternMatrix {
    pub labels: Vec<String>,
    pub rows: Vec<PatternRow>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PatternRow {
    pub cluster: usize,
    pub client_id: String,
    pub signs: Vec<i8>,
}

fn sign(v: Option<f64>) -> i8 {
    match v {
        Some(x) if x > 0.0 => 1,
        Some(x) if x < 0.0 => -1,
        _ => 0,
    }
}

pub fn pattern_matrix(table: &TransactionTable, selection: &TypicalSelection) -> Result<PatternMatrix> {
    if selection.members.is_empty() {
        return Err(Error::InvalidArgument("empty selection".into()));
    }
    let rows = selection
        .members
        .iter()
        .map(|m| {
            if m.client >= table.n_clients() {
                return Err(Error::InvalidArgument(format!("client index {} out of range", m.client)));
            }
            Ok(PatternRow {
                cluster: m.cluster,
                client_id: table.client_ids()[m.client].clone(),
                signs: table.row(m.client).iter().map(|&v| sign(v)).collect(),
            })
        })
        .collect::<Result<_>>()?;
    Ok(PatternMatrix {
        labels: table.labels(),
        rows,
    })
}

impl PatternMatrix {
    /// Header `cluster,client_id,<labels>`; each cluster block is preceded by
    /// a `# cluster <c>` separator line.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "cluster,client_id,{}", self.labels.join(","))?;
        let mut current = None;
        for r in &self.rows {
            if current != Some(r.cluster) {
                writeln!(w, "# cluster {}", r.cluster)?;
                current = Some(r.cluster);
            }
            write!(w, "{},{}", r.cluster, r.client_id)?;
            for s in &r.signs {
                write!(w, ",{s}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut text = String::new();
        let mut r = r;
        r.read_to_string(&mut text).map_err(|e| Error::Format(e.to_string()))?;
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.starts_with('#') && !l.is_empty());
        let (_, header) = lines.next().ok_or_else(|| Error::Format("missing header".into()))?;
        let labels: Vec<String> = header.split(',').skip(2).map(str::to_owned).collect();
        let parse_err = |row: usize, column: usize, message: String| Error::Parse {
            row: row + 1,
            column,
            message,
        };
        let mut rows = Vec::new();
        for (row, line) in lines {
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != labels.len() + 2 {
                return Err(parse_err(row, fields.len(), "wrong number of fields".into()));
            }
            let cluster = fields[0]
                .parse()
                .map_err(|_| parse_err(row, 1, format!("bad cluster {:?}", fields[0])))?;
            let signs = fields[2..]
                .iter()
                .enumerate()
                .map(|(c, f)| match *f {
                    "-1" => Ok(-1),
                    "0" => Ok(0),
                    "1" => Ok(1),
                    _ => Err(parse_err(row, c + 3, format!("bad sign {f:?}"))),
                })
                .collect::<Result<_>>()?;
            rows.push(PatternRow {
                cluster,
                client_id: fields[1].to_owned(),
                signs,
            });
        }
        Ok(Self { labels, rows })
    }

    /// Number of rows per cluster, in block order.
    pub fn block_sizes(&self) -> BTreeMap<usize, usize> {
        let mut m = BTreeMap::new();
        for r in &self.rows {
            *m.entry(r.cluster).or_insert(0) += 1;
        }
        m
    }
}
