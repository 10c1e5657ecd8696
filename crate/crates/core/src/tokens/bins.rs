//! Percentile quantization of amounts into category-scoped tokens.
//!
//! Bins of a category are the intervals `(-inf, b1], (b1, b2], ..., (bm, +inf)`
//! over its boundaries. A value exactly on a boundary falls in the lower bin.
//! Boundaries are the interior linear-interpolation quantiles of the present
//! training values, rounded to cents; coinciding boundaries collapse, and a
//! boundary at or above the largest training value is dropped because it
//! would leave the top bin empty. Labels read `<CAT>_<lo>:<hi>` with two
//! decimals, e.g. `CAT1_-50.20:-7.16`.

use std::collections::HashMap;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::table::TransactionTable;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryBins {
    pub category: String,
    pub boundaries: Vec<f64>,
}

impl CategoryBins {
    pub fn n_bins(&self) -> usize {
        self.boundaries.len() + 1
    }

    /// Index of the bin holding `value`.
    pub fn bin_of(&self, value: f64) -> usize {
        self.boundaries.partition_point(|&b| b < value)
    }

    pub fn label(&self, bin: usize) -> String {
        let lo = if bin == 0 { "-inf".to_owned() } else { format_bound(self.boundaries[bin - 1]) };
        let hi = if bin == self.boundaries.len() {
            "+inf".to_owned()
        } else {
            format_bound(self.boundaries[bin])
        };
        format!("{}_{lo}:{hi}", self.category)
    }
}

fn format_bound(b: f64) -> String {
    format!("{b:.2}")
}

fn round_cents(x: f64) -> f64 {
    let r = (x * 100.0).round() / 100.0;
    if r == 0.0 {
        0.0
    } else {
        r
    }
}

/// Linear-interpolation quantile of sorted data, `q` in [0, 1].
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinDictionary {
    categories: Vec<CategoryBins>,
    offsets: Vec<usize>,
    /// Categories without any present training value; they keep one
    /// unbounded bin.
    pub skipped: Vec<String>,
}

impl BinDictionary {
    pub fn categories(&self) -> &[CategoryBins] {
        &self.categories
    }

    pub fn vocab_size(&self) -> usize {
        self.offsets.last().copied().unwrap_or(0)
            + self.categories.last().map_or(0, CategoryBins::n_bins)
    }

    pub fn token_id(&self, category: usize, bin: usize) -> u32 {
        (self.offsets[category] + bin) as u32
    }

    /// Inverse of `token_id`.
    pub fn token_of(&self, id: u32) -> (usize, usize) {
        let id = id as usize;
        let c = self.offsets.partition_point(|&o| o <= id) - 1;
        (c, id - self.offsets[c])
    }

    pub fn vocabulary(&self) -> Vec<String> {
        self.categories
            .iter()
            .flat_map(|c| (0..c.n_bins()).map(move |b| c.label(b)))
            .collect()
    }
}

pub fn fit_bins(table: &TransactionTable, n_bins: usize) -> Result<BinDictionary> {
    if n_bins < 2 {
        return Err(Error::InvalidArgument(format!("n_bins must be at least 2, got {n_bins}")));
    }
    let mut categories = Vec::with_capacity(table.n_categories());
    let mut skipped = Vec::new();
    for cat in table.categories() {
        let mut present: Vec<f64> = (0..table.n_clients()).filter_map(|i| table.get(i, cat.index)).collect();
        if present.is_empty() {
            skipped.push(cat.label.clone());
            categories.push(CategoryBins {
                category: cat.label.clone(),
                boundaries: Vec::new(),
            });
            continue;
        }
        present.sort_by(f64::total_cmp);
        let max = *present.last().expect("non-empty");
        let mut boundaries: Vec<f64> = (1..n_bins)
            .map(|i| round_cents(quantile(&present, i as f64 / n_bins as f64)))
            .filter(|&b| b < max)
            .collect();
        boundaries.dedup();
        categories.push(CategoryBins {
            category: cat.label.clone(),
            boundaries,
        });
    }
    let offsets = categories
        .iter()
        .scan(0, |acc, c| {
            let o = *acc;
            *acc += c.n_bins();
            Some(o)
        })
        .collect();
    Ok(BinDictionary {
        categories,
        offsets,
        skipped,
    })
}

/// Per-client bags of token ids.
#[derive(Debug, Clone, PartialEq)]
pub struct TokenCorpus {
    pub client_ids: Vec<String>,
    pub bags: Vec<Vec<u32>>,
    pub vocabulary: Vec<String>,
}

impl TokenCorpus {
    pub fn n_tokens(&self) -> usize {
        self.bags.iter().map(Vec::len).sum()
    }

    pub fn max_bag_len(&self) -> usize {
        self.bags.iter().map(Vec::len).max().unwrap_or(0)
    }

    /// One line per client: its token labels separated by spaces.
    pub fn write_text<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for bag in &self.bags {
            let line: Vec<&str> = bag.iter().map(|&t| self.vocabulary[t as usize].as_str()).collect();
            writeln!(w, "{}", line.join(" "))?;
        }
        Ok(())
    }

    /// Read the text format back against a known vocabulary.
    pub fn read_text<R: BufRead>(r: R, vocabulary: Vec<String>, client_ids: Vec<String>) -> Result<Self> {
        let index: HashMap<&str, u32> = vocabulary.iter().enumerate().map(|(i, l)| (l.as_str(), i as u32)).collect();
        let mut bags = Vec::new();
        for (line_no, line) in r.lines().enumerate() {
            let line = line.map_err(|e| Error::Parse {
                row: line_no + 1,
                column: 0,
                message: e.to_string(),
            })?;
            let bag = line
                .split_whitespace()
                .enumerate()
                .map(|(col, tok)| {
                    index.get(tok).copied().ok_or_else(|| Error::Parse {
                        row: line_no + 1,
                        column: col + 1,
                        message: format!("unknown token {tok:?}"),
                    })
                })
                .collect::<Result<Vec<u32>>>()?;
            bags.push(bag);
        }
        if bags.len() != client_ids.len() {
            return Err(Error::DimensionMismatch {
                expected: client_ids.len(),
                found: bags.len(),
            });
        }
        Ok(Self {
            client_ids,
            bags,
            vocabulary,
        })
    }
}

/// One token per present cell, in category order.
pub fn tokenize(table: &TransactionTable, dict: &BinDictionary) -> Result<TokenCorpus> {
    if table.n_categories() != dict.categories.len()
        || table.categories().iter().zip(&dict.categories).any(|(a, b)| a.label != b.category)
    {
        return Err(Error::InvalidArgument(
            "table categories differ from the categories the bins were fitted on".into(),
        ));
    }
    let bags = table
        .rows()
        .map(|row| {
            row.iter()
                .enumerate()
                .filter_map(|(c, v)| v.map(|x| dict.token_id(c, dict.categories[c].bin_of(x))))
                .collect()
        })
        .collect();
    Ok(TokenCorpus {
        client_ids: table.client_ids().to_vec(),
        bags,
        vocabulary: dict.vocabulary(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table(cols: &[&[Option<f64>]]) -> TransactionTable {
        let n = cols[0].len();
        let labels = (1..=cols.len()).map(|i| format!("CAT{i}")).collect();
        let ids = (0..n).map(|i| format!("c{i}")).collect();
        let values = (0..n).flat_map(|i| cols.iter().map(move |c| c[i])).collect();
        TransactionTable::new(ids, labels, values).unwrap()
    }

    #[test]
    fn median_boundary_and_labels() {
        let t = table(&[&[Some(1.0), Some(2.0), Some(3.0), Some(4.0)]]);
        let d = fit_bins(&t, 2).unwrap();
        assert_eq!(d.categories()[0].boundaries, vec![2.5]);
        assert_eq!(d.vocabulary(), vec!["CAT1_-inf:2.50", "CAT1_2.50:+inf"]);
    }

    #[test]
    fn identical_values_collapse_to_one_bin() {
        let t = table(&[&[Some(-3.0), Some(-3.0), Some(-3.0), None]]);
        let d = fit_bins(&t, 10).unwrap();
        assert_eq!(d.categories()[0].n_bins(), 1);
        assert_eq!(d.vocabulary(), vec!["CAT1_-inf:+inf"]);
    }

    #[test]
    fn label_pattern_two_decimals() {
        let b = CategoryBins {
            category: "CAT1".into(),
            boundaries: vec![-50.2, -7.16, 12.0],
        };
        assert_eq!(b.label(1), "CAT1_-50.20:-7.16");
        assert_eq!(b.label(3), "CAT1_12.00:+inf");
    }

    #[test]
    fn boundary_value_goes_to_lower_bin() {
        let b = CategoryBins {
            category: "X".into(),
            boundaries: vec![1.0, 2.0],
        };
        assert_eq!(b.bin_of(1.0), 0);
        assert_eq!(b.bin_of(1.000001), 1);
        assert_eq!(b.bin_of(2.0), 1);
        assert_eq!(b.bin_of(2.5), 2);
        assert_eq!(b.bin_of(-1e9), 0);
    }

    #[test]
    fn tokens_per_present_cell() {
        let t = table(&[
            &[Some(1.0), None, Some(5.0)],
            &[Some(-2.0), Some(-4.0), None],
            &[None, Some(7.0), Some(8.0)],
            &[Some(3.0), Some(3.0), Some(3.0)],
        ]);
        let d = fit_bins(&t, 3).unwrap();
        let c = tokenize(&t, &d).unwrap();
        assert_eq!(c.n_tokens(), t.present_count());
        assert_eq!(c.bags[0].len(), 3);
        for bag in &c.bags {
            for &tok in bag {
                let (cat, bin) = d.token_of(tok);
                assert_eq!(d.token_id(cat, bin), tok);
            }
        }
        let mut buf = Vec::new();
        c.write_text(&mut buf).unwrap();
        let back = TokenCorpus::read_text(buf.as_slice(), c.vocabulary.clone(), c.client_ids.clone()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn empty_category_is_skipped_not_fatal() {
        let t = table(&[&[Some(1.0), Some(2.0)], &[None, None]]);
        let d = fit_bins(&t, 4).unwrap();
        assert_eq!(d.skipped, vec!["CAT2".to_owned()]);
        assert!(fit_bins(&t, 1).is_err());
    }

    #[test]
    fn same_bins_same_bags() {
        let t = table(&[&[Some(1.0), Some(1.1), Some(9.0), Some(10.0)], &[Some(-5.0), Some(-5.1), Some(-1.0), Some(-1.0)]]);
        let d = fit_bins(&t, 2).unwrap();
        let c = tokenize(&t, &d).unwrap();
        assert_eq!(c.bags[0], c.bags[1]);
    }
}
