//! Labeled sparse datasets and the LIBSVM text format.
//!
//! Feature indices are 1-based in files and 0-based in memory; the conversion
//! happens only in [`parse_libsvm`] and [`write_libsvm`].

use std::fmt::Write as _;
use std::io::Read;

use crate::error::{Error, Result};

/// A sparse real vector with strictly increasing 0-based indices.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SparseVector {
    indices: Vec<u32>,
    values: Vec<f64>,
}

impl SparseVector {
    /// Builds a vector from (index, value) pairs. Indices must be strictly
    /// increasing.
    pub fn new(indices: Vec<u32>, values: Vec<f64>) -> Result<Self> {
        if indices.len() != values.len() {
            return Err(Error::contract("index and value arrays differ in length"));
        }
        if indices.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::contract("sparse indices must be strictly increasing"));
        }
        Ok(Self { indices, values })
    }

    /// Keeps every coordinate, including explicit zeros.
    pub fn from_dense(dense: &[f64]) -> Self {
        let indices = (0..dense.len() as u32).collect();
        Self {
            indices,
            values: dense.to_vec(),
        }
    }

    pub fn indices(&self) -> &[u32] {
        &self.indices
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    /// One past the largest stored index, i.e. the smallest dimension that
    /// can hold this vector.
    pub fn dim(&self) -> usize {
        self.indices.last().map_or(0, |&i| i as usize + 1)
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.indices
            .iter()
            .zip(&self.values)
            .map(|(&i, &v)| (i as usize, v))
    }

    pub fn norm_sq(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum()
    }

    /// Two-pointer merge over the sorted index lists.
    pub fn dot(&self, other: &SparseVector) -> f64 {
        let (a, b) = (&self.indices, &other.indices);
        let (mut i, mut j) = (0, 0);
        let mut sum = 0.0;
        while i < a.len() && j < b.len() {
            match a[i].cmp(&b[j]) {
                std::cmp::Ordering::Equal => {
                    sum += self.values[i] * other.values[j];
                    i += 1;
                    j += 1;
                }
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
            }
        }
        sum
    }

    pub fn dot_dense(&self, dense: &[f64]) -> f64 {
        self.iter()
            .filter(|&(i, _)| i < dense.len())
            .map(|(i, v)| v * dense[i])
            .sum()
    }

    pub fn to_dense(&self, d: usize) -> Vec<f64> {
        let mut out = vec![0.0; d.max(self.dim())];
        for (i, v) in self.iter() {
            out[i] = v;
        }
        out
    }
}

/// Binary class label.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Label {
    Pos,
    Neg,
}

impl Label {
    pub fn sign(self) -> f64 {
        match self {
            Label::Pos => 1.0,
            Label::Neg => -1.0,
        }
    }

    pub fn from_sign(s: f64) -> Self {
        if s >= 0.0 {
            Label::Pos
        } else {
            Label::Neg
        }
    }
}

/// A labeled collection of sparse examples.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Dataset {
    examples: Vec<SparseVector>,
    labels: Vec<Label>,
    d: usize,
}

impl Dataset {
    pub fn new(examples: Vec<SparseVector>, labels: Vec<Label>) -> Result<Self> {
        if examples.len() != labels.len() {
            return Err(Error::contract(format!(
                "{} examples but {} labels",
                examples.len(),
                labels.len()
            )));
        }
        let d = examples.iter().map(SparseVector::dim).max().unwrap_or(0);
        Ok(Self {
            examples,
            labels,
            d,
        })
    }

    /// Convenience constructor from dense rows and ±1 signs.
    pub fn from_dense(rows: &[Vec<f64>], signs: &[f64]) -> Result<Self> {
        let examples = rows.iter().map(|r| SparseVector::from_dense(r)).collect();
        let labels = signs.iter().map(|&s| Label::from_sign(s)).collect();
        Self::new(examples, labels)
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    /// Largest feature index (1-based), equivalently the ambient dimension.
    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn examples(&self) -> &[SparseVector] {
        &self.examples
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    pub fn x(&self, i: usize) -> &SparseVector {
        &self.examples[i]
    }

    pub fn y(&self, i: usize) -> f64 {
        self.labels[i].sign()
    }

    pub fn has_both_classes(&self) -> bool {
        self.labels.contains(&Label::Pos) && self.labels.contains(&Label::Neg)
    }

    /// Returns the subset at `idx`, in that order.
    pub fn subset(&self, idx: &[usize]) -> Dataset {
        let examples = idx.iter().map(|&i| self.examples[i].clone()).collect();
        let labels = idx.iter().map(|&i| self.labels[i]).collect();
        let mut out = Dataset::new(examples, labels).expect("lengths match");
        out.d = out.d.max(self.d);
        out
    }
}

/// Parses LIBSVM text (`<label> <idx>:<val> ...` per line, `#` comments).
pub fn parse_libsvm(mut input: impl Read) -> Result<Dataset> {
    let mut buf = Vec::new();
    input
        .read_to_end(&mut buf)
        .map_err(|e| Error::io("<input>", e))?;
    let text = String::from_utf8(buf).map_err(|e| Error::Format {
        offset: e.utf8_error().valid_up_to(),
        msg: "input is not valid UTF-8".into(),
    })?;

    let mut examples = Vec::new();
    let mut labels = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line_no = lineno + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let mut tokens = line.split_whitespace();
        let label_tok = tokens.next().expect("non-empty line has a token");
        labels.push(parse_label(label_tok, line_no)?);

        let mut indices = Vec::new();
        let mut values = Vec::new();
        for tok in tokens {
            let (idx, val) = tok.split_once(':').ok_or_else(|| Error::Parse {
                line: line_no,
                msg: format!("expected <index>:<value>, found {tok:?}"),
            })?;
            let idx: u32 = idx.parse().map_err(|_| Error::Parse {
                line: line_no,
                msg: format!("bad feature index {idx:?}"),
            })?;
            if idx == 0 {
                return Err(Error::Parse {
                    line: line_no,
                    msg: "feature indices are 1-based".into(),
                });
            }
            let val: f64 = val.parse().map_err(|_| Error::Parse {
                line: line_no,
                msg: format!("bad feature value {val:?}"),
            })?;
            let zero_based = idx - 1;
            if indices.last().is_some_and(|&last| last >= zero_based) {
                return Err(Error::Parse {
                    line: line_no,
                    msg: format!("feature index {idx} is not increasing"),
                });
            }
            indices.push(zero_based);
            values.push(val);
        }
        examples.push(SparseVector { indices, values });
    }
    Dataset::new(examples, labels)
}

fn parse_label(tok: &str, line: usize) -> Result<Label> {
    match tok {
        "1" | "+1" => Ok(Label::Pos),
        "-1" => Ok(Label::Neg),
        other => match other.parse::<f64>() {
            Ok(1.0) => Ok(Label::Pos),
            Ok(-1.0) => Ok(Label::Neg),
            _ => Err(Error::Label {
                line,
                label: other.to_string(),
            }),
        },
    }
}

/// Writes LIBSVM text. Values use the shortest representation that parses
/// back to the same `f64`, so `parse_libsvm(write_libsvm(ds)) == ds`.
pub fn write_libsvm(ds: &Dataset) -> String {
    let mut out = String::new();
    for (x, y) in ds.examples.iter().zip(&ds.labels) {
        out.push_str(match y {
            Label::Pos => "+1",
            Label::Neg => "-1",
        });
        for (i, v) in x.iter() {
            let _ = write!(out, " {}:{}", i + 1, v);
        }
        out.push('\n');
    }
    out
}
