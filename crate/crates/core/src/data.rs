//! Sparse datasets, LIBSVM ingestion, synthetic data and coordinate partitions.
//!
//! The data matrix `A = [x_1, …, x_n]` is stored column-major: one sparse
//! vector per datapoint, because every kernel in the solver consumes whole
//! datapoints.

use std::io::{BufRead, Write};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::losses::Label;

/// Sparse vector with strictly increasing indices and finite nonzero values.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SparseVector {
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl SparseVector {
    /// Builds a vector from `(index, value)` pairs, rejecting unsorted or
    /// duplicate indices and non-finite values. Explicit zeros are dropped.
    pub fn from_pairs(pairs: impl IntoIterator<Item = (usize, f64)>) -> Result<Self> {
        let mut indices = Vec::new();
        let mut values = Vec::new();
        for (i, v) in pairs {
            if !v.is_finite() {
                return Err(Error::dimension(format!("non-finite value {v} at index {i}")));
            }
            if let Some(&last) = indices.last() {
                if i <= last {
                    return Err(Error::dimension(format!(
                        "indices must be strictly increasing ({last} then {i})"
                    )));
                }
            }
            if v != 0.0 {
                indices.push(i);
                values.push(v);
            }
        }
        Ok(Self { indices, values })
    }

    /// Sparse view of a dense slice.
    pub fn from_dense(dense: &[f64]) -> Self {
        let (indices, values) = dense
            .iter()
            .enumerate()
            .filter(|(_, v)| **v != 0.0)
            .map(|(i, v)| (i, *v))
            .unzip();
        Self { indices, values }
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.indices.iter().copied().zip(self.values.iter().copied())
    }

    pub fn norm_sq(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum()
    }

    /// `xᵀ u` for a dense `u`.
    #[inline]
    pub fn dot(&self, dense: &[f64]) -> f64 {
        let mut s = 0.0;
        for (i, v) in self.iter() {
            s += v * dense[i];
        }
        s
    }

    /// `y += a·x`.
    #[inline]
    pub fn axpy(&self, a: f64, y: &mut [f64]) {
        for (i, v) in self.iter() {
            y[i] += a * v;
        }
    }

    fn scaled(&self, s: f64) -> Self {
        Self {
            indices: self.indices.clone(),
            values: self.values.iter().map(|v| v * s).collect(),
        }
    }
}

/// Summary statistics echoed in log headers.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetStats {
    pub n: usize,
    pub d: usize,
    pub nnz: usize,
    pub r_max: f64,
    pub positives: usize,
}

/// The data matrix `A ∈ R^{d×n}` (one column per datapoint) with labels.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseDataset {
    d: usize,
    columns: Vec<SparseVector>,
    labels: Vec<Label>,
    sq_norms: Vec<f64>,
    r_max: f64,
}

impl SparseDataset {
    pub fn new(d: usize, columns: Vec<SparseVector>, labels: Vec<Label>) -> Result<Self> {
        if columns.len() != labels.len() {
            return Err(Error::dimension(format!(
                "{} columns but {} labels",
                columns.len(),
                labels.len()
            )));
        }
        if columns.is_empty() {
            return Err(Error::config("empty dataset"));
        }
        for (i, c) in columns.iter().enumerate() {
            if let Some(&last) = c.indices.last() {
                if last >= d {
                    return Err(Error::dimension(format!(
                        "column {i} has feature index {last} but d = {d}"
                    )));
                }
            }
        }
        let sq_norms: Vec<f64> = columns.iter().map(SparseVector::norm_sq).collect();
        let r_max = sq_norms.iter().copied().fold(0.0, f64::max);
        Ok(Self {
            d,
            columns,
            labels,
            sq_norms,
            r_max,
        })
    }

    /// Dataset from dense columns (each inner slice is one datapoint of length `d`).
    pub fn from_dense_columns(d: usize, columns: &[Vec<f64>], labels: Vec<Label>) -> Result<Self> {
        let cols = columns
            .iter()
            .map(|c| {
                if c.len() != d {
                    Err(Error::dimension(format!("column of length {} but d = {d}", c.len())))
                } else {
                    Ok(SparseVector::from_dense(c))
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(d, cols, labels)
    }

    /// Number of datapoints.
    pub fn n(&self) -> usize {
        self.columns.len()
    }

    /// Feature dimension.
    pub fn d(&self) -> usize {
        self.d
    }

    pub fn column(&self, i: usize) -> &SparseVector {
        &self.columns[i]
    }

    pub fn columns(&self) -> &[SparseVector] {
        &self.columns
    }

    pub fn label(&self, i: usize) -> Label {
        self.labels[i]
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    /// `‖x_i‖²`.
    pub fn sq_norm(&self, i: usize) -> f64 {
        self.sq_norms[i]
    }

    /// `max_i ‖x_i‖²`.
    pub fn r_max(&self) -> f64 {
        self.r_max
    }

    pub fn nnz(&self) -> usize {
        self.columns.iter().map(SparseVector::nnz).sum()
    }

    pub fn stats(&self) -> DatasetStats {
        DatasetStats {
            n: self.n(),
            d: self.d,
            nnz: self.nnz(),
            r_max: self.r_max,
            positives: self.labels.iter().filter(|l| **l == Label::Positive).count(),
        }
    }

    /// `A·v` for a dense `v ∈ R^n`, accumulated column by column in index order.
    pub fn mul(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.n() {
            return Err(Error::dimension(format!(
                "vector of length {} but n = {}",
                v.len(),
                self.n()
            )));
        }
        let mut out = vec![0.0; self.d];
        for (c, &vi) in self.columns.iter().zip(v) {
            if vi != 0.0 {
                c.axpy(vi, &mut out);
            }
        }
        Ok(out)
    }

    /// `Σ_j coeffs[j] · x_{indices[j]}`.
    pub fn mul_subset(&self, indices: &[usize], coeffs: &[f64]) -> Vec<f64> {
        debug_assert_eq!(indices.len(), coeffs.len());
        let mut out = vec![0.0; self.d];
        for (&i, &c) in indices.iter().zip(coeffs) {
            if c != 0.0 {
                self.columns[i].axpy(c, &mut out);
            }
        }
        out
    }

    /// `Aᵀ u`, i.e. all margins `x_iᵀ u`.
    pub fn mul_transpose(&self, u: &[f64]) -> Vec<f64> {
        self.columns.iter().map(|c| c.dot(u)).collect()
    }

    /// Copy with every nonzero column scaled to unit Euclidean norm.
    pub fn normalize_columns(&self) -> Self {
        let columns: Vec<SparseVector> = self
            .columns
            .iter()
            .zip(&self.sq_norms)
            .map(|(c, &s)| if s > 0.0 { c.scaled(1.0 / s.sqrt()) } else { c.clone() })
            .collect();
        Self::new(self.d, columns, self.labels.clone()).expect("normalization keeps invariants")
    }

    /// Copy with datapoints reordered: new datapoint `j` is old datapoint `perm[j]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        if perm.len() != self.n() {
            return Err(Error::dimension("permutation length differs from n"));
        }
        let mut seen = vec![false; self.n()];
        for &p in perm {
            if p >= self.n() || std::mem::replace(&mut seen[p], true) {
                return Err(Error::dimension("not a permutation"));
            }
        }
        let columns = perm.iter().map(|&p| self.columns[p].clone()).collect();
        let labels = perm.iter().map(|&p| self.labels[p]).collect();
        Self::new(self.d, columns, labels)
    }

    /// Writes the dataset in LIBSVM text format with 1-based indices.
    pub fn write_libsvm<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for (c, l) in self.columns.iter().zip(&self.labels) {
            out.write_all(match l {
                Label::Positive => b"+1",
                Label::Negative => b"-1",
            })?;
            for (i, v) in c.iter() {
                write!(out, " {}:{}", i + 1, v)?;
            }
            out.write_all(b"\n")?;
        }
        out.flush()
    }

    pub fn to_libsvm_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_libsvm(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("LIBSVM output is ASCII")
    }
}

fn parse_error(line: usize, offset: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        offset,
        message: message.into(),
    }
}

/// Parses LIBSVM text: `label index:value …` per line, `#` starting a comment.
///
/// Labels `+1`, `1`, `-1` and `0` are accepted (`0` means `−1`). Indices are
/// 1-based in the file and strictly increasing within a line. `d_override`
/// widens the feature dimension beyond the largest index seen.
pub fn parse_libsvm<R: BufRead>(mut reader: R, d_override: Option<usize>) -> Result<SparseDataset> {
    let mut columns = Vec::new();
    let mut labels = Vec::new();
    let mut max_index = 0usize;
    let mut buf = String::new();
    let mut line_no = 0usize;
    let mut line_start = 0usize;

    loop {
        buf.clear();
        let read = reader.read_line(&mut buf)?;
        if read == 0 {
            break;
        }
        line_no += 1;
        let content = match buf.find('#') {
            Some(p) => &buf[..p],
            None => buf.as_str(),
        };
        let mut tokens = tokens_with_offsets(content);
        if let Some((label_off, label_tok)) = tokens.next() {
            let label = match label_tok {
                "+1" | "1" => Label::Positive,
                "-1" | "0" => Label::Negative,
                other => {
                    return Err(parse_error(
                        line_no,
                        line_start + label_off,
                        format!("label {other:?} is not one of +1, 1, -1, 0"),
                    ))
                }
            };
            let mut indices = Vec::new();
            let mut values = Vec::new();
            for (off, tok) in tokens {
                let at = line_start + off;
                let (idx, val) = tok
                    .split_once(':')
                    .ok_or_else(|| parse_error(line_no, at, format!("expected index:value, got {tok:?}")))?;
                let idx: usize = idx
                    .parse()
                    .map_err(|_| parse_error(line_no, at, format!("bad feature index {idx:?}")))?;
                if idx == 0 {
                    return Err(parse_error(line_no, at, "feature indices are 1-based"));
                }
                let val: f64 = val
                    .parse()
                    .map_err(|_| parse_error(line_no, at, format!("bad feature value {val:?}")))?;
                if !val.is_finite() {
                    return Err(parse_error(line_no, at, format!("non-finite feature value {val}")));
                }
                let idx = idx - 1;
                if let Some(&last) = indices.last() {
                    if idx <= last {
                        return Err(parse_error(
                            line_no,
                            at,
                            format!("feature index {} does not increase past {}", idx + 1, last + 1),
                        ));
                    }
                }
                max_index = max_index.max(idx + 1);
                indices.push(idx);
                values.push(val);
            }
            let column = SparseVector::from_pairs(indices.into_iter().zip(values))
                .expect("indices and values validated above");
            columns.push(column);
            labels.push(label);
        }
        line_start += read;
    }

    if columns.is_empty() {
        return Err(parse_error(line_no, line_start, "empty dataset"));
    }
    let d = match d_override {
        Some(d) if d < max_index => {
            return Err(Error::config(format!(
                "dimension override {d} is smaller than the largest feature index {max_index}"
            )))
        }
        Some(d) => d,
        None => max_index,
    };
    SparseDataset::new(d, columns, labels)
}

/// Whitespace-separated tokens with their byte offsets within `s`.
fn tokens_with_offsets(s: &str) -> impl Iterator<Item = (usize, &str)> {
    s.split_ascii_whitespace()
        .map(move |t| (t.as_ptr() as usize - s.as_ptr() as usize, t))
}

/// Reproducible synthetic classification data.
///
/// Each feature of each datapoint is present with probability `sparsity` and
/// drawn from `N(0, 1)`; a datapoint that comes out empty is redrawn, and
/// columns are then normalized to unit norm. Labels are
/// `sign(x_iᵀ w°)` for a Gaussian ground truth `w°`, with 5% of them flipped.
pub fn generate_synthetic(n: usize, d: usize, sparsity: f64, seed: u64) -> Result<SparseDataset> {
    if n == 0 || d == 0 {
        return Err(Error::config("synthetic data needs n ≥ 1 and d ≥ 1"));
    }
    if !(sparsity > 0.0 && sparsity <= 1.0) {
        return Err(Error::config(format!("sparsity must lie in (0, 1], got {sparsity}")));
    }
    const LABEL_NOISE: f64 = 0.05;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let truth: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
    let mut columns = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let mut pairs = Vec::new();
        while pairs.is_empty() {
            for j in 0..d {
                if sparsity >= 1.0 || rng.random::<f64>() < sparsity {
                    let v: f64 = rng.sample(StandardNormal);
                    pairs.push((j, v));
                }
            }
        }
        let col = SparseVector::from_pairs(pairs)?;
        let mut label = Label::from_sign(col.dot(&truth));
        if rng.random::<f64>() < LABEL_NOISE {
            label = label.flipped();
        }
        columns.push(col);
        labels.push(label);
    }
    Ok(SparseDataset::new(d, columns, labels)?.normalize_columns())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PartitionStrategy {
    /// Seeded shuffle, then round-robin assignment.
    BalancedRandom,
    /// Consecutive index blocks.
    Contiguous,
}

impl std::str::FromStr for PartitionStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "balanced-random" | "random" => Ok(Self::BalancedRandom),
            "contiguous" => Ok(Self::Contiguous),
            _ => Err(Error::config(format!(
                "unknown partition strategy {s:?}; expected balanced-random or contiguous"
            ))),
        }
    }
}

/// Disjoint assignment of the datapoints `0..n` to `K` workers.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Partition {
    owner: Vec<usize>,
    blocks: Vec<Vec<usize>>,
}

impl Partition {
    pub fn new(n: usize, k: usize, strategy: PartitionStrategy, seed: u64) -> Result<Self> {
        if k == 0 || k > n {
            return Err(Error::config(format!("need 1 ≤ K ≤ n, got K = {k}, n = {n}")));
        }
        let blocks = match strategy {
            PartitionStrategy::Contiguous => {
                let (base, extra) = (n / k, n % k);
                let mut start = 0;
                (0..k)
                    .map(|b| {
                        let len = base + usize::from(b < extra);
                        let block: Vec<usize> = (start..start + len).collect();
                        start += len;
                        block
                    })
                    .collect()
            }
            PartitionStrategy::BalancedRandom => {
                let mut order: Vec<usize> = (0..n).collect();
                order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
                let mut blocks = vec![Vec::with_capacity(n / k + 1); k];
                for (pos, i) in order.into_iter().enumerate() {
                    blocks[pos % k].push(i);
                }
                for b in &mut blocks {
                    b.sort_unstable();
                }
                blocks
            }
        };
        Self::from_blocks(n, blocks)
    }

    /// Partition from explicit blocks; they must be disjoint, nonempty and cover `0..n`.
    pub fn from_blocks(n: usize, blocks: Vec<Vec<usize>>) -> Result<Self> {
        if blocks.is_empty() {
            return Err(Error::config("partition needs at least one block"));
        }
        let mut owner = vec![usize::MAX; n];
        for (k, block) in blocks.iter().enumerate() {
            if block.is_empty() {
                return Err(Error::config(format!("block {k} is empty")));
            }
            for &i in block {
                if i >= n {
                    return Err(Error::dimension(format!("index {i} out of range for n = {n}")));
                }
                if owner[i] != usize::MAX {
                    return Err(Error::config(format!("index {i} assigned twice")));
                }
                owner[i] = k;
            }
        }
        if let Some(i) = owner.iter().position(|&o| o == usize::MAX) {
            return Err(Error::config(format!("index {i} is not assigned to any block")));
        }
        Ok(Self { owner, blocks })
    }

    /// Number of workers `K`.
    pub fn k(&self) -> usize {
        self.blocks.len()
    }

    pub fn n(&self) -> usize {
        self.owner.len()
    }

    /// The index set `P_k`, sorted ascending.
    pub fn block(&self, k: usize) -> &[usize] {
        &self.blocks[k]
    }

    pub fn owner(&self, i: usize) -> usize {
        self.owner[i]
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.blocks.iter().map(Vec::len).collect()
    }

    /// Whether every block has exactly `n/K` elements.
    pub fn is_equal_split(&self) -> bool {
        let n0 = self.blocks[0].len();
        self.blocks.iter().all(|b| b.len() == n0)
    }

    /// Entries of `full` restricted to `P_k`, in block order.
    pub fn gather(&self, k: usize, full: &[f64]) -> Vec<f64> {
        self.blocks[k].iter().map(|&i| full[i]).collect()
    }

    /// The masked vector `v_[k] ∈ R^n`.
    pub fn masked(&self, k: usize, full: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; full.len()];
        for &i in &self.blocks[k] {
            out[i] = full[i];
        }
        out
    }
}
