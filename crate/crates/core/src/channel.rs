//! Finite-alphabet probability primitives.
//!
//! Alphabets are index sets `0..m`. All information quantities are in bits,
//! with `0 log 0 = 0` and entries below [`ZERO_FLOOR`] treated as exact zeros.

use std::fmt;

use crate::error::{Error, Result};

/// Largest deviation of a row sum from 1 accepted when validating input.
pub const ROW_SUM_TOL: f64 = 1e-9;

/// Probabilities below this are dropped from entropy sums.
pub const ZERO_FLOOR: f64 = 1e-15;

/// Default cap on the size of any product alphabet we are willing to build.
pub const DEFAULT_ALPHABET_CAP: usize = 1 << 20;

/// A probability distribution on `0..len`.
#[derive(Clone, PartialEq)]
pub struct ProbVector(Vec<f64>);

impl ProbVector {
    /// Validates `probs` and renormalizes it so the entries sum to 1 up to
    /// rounding.
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        check_row(&probs, 0)?;
        Ok(Self::normalized(probs))
    }

    pub fn uniform(len: usize) -> Self {
        assert!(len > 0, "empty alphabet");
        Self(vec![1.0 / len as f64; len])
    }

    pub fn point_mass(len: usize, at: usize) -> Self {
        assert!(at < len, "point mass outside alphabet");
        let mut v = vec![0.0; len];
        v[at] = 1.0;
        Self(v)
    }

    /// Renormalizes a nonnegative vector without further checks.
    pub(crate) fn normalized(mut probs: Vec<f64>) -> Self {
        let sum: f64 = probs.iter().sum();
        debug_assert!(sum > 0.0);
        for p in probs.iter_mut() {
            *p /= sum;
        }
        Self(probs)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn entropy(&self) -> f64 {
        entropy(&self.0)
    }
}

impl AsRef<[f64]> for ProbVector {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

impl std::ops::Index<usize> for ProbVector {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl fmt::Debug for ProbVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_tuple("ProbVector").field(&self.0).finish()
    }
}

fn check_row(row: &[f64], index: usize) -> Result<()> {
    if row.is_empty() {
        return Err(Error::Empty);
    }
    for (col, &value) in row.iter().enumerate() {
        if !value.is_finite() || value < 0.0 {
            return Err(Error::NegativeEntry {
                row: index,
                col,
                value,
            });
        }
    }
    let sum: f64 = row.iter().sum();
    if (sum - 1.0).abs() > ROW_SUM_TOL {
        return Err(Error::RowSumNotOne { row: index, sum });
    }
    Ok(())
}

/// A row-stochastic matrix `p(y|x)`, stored row-major.
#[derive(Clone, PartialEq)]
pub struct ChannelMatrix {
    inputs: usize,
    outputs: usize,
    data: Vec<f64>,
}

impl ChannelMatrix {
    /// Same as [`validate_channel`].
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        validate_channel(&rows)
    }

    /// Builds a channel from row-major data. Rows are validated like
    /// [`validate_channel`] does.
    pub fn from_flat(inputs: usize, outputs: usize, data: Vec<f64>) -> Result<Self> {
        if inputs == 0 || outputs == 0 {
            return Err(Error::Empty);
        }
        if data.len() != inputs * outputs {
            return Err(Error::DimensionMismatch {
                what: "flat channel data length",
                expected: inputs * outputs,
                found: data.len(),
            });
        }
        for (x, row) in data.chunks(outputs).enumerate() {
            check_row(row, x)?;
        }
        Ok(Self::from_flat_unchecked(inputs, outputs, data))
    }

    /// Renormalizes every row of nonnegative `data`; no other checks.
    pub(crate) fn from_flat_unchecked(inputs: usize, outputs: usize, mut data: Vec<f64>) -> Self {
        for row in data.chunks_mut(outputs) {
            let sum: f64 = row.iter().sum();
            for v in row.iter_mut() {
                *v /= sum;
            }
        }
        Self {
            inputs,
            outputs,
            data,
        }
    }

    pub fn identity(size: usize) -> Self {
        let mut data = vec![0.0; size * size];
        for i in 0..size {
            data[i * size + i] = 1.0;
        }
        Self {
            inputs: size,
            outputs: size,
            data,
        }
    }

    /// Binary symmetric channel with crossover probability `p`.
    pub fn bsc(p: f64) -> Self {
        assert!((0.0..=1.0).contains(&p), "crossover {p} outside [0, 1]");
        Self {
            inputs: 2,
            outputs: 2,
            data: vec![1.0 - p, p, p, 1.0 - p],
        }
    }

    /// Every input is mapped to the same output distribution.
    pub fn constant(inputs: usize, row: &ProbVector) -> Self {
        let mut data = Vec::with_capacity(inputs * row.len());
        for _ in 0..inputs {
            data.extend_from_slice(row.as_slice());
        }
        Self {
            inputs,
            outputs: row.len(),
            data,
        }
    }

    pub fn input_size(&self) -> usize {
        self.inputs
    }

    pub fn output_size(&self) -> usize {
        self.outputs
    }

    pub fn row(&self, x: usize) -> &[f64] {
        &self.data[x * self.outputs..(x + 1) * self.outputs]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.data.chunks(self.outputs)
    }

    pub fn entry(&self, x: usize, y: usize) -> f64 {
        self.data[x * self.outputs + y]
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.data
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.rows().map(<[f64]>::to_vec).collect()
    }

    /// Largest absolute entrywise difference; `INFINITY` if shapes differ.
    pub fn max_abs_diff(&self, other: &ChannelMatrix) -> f64 {
        if self.inputs != other.inputs || self.outputs != other.outputs {
            return f64::INFINITY;
        }
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// `p W` for a raw weight vector over inputs (not necessarily normalized).
    pub(crate) fn push_forward(&self, p: &[f64]) -> Vec<f64> {
        debug_assert_eq!(p.len(), self.inputs);
        let mut out = vec![0.0; self.outputs];
        for (row, &px) in self.rows().zip(p) {
            if px == 0.0 {
                continue;
            }
            for (o, &w) in out.iter_mut().zip(row) {
                *o += px * w;
            }
        }
        out
    }

    /// Permutes output symbols: output `y` of `self` becomes output `perm[y]`.
    pub fn relabel_outputs(&self, perm: &[usize]) -> ChannelMatrix {
        assert_eq!(perm.len(), self.outputs);
        let mut data = vec![0.0; self.data.len()];
        for x in 0..self.inputs {
            for y in 0..self.outputs {
                data[x * self.outputs + perm[y]] = self.entry(x, y);
            }
        }
        Self {
            inputs: self.inputs,
            outputs: self.outputs,
            data,
        }
    }

    /// Permutes input symbols: row `x` of `self` becomes row `perm[x]`.
    pub fn relabel_inputs(&self, perm: &[usize]) -> ChannelMatrix {
        assert_eq!(perm.len(), self.inputs);
        let mut data = vec![0.0; self.data.len()];
        for x in 0..self.inputs {
            data[perm[x] * self.outputs..(perm[x] + 1) * self.outputs]
                .copy_from_slice(self.row(x));
        }
        Self {
            inputs: self.inputs,
            outputs: self.outputs,
            data,
        }
    }
}

impl fmt::Debug for ChannelMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ChannelMatrix")
            .field("inputs", &self.inputs)
            .field("outputs", &self.outputs)
            .field("rows", &self.to_rows())
            .finish()
    }
}

/// Checks that `rows` is a nonempty rectangular row-stochastic matrix.
///
/// Rows are accepted when every entry is nonnegative and the row sum is
/// within [`ROW_SUM_TOL`] of one. Accepted rows are stored as given.
pub fn validate_channel(rows: &[Vec<f64>]) -> Result<ChannelMatrix> {
    let first = rows.first().ok_or(Error::Empty)?;
    let outputs = first.len();
    if outputs == 0 {
        return Err(Error::Empty);
    }
    let mut data = Vec::with_capacity(rows.len() * outputs);
    for (x, row) in rows.iter().enumerate() {
        if row.len() != outputs {
            return Err(Error::NotRectangular {
                row: x,
                expected: outputs,
                found: row.len(),
            });
        }
        check_row(row, x)?;
        data.extend_from_slice(row);
    }
    Ok(ChannelMatrix::from_flat_unchecked(rows.len(), outputs, data))
}

/// Shannon entropy in bits of a (possibly unnormalized-by-rounding) vector.
pub fn entropy(p: &[f64]) -> f64 {
    p.iter()
        .filter(|&&v| v > ZERO_FLOOR)
        .map(|&v| -v * v.log2())
        .sum()
}

/// Binary entropy function `h(q)`.
pub fn binary_entropy(q: f64) -> f64 {
    entropy(&[q, 1.0 - q])
}

fn check_input(p: &ProbVector, w: &ChannelMatrix) -> Result<()> {
    if p.len() != w.input_size() {
        return Err(Error::DimensionMismatch {
            what: "distribution length vs channel inputs",
            expected: w.input_size(),
            found: p.len(),
        });
    }
    Ok(())
}

/// The output marginal `p W`.
pub fn output_distribution(p: &ProbVector, w: &ChannelMatrix) -> Result<ProbVector> {
    check_input(p, w)?;
    Ok(ProbVector::normalized(w.push_forward(p.as_slice())))
}

/// `I(X;Y)` in bits for `X ~ p` and `Y|X ~ w`.
pub fn mutual_information(p: &ProbVector, w: &ChannelMatrix) -> Result<f64> {
    check_input(p, w)?;
    Ok(mutual_information_raw(p.as_slice(), w))
}

pub(crate) fn mutual_information_raw(p: &[f64], w: &ChannelMatrix) -> f64 {
    let h_out = entropy(&w.push_forward(p));
    let h_cond: f64 = p
        .iter()
        .zip(w.rows())
        .filter(|(&px, _)| px > 0.0)
        .map(|(&px, row)| px * entropy(row))
        .sum();
    (h_out - h_cond).max(0.0)
}

/// Cascade `X -> w1 -> w2`, i.e. the matrix product `w1 w2`.
pub fn compose(w1: &ChannelMatrix, w2: &ChannelMatrix) -> Result<ChannelMatrix> {
    if w1.output_size() != w2.input_size() {
        return Err(Error::DimensionMismatch {
            what: "first channel outputs vs second channel inputs",
            expected: w1.output_size(),
            found: w2.input_size(),
        });
    }
    let mut data = Vec::with_capacity(w1.input_size() * w2.output_size());
    for row in w1.rows() {
        data.extend(w2.push_forward(row));
    }
    Ok(ChannelMatrix::from_flat_unchecked(
        w1.input_size(),
        w2.output_size(),
        data,
    ))
}

/// Channel from `X` to the tuple of all component outputs, with components
/// conditionally independent given `X`.
///
/// The output index is mixed-radix with the first component most significant.
pub fn product_channel(ws: &[ChannelMatrix], cap: usize) -> Result<ChannelMatrix> {
    let first = ws.first().ok_or(Error::Empty)?;
    let inputs = first.input_size();
    let mut size: u128 = 1;
    for w in ws {
        if w.input_size() != inputs {
            return Err(Error::DimensionMismatch {
                what: "product channel component inputs",
                expected: inputs,
                found: w.input_size(),
            });
        }
        size = size.saturating_mul(w.output_size() as u128);
        if size > cap as u128 {
            return Err(Error::AlphabetOverflow {
                size,
                cap: cap as u128,
            });
        }
    }
    let outputs = size as usize;
    let mut data = Vec::with_capacity(inputs * outputs);
    for x in 0..inputs {
        let mut row = vec![1.0];
        for w in ws {
            let r = w.row(x);
            row = row
                .iter()
                .flat_map(|&a| r.iter().map(move |&b| a * b))
                .collect();
        }
        data.extend(row);
    }
    Ok(ChannelMatrix::from_flat_unchecked(inputs, outputs, data))
}

/// A one-sender, `k`-receiver memoryless broadcast channel.
///
/// The receivers are kept in the claimed order `Y_1, Y_2, ..., Y_k` (best
/// first). The ordering itself is checked by [`crate::ordering`], not here.
#[derive(Debug, Clone, PartialEq)]
pub struct BroadcastChannel {
    receivers: Vec<ChannelMatrix>,
}

impl BroadcastChannel {
    pub fn new(receivers: Vec<ChannelMatrix>) -> Result<Self> {
        if receivers.len() < 2 {
            return Err(Error::InvalidArgument(format!(
                "a broadcast channel needs at least 2 receivers, got {}",
                receivers.len()
            )));
        }
        let inputs = receivers[0].input_size();
        for w in &receivers[1..] {
            if w.input_size() != inputs {
                return Err(Error::DimensionMismatch {
                    what: "receiver input alphabet",
                    expected: inputs,
                    found: w.input_size(),
                });
            }
        }
        Ok(Self { receivers })
    }

    /// Degraded cascade `X -> Y_1 -> Y_2 -> ...` of binary symmetric channels,
    /// where receiver `l` sees a BSC with the given end-to-end crossover.
    pub fn bsc_cascade(crossovers: &[f64]) -> Self {
        Self::new(crossovers.iter().map(|&p| ChannelMatrix::bsc(p)).collect())
            .expect("at least two crossovers")
    }

    pub fn input_size(&self) -> usize {
        self.receivers[0].input_size()
    }

    pub fn num_receivers(&self) -> usize {
        self.receivers.len()
    }

    /// Receiver `l`, zero-based (`receiver(0)` is `Y_1`).
    pub fn receiver(&self, l: usize) -> &ChannelMatrix {
        &self.receivers[l]
    }

    pub fn receivers(&self) -> &[ChannelMatrix] {
        &self.receivers
    }
}
