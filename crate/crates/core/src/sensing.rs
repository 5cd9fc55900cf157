//! Signals, the sparsified Gaussian design, and linear measurements.
//!
//! The design is an `N x M` matrix whose entries are `s_ij * r_ij`, with
//! `s_ij ~ N(0, 1)` and `r_ij ~ Bernoulli(gamma)`. Only surviving entries are
//! stored, column by column, because both measurement and decoding walk the
//! design one measurement at a time.

use std::fmt::Write as _;
use std::path::Path;

use rand::seq::index;
use rand_distr::{Binomial, Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::seed::stream_rng;

#[derive(Debug, Error)]
pub enum SensingError {
    #[error("sparsification probability must lie in (0, 1], got {0}")]
    InvalidGamma(f64),
    #[error("dimension must be positive: {0}")]
    EmptyDimension(&'static str),
    #[error("dimension {0} exceeds the supported row index range")]
    DimensionTooLarge(usize),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("non-finite value at index {0}")]
    NonFinite(usize),
    #[error("noise standard deviation must be positive and finite, got {0}")]
    InvalidSigma(f64),
    #[error("index {index} out of range for dimension {n}")]
    IndexOutOfRange { index: usize, n: usize },
    #[error("signal file: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = SensingError> = std::result::Result<T, E>;

/// A length-`N` real signal with a cached count of its nonzero entries.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Signal {
    values: Vec<f64>,
    sparsity: usize,
}

impl Signal {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(SensingError::EmptyDimension("N"));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(SensingError::NonFinite(i));
        }
        let sparsity = values.iter().filter(|&&v| v != 0.0).count();
        Ok(Self { values, sparsity })
    }

    /// The all-zero signal of length `n`.
    ///
    /// # Panics
    /// If `n == 0`.
    pub fn zeros(n: usize) -> Self {
        assert!(n > 0, "signal dimension must be positive");
        Self { values: vec![0.0; n], sparsity: 0 }
    }

    /// Builds a signal from `(index, value)` pairs. Later pairs overwrite
    /// earlier ones at the same index.
    pub fn from_sparse(n: usize, entries: &[(usize, f64)]) -> Result<Self> {
        if n == 0 {
            return Err(SensingError::EmptyDimension("N"));
        }
        let mut values = vec![0.0; n];
        for &(index, value) in entries {
            if index >= n {
                return Err(SensingError::IndexOutOfRange { index, n });
            }
            values[index] = value;
        }
        Self::new(values)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Number of nonzero entries (K).
    pub fn sparsity(&self) -> usize {
        self.sparsity
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, i: usize) -> f64 {
        self.values[i]
    }

    /// Sorted indices of the nonzero entries.
    pub fn support(&self) -> Vec<usize> {
        self.nonzeros().map(|(i, _)| i).collect()
    }

    pub fn nonzeros(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.values.iter().enumerate().filter(|(_, &v)| v != 0.0).map(|(i, &v)| (i, v))
    }

    /// Sum of squared entries.
    pub fn energy(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum()
    }

    /// Parses the plain-text signal format: a header line `N K` followed by
    /// `K` lines of `index value` (0-based index). Blank lines and lines
    /// starting with `#` are ignored.
    pub fn parse_text(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .map(str::trim)
            .enumerate()
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));

        let (_, header) = lines.next().ok_or_else(|| SensingError::Parse("empty file".into()))?;
        let mut fields = header.split_whitespace();
        let n = parse_field::<usize>(fields.next(), 1, "N")?;
        let k = parse_field::<usize>(fields.next(), 1, "K")?;
        if fields.next().is_some() {
            return Err(SensingError::Parse("line 1: expected `N K`".into()));
        }
        if n == 0 {
            return Err(SensingError::EmptyDimension("N"));
        }

        let mut values = vec![0.0; n];
        let mut seen = 0usize;
        for (lineno, line) in lines {
            let lineno = lineno + 1;
            let mut fields = line.split_whitespace();
            let index = parse_field::<usize>(fields.next(), lineno, "index")?;
            let value = parse_field::<f64>(fields.next(), lineno, "value")?;
            if fields.next().is_some() {
                return Err(SensingError::Parse(format!("line {lineno}: expected `index value`")));
            }
            if index >= n {
                return Err(SensingError::IndexOutOfRange { index, n });
            }
            if !value.is_finite() || value == 0.0 {
                return Err(SensingError::Parse(format!(
                    "line {lineno}: value must be finite and nonzero"
                )));
            }
            if values[index] != 0.0 {
                return Err(SensingError::Parse(format!("line {lineno}: duplicate index {index}")));
            }
            values[index] = value;
            seen += 1;
        }
        if seen != k {
            return Err(SensingError::Parse(format!("header declares K={k} but {seen} entries follow")));
        }
        Self::new(values)
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("{} {}\n", self.len(), self.sparsity);
        for (i, v) in self.nonzeros() {
            let _ = writeln!(out, "{i} {v}");
        }
        out
    }

    pub fn read_from(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse_text(&std::fs::read_to_string(path)?)
    }

    pub fn write_to(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }
}

fn parse_field<T: std::str::FromStr>(field: Option<&str>, line: usize, what: &str) -> Result<T> {
    let raw = field.ok_or_else(|| SensingError::Parse(format!("line {line}: missing {what}")))?;
    raw.parse()
        .map_err(|_| SensingError::Parse(format!("line {line}: cannot parse {what} from `{raw}`")))
}

/// Borrowed view of one design column: ascending row indices and the
/// Gaussian values stored at them.
#[derive(Debug, Clone, Copy)]
pub struct DesignColumn<'a> {
    pub rows: &'a [u32],
    pub values: &'a [f64],
}

impl<'a> DesignColumn<'a> {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + 'a {
        self.rows.iter().zip(self.values).map(|(&i, &s)| (i as usize, s))
    }
}

/// The sparsified Gaussian sensing matrix in compressed-column form.
///
/// The matrix is never serialized; it is a pure function of
/// `(n, m, gamma, seed)` and is regenerated from those four values.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseDesign {
    n: usize,
    m: usize,
    gamma: f64,
    seed: u64,
    col_ptr: Vec<usize>,
    rows: Vec<u32>,
    values: Vec<f64>,
}

impl SparseDesign {
    /// Generates the design column by column. Column `j` is drawn from its
    /// own ChaCha stream `(seed, j)`, so the result does not depend on the
    /// order in which columns are produced.
    pub fn generate(n: usize, m: usize, gamma: f64, seed: u64) -> Result<Self> {
        check_design_args(n, m, gamma)?;
        let columns = (0..m).map(|j| Self::generate_column(n, gamma, seed, j));
        Ok(Self::assemble(n, m, gamma, seed, columns))
    }

    /// Same output as [`SparseDesign::generate`], with columns drawn on the
    /// rayon pool.
    pub fn generate_parallel(n: usize, m: usize, gamma: f64, seed: u64) -> Result<Self> {
        check_design_args(n, m, gamma)?;
        let columns: Vec<_> =
            (0..m).into_par_iter().map(|j| Self::generate_column(n, gamma, seed, j)).collect();
        Ok(Self::assemble(n, m, gamma, seed, columns))
    }

    /// Draws a single column in isolation.
    ///
    /// The survivor count comes from `Binomial(n, gamma)` and the surviving
    /// rows are a uniform subset of that size, which matches `n` independent
    /// Bernoulli trials at `O(n * gamma)` expected cost. Arguments are
    /// assumed valid; [`SparseDesign::generate`] checks them.
    pub fn generate_column(n: usize, gamma: f64, seed: u64, j: usize) -> (Vec<u32>, Vec<f64>) {
        let mut rng = stream_rng(seed, j as u64);
        let mut rows: Vec<u32> = if gamma >= 1.0 {
            (0..n as u32).collect()
        } else {
            let count = Binomial::new(n as u64, gamma)
                .expect("gamma validated in (0, 1)")
                .sample(&mut rng) as usize;
            index::sample(&mut rng, n, count).into_iter().map(|i| i as u32).collect()
        };
        rows.sort_unstable();
        let values = rows
            .iter()
            .map(|_| loop {
                // An exact zero would make the ratio statistic undefined.
                let s: f64 = StandardNormal.sample(&mut rng);
                if s != 0.0 {
                    break s;
                }
            })
            .collect();
        (rows, values)
    }

    fn assemble(
        n: usize,
        m: usize,
        gamma: f64,
        seed: u64,
        columns: impl IntoIterator<Item = (Vec<u32>, Vec<f64>)>,
    ) -> Self {
        let mut col_ptr = Vec::with_capacity(m + 1);
        col_ptr.push(0);
        let expected = (n as f64 * m as f64 * gamma * 1.05) as usize + 16;
        let mut rows = Vec::with_capacity(expected);
        let mut values = Vec::with_capacity(expected);
        for (r, v) in columns {
            rows.extend_from_slice(&r);
            values.extend_from_slice(&v);
            col_ptr.push(rows.len());
        }
        Self { n, m, gamma, seed, col_ptr, rows, values }
    }

    /// Number of rows (signal dimension N).
    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of columns (measurements M).
    pub fn m(&self) -> usize {
        self.m
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Total number of stored (surviving) entries.
    pub fn nnz(&self) -> usize {
        self.rows.len()
    }

    pub fn column(&self, j: usize) -> DesignColumn<'_> {
        let range = self.col_ptr[j]..self.col_ptr[j + 1];
        DesignColumn { rows: &self.rows[range.clone()], values: &self.values[range] }
    }

    pub fn columns(&self) -> impl Iterator<Item = DesignColumn<'_>> + '_ {
        (0..self.m).map(move |j| self.column(j))
    }

    /// Collects the noiseless measurements `y_j = sum_i x_i s_ij r_ij`,
    /// accumulating each column in ascending row order.
    pub fn measure(&self, signal: &Signal) -> Result<MeasurementSet> {
        self.check_dimension(signal)?;
        let x = signal.values();
        let y = self
            .columns()
            .map(|col| {
                let mut acc = 0.0;
                for (i, s) in col.iter() {
                    acc += x[i] * s;
                }
                acc
            })
            .collect();
        Ok(MeasurementSet { y, sigma: 0.0, noise_seed: None })
    }

    fn check_dimension(&self, signal: &Signal) -> Result<()> {
        if signal.len() != self.n {
            return Err(SensingError::DimensionMismatch { expected: self.n, found: signal.len() });
        }
        Ok(())
    }
}

fn check_design_args(n: usize, m: usize, gamma: f64) -> Result<()> {
    if n == 0 {
        return Err(SensingError::EmptyDimension("N"));
    }
    if m == 0 {
        return Err(SensingError::EmptyDimension("M"));
    }
    if n > u32::MAX as usize {
        return Err(SensingError::DimensionTooLarge(n));
    }
    if !(gamma > 0.0 && gamma <= 1.0) {
        return Err(SensingError::InvalidGamma(gamma));
    }
    Ok(())
}

/// The `M` measurements produced by a design, possibly noise-corrupted.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MeasurementSet {
    y: Vec<f64>,
    sigma: f64,
    noise_seed: Option<u64>,
}

impl MeasurementSet {
    /// Wraps externally supplied measurement values (noiseless).
    pub fn from_values(y: Vec<f64>) -> Result<Self> {
        if let Some(i) = y.iter().position(|v| !v.is_finite()) {
            return Err(SensingError::NonFinite(i));
        }
        Ok(Self { y, sigma: 0.0, noise_seed: None })
    }

    pub fn values(&self) -> &[f64] {
        &self.y
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    /// Standard deviation of the additive noise carried by these values.
    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn noise_seed(&self) -> Option<u64> {
        self.noise_seed
    }

    pub(crate) fn with_noise_meta(mut self, from: &MeasurementSet) -> Self {
        self.sigma = from.sigma;
        self.noise_seed = from.noise_seed;
        self
    }

    /// Returns a copy with independent `N(0, sigma^2)` noise added to each
    /// measurement. If the input is already noisy the recorded sigma is the
    /// combined standard deviation.
    pub fn add_noise(&self, sigma: f64, noise_seed: u64) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(SensingError::InvalidSigma(sigma));
        }
        let mut rng = stream_rng(noise_seed, 0);
        let y = self
            .y
            .iter()
            .map(|&v| {
                let n: f64 = StandardNormal.sample(&mut rng);
                v + sigma * n
            })
            .collect();
        Ok(Self { y, sigma: self.sigma.hypot(sigma), noise_seed: Some(noise_seed) })
    }

    /// Residual measurements `y_j - sum_i partial_i s_ij` over the stored
    /// entries of each column. Only nonzero entries of `partial` contribute,
    /// summed in ascending row order, so subtracting the exact signal from
    /// its own noiseless measurements leaves exact zeros.
    pub fn subtract_contribution(&self, design: &SparseDesign, partial: &Signal) -> Result<Self> {
        design.check_dimension(partial)?;
        if self.y.len() != design.m() {
            return Err(SensingError::DimensionMismatch { expected: design.m(), found: self.y.len() });
        }
        let p = partial.values();
        let y = self
            .y
            .iter()
            .zip(design.columns())
            .map(|(&yj, col)| {
                let mut acc = 0.0;
                for (i, s) in col.iter() {
                    let pi = p[i];
                    if pi != 0.0 {
                        acc += pi * s;
                    }
                }
                yj - acc
            })
            .collect();
        Ok(Self { y, sigma: self.sigma, noise_seed: self.noise_seed })
    }
}
