//! Recovery from ratio statistics.
//!
//! For every measurement `j` whose design column contains coordinate `i`,
//! the ratio `z_ij = y_j / s_ij` equals `x_i` plus a scaled Cauchy
//! perturbation whose scale is the energy of the *other* nonzero
//! coordinates sharing measurement `j`. When that energy is zero the ratio
//! is exactly `x_i`. Two estimators follow from this:
//!
//! * the absolute-minimum estimator declares `x_i = 0` when the smallest
//!   `|z_ij|` is at most `epsilon`;
//! * the tie estimator declares `x_i = v` when at least two ratios agree on
//!   `v`. Under a continuous design a spurious tie has probability zero.
//!
//! [`decode`] runs both in rounds, subtracting recovered coordinates from
//! the measurements between rounds.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::sensing::{MeasurementSet, Signal, SparseDesign};

#[derive(Debug, Error, PartialEq)]
pub enum DecodeError {
    #[error("coordinate {index} out of range for dimension {n}")]
    IndexOutOfRange { index: usize, n: usize },
    #[error("design has {design} columns but {measurements} measurements were supplied")]
    MeasurementCount { design: usize, measurements: usize },
    #[error("invalid decoder configuration: {0}")]
    InvalidConfig(String),
}

pub type Result<T, E = DecodeError> = std::result::Result<T, E>;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecoderConfig {
    /// Zero-detection threshold for the absolute-minimum estimator.
    pub epsilon: f64,
    /// Relative width of a tie cluster, scaled by `max(1, |center|)`.
    pub tie_tol: f64,
    /// Upper bound on decoding rounds.
    pub max_iterations: usize,
    /// Ratios that must coincide before a value is declared.
    pub min_tie_size: usize,
}

impl Default for DecoderConfig {
    fn default() -> Self {
        Self { epsilon: 0.0, tie_tol: 1e-10, max_iterations: 4, min_tie_size: 2 }
    }
}

impl DecoderConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epsilon.is_nan() || self.epsilon < 0.0 {
            return Err(DecodeError::InvalidConfig(format!("epsilon must be >= 0, got {}", self.epsilon)));
        }
        if !(self.tie_tol >= 0.0 && self.tie_tol.is_finite()) {
            return Err(DecodeError::InvalidConfig(format!(
                "tie_tol must be finite and >= 0, got {}",
                self.tie_tol
            )));
        }
        if self.max_iterations == 0 {
            return Err(DecodeError::InvalidConfig("max_iterations must be >= 1".into()));
        }
        if self.min_tie_size < 2 {
            return Err(DecodeError::InvalidConfig(format!(
                "min_tie_size must be >= 2, got {}",
                self.min_tie_size
            )));
        }
        Ok(())
    }
}

/// Ratio statistics of one coordinate: `(j, y_j / s_ij)` for every
/// measurement `j` whose column contains the coordinate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RatioColumn {
    pub coordinate: usize,
    pub entries: Vec<(usize, f64)>,
}

impl RatioColumn {
    pub fn values(&self) -> Vec<f64> {
        self.entries.iter().map(|&(_, z)| z).collect()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "status", content = "value", rename_all = "snake_case")]
pub enum CoordinateStatus {
    Zero,
    Recovered(f64),
    Undetermined,
}

impl CoordinateStatus {
    pub fn is_decided(&self) -> bool {
        !matches!(self, CoordinateStatus::Undetermined)
    }
}

/// Per-round decoding diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct RoundStats {
    pub zeros_declared: usize,
    pub ties_found: usize,
    pub undetermined_remaining: usize,
    /// Stored design entries visited while forming ratio statistics.
    pub design_touches: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecodeResult {
    pub statuses: Vec<CoordinateStatus>,
    pub estimate: Signal,
    pub iterations_used: usize,
    pub rounds: Vec<RoundStats>,
    /// Measurements minus the contribution of `estimate`, as fed to the
    /// round that would follow the last one.
    #[serde(skip)]
    pub residual: MeasurementSet,
}

impl DecodeResult {
    pub fn recovered(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.statuses.iter().enumerate().filter_map(|(i, s)| match *s {
            CoordinateStatus::Recovered(v) => Some((i, v)),
            _ => None,
        })
    }

    pub fn undetermined(&self) -> Vec<usize> {
        self.statuses
            .iter()
            .enumerate()
            .filter(|(_, s)| !s.is_decided())
            .map(|(i, _)| i)
            .collect()
    }

    pub fn undetermined_count(&self) -> usize {
        self.statuses.iter().filter(|s| !s.is_decided()).count()
    }
}

fn check_inputs(design: &SparseDesign, measurements: &MeasurementSet) -> Result<()> {
    if measurements.len() != design.m() {
        return Err(DecodeError::MeasurementCount { design: design.m(), measurements: measurements.len() });
    }
    Ok(())
}

/// Collects the ratio statistics of coordinate `i` by probing every design
/// column. Prefer [`decode`] or [`support_detect`] for all coordinates at
/// once; this is the single-coordinate view.
pub fn ratio_statistics(design: &SparseDesign, measurements: &MeasurementSet, i: usize) -> Result<RatioColumn> {
    if i >= design.n() {
        return Err(DecodeError::IndexOutOfRange { index: i, n: design.n() });
    }
    check_inputs(design, measurements)?;
    let y = measurements.values();
    let entries = design
        .columns()
        .enumerate()
        .filter_map(|(j, col)| {
            col.rows.binary_search(&(i as u32)).ok().map(|pos| (j, y[j] / col.values[pos]))
        })
        .collect();
    Ok(RatioColumn { coordinate: i, entries })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AbsMinEstimate {
    /// The ratio of smallest magnitude; `None` for an empty column.
    pub value: Option<f64>,
    pub declared_zero: bool,
}

/// Absolute-minimum estimator over a set of ratio values.
pub fn abs_min_of(values: &[f64], epsilon: f64) -> AbsMinEstimate {
    let value = values.iter().copied().min_by(|a, b| a.abs().total_cmp(&b.abs()));
    AbsMinEstimate { value, declared_zero: value.is_some_and(|v| v.abs() <= epsilon) }
}

pub fn abs_min_estimate(column: &RatioColumn, epsilon: f64) -> AbsMinEstimate {
    abs_min_of(&column.values(), epsilon)
}

/// Tie estimator over values already sorted ascending.
///
/// Partitions the values greedily into maximal runs whose spread is at
/// most `tie_tol * max(1, |center|)`, and returns the mean of the unique
/// largest run of at least `min_tie_size` values. Equal-size winners or a
/// non-finite center yield `None`.
pub fn tie_of_sorted(sorted: &[f64], tie_tol: f64, min_tie_size: usize) -> Option<f64> {
    let mut best: Option<(usize, f64)> = None;
    let mut contested = false;
    let mut start = 0;
    while start < sorted.len() {
        let lo = sorted[start];
        let mut end = start + 1;
        while end < sorted.len() {
            let hi = sorted[end];
            let center = 0.5 * (lo + hi);
            if hi - lo <= tie_tol * center.abs().max(1.0) {
                end += 1;
            } else {
                break;
            }
        }
        let size = end - start;
        if size >= min_tie_size {
            let center = sorted[start..end].iter().sum::<f64>() / size as f64;
            match best {
                Some((best_size, _)) if size < best_size => {}
                Some((best_size, _)) if size == best_size => contested = true,
                _ => {
                    best = Some((size, center));
                    contested = false;
                }
            }
        }
        start = end;
    }
    match best {
        Some((_, center)) if !contested && center.is_finite() => Some(center),
        _ => None,
    }
}

pub fn tie_estimate(column: &RatioColumn, config: &DecoderConfig) -> Option<f64> {
    let mut values = column.values();
    values.sort_unstable_by(f64::total_cmp);
    tie_of_sorted(&values, config.tie_tol, config.min_tie_size)
}

/// Row-major copy of the design, laid out so each coordinate's ratio
/// statistics occupy a contiguous slice.
#[derive(Debug, Clone)]
pub(crate) struct RatioIndex {
    offsets: Vec<usize>,
    measurement: Vec<u32>,
    design_value: Vec<f64>,
}

impl RatioIndex {
    pub(crate) fn build(design: &SparseDesign) -> Self {
        let n = design.n();
        let mut offsets = vec![0usize; n + 1];
        for col in design.columns() {
            for &i in col.rows {
                offsets[i as usize + 1] += 1;
            }
        }
        for i in 0..n {
            offsets[i + 1] += offsets[i];
        }
        let nnz = design.nnz();
        let mut measurement = vec![0u32; nnz];
        let mut design_value = vec![0.0; nnz];
        let mut cursor = offsets[..n].to_vec();
        for (j, col) in design.columns().enumerate() {
            for (i, s) in col.iter() {
                let slot = cursor[i];
                measurement[slot] = j as u32;
                design_value[slot] = s;
                cursor[i] += 1;
            }
        }
        Self { offsets, measurement, design_value }
    }

    fn n(&self) -> usize {
        self.offsets.len() - 1
    }

    fn range(&self, i: usize) -> std::ops::Range<usize> {
        self.offsets[i]..self.offsets[i + 1]
    }

    /// Writes `y_j / s_ij` for every stored entry into `z`; returns the
    /// number of entries visited.
    fn fill(&self, y: &[f64], z: &mut [f64]) -> u64 {
        for ((zk, &j), &s) in z.iter_mut().zip(&self.measurement).zip(&self.design_value) {
            *zk = y[j as usize] / s;
        }
        z.len() as u64
    }
}

/// Candidate support: every coordinate the absolute-minimum estimator does
/// not declare zero, including coordinates that no measurement covers.
pub fn support_detect(design: &SparseDesign, measurements: &MeasurementSet, epsilon: f64) -> Result<Vec<usize>> {
    check_inputs(design, measurements)?;
    if epsilon.is_nan() || epsilon < 0.0 {
        return Err(DecodeError::InvalidConfig(format!("epsilon must be >= 0, got {epsilon}")));
    }
    let index = RatioIndex::build(design);
    let mut z = vec![0.0; design.nnz()];
    index.fill(measurements.values(), &mut z);
    Ok((0..index.n()).filter(|&i| !abs_min_of(&z[index.range(i)], epsilon).declared_zero).collect())
}

/// Iterative mixed decoding.
///
/// Each round forms the ratio statistics of the current residual, marks
/// coordinates whose minimum ratio magnitude is within `epsilon` as zero,
/// runs the tie estimator on the rest, then subtracts every recovered value
/// from the original measurements. Stops after `max_iterations` rounds, or
/// earlier when a round recovers nothing new or nothing is left undecided.
pub fn decode(design: &SparseDesign, measurements: &MeasurementSet, config: &DecoderConfig) -> Result<DecodeResult> {
    config.validate()?;
    check_inputs(design, measurements)?;

    let n = design.n();
    let index = RatioIndex::build(design);
    let original = measurements.values();
    let mut residual = original.to_vec();
    let mut z = vec![0.0; design.nnz()];
    let mut statuses = vec![CoordinateStatus::Undetermined; n];
    let mut estimate = vec![0.0; n];
    let mut rounds = Vec::new();
    let mut scratch = Vec::new();

    for _ in 0..config.max_iterations {
        let design_touches = index.fill(&residual, &mut z);
        let mut zeros_declared = 0;
        let mut ties_found = 0;
        for i in 0..n {
            if statuses[i].is_decided() {
                continue;
            }
            let ratios = &z[index.range(i)];
            if ratios.is_empty() {
                continue;
            }
            if abs_min_of(ratios, config.epsilon).declared_zero {
                statuses[i] = CoordinateStatus::Zero;
                zeros_declared += 1;
                continue;
            }
            scratch.clear();
            scratch.extend_from_slice(ratios);
            scratch.sort_unstable_by(f64::total_cmp);
            if let Some(v) = tie_of_sorted(&scratch, config.tie_tol, config.min_tie_size) {
                statuses[i] = CoordinateStatus::Recovered(v);
                estimate[i] = v;
                ties_found += 1;
            }
        }
        let undetermined_remaining = statuses.iter().filter(|s| !s.is_decided()).count();
        rounds.push(RoundStats { zeros_declared, ties_found, undetermined_remaining, design_touches });
        if ties_found > 0 {
            residual = residual_after(&index, original, &estimate, design.m(), config.tie_tol);
        }
        if ties_found == 0 || undetermined_remaining == 0 {
            break;
        }
    }

    let residual = MeasurementSet::from_values(residual)
        .expect("residual of finite measurements is finite")
        .with_noise_meta(measurements);
    Ok(DecodeResult {
        statuses,
        estimate: Signal::new(estimate).expect("recovered values are finite"),
        iterations_used: rounds.len(),
        rounds,
        residual,
    })
}

/// `original - S^T estimate`, accumulated per measurement in ascending
/// coordinate order (the same operation order as
/// [`MeasurementSet::subtract_contribution`]). Entries whose magnitude is
/// within `tol` of the cancelled mass are set to exactly zero so that
/// coordinates sharing only fully explained measurements read as zero.
fn residual_after(index: &RatioIndex, original: &[f64], estimate: &[f64], m: usize, tol: f64) -> Vec<f64> {
    let mut acc = vec![0.0; m];
    let mut mass = vec![0.0; m];
    for (i, &v) in estimate.iter().enumerate() {
        if v == 0.0 {
            continue;
        }
        for slot in index.range(i) {
            let j = index.measurement[slot] as usize;
            let term = v * index.design_value[slot];
            acc[j] += term;
            mass[j] += term.abs();
        }
    }
    original
        .iter()
        .zip(acc.iter().zip(&mass))
        .map(|(&y, (&a, &w))| {
            let r = y - a;
            if w > 0.0 && r.abs() <= tol * (y.abs() + w) {
                0.0
            } else {
                r
            }
        })
        .collect()
}
