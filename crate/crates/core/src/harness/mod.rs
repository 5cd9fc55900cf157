//! Seeded Monte Carlo experiments over `(K, M)` grids.
//!
//! Each trial plants a ternary signal, measures it with a fresh sparse
//! design, decodes, and scores the result against the planted truth. All
//! randomness is derived from the master seed and the trial coordinates
//! `(K, M, trial)`, so a grid is a pure function of its spec no matter how
//! the work is scheduled.

mod contour;
mod csv_out;

use std::fmt;
use std::str::FromStr;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::{Duration, Instant};

use rand::seq::index;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::decoder::{self, CoordinateStatus, DecodeError, DecoderConfig};
use crate::seed::{derive_seed, stream_rng};
use crate::sensing::{SensingError, Signal, SparseDesign};
use crate::theory::{self, TheoryError};

pub use contour::{contour_lines, emit_contour, level_crossings, ContourFiles, ContourLine, RateGrid};
pub use csv_out::{emit_csv, read_csv, CsvRow, CSV_HEADER};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid experiment: {0}")]
    InvalidSpec(String),
    #[error("degenerate grid: {0}")]
    DegenerateGrid(String),
    #[error(transparent)]
    Sensing(#[from] SensingError),
    #[error(transparent)]
    Decode(#[from] DecodeError),
    #[error(transparent)]
    Theory(#[from] TheoryError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = HarnessError> = std::result::Result<T, E>;

/// Relative tolerance for calling a recovered value exact.
pub const VALUE_TOL: f64 = 1e-9;

const TAG_SIGNAL: u64 = 1;
const TAG_DESIGN: u64 = 2;
const TAG_NOISE: u64 = 3;
const TAG_FP_TRIAL: u64 = 4;

fn value_matches(estimate: f64, truth: f64) -> bool {
    (estimate - truth).abs() <= VALUE_TOL * truth.abs().max(1.0)
}

/// Plants a signal with exactly `k` entries in `{-1, +1}` on a uniformly
/// random support; signs are fair coin flips.
pub fn generate_ternary_signal(n: usize, k: usize, seed: u64) -> Result<Signal> {
    if n == 0 {
        return Err(HarnessError::InvalidSpec("N must be positive".into()));
    }
    if k > n {
        return Err(HarnessError::InvalidSpec(format!("K = {k} exceeds N = {n}")));
    }
    let mut rng = stream_rng(seed, 0);
    let mut values = vec![0.0; n];
    for i in index::sample(&mut rng, n, k) {
        values[i] = if rng.random::<bool>() { 1.0 } else { -1.0 };
    }
    Ok(Signal::new(values)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum GammaRule {
    /// `gamma = 1/K`.
    InverseK,
    Fixed(f64),
}

impl GammaRule {
    pub fn gamma(&self, k: usize) -> f64 {
        match *self {
            GammaRule::InverseK => 1.0 / k as f64,
            GammaRule::Fixed(g) => g,
        }
    }
}

impl fmt::Display for GammaRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GammaRule::InverseK => f.write_str("1/K"),
            GammaRule::Fixed(g) => write!(f, "{g}"),
        }
    }
}

impl FromStr for GammaRule {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if s.trim().eq_ignore_ascii_case("1/k") {
            return Ok(GammaRule::InverseK);
        }
        let g: f64 = s.trim().parse().map_err(|_| format!("expected `1/K` or a number, got `{s}`"))?;
        if g > 0.0 && g <= 1.0 {
            Ok(GammaRule::Fixed(g))
        } else {
            Err(format!("gamma must lie in (0, 1], got {g}"))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Criterion {
    /// Exact recovery of every value with nothing left undetermined.
    FullRecovery,
    /// The candidate support from zero detection equals the true support.
    SupportRecovery,
}

impl FromStr for Criterion {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "full" | "full-recovery" => Ok(Criterion::FullRecovery),
            "support" | "support-recovery" => Ok(Criterion::SupportRecovery),
            _ => Err(format!("unknown criterion `{s}` (expected full or support)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub n: usize,
    pub k_values: Vec<usize>,
    pub m_values: Vec<usize>,
    pub trials: usize,
    pub gamma_rule: GammaRule,
    pub sigma: f64,
    pub master_seed: u64,
    pub criterion: Criterion,
    /// Decoder settings; `decoder.epsilon` is the experiment's threshold.
    pub decoder: DecoderConfig,
}

impl ExperimentSpec {
    /// The desk-scale phase-diagram grid: `N = 2000`,
    /// `K in {2, 5, 10, 20, 40}`, `M = 50, 100, ..., 1500`, 100 trials,
    /// `gamma = 1/K`, full recovery.
    pub fn desk_default(master_seed: u64) -> Self {
        Self {
            n: 2000,
            k_values: vec![2, 5, 10, 20, 40],
            m_values: (1..=30).map(|i| 50 * i).collect(),
            trials: 100,
            gamma_rule: GammaRule::InverseK,
            sigma: 0.0,
            master_seed,
            criterion: Criterion::FullRecovery,
            decoder: DecoderConfig::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(HarnessError::InvalidSpec(msg));
        if self.n == 0 {
            return bad("N must be positive".into());
        }
        if self.trials == 0 {
            return bad("trials must be >= 1".into());
        }
        if let Some(&k) = self.k_values.iter().find(|&&k| k > self.n) {
            return bad(format!("K = {k} exceeds N = {}", self.n));
        }
        if self.gamma_rule == GammaRule::InverseK && self.k_values.contains(&0) {
            return bad("gamma = 1/K needs K >= 1".into());
        }
        if let GammaRule::Fixed(g) = self.gamma_rule {
            if !(g > 0.0 && g <= 1.0) {
                return bad(format!("gamma must lie in (0, 1], got {g}"));
            }
        }
        if self.m_values.contains(&0) {
            return bad("every M must be positive".into());
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return bad(format!("sigma must be finite and >= 0, got {}", self.sigma));
        }
        self.decoder.validate()?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialOutcome {
    pub success: bool,
    pub false_positives: usize,
    pub false_negatives: usize,
    pub undetermined: usize,
    pub iterations_used: usize,
    /// Recovered values that disagree with the planted value.
    pub tie_violations: usize,
    #[serde(skip)]
    pub wall_time: Duration,
}

impl TrialOutcome {
    /// Equality of everything except timing.
    pub fn same_result(&self, other: &Self) -> bool {
        Self { wall_time: Duration::ZERO, ..self.clone() } == Self { wall_time: Duration::ZERO, ..other.clone() }
    }
}

/// Sub-seeds for one trial: `(signal, design, noise)`.
pub fn trial_seeds(master_seed: u64, k: usize, m: usize, trial: usize) -> (u64, u64, u64) {
    let key = |tag| derive_seed(master_seed, &[tag, k as u64, m as u64, trial as u64]);
    (key(TAG_SIGNAL), key(TAG_DESIGN), key(TAG_NOISE))
}

pub fn run_trial(spec: &ExperimentSpec, k: usize, m: usize, trial: usize) -> Result<TrialOutcome> {
    if k > spec.n {
        return Err(HarnessError::InvalidSpec(format!("K = {k} exceeds N = {}", spec.n)));
    }
    let start = Instant::now();
    let (signal_seed, design_seed, noise_seed) = trial_seeds(spec.master_seed, k, m, trial);
    let signal = generate_ternary_signal(spec.n, k, signal_seed)?;
    let design = SparseDesign::generate(spec.n, m, spec.gamma_rule.gamma(k), design_seed)?;
    let mut y = design.measure(&signal)?;
    if spec.sigma > 0.0 {
        y = y.add_noise(spec.sigma, noise_seed)?;
    }

    let truth = signal.values();
    let mut outcome = TrialOutcome {
        success: false,
        false_positives: 0,
        false_negatives: 0,
        undetermined: 0,
        iterations_used: 1,
        tie_violations: 0,
        wall_time: Duration::ZERO,
    };
    match spec.criterion {
        Criterion::FullRecovery => {
            let result = decoder::decode(&design, &y, &spec.decoder)?;
            let mut exact = true;
            for (status, &x) in result.statuses.iter().zip(truth) {
                match *status {
                    CoordinateStatus::Zero => {
                        if x != 0.0 {
                            outcome.false_negatives += 1;
                            exact = false;
                        }
                    }
                    CoordinateStatus::Recovered(v) => {
                        if x == 0.0 {
                            outcome.false_positives += 1;
                        }
                        if !value_matches(v, x) {
                            outcome.tie_violations += 1;
                            exact = false;
                        }
                    }
                    CoordinateStatus::Undetermined => outcome.undetermined += 1,
                }
            }
            outcome.iterations_used = result.iterations_used;
            outcome.success = exact && outcome.undetermined == 0;
        }
        Criterion::SupportRecovery => {
            let candidates = decoder::support_detect(&design, &y, spec.decoder.epsilon)?;
            let mut covered = vec![false; spec.n];
            for col in design.columns() {
                for &i in col.rows {
                    covered[i as usize] = true;
                }
            }
            let mut in_candidates = vec![false; spec.n];
            for &i in &candidates {
                in_candidates[i] = true;
            }
            for i in 0..spec.n {
                match (in_candidates[i], truth[i] != 0.0) {
                    (true, false) => outcome.false_positives += 1,
                    (false, true) => outcome.false_negatives += 1,
                    _ => {}
                }
                if !covered[i] {
                    outcome.undetermined += 1;
                }
            }
            outcome.success = outcome.false_positives == 0 && outcome.false_negatives == 0;
        }
    }
    outcome.wall_time = start.elapsed();
    Ok(outcome)
}

/// Aggregates of one `(K, M)` cell. Sums are kept as integers so that the
/// aggregate does not depend on the order trials finish in.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellResult {
    pub k: usize,
    pub m: usize,
    pub gamma: f64,
    pub trials: usize,
    pub successes: usize,
    pub total_false_positives: usize,
    pub total_false_negatives: usize,
    pub total_undetermined: usize,
    pub total_iterations: usize,
    pub tie_violations: usize,
    #[serde(skip)]
    pub wall_time: Duration,
}

impl CellResult {
    fn aggregate(k: usize, m: usize, gamma: f64, outcomes: &[TrialOutcome]) -> Self {
        let sum = |f: fn(&TrialOutcome) -> usize| outcomes.iter().map(f).sum::<usize>();
        Self {
            k,
            m,
            gamma,
            trials: outcomes.len(),
            successes: sum(|o| o.success as usize),
            total_false_positives: sum(|o| o.false_positives),
            total_false_negatives: sum(|o| o.false_negatives),
            total_undetermined: sum(|o| o.undetermined),
            total_iterations: sum(|o| o.iterations_used),
            tie_violations: sum(|o| o.tie_violations),
            wall_time: outcomes.iter().map(|o| o.wall_time).sum(),
        }
    }

    fn mean(&self, total: usize) -> f64 {
        total as f64 / self.trials as f64
    }

    pub fn success_rate(&self) -> f64 {
        self.mean(self.successes)
    }

    pub fn mean_false_positives(&self) -> f64 {
        self.mean(self.total_false_positives)
    }

    pub fn mean_false_negatives(&self) -> f64 {
        self.mean(self.total_false_negatives)
    }

    pub fn mean_undetermined(&self) -> f64 {
        self.mean(self.total_undetermined)
    }

    pub fn mean_iterations(&self) -> f64 {
        self.mean(self.total_iterations)
    }

    /// Binomial standard error of the success rate.
    pub fn success_se(&self) -> f64 {
        let p = self.success_rate();
        (p * (1.0 - p) / self.trials as f64).sqrt()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Provenance {
    pub master_seed: u64,
    pub code_version: &'static str,
    pub grid_note: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridResult {
    pub spec: ExperimentSpec,
    /// One cell per `(K, M)`, K-major in the order of `spec.k_values`.
    pub cells: Vec<CellResult>,
    pub provenance: Provenance,
}

impl GridResult {
    pub fn cell(&self, k: usize, m: usize) -> Option<&CellResult> {
        self.cells.iter().find(|c| c.k == k && c.m == m)
    }

    pub fn tie_violations(&self) -> usize {
        self.cells.iter().map(|c| c.tie_violations).sum()
    }
}

pub fn run_grid(spec: &ExperimentSpec) -> Result<GridResult> {
    run_grid_with_progress(spec, |_, _| {})
}

/// Runs every cell, reporting `(cells_done, cells_total)` after each cell
/// completes. Completion order is arbitrary.
pub fn run_grid_with_progress<F>(spec: &ExperimentSpec, progress: F) -> Result<GridResult>
where
    F: Fn(usize, usize) + Sync,
{
    spec.validate()?;
    let cells: Vec<(usize, usize)> =
        spec.k_values.iter().flat_map(|&k| spec.m_values.iter().map(move |&m| (k, m))).collect();
    let done = AtomicUsize::new(0);
    let total = cells.len();
    let results = cells
        .par_iter()
        .map(|&(k, m)| {
            let outcomes = (0..spec.trials)
                .into_par_iter()
                .map(|t| run_trial(spec, k, m, t))
                .collect::<Result<Vec<_>>>()?;
            let cell = CellResult::aggregate(k, m, spec.gamma_rule.gamma(k), &outcomes);
            progress(done.fetch_add(1, Ordering::Relaxed) + 1, total);
            Ok(cell)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(GridResult {
        spec: spec.clone(),
        cells: results,
        provenance: Provenance {
            master_seed: spec.master_seed,
            code_version: env!("CARGO_PKG_VERSION"),
            grid_note: format!(
                "N={} K={:?} M={:?} trials={} gamma={}",
                spec.n, spec.k_values, spec.m_values, spec.trials, spec.gamma_rule
            ),
        },
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FpRateQuery {
    pub n: usize,
    pub k: usize,
    pub m: usize,
    pub gamma: f64,
    pub epsilon: f64,
    pub sigma: f64,
    pub trials: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FpRateEstimate {
    pub trials: usize,
    pub false_positives: usize,
    pub empirical: f64,
    /// Exact false-positive probability for ternary signals.
    pub theory: f64,
    /// Jensen data-dependent bound (noise included).
    pub data_bound: f64,
    pub z_score: f64,
}

/// Monte Carlo false-positive rate of zero detection at a true-zero
/// coordinate of a ternary signal, against the closed form.
///
/// The other zero coordinates never enter the scored ratio statistics, so
/// each trial runs the full pipeline on the `K` support coordinates plus the
/// scored one. Any `N > K` gives the same distribution.
pub fn mc_fp_rate(q: &FpRateQuery) -> Result<FpRateEstimate> {
    if q.k == 0 || q.k >= q.n {
        return Err(HarnessError::InvalidSpec(format!("need 1 <= K < N, got K = {} N = {}", q.k, q.n)));
    }
    if q.trials == 0 {
        return Err(HarnessError::InvalidSpec("trials must be >= 1".into()));
    }
    if !(q.sigma >= 0.0 && q.sigma.is_finite()) {
        return Err(HarnessError::InvalidSpec(format!("sigma must be finite and >= 0, got {}", q.sigma)));
    }
    let theory = if q.sigma == 0.0 {
        theory::fp_exact_ternary(q.epsilon, q.k, q.gamma, q.m)?
    } else {
        theory::fp_exact_ternary_noisy(q.epsilon, q.sigma, q.k, q.gamma, q.m)?
    };
    let data_bound = theory::fp_data_bound(q.epsilon, q.gamma, q.m, q.k as f64, q.sigma)?;

    let dim = q.k + 1;
    let false_positives = (0..q.trials)
        .into_par_iter()
        .map(|t| -> Result<usize> {
            let base = derive_seed(q.seed, &[TAG_FP_TRIAL, t as u64]);
            let signal = generate_ternary_signal(dim, q.k, derive_seed(base, &[TAG_SIGNAL]))?;
            let zero = signal.values().iter().position(|&v| v == 0.0).expect("one zero coordinate");
            let design = SparseDesign::generate(dim, q.m, q.gamma, derive_seed(base, &[TAG_DESIGN]))?;
            let mut y = design.measure(&signal)?;
            if q.sigma > 0.0 {
                y = y.add_noise(q.sigma, derive_seed(base, &[TAG_NOISE]))?;
            }
            let column = decoder::ratio_statistics(&design, &y, zero)?;
            Ok(!decoder::abs_min_estimate(&column, q.epsilon).declared_zero as usize)
        })
        .try_reduce(|| 0, |a, b| Ok(a + b))?;

    let empirical = false_positives as f64 / q.trials as f64;
    let se = (theory * (1.0 - theory) / q.trials as f64).sqrt();
    let z_score = if se > 0.0 {
        (empirical - theory) / se
    } else if empirical == theory {
        0.0
    } else {
        f64::INFINITY
    };
    Ok(FpRateEstimate { trials: q.trials, false_positives, empirical, theory, data_bound, z_score })
}
