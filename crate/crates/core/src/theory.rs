//! Closed-form error probabilities and sample-complexity planners.
//!
//! Conditional on coordinate `i` being observed by measurement `j`, the
//! ratio statistic is `x_i + sqrt(eta_ij) * C` with `C` standard Cauchy and
//! `eta_ij` the energy of the other nonzero coordinates observed by `j`.
//! Everything below follows from `P(|C| <= t) = (2/pi) atan(t)` and the
//! distribution of `eta_ij`; for ternary signals `eta_ij` is
//! `Binomial(K, gamma)` at a zero coordinate.
//!
//! All logarithms are natural.

use std::f64::consts::{E, FRAC_2_PI, FRAC_1_PI};

use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum TheoryError {
    #[error("{name} = {value} is outside its valid range ({expected})")]
    OutOfRange { name: &'static str, value: f64, expected: &'static str },
    #[error("objective has no sign change on [{lo}, {hi}]")]
    NoSignChange { lo: f64, hi: f64 },
    #[error("required measurement count is unbounded: {0}")]
    Unbounded(&'static str),
}

pub type Result<T, E = TheoryError> = std::result::Result<T, E>;

fn require(ok: bool, name: &'static str, value: f64, expected: &'static str) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(TheoryError::OutOfRange { name, value, expected })
    }
}

fn check_gamma_open(gamma: f64) -> Result<()> {
    require(gamma > 0.0 && gamma < 1.0, "gamma", gamma, "0 < gamma < 1")
}

fn check_gamma(gamma: f64) -> Result<()> {
    require(gamma > 0.0 && gamma <= 1.0, "gamma", gamma, "0 < gamma <= 1")
}

fn check_epsilon(epsilon: f64) -> Result<()> {
    require(epsilon >= 0.0, "epsilon", epsilon, "epsilon >= 0")
}

fn check_m(m: usize, min: usize) -> Result<()> {
    require(m >= min, "M", m as f64, if min == 1 { "M >= 1" } else { "M >= 2" })
}

/// `(1 - q)^m` for `q` in `[0, 1]`, accurate when `q` is tiny.
fn pow_complement(q: f64, m: f64) -> f64 {
    (m * (-q).ln_1p()).exp()
}

/// `P(|C| <= t)` for standard Cauchy `C`: `(2/pi) atan(t)`, with the value
/// 1 at `t = +inf`.
pub fn cauchy_abs_cdf(t: f64) -> Result<f64> {
    require(t >= 0.0, "t", t, "t >= 0")?;
    Ok(if t.is_infinite() { 1.0 } else { FRAC_2_PI * t.atan() })
}

fn cdf(t: f64) -> f64 {
    if t.is_infinite() {
        1.0
    } else {
        FRAC_2_PI * t.atan()
    }
}

/// Ratio `epsilon / scale` with `0 / 0 = 0` (a zero threshold never
/// captures anything but an exact zero ratio, handled by the callers).
fn threshold_ratio(epsilon: f64, scale: f64) -> f64 {
    if epsilon == 0.0 {
        0.0
    } else {
        epsilon / scale
    }
}

/// `Binomial(k, gamma)` probability mass for `0..=k`, evaluated in the log
/// domain so large `k` does not underflow the leading terms.
pub fn binomial_pmf(k: usize, gamma: f64) -> Vec<f64> {
    if gamma >= 1.0 {
        let mut pmf = vec![0.0; k + 1];
        pmf[k] = 1.0;
        return pmf;
    }
    if gamma <= 0.0 {
        let mut pmf = vec![0.0; k + 1];
        pmf[0] = 1.0;
        return pmf;
    }
    let log_odds = gamma.ln() - (-gamma).ln_1p();
    let mut log_p = k as f64 * (-gamma).ln_1p();
    let mut pmf = Vec::with_capacity(k + 1);
    for j in 0..=k {
        pmf.push(log_p.exp());
        log_p += ((k - j) as f64 / (j + 1) as f64).ln() + log_odds;
    }
    pmf
}

/// `E[(2/pi) atan(epsilon / sqrt(Z + sigma^2))]` for `Z ~ Binomial(k, gamma)`.
/// The `Z = 0`, `sigma = 0` term is 1: the ratio is then exactly zero.
fn binomial_zero_detection(epsilon: f64, sigma: f64, k: usize, gamma: f64) -> f64 {
    binomial_pmf(k, gamma)
        .iter()
        .enumerate()
        .map(|(z, &p)| {
            let var = z as f64 + sigma * sigma;
            let c = if var == 0.0 { 1.0 } else { cdf(threshold_ratio(epsilon, var.sqrt())) };
            p * c
        })
        .sum()
}

/// Worst-case false-positive bound for zero detection:
/// `[1 - gamma (1 - gamma)^K]^M`, independent of the threshold.
pub fn fp_worst_bound(k: usize, gamma: f64, m: usize) -> Result<f64> {
    require(k >= 1, "K", k as f64, "K >= 1")?;
    check_gamma_open(gamma)?;
    check_m(m, 1)?;
    Ok(pow_complement(gamma * (1.0 - gamma).powi(k as i32), m as f64))
}

/// Data-dependent (Jensen) false-positive bound
/// `[1 - gamma (2/pi) atan(epsilon / sqrt(sigma^2 + gamma * energy))]^M`.
/// With `sigma = 0` this is the noiseless bound.
pub fn fp_data_bound(epsilon: f64, gamma: f64, m: usize, signal_energy: f64, sigma: f64) -> Result<f64> {
    check_epsilon(epsilon)?;
    check_gamma(gamma)?;
    check_m(m, 1)?;
    require(signal_energy >= 0.0 && signal_energy.is_finite(), "signal_energy", signal_energy, "finite, >= 0")?;
    require(sigma >= 0.0, "sigma", sigma, "sigma >= 0")?;
    let scale = (sigma * sigma + gamma * signal_energy).sqrt();
    Ok(pow_complement(gamma * cdf(threshold_ratio(epsilon, scale)), m as f64))
}

/// `H(epsilon, K, gamma) = gamma K E[(2/pi) atan(epsilon / sqrt(Z))]`,
/// `Z ~ Binomial(K, gamma)`: `K` times the probability that one measurement
/// certifies a zero coordinate of a ternary signal.
pub fn binomial_detection_rate(epsilon: f64, k: usize, gamma: f64) -> Result<f64> {
    check_epsilon(epsilon)?;
    require(k >= 1, "K", k as f64, "K >= 1")?;
    check_gamma(gamma)?;
    Ok(gamma * k as f64 * binomial_zero_detection(epsilon, 0.0, k, gamma))
}

/// Default relative truncation tolerance of [`poisson_detection_rate`].
pub const POISSON_SERIES_TOL: f64 = 1e-14;

/// Poisson limit `h(epsilon, lambda) = lambda E[(2/pi) atan(epsilon / sqrt(Z))]`,
/// `Z ~ Poisson(lambda)`, of [`binomial_detection_rate`] at `lambda = gamma K`.
pub fn poisson_detection_rate(epsilon: f64, lambda: f64) -> Result<f64> {
    poisson_detection_rate_with_tol(epsilon, lambda, POISSON_SERIES_TOL)
}

/// As [`poisson_detection_rate`], stopping once the remaining Poisson tail
/// mass is below `tol` times the accumulated sum. Every summand is at most
/// its pmf, so the tail mass bounds the truncation error.
pub fn poisson_detection_rate_with_tol(epsilon: f64, lambda: f64, tol: f64) -> Result<f64> {
    check_epsilon(epsilon)?;
    require(lambda > 0.0 && lambda.is_finite(), "lambda", lambda, "finite, > 0")?;
    require(tol > 0.0, "tol", tol, "tol > 0")?;

    let ln_lambda = lambda.ln();
    let mut log_pmf = -lambda;
    let mut sum = log_pmf.exp();
    let cap = (lambda + 50.0 * lambda.sqrt()) as usize + 1000;
    for k in 1..=cap {
        log_pmf += ln_lambda - (k as f64).ln();
        let pmf = log_pmf.exp();
        sum += pmf * cdf(threshold_ratio(epsilon, (k as f64).sqrt()));
        // Geometric bound on the mass beyond k, valid once k + 2 > lambda.
        let ratio = lambda / (k + 2) as f64;
        if ratio < 1.0 {
            let tail = pmf * lambda / (k + 1) as f64 / (1.0 - ratio);
            if tail < tol * sum {
                break;
            }
        }
    }
    Ok(lambda * sum)
}

/// Exact false-positive probability of zero detection on a ternary signal,
/// `[1 - H(epsilon, K, gamma) / K]^M`.
pub fn fp_exact_ternary(epsilon: f64, k: usize, gamma: f64, m: usize) -> Result<f64> {
    check_epsilon(epsilon)?;
    require(k >= 1, "K", k as f64, "K >= 1")?;
    check_gamma(gamma)?;
    check_m(m, 1)?;
    Ok(pow_complement(gamma * binomial_zero_detection(epsilon, 0.0, k, gamma), m as f64))
}

/// Exact false-positive probability on a ternary signal with `N(0, sigma^2)`
/// measurement noise: the expectation runs over `eta = Z + sigma^2`.
pub fn fp_exact_ternary_noisy(epsilon: f64, sigma: f64, k: usize, gamma: f64, m: usize) -> Result<f64> {
    check_epsilon(epsilon)?;
    require(sigma >= 0.0 && sigma.is_finite(), "sigma", sigma, "finite, >= 0")?;
    require(k >= 1, "K", k as f64, "K >= 1")?;
    check_gamma(gamma)?;
    check_m(m, 1)?;
    Ok(pow_complement(gamma * binomial_zero_detection(epsilon, sigma, k, gamma), m as f64))
}

/// Worst-case false-positive bound with noise:
/// `[1 - gamma (2/pi) atan(epsilon / sigma) (1 - gamma)^K]^M`.
pub fn noisy_fp_worst_bound(epsilon: f64, sigma: f64, k: usize, gamma: f64, m: usize) -> Result<f64> {
    check_epsilon(epsilon)?;
    require(sigma > 0.0, "sigma", sigma, "sigma > 0")?;
    require(k >= 1, "K", k as f64, "K >= 1")?;
    check_gamma_open(gamma)?;
    check_m(m, 1)?;
    let q = gamma * cdf(threshold_ratio(epsilon, sigma)) * (1.0 - gamma).powi(k as i32);
    Ok(pow_complement(q, m as f64))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FalseNegative {
    /// Exact probability for a ternary signal (other nonzeros are +-1).
    pub exact_ternary: f64,
    /// Signal-independent bound `1 - [1 - (2/pi) gamma atan(epsilon)]^M`.
    pub loose: f64,
}

/// False-negative probability of zero detection at a coordinate holding
/// `x_value`, when the remaining `K - 1` nonzeros are ternary.
pub fn fn_bounds(epsilon: f64, gamma: f64, m: usize, x_value: f64, k: usize) -> Result<FalseNegative> {
    check_epsilon(epsilon)?;
    check_gamma(gamma)?;
    check_m(m, 1)?;
    require(x_value != 0.0 && x_value.is_finite(), "x_value", x_value, "finite, nonzero")?;
    require(k >= 1, "K", k as f64, "K >= 1")?;

    // P(|x + sqrt(eta) C| <= epsilon) for eta ~ Binomial(K - 1, gamma).
    let capture: f64 = binomial_pmf(k - 1, gamma)
        .iter()
        .enumerate()
        .map(|(eta, &p)| {
            let hit = if eta == 0 {
                if x_value.abs() <= epsilon { 1.0 } else { 0.0 }
            } else {
                let s = (eta as f64).sqrt();
                FRAC_1_PI * (((epsilon + x_value) / s).atan() - ((x_value - epsilon) / s).atan())
            };
            p * hit
        })
        .sum();
    let exact_ternary = 1.0 - pow_complement(gamma * capture, m as f64);
    let loose = 1.0 - pow_complement(FRAC_2_PI * gamma * epsilon.atan(), m as f64);
    Ok(FalseNegative { exact_ternary, loose })
}

/// `1 / (K log(1 / (1 - (1/K)(1 - 1/K)^K)))`, the factor in front of
/// `K log(N/delta)` in the support-recovery measurement count. Tends to `e`.
pub fn support_complexity_constant(k: usize) -> Result<f64> {
    require(k >= 2, "K", k as f64, "K >= 2")?;
    let kf = k as f64;
    let q = (1.0 - 1.0 / kf).powi(k as i32) / kf;
    Ok(1.0 / (kf * -(-q).ln_1p()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SupportComplexity {
    /// `ceil(log(N/delta) / log(1 / (1 - (1/K)(1 - 1/K)^K)))`.
    pub exact: u64,
    /// `e K log(N/delta)`.
    pub approx: f64,
}

/// Measurements sufficient for exact support recovery by zero detection at
/// `gamma = 1/K`, with failure probability below `delta`.
///
/// `K = 1` is rejected: the exact expression divides by `log(1/1) = 0`.
pub fn support_sample_complexity(n: usize, k: usize, delta: f64) -> Result<SupportComplexity> {
    require(k >= 2, "K", k as f64, "K >= 2")?;
    require(n >= k, "N", n as f64, "N >= K")?;
    require(delta > 0.0 && delta < 1.0, "delta", delta, "0 < delta < 1")?;
    let kf = k as f64;
    let log_target = (n as f64 / delta).ln();
    let q = (1.0 - 1.0 / kf).powi(k as i32) / kf;
    let exact = (log_target / -(-q).ln_1p()).ceil() as u64;
    Ok(SupportComplexity { exact, approx: E * kf * log_target })
}

/// Measurements sufficient for support recovery on a ternary signal at
/// threshold `epsilon`: `ceil(K / H(epsilon, K, gamma) * log(N/delta))`.
pub fn ternary_support_sample_complexity(n: usize, k: usize, epsilon: f64, gamma: f64, delta: f64) -> Result<u64> {
    require(n >= k, "N", n as f64, "N >= K")?;
    require(delta > 0.0 && delta < 1.0, "delta", delta, "0 < delta < 1")?;
    let h = binomial_detection_rate(epsilon, k, gamma)?;
    if h <= 0.0 {
        return Err(TheoryError::Unbounded("zero detection probability"));
    }
    Ok((k as f64 / h * (n as f64 / delta).ln()).ceil() as u64)
}

/// Measurements sufficient for support recovery with noise at `gamma = 1/K`:
/// `ceil(e K log(N/delta) / ((2/pi) atan(epsilon / sigma)))`.
///
/// The count divides by the arctan factor, as implied by
/// [`noisy_fp_worst_bound`]; multiplying by it would make a smaller
/// signal-to-noise threshold need fewer measurements.
pub fn noisy_support_sample_complexity(n: usize, k: usize, delta: f64, epsilon: f64, sigma: f64) -> Result<u64> {
    require(k >= 1, "K", k as f64, "K >= 1")?;
    require(n >= k, "N", n as f64, "N >= K")?;
    require(delta > 0.0 && delta < 1.0, "delta", delta, "0 < delta < 1")?;
    check_epsilon(epsilon)?;
    require(sigma > 0.0, "sigma", sigma, "sigma > 0")?;
    let c = cdf(epsilon / sigma);
    if c <= 0.0 {
        return Err(TheoryError::Unbounded("epsilon = 0 under noise"));
    }
    Ok((E * k as f64 * (n as f64 / delta).ln() / c).ceil() as u64)
}

/// Probability that a nonzero coordinate sees fewer than two clean
/// measurements (no other nonzero present):
/// `(1 - p)^M + M p (1 - p)^(M-1)` with `p = gamma (1 - gamma)^(K-1)`.
pub fn tie_error_probability(k: usize, gamma: f64, m: usize) -> Result<f64> {
    require(k >= 1, "K", k as f64, "K >= 1")?;
    check_gamma(gamma)?;
    check_m(m, 2)?;
    let p = gamma * (1.0 - gamma).powi(k as i32 - 1);
    let mf = m as f64;
    Ok(pow_complement(p, mf) + mf * p * pow_complement(p, mf - 1.0))
}

/// Constant of the closed-form tie-recovery measurement count.
pub const TIE_COMPLEXITY_FACTOR: f64 = 1.551;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct TieComplexity {
    /// Smallest `M` with `K * tie_error_probability(K, 1/K, M) <= delta`.
    pub exact: u64,
    /// `ceil(1.551 e K log(K/delta))`.
    pub closed_form: u64,
}

/// Measurements for exact recovery by the tie estimator at `gamma = 1/K`.
pub fn tie_sample_complexity(k: usize, delta: f64) -> Result<TieComplexity> {
    require(k >= 2, "K", k as f64, "K >= 2")?;
    require(delta > 0.0 && delta <= 0.05, "delta", delta, "0 < delta <= 0.05")?;
    let gamma = 1.0 / k as f64;
    let fails = |m: u64| -> bool {
        k as f64 * tie_error_probability(k, gamma, m as usize).expect("validated") > delta
    };

    // Failure probability decreases in M; bracket by doubling, then bisect.
    let mut lo = 1u64;
    let mut hi = 2u64;
    while fails(hi) {
        lo = hi;
        hi *= 2;
    }
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if fails(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let closed_form = (TIE_COMPLEXITY_FACTOR * E * k as f64 * (k as f64 / delta).ln()).ceil() as u64;
    Ok(TieComplexity { exact: hi.max(2), closed_form })
}

/// `T(delta, K, alpha)`: the tie failure probability at
/// `M = (1 + alpha) M_1`, divided by `delta`, where `K (1 - p)^M_1 = delta`
/// and `p = (1/K)(1 - 1/K)^(K-1)`.
pub fn alpha_objective(delta: f64, k: usize, alpha: f64) -> f64 {
    let kf = k as f64;
    let p = (1.0 - 1.0 / kf).powi(k as i32 - 1) / kf;
    let base = (delta / kf).powf(alpha);
    base + (1.0 + alpha) * (kf / delta).ln() * base / ((-p).ln_1p() * (1.0 - 1.0 / p))
}

/// Bracket for [`solve_alpha`].
pub const ALPHA_BRACKET: (f64, f64) = (0.271_085_030_681_816_8, 4.0);

/// Root of `T(delta, K, alpha) = 1` by bisection on `[1/log 40, 4]`, to an
/// absolute tolerance of `1e-8`. `T` decreases in `alpha` on the bracket.
pub fn solve_alpha(delta: f64, k: usize) -> Result<f64> {
    require(k >= 2, "K", k as f64, "K >= 2")?;
    require(delta > 0.0 && delta <= 0.05, "delta", delta, "0 < delta <= 0.05")?;
    let (mut lo, mut hi) = ALPHA_BRACKET;
    let f = |a: f64| alpha_objective(delta, k, a) - 1.0;
    if !(f(lo) > 0.0 && f(hi) < 0.0) {
        return Err(TheoryError::NoSignChange { lo, hi });
    }
    while hi - lo > 1e-8 {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    /// arctan by repeated half-angle reduction and a Taylor series, kept
    /// independent of `f64::atan`.
    fn atan_series(x: f64) -> f64 {
        if x < 0.0 {
            return -atan_series(-x);
        }
        let mut y = x;
        let mut doublings = 0;
        while y > 0.05 {
            y /= 1.0 + (1.0 + y * y).sqrt();
            doublings += 1;
        }
        let (mut term, mut sum, y2) = (y, 0.0, y * y);
        for n in 0..30 {
            sum += term / (2 * n + 1) as f64;
            term *= -y2;
        }
        sum * (1u64 << doublings) as f64
    }

    /// H by enumerating all 2^K survival patterns of the nonzero coordinates.
    fn h_by_enumeration(epsilon: f64, k: usize, gamma: f64) -> f64 {
        let mut expectation = 0.0;
        for mask in 0u32..(1u32 << k) {
            let z = mask.count_ones() as i32;
            let weight = gamma.powi(z) * (1.0 - gamma).powi(k as i32 - z);
            let c = if z == 0 { 1.0 } else { 2.0 / std::f64::consts::PI * atan_series(epsilon / (z as f64).sqrt()) };
            expectation += weight * c;
        }
        gamma * k as f64 * expectation
    }

    fn binomial_count(rng: &mut ChaCha8Rng, k: usize, gamma: f64) -> usize {
        (0..k).filter(|_| rng.random::<f64>() < gamma).count()
    }

    fn cauchy(rng: &mut ChaCha8Rng) -> f64 {
        let a: f64 = StandardNormal.sample(rng);
        let b: f64 = StandardNormal.sample(rng);
        a / b
    }

    fn within_3se(empirical: f64, theory: f64, trials: usize) {
        let se = (theory * (1.0 - theory) / trials as f64).sqrt();
        assert!((empirical - theory).abs() <= 3.0 * se, "empirical {empirical} theory {theory} se {se}");
    }

    #[test]
    fn cauchy_cdf_values() {
        assert!((cauchy_abs_cdf(1.0).unwrap() - 0.5).abs() < 1e-15);
        assert_eq!(cauchy_abs_cdf(0.0).unwrap(), 0.0);
        assert_eq!(cauchy_abs_cdf(f64::INFINITY).unwrap(), 1.0);
        assert!(cauchy_abs_cdf(-0.1).is_err());
        assert!(cauchy_abs_cdf(f64::NAN).is_err());
    }

    #[test]
    fn worst_bound_values() {
        assert!((fp_worst_bound(1, 0.5, 1).unwrap() - 0.75).abs() < 1e-15);
        assert!(fp_worst_bound(10, 0.1, 0).is_err());
        assert!(fp_worst_bound(0, 0.1, 5).is_err());
        assert!(fp_worst_bound(10, 1.0, 5).is_err());
        assert!(fp_worst_bound(10, 0.1, 629).unwrap() <= 0.05 / 2000.0);
        // The support planner's count drives the union bound below delta.
        let m = support_sample_complexity(2000, 10, 0.05).unwrap().exact as usize;
        assert!(2000.0 * fp_worst_bound(10, 0.1, m).unwrap() <= 0.05);
        assert!(2000.0 * fp_worst_bound(10, 0.1, m - 1).unwrap() > 0.05);
    }

    #[test]
    fn data_bound_values() {
        assert_eq!(fp_data_bound(0.0, 0.1, 300, 10.0, 0.0).unwrap(), 1.0);
        assert_eq!(fp_data_bound(0.5, 0.1, 300, 10.0, f64::INFINITY).unwrap(), 1.0);
        let direct = {
            let t = 0.5 / (0.1_f64 * 10.0).sqrt();
            let q = 0.1 * 2.0 / std::f64::consts::PI * atan_series(t);
            let mut v = 1.0;
            for _ in 0..100 {
                v *= 1.0 - q;
            }
            v
        };
        let got = fp_data_bound(0.5, 0.1, 100, 10.0, 0.0).unwrap();
        assert!((got - direct).abs() <= 1e-13 * direct, "{got} vs {direct}");
        assert!(fp_data_bound(-0.1, 0.1, 1, 1.0, 0.0).is_err());
        assert!(fp_data_bound(0.1, 0.1, 1, -1.0, 0.0).is_err());
    }

    #[test]
    fn data_bound_dominates_exact_ternary() {
        for &(eps, k, gamma, m) in &[(0.5, 10usize, 0.1, 200usize), (1.0, 20, 0.05, 100), (0.2, 5, 0.3, 50)] {
            let exact = fp_exact_ternary(eps, k, gamma, m).unwrap();
            let jensen = fp_data_bound(eps, gamma, m, k as f64, 0.0).unwrap();
            assert!(exact <= jensen, "{exact} > {jensen}");
        }
    }

    #[test]
    fn binomial_rate_matches_enumeration() {
        for k in 1..=12usize {
            for gamma in [0.05, 0.1, 0.3, 1.0 / k as f64] {
                for eps in [0.01, 0.5, 1.0] {
                    let fast = binomial_detection_rate(eps, k, gamma).unwrap();
                    let slow = h_by_enumeration(eps, k, gamma);
                    assert!((fast - slow).abs() <= 1e-12, "K={k} gamma={gamma} eps={eps}: {fast} vs {slow}");
                }
            }
        }
    }

    #[test]
    fn binomial_rate_limits() {
        assert!((binomial_detection_rate(f64::INFINITY, 20, 0.1).unwrap() - 2.0).abs() < 1e-12);
        assert!((binomial_detection_rate(1e12, 20, 0.1).unwrap() - 2.0).abs() < 1e-9);
        // At gamma = 1/K and eps = 0 only the k = 0 term survives, so
        // H = (1 - 1/K)^K, which stays below its limit 1/e.
        for k in [2usize, 10, 100, 1000] {
            let h = binomial_detection_rate(0.0, k, 1.0 / k as f64).unwrap();
            assert!((h - (1.0 - 1.0 / k as f64).powi(k as i32)).abs() < 1e-15);
            assert!(1.0 / h > E);
        }
        // Any positive threshold adds enough mass at K = 100 to cross 1/e.
        for eps in [0.01, 0.1, 0.2, 0.5, 1.0] {
            assert!(1.0 / binomial_detection_rate(eps, 100, 0.01).unwrap() <= E, "eps={eps}");
        }
        assert!(binomial_detection_rate(0.1, 0, 0.1).is_err());
    }

    #[test]
    fn binomial_pmf_large_k_sums_to_one() {
        let pmf = binomial_pmf(5000, 0.5);
        assert!((pmf.iter().sum::<f64>() - 1.0).abs() < 1e-10);
        assert!(pmf.iter().all(|p| p.is_finite() && *p >= 0.0));
    }

    #[test]
    fn poisson_rate_limits_and_truncation() {
        for lambda in [0.1, 1.0, 3.0, 10.0] {
            let h = poisson_detection_rate(f64::INFINITY, lambda).unwrap();
            assert!((h - lambda).abs() <= 1e-12 * lambda, "lambda={lambda}: {h}");
            for eps in [0.01, 0.1, 0.5, 1.0] {
                let tight = poisson_detection_rate_with_tol(eps, lambda, 1e-14).unwrap();
                let loose = poisson_detection_rate_with_tol(eps, lambda, 1e-10).unwrap();
                assert!((tight - loose).abs() < 1e-9);
            }
        }
        for eps in [0.01, 0.1, 0.2, 0.5, 1.0] {
            assert!(1.0 / poisson_detection_rate(eps, 1.0).unwrap() <= E);
        }
        assert!(poisson_detection_rate(0.1, 0.0).is_err());
    }

    #[test]
    fn poisson_tracks_binomial() {
        for i in 0..30 {
            let lambda = 0.1 + 2.9 * i as f64 / 29.0;
            for eps in [0.01, 0.1, 0.2, 0.5, 1.0] {
                let big_h = binomial_detection_rate(eps, 100, lambda / 100.0).unwrap();
                let small_h = poisson_detection_rate(eps, lambda).unwrap();
                // The binomial and Poisson laws differ in total variation by
                // at most lambda^2 / K (Le Cam), and every summand is in [0, 1].
                assert!((big_h - small_h).abs() <= lambda * lambda * lambda / 100.0, "lambda={lambda} eps={eps}");
                if lambda <= 2.0 {
                    assert!(((1.0 / big_h - 1.0 / small_h) * small_h).abs() <= 0.02, "lambda={lambda} eps={eps}");
                }
            }
        }
    }

    #[test]
    fn exact_ternary_monotone() {
        assert!(fp_exact_ternary(0.5, 10, 0.1, 0).is_err());
        let mut prev = 1.0;
        for eps in [0.0, 0.01, 0.1, 0.5, 1.0, 5.0] {
            let v = fp_exact_ternary(eps, 10, 0.1, 200).unwrap();
            assert!(v <= prev && (0.0..=1.0).contains(&v));
            prev = v;
        }
        let mut prev = 1.0;
        for m in [1, 10, 100, 1000] {
            let v = fp_exact_ternary(0.3, 10, 0.1, m).unwrap();
            assert!(v <= prev);
            prev = v;
        }
        // At epsilon = 0 only clean measurements certify, matching the worst case.
        let a = fp_exact_ternary(0.0, 10, 0.1, 300).unwrap();
        let b = fp_worst_bound(10, 0.1, 300).unwrap();
        assert!((a - b).abs() <= 1e-12 * b);
    }

    #[test]
    fn exact_ternary_matches_simulation() {
        let (eps, k, gamma, m, trials) = (0.5, 10usize, 0.1, 200usize, 100_000usize);
        let mut rng = ChaCha8Rng::seed_from_u64(0xfeed);
        let mut hits = 0;
        for _ in 0..trials {
            let mut certified = false;
            for _ in 0..m {
                if rng.random::<f64>() >= gamma {
                    continue;
                }
                let eta = binomial_count(&mut rng, k, gamma) as f64;
                let z = eta.sqrt() * cauchy(&mut rng);
                if z.abs() <= eps {
                    certified = true;
                }
            }
            if !certified {
                hits += 1;
            }
        }
        within_3se(hits as f64 / trials as f64, fp_exact_ternary(eps, k, gamma, m).unwrap(), trials);
    }

    #[test]
    fn false_negative_bounds() {
        let zero = fn_bounds(0.0, 0.1, 100, 1.0, 10).unwrap();
        assert_eq!(zero.loose, 0.0);
        assert_eq!(zero.exact_ternary, 0.0);
        let huge = fn_bounds(0.5, 0.1, 1_000_000, 1.0, 10).unwrap();
        assert!((huge.loose - 1.0).abs() < 1e-12);
        // Loose bound is monotone and dominates the exact form below |x|.
        let mut prev = 0.0;
        for eps in [0.0, 0.1, 0.5, 0.9] {
            let b = fn_bounds(eps, 0.1, 100, 1.0, 10).unwrap();
            assert!(b.loose >= prev && b.loose >= b.exact_ternary);
            prev = b.loose;
        }
        assert!(fn_bounds(0.1, 0.1, 100, 0.0, 10).is_err());
    }

    #[test]
    fn false_negative_matches_simulation() {
        let (eps, k, gamma, m, trials) = (0.5, 10usize, 0.1, 100usize, 100_000usize);
        let mut rng = ChaCha8Rng::seed_from_u64(0xbead);
        let mut hits = 0;
        for _ in 0..trials {
            let mut missed = false;
            for _ in 0..m {
                if rng.random::<f64>() >= gamma {
                    continue;
                }
                let eta = binomial_count(&mut rng, k - 1, gamma) as f64;
                let z = 1.0 + eta.sqrt() * cauchy(&mut rng);
                if z.abs() <= eps {
                    missed = true;
                }
            }
            if missed {
                hits += 1;
            }
        }
        let exact = fn_bounds(eps, gamma, m, 1.0, k).unwrap().exact_ternary;
        within_3se(hits as f64 / trials as f64, exact, trials);
    }

    #[test]
    fn support_constant_near_e() {
        assert!((support_complexity_constant(10).unwrap() - E).abs() <= 0.1);
        assert!((support_complexity_constant(100).unwrap() - E).abs() <= 0.01);
        assert!(support_complexity_constant(1).is_err());
        let sc = support_sample_complexity(2000, 10, 0.05).unwrap();
        assert!(((sc.exact as f64 - sc.approx) / sc.approx).abs() <= 0.05);
        assert_eq!(sc.approx.ceil() as u64, 289);
        assert!(support_sample_complexity(2000, 1, 0.05).is_err());
        assert!(support_sample_complexity(5, 10, 0.05).is_err());
        assert!(support_sample_complexity(2000, 10, 1.0).is_err());
    }

    #[test]
    fn ternary_planner_shrinks_with_threshold() {
        let worst = ternary_support_sample_complexity(2000, 10, 0.0, 0.1, 0.05).unwrap();
        let informed = ternary_support_sample_complexity(2000, 10, 0.5, 0.1, 0.05).unwrap();
        assert!(informed < worst);
        let n1 = noisy_support_sample_complexity(2000, 10, 0.05, 1.0, 1.0).unwrap();
        let n2 = noisy_support_sample_complexity(2000, 10, 0.05, 0.1, 1.0).unwrap();
        assert!(n2 > n1);
        assert!(noisy_support_sample_complexity(2000, 10, 0.05, 0.0, 1.0).is_err());
    }

    #[test]
    fn tie_error_values() {
        assert_eq!(tie_error_probability(1, 1.0, 2).unwrap(), 0.0);
        assert_eq!(tie_error_probability(1, 1.0, 50).unwrap(), 0.0);
        let p = 0.3 * 0.7_f64.powi(4);
        let expected = (1.0 - p).powi(2) + 2.0 * p * (1.0 - p);
        assert!((tie_error_probability(5, 0.3, 2).unwrap() - expected).abs() < 1e-15);
        assert!(tie_error_probability(5, 0.3, 1).is_err());
    }

    #[test]
    fn tie_error_matches_bernoulli_simulation() {
        let (k, gamma, m, trials) = (10usize, 0.1, 500usize, 100_000usize);
        let mut rng = ChaCha8Rng::seed_from_u64(0xcafe);
        let mut hits = 0;
        for _ in 0..trials {
            let mut clean = 0;
            for _ in 0..m {
                if rng.random::<f64>() < gamma && (0..k - 1).all(|_| rng.random::<f64>() >= gamma) {
                    clean += 1;
                }
            }
            if clean < 2 {
                hits += 1;
            }
        }
        within_3se(hits as f64 / trials as f64, tie_error_probability(k, gamma, m).unwrap(), trials);
    }

    #[test]
    fn tie_complexity_minimal_and_dominated() {
        let tc = tie_sample_complexity(2, 0.05).unwrap();
        let err = |m: u64| 2.0 * tie_error_probability(2, 0.5, m as usize).unwrap();
        assert!(err(tc.exact) <= 0.05);
        assert!(err(tc.exact - 1) > 0.05);
        for delta in [0.05, 0.01, 0.001] {
            let mut prev = 0;
            for k in 2..=1000usize {
                let tc = tie_sample_complexity(k, delta).unwrap();
                assert!(tc.closed_form >= tc.exact, "K={k} delta={delta}: {tc:?}");
                assert!(tc.exact >= prev);
                prev = tc.exact;
            }
        }
        assert!(tie_sample_complexity(1, 0.05).is_err());
        assert!(tie_sample_complexity(10, 0.06).is_err());
    }

    #[test]
    fn e_dominates_compound_interest() {
        for k in 2..=10_000usize {
            let km1 = (k - 1) as f64;
            assert!((1.0 + 1.0 / km1).powf(km1) <= E);
        }
    }

    #[test]
    fn alpha_root() {
        let a = solve_alpha(0.05, 2).unwrap();
        assert!((a - 0.5508).abs() <= 1e-3, "{a}");
        assert!((alpha_objective(0.05, 2, a) - 1.0).abs() < 1e-6);
        let mut prev = f64::INFINITY;
        for i in 0..=40 {
            let alpha = ALPHA_BRACKET.0 + (ALPHA_BRACKET.1 - ALPHA_BRACKET.0) * i as f64 / 40.0;
            let t = alpha_objective(0.05, 2, alpha);
            assert!(t < prev);
            prev = t;
        }
        assert!((ALPHA_BRACKET.0 - 1.0 / 40f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn alpha_root_is_worst_at_two() {
        let top = solve_alpha(0.05, 2).unwrap();
        for k in [2usize, 3, 5, 10, 50, 100] {
            for delta in [0.05, 0.02, 0.01] {
                match solve_alpha(delta, k) {
                    Ok(a) => assert!(a <= top + 1e-8, "K={k} delta={delta}: {a}"),
                    // Root lies below the bracket: T < 1 already at its left end.
                    Err(TheoryError::NoSignChange { lo, .. }) => assert!(alpha_objective(delta, k, lo) <= 1.0),
                    Err(e) => panic!("{e}"),
                }
            }
        }
        assert!(solve_alpha(0.1, 2).is_err());
    }

    #[test]
    fn noisy_worst_bound() {
        let noiseless = fp_worst_bound(10, 0.1, 500).unwrap();
        let v = noisy_fp_worst_bound(1e12, 1.0, 10, 0.1, 500).unwrap();
        assert!((v - noiseless).abs() <= 1e-9 * noiseless);
        assert_eq!(noisy_fp_worst_bound(0.0, 1.0, 10, 0.1, 500).unwrap(), 1.0);
        assert!(noisy_fp_worst_bound(1.0, 0.0, 10, 0.1, 500).is_err());
    }

    #[test]
    fn noisy_worst_bound_covers_simulation() {
        let (eps, sigma, k, gamma, m, trials) = (1.0, 1.0, 10usize, 0.1, 500usize, 100_000usize);
        let mut rng = ChaCha8Rng::seed_from_u64(0xd00d);
        let mut hits = 0;
        for _ in 0..trials {
            let mut certified = false;
            for _ in 0..m {
                if rng.random::<f64>() >= gamma {
                    continue;
                }
                let eta = binomial_count(&mut rng, k, gamma) as f64 + sigma * sigma;
                if (eta.sqrt() * cauchy(&mut rng)).abs() <= eps {
                    certified = true;
                    break;
                }
            }
            if !certified {
                hits += 1;
            }
        }
        let rate = hits as f64 / trials as f64;
        assert!(rate <= noisy_fp_worst_bound(eps, sigma, k, gamma, m).unwrap());
        assert!(fp_exact_ternary_noisy(eps, sigma, k, gamma, m).unwrap() <= noisy_fp_worst_bound(eps, sigma, k, gamma, m).unwrap());
    }

    proptest::proptest! {
        #[test]
        fn outputs_are_probabilities(
            eps in 0.0f64..5.0,
            k in 1usize..60,
            gamma in 0.001f64..0.999,
            m in 2usize..5000,
            sigma in 0.01f64..3.0,
        ) {
            let values = [
                fp_worst_bound(k, gamma, m).unwrap(),
                fp_data_bound(eps, gamma, m, k as f64, sigma).unwrap(),
                fp_exact_ternary(eps, k, gamma, m).unwrap(),
                fp_exact_ternary_noisy(eps, sigma, k, gamma, m).unwrap(),
                noisy_fp_worst_bound(eps, sigma, k, gamma, m).unwrap(),
                tie_error_probability(k, gamma, m).unwrap(),
                fn_bounds(eps, gamma, m, 1.0, k).unwrap().exact_ternary,
                fn_bounds(eps, gamma, m, 1.0, k).unwrap().loose,
            ];
            for v in values {
                proptest::prop_assert!((0.0..=1.0).contains(&v), "{v}");
            }
            let h = binomial_detection_rate(eps, k, gamma).unwrap();
            proptest::prop_assert!(h >= 0.0 && h <= gamma * k as f64 + 1e-12);
        }

        #[test]
        fn loose_fn_bound_monotone(eps in 0.0f64..3.0, d in 0.0f64..1.0, m in 1usize..1000) {
            let a = fn_bounds(eps, 0.1, m, 1.0, 10).unwrap().loose;
            let b = fn_bounds(eps + d, 0.1, m, 1.0, 10).unwrap().loose;
            let c = fn_bounds(eps, 0.1, m + 1, 1.0, 10).unwrap().loose;
            proptest::prop_assert!(b >= a && c >= a);
        }
    }
}
