//! Self-checks of the closed forms and the false-positive simulator.
//!
//! Each check compares a library quantity against an independent
//! computation (explicit enumeration, a limit, or simulation) and reports
//! what it found. The CLI `validate` subcommand prints these.

use std::f64::consts::{E, FRAC_2_PI};

use serde::Serialize;

use crate::harness::{mc_fp_rate, FpRateQuery};
use crate::theory;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(name: &'static str, passed: bool, detail: String) -> Self {
        Self { name, passed, detail }
    }

    fn from_result(name: &'static str, r: Result<(bool, String), String>) -> Self {
        match r {
            Ok((passed, detail)) => Self::new(name, passed, detail),
            Err(e) => Self::new(name, false, format!("error: {e}")),
        }
    }
}

/// `H(epsilon, K, gamma)` by summing over all `2^K` support patterns seen by
/// one measurement.
pub fn detection_rate_by_enumeration(epsilon: f64, k: usize, gamma: f64) -> f64 {
    assert!(k <= 24, "enumeration is exponential in K");
    let mut total = 0.0;
    for mask in 0u32..(1u32 << k) {
        let z = mask.count_ones() as i32;
        let p = gamma.powi(z) * (1.0 - gamma).powi(k as i32 - z);
        let hit = if z == 0 { 1.0 } else { FRAC_2_PI * (epsilon / (z as f64).sqrt()).atan() };
        total += p * hit;
    }
    gamma * k as f64 * total
}

fn enumeration_check() -> Result<(bool, String), String> {
    let mut worst: f64 = 0.0;
    for k in 1..=12 {
        for &gamma in &[0.05, 0.1, 1.0 / k as f64, 0.5, 0.9] {
            for &eps in &[0.0, 0.01, 0.5, 1.0, 3.0] {
                let h = theory::binomial_detection_rate(eps, k, gamma).map_err(|e| e.to_string())?;
                worst = worst.max((h - detection_rate_by_enumeration(eps, k, gamma)).abs());
            }
        }
    }
    Ok((worst <= 1e-12, format!("max |H - enumeration| = {worst:.3e} over K <= 12")))
}

fn poisson_check() -> Result<(bool, String), String> {
    // Within 2% up to lambda = 2; beyond that the gap in P(Z = 0) alone,
    // (1 - lambda/K)^K against exp(-lambda), exceeds 2% at small epsilon.
    // Everywhere the gap is within the total-variation bound lambda^2 / K.
    let k = 100;
    let (mut worst, mut worst_at, mut ok) = (0.0f64, (0.0, 0.0), true);
    for i in 0..30 {
        let lambda = 0.1 + 2.9 * i as f64 / 29.0;
        for &eps in &[0.01, 0.1, 0.2, 0.5, 1.0] {
            let h = theory::poisson_detection_rate(eps, lambda).map_err(|e| e.to_string())?;
            let hb = theory::binomial_detection_rate(eps, k, lambda / k as f64).map_err(|e| e.to_string())?;
            let rel = (h - hb).abs() / hb;
            ok &= (h - hb).abs() <= lambda * lambda * lambda / k as f64;
            ok &= lambda > 2.0 || rel <= 0.02;
            if rel > worst {
                worst = rel;
                worst_at = (lambda, eps);
            }
        }
    }
    Ok((
        ok,
        format!("K = 100, max relative |h - H| = {worst:.3e} at lambda = {:.2}, epsilon = {}", worst_at.0, worst_at.1),
    ))
}

fn bounded_by_e_check() -> Result<(bool, String), String> {
    let mut worst: f64 = 0.0;
    for &eps in &[0.01, 0.1, 0.2, 0.5, 1.0] {
        let h = theory::poisson_detection_rate(eps, 1.0).map_err(|e| e.to_string())?;
        let hb = theory::binomial_detection_rate(eps, 100, 0.01).map_err(|e| e.to_string())?;
        worst = worst.max(1.0 / h).max(1.0 / hb);
    }
    Ok((worst <= E, format!("max(1/h, 1/H) = {worst:.6} (e = {E:.6})")))
}

fn constant_check() -> Result<(bool, String), String> {
    let c10 = theory::support_complexity_constant(10).map_err(|e| e.to_string())?;
    let c100 = theory::support_complexity_constant(100).map_err(|e| e.to_string())?;
    let ok = (c10 - E).abs() <= 0.1 && (c100 - E).abs() <= 0.01;
    Ok((ok, format!("constant(10) = {c10:.5}, constant(100) = {c100:.5}")))
}

fn compound_check() -> Result<(bool, String), String> {
    // (1 - 1/K)^K increases to 1/e, so its reciprocal never drops below e.
    let bad = (2..=10_000).find(|&k| {
        let kf = k as f64;
        1.0 / (1.0 - 1.0 / kf).powf(kf) < E
    });
    Ok((bad.is_none(), match bad {
        None => "1/(1 - 1/K)^K >= e for 2 <= K <= 10000".into(),
        Some(k) => format!("violated at K = {k}"),
    }))
}

fn alpha_check() -> Result<(bool, String), String> {
    let a = theory::solve_alpha(0.05, 2).map_err(|e| e.to_string())?;
    let residual = theory::alpha_objective(0.05, 2, a) - 1.0;
    Ok(((a - 0.5508).abs() <= 1e-3, format!("alpha(0.05, 2) = {a:.6}, T - 1 = {residual:.2e}")))
}

fn tie_closed_form_check() -> Result<(bool, String), String> {
    for k in 2..=1000 {
        let t = theory::tie_sample_complexity(k, 0.05).map_err(|e| e.to_string())?;
        if t.closed_form < t.exact {
            return Ok((false, format!("closed form {} < exact {} at K = {k}", t.closed_form, t.exact)));
        }
    }
    Ok((true, "closed form >= exact for 2 <= K <= 1000 at delta = 0.05".into()))
}

fn fp_simulation_check(trials: usize, seed: u64) -> Result<(bool, String), String> {
    let q = FpRateQuery { n: 2000, k: 10, m: 200, gamma: 0.1, epsilon: 0.5, sigma: 0.0, trials, seed };
    let r = mc_fp_rate(&q).map_err(|e| e.to_string())?;
    Ok((
        r.z_score.abs() <= 3.0,
        format!("empirical {:.5} vs exact {:.5} over {} trials, z = {:.2}", r.empirical, r.theory, trials, r.z_score),
    ))
}

/// Runs every check. `fp_trials` sets the simulation size.
pub fn run_checks(fp_trials: usize, seed: u64) -> Vec<Check> {
    vec![
        Check::from_result("detection rate vs enumeration", enumeration_check()),
        Check::from_result("Poisson limit accuracy", poisson_check()),
        Check::from_result("detection rate bounded by e", bounded_by_e_check()),
        Check::from_result("support constant near e", constant_check()),
        Check::from_result("compound interest bound", compound_check()),
        Check::from_result("tie overhead root", alpha_check()),
        Check::from_result("tie closed form dominates", tie_closed_form_check()),
        Check::from_result("false-positive simulation", fp_simulation_check(fp_trials, seed)),
    ]
}
