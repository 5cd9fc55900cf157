use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use sparsecs::harness::{self, Criterion, ExperimentSpec, GammaRule};
use sparsecs::{decoder, theory, validation, DecoderConfig, Signal, SparseDesign};

#[derive(Parser)]
#[command(name = "sparsecs", version, about = "Sparse recovery from very sparse Gaussian projections")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Measure a signal with a seeded sparse design and decode it.
    Decode(DecodeArgs),
    /// Evaluate closed-form error bounds and sample complexities.
    Bounds(BoundsArgs),
    /// Run the built-in consistency checks of the closed forms.
    Validate(ValidateArgs),
    /// Run a Monte Carlo grid over (K, M) and write CSV and contours.
    Experiment(ExperimentArgs),
}

#[derive(Args)]
struct DecodeArgs {
    /// Signal file: a header line `N K`, then `index value` lines.
    #[arg(long)]
    signal: PathBuf,
    /// Expected signal length; checked against the file.
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    m: usize,
    /// Design density; defaults to 1/K for the signal's sparsity K.
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0.0)]
    epsilon: f64,
    #[arg(long, default_value_t = 1e-10)]
    tie_tol: f64,
    #[arg(long = "max-iter", default_value_t = 4)]
    max_iter: usize,
    #[arg(long, default_value_t = 0.0)]
    sigma: f64,
    #[arg(long, default_value_t = 0)]
    noise_seed: u64,
    /// Output JSON path; stdout when absent.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Quantity {
    FpWorst,
    FpTernary,
    FpData,
    FpNoisy,
    Fn,
    SupportM,
    TieM,
    TieError,
    Alpha,
    #[value(name = "h")]
    PoissonRate,
    #[value(name = "H")]
    BinomialRate,
}

#[derive(Args)]
struct BoundsArgs {
    #[arg(long, default_value_t = 2000)]
    n: usize,
    #[arg(long, default_value_t = 10)]
    k: usize,
    #[arg(long, default_value_t = 200)]
    m: usize,
    /// Defaults to 1/K.
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long, default_value_t = 0.0)]
    epsilon: f64,
    #[arg(long, default_value_t = 0.05)]
    delta: f64,
    #[arg(long, default_value_t = 0.0)]
    sigma: f64,
    /// Quantities to print; all applicable ones when absent.
    #[arg(long, value_enum, value_delimiter = ',')]
    what: Vec<Quantity>,
}

#[derive(Args)]
struct ValidateArgs {
    /// Trials for the false-positive simulation check.
    #[arg(long, default_value_t = 100_000)]
    trials: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

#[derive(Args)]
struct ExperimentArgs {
    #[arg(long, default_value_t = 2000)]
    n: usize,
    #[arg(long = "k-list", value_delimiter = ',', default_values_t = [2usize, 5, 10, 20, 40])]
    k_list: Vec<usize>,
    /// Explicit M values, comma separated.
    #[arg(long = "m-list", value_delimiter = ',', conflicts_with = "m_range")]
    m_list: Vec<usize>,
    /// M values as `start:stop:step`, stop inclusive.
    #[arg(long = "m-range", default_value = "50:1500:50")]
    m_range: String,
    #[arg(long, default_value_t = 100)]
    trials: usize,
    /// `1/K` or a fixed density.
    #[arg(long, default_value = "1/K")]
    gamma: GammaRule,
    #[arg(long, default_value_t = 0.0)]
    epsilon: f64,
    #[arg(long, default_value_t = 0.0)]
    sigma: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// `full` or `support`.
    #[arg(long, default_value = "full")]
    criterion: Criterion,
    #[arg(long = "out-csv")]
    out_csv: Option<PathBuf>,
    /// SVG path; vertex data goes to `<stem>.contour.csv` beside it.
    #[arg(long = "out-contour")]
    out_contour: Option<PathBuf>,
    #[arg(long, value_delimiter = ',', default_values_t = [0.5, 0.9, 0.99])]
    levels: Vec<f64>,
    /// Worker threads; all cores when absent.
    #[arg(long, env = "SPARSECS_JOBS")]
    jobs: Option<usize>,
    /// Suppress progress on stderr.
    #[arg(long)]
    quiet: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Decode(a) => run_decode(a),
        Command::Bounds(a) => run_bounds(a),
        Command::Validate(a) => run_validate(a),
        Command::Experiment(a) => run_experiment(a),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

#[derive(Serialize)]
struct DecodeParams {
    n: usize,
    k: usize,
    m: usize,
    gamma: f64,
    seed: u64,
    sigma: f64,
    noise_seed: Option<u64>,
    config: DecoderConfig,
}

#[derive(Serialize)]
struct DecodeReport<'a> {
    params: DecodeParams,
    iterations_used: usize,
    undetermined: usize,
    statuses: &'a [decoder::CoordinateStatus],
    rounds: &'a [decoder::RoundStats],
}

fn run_decode(a: DecodeArgs) -> Result<ExitCode> {
    let signal = Signal::read_from(&a.signal).with_context(|| format!("reading {}", a.signal.display()))?;
    if let Some(n) = a.n {
        if n != signal.len() {
            bail!("--n {n} does not match the signal length {}", signal.len());
        }
    }
    let k = signal.sparsity();
    let gamma = match a.gamma {
        Some(g) => g,
        None if k > 0 => 1.0 / k as f64,
        None => bail!("the signal is all zero; pass --gamma explicitly"),
    };
    let config = DecoderConfig { epsilon: a.epsilon, tie_tol: a.tie_tol, max_iterations: a.max_iter, min_tie_size: 2 };
    config.validate()?;

    let design = SparseDesign::generate_parallel(signal.len(), a.m, gamma, a.seed)?;
    let mut y = design.measure(&signal)?;
    if a.sigma > 0.0 {
        y = y.add_noise(a.sigma, a.noise_seed)?;
    }
    let result = decoder::decode(&design, &y, &config)?;
    let report = DecodeReport {
        params: DecodeParams {
            n: signal.len(),
            k,
            m: a.m,
            gamma,
            seed: a.seed,
            sigma: a.sigma,
            noise_seed: y.noise_seed(),
            config,
        },
        iterations_used: result.iterations_used,
        undetermined: result.undetermined_count(),
        statuses: &result.statuses,
        rounds: &result.rounds,
    };
    let json = serde_json::to_string_pretty(&report)?;
    match &a.output {
        Some(path) => std::fs::write(path, json + "\n").with_context(|| format!("writing {}", path.display()))?,
        None => println!("{json}"),
    }
    Ok(ExitCode::SUCCESS)
}

fn run_bounds(a: BoundsArgs) -> Result<ExitCode> {
    let gamma = a.gamma.unwrap_or(1.0 / a.k.max(1) as f64);
    let explicit = !a.what.is_empty();
    let what = if explicit {
        a.what.clone()
    } else {
        let mut all = vec![
            Quantity::BinomialRate,
            Quantity::PoissonRate,
            Quantity::FpWorst,
            Quantity::FpTernary,
            Quantity::FpData,
            Quantity::Fn,
            Quantity::SupportM,
            Quantity::TieError,
            Quantity::TieM,
            Quantity::Alpha,
        ];
        if a.sigma > 0.0 {
            all.push(Quantity::FpNoisy);
        }
        all
    };

    println!("N = {}  K = {}  M = {}  gamma = {gamma}  epsilon = {}  delta = {}  sigma = {}", a.n, a.k, a.m, a.epsilon, a.delta, a.sigma);
    let mut failed = false;
    for q in what {
        let rows: Result<Vec<(String, String)>, theory::TheoryError> = (|| {
            Ok(match q {
                Quantity::BinomialRate => {
                    vec![("H(epsilon, K, gamma)".into(), fmt(theory::binomial_detection_rate(a.epsilon, a.k, gamma)?))]
                }
                Quantity::PoissonRate => vec![(
                    "h(epsilon, gamma K)".into(),
                    fmt(theory::poisson_detection_rate(a.epsilon, gamma * a.k as f64)?),
                )],
                Quantity::FpWorst => vec![("false positive, worst case".into(), fmt(theory::fp_worst_bound(a.k, gamma, a.m)?))],
                Quantity::FpTernary => vec![(
                    "false positive, exact ternary".into(),
                    fmt(theory::fp_exact_ternary_noisy(a.epsilon, a.sigma, a.k, gamma, a.m)?),
                )],
                Quantity::FpData => vec![(
                    "false positive, data bound".into(),
                    fmt(theory::fp_data_bound(a.epsilon, gamma, a.m, a.k as f64, a.sigma)?),
                )],
                Quantity::FpNoisy => vec![(
                    "false positive, noisy worst case".into(),
                    fmt(theory::noisy_fp_worst_bound(a.epsilon, a.sigma, a.k, gamma, a.m)?),
                )],
                Quantity::Fn => {
                    let f = theory::fn_bounds(a.epsilon, gamma, a.m, 1.0, a.k)?;
                    vec![
                        ("false negative at |x| = 1, exact ternary".into(), fmt(f.exact_ternary)),
                        ("false negative, loose bound".into(), fmt(f.loose)),
                    ]
                }
                Quantity::SupportM => {
                    let s = theory::support_sample_complexity(a.n, a.k, a.delta)?;
                    let mut rows = vec![
                        ("support M, exact".into(), s.exact.to_string()),
                        ("support M, e K log(N/delta)".into(), format!("{:.1}", s.approx)),
                    ];
                    if a.epsilon > 0.0 {
                        rows.push((
                            "support M, ternary at epsilon".into(),
                            theory::ternary_support_sample_complexity(a.n, a.k, a.epsilon, gamma, a.delta)?.to_string(),
                        ));
                    }
                    if a.sigma > 0.0 {
                        rows.push((
                            "support M, noisy".into(),
                            theory::noisy_support_sample_complexity(a.n, a.k, a.delta, a.epsilon, a.sigma)?.to_string(),
                        ));
                    }
                    rows
                }
                Quantity::TieError => {
                    vec![("tie failure per coordinate".into(), fmt(theory::tie_error_probability(a.k, gamma, a.m)?))]
                }
                Quantity::TieM => {
                    let t = theory::tie_sample_complexity(a.k, a.delta)?;
                    vec![
                        ("tie M, exact".into(), t.exact.to_string()),
                        ("tie M, closed form".into(), t.closed_form.to_string()),
                    ]
                }
                Quantity::Alpha => vec![("tie overhead alpha".into(), fmt(theory::solve_alpha(a.delta, a.k)?))],
            })
        })();
        match rows {
            Ok(rows) => {
                for (label, value) in rows {
                    println!("{label:<44} {value}");
                }
            }
            Err(e) if explicit => {
                eprintln!("error: {e}");
                failed = true;
            }
            Err(e) => println!("{:<44} n/a ({e})", format!("{:?}", name_of(q))),
        }
    }
    Ok(if failed { ExitCode::from(2) } else { ExitCode::SUCCESS })
}

fn name_of(q: Quantity) -> String {
    q.to_possible_value().map(|v| v.get_name().to_string()).unwrap_or_default()
}

fn fmt(v: f64) -> String {
    format!("{v:.6e}")
}

fn run_validate(a: ValidateArgs) -> Result<ExitCode> {
    let checks = validation::run_checks(a.trials, a.seed);
    let mut ok = true;
    for c in &checks {
        println!("{} {:<34} {}", if c.passed { "ok  " } else { "FAIL" }, c.name, c.detail);
        ok &= c.passed;
    }
    Ok(if ok { ExitCode::SUCCESS } else { ExitCode::from(1) })
}

fn parse_range(s: &str) -> Result<Vec<usize>> {
    let parts: Vec<&str> = s.split(':').collect();
    let [start, stop, step] = parts.as_slice() else {
        bail!("--m-range expects start:stop:step, got `{s}`");
    };
    let (start, stop, step): (usize, usize, usize) = (start.parse()?, stop.parse()?, step.parse()?);
    if step == 0 || start > stop {
        bail!("--m-range needs step > 0 and start <= stop, got `{s}`");
    }
    Ok((start..=stop).step_by(step).collect())
}

fn run_experiment(a: ExperimentArgs) -> Result<ExitCode> {
    let m_values = if a.m_list.is_empty() { parse_range(&a.m_range)? } else { a.m_list.clone() };
    let spec = ExperimentSpec {
        n: a.n,
        k_values: a.k_list.clone(),
        m_values,
        trials: a.trials,
        gamma_rule: a.gamma,
        sigma: a.sigma,
        master_seed: a.seed,
        criterion: a.criterion,
        decoder: DecoderConfig { epsilon: a.epsilon, ..DecoderConfig::default() },
    };
    spec.validate()?;

    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(jobs) = a.jobs {
        if jobs == 0 {
            bail!("--jobs must be >= 1");
        }
        pool = pool.num_threads(jobs);
    }
    let pool = pool.build()?;
    let quiet = a.quiet;
    let grid = pool.install(|| {
        harness::run_grid_with_progress(&spec, |done, total| {
            if !quiet {
                eprint!("\rcells {done}/{total}");
                if done == total {
                    eprintln!();
                }
            }
        })
    })?;

    if grid.tie_violations() > 0 {
        eprintln!("warning: {} recovered values disagreed with the planted signal", grid.tie_violations());
    }
    if let Some(path) = &a.out_csv {
        harness::emit_csv(&grid, path)?;
    } else {
        println!("{:>6} {:>6} {:>8} {:>10}", "K", "M", "success", "mean_fp");
        for c in &grid.cells {
            println!("{:>6} {:>6} {:>8.3} {:>10.3}", c.k, c.m, c.success_rate(), c.mean_false_positives());
        }
    }
    if let Some(path) = &a.out_contour {
        let files = harness::emit_contour(&grid, &a.levels, path)?;
        if !quiet {
            eprintln!("wrote {} and {}", files.svg.display(), files.data.display());
        }
    }
    Ok(ExitCode::SUCCESS)
}
