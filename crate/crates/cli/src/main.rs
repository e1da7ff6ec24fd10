//! Command-line front door: generate, estimate, certify, bench.
//!
//! Every subcommand is reproducible from (argv, input files); the only
//! wall-clock-dependent output is the explicitly labeled seconds field.
//! Exit codes: 0 ok, 2 input error, 3 promise/guarantee failure.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use reweigh_core::centers::{
    best_weights_for_direction, combinatorial_check, angle_grid, spectral_objective, ScoreForm,
};
use reweigh_core::datagen::{
    corrupt, gen_gaussian, gen_planted_promise, gen_student_t, Adversary, Instance, Witness,
};
use reweigh_core::estimators::{
    heavy_tailed_mean, robust_mean, robust_mean_subgaussian, EstimationReport, HeavyTailConfig,
    RobustSolver,
};
use reweigh_core::linalg::approx_top_eigenvector;
use reweigh_core::points::{norm, sub_norm_sq, Direction};
use reweigh_core::prune::prune_ball;
use reweigh_core::solver::gd_subgaussian;
use reweigh_core::{Error, PointSet, SolverConfig};

const SEED_ENV: &str = "REWEIGH_SEED";

#[derive(Parser)]
#[command(name = "reweigh", about = "Robust mean estimation via spectral sample reweighing")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic dataset as CSV plus a JSON sidecar.
    Generate(GenerateArgs),
    /// Run a robust estimator on a CSV dataset; JSON report on stdout.
    Estimate(EstimateArgs),
    /// Check a candidate center against the duality criteria.
    Certify(CertifyArgs),
    /// Repeated estimation trials; CSV table with aggregates.
    Bench(BenchArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Generator {
    Gaussian,
    StudentT,
    Planted,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum AdversaryKind {
    Cluster,
    Scatter,
    Mirror,
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long, value_enum, default_value = "gaussian")]
    generator: Generator,
    #[arg(long)]
    n: usize,
    #[arg(long)]
    d: usize,
    /// Comma-separated true mean (gaussian only); defaults to zeros.
    #[arg(long)]
    mean: Option<String>,
    #[arg(long, default_value_t = 3.0)]
    dof: f64,
    #[arg(long, default_value_t = 2.0)]
    lambda: f64,
    /// Corruption fraction; used by the planted generator and by --adversary.
    #[arg(long, default_value_t = 0.1)]
    eps: f64,
    /// Replace floor(eps*n) points after generation.
    #[arg(long, value_enum)]
    adversary: Option<AdversaryKind>,
    #[arg(long, default_value_t = 10.0)]
    shift: f64,
    #[arg(long, default_value_t = 1.0)]
    radius: f64,
    #[arg(long)]
    seed: Option<u64>,
    /// Data CSV path; the sidecar lands next to it with a .json extension.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Algo {
    Mwu,
    Gd,
    Mmw,
    Subg,
    SubgGd,
    Breakdown,
    HeavyTailed,
}

impl Algo {
    fn name(&self) -> &'static str {
        match self {
            Algo::Mwu => "mwu",
            Algo::Gd => "gd",
            Algo::Mmw => "mmw",
            Algo::Subg => "subg",
            Algo::SubgGd => "subg-gd",
            Algo::Breakdown => "breakdown",
            Algo::HeavyTailed => "heavy-tailed",
        }
    }
}

#[derive(Args)]
struct EstimateArgs {
    #[arg(long)]
    input: PathBuf,
    /// Sidecar JSON; defaults to the input path with a .json extension.
    #[arg(long)]
    sidecar: Option<PathBuf>,
    #[arg(long, value_enum)]
    algo: Algo,
    #[arg(long, default_value_t = 0.1)]
    eps: f64,
    #[arg(long, default_value_t = 0.05)]
    delta: f64,
    #[arg(long, default_value_t = 1.0)]
    sigma: f64,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct CertifyArgs {
    #[arg(long)]
    input: PathBuf,
    /// Comma-separated candidate center; falls back to the sidecar's true_mean.
    #[arg(long)]
    center: Option<String>,
    #[arg(long)]
    sidecar: Option<PathBuf>,
    #[arg(long, default_value_t = 2.0)]
    lambda: f64,
    #[arg(long, default_value_t = 0.1)]
    eps: f64,
    /// Angle-grid resolution in d = 2.
    #[arg(long, default_value_t = 3600)]
    grid: usize,
    /// Falsifier directions tried in d > 2.
    #[arg(long, default_value_t = 2000)]
    draws: u64,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long, value_enum)]
    algo: Algo,
    #[arg(long, default_value_t = 10)]
    trials: usize,
    #[arg(long, default_value_t = 1000)]
    n: usize,
    #[arg(long, default_value_t = 10)]
    d: usize,
    #[arg(long, default_value_t = 0.1)]
    eps: f64,
    #[arg(long, default_value_t = 0.05)]
    delta: f64,
    #[arg(long, default_value_t = 1.0)]
    sigma: f64,
    #[arg(long)]
    lambda: Option<f64>,
    /// Cluster-adversary shift applied to each trial.
    #[arg(long, default_value_t = 10.0)]
    shift: f64,
    #[arg(long)]
    base_seed: Option<u64>,
    /// Output CSV path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Sidecar schema shared by generate and the loaders.
#[derive(Serialize, Deserialize)]
struct Sidecar {
    true_mean: Vec<f64>,
    labels: Vec<bool>,
    generator: String,
    seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    witness: Option<SidecarWitness>,
}

#[derive(Serialize, Deserialize)]
struct SidecarWitness {
    center: Vec<f64>,
    weights: Vec<f64>,
    lambda: f64,
}

#[derive(Serialize)]
struct EstimateOut {
    estimate: Vec<f64>,
    algo: String,
    iterations: usize,
    seconds: f64,
    spectral_norm: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    error_vs_truth: Option<f64>,
}

#[derive(Serialize)]
struct CertifyOut {
    verdict: String,
    worst_fraction: f64,
    worst_direction: Vec<f64>,
    spectral_objective_best_weights: f64,
    threshold: f64,
}

/// Failures that should exit 2 (bad input) vs 3 (promise violated).
enum CliError {
    Input(String),
    Promise(String),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::PromiseViolated(_) | Error::WidthViolated { .. } => {
                CliError::Promise(e.to_string())
            }
            other => CliError::Input(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Input(e.to_string())
    }
}

type CliResult<T> = Result<T, CliError>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match cli.command {
        Command::Generate(a) => cmd_generate(a),
        Command::Estimate(a) => cmd_estimate(a),
        Command::Certify(a) => cmd_certify(a),
        Command::Bench(a) => cmd_bench(a),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Input(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Promise(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(3)
        }
    }
}

fn default_seed(flag: Option<u64>) -> CliResult<u64> {
    if let Some(s) = flag {
        return Ok(s);
    }
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .parse()
            .map_err(|_| CliError::Input(format!("{SEED_ENV}={v} is not a valid seed"))),
        Err(_) => Ok(0),
    }
}

fn parse_vec(s: &str, what: &str) -> CliResult<Vec<f64>> {
    s.split(',')
        .map(|t| {
            t.trim()
                .parse()
                .map_err(|_| CliError::Input(format!("bad {what} component {t:?}")))
        })
        .collect()
}

fn sidecar_path(csv: &Path, flag: &Option<PathBuf>) -> PathBuf {
    flag.clone().unwrap_or_else(|| csv.with_extension("json"))
}

fn format_csv(points: &PointSet) -> String {
    let mut out = String::new();
    for row in points.rows() {
        for (j, x) in row.iter().enumerate() {
            if j > 0 {
                out.push(',');
            }
            // Ryu-style shortest round-trip formatting; '.' decimal.
            let _ = write!(out, "{x}");
        }
        out.push('\n');
    }
    out
}

fn load_csv(path: &Path) -> CliResult<PointSet> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    let mut rows = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let row: Vec<f64> = line
            .split(',')
            .map(|t| {
                t.trim().parse().map_err(|_| {
                    CliError::Input(format!(
                        "{}:{}: malformed value {t:?}",
                        path.display(),
                        lineno + 1
                    ))
                })
            })
            .collect::<CliResult<_>>()?;
        rows.push(row);
    }
    PointSet::from_rows(&rows).map_err(|e| CliError::Input(e.to_string()))
}

fn load_sidecar(path: &Path) -> CliResult<Option<Sidecar>> {
    match std::fs::read_to_string(path) {
        Ok(text) => serde_json::from_str(&text)
            .map(Some)
            .map_err(|e| CliError::Input(format!("{}: {e}", path.display()))),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
        Err(e) => Err(CliError::Input(format!("{}: {e}", path.display()))),
    }
}

fn cmd_generate(a: GenerateArgs) -> CliResult<()> {
    let seed = default_seed(a.seed)?;
    let base: Instance = match a.generator {
        Generator::Gaussian => {
            let mean = match &a.mean {
                Some(s) => parse_vec(s, "mean")?,
                None => vec![0.0; a.d],
            };
            gen_gaussian(a.n, a.d, &mean, seed)?
        }
        Generator::StudentT => gen_student_t(a.n, a.d, a.dof, seed)?,
        Generator::Planted => gen_planted_promise(a.n, a.d, a.lambda, a.eps, seed)?,
    };
    let instance = match a.adversary {
        None => base,
        Some(kind) => {
            let adv = match kind {
                AdversaryKind::Cluster => Adversary::Cluster { shift: a.shift },
                AdversaryKind::Scatter => {
                    Adversary::Scatter { shift: a.shift, radius: a.radius }
                }
                AdversaryKind::Mirror => Adversary::Mirror { shift: a.shift },
            };
            corrupt(&base, a.eps, adv, None, seed.wrapping_add(1))?
        }
    };

    std::fs::write(&a.out, format_csv(&instance.points))?;
    let sidecar = Sidecar {
        true_mean: instance.true_mean.clone(),
        labels: instance.inlier_labels.clone(),
        generator: instance.generator.clone(),
        seed: instance.seed,
        witness: instance.witness.as_ref().map(|w: &Witness| SidecarWitness {
            center: w.center.clone(),
            weights: w.weights.clone(),
            lambda: w.lambda,
        }),
    };
    let json = serde_json::to_string_pretty(&sidecar)
        .map_err(|e| CliError::Input(e.to_string()))?;
    std::fs::write(sidecar_path(&a.out, &None), json)?;
    Ok(())
}

fn run_estimate(a: &EstimateArgs, data: &PointSet, seed: u64) -> CliResult<EstimationReport> {
    let config = SolverConfig::default();
    let report = match a.algo {
        Algo::Mwu => {
            robust_mean(data, a.eps, a.sigma, RobustSolver::Mwu, a.delta, a.lambda, &config, seed)?
        }
        Algo::Gd => {
            robust_mean(data, a.eps, a.sigma, RobustSolver::Gd, a.delta, a.lambda, &config, seed)?
        }
        Algo::Mmw => {
            robust_mean(data, a.eps, a.sigma, RobustSolver::Mmw, a.delta, a.lambda, &config, seed)?
        }
        Algo::Breakdown => robust_mean(
            data,
            a.eps,
            a.sigma,
            RobustSolver::Breakdown,
            a.delta,
            a.lambda,
            &config,
            seed,
        )?,
        Algo::Subg => robust_mean_subgaussian(data, a.eps, a.delta, &config, seed)?,
        Algo::SubgGd => subgaussian_gd_estimate(data, a.eps, a.delta, &config, seed)?,
        Algo::HeavyTailed => {
            heavy_tailed_mean(data, &HeavyTailConfig::new(a.delta), &config, seed)?
        }
    };
    Ok(report)
}

/// The GD twin of the sub-gaussian pipeline: same pruning, gradient
/// descent instead of multiplicative weights on the survivors.
fn subgaussian_gd_estimate(
    data: &PointSet,
    eps: f64,
    delta: f64,
    config: &SolverConfig,
    seed: u64,
) -> CliResult<EstimationReport> {
    let start = std::time::Instant::now();
    let n = data.len();
    let d = data.dim();
    let r = 2.0 * (d as f64 * (n as f64).ln()).sqrt();
    let pruned = prune_ball(data, r, 2.0 * eps, delta / 2.0, seed)?;
    let survivors = data.subset(&pruned.kept_indices)?;
    let rho = survivors.squared_diameter_bound().max(1.0);
    let sol = gd_subgaussian(&survivors, eps, rho, delta / 2.0, config, seed.wrapping_add(1))?;
    Ok(EstimationReport {
        estimate: sol.center.clone(),
        solver_used: "subg-gd".into(),
        iterations: sol.iterations,
        wall_time: start.elapsed(),
        error_vs_truth: None,
        spectral_norm: sol.spectral_norm,
        truncated: sol.truncated,
    })
}

fn cmd_estimate(a: EstimateArgs) -> CliResult<()> {
    let seed = default_seed(a.seed)?;
    let data = load_csv(&a.input)?;
    let sidecar = load_sidecar(&sidecar_path(&a.input, &a.sidecar))?;
    let mut report = run_estimate(&a, &data, seed)?;
    if let Some(sc) = &sidecar {
        report.set_truth(&sc.true_mean);
    }
    let out = EstimateOut {
        estimate: report.estimate.clone(),
        algo: a.algo.name().to_string(),
        iterations: report.iterations,
        seconds: report.wall_time.as_secs_f64(),
        spectral_norm: report.spectral_norm,
        error_vs_truth: report.error_vs_truth,
    };
    println!("{}", serde_json::to_string_pretty(&out).map_err(|e| CliError::Input(e.to_string()))?);
    Ok(())
}

fn cmd_certify(a: CertifyArgs) -> CliResult<()> {
    let seed = default_seed(a.seed)?;
    let data = load_csv(&a.input)?;
    let d = data.dim();
    let center = match &a.center {
        Some(s) => parse_vec(s, "center")?,
        None => {
            let sc = load_sidecar(&sidecar_path(&a.input, &a.sidecar))?
                .ok_or_else(|| CliError::Input("no --center and no sidecar".into()))?;
            sc.true_mean
        }
    };
    if center.len() != d {
        return Err(CliError::Input(format!(
            "center has {} components, data has {d}",
            center.len()
        )));
    }

    let threshold = a.lambda.sqrt();
    let directions = if d == 2 {
        angle_grid(a.grid)?
    } else {
        // Falsifier set: seeded random directions plus the top
        // eigendirection of the covariance about the candidate.
        let mut dirs = Vec::with_capacity(a.draws as usize + 1);
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..a.draws {
            let v: Vec<f64> = (0..d)
                .map(|_| rng.sample::<f64, _>(rand_distr::StandardNormal))
                .collect();
            if norm(&v) > 1e-12 {
                dirs.push(Direction::normalized(v)?);
            }
        }
        let uniform = vec![1.0 / data.len() as f64; data.len()];
        let top = approx_top_eigenvector(&data, &uniform, &center, 0.99, 1e-6, seed ^ 0x11)?;
        if !top.degenerate {
            dirs.push(top.direction);
        }
        dirs
    };

    let mut worst = 0.0_f64;
    let mut worst_dir = directions[0].as_slice().to_vec();
    for v in &directions {
        let frac = combinatorial_check(&data, &center, threshold, std::slice::from_ref(v))?;
        if frac > worst {
            worst = frac;
            worst_dir = v.as_slice().to_vec();
        }
    }
    let trimmed = best_weights_for_direction(
        &data,
        &center,
        a.eps,
        ScoreForm::Direction(&Direction::new(worst_dir.clone())?),
    )?;
    let objective = spectral_objective(&data, &center, trimmed.as_slice())?;

    let verdict = if worst > a.eps {
        "falsified"
    } else if d == 2 {
        "certified-2d"
    } else {
        "inconclusive"
    };
    let out = CertifyOut {
        verdict: verdict.to_string(),
        worst_fraction: worst,
        worst_direction: worst_dir,
        spectral_objective_best_weights: objective,
        threshold,
    };
    println!("{}", serde_json::to_string_pretty(&out).map_err(|e| CliError::Input(e.to_string()))?);
    Ok(())
}

fn cmd_bench(a: BenchArgs) -> CliResult<()> {
    if a.trials == 0 {
        return Err(CliError::Input("trials must be >= 1".into()));
    }
    let base_seed = default_seed(a.base_seed)?;
    let mut rows = String::from("trial,algo,eps_or_delta,error,iterations,seconds\n");
    let mut errors = Vec::with_capacity(a.trials);
    let knob = match a.algo {
        Algo::HeavyTailed => a.delta,
        _ => a.eps,
    };
    for trial in 0..a.trials {
        let seed = base_seed + trial as u64;
        let (points, truth) = match a.algo {
            Algo::HeavyTailed => {
                let inst = gen_student_t(a.n, a.d, 3.0, seed)?;
                (inst.points, inst.true_mean)
            }
            _ => {
                let base = gen_gaussian(a.n, a.d, &vec![0.0; a.d], seed)?;
                let bad = corrupt(
                    &base,
                    a.eps,
                    Adversary::Cluster { shift: a.shift },
                    None,
                    seed.wrapping_add(0x9e37),
                )?;
                (bad.points, bad.true_mean)
            }
        };
        let est = EstimateArgs {
            input: PathBuf::new(),
            sidecar: None,
            algo: a.algo,
            eps: a.eps,
            delta: a.delta,
            sigma: a.sigma,
            lambda: a.lambda,
            seed: Some(seed),
        };
        let report = run_estimate(&est, &points, seed)?;
        let err = sub_norm_sq(&report.estimate, &truth).sqrt();
        errors.push(err);
        let _ = writeln!(
            rows,
            "{trial},{},{knob},{err},{},{}",
            a.algo.name(),
            report.iterations,
            report.wall_time.as_secs_f64()
        );
    }
    errors.sort_by(|x, y| x.partial_cmp(y).unwrap());
    let median = percentile(&errors, 0.5);
    let p95 = percentile(&errors, 0.95);
    let _ = writeln!(rows, "aggregate,{},{knob},median={median} p95={p95},,", a.algo.name());

    match &a.out {
        Some(path) => std::fs::write(path, rows)?,
        None => print!("{rows}"),
    }
    Ok(())
}

/// Nearest-rank percentile of a sorted slice.
fn percentile(sorted: &[f64], q: f64) -> f64 {
    let idx = ((q * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len()) - 1;
    sorted[idx]
}
