use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use proshrink::experiments::{generate_instance, sweep, Execution, InstanceSpec, SweepConfig};
use proshrink::io::{self, RunManifest};
use proshrink::linalg::{spectral_norm, SpectralEstimate};
use proshrink::selfcheck;
use proshrink::solvers::{
    self, trace_csv, FbsConfig, MomentumRule, OuterConfig, SolverConfig, StepSize, Termination,
};
use proshrink::{BoxSet, Error, Interval, Problem};

#[derive(Parser)]
#[command(
    name = "proshrink",
    version,
    about = "Projected shrinkage solvers for box-constrained l1-minimization"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one problem read from text files.
    Solve(SolveArgs),
    /// Recovery-rate sweep over sparsity levels (boxed vs. unconstrained).
    Sweep(SweepArgs),
    /// Run the randomized operator identity batteries.
    Check(CheckArgs),
    /// Write a random sparse-recovery instance to text files.
    Generate(GenerateArgs),
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum SolverKind {
    Proshrink,
    Accel,
    Ppbp,
    Fbs,
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum ThetaRule {
    Linear,
    Squared,
}

#[derive(Args)]
struct SolveArgs {
    /// Matrix CSV, one row per line.
    #[arg(long)]
    matrix: PathBuf,
    /// Right-hand side, one value per line.
    #[arg(long)]
    rhs: PathBuf,
    /// Box file, one `lower upper` pair per line; defaults to R^n.
    #[arg(long = "box")]
    box_path: Option<PathBuf>,
    #[arg(long, default_value_t = 10.0)]
    tau: f64,
    /// Anchor vector u; defaults to zero.
    #[arg(long)]
    u: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "proshrink")]
    solver: SolverKind,
    /// Dual step size (default: 1.9 / (tau ||A||^2)).
    #[arg(long)]
    h: Option<f64>,
    #[arg(long, default_value_t = 1e-10)]
    tol_feas: f64,
    #[arg(long)]
    tol_fp: Option<f64>,
    #[arg(long, default_value_t = 50_000)]
    max_iter: usize,
    /// Seed of the power-iteration start vector.
    #[arg(long, default_value_t = 0x5eed)]
    seed: u64,
    /// Write the per-iteration residual trace.
    #[arg(long)]
    history: bool,
    /// Momentum rule of the accelerated scheme.
    #[arg(long, value_enum, default_value = "linear")]
    theta_rule: ThetaRule,
    #[arg(long, default_value_t = 1.0)]
    theta0: f64,
    /// Gradient-based momentum restart (accelerated scheme only).
    #[arg(long)]
    restart: bool,
    /// `fbs` minimises ||x||_1 + ||Ax - b||^2 / (2 lambda) over the box.
    #[arg(long, default_value_t = 1.0)]
    lambda: f64,
    /// Splitting step for `fbs` (default: lambda / ||A||^2).
    #[arg(long)]
    gamma: Option<f64>,
    /// Outer steps for `ppbp`.
    #[arg(long, default_value_t = 50)]
    outer_steps: usize,
    #[arg(long, default_value_t = 1e-12)]
    outer_tol: f64,
    /// Output directory for solution.txt, trace.csv and manifest.json.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long, default_value_t = 50)]
    m: usize,
    #[arg(long, default_value_t = 100)]
    n: usize,
    /// Sparsity levels: `a..b`, `a..b:step` (inclusive) or `a,b,c`.
    #[arg(long, default_value = "5..40:5")]
    s_range: String,
    #[arg(long, default_value_t = 50)]
    trials: usize,
    #[arg(long, default_value_t = 10.0)]
    tau: f64,
    /// Half-width r of the box [-r, r]^n.
    #[arg(long, default_value_t = 1.0)]
    box_radius: f64,
    /// Box file overriding --box-radius.
    #[arg(long = "box")]
    box_path: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1e-14)]
    tol_feas: f64,
    #[arg(long, default_value_t = 50_000)]
    max_iter: usize,
    #[arg(long, default_value_t = 1e-12)]
    threshold: f64,
    /// 200 x 400, s = 1..80, 100 trials, box [-1, 1]^n, tau = 10.
    #[arg(long)]
    paper_scale: bool,
    /// Run trials on the calling thread only.
    #[arg(long)]
    sequential: bool,
    /// Output CSV; the manifest goes next to it.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct CheckArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    sequential: bool,
    /// Swap in a deliberately wrong operator to exercise the failure path.
    #[arg(long, hide = true)]
    mutate: bool,
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long)]
    m: usize,
    #[arg(long)]
    n: usize,
    #[arg(long)]
    s: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Half-width r of the written box [-r, r]^n.
    #[arg(long, default_value_t = 1.0)]
    box_radius: f64,
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Solve(a) => cmd_solve(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Check(a) => cmd_check(a),
        Command::Generate(a) => cmd_generate(a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

#[derive(Serialize)]
struct SolveManifest<'a> {
    matrix: &'a Path,
    rhs: &'a Path,
    box_path: Option<&'a Path>,
    u: Option<&'a Path>,
    solver: SolverKind,
    tau: f64,
    seed: u64,
    resolved_step: f64,
    spectral: Option<SpectralEstimate>,
    config: serde_json::Value,
    iterations: usize,
    outer_steps: Option<usize>,
    termination: String,
}

fn to_json<T: Serialize>(v: &T) -> Result<serde_json::Value, Error> {
    serde_json::to_value(v).map_err(|e| Error::Other(e.to_string()))
}

fn cmd_solve(args: SolveArgs) -> Result<ExitCode, Error> {
    let a = io::read_matrix(&args.matrix)?;
    let b = io::read_vector(&args.rhs)?;
    let set = match &args.box_path {
        Some(p) => io::read_box(p)?,
        None => BoxSet::whole_space(a.cols())?,
    };
    let u = match &args.u {
        Some(p) => io::read_vector(p)?,
        None => vec![0.0; a.cols()],
    };
    let problem = Problem::new(a, b, set, args.tau, u)?;

    let mut cfg = SolverConfig {
        step: args.h.map_or(StepSize::Auto, StepSize::Fixed),
        tol_feas: args.tol_feas,
        tol_fp: args.tol_fp,
        max_iter: args.max_iter,
        record_history: args.history,
        theta0: args.theta0,
        momentum: match args.theta_rule {
            ThetaRule::Linear => MomentumRule::Linear,
            ThetaRule::Squared => MomentumRule::Squared,
        },
        restart: args.restart,
        ..SolverConfig::default()
    };
    cfg.spectral.seed = args.seed;

    if let Some(h) = args.h {
        let est = spectral_norm(problem.a(), &cfg.spectral)?;
        let bound = 2.0 / (args.tau * est.sigma * est.sigma);
        if h >= bound {
            eprintln!("warning: h = {h:e} is not below 2 / (tau ||A||^2) ~= {bound:e}; convergence is not guaranteed");
        }
    }

    let (result, config_json) = match args.solver {
        SolverKind::Proshrink => (solvers::proshrink(&problem, &cfg)?, to_json(&cfg)?),
        SolverKind::Accel => (
            solvers::proshrink_accelerated(&problem, &cfg)?,
            to_json(&cfg)?,
        ),
        SolverKind::Ppbp => {
            let outer = OuterConfig {
                lambda: solvers::LambdaSchedule::Adaptive {
                    scale: 10.0,
                    floor: 1.0,
                    outer_steps: args.outer_steps,
                },
                inner: cfg,
                outer_tol: args.outer_tol,
                accelerated: false,
            };
            (
                solvers::proximal_point_bp(problem.a(), problem.b(), problem.set(), &outer)?,
                to_json(&outer)?,
            )
        }
        SolverKind::Fbs => {
            let mut fbs = FbsConfig {
                lambda: args.lambda,
                step: args.gamma.map_or(StepSize::Auto, StepSize::Fixed),
                tol: args.tol_fp.unwrap_or(1e-12),
                max_iter: args.max_iter,
                record_history: args.history,
                ..FbsConfig::default()
            };
            fbs.spectral.seed = args.seed;
            (
                solvers::fbs_box_bpdn(problem.a(), problem.b(), problem.set(), &fbs)?,
                to_json(&fbs)?,
            )
        }
    };

    fs::create_dir_all(&args.out)
        .map_err(|e| Error::Other(format!("{}: {e}", args.out.display())))?;
    io::write(
        &args.out.join("solution.txt"),
        &io::format_vector(&result.x),
    )?;
    if let Some(rows) = &result.history {
        io::write(&args.out.join("trace.csv"), &trace_csv(rows))?;
    }
    let manifest = RunManifest::new(
        "solve",
        SolveManifest {
            matrix: &args.matrix,
            rhs: &args.rhs,
            box_path: args.box_path.as_deref(),
            u: args.u.as_deref(),
            solver: args.solver,
            tau: args.tau,
            seed: args.seed,
            resolved_step: result.step,
            spectral: result.spectral,
            config: config_json,
            iterations: result.iterations,
            outer_steps: result.outer_steps,
            termination: result.termination.to_string(),
        },
    );
    io::write(&args.out.join("manifest.json"), &manifest.to_json()?)?;
    eprintln!(
        "{} after {} iterations",
        result.termination, result.iterations
    );
    Ok(match result.termination {
        Termination::MaxIter => ExitCode::from(2),
        _ => ExitCode::SUCCESS,
    })
}

fn parse_s_range(spec: &str) -> Result<Vec<usize>, Error> {
    let bad = || Error::Other(format!("cannot parse sparsity range {spec:?}"));
    let num = |t: &str| t.trim().parse::<usize>().map_err(|_| bad());
    let values = if let Some((lo, rest)) = spec.split_once("..") {
        let (hi, step) = match rest.split_once(':') {
            Some((hi, step)) => (num(hi)?, num(step)?),
            None => (num(rest)?, 1),
        };
        let lo = num(lo)?;
        if step == 0 || lo > hi {
            return Err(bad());
        }
        (lo..=hi).step_by(step).collect()
    } else {
        spec.split(',').map(num).collect::<Result<Vec<_>, _>>()?
    };
    if values.is_empty() {
        return Err(bad());
    }
    Ok(values)
}

fn cmd_sweep(args: SweepArgs) -> Result<ExitCode, Error> {
    let mut cfg = if args.paper_scale {
        SweepConfig::paper_scale()?
    } else {
        let mut cfg = SweepConfig::new(args.m, args.n, parse_s_range(&args.s_range)?, args.trials)?;
        cfg.tau = args.tau;
        cfg.set = match &args.box_path {
            Some(p) => io::read_box(p)?,
            None => BoxSet::uniform(Interval::new(-args.box_radius, args.box_radius)?, args.n)?,
        };
        cfg
    };
    cfg.base_seed = args.seed;
    cfg.solver.tol_feas = args.tol_feas;
    cfg.solver.max_iter = args.max_iter;
    cfg.threshold = args.threshold;
    cfg.execution = if args.sequential {
        Execution::Sequential
    } else {
        Execution::Parallel
    };

    let started = Instant::now();
    let report = sweep(&cfg)?;
    log::info!("sweep finished in {:.1?}", started.elapsed());
    io::write(&args.out, &report.to_csv())?;
    let manifest_path = PathBuf::from(format!("{}.manifest.json", args.out.display()));
    io::write(&manifest_path, &RunManifest::new("sweep", &cfg).to_json()?)?;
    for r in &report.rows {
        eprintln!(
            "s={:3}  boxed {:.2}  unconstrained {:.2}",
            r.s, r.rate_proshrink, r.rate_lbreg
        );
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_check(args: CheckArgs) -> Result<ExitCode, Error> {
    let exec = if args.sequential {
        Execution::Sequential
    } else {
        Execution::Parallel
    };
    let reports = if args.mutate {
        selfcheck::run_all_with(args.seed, exec, |iv, tau, q| {
            iv.project(proshrink::operators::soft_threshold(q, tau) * 1.01)
        })
    } else {
        selfcheck::run_all(args.seed, exec)
    };
    let mut first_failure = None;
    for r in &reports {
        println!(
            "{:<44} {:>7} cases  {:>6} failures  {}",
            r.name,
            r.cases,
            r.failures,
            if r.passed() { "ok" } else { "FAILED" }
        );
        if first_failure.is_none() && !r.passed() {
            first_failure = Some(r);
        }
    }
    match first_failure {
        None => Ok(ExitCode::SUCCESS),
        Some(r) => {
            println!(
                "first counterexample in {}: {}",
                r.name,
                r.counterexample.as_deref().unwrap_or("<none>")
            );
            Ok(ExitCode::from(3))
        }
    }
}

fn cmd_generate(args: GenerateArgs) -> Result<ExitCode, Error> {
    let inst = generate_instance(&InstanceSpec::new(args.m, args.n, args.s, args.seed))?;
    fs::create_dir_all(&args.out)
        .map_err(|e| Error::Other(format!("{}: {e}", args.out.display())))?;
    io::write(&args.out.join("A.csv"), &io::format_matrix_csv(&inst.a))?;
    io::write(&args.out.join("b.txt"), &io::format_vector(&inst.b))?;
    io::write(&args.out.join("x0.txt"), &io::format_vector(&inst.x0))?;
    let set = BoxSet::symmetric(args.box_radius, args.n)?;
    io::write(&args.out.join("box.txt"), &set.to_text())?;
    Ok(ExitCode::SUCCESS)
}

#[cfg(test)]
mod tests {
    use super::parse_s_range;

    #[test]
    fn s_range_forms() {
        assert_eq!(parse_s_range("1..4").unwrap(), vec![1, 2, 3, 4]);
        assert_eq!(
            parse_s_range("5..40:5").unwrap(),
            vec![5, 10, 15, 20, 25, 30, 35, 40]
        );
        assert_eq!(parse_s_range("3,7,9").unwrap(), vec![3, 7, 9]);
        assert!(parse_s_range("4..1").is_err());
        assert!(parse_s_range("1..4:0").is_err());
        assert!(parse_s_range("a").is_err());
    }
}
