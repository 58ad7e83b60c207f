use std::ops::RangeInclusive;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};

use dgdual::functionals::{JumpVariant, ProblemKind};
use dgdual::harness::{self, RunConfig};

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Command {
    Poisson,
    Tv,
    Obstacle,
    Selftest,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Jump {
    Mean,
    Full,
}

/// Convergence studies and duality-gap certificates for discontinuous
/// Galerkin discretizations of convex minimization problems.
#[derive(Debug, Parser)]
#[command(name = "dgdual", version)]
struct Cli {
    command: Command,
    /// Refinement levels, e.g. `2..6`.
    #[arg(long, value_parser = parse_levels)]
    levels: Option<RangeInclusive<u32>>,
    /// Penalty exponents gamma (comma separated).
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    gamma: Option<Vec<f64>>,
    /// Penalty factors c_alpha (comma separated).
    #[arg(long = "c-alpha", value_delimiter = ',')]
    c_alpha: Option<Vec<f64>>,
    /// Side exponents r (comma separated).
    #[arg(long, value_delimiter = ',')]
    r: Option<Vec<f64>>,
    /// Jump quantity in the primal side penalty.
    #[arg(long, value_enum)]
    jump: Option<Jump>,
    /// Average penalty factor c_beta.
    #[arg(long = "c-beta", default_value_t = 0.0)]
    c_beta: f64,
    /// Average penalty exponent sigma.
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    sigma: f64,
    /// TV regularization as a multiple of h.
    #[arg(long = "eps-factor", default_value_t = 1.0)]
    eps_factor: f64,
    /// Gradient flow step size.
    #[arg(long, default_value_t = 1.0)]
    tau: f64,
    /// Stopping tolerance as a multiple of h.
    #[arg(long = "stop-factor")]
    stop_factor: Option<f64>,
    /// Iteration cap of the TV and obstacle solvers.
    #[arg(long = "max-iters")]
    max_iters: Option<usize>,
    /// Output file (standard output if absent).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write zero instead of wall-clock times.
    #[arg(long = "no-timing")]
    no_timing: bool,
    /// Append a column with failure reasons.
    #[arg(long)]
    verbose: bool,
    /// Seed of the randomized self-tests.
    #[arg(long, default_value_t = harness::DEFAULT_SEED, value_parser = parse_seed)]
    seed: u64,
}

fn parse_levels(s: &str) -> Result<RangeInclusive<u32>, String> {
    let (a, b) = match s.split_once("..") {
        Some((a, b)) => (a, b.trim_start_matches('=')),
        None => (s, s),
    };
    let a: u32 = a.trim().parse().map_err(|_| format!("bad level '{a}'"))?;
    let b: u32 = b.trim().parse().map_err(|_| format!("bad level '{b}'"))?;
    if a > b {
        return Err(format!("empty level range {a}..{b}"));
    }
    Ok(a..=b)
}

fn parse_seed(s: &str) -> Result<u64, String> {
    match s.strip_prefix("0x").or_else(|| s.strip_prefix("0X")) {
        Some(hex) => u64::from_str_radix(hex, 16),
        None => s.parse(),
    }
    .map_err(|e| format!("bad seed '{s}': {e}"))
}

fn selftest(seed: u64) -> ExitCode {
    match harness::selftest(seed) {
        Ok(reports) => {
            let mut ok = true;
            for r in &reports {
                let status = if r.passed() { "PASS" } else { "FAIL" };
                println!(
                    "{status} {:<28} trials={:<5} failures={:<4} worst={:.3e}",
                    r.name, r.trials, r.failures, r.worst
                );
                ok &= r.passed();
            }
            if ok {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(2)
            }
        }
        Err(e) => {
            eprintln!("dgdual: {e}");
            ExitCode::from(1)
        }
    }
}

fn main() -> ExitCode {
    // exit code 2 is reserved for failed cells
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let kind = match cli.command {
        Command::Selftest => return selftest(cli.seed),
        Command::Poisson => ProblemKind::Poisson,
        Command::Tv => ProblemKind::Tv,
        Command::Obstacle => ProblemKind::Obstacle,
    };
    let mut config = RunConfig::new(kind);
    config.levels = cli.levels;
    config.gammas = cli.gamma;
    config.c_alphas = cli.c_alpha;
    config.rs = cli.r;
    config.jump = cli.jump.map(|j| match j {
        Jump::Mean => JumpVariant::Mean,
        Jump::Full => JumpVariant::Full,
    });
    config.c_beta = cli.c_beta;
    config.sigma = cli.sigma;
    config.epsilon_factor = cli.eps_factor;
    config.tau = cli.tau;
    config.stop_factor = cli.stop_factor;
    config.max_iters = cli.max_iters;
    config.out = cli.out;
    config.timing = !cli.no_timing;
    config.verbose = cli.verbose;
    config.seed = cli.seed;

    let rows = match harness::run_convergence(&config) {
        Ok(rows) => rows,
        Err(e) => {
            eprintln!("dgdual: {e}");
            return ExitCode::from(1);
        }
    };
    if let Err(e) = harness::emit_csv(&rows, config.out.as_deref(), config.verbose) {
        eprintln!("dgdual: {e}");
        return ExitCode::from(1);
    }
    if rows.iter().any(|r| r.failed()) {
        ExitCode::from(2)
    } else {
        ExitCode::SUCCESS
    }
}
