//! Command line front end: solve sparse symmetric eigenproblems from Matrix
//! Market files, verify the acceleration bounds on random instances, and
//! generate synthetic test matrices. JSON goes to stdout (or `--out`), logs
//! to stderr. Exit codes: 0 success, 2 not converged or bounds violated,
//! 1 any error.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};

use arrabit::sweeps::{self, TheorySweep};
use arrabit::{
    load_matrix_market, save_matrix_market, write_history_csv, write_matrix_market,
    ParallelOperator, RunResult, WallClockObserver,
};
use arrabit_core::analysis;
use arrabit_core::{
    solve_with_observer, FilterKind, InnerKind, NullObserver, SolveError, SolveOutput,
    SolverConfig, SparseSymMatrix, SymOperator, TargetEnd,
};

#[derive(Parser)]
#[command(
    name = "arrabit",
    version,
    about = "Block eigensolver for sparse symmetric matrices",
    long_about = "Computes extreme eigenpairs of sparse symmetric matrices with a \
                  multiplication-free block scheme: polynomial-filtered inner sweeps \
                  followed by augmented Rayleigh-Ritz projections."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve for extreme eigenpairs of a Matrix Market matrix.
    Solve(SolveArgs),
    /// Check the acceleration bounds on random instances and compare filters.
    Verify(VerifyArgs),
    /// Generate a synthetic test matrix with a known spectrum.
    Gen(GenArgs),
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum WhichArg {
    /// The largest (rightmost) eigenvalues.
    Largest,
    /// The smallest (leftmost) eigenvalues.
    Smallest,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum InnerArg {
    /// Filtered block multiplications.
    Mpm,
    /// Gauss-Newton correction steps.
    Gn,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum FilterArg {
    /// Damped interpolation filter (the default).
    Interpolant,
    /// Classic scaled-and-shifted Chebyshev filter.
    Classic,
}

#[derive(Args)]
struct SolveArgs {
    /// Matrix Market file (coordinate real, symmetric or general).
    #[arg(long)]
    matrix: PathBuf,
    /// Number of eigenpairs to compute.
    #[arg(long)]
    k: usize,
    /// Which end of the spectrum to target.
    #[arg(long, value_enum, default_value_t = WhichArg::Largest)]
    which: WhichArg,
    /// Relative residual tolerance.
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
    /// Guard vectors carried beyond k (default: k/10, rounded).
    #[arg(long)]
    q: Option<usize>,
    /// Initial augmentation depth of the projection basis.
    #[arg(long)]
    p: Option<usize>,
    /// Cap on the adaptive augmentation depth.
    #[arg(long)]
    p_max: Option<usize>,
    /// Initial polynomial filter degree.
    #[arg(long)]
    d: Option<usize>,
    /// Cap on the adaptive filter degree.
    #[arg(long)]
    d_max: Option<usize>,
    /// Outer iteration cap.
    #[arg(long)]
    maxit: Option<usize>,
    /// Conditioning probes per outer iteration.
    #[arg(long)]
    maxit1: Option<usize>,
    /// Inner sweeps per probe block.
    #[arg(long)]
    maxit2: Option<usize>,
    /// Inner solver.
    #[arg(long, value_enum, default_value_t = InnerArg::Mpm)]
    inner: InnerArg,
    /// Polynomial filter.
    #[arg(long, value_enum, default_value_t = FilterArg::Interpolant)]
    filter: FilterArg,
    /// Seed for the random starting block.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Worker threads for block multiplies; 0 runs sequentially for
    /// bit-exact output. Falls back to ARRABIT_THREADS, then 0.
    #[arg(long)]
    threads: Option<usize>,
    /// Write the JSON report to this file instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write the per-iteration history to this file as CSV.
    #[arg(long)]
    history: Option<PathBuf>,
    /// Zero all wall-clock fields so identical runs emit identical bytes.
    #[arg(long)]
    stable_output: bool,
}

#[derive(Args)]
struct VerifyArgs {
    /// Random instances per bound family.
    #[arg(long, default_value_t = 30)]
    seeds: u64,
    /// Largest instance dimension drawn for the bound sweeps.
    #[arg(long, default_value_t = 60)]
    n: usize,
    /// Seed for the filter-comparison solves.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Write the JSON report to this file instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum ProfileArg {
    /// Plain diagonal matrix diag(n, n-1, ..., 1).
    Diag,
    /// Rotated spectrum with slow decay: consecutive ratios --gap (0.99).
    Flat,
    /// Rotated spectrum with pronounced decay: ratios --gap (0.85).
    Geom,
    /// Rotated spectrum with three flat clusters at 3, 2 and 1.
    Clustered,
}

#[derive(Args)]
struct GenArgs {
    /// Spectrum shape of the generated matrix.
    #[arg(long, value_enum)]
    profile: ProfileArg,
    /// Matrix dimension.
    #[arg(long)]
    n: usize,
    /// Consecutive eigenvalue ratio for the decay profiles.
    #[arg(long)]
    gap: Option<f64>,
    /// Seed for the random orthogonal eigenbasis.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Write the Matrix Market text to this file instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let outcome = match cli.command {
        Command::Solve(args) => cmd_solve(args),
        Command::Verify(args) => cmd_verify(args),
        Command::Gen(args) => cmd_gen(args),
    };
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

/// --threads, then ARRABIT_THREADS, then sequential.
fn resolve_threads(flag: Option<usize>) -> Result<usize> {
    if let Some(n) = flag {
        return Ok(n);
    }
    match std::env::var("ARRABIT_THREADS") {
        Ok(text) => text
            .trim()
            .parse()
            .with_context(|| format!("ARRABIT_THREADS must be a thread count, found {text:?}")),
        Err(_) => Ok(0),
    }
}

fn run_solver<O: SymOperator>(
    op: &O,
    cfg: &SolverConfig,
    stable: bool,
) -> Result<SolveOutput, SolveError> {
    if stable {
        solve_with_observer(op, cfg, &mut NullObserver)
    } else {
        solve_with_observer(op, cfg, &mut WallClockObserver::new())
    }
}

fn write_text(path: Option<&PathBuf>, text: &str) -> Result<()> {
    match path {
        Some(path) => std::fs::write(path, text)
            .with_context(|| format!("cannot write {}", path.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn cmd_solve(args: SolveArgs) -> Result<u8> {
    let matrix = load_matrix_market(&args.matrix)
        .with_context(|| format!("cannot load {}", args.matrix.display()))?;
    log::info!(
        "loaded {}: n={} nnz={}",
        args.matrix.display(),
        matrix.n(),
        matrix.nnz()
    );

    let mut cfg = SolverConfig::new(args.k);
    cfg.which = match args.which {
        WhichArg::Largest => TargetEnd::Largest,
        WhichArg::Smallest => TargetEnd::Smallest,
    };
    cfg.tol = args.tol;
    cfg.inner = match args.inner {
        InnerArg::Mpm => InnerKind::Mpm,
        InnerArg::Gn => InnerKind::Gn,
    };
    cfg.filter = match args.filter {
        FilterArg::Interpolant => FilterKind::Interpolant,
        FilterArg::Classic => FilterKind::ClassicChebyshev,
    };
    cfg.seed = args.seed;
    if let Some(q) = args.q {
        cfg.q = q;
    }
    if let Some(p) = args.p {
        cfg.p = p;
        cfg.p_max = cfg.p_max.max(p);
    }
    if let Some(p_max) = args.p_max {
        cfg.p_max = p_max;
    }
    if let Some(d) = args.d {
        cfg.d = d;
        cfg.d_max = cfg.d_max.max(d);
    }
    if let Some(d_max) = args.d_max {
        cfg.d_max = d_max;
    }
    if let Some(maxit) = args.maxit {
        cfg.maxit = maxit;
    }
    if let Some(maxit1) = args.maxit1 {
        cfg.maxit1 = maxit1;
    }
    if let Some(maxit2) = args.maxit2 {
        cfg.maxit2 = maxit2;
    }

    let threads = resolve_threads(args.threads)?;
    let started = Instant::now();
    let output = if threads == 0 {
        run_solver(&matrix, &cfg, args.stable_output)
    } else {
        let op = ParallelOperator::new(&matrix, threads).context("cannot build thread pool")?;
        run_solver(&op, &cfg, args.stable_output)
    }
    .context("solve failed")?;
    let wall_seconds = started.elapsed().as_secs_f64();

    let mut report = RunResult::new(
        args.matrix.display().to_string(),
        matrix.n(),
        matrix.nnz(),
        threads,
        &cfg,
        &output,
        wall_seconds,
    );
    if args.stable_output {
        report.strip_timing();
    }

    write_text(args.out.as_ref(), &report.to_json())?;
    if let Some(path) = &args.history {
        let file =
            File::create(path).with_context(|| format!("cannot write {}", path.display()))?;
        let mut writer = BufWriter::new(file);
        write_history_csv(&mut writer, &report.history)?;
        writer.flush()?;
    }

    log::info!(
        "status={:?} maxres={:e} outer={} spmv={}",
        report.status,
        report.maxres,
        report.stats.outer_iterations,
        report.stats.total_spmv
    );
    Ok(if report.status.is_success() { 0 } else { 2 })
}

fn cmd_verify(args: VerifyArgs) -> Result<u8> {
    let sweep = TheorySweep {
        seeds: args.seeds,
        max_n: args.n,
    };
    let report = sweeps::run_verify(sweep, args.seed).context("verification failed")?;

    let mut text = serde_json::to_string_pretty(&report).context("report serialization")?;
    text.push('\n');
    write_text(args.out.as_ref(), &text)?;

    let failures = report.failures();
    log::info!(
        "projection bound: {}/{} held, {} skipped; power bounds: {}/{} held, {} skipped",
        report.bounds.projection.held,
        report.bounds.projection.instances,
        report.bounds.projection.skipped,
        report.bounds.power.held,
        report.bounds.power.instances,
        report.bounds.power.skipped
    );
    if failures > 0 {
        log::error!("{failures} bound violations");
        return Ok(2);
    }
    Ok(0)
}

fn generated_matrix(args: &GenArgs) -> Result<SparseSymMatrix> {
    use rand::SeedableRng;
    if args.n == 0 {
        bail!("--n must be at least 1");
    }
    if let Some(gap) = args.gap {
        if !(gap > 0.0 && gap < 1.0) {
            bail!("--gap must lie strictly between 0 and 1, found {gap}");
        }
        if matches!(args.profile, ProfileArg::Diag | ProfileArg::Clustered) {
            bail!("--gap only applies to the flat and geom profiles");
        }
    }
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(args.seed);
    let rotated = |values: Vec<f64>, rng: &mut rand_chacha::ChaCha8Rng| {
        analysis::rotated_from_spectrum(&values, rng)
            .map_err(|e| anyhow::anyhow!("{e} (rotated profiles are dense; use --profile diag)"))
    };
    match args.profile {
        ProfileArg::Diag => {
            let triplets: Vec<(usize, usize, f64)> =
                (0..args.n).map(|i| (i, i, (args.n - i) as f64)).collect();
            Ok(SparseSymMatrix::from_triplets(args.n, &triplets)?)
        }
        ProfileArg::Flat => rotated(
            analysis::geometric_spectrum(args.n, 1.0, args.gap.unwrap_or(0.99)),
            &mut rng,
        ),
        ProfileArg::Geom => rotated(
            analysis::geometric_spectrum(args.n, 1.0, args.gap.unwrap_or(0.85)),
            &mut rng,
        ),
        ProfileArg::Clustered => {
            let base = args.n / 3;
            let rem = args.n % 3;
            let counts = [base + usize::from(rem > 0), base + usize::from(rem > 1), base];
            let clusters: Vec<(f64, usize)> = [3.0, 2.0, 1.0]
                .into_iter()
                .zip(counts)
                .filter(|&(_, c)| c > 0)
                .collect();
            rotated(analysis::clustered_spectrum(&clusters), &mut rng)
        }
    }
}

fn cmd_gen(args: GenArgs) -> Result<u8> {
    let matrix = generated_matrix(&args)?;
    match &args.out {
        Some(path) => {
            save_matrix_market(path, &matrix)
                .with_context(|| format!("cannot write {}", path.display()))?;
            log::info!("wrote {}: n={} nnz={}", path.display(), matrix.n(), matrix.nnz());
        }
        None => {
            let stdout = std::io::stdout();
            let mut lock = BufWriter::new(stdout.lock());
            write_matrix_market(&mut lock, &matrix)?;
            lock.flush()?;
        }
    }
    Ok(0)
}
