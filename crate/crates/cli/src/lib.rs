//! Command-line front end: data generation, solving, verification and export.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use autoconv::datagen::{
    illposedness_probe, make_data, make_kernel, make_target, KernelKind, KernelParams, NoiseLevels, TargetKind,
};
use autoconv::io::{
    export_reconstruction, parse_mode, read_complex_signal, read_design, read_kernel, read_real_signal,
    write_complex_signal, write_kernel, write_meta, write_real_signal, RunConfig,
};
use autoconv::verify::{check_names, run_checks, CheckOptions};
use autoconv::{combined_error, default_initial_design, tigra_solve, DataMode, DataTerm, Error, Problem};

/// Exit status for usage errors.
pub const EXIT_USAGE: i32 = 1;
/// Exit status for numerical or I/O failures.
pub const EXIT_FAILURE: i32 = 2;

#[derive(Parser, Debug)]
#[command(
    name = "autoconv",
    version,
    about = "Regularized deautoconvolution and phase retrieval with NURBS curves",
    arg_required_else_help = true
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Sample a synthetic kernel and write it as CSV matrices.
    GenKernel(GenKernelArgs),
    /// Generate a target pulse and its (noisy) data channels.
    GenData(GenDataArgs),
    /// Fit a NURBS curve to data by β-continuation.
    Solve(SolveArgs),
    /// Run the verification suite and report each property.
    Check(CheckArgs),
    /// Image change under oscillating perturbations of growing frequency.
    ProbeIllposed(ProbeArgs),
    /// Recompute d, r and e² of a saved design.
    Metrics(MetricsArgs),
}

#[derive(Args, Debug)]
struct GenKernelArgs {
    /// unit, separable or gauss-phase.
    #[arg(long, default_value = "gauss-phase")]
    kind: String,
    /// Number of X-grid nodes.
    #[arg(long = "grid", short = 'N', default_value_t = 1000)]
    grid: usize,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Gaussian-phase envelope width.
    #[arg(long)]
    sigma: Option<f64>,
    /// Gaussian-phase envelope center in s.
    #[arg(long)]
    s0: Option<f64>,
    /// Gaussian-phase envelope center in τ.
    #[arg(long)]
    tau0: Option<f64>,
    /// Linear phase coefficient in s.
    #[arg(long)]
    c1: Option<f64>,
    /// Coefficient of the τ(s − τ) phase term.
    #[arg(long)]
    c2: Option<f64>,
    /// Gaussian-phase peak modulus.
    #[arg(long)]
    amplitude: Option<f64>,
    /// Center of the separable profile.
    #[arg(long)]
    kappa_center: Option<f64>,
    /// Spread of the separable profile.
    #[arg(long)]
    kappa_spread: Option<f64>,
}

#[derive(Args, Debug)]
struct GenDataArgs {
    /// Kernel directory written by `gen-kernel`.
    #[arg(long)]
    kernel: PathBuf,
    /// gauss-chirp or polyphase.
    #[arg(long, default_value = "gauss-chirp")]
    target: String,
    /// Relative noise on the full data and on the amplitude.
    #[arg(long, default_value_t = 0.0)]
    noise: f64,
    /// Override for the full-data noise level.
    #[arg(long)]
    data_noise: Option<f64>,
    /// Override for the amplitude noise level.
    #[arg(long)]
    amp_noise: Option<f64>,
    /// Additional relative noise added to the phase data.
    #[arg(long, default_value_t = 0.0)]
    phase_noise: f64,
    /// Seed of the first noise channel; the others use seed + 1 and seed + 2.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory; also receives a `run.cfg` pointing at the files.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct SolveArgs {
    /// `key = value` run configuration.
    #[arg(long)]
    config: PathBuf,
    /// phase or full; overrides the config.
    #[arg(long)]
    mode: Option<String>,
    /// Output directory; overrides the config.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct CheckArgs {
    /// Run every check (the default when no `--only` is given).
    #[arg(long)]
    all: bool,
    /// Run only the named check; repeatable.
    #[arg(long)]
    only: Vec<String>,
    /// List the available checks and exit.
    #[arg(long)]
    list: bool,
    /// X-grid size for operator checks.
    #[arg(long, default_value_t = 200)]
    grid: usize,
    /// Random trials per check.
    #[arg(long, default_value_t = 20)]
    trials: usize,
    /// Base seed; each check derives its own.
    #[arg(long, default_value_t = 2024)]
    seed: u64,
}

#[derive(Args, Debug)]
struct ProbeArgs {
    /// Kernel kind.
    #[arg(long, default_value = "unit")]
    kind: String,
    /// Unperturbed signal.
    #[arg(long, default_value = "gauss-chirp")]
    target: String,
    /// Number of X-grid nodes; must resolve the fastest probe (N ≥ 10 n²).
    #[arg(long = "grid", short = 'N', default_value_t = 2600)]
    grid: usize,
    /// Perturbation size.
    #[arg(long, default_value_t = 0.1)]
    r: f64,
    /// Comma-separated probe indices.
    #[arg(long, value_delimiter = ',', default_value = "4,8,16")]
    ns: Vec<usize>,
    /// CSV output; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct MetricsArgs {
    /// Run configuration naming the data files.
    #[arg(long)]
    config: PathBuf,
    /// `design.csv` (with `design.meta` alongside).
    #[arg(long)]
    design: PathBuf,
    /// phase or full; overrides the config.
    #[arg(long)]
    mode: Option<String>,
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Failure(String),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Failure(e.to_string())
    }
}

type CliResult<T = ()> = std::result::Result<T, CliError>;

/// Runs the CLI on `argv` (including the program name) and returns the exit code.
pub fn run_cli<I, S>(argv: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => EXIT_USAGE,
            };
        }
    };
    configure_threads();
    let result = match cli.command {
        Command::GenKernel(a) => gen_kernel(a),
        Command::GenData(a) => gen_data(a),
        Command::Solve(a) => solve(a),
        Command::Check(a) => check(a),
        Command::ProbeIllposed(a) => probe(a),
        Command::Metrics(a) => metrics(a),
    };
    match result {
        Ok(()) => 0,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            EXIT_USAGE
        }
        Err(CliError::Failure(msg)) => {
            eprintln!("error: {msg}");
            EXIT_FAILURE
        }
    }
}

/// `AUTOCONV_THREADS` caps the worker pool; unset, empty or `0` means automatic.
fn configure_threads() {
    let Ok(raw) = std::env::var("AUTOCONV_THREADS") else {
        return;
    };
    match raw.trim().parse::<usize>() {
        Ok(0) => {}
        Ok(n) => {
            // Fails only if a pool already exists (repeated in-process calls).
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
        Err(_) if raw.trim().is_empty() => {}
        Err(_) => eprintln!("warning: ignoring AUTOCONV_THREADS={raw:?}"),
    }
}

fn parse_kind<T: std::str::FromStr<Err = Error>>(s: &str) -> CliResult<T> {
    s.parse().map_err(|e: Error| CliError::Usage(e.to_string()))
}

fn mode_override(cfg: &mut RunConfig, mode: Option<&str>) -> CliResult {
    if let Some(m) = mode {
        cfg.mode =
            parse_mode(m).ok_or_else(|| CliError::Usage(format!("--mode must be `phase` or `full`, got `{m}`")))?;
    }
    Ok(())
}

fn gen_kernel(a: GenKernelArgs) -> CliResult {
    let kind: KernelKind = parse_kind(&a.kind)?;
    let d = KernelParams::<f64>::default();
    let params = KernelParams {
        kappa_center: a.kappa_center.unwrap_or(d.kappa_center),
        kappa_spread: a.kappa_spread.unwrap_or(d.kappa_spread),
        amplitude: a.amplitude.unwrap_or(d.amplitude),
        s0: a.s0.unwrap_or(d.s0),
        tau0: a.tau0.unwrap_or(d.tau0),
        sigma: a.sigma.unwrap_or(d.sigma),
        c1: a.c1.unwrap_or(d.c1),
        c2: a.c2.unwrap_or(d.c2),
    };
    let k = make_kernel(kind, &params, a.grid)?;
    write_kernel(&a.out, &k)?;
    let p = params;
    write_meta(
        &a.out.join("provenance.meta"),
        &[
            ("command", "gen-kernel".into()),
            ("kind", kind.to_string()),
            ("N", a.grid.to_string()),
            ("kappa_center", p.kappa_center.to_string()),
            ("kappa_spread", p.kappa_spread.to_string()),
            ("amplitude", p.amplitude.to_string()),
            ("s0", p.s0.to_string()),
            ("tau0", p.tau0.to_string()),
            ("sigma", p.sigma.to_string()),
            ("c1", p.c1.to_string()),
            ("c2", p.c2.to_string()),
        ],
    )?;
    println!("wrote {kind} kernel with N = {} to {}", a.grid, a.out.display());
    Ok(())
}

fn gen_data(a: GenDataArgs) -> CliResult {
    let target_kind: TargetKind = parse_kind(&a.target)?;
    let kernel = read_kernel::<f64>(&a.kernel)?;
    let n = kernel.grid_count();
    let noise = NoiseLevels {
        data: a.data_noise.unwrap_or(a.noise),
        amp: a.amp_noise.unwrap_or(a.noise),
        phase: a.phase_noise,
    };
    let target = make_target(target_kind, n)?;
    let data = make_data(&kernel, &target, &noise, a.seed)?;
    let out = &a.out;
    write_complex_signal(&out.join("target.csv"), &data.target)?;
    write_complex_signal(&out.join("data.csv"), &data.image)?;
    write_complex_signal(&out.join("data_exact.csv"), &data.exact_image)?;
    write_real_signal(&out.join("amp.csv"), &data.amp)?;
    write_real_signal(&out.join("phase.csv"), &data.phase)?;
    write_meta(
        &out.join("provenance.meta"),
        &[
            ("command", "gen-data".into()),
            ("kernel", a.kernel.display().to_string()),
            ("target", target_kind.to_string()),
            ("N", n.to_string()),
            ("data_noise", noise.data.to_string()),
            ("amp_noise", noise.amp.to_string()),
            ("phase_noise", noise.phase.to_string()),
            ("seed", a.seed.to_string()),
            ("rng", "ChaCha8".into()),
        ],
    )?;
    let cfg = RunConfig {
        kernel: Some(a.kernel.clone()),
        amp: Some(out.join("amp.csv")),
        phase: Some(out.join("phase.csv")),
        data: Some(out.join("data.csv")),
        big_n: n,
        seed: a.seed,
        out: out.join("solution"),
        ..RunConfig::default()
    };
    std::fs::write(out.join("run.cfg"), cfg.to_text())
        .map_err(|e| Error::Io { path: out.join("run.cfg").display().to_string(), message: e.to_string() })?;
    println!("wrote {target_kind} data (N = {n}) and run.cfg to {}", out.display());
    Ok(())
}

/// Assembles the fitting problem described by a config.
fn load_problem(cfg: &RunConfig) -> CliResult<Problem> {
    cfg.check_inputs()?;
    let path = |p: &Option<PathBuf>| p.clone().expect("checked by check_inputs");
    let kernel = read_kernel::<f64>(&path(&cfg.kernel))?;
    if kernel.grid_count() != cfg.big_n {
        return Err(CliError::Failure(format!(
            "kernel has N = {} but the config says N = {}",
            kernel.grid_count(),
            cfg.big_n
        )));
    }
    let amp = read_real_signal::<f64>(&path(&cfg.amp))?;
    let data = match cfg.mode {
        DataMode::PhaseOnly => DataTerm::Phase(read_real_signal(&path(&cfg.phase))?),
        DataMode::FullData => DataTerm::Full(read_complex_signal(&path(&cfg.data))?),
    };
    Ok(Problem::new(kernel, amp, data, cfg.weights())?.with_fidelity(cfg.fidelity))
}

fn load_config(path: &Path) -> CliResult<RunConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Io { path: path.display().to_string(), message: e.to_string() })?;
    autoconv::io::parse_config(&text).map_err(|e| CliError::Failure(format!("{}: {e}", path.display())))
}

fn solve(a: SolveArgs) -> CliResult {
    let mut cfg = load_config(&a.config)?;
    mode_override(&mut cfg, a.mode.as_deref())?;
    if let Some(out) = a.out {
        cfg.out = out;
    }
    let prob = load_problem(&cfg)?;
    let x0 = default_initial_design(prob.amp(), cfg.n, cfg.p, cfg.w0)?;
    let report = tigra_solve(&prob, &cfg.schedule(), &x0)?;
    export_reconstruction(&report, &cfg.out)?;
    let echo = cfg.out.join("run.cfg");
    std::fs::write(&echo, cfg.to_text())
        .map_err(|e| Error::Io { path: echo.display().to_string(), message: e.to_string() })?;
    for s in &report.steps {
        println!(
            "beta={:.4e} iters={:>5} d={:.4e} r={:.4e} e2={:.4e}",
            s.beta, s.iterations, s.metrics.d, s.metrics.r, s.metrics.e2
        );
    }
    let best = report.best();
    println!(
        "beta*={:.4e} d={:.4e} r={:.4e} e2={:.4e} total_iters={} -> {}",
        best.beta,
        best.metrics.d,
        best.metrics.r,
        best.metrics.e2,
        report.total_iterations,
        cfg.out.display()
    );
    Ok(())
}

fn check(a: CheckArgs) -> CliResult {
    if a.list {
        for name in check_names() {
            println!("{name}");
        }
        return Ok(());
    }
    if a.all && !a.only.is_empty() {
        return Err(CliError::Usage("--all and --only are mutually exclusive".into()));
    }
    let opts = CheckOptions { seed: a.seed, grid: a.grid, trials: a.trials };
    if opts.grid < 2 || opts.trials == 0 {
        return Err(CliError::Usage("--grid must be ≥ 2 and --trials ≥ 1".into()));
    }
    let results = run_checks(&opts, &a.only).map_err(|e| CliError::Usage(e.to_string()))?;
    let mut failed = 0;
    for r in &results {
        println!("{} {}: {}", if r.passed { "PASS" } else { "FAIL" }, r.name, r.detail);
        failed += usize::from(!r.passed);
    }
    println!("{} of {} checks passed", results.len() - failed, results.len());
    if failed > 0 {
        return Err(CliError::Failure(format!("{failed} check(s) failed")));
    }
    Ok(())
}

fn probe(a: ProbeArgs) -> CliResult {
    let kind: KernelKind = parse_kind(&a.kind)?;
    let target_kind: TargetKind = parse_kind(&a.target)?;
    let kernel = make_kernel(kind, &KernelParams::default(), a.grid)?;
    let f = make_target(target_kind, a.grid)?;
    let rows = illposedness_probe(&kernel, &f, a.r, &a.ns)?;
    let mut text = String::from("n,perturbation,image_change\n");
    for r in &rows {
        let _ = writeln!(text, "{},{:.16e},{:.16e}", r.n, r.perturbation, r.image_change);
    }
    match &a.out {
        Some(path) => {
            std::fs::write(path, &text)
                .map_err(|e| Error::Io { path: path.display().to_string(), message: e.to_string() })?;
            println!("wrote {} rows to {}", rows.len(), path.display());
        }
        None => print!("{text}"),
    }
    Ok(())
}

fn metrics(a: MetricsArgs) -> CliResult {
    let mut cfg = load_config(&a.config)?;
    mode_override(&mut cfg, a.mode.as_deref())?;
    let prob = load_problem(&cfg)?;
    let design = read_design::<f64>(&a.design)?;
    let m = combined_error(&design, &prob)?;
    println!("d={:.16e}\nr={:.16e}\ne2={:.16e}", m.d, m.r, m.e2);
    Ok(())
}
