//! `qrefsim` command-line runner.
//!
//! Exit codes: 0 success, 1 numeric or domain error, 2 usage error.

mod report;

use std::fs::File;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_complex::Complex64;
use qrefsim::dynamics::Direction;
use qrefsim::lhv::{chsh_scan, lhv_sweep};
use qrefsim::scenarios::{
    build_epr_state, run_bell_triple, run_epr, singlet_coefficients, EprConfig,
};
use qrefsim::QrefError;

use report::{BellReport, ChshReport, EprJson, LhvReport, Report};

#[derive(Parser, Debug)]
#[command(
    name = "qrefsim",
    version,
    about = "Reference-system quantum simulations and Bell tests"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Two-particle spin correlation experiment
    Epr(EprArgs),
    /// Bell's inequality for three coplanar directions on the singlet
    Bell(BellArgs),
    /// Maximize |S| over a coplanar grid of CHSH settings
    ChshScan(ChshArgs),
    /// Test random local hidden-variable models against Bell and CHSH
    LhvCheck(LhvArgs),
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Args, Debug)]
struct Output {
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
    /// Write the report here instead of stdout
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct EprArgs {
    /// Angle between the two device directions in the x–z plane (degrees)
    #[arg(long, allow_negative_numbers = true, conflicts_with = "dir_b")]
    theta_ab: Option<f64>,
    /// Polar angle of device 1 in the x–z plane (degrees)
    #[arg(
        long,
        default_value_t = 0.0,
        allow_negative_numbers = true,
        conflicts_with = "dir_a"
    )]
    theta_a: f64,
    /// Device 1 direction as x,y,z (normalized on input)
    #[arg(long, value_parser = parse_vec3, allow_hyphen_values = true)]
    dir_a: Option<[f64; 3]>,
    /// Device 2 direction as x,y,z (normalized on input)
    #[arg(long, value_parser = parse_vec3, allow_hyphen_values = true)]
    dir_b: Option<[f64; 3]>,
    /// Use the singlet coefficients (default when --c1/--c2 are absent)
    #[arg(long, conflicts_with_all = ["c1", "c2"])]
    singlet: bool,
    /// Coefficient of |↑⟩|↓⟩ as re,im
    #[arg(long, value_parser = parse_complex, allow_hyphen_values = true, requires = "c2")]
    c1: Option<Complex64>,
    /// Coefficient of |↓⟩|↑⟩ as re,im
    #[arg(long, value_parser = parse_complex, allow_hyphen_values = true, requires = "c1")]
    c2: Option<Complex64>,
    /// Record the branch of particle 1 with an extra nondisturbing device first
    #[arg(long)]
    with_m3: bool,
    #[arg(long, default_value_t = 100_000)]
    shots: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Include the ordering-dependent pseudo-probabilities (JSON only)
    #[arg(long)]
    pseudo: bool,
    #[command(flatten)]
    output: Output,
}

#[derive(Args, Debug)]
struct BellArgs {
    /// Pairwise angles θ_ab,θ_bc,θ_ac in degrees
    #[arg(long, value_parser = parse_vec3, allow_hyphen_values = true)]
    angles: [f64; 3],
    #[arg(long)]
    with_m3: bool,
    #[command(flatten)]
    output: Output,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum ScanState {
    Singlet,
    Product,
}

#[derive(Args, Debug)]
struct ChshArgs {
    /// Grid step in degrees
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    resolution: f64,
    #[arg(long, value_enum, default_value_t = ScanState::Singlet)]
    state: ScanState,
    #[command(flatten)]
    output: Output,
}

#[derive(Args, Debug)]
struct LhvArgs {
    /// Number of random models
    #[arg(long, default_value_t = 1000)]
    trials: usize,
    /// Direction triples per model
    #[arg(long, default_value_t = 100)]
    triples: usize,
    /// Upper bound on hidden states per model
    #[arg(long, default_value_t = 16)]
    max_lambdas: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    output: Output,
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Numeric(QrefError),
    Io(io::Error),
    /// The report was written but flags a failed check.
    Check(String),
}

impl From<QrefError> for CliError {
    fn from(e: QrefError) -> Self {
        CliError::Numeric(e)
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::Io(e)
    }
}

fn split_floats(s: &str, n: usize) -> Result<Vec<f64>, String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    if parts.len() != n {
        return Err(format!("expected {n} comma-separated numbers, got `{s}`"));
    }
    parts
        .iter()
        .map(|p| {
            let v: f64 = p.parse().map_err(|_| format!("`{p}` is not a number"))?;
            if v.is_finite() {
                Ok(v)
            } else {
                Err(format!("`{p}` is not finite"))
            }
        })
        .collect()
}

fn parse_vec3(s: &str) -> Result<[f64; 3], String> {
    let v = split_floats(s, 3)?;
    Ok([v[0], v[1], v[2]])
}

fn parse_complex(s: &str) -> Result<Complex64, String> {
    let v = split_floats(s, 2)?;
    Ok(Complex64::new(v[0], v[1]))
}

fn finite(name: &str, v: f64) -> Result<f64, CliError> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(CliError::Usage(format!("--{name} must be finite")))
    }
}

fn direction(name: &str, v: [f64; 3]) -> Result<Direction, CliError> {
    Direction::normalized(v[0], v[1], v[2]).map_err(|e| CliError::Usage(format!("--{name}: {e}")))
}

fn emit<R: Report>(output: &Output, report: &R) -> Result<(), CliError> {
    let text = match output.format {
        Format::Csv => report.csv(),
        Format::Json => {
            let mut s = report
                .json()
                .map_err(|e| CliError::Io(io::Error::other(e)))?;
            s.push('\n');
            s
        }
    };
    match &output.out {
        Some(path) => File::create(path)?.write_all(text.as_bytes())?,
        None => io::stdout().lock().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn cmd_epr(args: &EprArgs) -> Result<(), CliError> {
    if args.pseudo && args.output.format != Format::Json {
        return Err(CliError::Usage("--pseudo requires --format json".into()));
    }
    let theta_a = finite("theta-a", args.theta_a)?.to_radians();
    let direction_a = match args.dir_a {
        Some(v) => direction("dir-a", v)?,
        None => Direction::in_xz_plane(theta_a),
    };
    let direction_b = match (args.dir_b, args.theta_ab) {
        (Some(v), _) => direction("dir-b", v)?,
        (None, Some(t)) => Direction::in_xz_plane(theta_a + finite("theta-ab", t)?.to_radians()),
        (None, None) => {
            return Err(CliError::Usage(
                "one of --theta-ab or --dir-b is required".into(),
            ))
        }
    };
    let (c1, c2) = match (args.c1, args.c2) {
        (Some(c1), Some(c2)) => (c1, c2),
        _ => singlet_coefficients(),
    };
    // reject unnormalized coefficients before any work
    build_epr_state(c1, c2)?;
    let config = EprConfig {
        c1,
        c2,
        direction_a,
        direction_b,
        with_m3: args.with_m3,
        shots: args.shots,
        seed: args.seed,
        include_pseudo: args.pseudo,
    };
    let report = run_epr(&config)?;
    emit(&args.output, &EprJson::from_report(&report))
}

fn cmd_bell(args: &BellArgs) -> Result<(), CliError> {
    let [ab, bc, ac] = args.angles;
    let r = run_bell_triple(
        ab.to_radians(),
        bc.to_radians(),
        ac.to_radians(),
        args.with_m3,
    )?;
    emit(&args.output, &BellReport::new(args.angles, &r))
}

fn cmd_chsh(args: &ChshArgs) -> Result<(), CliError> {
    let res = args.resolution;
    if !res.is_finite() || res <= 0.0 || res > 360.0 {
        return Err(CliError::Usage(format!(
            "--resolution must be in (0, 360] degrees, got {res}"
        )));
    }
    let (c1, c2) = match args.state {
        ScanState::Singlet => singlet_coefficients(),
        ScanState::Product => (Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)),
    };
    let scan = chsh_scan(&build_epr_state(c1, c2)?, res.to_radians())?;
    let name = match args.state {
        ScanState::Singlet => "singlet",
        ScanState::Product => "product",
    };
    emit(&args.output, &ChshReport::new(name, res, &scan))
}

fn cmd_lhv(args: &LhvArgs) -> Result<(), CliError> {
    for (flag, v) in [
        ("trials", args.trials),
        ("triples", args.triples),
        ("max-lambdas", args.max_lambdas),
    ] {
        if v == 0 {
            return Err(CliError::Usage(format!("--{flag} must be at least 1")));
        }
    }
    let sweep = lhv_sweep(args.trials, args.triples, args.max_lambdas, args.seed)?;
    let report = LhvReport::new(&sweep);
    emit(&args.output, &report)?;
    if sweep.bell_violations + sweep.chsh_violations > 0 {
        return Err(CliError::Check(report.summary));
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => e.exit(),
    };
    let result = match &cli.command {
        Command::Epr(a) => cmd_epr(a),
        Command::Bell(a) => cmd_bell(a),
        Command::ChshScan(a) => cmd_chsh(a),
        Command::LhvCheck(a) => cmd_lhv(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            eprintln!("Run `qrefsim --help` for usage.");
            ExitCode::from(2)
        }
        Err(CliError::Numeric(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
        Err(CliError::Io(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
        Err(CliError::Check(msg)) => {
            eprintln!("check failed: {msg}");
            ExitCode::from(1)
        }
    }
}
