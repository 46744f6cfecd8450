use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use mw1::spectra::{reproduce_table, sample_spectrum, SpectrumId, Variant, DEFAULT_BETAS};
use mw1::{assemble, solve, Boundary, Certificate, Error, Grid1D, Marginals, Params, ProblemKind, SolverConfig};

use mw1_cli::check::{self, CheckOptions};
use mw1_cli::problem::{parse_problem, GridOverrides, Marginal, Problem};
use mw1_cli::report::{certificate_json, fields_csv, load_certificate, table_csv};

const EXIT_INPUT: u8 = 1;
const EXIT_NOT_CONVERGED: u8 = 2;
const EXIT_CHECK_FAILED: u8 = 3;

#[derive(Parser)]
#[command(name = "mw1", version, about = "Matricial Wasserstein-1 distances with duality-gap certificates")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Balanced distance between two density matrices.
    W1(SolveArgs),
    /// Unbalanced distance between two PSD matrices.
    V1 {
        #[command(flatten)]
        common: SolveArgs,
        #[arg(long)]
        alpha: Option<f64>,
    },
    /// Distance between matrix-valued densities on a grid.
    Field(FieldArgs),
    /// Distances between the three AR power spectra for the standard β pairs.
    Table1 {
        #[arg(long, default_value_t = 512)]
        grid_size: usize,
        #[arg(long, value_enum, default_value_t = VariantArg::AsPrinted)]
        variant: VariantArg,
        /// CSV destination; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        solver: SolverArgs,
    },
    /// Samples the three AR power spectra as CSV.
    Spectra {
        #[arg(long, default_value_t = 512)]
        grid_size: usize,
        #[arg(long, value_enum, default_value_t = VariantArg::AsPrinted)]
        variant: VariantArg,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Re-checks a certificate file against its problem.
    Verify {
        problem: PathBuf,
        certificate: PathBuf,
    },
    /// Runs the self-check suites.
    Check {
        #[arg(long, default_value_t = 10)]
        count: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Matrix sizes, comma separated.
        #[arg(long, value_delimiter = ',', default_value = "2,3")]
        dims: Vec<usize>,
    },
}

#[derive(Args)]
struct SolveArgs {
    problem: PathBuf,
    /// Writes the full certificate as JSON.
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    solver: SolverArgs,
}

#[derive(Args)]
struct SolverArgs {
    #[arg(long)]
    max_iter: Option<usize>,
    #[arg(long)]
    tol_gap: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
}

impl SolverArgs {
    fn apply(&self, mut cfg: SolverConfig) -> SolverConfig {
        if let Some(v) = self.max_iter {
            cfg.max_iter = v;
        }
        if let Some(v) = self.tol_gap {
            cfg.tol_gap = v;
        }
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        cfg
    }
}

#[derive(Args)]
struct FieldArgs {
    #[command(flatten)]
    common: SolveArgs,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    beta1: Option<f64>,
    #[arg(long)]
    beta2: Option<f64>,
    #[arg(long)]
    grid_size: Option<usize>,
    #[arg(long, value_enum)]
    boundary: Option<BoundaryArg>,
    #[arg(long, value_enum)]
    variant: Option<VariantArg>,
    /// Writes the sampled marginals as CSV.
    #[arg(long)]
    spectra_csv: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum VariantArg {
    AsPrinted,
    Canonical,
}

impl From<VariantArg> for Variant {
    fn from(v: VariantArg) -> Self {
        match v {
            VariantArg::AsPrinted => Variant::AsPrinted,
            VariantArg::Canonical => Variant::Canonical,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum BoundaryArg {
    Periodic,
    ZeroFlux,
}

/// A failure mapped to an exit code.
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn input(message: impl Into<String>) -> Self {
        Self { code: EXIT_INPUT, message: message.into() }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::NotConverged { .. } => EXIT_NOT_CONVERGED,
            Error::SingularConstraint(_) => EXIT_CHECK_FAILED,
            _ => EXIT_INPUT,
        };
        Self { code, message: e.to_string() }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| Failure::input(format!("{}: {e}", path.display())))
}

fn write(path: &Path, text: &str) -> Result<(), Failure> {
    std::fs::write(path, text).map_err(|e| Failure { code: EXIT_INPUT, message: format!("{}: {e}", path.display()) })
}

fn load(path: &Path, overrides: GridOverrides) -> Result<Problem, Failure> {
    parse_problem(&read(path)?, overrides).map_err(|e| Failure::input(format!("{}: {e}", path.display())))
}

fn run(command: Command) -> Result<u8, Failure> {
    match command {
        Command::W1(args) => {
            let p = load(&args.problem, GridOverrides::default())?;
            expect_matrix(&p)?;
            solve_and_report(&p, ProblemKind::BalancedMatrix, p.params, &args)
        }
        Command::V1 { common, alpha } => {
            let p = load(&common.problem, GridOverrides::default())?;
            expect_matrix(&p)?;
            let params = Params { alpha: alpha.unwrap_or(p.params.alpha), ..p.params };
            solve_and_report(&p, ProblemKind::UnbalancedMatrix, params, &common)
        }
        Command::Field(args) => {
            let overrides = GridOverrides {
                points: args.grid_size,
                boundary: args.boundary.map(|b| match b {
                    BoundaryArg::Periodic => Boundary::Periodic,
                    BoundaryArg::ZeroFlux => Boundary::ZeroFlux,
                }),
                variant: args.variant.map(Into::into),
            };
            let p = load(&args.common.problem, overrides)?;
            if !p.kind.is_field() {
                return Err(Failure::input("the field command needs a balanced_field or unbalanced_field problem"));
            }
            if let (Some(path), Marginal::Field(a), Marginal::Field(b)) = (&args.spectra_csv, &p.rho0, &p.rho1) {
                write(path, &fields_csv(&[("rho0", a), ("rho1", b)]))?;
            }
            let params = Params {
                alpha: args.alpha.unwrap_or(p.params.alpha),
                beta1: args.beta1.unwrap_or(p.params.beta1),
                beta2: args.beta2.unwrap_or(p.params.beta2),
            };
            solve_and_report(&p, p.kind, params, &args.common)
        }
        Command::Table1 { grid_size, variant, out, solver } => {
            let grid = Grid1D::circle(grid_size)?;
            let cfg = solver.apply(SolverConfig::default());
            let table = reproduce_table(&grid, 1.0, &DEFAULT_BETAS, variant.into(), &cfg)?;
            let csv = table_csv(&table);
            let to_stdout = out.is_none();
            match &out {
                Some(path) => write(path, &csv)?,
                None => print!("{csv}"),
            }
            let mut all = true;
            for o in &table.orderings {
                let others: Vec<String> = mw1::spectra::PAIRS
                    .iter()
                    .filter(|p| **p != o.larger)
                    .map(|p| format!("({},{})", p.0.name(), p.1.name()))
                    .collect();
                let line = format!(
                    "{} ordering at beta=({},{}): V1({},{}) exceeds {} [values: {}, certified intervals: {}]",
                    if o.certified { "PASS" } else { "FAIL" },
                    o.beta.0,
                    o.beta.1,
                    o.larger.0.name(),
                    o.larger.1.name(),
                    others.join(" and "),
                    o.holds,
                    o.certified
                );
                if to_stdout {
                    eprintln!("{line}");
                } else {
                    println!("{line}");
                }
                all &= o.certified;
            }
            Ok(if all { 0 } else { EXIT_CHECK_FAILED })
        }
        Command::Spectra { grid_size, variant, out } => {
            let grid = Grid1D::circle(grid_size)?;
            let fields = SpectrumId::ALL
                .iter()
                .map(|&id| sample_spectrum(id, &grid, variant.into()))
                .collect::<mw1::Result<Vec<_>>>()?;
            let named: Vec<(&str, &mw1::MatrixField)> =
                SpectrumId::ALL.iter().map(|id| id.name()).zip(fields.iter()).collect();
            let csv = fields_csv(&named);
            match out {
                Some(path) => write(&path, &csv)?,
                None => print!("{csv}"),
            }
            Ok(0)
        }
        Command::Verify { problem, certificate } => {
            let p = load(&problem, GridOverrides::default())?;
            let spec = assemble(p.kind, &marginals(&p), &p.l, p.params, &p.solver)?;
            let (flux, potential) = load_certificate(&read(&certificate)?)
                .map_err(|e| Failure::input(format!("{}: {e}", certificate.display())))?;
            let residual = spec.residual(&flux)?;
            let primal = spec.objective(&flux)?;
            let dual = mw1::solver::dual_bound(&spec, &potential)?;
            println!("residual: {residual:.3e}");
            println!("primal: {primal:.9}");
            println!("dual: {dual:.9}");
            Ok(0)
        }
        Command::Check { count, seed, dims } => {
            if dims.iter().any(|&n| n < 2) {
                return Err(Failure::input("--dims entries must be at least 2"));
            }
            let outcomes = check::run(&CheckOptions { count, seed, dims });
            let mut all = true;
            for o in &outcomes {
                println!("{} {}: {}", if o.passed { "PASS" } else { "FAIL" }, o.name, o.detail);
                all &= o.passed;
            }
            Ok(if all { 0 } else { EXIT_CHECK_FAILED })
        }
    }
}

fn expect_matrix(p: &Problem) -> Result<(), Failure> {
    if p.kind.is_field() {
        return Err(Failure::input("this command takes a matrix problem; use `field` for grids"));
    }
    Ok(())
}

fn marginals(p: &Problem) -> Marginals {
    match (&p.rho0, &p.rho1) {
        (Marginal::Matrix(a), Marginal::Matrix(b)) => {
            Marginals::Matrix { rho0: a.hermitian().clone(), rho1: b.hermitian().clone() }
        }
        (Marginal::Field(a), Marginal::Field(b)) => Marginals::Field { rho0: a.clone(), rho1: b.clone() },
        _ => unreachable!("parse_problem keeps both marginals of one type"),
    }
}

fn solve_and_report(p: &Problem, kind: ProblemKind, params: Params, args: &SolveArgs) -> Result<u8, Failure> {
    let cfg = args.solver.apply(p.solver.clone());
    let spec = assemble(kind, &marginals(p), &p.l, params, &cfg)?;
    let cert = solve(&spec, &cfg)?;
    print_summary(&cert);
    if let Some(path) = &args.out {
        let text = serde_json::to_string_pretty(&certificate_json(&cert)).expect("certificate serializes");
        write(path, &(text + "\n"))?;
    }
    Ok(if cert.converged { 0 } else { EXIT_NOT_CONVERGED })
}

fn print_summary(cert: &Certificate) {
    println!("value: {:.6}", cert.primal_value);
    println!("dual_value: {:.6}", cert.dual_value);
    println!("gap: {:.3e}", cert.gap);
    println!("relative_gap: {:.3e}", cert.relative_gap());
    println!("residual: {:.3e}", cert.residual);
    println!("iterations: {}", cert.iterations);
    println!("converged: {}", cert.converged);
}
