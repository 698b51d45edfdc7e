//! `sabasis`: build, verify and inspect bases of self-adjoint unitaries.
//!
//! Exit codes: 0 pass, 1 verification failure, 2 domain error or cell
//! ceiling, 3 I/O, 4 parse.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use sabasis_core::bundle::Tolerances;
use sabasis_core::pursuit::DEFAULT_CELL_CEILING;
use sabasis_core::{PursuitOptions, SplitRule, StageOptions};

mod commands;
mod fail;
mod input;

#[derive(Parser)]
#[command(
    name = "sabasis",
    version,
    about = "Orthonormal bases of self-adjoint unitaries"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Model {
    Abelian,
    Matrix,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Rule {
    /// Reduce to a basic solution before splitting (default).
    Basic,
    /// Split every fractional cell.
    Cellwise,
}

#[derive(Args, Clone, Debug)]
pub struct RunArgs {
    /// Abort once any residual or unitary has more cells than this
    /// (0 disables the ceiling).
    #[arg(long, default_value_t = DEFAULT_CELL_CEILING)]
    pub cell_ceiling: usize,
    #[arg(long, value_enum, default_value_t = Rule::Basic)]
    pub rule: Rule,
}

impl RunArgs {
    pub fn pursuit(&self) -> PursuitOptions {
        PursuitOptions {
            rule: match self.rule {
                Rule::Basic => SplitRule::Basic,
                Rule::Cellwise => SplitRule::Cellwise,
            },
            cell_ceiling: (self.cell_ceiling > 0).then_some(self.cell_ceiling),
        }
    }
}

/// Matrix-model tolerances.
#[derive(Args, Clone, Debug)]
pub struct TolArgs {
    #[arg(long, default_value_t = Tolerances::default().herm)]
    pub tol_herm: f64,
    #[arg(long, default_value_t = Tolerances::default().eig)]
    pub tol_eig: f64,
    #[arg(long, default_value_t = Tolerances::default().alg)]
    pub tol_alg: f64,
    #[arg(long, default_value_t = Tolerances::default().matching)]
    pub tol_match: f64,
    #[arg(long, default_value_t = Tolerances::default().energy)]
    pub tol_energy: f64,
    #[arg(long, default_value_t = Tolerances::default().orth)]
    pub tol_orth: f64,
}

impl TolArgs {
    pub fn tolerances(&self) -> Result<Tolerances, fail::CliError> {
        let t = Tolerances {
            herm: self.tol_herm,
            eig: self.tol_eig,
            alg: self.tol_alg,
            matching: self.tol_match,
            energy: self.tol_energy,
            orth: self.tol_orth,
        };
        let all = [t.herm, t.eig, t.alg, t.matching, t.energy, t.orth];
        if all.iter().all(|x| x.is_finite() && *x > 0.0) {
            Ok(t)
        } else {
            Err(fail::CliError::Parse("tolerances must be positive".into()))
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run stages 1..=S of the basis driver and write the basis file.
    Build {
        #[arg(long, value_enum, default_value_t = Model::Abelian)]
        model: Model,
        /// Matrix size for the matrix model (1..=8).
        #[arg(long, default_value_t = 2)]
        n: usize,
        #[arg(long)]
        stages: u64,
        /// Skip stages whose precision exponent k exceeds this.
        #[arg(long)]
        max_k: Option<u64>,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        run: RunArgs,
        #[command(flatten)]
        tols: TolArgs,
    },
    /// Check a basis file and print a JSON report.
    Verify {
        path: PathBuf,
        /// Largest dense index to certify (default: largest processed j).
        #[arg(long)]
        j_max: Option<u64>,
        /// Largest precision exponent to certify (default: largest processed k).
        #[arg(long)]
        k_max: Option<u64>,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        #[command(flatten)]
        tols: TolArgs,
    },
    /// Pursue a target against a family and write the trace.
    Pursue {
        /// dense:J | rademacher:N | step:BPS:VALS | random (matrix) | FILE
        target: String,
        /// JSON list of members or a basis file (default: the unit family).
        #[arg(long)]
        family: Option<PathBuf>,
        #[arg(long)]
        epsilon: String,
        #[arg(long, value_enum, default_value_t = Model::Abelian)]
        model: Model,
        #[arg(long, default_value_t = 2)]
        n: usize,
        /// Seed for `random` matrix targets.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Trace JSON destination (default: standard output).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Residual decay table as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
        #[command(flatten)]
        run: RunArgs,
        #[command(flatten)]
        tols: TolArgs,
    },
    /// A-priori iteration bound for the pursuit loop.
    Bound {
        norm2_sq: String,
        norm_inf: String,
        epsilon: String,
    },
    /// Summarize a basis file or pretty-print one member.
    Show {
        path: PathBuf,
        #[arg(long)]
        member: Option<usize>,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() {
                fail::code::PARSE
            } else {
                fail::code::PASS
            });
        }
    };
    let result = match cli.command {
        Command::Build {
            model,
            n,
            stages,
            max_k,
            out,
            run,
            tols,
        } => {
            let opts = StageOptions {
                pursuit: run.pursuit(),
                max_k,
            };
            commands::build(model, n, stages, &opts, &tols, &out)
        }
        Command::Verify {
            path,
            j_max,
            k_max,
            jobs,
            tols,
        } => return ExitCode::from(commands::verify(&path, j_max, k_max, jobs, &tols)),
        Command::Pursue {
            target,
            family,
            epsilon,
            model,
            n,
            seed,
            out,
            csv,
            run,
            tols,
        } => commands::pursue(commands::PursueArgs {
            target: &target,
            family: family.as_deref(),
            epsilon: &epsilon,
            model,
            n,
            seed,
            out: out.as_deref(),
            csv: csv.as_deref(),
            opts: run.pursuit(),
            tols: &tols,
        }),
        Command::Bound {
            norm2_sq,
            norm_inf,
            epsilon,
        } => commands::bound(&norm2_sq, &norm_inf, &epsilon),
        Command::Show { path, member } => commands::show(&path, member),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("sabasis: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
