//! Command-line front end: `gen`, `solve`, `verify` and `bench`.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::bench::{run_bench, write_csv, BenchConfig};
use crate::error::{Error, Result};
use crate::model::mtx::{read_instance, write_instance_matrix};
use crate::model::{generate_random, normalize, GeneralInstance, NormalizedInstance};
use crate::oracle::{solve_exact, OracleResult, ORACLE_MAX_DIM};
use crate::solver::{solve, OpCounters, SolverConfig, Variant};
use crate::verify::{certify_vectors, Certificate};

pub const EXIT_OK: u8 = 0;
pub const EXIT_CERTIFICATE: u8 = 1;
pub const EXIT_USAGE: u8 = 2;
pub const EXIT_ZERO_COLUMN: u8 = 3;
pub const EXIT_INTERNAL: u8 = 4;

#[derive(Debug, Parser)]
#[command(name = "packcover", version, about = "Approximate packing/covering LP solver")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a random 0/1 instance in MatrixMarket format.
    Gen(GenArgs),
    /// Solve an instance and print the solution with its certificate as JSON.
    Solve(SolveArgs),
    /// Re-certify a solution produced by `solve`.
    Verify(VerifyArgs),
    /// Time repeated runs on random instances and write CSV.
    Bench(BenchArgs),
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[arg(long)]
    pub rows: usize,
    #[arg(long)]
    pub cols: usize,
    #[arg(long)]
    pub density: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct InstanceArgs {
    /// MatrixMarket coordinate file holding `A`.
    pub input: PathBuf,
    /// Whitespace-separated capacities `b` (default all ones).
    #[arg(long)]
    pub capacities: Option<PathBuf>,
    /// Whitespace-separated objective `a` (default all ones).
    #[arg(long)]
    pub costs: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    #[command(flatten)]
    pub instance: InstanceArgs,
    #[arg(long, default_value_t = 0.1)]
    pub eps: f64,
    #[arg(long, value_enum, default_value_t = Variant::Fast)]
    pub variant: Variant,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Also compute the exact optimum (instances up to 300x300).
    #[arg(long)]
    pub oracle: bool,
    /// Write the JSON here as well as to standard output.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[command(flatten)]
    pub instance: InstanceArgs,
    /// JSON written by `solve`.
    pub solution: PathBuf,
    /// Overrides the eps recorded in the solution.
    #[arg(long)]
    pub eps: Option<f64>,
    /// Overrides the variant recorded in the solution.
    #[arg(long, value_enum)]
    pub variant: Option<Variant>,
    #[arg(long)]
    pub oracle: bool,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long)]
    pub rows: usize,
    #[arg(long)]
    pub cols: usize,
    #[arg(long)]
    pub density: f64,
    #[arg(long, default_value_t = 0.1)]
    pub eps: f64,
    #[arg(long, value_enum, default_value_t = Variant::Fast)]
    pub variant: Variant,
    /// First seed; runs use `seed, seed+1, ...`.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1)]
    pub repeats: u64,
    #[arg(long, default_value_t = 1)]
    pub threads: usize,
    /// CSV destination (default standard output).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// What `solve` prints; `verify` reads it back.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub rows: usize,
    pub cols: usize,
    pub nnz: usize,
    pub eps: f64,
    pub variant: Variant,
    pub seed: u64,
    /// Primal solution in the original variables.
    pub primal: Vec<f64>,
    /// Covering dual in the original variables.
    pub dual: Vec<f64>,
    /// `a . x`.
    pub primal_value: f64,
    /// `b . xhat`.
    pub dual_value: f64,
    pub ratio: f64,
    pub budget: u64,
    pub counters: OpCounters,
    pub oracle_value: Option<f64>,
    pub certificate: Certificate,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenReport {
    pub rows: usize,
    pub cols: usize,
    pub nnz: usize,
}

/// Maps a library error to the documented exit code.
pub fn exit_code(e: &Error) -> u8 {
    match e {
        Error::ZeroColumn(_) => EXIT_ZERO_COLUMN,
        Error::Internal(_) => EXIT_INTERNAL,
        _ => EXIT_USAGE,
    }
}

fn load(args: &InstanceArgs) -> Result<GeneralInstance> {
    read_instance(&args.input, args.capacities.as_deref(), args.costs.as_deref())
}

fn oracle_for(norm: &NormalizedInstance) -> Result<OracleResult> {
    let m = &norm.matrix;
    if m.rows() > ORACLE_MAX_DIM || m.cols() > ORACLE_MAX_DIM {
        return Err(Error::Precondition(format!(
            "--oracle supports at most {ORACLE_MAX_DIM}x{ORACLE_MAX_DIM}"
        )));
    }
    solve_exact(&m.to_dense())
}

fn write_json<T: Serialize>(out: &mut dyn Write, value: &T) -> Result<()> {
    serde_json::to_writer_pretty(&mut *out, value)?;
    writeln!(out)?;
    Ok(())
}

fn to_file<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut f = BufWriter::new(File::create(path)?);
    write_json(&mut f, value)?;
    f.flush()?;
    Ok(())
}

/// Runs a parsed command, writing its primary output to `out`, and returns
/// the process exit code.
pub fn run(cli: &Cli, out: &mut dyn Write) -> Result<u8> {
    match &cli.command {
        Command::Gen(a) => {
            let inst = generate_random(a.rows, a.cols, a.density, a.seed)?;
            write_instance_matrix(&a.out, &inst)?;
            write_json(out, &GenReport { rows: inst.rows, cols: inst.cols, nnz: inst.nnz() })?;
            Ok(EXIT_OK)
        }
        Command::Solve(a) => {
            let inst = load(&a.instance)?;
            let norm = normalize(&inst)?;
            let pair = solve(&norm.matrix, &SolverConfig::new(a.eps, a.variant, a.seed))?;
            let oracle = if a.oracle { Some(oracle_for(&norm)?) } else { None };
            let certificate =
                certify_vectors(&norm.matrix, &pair.primal, &pair.dual, a.eps, a.variant, oracle.as_ref())?;
            let (primal, dual) = norm.to_original(&pair.primal, &pair.dual)?;
            let report = SolveReport {
                rows: inst.rows,
                cols: inst.cols,
                nnz: inst.nnz(),
                eps: a.eps,
                variant: a.variant,
                seed: a.seed,
                primal,
                dual,
                primal_value: pair.primal_value,
                dual_value: pair.dual_value,
                ratio: pair.ratio,
                budget: pair.budget,
                counters: pair.counters,
                oracle_value: oracle.map(|o| o.value),
                certificate,
            };
            write_json(out, &report)?;
            if let Some(path) = &a.out {
                to_file(path, &report)?;
            }
            Ok(if report.certificate.passed() { EXIT_OK } else { EXIT_CERTIFICATE })
        }
        Command::Verify(a) => {
            let inst = load(&a.instance)?;
            let norm = normalize(&inst)?;
            let claimed: SolveReport = serde_json::from_reader(File::open(&a.solution)?)?;
            let (primal, dual) = norm.from_original(&claimed.primal, &claimed.dual)?;
            let eps = a.eps.unwrap_or(claimed.eps);
            let variant = a.variant.unwrap_or(claimed.variant);
            let oracle = if a.oracle { Some(oracle_for(&norm)?) } else { None };
            let cert = certify_vectors(&norm.matrix, &primal, &dual, eps, variant, oracle.as_ref())?;
            write_json(out, &cert)?;
            Ok(if cert.passed() { EXIT_OK } else { EXIT_CERTIFICATE })
        }
        Command::Bench(a) => {
            let cfg = BenchConfig {
                rows: a.rows,
                cols: a.cols,
                density: a.density,
                eps: a.eps,
                variant: a.variant,
                seeds: (0..a.repeats).map(|k| a.seed.wrapping_add(k)).collect(),
                threads: a.threads,
            };
            let rows = run_bench(&cfg)?;
            match &a.out {
                Some(path) => write_csv(BufWriter::new(File::create(path)?), &rows)?,
                None => write_csv(&mut *out, &rows)?,
            }
            Ok(EXIT_OK)
        }
    }
}
