//! `sparc`: command-line front end of the SPARC simulator.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use sparc_core::dictionary::{build_mub_prime, load_dictionary, partition_sections, save_dictionary, SectionPlan};
use sparc_core::harness::{
    run_bler_sweep, run_bound_curve, run_se_trace, run_theorem1_check, write_bler_csv, write_bound_csv, write_se_csv,
    write_theorem1_csv, BoundCurveConfig, SeTraceConfig, SimConfig,
};
use sparc_core::{Dictionary, Error};

const EXIT_FAILURE: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;

#[derive(Debug, Parser)]
#[command(name = "sparc", version, about = "Sparse regression codes over non-coherent SIMO fading channels")]
struct Cli {
    /// Master seed (overrides the config file's seed).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output file; standard output when omitted.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate or check dictionary files.
    #[command(subcommand)]
    Dict(DictCommand),
    /// Print the power-of-two section plan for L columns and K sections.
    Partition(PartitionArgs),
    /// Run a BLER sweep described by a TOML config file.
    Simulate(SimulateArgs),
    /// Compare the offline state evolution with empirical AMP errors.
    Se(SeArgs),
    /// Check noiseless MLMP recovery below the coherence bound.
    Theorem1(Theorem1Args),
    /// Emit the coherent sphere-packing lower bound on the BLER.
    Bound(BoundArgs),
}

#[derive(Debug, Subcommand)]
enum DictCommand {
    /// Write the prime-dimension MUB dictionary to a file.
    Gen(DictGenArgs),
    /// Load a dictionary file and report its structure.
    Check(DictCheckArgs),
}

#[derive(Debug, Args)]
struct DictGenArgs {
    /// Prime dimension N.
    #[arg(long)]
    prime: usize,
    /// Number of sections; omit to store no section plan.
    #[arg(long)]
    sections: Option<usize>,
}

#[derive(Debug, Args)]
struct DictCheckArgs {
    path: PathBuf,
}

#[derive(Debug, Args)]
struct PartitionArgs {
    /// Number of available columns.
    #[arg(long, required_unless_present = "prime", conflicts_with = "prime")]
    cols: Option<usize>,
    /// Use the p^2 columns of the prime-p MUB dictionary.
    #[arg(long)]
    prime: Option<usize>,
    #[arg(long)]
    sections: usize,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    config: PathBuf,
    /// Leave the wall_seconds column empty (reproducible output).
    #[arg(long)]
    no_timing: bool,
}

#[derive(Debug, Args)]
struct DictionaryArgs {
    /// Prime dimension of a generated MUB dictionary.
    #[arg(long, required_unless_present = "dict", conflicts_with = "dict")]
    prime: Option<usize>,
    /// Dictionary file instead of a generated one.
    #[arg(long)]
    dict: Option<PathBuf>,
    #[arg(long)]
    sections: usize,
}

impl DictionaryArgs {
    fn build(&self) -> sparc_core::Result<Dictionary> {
        let base = match (&self.prime, &self.dict) {
            (Some(p), _) => build_mub_prime(*p)?,
            (None, Some(path)) => load_dictionary(path)?,
            (None, None) => return Err(Error::Config("need --prime or --dict".into())),
        };
        base.partitioned(self.sections)
    }
}

#[derive(Debug, Args)]
struct SeArgs {
    #[command(flatten)]
    dictionary: DictionaryArgs,
    #[arg(long, default_value_t = 4)]
    antennas: usize,
    /// Fading variance (default 1/D).
    #[arg(long)]
    sigma_h_sq: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    ebn0_db: f64,
    #[arg(long, default_value_t = 500)]
    trials: u64,
    /// Monte Carlo draws for the offline state evolution.
    #[arg(long)]
    se_draws: Option<usize>,
}

#[derive(Debug, Args)]
struct Theorem1Args {
    /// Comma-separated primes.
    #[arg(long, value_delimiter = ',', required = true)]
    primes: Vec<usize>,
    /// Comma-separated section counts (default: 1 up to the bound).
    #[arg(long, value_delimiter = ',')]
    ks: Option<Vec<usize>>,
    #[arg(long, default_value_t = 1000)]
    trials: u64,
    #[arg(long, default_value_t = 4)]
    antennas: usize,
}

#[derive(Debug, Args)]
struct BoundArgs {
    /// Complex code length N.
    #[arg(long)]
    n_complex: usize,
    /// Information bits per block.
    #[arg(long)]
    bits: usize,
    #[arg(long, default_value_t = 4)]
    antennas: usize,
    /// Fading variance (default 1/D).
    #[arg(long)]
    sigma_h_sq: Option<f64>,
    /// Comma-separated Eb/N0 grid in dB.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
    ebn0_db: Vec<f64>,
    #[arg(long, default_value_t = 64)]
    quad_points: usize,
}

fn output(path: &Option<PathBuf>) -> sparc_core::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(io::stdout().lock()),
    })
}

fn run(cli: Cli) -> sparc_core::Result<u8> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Config(format!("cannot set --threads: {e}")))?;
    }
    let seed = cli.seed;
    match cli.command {
        Command::Dict(DictCommand::Gen(args)) => {
            let dict = build_mub_prime(args.prime)?;
            let dict = match args.sections {
                Some(k) => dict.partitioned(k)?,
                None => dict,
            };
            let path = cli
                .out
                .ok_or_else(|| Error::Config("dict gen needs --out".into()))?;
            save_dictionary(&dict, &path)?;
            eprintln!("wrote {} x {} dictionary to {}", dict.n_rows(), dict.n_cols(), path.display());
        }
        Command::Dict(DictCommand::Check(args)) => {
            let dict = load_dictionary(&args.path)?;
            let mut out = output(&cli.out)?;
            writeln!(out, "rows: {}", dict.n_rows())?;
            writeln!(out, "columns: {}", dict.n_cols())?;
            writeln!(out, "kind: {:?}", dict.kind())?;
            writeln!(out, "sections: {:?}", dict.section_sizes())?;
            writeln!(out, "bits: {}", dict.plan().total_bits())?;
            writeln!(out, "coherence: {:.12}", dict.coherence())?;
            writeln!(out, "coherence_bound: {:.12}", 1.0 / (dict.n_rows() as f64).sqrt())?;
        }
        Command::Partition(args) => {
            let cols = args.cols.or(args.prime.map(|p| p * p)).expect("clap enforces one");
            let plan: SectionPlan = partition_sections(cols, args.sections)?;
            let mut out = output(&cli.out)?;
            writeln!(out, "section,size,bits")?;
            for (k, (size, bits)) in plan.sizes().iter().zip(plan.bits_per_section()).enumerate() {
                writeln!(out, "{k},{size},{bits}")?;
            }
            eprintln!("{} columns used of {cols}, {} bits", plan.total_cols(), plan.total_bits());
        }
        Command::Simulate(args) => {
            let mut cfg = SimConfig::from_file(&args.config)?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            let records = run_bler_sweep(&cfg)?;
            write_bler_csv(&records, output(&cli.out)?, !args.no_timing)?;
        }
        Command::Se(args) => {
            let dict = args.dictionary.build()?;
            let mut cfg = SeTraceConfig::new(args.ebn0_db, args.antennas, args.trials, seed.unwrap_or(0));
            if let Some(s) = args.sigma_h_sq {
                cfg.sigma_h_sq = s;
            }
            if let Some(n) = args.se_draws {
                cfg.se_draws = n;
            }
            let trace = run_se_trace(&dict, &cfg)?;
            write_se_csv(&trace.rows, output(&cli.out)?)?;
            eprintln!(
                "{} AMP iterations, {}/{} block errors",
                trace.iterations, trace.block_errors, trace.trials
            );
        }
        Command::Theorem1(args) => {
            let rows = run_theorem1_check(
                &args.primes,
                args.ks.as_deref(),
                args.trials,
                args.antennas,
                seed.unwrap_or(0),
            )?;
            write_theorem1_csv(&rows, output(&cli.out)?)?;
            if rows.iter().any(|r| r.within_bound && !r.pass()) {
                eprintln!("noiseless recovery failed below the bound");
                return Ok(EXIT_FAILURE);
            }
        }
        Command::Bound(args) => {
            let cfg = BoundCurveConfig {
                n_complex: args.n_complex,
                n_bits: args.bits,
                antennas: args.antennas,
                sigma_h_sq: args.sigma_h_sq.unwrap_or(1.0 / args.antennas.max(1) as f64),
                quad_points: args.quad_points,
            };
            let curve = run_bound_curve(&cfg, &args.ebn0_db)?;
            write_bound_csv(&curve, output(&cli.out)?)?;
        }
    }
    Ok(0)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_config() {
                EXIT_CONFIG
            } else if e.is_numerical_guard() {
                EXIT_NUMERICAL
            } else {
                EXIT_FAILURE
            })
        }
    }
}
