//! `hslg`: command-line driver for the polymer, soft-walk, V-function,
//! limit-chain, and Gibbs-sampler experiments.
//!
//! Every subcommand writes one self-contained run directory: the fully
//! materialized `config.json` (re-running it reproduces all statistics byte
//! for byte), CSV tables, two-column `.dat` series indexed by `plots.json`,
//! the deterministic `summary.json`, wall-clock-only `run-meta.json`, and a
//! crash-safe `manifest.json` that flips from `running` to `complete`.
//!
//! Exit codes: 0 success, 1 runtime failure (and `verify-all` with failing
//! criteria), 2 usage error, 3 unreadable config, 4 missing V-table
//! dependency.

mod commands;

use clap::{Parser, Subcommand, ValueEnum};
use commands::RunOpts;
use hslg_core::HarnessError;
use std::path::PathBuf;
use std::process;

#[derive(Parser)]
#[command(name = "hslg", version, about = "Half-space log-gamma polymer laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum SamplerArg {
    /// Exact slot-by-slot draws from the transition densities
    Sequential,
    /// Weighted free-walk proposals (prefix weight × V at the final gap)
    Lg,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ProfileArg {
    /// Reduced replica counts; same distance thresholds
    Quick,
    /// The release-gate numbers
    Full,
}

#[derive(Subcommand)]
enum Command {
    /// Sample free-energy increments of the half-space polymer across disorder
    #[command(allow_negative_numbers = true)]
    PolymerIncrements {
        #[command(flatten)]
        run: RunOpts,
        /// Lattice size N (increments are taken along its anti-diagonal)
        #[arg(long)]
        big_n: Option<usize>,
        /// Number of increments per realization
        #[arg(long)]
        r: Option<usize>,
        #[arg(long)]
        theta: Option<f64>,
        #[arg(long)]
        alpha: Option<f64>,
        /// Disorder realizations
        #[arg(long)]
        reps: Option<u64>,
    },
    /// Evolve limit-chain initial data and test increment stationarity
    #[command(allow_negative_numbers = true)]
    EvolveStationary {
        #[command(flatten)]
        run: RunOpts,
        /// Reference V table (build one with `hslg build-vtable`)
        #[arg(long)]
        vtable: Option<PathBuf>,
        /// Evolution steps N
        #[arg(long)]
        steps: Option<usize>,
        /// Increments compared after the evolution
        #[arg(long)]
        r: Option<usize>,
        #[arg(long)]
        theta: Option<f64>,
        #[arg(long)]
        alpha: Option<f64>,
        /// Independent chains evolved
        #[arg(long)]
        reps: Option<u64>,
    },
    /// Estimate the boundary correction V(z) at one point
    #[command(allow_negative_numbers = true)]
    EstimateV {
        #[command(flatten)]
        run: RunOpts,
        /// Gap argument z = S₂(r) − S₁(r)
        #[arg(long)]
        z: Option<f64>,
        /// Soft-walk length the ratio is evaluated at
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        theta: Option<f64>,
        #[arg(long)]
        alpha: Option<f64>,
        /// Common-random-number replicas
        #[arg(long)]
        reps: Option<u64>,
    },
    /// Tabulate V on a grid with a convergence schedule and save the table
    #[command(allow_negative_numbers = true)]
    BuildVtable {
        #[command(flatten)]
        run: RunOpts,
        #[arg(long)]
        grid_min: Option<f64>,
        #[arg(long)]
        grid_max: Option<f64>,
        #[arg(long)]
        grid_step: Option<f64>,
        /// Comma-separated nondecreasing walk lengths, e.g. 64,128,256,512
        #[arg(long)]
        schedule: Option<String>,
        #[arg(long)]
        theta: Option<f64>,
        #[arg(long)]
        alpha: Option<f64>,
        /// Common-random-number replicas per grid point
        #[arg(long)]
        reps: Option<u64>,
    },
    /// Sample prefixes of the limiting two-layer chain
    #[command(allow_negative_numbers = true)]
    LimitChain {
        #[command(flatten)]
        run: RunOpts,
        /// Reference V table (build one with `hslg build-vtable`)
        #[arg(long)]
        vtable: Option<PathBuf>,
        /// Prefix length in slots
        #[arg(long)]
        r: Option<usize>,
        #[arg(long)]
        sampler: Option<SamplerArg>,
        #[arg(long)]
        theta: Option<f64>,
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long)]
        reps: Option<u64>,
    },
    /// Heat-bath sample the interacting-random-walk Gibbs measure
    #[command(allow_negative_numbers = true)]
    GibbsSample {
        #[command(flatten)]
        run: RunOpts,
        /// Window width in slots
        #[arg(long)]
        t: Option<usize>,
        /// Top-layer pin value at the last slot
        #[arg(long)]
        a: Option<f64>,
        /// Bottom-layer pin value at the last slot
        #[arg(long)]
        b: Option<f64>,
        #[arg(long)]
        theta: Option<f64>,
        #[arg(long)]
        alpha: Option<f64>,
        /// Sweeps discarded per chain before recording
        #[arg(long)]
        burn_in: Option<u64>,
        /// Sweeps between recorded samples
        #[arg(long)]
        thin: Option<u64>,
        /// Recorded samples (split across chains)
        #[arg(long)]
        reps: Option<u64>,
        #[arg(long)]
        chains: Option<usize>,
    },
    /// Compare the Gibbs sampler against weighted free-walk importance sampling
    #[command(allow_negative_numbers = true)]
    IrwVsWprw {
        #[command(flatten)]
        run: RunOpts,
        #[arg(long)]
        t: Option<usize>,
        #[arg(long)]
        a: Option<f64>,
        #[arg(long)]
        b: Option<f64>,
        #[arg(long)]
        theta: Option<f64>,
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long)]
        mcmc_reps: Option<u64>,
        #[arg(long)]
        chains: Option<usize>,
        #[arg(long)]
        burn_in: Option<u64>,
        #[arg(long)]
        thin: Option<u64>,
        /// Importance-sampling proposals
        #[arg(long)]
        is_reps: Option<u64>,
        /// Significance level for the per-coordinate KS tests
        #[arg(long)]
        level: Option<f64>,
    },
    /// Test the scaled meander endpoint against the Rayleigh law
    #[command(allow_negative_numbers = true)]
    MeanderCheck {
        #[command(flatten)]
        run: RunOpts,
        /// Walk length
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        theta: Option<f64>,
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long)]
        reps: Option<u64>,
    },
    /// Measure √n · P(non-intersection) across walk lengths
    #[command(allow_negative_numbers = true)]
    NiScaling {
        #[command(flatten)]
        run: RunOpts,
        /// Comma-separated walk lengths, e.g. 100,400,1600
        #[arg(long)]
        sizes: Option<String>,
        /// Starting point of the upper walk
        #[arg(long)]
        a1: Option<f64>,
        /// Starting point of the lower walk
        #[arg(long)]
        a2: Option<f64>,
        #[arg(long)]
        theta: Option<f64>,
        #[arg(long)]
        reps: Option<u64>,
    },
    /// Two-sample KS test between value columns of two CSV files
    #[command(allow_negative_numbers = true)]
    KsCompare {
        #[command(flatten)]
        run: RunOpts,
        file_a: Option<PathBuf>,
        file_b: Option<PathBuf>,
        /// Name of the value column in both files
        #[arg(long)]
        column: Option<String>,
        /// Optional column of log-weights attached to the values
        #[arg(long)]
        weight_column: Option<String>,
        #[arg(long)]
        level: Option<f64>,
    },
    /// Run the acceptance criteria A1–A10 and print a verdict table
    #[command(allow_negative_numbers = true)]
    VerifyAll {
        #[command(flatten)]
        run: RunOpts,
        /// Criteria use pinned seeds; --seed is recorded but has no effect here
        #[arg(long)]
        profile: Option<ProfileArg>,
    },
}

fn dispatch(cli: Cli) -> anyhow::Result<i32> {
    match cli.command {
        Command::PolymerIncrements { run, big_n, r, theta, alpha, reps } => {
            commands::polymer_increments(&run, big_n, r, theta, alpha, reps)
        }
        Command::EvolveStationary { run, vtable, steps, r, theta, alpha, reps } => {
            commands::evolve_stationary(&run, vtable, steps, r, theta, alpha, reps)
        }
        Command::EstimateV { run, z, n, theta, alpha, reps } => {
            commands::estimate_v(&run, z, n, theta, alpha, reps)
        }
        Command::BuildVtable { run, grid_min, grid_max, grid_step, schedule, theta, alpha, reps } => {
            commands::build_vtable(&run, grid_min, grid_max, grid_step, schedule, theta, alpha, reps)
        }
        Command::LimitChain { run, vtable, r, sampler, theta, alpha, reps } => {
            let sampler = sampler.map(|s| match s {
                SamplerArg::Sequential => "sequential".to_string(),
                SamplerArg::Lg => "lg".to_string(),
            });
            commands::limit_chain(&run, vtable, r, sampler, theta, alpha, reps)
        }
        Command::GibbsSample { run, t, a, b, theta, alpha, burn_in, thin, reps, chains } => {
            commands::gibbs_sample(&run, t, a, b, theta, alpha, burn_in, thin, reps, chains)
        }
        Command::IrwVsWprw {
            run,
            t,
            a,
            b,
            theta,
            alpha,
            mcmc_reps,
            chains,
            burn_in,
            thin,
            is_reps,
            level,
        } => commands::irw_vs_wprw(
            &run, t, a, b, theta, alpha, mcmc_reps, chains, burn_in, thin, is_reps, level,
        ),
        Command::MeanderCheck { run, n, theta, alpha, reps } => {
            commands::meander_check(&run, n, theta, alpha, reps)
        }
        Command::NiScaling { run, sizes, a1, a2, theta, reps } => {
            commands::ni_scaling(&run, sizes, a1, a2, theta, reps)
        }
        Command::KsCompare { run, file_a, file_b, column, weight_column, level } => {
            commands::ks_compare(&run, file_a, file_b, column, weight_column, level)
        }
        Command::VerifyAll { run, profile } => {
            let profile = profile.map(|p| match p {
                ProfileArg::Quick => "quick".to_string(),
                ProfileArg::Full => "full".to_string(),
            });
            commands::verify_all(&run, profile)
        }
    }
}

fn main() {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(code) => process::exit(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            let code = match e.downcast_ref::<HarnessError>() {
                Some(HarnessError::Config { .. }) => 3,
                Some(HarnessError::MissingTable { .. }) => 4,
                _ => 1,
            };
            process::exit(code);
        }
    }
}
