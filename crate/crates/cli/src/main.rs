//! Operator-facing command surface tying the laboratory together into
//! reproducible experiments.
//!
//! Exit codes: 0 success, 2 validation, 3 numeric, 4 acceptance/verification
//! failure.

mod cmds;
mod config;
mod out;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use hht_rmt::Error;

#[derive(Parser)]
#[command(name = "hht-rmt", version, about = "Spectral-fluctuation laboratory for half-heavy-tailed sample covariance matrices")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct Common {
    /// run-config JSON; built-in defaults when omitted
    #[arg(long)]
    config: Option<PathBuf>,
    /// output directory for CSV/JSON artifacts
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// worker threads (fallback: env HHT_RMT_THREADS, then all cores)
    #[arg(long)]
    threads: Option<usize>,
    /// overrides the config seed
    #[arg(long)]
    seed: Option<u64>,
    /// gate the exit code on the acceptance bands
    #[arg(long, default_value_t = false)]
    assert: bool,
}

#[derive(Subcommand)]
enum Cmd {
    /// Deterministic identity suite: quadrature, MP law, integral lemmas,
    /// Frullani sub-identity, kernel routes, finite-N resolvent identities
    Verify {
        /// run a single family (quadrature, mplaw, lemmas, frullani, routes,
        /// ward, diagbound, sign, rank, diagid)
        #[arg(long)]
        only: Option<String>,
        #[command(flatten)]
        common: Common,
    },
    /// Evaluate the covariance kernel on a (z,w) grid by the selected routes
    Kernel {
        #[command(flatten)]
        common: Common,
    },
    /// Monte Carlo replica runs: empirical covariance vs analytic kernel
    Mc {
        /// overlap preset instead of explicit index sets (full, half, disjoint)
        #[arg(long)]
        overlap: Option<String>,
        #[command(flatten)]
        common: Common,
    },
    /// Empirical spectral distribution vs the Marchenko–Pastur law
    Esd {
        #[command(flatten)]
        common: Common,
    },
    /// Truncated characteristic-function expansion study
    Phi {
        #[command(flatten)]
        common: Common,
    },
}

fn init_threads(requested: Option<usize>) {
    let n = requested.or_else(|| {
        std::env::var("HHT_RMT_THREADS")
            .ok()
            .and_then(|v| v.parse().ok())
    });
    if let Some(n) = n {
        if n > 0 {
            // ignore the error if a global pool already exists
            let _ = hht_rmt::montecarlo::build_thread_pool(n);
        }
    }
}

fn run(cli: Cli) -> hht_rmt::Result<()> {
    match cli.cmd {
        Cmd::Verify { only, common } => {
            init_threads(common.threads);
            cmds::cmd_verify(
                common.config.as_deref(),
                only.as_deref(),
                &common.out,
                common.seed,
            )
        }
        Cmd::Kernel { common } => {
            init_threads(common.threads);
            cmds::cmd_kernel(common.config.as_deref(), &common.out, common.seed)
        }
        Cmd::Mc { overlap, common } => {
            init_threads(common.threads);
            cmds::cmd_mc(
                common.config.as_deref(),
                overlap.as_deref(),
                &common.out,
                common.seed,
                common.assert,
            )
        }
        Cmd::Esd { common } => {
            init_threads(common.threads);
            cmds::cmd_esd(common.config.as_deref(), &common.out, common.seed, common.assert)
        }
        Cmd::Phi { common } => {
            init_threads(common.threads);
            cmds::cmd_phi(common.config.as_deref(), &common.out, common.seed, common.assert)
        }
    }
}

fn main() {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => {}
        Err(e) => {
            eprintln!("error: {e}");
            let code = match e {
                Error::Validation(_) | Error::EmptyRequest(_) | Error::Domain(_) | Error::Resource(_) => 2,
                Error::Numeric(_) | Error::QuadratureNoConvergence { .. } => 3,
                Error::Verification(_) => 4,
            };
            std::process::exit(code);
        }
    }
}
