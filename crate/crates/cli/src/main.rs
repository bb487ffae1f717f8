use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use momt_cli::config::{Baseline, Config, ConfigError};
use momt_cli::output::write_outputs;
use momt_cli::run::run;
use momt_cli::scenario::build;
use momt_core::omt::oracle::{brute_force_project, MAX_TENSOR_ENTRIES};
use momt_core::omt::project_marginal;
use momt_core::partial::solve;

#[derive(Parser)]
#[command(
    name = "momt",
    version,
    about = "Multi-marginal optimal transport spectral estimation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate, solve and write results.
    Run {
        config: PathBuf,
        #[arg(long, short)]
        out: PathBuf,
        #[arg(long, value_enum)]
        baseline: Option<BaselineArg>,
        /// Interpolated spectra per interval.
        #[arg(long)]
        interp: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Check a configuration and print the problem size.
    Verify { config: PathBuf },
    /// Cross-check solver projections against the dense tensor (small problems only).
    Oracle { config: PathBuf },
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum BaselineArg {
    Mvdr,
}

const EXIT_FAILURE: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_NOT_CONVERGED: u8 = 3;

fn load(path: &Path) -> Result<Config, ExitCode> {
    Config::load(path).map_err(|e| {
        eprintln!("error: {e}");
        ExitCode::from(match e {
            ConfigError::Io(_) => EXIT_FAILURE,
            _ => EXIT_CONFIG,
        })
    })
}

fn fail(e: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(EXIT_FAILURE)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match cli.command {
        Command::Run {
            config,
            out,
            baseline,
            interp,
            seed,
        } => {
            let mut cfg = match load(&config) {
                Ok(c) => c,
                Err(code) => return code,
            };
            if let Some(BaselineArg::Mvdr) = baseline {
                cfg.output.baseline = Some(Baseline::Mvdr);
            }
            if let Some(k) = interp {
                cfg.output.interp = k;
            }
            if let Some(s) = seed {
                cfg.seed = s;
            }
            let outcome = match run(&cfg) {
                Ok(o) => o,
                Err(e) => return fail(e),
            };
            if let Err(e) = write_outputs(&outcome, &out) {
                return fail(e);
            }
            let r = outcome.report();
            println!(
                "{} after {} sweeps; results in {}",
                if r.converged {
                    "converged"
                } else {
                    "not converged"
                },
                r.iterations,
                out.display()
            );
            if r.converged {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(EXIT_NOT_CONVERGED)
            }
        }
        Command::Verify { config } => {
            let cfg = match load(&config) {
                Ok(c) => c,
                Err(code) => return code,
            };
            let sc = match build(&cfg) {
                Ok(s) => s,
                Err(e) => return fail(e),
            };
            println!(
                "ok: {:?}, {} marginals",
                cfg.kind,
                sc.graph.marginal_count()
            );
            println!(
                "  state grid {} points, spatial grid {} points",
                sc.state.len(),
                sc.spatial.len()
            );
            println!(
                "  {} constrained marginals",
                sc.constraints.iter().flatten().count()
            );
            ExitCode::SUCCESS
        }
        Command::Oracle { config } => {
            let cfg = match load(&config) {
                Ok(c) => c,
                Err(code) => return code,
            };
            let sc = match build(&cfg) {
                Ok(s) => s,
                Err(e) => return fail(e),
            };
            if sc.graph.tensor_size() > MAX_TENSOR_ENTRIES {
                return fail(format!(
                    "tensor has {:e} entries; the oracle handles at most {MAX_TENSOR_ENTRIES:e}",
                    sc.graph.tensor_size()
                ));
            }
            let sol = match solve(
                &sc.graph,
                &sc.constraints,
                cfg.epsilon,
                &momt_cli::run::solver_options(&cfg),
            ) {
                Ok(s) => s,
                Err(e) => return fail(e),
            };
            let mut worst = 0.0f64;
            for i in 0..sc.graph.marginal_count() {
                let fast = project_marginal(&sc.graph, &sol.scaling, i);
                let slow = brute_force_project(&sc.graph, &sol.scaling, i);
                match (fast, slow) {
                    (Ok(a), Ok(b)) => {
                        let rel = (&a - &b).amax() / b.amax().max(f64::MIN_POSITIVE);
                        println!("marginal {i}: relative difference {rel:.3e}");
                        worst = worst.max(rel);
                    }
                    (Err(e), _) | (_, Err(e)) => return fail(e),
                }
            }
            if worst <= 1e-10 {
                println!("oracle agrees (worst {worst:.3e})");
                ExitCode::SUCCESS
            } else {
                println!("oracle disagrees (worst {worst:.3e})");
                ExitCode::from(EXIT_FAILURE)
            }
        }
    }
}
