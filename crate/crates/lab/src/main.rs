use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use epg_core::env::{env_spec, ENVIRONMENTS};
use epg_core::verification::{run_suite, Suite};
use epg_lab::output::{write_run, write_sweep};
use epg_lab::train::{parse_seeds, sweep};
use epg_lab::{train, LabError, RunConfig};

#[derive(Parser)]
#[command(name = "epg-lab", about = "Expected policy gradient experiments and verification")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one agent and write curve.csv and run.json.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Overrides the seed in the config.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Train one agent per seed and aggregate.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// `a..b` (inclusive) or a comma-separated list.
        #[arg(long, default_value = "0..9")]
        seeds: String,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Run the numerical verification suite.
    Verify {
        #[arg(long, default_value = "fast")]
        suite: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Directory for `verification.json`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    ListEnvs,
}

fn execute(cli: Cli) -> Result<u8, LabError> {
    match cli.command {
        Command::Run { config, out, seed } => {
            let mut cfg = RunConfig::load(&config)?;
            if let Some(seed) = seed {
                cfg.seed = seed;
            }
            let record = train(&cfg)?;
            write_run(&out, &record)?;
            if let Some(e) = &record.error {
                eprintln!("run stopped after {} steps: {e}", record.steps_completed);
                return Ok(1);
            }
            if let Some(r) = record.final_return() {
                println!("final return {r:.6} after {} steps", record.steps_completed);
            }
            Ok(0)
        }
        Command::Sweep { config, seeds, out } => {
            let cfg = RunConfig::load(&config)?;
            let records = sweep(&cfg, &parse_seeds(&seeds)?)?;
            write_sweep(&out, &records)?;
            let mut code = 0;
            for r in &records {
                match (&r.error, r.final_return()) {
                    (Some(e), _) => {
                        eprintln!("seed {}: failed: {e}", r.config.seed);
                        code = 1;
                    }
                    (None, Some(ret)) => println!("seed {}: final return {ret:.6}", r.config.seed),
                    (None, None) => {}
                }
            }
            Ok(code)
        }
        Command::Verify { suite, seed, out } => {
            let suite: Suite = suite.parse().map_err(|e: epg_core::Error| LabError::Config(e.to_string()))?;
            let reports = run_suite(suite, seed)?;
            for r in &reports {
                println!(
                    "{:<7} {:<40} error {:.3e} tol {:.3e} ({:.2}s) {}",
                    format!("{:?}", r.status).to_uppercase(),
                    r.name,
                    r.error,
                    r.tolerance,
                    r.runtime_secs,
                    r.detail
                );
            }
            if let Some(dir) = out {
                std::fs::create_dir_all(&dir).map_err(|e| LabError::io(&dir, e))?;
                let path = dir.join("verification.json");
                std::fs::write(&path, serde_json::to_string_pretty(&reports)? + "\n")
                    .map_err(|e| LabError::io(&path, e))?;
            }
            Ok(if reports.iter().any(|r| r.failed()) { 2 } else { 0 })
        }
        Command::ListEnvs => {
            for name in ENVIRONMENTS {
                let s = env_spec(name)?;
                println!(
                    "{name}: state_dim={} action_dim={} gamma={} horizon={}",
                    s.state_dim, s.action_dim, s.gamma, s.horizon
                );
            }
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
