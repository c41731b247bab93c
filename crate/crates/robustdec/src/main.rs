use clap::{Parser, Subcommand};
use robustdec::harness::{run_experiment, Scenario};
use robustdec::oracle;
use std::io::Read;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "robustdec", version, about = "Robust-model decision making simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every seed of a scenario and write CSV/JSON reports.
    Run {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seeds: Option<usize>,
        #[arg(long)]
        seed_base: Option<u64>,
    },
    /// Check a scenario file without running it.
    Validate {
        #[arg(long)]
        scenario: PathBuf,
    },
    /// Run a brute-force oracle (dec-grid, project-grid, traj-mc) on JSON input.
    Oracle {
        name: String,
        /// JSON file; stdin when omitted.
        #[arg(long)]
        input: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> robustdec::error::Result<ExitCode> {
    use robustdec::error::Error;
    match cli.command {
        Command::Run { scenario, out, seeds, seed_base } => {
            let sc = Scenario::load(&scenario)?;
            let exp = run_experiment(&sc, &out, seeds, seed_base)?;
            let a = &exp.aggregate;
            println!(
                "{}: {} seeds, mean regret {:.4}, beta violations {:.3}, alpha violations {:.3}, theorem-1 violations {:.3}",
                a.scenario,
                a.seeds.len(),
                a.mean_cum_regret,
                a.beta_violation_rate,
                a.alpha_violation_rate,
                a.theorem1_violation_rate
            );
            for e in &a.errors {
                eprintln!("run stopped early: {e}");
            }
            Ok(if a.errors.is_empty() { ExitCode::SUCCESS } else { ExitCode::FAILURE })
        }
        Command::Validate { scenario } => {
            Scenario::load(&scenario)?.validate()?;
            println!("{}: ok", scenario.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Oracle { name, input } => {
            let text = match input {
                Some(p) => std::fs::read_to_string(&p).map_err(|e| Error::Io(format!("{}: {e}", p.display())))?,
                None => {
                    let mut s = String::new();
                    std::io::stdin().read_to_string(&mut s).map_err(|e| Error::Io(e.to_string()))?;
                    s
                }
            };
            let v = oracle::run(&name, &text)?;
            println!("{}", serde_json::to_string_pretty(&v).map_err(|e| Error::Io(e.to_string()))?);
            Ok(ExitCode::SUCCESS)
        }
    }
}
