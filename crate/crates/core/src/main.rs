use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use robust_duality::commands::{self, RunOptions};

#[derive(Parser)]
#[command(name = "robust-duality", version, about = "Robust utility duality on finite scenario trees")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve primal and dual problems and report the duality gap.
    Solve(Common),
    /// Buyer and seller indifference prices of a named claim.
    Price {
        #[command(flatten)]
        common: Common,
        #[arg(long, env = "ROBUST_DUALITY_CLAIM")]
        claim: String,
    },
    /// Run the invariant checks on a scenario.
    Verify(Common),
    /// Countable-space uniform integrability tables.
    Examples {
        #[arg(long, env = "ROBUST_DUALITY_N_MAX", default_value_t = 12)]
        n_max: usize,
        #[command(flatten)]
        output: Output,
    },
}

#[derive(Args)]
struct Common {
    #[arg(long, env = "ROBUST_DUALITY_SCENARIO")]
    scenario: PathBuf,
    #[arg(long, env = "ROBUST_DUALITY_TOL")]
    tol: Option<f64>,
    #[arg(long, env = "ROBUST_DUALITY_MAX_ITER")]
    max_iter: Option<usize>,
    #[arg(long, env = "ROBUST_DUALITY_SEED")]
    seed: Option<u64>,
    #[arg(long, env = "ROBUST_DUALITY_EPSILON_MIXING_LIST", value_delimiter = ',')]
    epsilon_mixing_list: Option<Vec<f64>>,
    #[command(flatten)]
    output: Output,
}

#[derive(Args)]
struct Output {
    #[arg(long, env = "ROBUST_DUALITY_FORMAT", value_enum, default_value_t = Format::Text)]
    format: Format,
    /// Also write the JSON report to this path.
    #[arg(long, env = "ROBUST_DUALITY_REPORT")]
    report: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Text,
    Json,
}

impl Common {
    fn options(&self, claim: Option<String>) -> RunOptions {
        RunOptions {
            scenario: Some(self.scenario.clone()),
            tol: self.tol,
            max_iter: self.max_iter,
            seed: self.seed,
            epsilons: self.epsilon_mixing_list.clone(),
            claim,
            n_max: None,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (result, output) = match &cli.command {
        Command::Solve(c) => (commands::cmd_solve(&c.options(None)), &c.output),
        Command::Price { common, claim } => (commands::cmd_price(&common.options(Some(claim.clone()))), &common.output),
        Command::Verify(c) => (commands::cmd_verify(&c.options(None)), &c.output),
        Command::Examples { n_max, output } => {
            let opts = RunOptions {
                n_max: Some(*n_max),
                ..RunOptions::default()
            };
            (commands::cmd_examples(&opts), output)
        }
    };
    let report = match result {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(commands::exit_code(&e) as u8);
        }
    };
    let text = match output.format {
        Format::Text => report.summary(),
        Format::Json => report.to_json() + "\n",
    };
    // a closed pipe downstream is not an error for this tool
    let _ = std::io::stdout().lock().write_all(text.as_bytes());
    if let Some(path) = &output.report {
        if let Err(e) = std::fs::write(path, report.to_json() + "\n") {
            eprintln!("error: cannot write report to {}: {e}", path.display());
            return ExitCode::from(commands::EXIT_INTERNAL as u8);
        }
    }
    ExitCode::from(commands::exit_code_for(&report) as u8)
}
