use std::io::Write;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use fpv_cli::commands::{self, ExampleArgs, Format};
use fpv_cli::{exit, CliError, Output};

/// First passage analysis of absorbing Markov chains
#[derive(Parser)]
#[command(name = "fpv", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Json,
    Text,
}

#[derive(Subcommand)]
enum Command {
    /// Spectral summary, MFPT/MFPV and confidence bounds of a model file
    Analyze {
        model: String,
        /// Confidence level for FPT/FPV bounds (repeatable)
        #[arg(long = "confidence", value_name = "PR")]
        confidence: Vec<f64>,
        /// Value matrix to report (its `metadata.value_name`), or `steps`
        #[arg(long, value_name = "NAME", default_value = commands::STEPS)]
        value: String,
        #[arg(long, value_enum, default_value = "json")]
        format: FormatArg,
    },
    /// Write a built-in model (coin, epidemics, europe, europe-mod, mdp-fig5)
    Example {
        name: String,
        #[arg(long)]
        p_heads: Option<f64>,
        #[arg(long)]
        delta: Option<f64>,
        #[arg(long)]
        beta: Option<f64>,
        #[arg(long)]
        paris_population: Option<f64>,
        /// Population override, CITY=N (repeatable)
        #[arg(long, value_name = "CITY=N")]
        population: Vec<String>,
        /// Europe value matrix: distance, time or none
        #[arg(long)]
        value: Option<String>,
        /// Travel-time value of staying a day in a city
        #[arg(long)]
        stay_value: Option<f64>,
        #[arg(long)]
        p_gamma2: Option<f64>,
        /// Write the MDP to this file instead of standard output
        #[arg(long, requires = "policy_out")]
        mdp_out: Option<String>,
        /// Write the policy to this file instead of standard output
        #[arg(long, requires = "mdp_out")]
        policy_out: Option<String>,
    },
    /// Reduce an MDP and policy to a model file
    Reduce {
        mdp: String,
        /// Policy file; omit when MDP is a bundle with both
        policy: Option<String>,
    },
    /// Monte Carlo first passage times
    Simulate {
        model: String,
        #[arg(long, default_value_t = 100_000)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// phi, uniform, or `state NAME`
        #[arg(long, num_args = 1..=2, value_names = ["MODE", "NAME"], default_values_t = ["phi".to_string()])]
        start: Vec<String>,
        /// Step cap per trajectory (default 1000 M)
        #[arg(long)]
        max_steps: Option<u64>,
    },
}

fn run(cli: Cli) -> Result<Output, CliError> {
    match cli.command {
        Command::Analyze {
            model,
            confidence,
            value,
            format,
        } => {
            let format = match format {
                FormatArg::Json => Format::Json,
                FormatArg::Text => Format::Text,
            };
            commands::analyze(&model, &confidence, Some(&value), format)
        }
        Command::Example {
            name,
            p_heads,
            delta,
            beta,
            paris_population,
            population,
            value,
            stay_value,
            p_gamma2,
            mdp_out,
            policy_out,
        } => commands::example(
            &name,
            &ExampleArgs {
                p_heads,
                delta,
                beta,
                paris_population,
                population,
                value,
                stay_value,
                p_gamma2,
                mdp_out,
                policy_out,
            },
        ),
        Command::Reduce { mdp, policy } => commands::reduce(&mdp, policy.as_deref()),
        Command::Simulate {
            model,
            trials,
            seed,
            start,
            max_steps,
        } => commands::simulate(&model, trials, seed, &start, max_steps),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // clap exits with 2 on usage errors; 2 is reserved for lambda2 = 1
            let code = if e.use_stderr() { exit::INVALID } else { exit::OK };
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    match run(cli) {
        Ok(out) => {
            let mut stdout = std::io::stdout().lock();
            let _ = stdout.write_all(out.stdout.as_bytes());
            let _ = stdout.flush();
            if out.code == exit::TRAPPED {
                eprintln!("fpv: lambda2 = 1, the halt state is not reached from phi; M is infinite");
            }
            ExitCode::from(out.code as u8)
        }
        Err(e) => {
            eprintln!("fpv: {e}");
            ExitCode::from(e.code as u8)
        }
    }
}
