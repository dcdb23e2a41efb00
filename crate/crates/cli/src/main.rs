use std::path::PathBuf;
use std::process::ExitCode;

use apalu::runner::{self, ExperimentConfig, RunError, Task};
use apalu::verify::{self, Suite};
use clap::{Parser, Subcommand, ValueEnum};

const EXIT_VERIFY: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_DATA: u8 = 3;
const EXIT_RUN: u8 = 4;

#[derive(Parser)]
#[command(name = "apalu-lab", about = "Train and compare networks with the APALU activation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train the configured activation once per seed.
    Train(RunArgs),
    /// Train the activation and every baseline, then tabulate mean and std.
    Compare(RunArgs),
    /// Run a verification suite.
    Verify {
        #[arg(long, default_value = "all")]
        suite: String,
    },
    /// Print the default config for a task.
    Preset {
        #[arg(value_enum)]
        task: TaskArg,
    },
    Version,
}

#[derive(clap::Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Override a config field by dotted path, e.g. `optimizer.lr=0.01`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Clone, Copy, ValueEnum)]
enum TaskArg {
    MnistMlp,
    CsvRegression,
    FunctionFit,
    TimeseriesGru,
}

impl From<TaskArg> for Task {
    fn from(t: TaskArg) -> Self {
        match t {
            TaskArg::MnistMlp => Task::MnistMlp,
            TaskArg::CsvRegression => Task::CsvRegression,
            TaskArg::FunctionFit => Task::FunctionFit,
            TaskArg::TimeseriesGru => Task::TimeseriesGru,
        }
    }
}

fn exit_code(e: &RunError) -> u8 {
    match e {
        RunError::Config(_) => EXIT_CONFIG,
        RunError::Data(_) => EXIT_DATA,
        _ => EXIT_RUN,
    }
}

fn load(args: &RunArgs) -> Result<ExperimentConfig, RunError> {
    ExperimentConfig::load(&args.config)?.with_overrides(&args.set)
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".into(), |x| format!("{x:.6}"))
}

fn train(args: &RunArgs) -> Result<(), RunError> {
    let cfg = load(args)?;
    for r in runner::run_experiment(&cfg)? {
        println!(
            "seed {} {}: train_loss {:.6} accuracy {} mse {} rmse {} gains {}",
            r.seed,
            r.activation,
            r.train_loss,
            opt(r.accuracy),
            opt(r.mse),
            opt(r.rmse),
            serde_json::to_string(&r.final_gains).expect("gains serialize"),
        );
    }
    Ok(())
}

fn compare(args: &RunArgs) -> Result<(), RunError> {
    let cfg = load(args)?;
    let cmp = runner::compare_activations(&cfg)?;
    print!("{}", cmp.to_csv());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Train(args) => train(args),
        Command::Compare(args) => compare(args),
        Command::Verify { suite } => {
            let suite: Suite = match suite.parse() {
                Ok(s) => s,
                Err(e) => {
                    eprintln!("error: {e}");
                    return ExitCode::from(EXIT_CONFIG);
                }
            };
            let report = verify::run(suite);
            println!("{report}");
            return if report.passed() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(EXIT_VERIFY)
            };
        }
        Command::Preset { task } => {
            println!("{}", ExperimentConfig::preset((*task).into()).to_json());
            Ok(())
        }
        Command::Version => {
            println!("apalu-lab {}", env!("CARGO_PKG_VERSION"));
            Ok(())
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
