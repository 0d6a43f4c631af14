use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use skewfit::bench::{self, ExperimentConfig, ReportFormat};
use skewfit::data::{generate_synthetic, SyntheticSetting};

#[derive(Parser)]
#[command(name = "skewfit", version, about = "Imbalanced-data logistic regression benchmark")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment described by a JSON config file.
    Run {
        /// Path to the experiment config (JSON).
        #[arg(long)]
        config: PathBuf,
        /// Where to write per-trial results as JSON lines.
        #[arg(long, default_value = "results.jsonl")]
        out: PathBuf,
        /// Optional markdown report path.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Generate a synthetic dataset CSV (label column "label", positives "1").
    Synth {
        /// Built-in setting id (1-6).
        #[arg(long)]
        setting: u8,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Render result tables from a JSONL results file.
    Report {
        /// Results file written by `skewfit run`.
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Md)]
        format: Format,
        /// Output path; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Md,
    Csv,
}

const EXIT_CONFIG: u8 = 1;
const EXIT_EXPERIMENT: u8 = 2;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Config(msg)) => {
            eprintln!("config error: {msg}");
            ExitCode::from(EXIT_CONFIG)
        }
        Err(CliError::Experiment(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_EXPERIMENT)
        }
    }
}

enum CliError {
    Config(String),
    Experiment(String),
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Run {
            config,
            out,
            report,
        } => {
            let text = std::fs::read_to_string(&config)
                .map_err(|e| CliError::Config(format!("{}: {e}", config.display())))?;
            let config: ExperimentConfig =
                serde_json::from_str(&text).map_err(|e| CliError::Config(e.to_string()))?;
            config
                .validate()
                .map_err(|e| CliError::Config(e.to_string()))?;
            let outcome =
                bench::run_experiment(&config).map_err(|e| CliError::Experiment(e.to_string()))?;
            let file = std::fs::File::create(&out)
                .map_err(|e| CliError::Experiment(format!("{}: {e}", out.display())))?;
            bench::write_results_jsonl(file, &outcome.results)
                .map_err(|e| CliError::Experiment(e.to_string()))?;
            print!("{}", bench::format_summaries(&outcome));
            println!("results: {}", out.display());
            if let Some(path) = report {
                let table = bench::emit_report(&outcome.results, ReportFormat::Markdown)
                    .map_err(|e| CliError::Experiment(e.to_string()))?;
                std::fs::write(&path, table)
                    .map_err(|e| CliError::Experiment(format!("{}: {e}", path.display())))?;
                println!("report: {}", path.display());
            }
            Ok(())
        }
        Command::Synth {
            setting,
            n,
            seed,
            out,
        } => {
            let setting =
                SyntheticSetting::by_id(setting).map_err(|e| CliError::Config(e.to_string()))?;
            let data = generate_synthetic(&setting, n, seed)
                .map_err(|e| CliError::Experiment(e.to_string()))?;
            let mut writer = csv::Writer::from_path(&out)
                .map_err(|e| CliError::Experiment(format!("{}: {e}", out.display())))?;
            let mut header: Vec<String> = data.feature_names().to_vec();
            header.push("label".into());
            writer
                .write_record(&header)
                .map_err(|e| CliError::Experiment(e.to_string()))?;
            for r in 0..data.n() {
                let mut row: Vec<String> =
                    data.features().row(r).iter().map(|v| v.to_string()).collect();
                row.push(data.labels()[r].to_string());
                writer
                    .write_record(&row)
                    .map_err(|e| CliError::Experiment(e.to_string()))?;
            }
            writer.flush().map_err(|e| CliError::Experiment(e.to_string()))?;
            println!("wrote {} rows to {}", data.n(), out.display());
            Ok(())
        }
        Command::Report { input, format, out } => {
            let results =
                bench::read_results_jsonl(&input).map_err(|e| CliError::Experiment(e.to_string()))?;
            let format = match format {
                Format::Md => ReportFormat::Markdown,
                Format::Csv => ReportFormat::Csv,
            };
            let table =
                bench::emit_report(&results, format).map_err(|e| CliError::Experiment(e.to_string()))?;
            match out {
                Some(path) => std::fs::write(&path, table)
                    .map_err(|e| CliError::Experiment(format!("{}: {e}", path.display())))?,
                None => print!("{table}"),
            }
            Ok(())
        }
    }
}
