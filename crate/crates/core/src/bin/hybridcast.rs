use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use hybridcast::experiment::{cmd_decompose, cmd_report, cmd_run, cmd_synth, ExperimentConfig};

#[derive(Parser)]
#[command(name = "hybridcast", version, about = "Decomposition-augmented hourly pollutant forecasting")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment configuration (TOML). Defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Base seed; overrides the config file.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; overrides the config file.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
}

impl Common {
    fn load(&self) -> hybridcast::Result<(ExperimentConfig, PathBuf)> {
        let mut cfg = match &self.config {
            Some(p) => ExperimentConfig::load(p)?,
            None => ExperimentConfig::default(),
        };
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(o) = &self.out {
            cfg.output_dir = o.clone();
        }
        let out = cfg.output_dir.clone();
        Ok((cfg, out))
    }
}

#[derive(Subcommand)]
enum Command {
    /// Decompose the target series and write the components.
    Decompose(Common),
    /// Train and evaluate every configured model and horizon.
    Run(Common),
    /// Write a synthetic hourly data file.
    Synth {
        #[arg(long, default_value_t = 2000)]
        hours: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Output file.
        #[arg(long, default_value = "synthetic.csv")]
        out: PathBuf,
    },
    /// Rebuild the tables of a finished run and print a summary.
    Report {
        /// Run directory containing report.json.
        #[arg(long, default_value = "results")]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Decompose(c) => c.load().and_then(|(cfg, out)| {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(c.jobs.max(1)).build().expect("thread pool");
            pool.install(|| cmd_decompose(&cfg, &out)).map(|files| {
                for f in files {
                    println!("{}", f.display());
                }
                true
            })
        }),
        Command::Run(c) => c.load().and_then(|(cfg, out)| {
            cmd_run(&cfg, c.jobs, &out).map(|outcome| {
                println!("{} cells done, {} failed; outputs in {}", outcome.cells.len(), outcome.failures.len(), out.display());
                outcome.failures.is_empty()
            })
        }),
        Command::Synth { hours, seed, out } => cmd_synth(hours, seed, &out).map(|()| {
            println!("{}", out.display());
            true
        }),
        Command::Report { out } => cmd_report(&out).map(|text| {
            print!("{text}");
            true
        }),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
