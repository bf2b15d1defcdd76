use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use clusterherald_cli::{parse_config, run_experiment, write_tables, CliError, Experiment, ExperimentConfig};

#[derive(Debug, Parser)]
#[command(name = "clusterherald", version, about = "Heralded parity checks and cluster growth in cavity QED")]
struct Cli {
    #[arg(value_enum)]
    experiment: Experiment,
    /// TOML configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Base seed (overrides `base_seed`).
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (overrides `output_path`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (overrides `threads`).
    #[arg(long)]
    threads: Option<usize>,
}

fn load(cli: &Cli) -> Result<ExperimentConfig, CliError> {
    let mut cfg = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|source| CliError::Io { path: path.clone(), source })?;
            parse_config(&text)?
        }
        None => ExperimentConfig::default(),
    };
    if let Some(e) = cfg.experiment {
        if e != cli.experiment {
            return Err(CliError::Config {
                key: "experiment".into(),
                reason: format!("config is for `{e}` but `{}` was requested", cli.experiment),
            });
        }
    }
    cfg.experiment = Some(cli.experiment);
    if let Some(s) = cli.seed {
        cfg.base_seed = s;
    }
    if let Some(o) = &cli.out {
        cfg.output_path = o.clone();
    }
    if cli.threads.is_some() {
        cfg.threads = cli.threads;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let cfg = load(cli)?;
    if let Some(n) = cfg.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            log::warn!("could not size the thread pool: {e}");
        }
    }
    let tables = run_experiment(&cfg)?;
    for path in write_tables(&cfg.output_path, &tables)? {
        log::info!("wrote {}", path.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
