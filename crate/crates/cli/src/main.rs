use clap::{Args, Parser};
use slitsim_cli::{run_scenario, CliError, Overrides, RunConfig, Scenario};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "slitsim", version, about = "Squeezed recoiling-slit simulations, fits and tomography")]
struct Cli {
    #[arg(value_enum)]
    scenario: Scenario,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct Common {
    /// TOML run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `out` in the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Root seed; overrides `seed` in the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads. Results do not depend on this.
    #[arg(long)]
    workers: Option<usize>,
    /// Cap trajectory ensembles at 5000.
    #[arg(long)]
    fast: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let c = cli.common;
    let result = RunConfig::from_file(cli.scenario, &c.config, Overrides { seed: c.seed, out: c.out, fast: c.fast })
        .map_err(CliError::from)
        .and_then(|cfg| run_scenario(&cfg, c.workers));
    match result {
        Ok(manifest) => {
            println!("{}", serde_json::to_string_pretty(&manifest.summary).unwrap_or_default());
            ExitCode::SUCCESS
        }
        Err(e) => {
            println!("{}", e.to_json());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
