use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rqc_peps::circuit::SequenceKind;
use rqc_peps_cli::experiment::generate_instances;
use rqc_peps_cli::report::{write_analysis, write_plot_data};
use rqc_peps_cli::{run_experiment, CliError, PlotKind, RunConfig};

#[derive(Parser)]
#[command(name = "rqc-peps", version, about = "PEPS simulation of random quantum circuits")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write circuit instance files.
    Generate(ConfigArgs),
    /// Run PEPS jobs (and the exact oracle when enabled).
    Run(ConfigArgs),
    /// Fit the reports of a finished run.
    Analyze {
        #[arg(long)]
        output_dir: Option<PathBuf>,
    },
    /// Write plot tables for a finished run.
    Emit {
        #[arg(long)]
        output_dir: Option<PathBuf>,
        /// fidelity_vs_depth, epsilon_vs_chi, spectra, entropy, nxeb_scatter or all
        #[arg(long, default_value = "all")]
        kind: String,
    },
}

#[derive(Args)]
struct ConfigArgs {
    /// TOML run configuration; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    rows: Option<usize>,
    #[arg(long)]
    cols: Option<usize>,
    #[arg(long)]
    depth: Option<usize>,
    /// cz, fsim or 2hr
    #[arg(long)]
    sequence: Option<String>,
    #[arg(long, default_value_t = std::f64::consts::FRAC_PI_2)]
    theta: f64,
    #[arg(long, default_value_t = std::f64::consts::FRAC_PI_6)]
    phi: f64,
    #[arg(long, value_delimiter = ',')]
    chi: Option<Vec<usize>>,
    #[arg(long)]
    instances: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    gauge_sweeps: Option<usize>,
    #[arg(long)]
    no_residual: bool,
    #[arg(long)]
    no_oracle: bool,
    #[arg(long, value_delimiter = ',')]
    oracle_depths: Option<Vec<usize>>,
    #[arg(long)]
    memory_cap: Option<u64>,
    #[arg(long)]
    qubit_cap: Option<usize>,
    #[arg(long)]
    output_dir: Option<PathBuf>,
    #[arg(long)]
    threads: Option<usize>,
}

impl ConfigArgs {
    fn resolve(self) -> Result<RunConfig, CliError> {
        let mut cfg = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
                RunConfig::from_toml(&text)?
            }
            None => RunConfig::default(),
        };
        cfg.apply_env()?;
        if let Some(v) = self.rows {
            cfg.rows = v;
        }
        if let Some(v) = self.cols {
            cfg.cols = v;
        }
        if let Some(v) = self.depth {
            cfg.depth = v;
        }
        if let Some(s) = self.sequence.as_deref() {
            cfg.sequence = match s {
                "cz" => SequenceKind::Cz,
                "fsim" => SequenceKind::FSim { theta: self.theta, phi: self.phi },
                "2hr" => SequenceKind::TwoQubitHaar,
                other => return Err(CliError::Config(format!("unknown sequence {other:?}"))),
            };
        }
        if let Some(v) = self.chi {
            cfg.chi = v;
        }
        if let Some(v) = self.instances {
            cfg.instances = v;
        }
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = self.gauge_sweeps {
            cfg.gauge_sweeps = v;
        }
        if self.no_residual {
            cfg.track_residual = false;
        }
        if self.no_oracle {
            cfg.oracle = false;
        }
        if let Some(v) = self.oracle_depths {
            cfg.oracle_depths = Some(v);
        }
        if let Some(v) = self.memory_cap {
            cfg.memory_cap = v;
        }
        if let Some(v) = self.qubit_cap {
            cfg.qubit_cap = v;
        }
        if let Some(v) = self.output_dir {
            cfg.output_dir = v;
        }
        if let Some(v) = self.threads {
            cfg.threads = v;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn output_dir(flag: Option<PathBuf>) -> Result<PathBuf, CliError> {
    let mut cfg = RunConfig::default();
    cfg.apply_env()?;
    Ok(flag.unwrap_or(cfg.output_dir))
}

fn execute(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Generate(args) => {
            let cfg = args.resolve()?;
            for (_, path) in generate_instances(&cfg)? {
                println!("{}", path.display());
            }
        }
        Command::Run(args) => {
            let cfg = args.resolve()?;
            let manifest = run_experiment(&cfg)?;
            println!(
                "{} jobs written to {} (config {})",
                manifest.jobs.len(),
                cfg.output_dir.display(),
                manifest.config_hash
            );
        }
        Command::Analyze { output_dir: dir } => {
            let (_, path) = write_analysis(&output_dir(dir)?)?;
            println!("{}", path.display());
        }
        Command::Emit { output_dir: dir, kind } => {
            let dir = output_dir(dir)?;
            let kinds = if kind == "all" { PlotKind::ALL.to_vec() } else { vec![kind.parse()?] };
            for k in kinds {
                match write_plot_data(&dir, k) {
                    Ok(path) => println!("{}", path.display()),
                    Err(CliError::EmptyOutput(_)) if kind == "all" => {}
                    Err(e) => return Err(e),
                }
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.to_record());
            ExitCode::FAILURE
        }
    }
}
