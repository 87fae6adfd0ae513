use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use fadegame::config::{GameVariant, RateBase};
use fadegame::experiments::{self, Outcome};
use fadegame::{load_config, ExperimentConfig, Preset};
use fadegame_core::{LogBase, Variant};

/// Power-allocation games on fading interference channels.
#[derive(Parser)]
#[command(version, about, long_about = None)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    #[command(flatten)]
    common: Common,
}

#[derive(Subcommand)]
enum Command {
    /// Nash equilibria by the two-phase VI heuristic
    SolveNe,
    /// Weighted-sum Pareto points
    Pareto,
    /// Nash bargaining, with the Pareto comparison
    Bargain,
    /// Bayesian learning in the direct-gain game
    Bayes,
    /// Residual before and after phase 1 from random starts
    Phase1Study,
    /// Equilibrium and lower-bound rates over the SNR grid
    Sweep,
    /// Print the effective config as TOML
    ShowConfig,
}

#[derive(Args)]
struct Common {
    /// Named model: example1, example2, example3 or example2-bayes
    #[arg(long, global = true)]
    preset: Option<String>,

    /// TOML experiment config; flags override its values
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Game variants (full, incident, direct)
    #[arg(long, global = true, value_delimiter = ',')]
    variant: Vec<String>,

    /// SNR grid in dB, comma separated
    #[arg(
        long,
        global = true,
        value_delimiter = ',',
        allow_negative_numbers = true
    )]
    snr: Vec<f64>,

    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads for grid points
    #[arg(long, global = true, default_value_t = 1)]
    jobs: usize,

    /// Output directory
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Rate unit: e (nats) or 2 (bits)
    #[arg(long, global = true)]
    log_base: Option<String>,

    /// Random starts (phase1-study, pareto, bargain)
    #[arg(long, global = true)]
    starts: Option<usize>,

    /// Phase-1 iterations (phase1-study)
    #[arg(long, global = true)]
    max: Option<usize>,
}

impl Common {
    fn config(&self, command: &Command) -> anyhow::Result<ExperimentConfig> {
        let mut cfg = match (&self.config, &self.preset) {
            (Some(path), _) => load_config(path)?,
            (None, Some(p)) => ExperimentConfig::for_preset(p.parse()?),
            (None, None) => bail!("give --preset or --config"),
        };
        if let (Some(_), Some(p)) = (&self.config, &self.preset) {
            cfg.model = fadegame::config::ModelSpec::preset(p.parse::<Preset>()?);
        }
        if !self.variant.is_empty() {
            cfg.variants = self
                .variant
                .iter()
                .map(|v| v.parse::<Variant>().map(GameVariant::from))
                .collect::<Result<_, _>>()?;
        }
        if !self.snr.is_empty() {
            cfg.snr_db = self.snr.clone();
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(o) = &self.out {
            cfg.out = o.clone();
        }
        if let Some(b) = &self.log_base {
            cfg.log_base = RateBase::from(b.parse::<LogBase>()?);
        }
        if let Some(n) = self.starts {
            match command {
                Command::Phase1Study => cfg.phase1.starts = n,
                _ => cfg.pareto.random_starts = n,
            }
        }
        if let Some(m) = self.max {
            cfg.phase1.max = m;
        }
        if matches!(command, Command::Bayes) {
            cfg.variants = vec![GameVariant::Direct];
        }
        cfg.validate().context("invalid configuration")?;
        Ok(cfg)
    }
}

fn run(cli: &Cli) -> anyhow::Result<Option<Outcome>> {
    if cli.common.jobs == 0 {
        bail!("--jobs must be at least 1");
    }
    let cfg = cli.common.config(&cli.command)?;
    let jobs = cli.common.jobs;
    let outcome = match cli.command {
        Command::SolveNe => experiments::solve_ne(&cfg, jobs)?,
        Command::Pareto => experiments::pareto(&cfg, jobs)?,
        Command::Bargain => experiments::bargain(&cfg, jobs)?,
        Command::Bayes => experiments::bayes(&cfg, jobs)?,
        Command::Phase1Study => experiments::phase1_study(&cfg, jobs)?,
        Command::Sweep => experiments::sweep(&cfg, jobs)?,
        Command::ShowConfig => {
            print!("{}", cfg.to_toml()?);
            return Ok(None);
        }
    };
    Ok(Some(outcome))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(None) => ExitCode::SUCCESS,
        Ok(Some(o)) => {
            print!("{}", o.summary);
            for f in &o.files {
                println!("wrote {}", f.display());
            }
            if o.converged {
                ExitCode::SUCCESS
            } else {
                eprintln!("error: at least one point did not converge; reports were still written");
                ExitCode::from(2)
            }
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
