use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use hawkes_scaling_cli::config::{validate_config, ExperimentConfig, Kind};
use hawkes_scaling_cli::runner::run_experiment;

#[derive(Parser)]
#[command(name = "hscale", version, about = "Simulate and check nearly unstable Hawkes processes and their scaling limits")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a Hawkes process ensemble (config kind "hawkes")
    Simulate(RunArgs),
    /// Solve the resolvent equation on a grid (config kind "resolvent")
    Resolvent(RunArgs),
    /// Simulate a mean-field particle system (config kind "meanfield")
    Meanfield(RunArgs),
    /// Solve a limiting Volterra equation (config kind "limit")
    Limit(RunArgs),
    /// Compare regime limits with particle systems (config kind "regime-compare")
    Compare(RunArgs),
    /// Run the acceptance suite (config kind "acceptance-suite"; config optional)
    Accept(AcceptArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Experiment configuration (JSON)
    #[arg(long)]
    config: PathBuf,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Args)]
struct AcceptArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Run only these criteria (repeatable)
    #[arg(long = "criterion", value_parser = clap::value_parser!(u8).range(1..=14))]
    criteria: Vec<u8>,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Args)]
struct CommonArgs {
    /// Root seed; overrides the config
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; overrides the config
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (results do not depend on this)
    #[arg(long)]
    threads: Option<usize>,
}

fn load(path: &PathBuf, expected: Kind) -> Result<ExperimentConfig, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
    let config = validate_config(&text).map_err(|e| e.to_string())?;
    if config.kind != expected {
        return Err(format!(
            "config kind is {:?} but this subcommand runs {:?}",
            config.kind.name(),
            expected.name()
        ));
    }
    Ok(config)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (loaded, common) = match cli.command {
        Command::Simulate(a) => (load(&a.config, Kind::Hawkes), a.common),
        Command::Resolvent(a) => (load(&a.config, Kind::Resolvent), a.common),
        Command::Meanfield(a) => (load(&a.config, Kind::Meanfield), a.common),
        Command::Limit(a) => (load(&a.config, Kind::Limit), a.common),
        Command::Compare(a) => (load(&a.config, Kind::RegimeCompare), a.common),
        Command::Accept(a) => {
            let loaded = match &a.config {
                Some(p) => load(p, Kind::AcceptanceSuite),
                None => validate_config(r#"{"kind": "acceptance-suite", "seed": 1}"#).map_err(|e| e.to_string()),
            };
            let loaded = loaded.map(|mut c| {
                if !a.criteria.is_empty() {
                    c.criteria = a.criteria.clone();
                }
                c
            });
            (loaded, a.common)
        }
    };
    let mut config = match loaded {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    if let Some(seed) = common.seed {
        config.seed = seed;
    }
    if let Some(out) = common.out {
        config.output = out;
    }
    if let Some(threads) = common.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global() {
            eprintln!("error: cannot configure {threads} threads: {e}");
            return ExitCode::from(2);
        }
    }
    match run_experiment(&config) {
        Ok(run) => {
            for line in &run.lines {
                println!("{line}");
            }
            for w in &run.manifest.warnings {
                eprintln!("warning: {w}");
            }
            for r in &run.manifest.reports {
                if config.kind != Kind::AcceptanceSuite {
                    println!("[{}] {} = {:.6e}", if r.pass { "PASS" } else { "FAIL" }, r.description, r.statistic);
                }
            }
            println!("wrote {} artifacts and manifest.json to {}", run.manifest.artifacts.len(), run.dir.display());
            if run.pass() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
