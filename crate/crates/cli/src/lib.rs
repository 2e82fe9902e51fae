//! Command-line driver: config files, subcommands and grid sweeps.

pub mod args;
pub mod commands;
pub mod config;
pub mod error;
pub mod experiment;
pub mod fsio;
pub mod sweep;

use std::path::{Path, PathBuf};

pub use args::{Cli, Command};
pub use config::RunConfig;
pub use error::{CliError, Result};

use error::invalid;

/// Worker count from the flag, else `ASA_WORKERS`, else the core count.
pub fn resolve_workers(flag: Option<usize>, env: Option<&str>) -> Result<usize> {
    let n = match (flag, env) {
        (Some(n), _) => n,
        (None, Some(v)) => v
            .trim()
            .parse()
            .map_err(|_| invalid("ASA_WORKERS", format!("{v:?} is not a count")))?,
        (None, None) => std::thread::available_parallelism().map_or(1, |n| n.get()),
    };
    if n == 0 {
        return Err(invalid(if flag.is_some() { "--workers" } else { "ASA_WORKERS" }, "must be ≥ 1"));
    }
    Ok(n)
}

fn config_or_default(path: Option<&Path>) -> Result<RunConfig> {
    path.map_or_else(|| Ok(RunConfig::default()), RunConfig::load)
}

/// The explicit config, else the one written beside the checkpoint by
/// `train`, else defaults.
fn config_for_checkpoint(explicit: Option<&Path>, checkpoint: &Path) -> Result<RunConfig> {
    if explicit.is_some() {
        return config_or_default(explicit);
    }
    let sibling: PathBuf = checkpoint.with_file_name(commands::CONFIG_FILE);
    if sibling.is_file() {
        RunConfig::load(&sibling)
    } else {
        Ok(RunConfig::default())
    }
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::GenData(a) => {
            let mut cfg = config_or_default(a.config.as_deref())?;
            cfg.data.seed = a.seed.unwrap_or(cfg.data.seed);
            cfg.data.train_size = a.train_size.unwrap_or(cfg.data.train_size);
            cfg.data.target_size = a.target_size.unwrap_or(cfg.data.target_size);
            cfg.validate()?;
            let bench = commands::gen_data(&cfg.data, &a.out)?;
            for s in bench.splits() {
                println!("{:<10} {:>6} images", s.name, s.len());
            }
            println!("wrote {}", a.out.display());
        }
        Command::Train(a) => {
            let mut cfg = config_or_default(a.config.as_deref())?;
            cfg.train.seed = a.seed.unwrap_or(cfg.train.seed);
            cfg.train.epochs = a.epochs.unwrap_or(cfg.train.epochs);
            cfg.train.asa_mode = a.mode.unwrap_or(cfg.train.asa_mode);
            cfg.method.kind = a.method.unwrap_or(cfg.method.kind);
            cfg.method.lambda = a.lambda.unwrap_or(cfg.method.lambda);
            if let Some(p) = a.points {
                cfg.method.points = p;
            }
            cfg.validate()?;
            let opts = commands::TrainOptions {
                checkpoint_every: a.checkpoint_every,
                wall_clock: a.wall_clock,
            };
            let log = commands::train(&cfg, &a.data, &a.out, &opts)?;
            let s = log.summary();
            println!(
                "{} epochs, {} steps, final loss {:.4}, train accuracy {:.2}%",
                log.epochs.len(),
                s.steps,
                s.final_loss,
                s.final_accuracy
            );
            println!("wrote {}", a.out.display());
        }
        Command::Eval(a) => {
            let mut cfg = config_for_checkpoint(a.config.as_deref(), &a.checkpoint)?;
            cfg.train.seed = a.seed.unwrap_or(cfg.train.seed);
            let report = commands::eval(&cfg, &a.checkpoint, &a.data, a.domains.as_deref(), &a.out, &a.label)?;
            for d in &report.accuracies {
                println!("{:<10} {:>7.2}%", d.domain, d.accuracy);
            }
            println!("mean {:.2} std {:.2}", report.mean, report.std);
            for d in &report.a_distance {
                println!("A-distance {}→{} {:.4}", d.source, d.target, d.distance);
            }
        }
        Command::Gradcheck(a) => {
            let reports = commands::gradcheck(a.scope, a.instances, a.seed, a.rtol)?;
            for r in &reports {
                println!("{r}");
            }
            let gap = commands::reversal_gap(a.instances.min(10), a.seed)?;
            println!("reversal: max relative gap {gap:.2e} over λ ∈ {{0.5, 5, 20}}");
            let failed: Vec<&str> = reports.iter().filter(|r| !r.passed()).map(|r| r.scope.name()).collect();
            if !failed.is_empty() {
                return Err(CliError::Failed(format!("gradient check failed: {}", failed.join(", "))));
            }
            if gap >= 1e-6 {
                return Err(CliError::Failed(format!("reversal gap {gap:e} ≥ 1e-6")));
            }
        }
        Command::Sweep(a) => {
            let grid = sweep::Grid::load(&a.grid)?;
            let env = std::env::var("ASA_WORKERS").ok();
            let workers = resolve_workers(a.workers, env.as_deref())?;
            let reports = commands::sweep(&grid, a.data.as_deref(), &a.seeds, workers, &a.out)?;
            for r in &reports {
                println!("{:<50} mean {:>6.2} std {:>6.2}", r.label, r.mean, r.std);
            }
            println!("wrote {} rows to {}", reports.len(), a.out.join(commands::SWEEP_CSV).display());
        }
        Command::Adistance(a) => {
            let mut cfg = config_for_checkpoint(a.config.as_deref(), &a.checkpoint)?;
            cfg.train.seed = a.seed.unwrap_or(cfg.train.seed);
            let pairs = a.pairs.as_deref().map(commands::parse_pairs).transpose()?;
            let out = commands::adistance(&a.checkpoint, &a.data, pairs, &cfg.eval, cfg.train.seed, &a.out)?;
            for d in &out.distances {
                println!("{:<10} {:<10} {:.4}", d.source, d.target, d.distance);
            }
            let ratios: Vec<String> = out.explained.iter().map(|r| format!("{r:.3}")).collect();
            println!("PCA explained variance: {}", ratios.join(", "));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flag_beats_env_beats_cores() {
        assert_eq!(resolve_workers(Some(3), Some("5")).unwrap(), 3);
        assert_eq!(resolve_workers(None, Some("5")).unwrap(), 5);
        assert!(resolve_workers(None, None).unwrap() >= 1);
        assert!(resolve_workers(None, Some("many")).is_err());
        assert!(resolve_workers(Some(0), None).is_err());
    }
}
