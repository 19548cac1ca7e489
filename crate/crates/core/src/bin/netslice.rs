use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use netslice::imitation::{bc_train, collect_demonstrations, DemonstrationSet};
use netslice::neural::{initial_share_bias, save_policy, GaussianPolicy};
use netslice::orchestrator::{load_config, run_experiment, violation_cdf, write_cdf_csv, Algorithm, ManagedNetwork};
use netslice::report::write_loss_csv;
use netslice::seeding::{derive_seed, rng_for, STREAM_MINIBATCH, STREAM_POLICY_INIT};
use netslice::{Error, Result};

#[derive(Parser)]
#[command(name = "netslice", version, about = "Safe resource orchestration for sliced networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment file, one output directory per (algorithm, seed).
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Run only this seed instead of the file's seed list.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "runs")]
        out: PathBuf,
        /// Override the file's algorithm (safe, distributed, imitation+safe, baseline-only).
        #[arg(long)]
        algo: Option<String>,
    },
    /// Build violation CDFs from every report.csv under a run directory.
    Report {
        #[arg(long, default_value = "runs")]
        out: PathBuf,
    },
    /// Record baseline demonstrations for the experiment's scenario.
    DemoCollect {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "demos.jsonl")]
        out: PathBuf,
    },
    /// Behaviour-clone a policy from a demonstration file.
    Bc {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        demos: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "bc")]
        out: PathBuf,
    },
}

fn reports_under(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for entry in std::fs::read_dir(dir)? {
        let path = entry?.path().join("report.csv");
        if path.is_file() {
            out.push(path);
        }
    }
    out.sort();
    Ok(out)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run { config, seed, out, algo } => {
            let mut cfg = load_config(&config)?;
            if let Some(seed) = seed {
                cfg.seeds = vec![seed];
            }
            if let Some(name) = algo {
                cfg.algorithm = Algorithm::parse(&name)?;
            }
            for cell in run_experiment(&cfg, &out)? {
                let rows = &cell.report.rows;
                let violations = rows.iter().map(|r| r.violation_rate).sum::<f64>() / rows.len().max(1) as f64;
                println!(
                    "{}: {} iterations, mean violation rate {violations:.4}",
                    cell.dir.display(),
                    rows.len()
                );
            }
        }
        Command::Report { out } => {
            let reports = reports_under(&out)?;
            if reports.is_empty() {
                return Err(Error::Config(format!("no report.csv found under {}", out.display())));
            }
            let tables = violation_cdf(&reports)?;
            let path = out.join("violation_cdf.csv");
            write_cdf_csv(&path, &tables)?;
            for t in &tables {
                println!("{}: P(violation rate <= 0.02) = {:.3}", t.source, t.at(0.02));
            }
            println!("wrote {}", path.display());
        }
        Command::DemoCollect { config, seed, out } => {
            let cfg = load_config(&config)?;
            let seed = seed.unwrap_or(cfg.seeds[0]);
            let mut net = ManagedNetwork::new(cfg.load_scenario()?)?;
            let seeds: Vec<u64> = cfg.imitation.demo_seeds.iter().map(|s| derive_seed(seed, *s)).collect();
            let demos = collect_demonstrations(&mut net, cfg.imitation.steps_per_seed, &seeds)?;
            demos.save(&out)?;
            println!("wrote {} demonstrations to {}", demos.len(), out.display());
        }
        Command::Bc { config, demos, seed, out } => {
            let cfg = load_config(&config)?;
            let seed = seed.unwrap_or(cfg.seeds[0]);
            let scenario = cfg.load_scenario()?;
            let demos = DemonstrationSet::load(&demos)?;
            if demos.scenario_hash != scenario.hash() {
                return Err(Error::Config("demonstrations were recorded on a different scenario".into()));
            }
            let safe = cfg.effective_safe();
            let mut policy = GaussianPolicy::new(
                scenario.obs_dim(),
                scenario.action_dim(),
                &safe.hidden,
                safe.exploration.sigma,
                &mut rng_for(seed, STREAM_POLICY_INIT),
            );
            policy.set_output_bias(initial_share_bias(scenario.num_slices()));
            let losses = bc_train(
                &mut policy,
                &demos,
                scenario.num_slices(),
                scenario.num_domains(),
                &cfg.imitation.bc,
                &mut rng_for(seed, STREAM_MINIBATCH),
            )?;
            std::fs::create_dir_all(&out)?;
            write_loss_csv(&out.join("bc_loss.csv"), &losses)?;
            save_policy(&out.join("bc_policy.ckpt"), &policy)?;
            if let (Some(first), Some(last)) = (losses.first(), losses.last()) {
                println!("bc loss {first:.3e} -> {last:.3e} over {} epochs", losses.len());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            if err.is_config() {
                ExitCode::from(1)
            } else {
                ExitCode::from(2)
            }
        }
    }
}
