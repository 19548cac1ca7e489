//! Trains the constrained learner on the one-slice toy network and compares
//! the result with a brute-force optimum over a 51-point share grid.
//!
//! ```text
//! cargo run --release --example train_safe [iterations] [seed]
//! ```

use netslice::orchestrator::load_config;
use netslice::safe::{evaluate_policy, train_safe, GlobalLayout};
use netslice::seeding::{derive_seed, STREAM_ENV};
use netslice::slice_env::{AllocationAction, SliceEnv, SlicingNetwork};

fn main() -> netslice::Result<()> {
    let mut args = std::env::args().skip(1);
    let config = load_config(concat!(env!("CARGO_MANIFEST_DIR"), "/../../scenarios/toy_safe.json").as_ref())?;
    let mut safe = config.effective_safe();
    if let Some(it) = args.next().and_then(|s| s.parse().ok()) {
        safe.iterations = it;
    }
    let seed = args.next().and_then(|s| s.parse().ok()).unwrap_or(1);
    let scenario = config.load_scenario()?;

    let mut env = SliceEnv::new(scenario.clone())?;
    let (report, agent) = train_safe(&mut env, &safe, seed)?;
    println!("{:>5} {:>9} {:>9} {:>9} {:>8} {:>8}", "iter", "reward", "cost", "violate", "lambda", "gated");
    for row in report.rows.iter().filter(|r| r.iteration % 20 == 0 || r.iteration + 1 == safe.iterations) {
        println!(
            "{:>5} {:>9.4} {:>9.4} {:>9.3} {:>8.4} {:>8.3}",
            row.iteration, row.mean_reward, row.mean_cost, row.violation_rate, row.lambda, row.switch_rate
        );
    }

    let eval_seed = 1000 + seed;
    let eval = evaluate_policy(&mut env, &GlobalLayout::new(&scenario), &[agent], &safe, 10, eval_seed)?;

    // cheapest grid share with strictly negative cost, on the same episodes
    let (mut oracle, mut steps) = (0.0, 0);
    for ep in 0..10 {
        env.reset(derive_seed(derive_seed(eval_seed, STREAM_ENV), ep));
        for _ in 0..safe.episode_len {
            let state = env.state().clone();
            let share = (0..=50)
                .map(|g| g as f64 / 50.0)
                .find(|&a| env.score(&state, &AllocationAction::from_flat(1, 1, vec![a]).unwrap()).2 < 0.0)
                .unwrap_or(1.0);
            oracle -= env.step(&AllocationAction::from_flat(1, 1, vec![share])?)?.reward;
            steps += 1;
        }
    }
    let oracle = oracle / steps as f64;
    println!(
        "\nlearned usage {:.4} vs grid optimum {oracle:.4} ({:+.1}%), violation rate {:.3}, gate used on {:.1}% of slots",
        eval.mean_usage,
        100.0 * (eval.mean_usage - oracle) / oracle,
        eval.violation_rate,
        100.0 * eval.switch_rate
    );
    Ok(())
}
