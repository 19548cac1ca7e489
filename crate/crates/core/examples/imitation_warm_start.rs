//! Clones the baseline from recorded demonstrations, compares resource usage,
//! then continues with safe online learning from the cloned policy.
//!
//! ```text
//! cargo run --release --example imitation_warm_start
//! ```

use netslice::imitation::{bc_train, collect_demonstrations, evaluate_imitation};
use netslice::neural::{initial_share_bias, GaussianPolicy};
use netslice::orchestrator::load_config;
use netslice::safe::train_safe_from;
use netslice::seeding::{rng_for, STREAM_MINIBATCH, STREAM_POLICY_INIT};
use netslice::slice_env::SliceEnv;

fn main() -> netslice::Result<()> {
    let config = load_config(concat!(env!("CARGO_MANIFEST_DIR"), "/../../scenarios/two_slice_imitation.json").as_ref())?;
    let scenario = config.load_scenario()?;
    let safe = config.effective_safe();
    let seed = config.seeds[0];
    let mut env = SliceEnv::new(scenario.clone())?;

    let demos = collect_demonstrations(&mut env, config.imitation.steps_per_seed, &config.imitation.demo_seeds)?;
    println!("collected {} baseline demonstrations", demos.len());

    let mut policy = GaussianPolicy::new(
        scenario.obs_dim(),
        scenario.action_dim(),
        &safe.hidden,
        safe.exploration.sigma,
        &mut rng_for(seed, STREAM_POLICY_INIT),
    );
    policy.set_output_bias(initial_share_bias(scenario.num_slices()));
    let before = evaluate_imitation(&policy, &mut env, 5, safe.episode_len, 99)?;

    let losses = bc_train(
        &mut policy,
        &demos,
        scenario.num_slices(),
        scenario.num_domains(),
        &config.imitation.bc,
        &mut rng_for(seed, STREAM_MINIBATCH),
    )?;
    for (epoch, loss) in losses.iter().enumerate().step_by(5) {
        println!("epoch {epoch:>3}  loss {loss:.3e}");
    }
    let after = evaluate_imitation(&policy, &mut env, 5, safe.episode_len, 99)?;
    println!(
        "\nusage: baseline {:.4}, untrained {:.4}, cloned {:.4}; action gap {:.4} -> {:.4}",
        after.baseline_usage, before.policy_usage, after.policy_usage, before.mean_action_gap, after.mean_action_gap
    );

    policy.reset_log_std(safe.exploration.sigma);
    let mut online = safe.clone();
    online.iterations = 10;
    let (report, _) = train_safe_from(&mut env, &online, seed, Some(policy))?;
    for row in &report.rows {
        println!(
            "online iter {:>2}: usage {:.4}, violations {:.3}, gated {:.2}",
            row.iteration, -row.mean_reward, row.violation_rate, row.switch_rate
        );
    }
    Ok(())
}
