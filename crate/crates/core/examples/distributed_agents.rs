//! Per-domain agents on the two-slice network: RAN and EDGE share one agent,
//! TN and CN get their own, and latency budgets are rebalanced as they train.
//!
//! ```text
//! cargo run --release --example distributed_agents [iterations]
//! ```

use netslice::multi_agent::{default_assignments, train_distributed};
use netslice::orchestrator::load_config;
use netslice::slice_env::SliceEnv;

fn main() -> netslice::Result<()> {
    let config = load_config(concat!(env!("CARGO_MANIFEST_DIR"), "/../../scenarios/two_slice_distributed.json").as_ref())?;
    let scenario = config.load_scenario()?;
    let mut safe = config.effective_safe();
    safe.iterations = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(40);
    let assignments = match &scenario.agents {
        Some(a) => a.resolve(&scenario)?,
        None => default_assignments(&scenario),
    };
    for a in &assignments {
        let names: Vec<String> = a.members.iter().map(|&d| scenario.domains[d].id.to_string()).collect();
        println!("agent {} owns {}", a.agent_id, names.join(" + "));
    }

    let mut env = SliceEnv::new(scenario.clone())?;
    let run = train_distributed(&mut env, assignments, &safe, config.distributed.rebalance_period, config.seeds[0])?;

    println!("\n{:>5} {:>9} {:>9}   per-agent local violation rate", "iter", "cost", "violate");
    for (i, row) in run.report.rows.iter().enumerate().filter(|(i, _)| i % 10 == 0) {
        let local: Vec<String> = run.report.agents.iter().map(|a| format!("{:.3}", a[i].violation_rate)).collect();
        println!("{:>5} {:>9.4} {:>9.3}   {}", row.iteration, row.mean_cost, row.violation_rate, local.join("  "));
    }

    println!("\nfinal latency budgets (s):");
    for (k, slice) in scenario.slices.iter().enumerate() {
        let row: Vec<String> = (0..scenario.num_domains())
            .map(|d| format!("{}={:.4}", scenario.domains[d].id, run.decomposition.budget(k, d)))
            .collect();
        println!("  {:<6} {}  (bound {})", slice.name, row.join(" "), slice.latency_bound);
    }
    Ok(())
}
