//! Drives the two-slice network with the rule-based baseline and prints what
//! each slice experiences.
//!
//! ```text
//! cargo run --example simulate_baseline [scenario.json] [steps]
//! ```

use std::path::PathBuf;

use netslice::slice_env::{baseline_policy, ScenarioConfig, SliceEnv, SlicingNetwork};

fn main() -> netslice::Result<()> {
    let mut args = std::env::args().skip(1);
    let path = args
        .next()
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(concat!(env!("CARGO_MANIFEST_DIR"), "/../../scenarios/two_slice.json")));
    let steps: usize = args.next().and_then(|s| s.parse().ok()).unwrap_or(64);

    let scenario = ScenarioConfig::load(&path)?;
    let mut env = SliceEnv::new(scenario.clone())?;
    env.reset(7);

    println!("{:>4}  {:>28}  {:>24}  {:>6}  {:>7}", "t", "rates", "latency (bound)", "usage", "cost");
    let (mut violations, mut usage) = (0, 0.0);
    for _ in 0..steps {
        let state = env.state().clone();
        let decision = baseline_policy(&state, &scenario, scenario.headroom);
        let out = env.step(&decision.action)?;
        violations += usize::from(out.sla_violated);
        usage -= out.reward;
        if state.t % 8 == 0 {
            let rates: Vec<String> = (0..scenario.num_slices()).map(|k| format!("{:.1}", state.rate(k, 0))).collect();
            let latency: Vec<String> = scenario
                .slices
                .iter()
                .zip(&out.per_slice_latency)
                .map(|(s, l)| format!("{l:.3} ({:.2})", s.latency_bound))
                .collect();
            println!(
                "{:>4}  {:>28}  {:>24}  {:>6.3}  {:>7.3}{}",
                state.t,
                rates.join(" "),
                latency.join(" "),
                -out.reward,
                out.cost,
                if decision.saturated { "  saturated" } else { "" }
            );
        }
    }
    println!(
        "\n{steps} slots: mean usage {:.3}, {violations} SLA violations",
        usage / steps as f64
    );
    Ok(())
}
