//! Trains with and without the baseline switching gate on paired seeds and
//! prints the violation-rate CDFs of both runs.
//!
//! ```text
//! cargo run --release --example gate_comparison [iterations]
//! ```

use netslice::orchestrator::{empirical_cdf, load_config};
use netslice::safe::train_safe;
use netslice::slice_env::SliceEnv;

fn main() -> netslice::Result<()> {
    let iterations = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(30);
    let config = load_config(concat!(env!("CARGO_MANIFEST_DIR"), "/../../scenarios/two_slice_safe.json").as_ref())?;
    let scenario = config.load_scenario()?;

    let mut rates = [Vec::new(), Vec::new()];
    for (gate, bucket) in [true, false].into_iter().zip(rates.iter_mut()) {
        let mut safe = config.effective_safe();
        safe.iterations = iterations;
        safe.switch.enabled = gate;
        for &seed in config.seeds.iter().take(3) {
            let mut env = SliceEnv::new(scenario.clone())?;
            let (report, _) = train_safe(&mut env, &safe, seed)?;
            let mean = report.rows.iter().map(|r| r.violation_rate).sum::<f64>() / report.rows.len() as f64;
            println!("gate {:<3} seed {seed}: mean violation rate {:.2}%", if gate { "on" } else { "off" }, 100.0 * mean);
            bucket.extend(report.rows.iter().map(|r| r.violation_rate));
        }
    }

    let on = empirical_cdf("gate on", &rates[0]);
    let off = empirical_cdf("gate off", &rates[1]);
    println!("\n{:>8}  {:>8}  {:>8}", "level", "P(on)", "P(off)");
    for level in [0.0, 0.01, 0.02, 0.05, 0.1, 0.2, 0.5, 1.0] {
        println!("{level:>8.2}  {:>8.3}  {:>8.3}", on.at(level), off.at(level));
    }
    Ok(())
}
