//! Splits end-to-end latency bounds into per-domain budgets, then lets the
//! rebalancer follow a network whose transport domain is slower than planned.

use netslice::multi_agent::{decompose_sla, rebalance_sla};
use netslice::slice_env::{SliceSpec, TrafficModel};

fn main() -> netslice::Result<()> {
    let slice = |name: &str, bound: f64| SliceSpec {
        name: name.into(),
        latency_bound: bound,
        min_throughput: 0.0,
        traffic: TrafficModel {
            base_rate: 10.0,
            amplitude: 0.0,
            period: 1.0,
            noise_std: 0.0,
        },
    };
    let specs = [slice("embb", 1.0), slice("urllc", 0.4)];
    let domains = ["RAN", "TN", "CN", "EDGE"];
    let mut decomp = decompose_sla(&specs, 4, &[2.0, 1.0, 1.0, 1.0])?;

    // steady per-domain latencies: TN needs 40% of each bound, RAN and CN far less
    let observed: Vec<f64> = specs
        .iter()
        .flat_map(|s| [0.15, 0.40, 0.10, 0.20].map(|f| f * s.latency_bound))
        .collect();

    let show = |round: usize, d: &netslice::multi_agent::SlaDecomposition| {
        for (k, s) in specs.iter().enumerate() {
            let cells: Vec<String> = domains
                .iter()
                .enumerate()
                .map(|(i, n)| format!("{n} {:.4}", d.budget(k, i)))
                .collect();
            println!("round {round:>2} {:<6} {}  sum {:.4}", s.name, cells.join("  "), d.slice_total(k));
        }
    };
    show(0, &decomp);
    for round in 1..=30 {
        decomp = rebalance_sla(&decomp, &observed, &specs)?;
        if round % 10 == 0 {
            show(round, &decomp);
        }
    }
    Ok(())
}
