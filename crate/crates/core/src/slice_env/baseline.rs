use super::{AllocationAction, NetworkState, ScenarioConfig, SLOT_SECONDS};

/// Output of the rule-based baseline.
#[derive(Debug, Clone, PartialEq)]
pub struct BaselineDecision {
    pub action: AllocationAction,
    /// Set when some domain cannot meet the per-domain budgets even at full capacity.
    pub saturated: bool,
}

/// Over-provisioning heuristic.
///
/// Each slice's latency bound is split evenly across its domain chain; in
/// every domain the slice gets the share whose M/M/1 delay equals that
/// budget, `(1/budget + load) / (μ·C)`, inflated by `headroom`. A domain
/// whose inflated shares exceed one is rescaled to sum to exactly one.
pub fn baseline_policy(state: &NetworkState, scenario: &ScenarioConfig, headroom: f64) -> BaselineDecision {
    let (ns, nd) = (scenario.num_slices(), scenario.num_domains());
    let mut action = AllocationAction::zeros(ns, nd);
    let mut saturated = false;
    for (d, domain) in scenario.domains.iter().enumerate() {
        let full = domain.full_rate();
        let mut required = Vec::with_capacity(ns);
        for (k, slice) in scenario.slices.iter().enumerate() {
            let budget = slice.latency_bound / nd as f64;
            let i = k * nd + d;
            let load = (state.rates[i] + state.backlogs[i] / SLOT_SECONDS).min(full);
            required.push((1.0 / budget + load) / full);
        }
        if required.iter().sum::<f64>() > 1.0 {
            saturated = true;
        }
        let mut column: Vec<f64> = required.iter().map(|r| (r * headroom).min(1.0)).collect();
        let total: f64 = column.iter().sum();
        if total > 1.0 {
            column.iter_mut().for_each(|a| *a /= total);
        }
        action.set_column(d, &column);
    }
    BaselineDecision { action, saturated }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::slice_env::{DomainId, DomainSpec, SliceSpec, TrafficModel};

    fn scenario(bound: f64) -> ScenarioConfig {
        ScenarioConfig {
            domains: DomainId::CHAIN
                .iter()
                .map(|&id| DomainSpec {
                    id,
                    capacity: 2.0,
                    service_rate: 10.0,
                })
                .collect(),
            slices: vec![SliceSpec {
                name: String::new(),
                latency_bound: bound,
                min_throughput: 0.0,
                traffic: TrafficModel {
                    base_rate: 10.0,
                    amplitude: 0.0,
                    period: 1.0,
                    noise_std: 0.0,
                },
            }],
            l_max: 10.0,
            headroom: 1.2,
            weights: vec![1.0; 4],
            agents: None,
            decomposition_weights: vec![],
        }
    }

    fn state(rate: f64) -> NetworkState {
        NetworkState {
            t: 0,
            slices: 1,
            domains: 4,
            rates: vec![rate; 4],
            backlogs: vec![0.0; 4],
        }
    }

    #[test]
    fn closed_form_share() {
        // per-domain budget 0.8 / 4 = 0.2 s
        let s = scenario(0.8);
        let out = baseline_policy(&state(10.0), &s, 1.2);
        let raw: f64 = (1.0 / 0.2 + 10.0) / 20.0;
        assert!((raw - 0.75).abs() < 1e-12);
        for d in 0..4 {
            assert!((out.action.share(0, d) - 0.9).abs() < 1e-12);
        }
        assert!(!out.saturated);
    }

    #[test]
    fn zero_traffic_minimal_share() {
        let s = scenario(0.8);
        let out = baseline_policy(&state(0.0), &s, 1.2);
        assert!((out.action.share(0, 0) - 1.2 * 5.0 / 20.0).abs() < 1e-12);
    }

    #[test]
    fn saturation_flag() {
        let s = scenario(0.8);
        let out = baseline_policy(&state(19.0), &s, 1.2);
        assert!(out.saturated);
        assert!(out.action.is_feasible());
        assert_eq!(out.action.share(0, 0), 1.0);
    }
}
