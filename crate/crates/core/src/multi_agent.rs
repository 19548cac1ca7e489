//! Distributed learning with one agent per group of domains (or slices).
//!
//! In the default `domains` mode every agent owns whole domain columns of the
//! allocation, sees only those domains' rates and backlogs plus its latency
//! budgets, and is trained against a local cost that compares per-domain
//! latency with the slice's per-domain budget. The end-to-end bound of every
//! slice is split into those budgets by [`decompose_sla`] and adjusted during
//! training by [`rebalance_sla`].
//!
//! In `slices` mode agents own slice rows instead and compete for capacity
//! through the joint projection.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::report::TrainingReport;
use crate::safe::{make_agents, run_training, AgentLayout, SafeAgent, SafeConfig};
use crate::slice_env::{
    reward_fn, throughput_margin, AllocationAction, DomainId, NetworkState, ScenarioConfig, SliceEnv, SliceSpec, SlicingNetwork,
    StepOutcome,
};

/// Largest budget change per rebalance, as a fraction of the current budget.
pub const REBALANCE_STEP_CAP: f64 = 0.1;
/// Iterations between budget rebalances.
pub const DEFAULT_REBALANCE_PERIOD: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AssignmentMode {
    #[default]
    Domains,
    Slices,
}

/// Partition as written in a scenario file. Groups name domains (`"RAN"`) or
/// slices depending on `mode`; an empty list selects the default partition.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AssignmentConfig {
    #[serde(default)]
    pub mode: AssignmentMode,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub groups: Vec<Vec<String>>,
}

/// One agent's share of the network: domain indices or slice indices, ascending.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AgentAssignment {
    pub agent_id: usize,
    pub mode: AssignmentMode,
    pub members: Vec<usize>,
}

impl AgentAssignment {
    /// Slice-major action indices owned by this agent.
    pub fn action_indices(&self, scenario: &ScenarioConfig) -> Vec<usize> {
        let (ns, nd) = (scenario.num_slices(), scenario.num_domains());
        let mut out = Vec::new();
        for k in 0..ns {
            for d in 0..nd {
                let owned = match self.mode {
                    AssignmentMode::Domains => self.members.contains(&d),
                    AssignmentMode::Slices => self.members.contains(&k),
                };
                if owned {
                    out.push(k * nd + d);
                }
            }
        }
        out
    }

    fn covers_all(&self, scenario: &ScenarioConfig) -> bool {
        let n = match self.mode {
            AssignmentMode::Domains => scenario.num_domains(),
            AssignmentMode::Slices => scenario.num_slices(),
        };
        self.members.len() == n
    }
}

/// `{RAN, EDGE}`, `{TN}`, `{CN}` restricted to the domains the scenario has.
pub fn default_assignments(scenario: &ScenarioConfig) -> Vec<AgentAssignment> {
    let groups = [vec![DomainId::Ran, DomainId::Edge], vec![DomainId::Tn], vec![DomainId::Cn]];
    groups
        .iter()
        .map(|g| {
            let mut members: Vec<usize> = g.iter().filter_map(|&id| scenario.domain_index(id)).collect();
            members.sort_unstable();
            members
        })
        .filter(|m| !m.is_empty())
        .enumerate()
        .map(|(agent_id, members)| AgentAssignment {
            agent_id,
            mode: AssignmentMode::Domains,
            members,
        })
        .collect()
}

impl AssignmentConfig {
    /// Maps names to indices and checks that the groups partition the domains (or slices).
    pub fn resolve(&self, scenario: &ScenarioConfig) -> Result<Vec<AgentAssignment>> {
        if self.groups.is_empty() {
            return match self.mode {
                AssignmentMode::Domains => Ok(default_assignments(scenario)),
                AssignmentMode::Slices => Ok((0..scenario.num_slices())
                    .map(|k| AgentAssignment {
                        agent_id: k,
                        mode: AssignmentMode::Slices,
                        members: vec![k],
                    })
                    .collect()),
            };
        }
        let universe = match self.mode {
            AssignmentMode::Domains => scenario.num_domains(),
            AssignmentMode::Slices => scenario.num_slices(),
        };
        let mut owner = vec![None; universe];
        let mut out = Vec::with_capacity(self.groups.len());
        for (agent_id, group) in self.groups.iter().enumerate() {
            if group.is_empty() {
                return Err(Error::Config(format!("agents.groups[{agent_id}] is empty")));
            }
            let mut members = Vec::with_capacity(group.len());
            for name in group {
                let idx = self.lookup(scenario, name).ok_or_else(|| {
                    Error::Config(format!("agents.groups[{agent_id}]: unknown member \"{name}\""))
                })?;
                if let Some(prev) = owner[idx] {
                    return Err(Error::Config(format!(
                        "agents.groups[{agent_id}]: \"{name}\" is already owned by group {prev}"
                    )));
                }
                owner[idx] = Some(agent_id);
                members.push(idx);
            }
            members.sort_unstable();
            out.push(AgentAssignment {
                agent_id,
                mode: self.mode,
                members,
            });
        }
        if let Some(missing) = owner.iter().position(Option::is_none) {
            let name = match self.mode {
                AssignmentMode::Domains => scenario.domains[missing].id.to_string(),
                AssignmentMode::Slices => scenario.slices[missing].name.clone(),
            };
            return Err(Error::Config(format!("agents.groups: \"{name}\" is not assigned to any agent")));
        }
        Ok(out)
    }

    fn lookup(&self, scenario: &ScenarioConfig, name: &str) -> Option<usize> {
        match self.mode {
            AssignmentMode::Domains => scenario.domains.iter().position(|d| d.id.to_string() == name),
            AssignmentMode::Slices => scenario.slices.iter().position(|s| s.name == name),
        }
    }
}

/// Per-slice, per-domain latency budgets in seconds, slice-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SlaDecomposition {
    pub slices: usize,
    pub domains: usize,
    pub budgets: Vec<f64>,
}

impl SlaDecomposition {
    pub fn budget(&self, slice: usize, domain: usize) -> f64 {
        self.budgets[slice * self.domains + domain]
    }

    pub fn slice_total(&self, slice: usize) -> f64 {
        self.budgets[slice * self.domains..(slice + 1) * self.domains].iter().sum()
    }
}

/// Shrinks `row` until its sum does not exceed `bound`, absorbing rounding.
fn fit_under(row: &mut [f64], bound: f64) {
    while row.iter().sum::<f64>() > bound {
        for b in row.iter_mut() {
            *b *= 1.0 - f64::EPSILON;
        }
    }
}

/// Splits each slice's end-to-end bound over the domains in proportion to `weights`.
pub fn decompose_sla(specs: &[SliceSpec], num_domains: usize, weights: &[f64]) -> Result<SlaDecomposition> {
    if weights.len() != num_domains {
        return Err(Error::Dimension {
            context: "decomposition weights",
            expected: num_domains,
            got: weights.len(),
        });
    }
    if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w > 0.0)) {
        return Err(Error::Config(format!("decomposition weights must be positive, got {w}")));
    }
    let total: f64 = weights.iter().sum();
    let mut budgets = Vec::with_capacity(specs.len() * num_domains);
    for spec in specs {
        let mut row: Vec<f64> = weights.iter().map(|w| spec.latency_bound * w / total).collect();
        fit_under(&mut row, spec.latency_bound);
        budgets.extend(row);
    }
    Ok(SlaDecomposition {
        slices: specs.len(),
        domains: num_domains,
        budgets,
    })
}

/// Moves budget from domains running under it to domains running over it.
///
/// Each domain's change is proportional to `observed − budget` and capped at
/// [`REBALANCE_STEP_CAP`] of its budget; gains and losses are then scaled to
/// cancel so each slice keeps its total.
pub fn rebalance_sla(decomp: &SlaDecomposition, observed: &[f64], specs: &[SliceSpec]) -> Result<SlaDecomposition> {
    if observed.len() != decomp.budgets.len() {
        return Err(Error::Dimension {
            context: "observed domain latencies",
            expected: decomp.budgets.len(),
            got: observed.len(),
        });
    }
    let nd = decomp.domains;
    let mut budgets = decomp.budgets.clone();
    for (k, spec) in specs.iter().enumerate().take(decomp.slices) {
        let row = &mut budgets[k * nd..(k + 1) * nd];
        let deltas: Vec<f64> = row
            .iter()
            .zip(&observed[k * nd..(k + 1) * nd])
            .map(|(&b, &o)| {
                let cap = REBALANCE_STEP_CAP * b;
                if o.is_finite() {
                    (o - b).clamp(-cap, cap)
                } else {
                    0.0
                }
            })
            .collect();
        let gain: f64 = deltas.iter().filter(|d| **d > 0.0).sum();
        let loss: f64 = -deltas.iter().filter(|d| **d < 0.0).sum::<f64>();
        let moved = gain.min(loss);
        if moved <= 0.0 {
            continue;
        }
        for (b, d) in row.iter_mut().zip(&deltas) {
            if *d > 0.0 {
                *b += d * moved / gain;
            } else if *d < 0.0 {
                *b += d * moved / loss;
            }
        }
        fit_under(row, spec.latency_bound);
    }
    Ok(SlaDecomposition {
        slices: decomp.slices,
        domains: nd,
        budgets,
    })
}

/// Owned rates, then owned backlogs (normalised as in the global view), then
/// owned budgets in seconds. Each block is slice-major over the owned entries.
pub fn local_view(
    state: &NetworkState,
    scenario: &ScenarioConfig,
    assignment: &AgentAssignment,
    decomp: &SlaDecomposition,
) -> Vec<f64> {
    let global = SliceEnv::observe_state(scenario, state);
    let half = global.len() / 2;
    let idx = assignment.action_indices(scenario);
    let mut out = Vec::with_capacity(idx.len() * 3);
    out.extend(idx.iter().map(|&i| global[i]));
    out.extend(idx.iter().map(|&i| global[half + i]));
    out.extend(idx.iter().map(|&i| decomp.budgets[i]));
    out
}

/// Max-margin cost of one agent.
///
/// `domains` mode compares each owned domain's latency with its budget and its
/// served rate with the slice's full throughput target. `slices` mode applies
/// the end-to-end cost to the owned slices only.
pub fn local_cost(
    outcome: &StepOutcome,
    scenario: &ScenarioConfig,
    assignment: &AgentAssignment,
    decomp: &SlaDecomposition,
) -> f64 {
    let nd = scenario.num_domains();
    let mut worst = f64::NEG_INFINITY;
    match assignment.mode {
        AssignmentMode::Domains => {
            for (k, spec) in scenario.slices.iter().enumerate() {
                for &d in &assignment.members {
                    let b = decomp.budget(k, d);
                    let lat = (outcome.domain_latency[k * nd + d] - b) / b;
                    let tp = throughput_margin(spec, outcome.domain_throughput[k * nd + d]);
                    worst = worst.max(lat.max(tp));
                }
            }
        }
        AssignmentMode::Slices => {
            for &k in &assignment.members {
                let spec = &scenario.slices[k];
                let lat = (outcome.per_slice_latency[k] - spec.latency_bound) / spec.latency_bound;
                worst = worst.max(lat.max(throughput_margin(spec, outcome.per_slice_throughput[k])));
            }
        }
    }
    worst
}

/// Negative weighted usage of the entries owned by one agent.
pub fn local_reward(action: &AllocationAction, scenario: &ScenarioConfig, assignment: &AgentAssignment) -> f64 {
    let nd = scenario.num_domains();
    -assignment
        .action_indices(scenario)
        .iter()
        .map(|&i| scenario.weights[i % nd] * action.flat()[i])
        .sum::<f64>()
}

/// [`AgentLayout`] for a partition. A single agent owning everything uses the
/// global observation, reward and cost, which makes it identical to
/// monolithic training.
#[derive(Debug, Clone)]
pub struct DistributedLayout {
    assignments: Vec<AgentAssignment>,
    indices: Vec<Vec<usize>>,
    decomposition: SlaDecomposition,
    rebalance_period: usize,
    latency_sum: Vec<f64>,
    windows: usize,
    global: bool,
}

impl DistributedLayout {
    pub fn new(scenario: &ScenarioConfig, assignments: Vec<AgentAssignment>, rebalance_period: usize) -> Result<Self> {
        validate_partition(scenario, &assignments)?;
        if rebalance_period == 0 {
            return Err(Error::Config("rebalance_period must be at least 1".into()));
        }
        let decomposition = decompose_sla(
            &scenario.slices,
            scenario.num_domains(),
            &scenario.decomposition_weights(),
        )?;
        let global = assignments.len() == 1 && assignments[0].covers_all(scenario);
        Ok(Self {
            indices: assignments.iter().map(|a| a.action_indices(scenario)).collect(),
            assignments,
            decomposition,
            rebalance_period,
            latency_sum: vec![0.0; scenario.action_dim()],
            windows: 0,
            global,
        })
    }

    pub fn assignments(&self) -> &[AgentAssignment] {
        &self.assignments
    }

    pub fn decomposition(&self) -> &SlaDecomposition {
        &self.decomposition
    }
}

/// Checks that assignments share one mode and partition the domains (or slices).
pub fn validate_partition(scenario: &ScenarioConfig, assignments: &[AgentAssignment]) -> Result<()> {
    let Some(first) = assignments.first() else {
        return Err(Error::Config("at least one agent is required".into()));
    };
    let universe = match first.mode {
        AssignmentMode::Domains => scenario.num_domains(),
        AssignmentMode::Slices => scenario.num_slices(),
    };
    let mut seen = vec![false; universe];
    for a in assignments {
        if a.mode != first.mode {
            return Err(Error::Config("agents mix domain and slice ownership".into()));
        }
        if a.members.is_empty() {
            return Err(Error::Config(format!("agent {} owns nothing", a.agent_id)));
        }
        for &m in &a.members {
            if m >= universe || seen[m] {
                return Err(Error::Config(format!("agent {} member {m} is out of range or shared", a.agent_id)));
            }
            seen[m] = true;
        }
    }
    if seen.iter().any(|s| !s) {
        return Err(Error::Config("assignments do not cover every member".into()));
    }
    Ok(())
}

impl AgentLayout for DistributedLayout {
    fn num_agents(&self) -> usize {
        self.assignments.len()
    }

    fn action_indices(&self, agent: usize) -> &[usize] {
        &self.indices[agent]
    }

    fn obs_dim(&self, agent: usize, scenario: &ScenarioConfig) -> usize {
        if self.global {
            scenario.obs_dim()
        } else {
            3 * self.indices[agent].len()
        }
    }

    fn observe(&self, agent: usize, scenario: &ScenarioConfig, state: &NetworkState) -> Vec<f64> {
        if self.global {
            SliceEnv::observe_state(scenario, state)
        } else {
            local_view(state, scenario, &self.assignments[agent], &self.decomposition)
        }
    }

    fn local_reward(&self, agent: usize, scenario: &ScenarioConfig, action: &AllocationAction) -> f64 {
        if self.global {
            reward_fn(action, &scenario.weights)
        } else {
            local_reward(action, scenario, &self.assignments[agent])
        }
    }

    fn local_cost(&self, agent: usize, scenario: &ScenarioConfig, outcome: &StepOutcome) -> f64 {
        if self.global {
            outcome.cost
        } else {
            local_cost(outcome, scenario, &self.assignments[agent], &self.decomposition)
        }
    }

    fn after_iteration(&mut self, scenario: &ScenarioConfig, _iteration: usize, mean_domain_latency: &[f64]) {
        for (s, l) in self.latency_sum.iter_mut().zip(mean_domain_latency) {
            *s += l;
        }
        self.windows += 1;
        if self.windows < self.rebalance_period {
            return;
        }
        let observed: Vec<f64> = self.latency_sum.iter().map(|s| s / self.windows as f64).collect();
        if let Ok(next) = rebalance_sla(&self.decomposition, &observed, &scenario.slices) {
            self.decomposition = next;
        }
        self.latency_sum.iter_mut().for_each(|s| *s = 0.0);
        self.windows = 0;
    }
}

/// Output of [`train_distributed`].
#[derive(Debug, Clone)]
pub struct DistributedRun {
    pub report: TrainingReport,
    pub agents: Vec<SafeAgent>,
    pub decomposition: SlaDecomposition,
}

/// Trains one safe learner per assignment on a shared network.
pub fn train_distributed<N: SlicingNetwork>(
    net: &mut N,
    assignments: Vec<AgentAssignment>,
    config: &SafeConfig,
    rebalance_period: usize,
    seed: u64,
) -> Result<DistributedRun> {
    config.validate()?;
    let scenario = net.scenario().clone();
    let mut layout = DistributedLayout::new(&scenario, assignments, rebalance_period)?;
    let mut agents = make_agents(&scenario, &layout, config, seed);
    let report = run_training(net, &mut layout, &mut agents, config, seed)?;
    Ok(DistributedRun {
        report,
        agents,
        decomposition: layout.decomposition,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::slice_env::{scenario::tests::two_slice, TrafficModel};

    fn spec(bound: f64) -> SliceSpec {
        SliceSpec {
            name: "s".into(),
            latency_bound: bound,
            min_throughput: 0.0,
            traffic: TrafficModel {
                base_rate: 1.0,
                amplitude: 0.0,
                period: 10.0,
                noise_std: 0.0,
            },
        }
    }

    #[test]
    fn equal_weights_split_evenly() {
        let d = decompose_sla(&[spec(0.4)], 4, &[1.0; 4]).unwrap();
        for b in &d.budgets {
            assert!((b - 0.1).abs() < 1e-12);
        }
    }

    #[test]
    fn proportional_weights() {
        let d = decompose_sla(&[spec(0.5)], 4, &[2.0, 1.0, 1.0, 1.0]).unwrap();
        let want = [0.2, 0.1, 0.1, 0.1];
        for (b, w) in d.budgets.iter().zip(want) {
            assert!((b - w).abs() < 1e-12);
        }
        assert!((d.slice_total(0) - 0.5).abs() < 1e-12);
        assert!(d.slice_total(0) <= 0.5);
    }

    #[test]
    fn bad_weights_rejected() {
        assert!(decompose_sla(&[spec(0.5)], 2, &[1.0, 0.0]).is_err());
        assert!(decompose_sla(&[spec(0.5)], 2, &[1.0]).is_err());
    }

    #[test]
    fn rebalance_fixed_point() {
        let d = decompose_sla(&[spec(0.4)], 4, &[1.0; 4]).unwrap();
        let r = rebalance_sla(&d, &d.budgets.clone(), &[spec(0.4)]).unwrap();
        assert_eq!(r, d);
    }

    #[test]
    fn rebalance_moves_capped_budget() {
        let d = decompose_sla(&[spec(0.2)], 2, &[1.0; 2]).unwrap();
        let r = rebalance_sla(&d, &[0.15, 0.05], &[spec(0.2)]).unwrap();
        assert!((r.budgets[0] - 0.11).abs() < 1e-12);
        assert!((r.budgets[1] - 0.09).abs() < 1e-12);
        assert!(r.slice_total(0) <= 0.2);
    }

    #[test]
    fn rebalance_without_slack_is_noop() {
        let d = decompose_sla(&[spec(0.2)], 2, &[1.0; 2]).unwrap();
        let r = rebalance_sla(&d, &[0.3, 0.12], &[spec(0.2)]).unwrap();
        assert_eq!(r, d);
    }

    #[test]
    fn rebalance_converges_on_stationary_latency() {
        let specs = [spec(0.4)];
        let mut d = decompose_sla(&specs, 4, &[1.0; 4]).unwrap();
        let observed = [0.16, 0.05, 0.07, 0.04];
        let mut last_step = f64::INFINITY;
        for _ in 0..50 {
            let next = rebalance_sla(&d, &observed, &specs).unwrap();
            last_step = next.budgets.iter().zip(&d.budgets).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            d = next;
        }
        assert!(last_step < 1e-6, "last step {last_step}");
    }

    #[test]
    fn default_partition() {
        let s = two_slice();
        let a = default_assignments(&s);
        let members: Vec<_> = a.iter().map(|a| a.members.clone()).collect();
        assert_eq!(members, vec![vec![0, 3], vec![1], vec![2]]);
        validate_partition(&s, &a).unwrap();
    }

    #[test]
    fn resolve_rejects_bad_groups() {
        let s = two_slice();
        let cfg = |groups: &[&[&str]]| AssignmentConfig {
            mode: AssignmentMode::Domains,
            groups: groups.iter().map(|g| g.iter().map(|n| n.to_string()).collect()).collect(),
        };
        assert!(cfg(&[&["RAN", "TN"], &["CN", "EDGE"]]).resolve(&s).is_ok());
        let err = cfg(&[&["RAN", "TN"], &["TN", "CN", "EDGE"]]).resolve(&s).unwrap_err();
        assert!(err.to_string().contains("TN"), "{err}");
        let err = cfg(&[&["RAN", "TN"], &["CN"]]).resolve(&s).unwrap_err();
        assert!(err.to_string().contains("EDGE"), "{err}");
        assert!(cfg(&[&["RAN", "XX"]]).resolve(&s).is_err());
    }

    #[test]
    fn disjoint_views_and_mutation_isolation() {
        let s = two_slice();
        let a = default_assignments(&s);
        let d = decompose_sla(&s.slices, s.num_domains(), &s.decomposition_weights()).unwrap();
        let mut env = SliceEnv::new(s.clone()).unwrap();
        let state = env.reset(3);
        let idx0 = a[0].action_indices(&s);
        let idx1 = a[1].action_indices(&s);
        assert!(idx0.iter().all(|i| !idx1.contains(i)));
        let view = local_view(&state, &s, &a[0], &d);
        assert_eq!(view.len(), 3 * idx0.len());
        let mut mutated = state.clone();
        for &i in &idx1 {
            mutated.rates[i] *= 3.0;
            mutated.backlogs[i] += 7.0;
        }
        assert_eq!(local_view(&mutated, &s, &a[0], &d), view);
    }

    #[test]
    fn single_cover_view_extends_global() {
        let s = two_slice();
        let all = AgentAssignment {
            agent_id: 0,
            mode: AssignmentMode::Domains,
            members: (0..4).collect(),
        };
        let d = decompose_sla(&s.slices, 4, &[1.0; 4]).unwrap();
        let mut env = SliceEnv::new(s.clone()).unwrap();
        let state = env.reset(1);
        let global = SliceEnv::observe_state(&s, &state);
        let view = local_view(&state, &s, &all, &d);
        assert_eq!(&view[..global.len()], &global[..]);
        assert_eq!(&view[global.len()..], &d.budgets[..]);
    }

    #[test]
    fn local_cost_examples() {
        let mut s = two_slice();
        s.slices.truncate(1);
        s.slices[0].min_throughput = 0.0;
        let a = AgentAssignment {
            agent_id: 0,
            mode: AssignmentMode::Domains,
            members: vec![0],
        };
        let d = decompose_sla(&s.slices, 4, &[1.0; 4]).unwrap();
        let b = d.budget(0, 0);
        let mut outcome = StepOutcome {
            next_state: SliceEnv::new(s.clone()).unwrap().state().clone(),
            reward: 0.0,
            cost: 0.0,
            per_slice_latency: vec![0.0],
            per_slice_throughput: vec![10.0],
            domain_latency: vec![b, 9.0, 9.0, 9.0],
            domain_throughput: vec![10.0; 4],
            sla_violated: false,
        };
        assert!(local_cost(&outcome, &s, &a, &d).abs() < 1e-12);
        outcome.domain_latency[0] = 1.2 * b;
        assert!((local_cost(&outcome, &s, &a, &d) - 0.2).abs() < 1e-12);
    }
}
