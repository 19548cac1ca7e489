use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::agent::{AgentBatch, Proposal, SafeAgent, UpdateStats};
use super::critic::{CostCritic, CostSample};
use super::{update_multiplier, SafeConfig, SwitchConfig};
use crate::error::{Error, Result};
use crate::mdp::Transition;
use crate::neural::{clip_exploration, initial_share_bias, project_action, ExplorationConfig, GaussianPolicy};
use crate::report::{AgentRow, ReportRow, TrainingReport};
use crate::seeding::{derive_seed, rng_for, STREAM_ACTION, STREAM_AGENT, STREAM_ENV, STREAM_MINIBATCH};
use crate::slice_env::{baseline_policy, reward_fn, AllocationAction, NetworkState, ScenarioConfig, SliceEnv, SlicingNetwork, StepOutcome};

/// How the joint allocation is split between learners and what each one sees.
///
/// Agent `i` owns the entries `action_indices(i)` of the slice-major action
/// vector; ownership must partition the whole vector.
pub trait AgentLayout {
    fn num_agents(&self) -> usize;
    fn action_indices(&self, agent: usize) -> &[usize];
    fn obs_dim(&self, agent: usize, scenario: &ScenarioConfig) -> usize;
    fn observe(&self, agent: usize, scenario: &ScenarioConfig, state: &NetworkState) -> Vec<f64>;
    fn local_reward(&self, agent: usize, scenario: &ScenarioConfig, action: &AllocationAction) -> f64;
    fn local_cost(&self, agent: usize, scenario: &ScenarioConfig, outcome: &StepOutcome) -> f64;
    /// Called once per iteration with the mean per-(slice, domain) latency of that iteration.
    fn after_iteration(&mut self, _scenario: &ScenarioConfig, _iteration: usize, _mean_domain_latency: &[f64]) {}
}

/// One end-to-end learner owning every allocation entry.
#[derive(Debug, Clone)]
pub struct GlobalLayout {
    indices: Vec<usize>,
}

impl GlobalLayout {
    pub fn new(scenario: &ScenarioConfig) -> Self {
        Self {
            indices: (0..scenario.action_dim()).collect(),
        }
    }
}

impl AgentLayout for GlobalLayout {
    fn num_agents(&self) -> usize {
        1
    }

    fn action_indices(&self, _agent: usize) -> &[usize] {
        &self.indices
    }

    fn obs_dim(&self, _agent: usize, scenario: &ScenarioConfig) -> usize {
        scenario.obs_dim()
    }

    fn observe(&self, _agent: usize, scenario: &ScenarioConfig, state: &NetworkState) -> Vec<f64> {
        SliceEnv::observe_state(scenario, state)
    }

    fn local_reward(&self, _agent: usize, scenario: &ScenarioConfig, action: &AllocationAction) -> f64 {
        reward_fn(action, &scenario.weights)
    }

    fn local_cost(&self, _agent: usize, _scenario: &ScenarioConfig, outcome: &StepOutcome) -> f64 {
        outcome.cost
    }
}

/// Result of [`select_action`].
#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    pub action: AllocationAction,
    pub used_baseline: bool,
    /// The policy's clipped raw proposal and its log density.
    pub raw: Vec<f64>,
    pub logp: f64,
    pub predicted_mean: f64,
    pub predicted_std: f64,
}

/// Proposes `project(mean + clip(ε, −H, H))` and swaps in the baseline when the
/// cost critic flags the proposal as unsafe.
#[allow(clippy::too_many_arguments)]
pub fn select_action<R: Rng + ?Sized>(
    state: &NetworkState,
    scenario: &ScenarioConfig,
    policy: &GaussianPolicy,
    critic: &CostCritic,
    switch: &SwitchConfig,
    exploration: &ExplorationConfig,
    rng: &mut R,
) -> Result<Selection> {
    let obs = SliceEnv::observe_state(scenario, state);
    let mean = policy.mean(&obs)?;
    let (sample, _) = policy.sample_action(&obs, rng)?;
    let noise: Vec<f64> = sample.iter().zip(&mean).map(|(s, m)| s - m).collect();
    let raw = clip_exploration(&mean, &noise, exploration)?;
    let logp = crate::neural::gaussian_log_density(&raw, &mean, &policy.log_std);
    let proposed = project_action(&raw, scenario.num_slices(), scenario.num_domains())?;
    let (predicted_mean, predicted_std) = critic.predict(&obs, proposed.flat())?;
    let used_baseline = switch.triggers(predicted_mean, predicted_std);
    let action = if used_baseline {
        baseline_policy(state, scenario, scenario.headroom).action
    } else {
        proposed
    };
    Ok(Selection {
        action,
        used_baseline,
        raw,
        logp,
        predicted_mean,
        predicted_std,
    })
}

struct StepPlan {
    observations: Vec<Vec<f64>>,
    proposals: Vec<Proposal>,
    gated: Vec<bool>,
    /// Ensemble-mean cost predicted for each agent's own proposal.
    predicted: Vec<f64>,
    executed: AllocationAction,
}

fn plan_step<L: AgentLayout, R: Rng + ?Sized>(
    scenario: &ScenarioConfig,
    state: &NetworkState,
    layout: &L,
    agents: &[SafeAgent],
    config: &SafeConfig,
    rng: &mut R,
    deterministic: bool,
) -> Result<StepPlan> {
    let (ns, nd) = (scenario.num_slices(), scenario.num_domains());
    let mut observations = Vec::with_capacity(agents.len());
    let mut proposals = Vec::with_capacity(agents.len());
    let mut raw_full = vec![0.0; ns * nd];
    for (i, agent) in agents.iter().enumerate() {
        let obs = layout.observe(i, scenario, state);
        let proposal = if deterministic {
            agent.propose_mean(&obs)?
        } else {
            agent.propose(&obs, &config.exploration, rng)?
        };
        for (&idx, &v) in layout.action_indices(i).iter().zip(&proposal.raw) {
            raw_full[idx] = v;
        }
        observations.push(obs);
        proposals.push(proposal);
    }
    let proposed = project_action(&raw_full, ns, nd)?;
    let mut gated = vec![false; agents.len()];
    let mut predicted = vec![f64::NEG_INFINITY; agents.len()];
    if config.switch.enabled {
        for (i, agent) in agents.iter().enumerate() {
            let shares: Vec<f64> = layout.action_indices(i).iter().map(|&j| proposed.flat()[j]).collect();
            let (mean, std) = agent.critic.predict(&observations[i], &shares)?;
            gated[i] = config.switch.triggers(mean, std);
            predicted[i] = mean;
        }
    }
    let executed = if gated.iter().any(|&g| g) {
        let baseline = baseline_policy(state, scenario, scenario.headroom).action;
        let mut mixed = proposed;
        for (i, _) in gated.iter().enumerate().filter(|(_, &g)| g) {
            for &j in layout.action_indices(i) {
                mixed.flat_mut()[j] = baseline.flat()[j];
            }
        }
        // Row ownership can mix baseline and policy entries in one domain.
        for d in 0..nd {
            let total = mixed.column_sum(d);
            if total > 1.0 {
                let col: Vec<f64> = mixed.column(d).iter().map(|a| a / total).collect();
                mixed.set_column(d, &col);
            }
        }
        mixed
    } else {
        proposed
    };
    Ok(StepPlan {
        observations,
        proposals,
        gated,
        predicted,
        executed,
    })
}

/// Runs every agent's update; if any fails, all agents and minibatch streams are restored.
pub fn aggregate_and_update(
    agents: &mut [SafeAgent],
    batches: &[AgentBatch],
    config: &SafeConfig,
    rngs: &mut [ChaCha8Rng],
) -> Result<Vec<UpdateStats>> {
    let agent_snapshot = agents.to_vec();
    let rng_snapshot = rngs.to_vec();
    let mut stats = Vec::with_capacity(agents.len());
    for (i, ((agent, batch), rng)) in agents.iter_mut().zip(batches).zip(rngs.iter_mut()).enumerate() {
        match agent.update(batch, config, rng) {
            Ok(s) => stats.push(s),
            Err(source) => {
                agents.clone_from_slice(&agent_snapshot);
                rngs.clone_from_slice(&rng_snapshot);
                return Err(Error::AgentUpdate {
                    agent: i,
                    source: Box::new(source),
                });
            }
        }
    }
    Ok(stats)
}

/// Seed for the `episode`-th reset of a run.
pub(crate) fn episode_seed(seed: u64, episode: u64) -> u64 {
    derive_seed(derive_seed(seed, STREAM_ENV), episode)
}

/// Builds the agents for `layout`; agent `i` draws from seed stream `STREAM_AGENT + i`.
pub(crate) fn make_agents<L: AgentLayout>(scenario: &ScenarioConfig, layout: &L, config: &SafeConfig, seed: u64) -> Vec<SafeAgent> {
    (0..layout.num_agents())
        .map(|i| {
            let mut agent = SafeAgent::new(
                layout.obs_dim(i, scenario),
                layout.action_indices(i).len(),
                config,
                derive_seed(seed, STREAM_AGENT + i as u64),
            );
            agent.policy.set_output_bias(initial_share_bias(scenario.num_slices()));
            agent
        })
        .collect()
}

#[derive(Default, Clone)]
struct Tally {
    reward: f64,
    cost: f64,
    violations: usize,
    switches: usize,
}

/// The collect-then-update loop shared by single-agent and distributed training.
///
/// On failure the rows completed so far are returned inside [`Error::Training`].
pub fn run_training<N: SlicingNetwork, L: AgentLayout>(
    net: &mut N,
    layout: &mut L,
    agents: &mut [SafeAgent],
    config: &SafeConfig,
    seed: u64,
) -> Result<TrainingReport> {
    let mut report = TrainingReport {
        agents: if agents.len() > 1 { vec![Vec::new(); agents.len()] } else { Vec::new() },
        ..TrainingReport::default()
    };
    match train_loop(net, layout, agents, config, seed, &mut report) {
        Ok(()) => Ok(report),
        Err(source) => Err(Error::Training {
            partial: Box::new(report),
            source: Box::new(source),
        }),
    }
}

fn train_loop<N: SlicingNetwork, L: AgentLayout>(
    net: &mut N,
    layout: &mut L,
    agents: &mut [SafeAgent],
    config: &SafeConfig,
    seed: u64,
    report: &mut TrainingReport,
) -> Result<()> {
    config.validate()?;
    if agents.len() != layout.num_agents() {
        return Err(Error::Config(format!(
            "layout has {} agents but {} learners were supplied",
            layout.num_agents(),
            agents.len()
        )));
    }
    let scenario = net.scenario().clone();
    let n_agents = agents.len();
    let nd = scenario.num_domains();
    let mut action_rng = rng_for(seed, STREAM_ACTION);
    let mut update_rngs: Vec<ChaCha8Rng> = (0..n_agents)
        .map(|i| rng_for(derive_seed(seed, STREAM_MINIBATCH), i as u64))
        .collect();
    let mut episode = 0u64;
    let mut episode_step = 0usize;
    let mut window_cost = vec![0.0; n_agents];
    let mut window_steps = 0usize;

    for iteration in 0..config.iterations {
        let mut batches = vec![AgentBatch::default(); n_agents];
        let mut global = Tally::default();
        let mut local = vec![Tally::default(); n_agents];
        let mut latency_sum = vec![0.0; scenario.action_dim()];

        for _ in 0..config.rollout_len {
            if episode_step == 0 {
                net.reset(episode_seed(seed, episode));
            }
            let state = net.state().clone();
            let plan = plan_step(&scenario, &state, layout, agents, config, &mut action_rng, false)?;
            let outcome = net.apply(&plan.executed)?;
            episode_step += 1;
            let done = episode_step == config.episode_len;

            global.reward += outcome.reward;
            global.cost += outcome.cost;
            global.violations += usize::from(outcome.sla_violated);
            global.switches += usize::from(plan.gated.iter().any(|&g| g));
            report.total_steps += 1;
            for (l, d) in latency_sum.iter_mut().zip(&outcome.domain_latency) {
                *l += d;
            }

            for (i, ((obs, proposal), batch)) in plan
                .observations
                .into_iter()
                .zip(plan.proposals)
                .zip(batches.iter_mut())
                .enumerate()
            {
                let reward = layout.local_reward(i, &scenario, &plan.executed);
                let cost = layout.local_cost(i, &scenario, &outcome);
                let executed: Vec<f64> = layout.action_indices(i).iter().map(|&j| plan.executed.flat()[j]).collect();
                // A vetoed proposal is charged what the critic expects it would have cost.
                let learner_cost = if plan.gated[i] { cost.max(plan.predicted[i]) } else { cost };
                local[i].reward += reward;
                local[i].cost += cost;
                local[i].violations += usize::from(cost >= 0.0);
                local[i].switches += usize::from(plan.gated[i]);
                window_cost[i] += learner_cost;
                batch.cost_samples.push(CostSample {
                    state: obs.clone(),
                    action: executed,
                    cost,
                });
                batch.transitions.push(Transition {
                    state_vec: obs,
                    action_vec: proposal.raw,
                    logp: proposal.logp,
                    reward,
                    cost: learner_cost,
                    done,
                });
            }
            if plan.gated.iter().any(|&g| g) {
                report.baseline_steps += 1;
            }
            if done {
                episode_step = 0;
                episode += 1;
            }
        }
        window_steps += config.rollout_len;
        if episode_step != 0 {
            let state = net.state().clone();
            for (i, batch) in batches.iter_mut().enumerate() {
                batch.bootstrap_obs = Some(layout.observe(i, &scenario, &state));
            }
        }

        aggregate_and_update(agents, &batches, config, &mut update_rngs)?;

        if (iteration + 1) % config.lagrangian.update_period == 0 {
            for (agent, cost) in agents.iter_mut().zip(window_cost.iter_mut()) {
                agent.lagrangian = update_multiplier(&agent.lagrangian, *cost / window_steps as f64);
                *cost = 0.0;
            }
            window_steps = 0;
        }

        let steps = config.rollout_len as f64;
        let mean_latency: Vec<f64> = latency_sum.iter().map(|l| l / steps).collect();
        layout.after_iteration(&scenario, iteration, &mean_latency);
        debug_assert_eq!(mean_latency.len(), scenario.num_slices() * nd);

        report.rows.push(ReportRow {
            iteration,
            mean_reward: global.reward / steps,
            mean_cost: global.cost / steps,
            violation_rate: global.violations as f64 / steps,
            lambda: agents.iter().map(|a| a.lagrangian.multiplier).sum::<f64>() / n_agents as f64,
            switch_rate: global.switches as f64 / steps,
        });
        if n_agents > 1 {
            for (i, agent) in agents.iter().enumerate() {
                report.agents[i].push(AgentRow {
                    mean_reward: local[i].reward / steps,
                    mean_cost: local[i].cost / steps,
                    violation_rate: local[i].violations as f64 / steps,
                    lambda: agent.lagrangian.multiplier,
                    switch_rate: local[i].switches as f64 / steps,
                });
            }
        }
    }
    Ok(())
}

/// Trains one end-to-end safe learner from scratch.
pub fn train_safe<N: SlicingNetwork>(net: &mut N, config: &SafeConfig, seed: u64) -> Result<(TrainingReport, SafeAgent)> {
    train_safe_from(net, config, seed, None)
}

/// Like [`train_safe`], optionally starting from a pre-trained policy.
pub fn train_safe_from<N: SlicingNetwork>(
    net: &mut N,
    config: &SafeConfig,
    seed: u64,
    initial_policy: Option<GaussianPolicy>,
) -> Result<(TrainingReport, SafeAgent)> {
    config.validate()?;
    let scenario = net.scenario().clone();
    let mut layout = GlobalLayout::new(&scenario);
    let mut agents = make_agents(&scenario, &layout, config, seed);
    if let Some(policy) = initial_policy {
        if policy.obs_dim() != scenario.obs_dim() || policy.act_dim() != scenario.action_dim() {
            return Err(Error::Dimension {
                context: "initial policy",
                expected: scenario.obs_dim() + scenario.action_dim(),
                got: policy.obs_dim() + policy.act_dim(),
            });
        }
        agents[0] = SafeAgent::with_policy(policy, config, derive_seed(seed, STREAM_AGENT));
    }
    let report = run_training(net, &mut layout, &mut agents, config, seed)?;
    Ok((report, agents.pop().unwrap()))
}

/// Deterministic evaluation statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalStats {
    /// Mean weighted resource usage per step (`−reward`).
    pub mean_usage: f64,
    pub mean_cost: f64,
    pub violation_rate: f64,
    pub switch_rate: f64,
    pub steps: usize,
}

/// Runs the agents' mean actions (through the gate when enabled) for
/// `episodes` episodes of `episode_len` slots, seeded from `seed`.
pub fn evaluate_policy<N: SlicingNetwork, L: AgentLayout>(
    net: &mut N,
    layout: &L,
    agents: &[SafeAgent],
    config: &SafeConfig,
    episodes: usize,
    seed: u64,
) -> Result<EvalStats> {
    let scenario = net.scenario().clone();
    let mut tally = Tally::default();
    let mut steps = 0usize;
    let mut unused = rng_for(seed, STREAM_ACTION);
    for ep in 0..episodes {
        net.reset(episode_seed(seed, ep as u64));
        for _ in 0..config.episode_len {
            let state = net.state().clone();
            let plan = plan_step(&scenario, &state, layout, agents, config, &mut unused, true)?;
            let outcome = net.apply(&plan.executed)?;
            tally.reward += outcome.reward;
            tally.cost += outcome.cost;
            tally.violations += usize::from(outcome.sla_violated);
            tally.switches += usize::from(plan.gated.iter().any(|&g| g));
            steps += 1;
        }
    }
    let n = steps.max(1) as f64;
    Ok(EvalStats {
        mean_usage: -tally.reward / n,
        mean_cost: tally.cost / n,
        violation_rate: tally.violations as f64 / n,
        switch_rate: tally.switches as f64 / n,
        steps,
    })
}
