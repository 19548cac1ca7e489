mod common;

use netslice::mdp::Transition;
use netslice::multi_agent::{default_assignments, train_distributed, DistributedLayout};
use netslice::report::{ReportRow, TrainingReport};
use netslice::safe::{
    aggregate_and_update, evaluate_policy, train_safe, AgentBatch, AgentLayout, CostSample, GlobalLayout, SafeAgent,
    SafeConfig,
};
use netslice::seeding::rng_for;
use netslice::slice_env::{baseline_policy, SliceEnv, SlicingNetwork};
use netslice::Error;

fn mean(rows: &[ReportRow], f: impl Fn(&ReportRow) -> f64) -> f64 {
    rows.iter().map(f).sum::<f64>() / rows.len() as f64
}

#[test]
fn zero_iterations_give_an_empty_report_with_header() {
    let mut env = SliceEnv::new(common::scenario("toy.json")).unwrap();
    let cfg = SafeConfig {
        iterations: 0,
        ..SafeConfig::default()
    };
    let (report, _) = train_safe(&mut env, &cfg, 1).unwrap();
    assert!(report.rows.is_empty());
    assert_eq!(
        report.to_csv_string().unwrap(),
        "iteration,mean_reward,mean_cost,violation_rate,lambda,switch_rate\n"
    );
}

#[test]
fn gate_off_two_slice_learning_lowers_cost() {
    let cfg = common::experiment("two_slice_gate_off.json");
    let mut env = SliceEnv::new(cfg.load_scenario().unwrap()).unwrap();
    let (report, _) = train_safe(&mut env, &cfg.effective_safe(), cfg.seeds[0]).unwrap();
    assert_eq!(report.rows.len(), 150);
    let first = mean(&report.rows[..20], |r| r.mean_cost);
    let last = mean(&report.rows[130..], |r| r.mean_cost);
    assert!(last < first, "final cost {last} not below initial {first}");
}

fn check_counts(report: &TrainingReport, rollout: usize) {
    assert_eq!(report.total_steps, report.rows.len() * rollout);
    let gated: f64 = report.rows.iter().map(|r| r.switch_rate * rollout as f64).sum();
    assert_eq!(gated.round() as usize, report.baseline_steps);
    for r in &report.rows {
        assert!(r.lambda >= 0.0);
        assert!((0.0..=1.0).contains(&r.switch_rate) && (0.0..=1.0).contains(&r.violation_rate));
    }
}

#[test]
fn gate_lowers_evaluation_violations_on_paired_seeds() {
    let cfg = common::experiment("two_slice_safe.json");
    let scenario = cfg.load_scenario().unwrap();
    let mut safe = cfg.effective_safe();
    safe.iterations = 10;
    let layout = GlobalLayout::new(&scenario);
    for seed in [1, 2] {
        let mut env = SliceEnv::new(scenario.clone()).unwrap();
        let (report, agent) = train_safe(&mut env, &safe, seed).unwrap();
        check_counts(&report, safe.rollout_len);
        let agents = [agent];
        let on = evaluate_policy(&mut env, &layout, &agents, &safe, 5, 100 + seed).unwrap();
        let mut off_cfg = safe.clone();
        off_cfg.switch.enabled = false;
        let off = evaluate_policy(&mut env, &layout, &agents, &off_cfg, 5, 100 + seed).unwrap();
        assert!(on.violation_rate <= off.violation_rate, "seed {seed}: {on:?} vs {off:?}");
        assert_eq!(off.switch_rate, 0.0);
    }
}

#[test]
fn same_seed_reproduces_training_exactly() {
    let mut cfg = common::experiment("two_slice_safe.json").effective_safe();
    cfg.iterations = 3;
    let scenario = common::scenario("two_slice.json");
    let run = |seed| {
        let mut env = SliceEnv::new(scenario.clone()).unwrap();
        train_safe(&mut env, &cfg, seed).unwrap().0.to_csv_string().unwrap()
    };
    assert_eq!(run(4), run(4));
    assert_ne!(run(4), run(5));
}

/// Three per-domain learners with one baseline-driven episode of experience each.
fn three_agents(cfg: &SafeConfig) -> (Vec<SafeAgent>, Vec<AgentBatch>) {
    let scenario = common::scenario("two_slice.json");
    let layout = DistributedLayout::new(&scenario, default_assignments(&scenario), 10).unwrap();
    let mut env = SliceEnv::new(scenario.clone()).unwrap();
    let mut agents = Vec::new();
    let mut batches = Vec::new();
    for i in 0..layout.num_agents() {
        let owned = layout.action_indices(i);
        let agent = SafeAgent::new(layout.obs_dim(i, &scenario), owned.len(), cfg, 40 + i as u64);
        let mut batch = AgentBatch::default();
        let mut rng = rng_for(i as u64, 0);
        env.reset(i as u64);
        for t in 0..64 {
            let view = layout.observe(i, &scenario, env.state());
            let proposal = agent.propose(&view, &cfg.exploration, &mut rng).unwrap();
            let action = baseline_policy(env.state(), &scenario, scenario.headroom).action;
            let out = env.apply(&action).unwrap();
            batch.cost_samples.push(CostSample {
                state: view.clone(),
                action: owned.iter().map(|&j| action.flat()[j]).collect(),
                cost: out.cost,
            });
            batch.transitions.push(Transition {
                state_vec: view,
                action_vec: proposal.raw,
                logp: proposal.logp,
                reward: out.reward,
                cost: out.cost,
                done: t == 63,
            });
        }
        agents.push(agent);
        batches.push(batch);
    }
    (agents, batches)
}

#[test]
fn zero_step_updates_keep_policies_and_advance_versions() {
    let cfg = SafeConfig {
        policy_lr: 0.0,
        epochs: 2,
        ..SafeConfig::default()
    };
    let (mut agents, batches) = three_agents(&cfg);
    let before: Vec<_> = agents
        .iter()
        .map(|a| (a.policy.mean_net.params().to_vec(), a.policy.log_std.clone()))
        .collect();
    let mut rngs: Vec<_> = (0..3).map(|i| rng_for(9, i)).collect();
    aggregate_and_update(&mut agents, &batches, &cfg, &mut rngs).unwrap();
    for (agent, (params, log_std)) in agents.iter().zip(&before) {
        assert_eq!(agent.policy.mean_net.params(), &params[..]);
        assert_eq!(&agent.policy.log_std, log_std);
        assert_eq!(agent.version, 1);
    }
}

#[test]
fn one_failing_agent_rolls_back_every_agent() {
    let cfg = SafeConfig {
        epochs: 2,
        ..SafeConfig::default()
    };
    let (mut agents, mut batches) = three_agents(&cfg);
    batches[1].transitions[5].reward = f64::NAN;
    let snapshot: Vec<_> = agents
        .iter()
        .map(|a| {
            (
                a.policy.mean_net.params().to_vec(),
                a.value.net.params().to_vec(),
                a.critic.members()[0].params().to_vec(),
                a.version,
            )
        })
        .collect();
    let mut rngs: Vec<_> = (0..3).map(|i| rng_for(9, i)).collect();
    let rng_before = rngs.clone();
    let err = aggregate_and_update(&mut agents, &batches, &cfg, &mut rngs).unwrap_err();
    assert!(matches!(err, Error::AgentUpdate { agent: 1, .. }), "{err}");
    for (agent, (policy, value, critic, version)) in agents.iter().zip(&snapshot) {
        assert_eq!(agent.policy.mean_net.params(), &policy[..]);
        assert_eq!(agent.value.net.params(), &value[..]);
        assert_eq!(agent.critic.members()[0].params(), &critic[..]);
        assert_eq!(agent.version, *version);
    }
    assert_eq!(rngs, rng_before);
}

#[test]
fn three_agent_training_reduces_violations() {
    let cfg = common::experiment("two_slice_distributed.json");
    let scenario = cfg.load_scenario().unwrap();
    let assignments = scenario.agents.as_ref().unwrap().resolve(&scenario).unwrap();
    assert_eq!(assignments.len(), 3);
    let mut env = SliceEnv::new(scenario).unwrap();
    let safe = cfg.effective_safe();
    let run = train_distributed(&mut env, assignments, &safe, cfg.distributed.rebalance_period, cfg.seeds[0]).unwrap();
    let rows = &run.report.rows;
    assert_eq!(rows.len(), 200);
    assert_eq!(run.report.agents.len(), 3);
    assert!(run.report.agents.iter().all(|a| a.len() == 200));
    let q = rows.len() / 4;
    let first = mean(&rows[..q], |r| r.violation_rate);
    let last = mean(&rows[rows.len() - q..], |r| r.violation_rate);
    assert!(last < first, "violation rate {first} -> {last}");
}
