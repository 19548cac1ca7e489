//! Behaviour-cloning warm start from the rule-based baseline.
//!
//! The policy mean is regressed onto the baseline's shares in the feasible
//! (projected) space; only the mean network is fitted.

use std::path::Path;

use rand::Rng;

use crate::error::{Error, Result};
use crate::mdp::{minibatches, read_records, write_records, RecordHeader, Transition};
use crate::neural::{grad_step, project_action, project_action_vjp, GaussianPolicy, Optimizer, OptimizerKind};
use crate::slice_env::{baseline_policy, AllocationAction, NetworkState, ScenarioConfig, SliceEnv, SlicingNetwork};

/// One (normalised observation, baseline shares) pair.
#[derive(Debug, Clone, PartialEq)]
pub struct Demonstration {
    pub state: Vec<f64>,
    pub action: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DemonstrationSet {
    pub records: Vec<Demonstration>,
    pub scenario_hash: String,
    pub seeds: Vec<u64>,
}

impl DemonstrationSet {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Writes the set in the trajectory record format (shares as the action).
    pub fn save(&self, path: &Path) -> Result<()> {
        let (sd, ad) = self
            .records
            .first()
            .map(|r| (r.state.len(), r.action.len()))
            .unwrap_or((0, 0));
        let header = RecordHeader::new(self.scenario_hash.clone(), self.seeds.clone(), sd, ad);
        let transitions: Vec<Transition> = self
            .records
            .iter()
            .map(|r| Transition {
                state_vec: r.state.clone(),
                action_vec: r.action.clone(),
                logp: 0.0,
                reward: 0.0,
                cost: 0.0,
                done: false,
            })
            .collect();
        write_records(path, &header, &transitions)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let (header, transitions) = read_records(path)?;
        Ok(Self {
            records: transitions
                .into_iter()
                .map(|t| Demonstration {
                    state: t.state_vec,
                    action: t.action_vec,
                })
                .collect(),
            scenario_hash: header.scenario_hash,
            seeds: header.seeds,
        })
    }
}

/// Rolls out the baseline for `steps_per_seed` slots after resetting with each seed.
pub fn collect_demonstrations<N: SlicingNetwork>(
    net: &mut N,
    steps_per_seed: usize,
    seeds: &[u64],
) -> Result<DemonstrationSet> {
    if steps_per_seed == 0 || seeds.is_empty() {
        return Err(Error::Config("demonstration collection needs at least one step and one seed".into()));
    }
    let scenario = net.scenario().clone();
    let mut records = Vec::with_capacity(steps_per_seed * seeds.len());
    for &seed in seeds {
        net.reset(seed);
        for _ in 0..steps_per_seed {
            let state = net.state().clone();
            let action = baseline_policy(&state, &scenario, scenario.headroom).action;
            records.push(Demonstration {
                state: SliceEnv::observe_state(&scenario, &state),
                action: action.flat().to_vec(),
            });
            net.apply(&action)?;
        }
    }
    Ok(DemonstrationSet {
        records,
        scenario_hash: scenario.hash(),
        seeds: seeds.to_vec(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BcConfig {
    pub epochs: usize,
    pub lr: f64,
    pub batch_size: usize,
    pub optimizer: OptimizerKind,
}

impl Default for BcConfig {
    fn default() -> Self {
        Self {
            epochs: 50,
            lr: 1e-3,
            batch_size: 64,
            optimizer: OptimizerKind::Adam,
        }
    }
}

/// Fits the policy mean so that its projected action matches the demonstrations.
///
/// Returns the mean per-element squared error of every epoch, averaged over
/// that epoch's minibatches. A non-finite loss or gradient stops training with
/// [`Error::Diverged`] carrying the trace so far.
pub fn bc_train<R: Rng + ?Sized>(
    policy: &mut GaussianPolicy,
    demos: &DemonstrationSet,
    slices: usize,
    domains: usize,
    config: &BcConfig,
    rng: &mut R,
) -> Result<Vec<f64>> {
    if demos.is_empty() {
        return Err(Error::Config("demonstration set is empty".into()));
    }
    if config.batch_size == 0 || !(config.lr >= 0.0 && config.lr.is_finite()) {
        return Err(Error::Config("bc batch_size must be positive and lr finite and non-negative".into()));
    }
    let act_dim = slices * domains;
    for r in &demos.records {
        if r.action.len() != act_dim || policy.act_dim() != act_dim {
            return Err(Error::Dimension {
                context: "demonstration action",
                expected: policy.act_dim(),
                got: r.action.len(),
            });
        }
        if r.state.len() != policy.obs_dim() {
            return Err(Error::Dimension {
                context: "demonstration state",
                expected: policy.obs_dim(),
                got: r.state.len(),
            });
        }
    }
    let mut opt = Optimizer::new(config.optimizer, policy.mean_net.num_params());
    let mut trace = Vec::with_capacity(config.epochs);
    for _ in 0..config.epochs {
        let mut epoch_loss = 0.0;
        let batches = minibatches(demos.len(), config.batch_size, rng);
        for batch in &batches {
            let mut grad = vec![0.0; policy.mean_net.num_params()];
            let scale = 1.0 / (batch.len() * act_dim) as f64;
            let mut loss = 0.0;
            for &i in batch {
                let demo = &demos.records[i];
                let t = policy.mean_net.forward_trace(&demo.state)?;
                let projected = project_action(t.output(), slices, domains)?;
                let diff: Vec<f64> = projected.flat().iter().zip(&demo.action).map(|(p, a)| p - a).collect();
                loss += diff.iter().map(|d| d * d).sum::<f64>() * scale;
                let upstream: Vec<f64> = diff.iter().map(|d| 2.0 * d).collect();
                let d_raw = project_action_vjp(t.output(), slices, domains, &upstream)?;
                policy.mean_net.accumulate_backward(&t, &d_raw, scale, &mut grad)?;
            }
            if !loss.is_finite() || grad_step(policy.mean_net.params_mut(), &grad, &mut opt, config.lr).is_err() {
                return Err(Error::Diverged { losses: trace });
            }
            epoch_loss += loss;
        }
        trace.push(epoch_loss / batches.len() as f64);
    }
    Ok(trace)
}

/// Anything that maps a network state to an allocation.
pub trait AllocationPolicy {
    fn act(&self, state: &NetworkState, scenario: &ScenarioConfig) -> Result<AllocationAction>;
}

/// The rule-based baseline at the scenario's headroom.
#[derive(Debug, Clone, Copy, Default)]
pub struct Baseline;

impl AllocationPolicy for Baseline {
    fn act(&self, state: &NetworkState, scenario: &ScenarioConfig) -> Result<AllocationAction> {
        Ok(baseline_policy(state, scenario, scenario.headroom).action)
    }
}

/// Deterministic mean action.
impl AllocationPolicy for GaussianPolicy {
    fn act(&self, state: &NetworkState, scenario: &ScenarioConfig) -> Result<AllocationAction> {
        let mean = self.mean(&SliceEnv::observe_state(scenario, state))?;
        project_action(&mean, scenario.num_slices(), scenario.num_domains())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImitationEval {
    /// Mean weighted usage per step (`−reward`).
    pub policy_usage: f64,
    pub baseline_usage: f64,
    /// Mean absolute share difference to the baseline, over the policy's own states.
    pub mean_action_gap: f64,
    pub policy_violation_rate: f64,
}

/// Runs `policy` and the baseline on the same seeds for `episodes × episode_len` slots each.
pub fn evaluate_imitation<N: SlicingNetwork, P: AllocationPolicy>(
    policy: &P,
    net: &mut N,
    episodes: usize,
    episode_len: usize,
    seed: u64,
) -> Result<ImitationEval> {
    if episodes == 0 || episode_len == 0 {
        return Err(Error::Config("evaluation needs at least one episode of one step".into()));
    }
    let scenario = net.scenario().clone();
    let run = |net: &mut N, p: &dyn AllocationPolicy| -> Result<(f64, f64, f64)> {
        let (mut usage, mut gap, mut violations) = (0.0, 0.0, 0usize);
        for ep in 0..episodes {
            net.reset(crate::safe::episode_seed(seed, ep as u64));
            for _ in 0..episode_len {
                let state = net.state().clone();
                let action = p.act(&state, &scenario)?;
                let reference = Baseline.act(&state, &scenario)?;
                gap += action
                    .flat()
                    .iter()
                    .zip(reference.flat())
                    .map(|(a, b)| (a - b).abs())
                    .sum::<f64>()
                    / action.flat().len() as f64;
                let outcome = net.apply(&action)?;
                usage -= outcome.reward;
                violations += usize::from(outcome.sla_violated);
            }
        }
        let n = (episodes * episode_len) as f64;
        Ok((usage / n, gap / n, violations as f64 / n))
    };
    let (policy_usage, mean_action_gap, policy_violation_rate) = run(net, policy)?;
    let (baseline_usage, _, _) = run(net, &Baseline)?;
    Ok(ImitationEval {
        policy_usage,
        baseline_usage,
        mean_action_gap,
        policy_violation_rate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seeding::rng_for;
    use crate::slice_env::scenario::tests::two_slice;

    fn env() -> SliceEnv {
        SliceEnv::new(two_slice()).unwrap()
    }

    #[test]
    fn zero_steps_rejected() {
        assert!(collect_demonstrations(&mut env(), 0, &[1]).is_err());
    }

    #[test]
    fn collection_is_deterministic_and_feasible() {
        let a = collect_demonstrations(&mut env(), 50, &[1, 2]).unwrap();
        let b = collect_demonstrations(&mut env(), 50, &[1, 2]).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 100);
        for r in &a.records {
            assert!(AllocationAction::from_flat(2, 4, r.action.clone()).is_ok());
        }
        assert_eq!(a.scenario_hash, two_slice().hash());
    }

    #[test]
    fn baseline_against_itself() {
        let e = evaluate_imitation(&Baseline, &mut env(), 2, 20, 5).unwrap();
        assert_eq!(e.policy_usage, e.baseline_usage);
        assert_eq!(e.mean_action_gap, 0.0);
    }

    #[test]
    fn zero_lr_leaves_policy_unchanged() {
        let demos = collect_demonstrations(&mut env(), 20, &[1]).unwrap();
        let mut rng = rng_for(0, 1);
        let mut policy = GaussianPolicy::new(16, 8, &[16], 0.3, &mut rng);
        let before = policy.clone();
        let cfg = BcConfig {
            epochs: 5,
            lr: 0.0,
            ..BcConfig::default()
        };
        let losses = bc_train(&mut policy, &demos, 2, 4, &cfg, &mut rng).unwrap();
        assert_eq!(losses.len(), 5);
        assert!(losses.iter().all(|l| *l >= 0.0));
        assert_eq!(policy, before);
    }

    #[test]
    fn single_demo_overfits() {
        let mut demos = collect_demonstrations(&mut env(), 1, &[1]).unwrap();
        demos.records = vec![demos.records[0].clone(); 8];
        let mut rng = rng_for(1, 1);
        let mut policy = GaussianPolicy::new(16, 8, &[16], 0.3, &mut rng);
        policy.set_output_bias(crate::neural::initial_share_bias(2));
        let cfg = BcConfig {
            epochs: 500,
            lr: 1e-2,
            batch_size: 8,
            ..BcConfig::default()
        };
        let losses = bc_train(&mut policy, &demos, 2, 4, &cfg, &mut rng).unwrap();
        assert!(*losses.last().unwrap() < 1e-4, "{:?}", losses.last());
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let demos = collect_demonstrations(&mut env(), 5, &[1]).unwrap();
        let mut rng = rng_for(0, 1);
        let mut policy = GaussianPolicy::new(16, 4, &[8], 0.3, &mut rng);
        assert!(bc_train(&mut policy, &demos, 2, 4, &BcConfig::default(), &mut rng).is_err());
    }

    #[test]
    fn save_load_round_trip() {
        let demos = collect_demonstrations(&mut env(), 10, &[3]).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("demos.jsonl");
        demos.save(&path).unwrap();
        assert_eq!(DemonstrationSet::load(&path).unwrap(), demos);
    }
}
