//! Experiment plumbing: domain managers, config files, run directories and reports.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imitation::{bc_train, collect_demonstrations, BcConfig};
use crate::multi_agent::{default_assignments, train_distributed, DEFAULT_REBALANCE_PERIOD};
use crate::neural::save_policy;
use crate::report::{read_report_csv, write_loss_csv, ReportRow, TrainingReport};
use crate::safe::{episode_seed, train_safe_from, SafeConfig};
use crate::seeding::{derive_seed, rng_for, STREAM_MINIBATCH};
use crate::slice_env::{
    baseline_policy, AllocationAction, DomainSpec, NetworkState, ScenarioConfig, SliceEnv, SlicingNetwork,
    StepOutcome,
};

/// What one domain manager reports: its column of rates and backlogs.
#[derive(Debug, Clone, PartialEq)]
pub struct DomainState {
    pub rates: Vec<f64>,
    pub backlogs: Vec<f64>,
}

/// Per-domain controller with a state API and an action API.
#[derive(Debug, Clone)]
pub struct DomainManager {
    pub domain: DomainSpec,
    index: usize,
    pending_action: Option<Vec<f64>>,
    last_state: Option<DomainState>,
}

impl DomainManager {
    pub fn new(domain: DomainSpec, index: usize) -> Self {
        Self {
            domain,
            index,
            pending_action: None,
            last_state: None,
        }
    }

    pub fn read_state(&mut self, state: &NetworkState) -> DomainState {
        let column = |v: &[f64]| (0..state.slices).map(|k| v[k * state.domains + self.index]).collect();
        let s = DomainState {
            rates: column(&state.rates),
            backlogs: column(&state.backlogs),
        };
        self.last_state = Some(s.clone());
        s
    }

    /// Stages this domain's per-slice shares for the next slot.
    pub fn apply_action(&mut self, column: Vec<f64>) -> Result<()> {
        let total: f64 = column.iter().sum();
        if column.iter().any(|a| !(0.0..=1.0).contains(a)) || total > 1.0 + 1e-9 {
            return Err(Error::Infeasible {
                domain: self.index,
                total,
            });
        }
        self.pending_action = Some(column);
        Ok(())
    }

    pub fn last_state(&self) -> Option<&DomainState> {
        self.last_state.as_ref()
    }

    fn take_pending(&mut self) -> Option<Vec<f64>> {
        self.pending_action.take()
    }
}

/// A [`SliceEnv`] that is only driven through its domain managers.
#[derive(Debug, Clone)]
pub struct ManagedNetwork {
    env: SliceEnv,
    managers: Vec<DomainManager>,
    applied: u64,
}

impl ManagedNetwork {
    pub fn new(scenario: ScenarioConfig) -> Result<Self> {
        let managers = scenario
            .domains
            .iter()
            .enumerate()
            .map(|(i, d)| DomainManager::new(d.clone(), i))
            .collect();
        Ok(Self {
            env: SliceEnv::new(scenario)?,
            managers,
            applied: 0,
        })
    }

    pub fn managers(&self) -> &[DomainManager] {
        &self.managers
    }

    /// Number of slots committed through the managers.
    pub fn applied_actions(&self) -> u64 {
        self.applied
    }
}

impl SlicingNetwork for ManagedNetwork {
    fn scenario(&self) -> &ScenarioConfig {
        self.env.scenario()
    }

    fn reset(&mut self, seed: u64) -> NetworkState {
        let state = self.env.reset(seed);
        for m in &mut self.managers {
            m.read_state(&state);
        }
        state
    }

    fn state(&self) -> &NetworkState {
        self.env.state()
    }

    fn apply(&mut self, action: &AllocationAction) -> Result<StepOutcome> {
        for (d, m) in self.managers.iter_mut().enumerate() {
            m.apply_action(action.column(d))?;
        }
        let mut committed = AllocationAction::zeros(action.num_slices(), action.num_domains());
        for (d, m) in self.managers.iter_mut().enumerate() {
            let column = m.take_pending().expect("staged above");
            committed.set_column(d, &column);
        }
        let outcome = self.env.step(&committed)?;
        self.applied += 1;
        for m in &mut self.managers {
            m.read_state(&outcome.next_state);
        }
        Ok(outcome)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Algorithm {
    #[serde(rename = "safe")]
    Safe,
    #[serde(rename = "distributed")]
    Distributed,
    #[serde(rename = "imitation+safe")]
    ImitationSafe,
    #[serde(rename = "baseline-only")]
    BaselineOnly,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Safe => "safe",
            Algorithm::Distributed => "distributed",
            Algorithm::ImitationSafe => "imitation+safe",
            Algorithm::BaselineOnly => "baseline-only",
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        serde_json::from_value(serde_json::Value::String(name.into()))
            .map_err(|_| Error::Config(format!("unknown algorithm \"{name}\"")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DistributedSettings {
    pub rebalance_period: usize,
}

impl Default for DistributedSettings {
    fn default() -> Self {
        Self {
            rebalance_period: DEFAULT_REBALANCE_PERIOD,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ImitationSettings {
    pub steps_per_seed: usize,
    /// Collection seeds; demonstrations are also offset by the cell seed.
    pub demo_seeds: Vec<u64>,
    pub bc: BcConfig,
}

impl Default for ImitationSettings {
    fn default() -> Self {
        Self {
            steps_per_seed: 1000,
            demo_seeds: (0..10).collect(),
            bc: BcConfig::default(),
        }
    }
}

/// An experiment file. Relative scenario paths are resolved against the file's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scenario: PathBuf,
    pub algorithm: Algorithm,
    pub seeds: Vec<u64>,
    /// Overrides `safe.iterations` when present.
    #[serde(default)]
    pub iterations: Option<usize>,
    #[serde(default)]
    pub safe: SafeConfig,
    #[serde(default)]
    pub distributed: DistributedSettings,
    #[serde(default)]
    pub imitation: ImitationSettings,
}

impl ExperimentConfig {
    /// Safe-learner settings with the top-level iteration override applied.
    pub fn effective_safe(&self) -> SafeConfig {
        let mut cfg = self.safe.clone();
        if let Some(it) = self.iterations {
            cfg.iterations = it;
        }
        cfg
    }

    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(Error::Config("seeds: at least one seed is required".into()));
        }
        self.effective_safe().validate()?;
        if self.distributed.rebalance_period == 0 {
            return Err(Error::Config("distributed.rebalance_period must be at least 1".into()));
        }
        if self.algorithm == Algorithm::ImitationSafe
            && (self.imitation.steps_per_seed == 0 || self.imitation.demo_seeds.is_empty())
        {
            return Err(Error::Config("imitation needs steps_per_seed ≥ 1 and at least one demo seed".into()));
        }
        Ok(())
    }

    pub fn from_json_str(text: &str, origin: &Path) -> Result<Self> {
        let mut cfg: ExperimentConfig = serde_json::from_str(text).map_err(|e| Error::Parse {
            path: origin.to_path_buf(),
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        if cfg.scenario.is_relative() {
            if let Some(dir) = origin.parent() {
                cfg.scenario = dir.join(&cfg.scenario);
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load_scenario(&self) -> Result<ScenarioConfig> {
        ScenarioConfig::load(&self.scenario)
    }
}

/// Reads, defaults and validates an experiment file, including its scenario.
pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    let cfg = ExperimentConfig::from_json_str(&text, path)?;
    cfg.load_scenario()?;
    Ok(cfg)
}

pub const MANIFEST_FORMAT: &str = "netslice-manifest";

/// Everything needed to reproduce one (algorithm, seed) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub format: String,
    pub version: u32,
    pub crate_version: String,
    pub algorithm: Algorithm,
    pub seed: u64,
    pub config: ExperimentConfig,
    pub scenario: ScenarioConfig,
    pub scenario_hash: String,
    pub status: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl Manifest {
    pub fn new(config: &ExperimentConfig, scenario: &ScenarioConfig, seed: u64) -> Self {
        Self {
            format: MANIFEST_FORMAT.into(),
            version: 1,
            crate_version: env!("CARGO_PKG_VERSION").into(),
            algorithm: config.algorithm,
            seed,
            config: config.clone(),
            scenario: scenario.clone(),
            scenario_hash: scenario.hash(),
            status: "running".into(),
            error: None,
        }
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, serde_json::to_string_pretty(self)? + "\n")?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        let m: Manifest = serde_json::from_str(&text).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        if m.format != MANIFEST_FORMAT {
            return Err(Error::Schema(format!("{} is not a run manifest", path.display())));
        }
        Ok(m)
    }
}

#[derive(Debug, Clone)]
pub struct CellResult {
    pub algorithm: Algorithm,
    pub seed: u64,
    pub dir: PathBuf,
    pub report: TrainingReport,
}

/// Directory name of one cell, e.g. `safe-seed3`.
pub fn cell_dir_name(algorithm: Algorithm, seed: u64) -> String {
    format!("{}-seed{seed}", algorithm.name())
}

/// Runs every seed of `config`, writing one directory per cell under `out`.
///
/// Each directory holds `report.csv`, `manifest.json` and the trained
/// checkpoints; distributed runs add `agents.csv`, imitation runs add
/// `bc_loss.csv`. A failing cell still writes its partial report and a
/// manifest with `status: "failed"`; the first failure is returned after all
/// cells ran.
pub fn run_experiment(config: &ExperimentConfig, out: &Path) -> Result<Vec<CellResult>> {
    config.validate()?;
    let scenario = config.load_scenario()?;
    let mut results = Vec::with_capacity(config.seeds.len());
    let mut first_error = None;
    for &seed in &config.seeds {
        let dir = out.join(cell_dir_name(config.algorithm, seed));
        fs::create_dir_all(&dir)?;
        let mut manifest = Manifest::new(config, &scenario, seed);
        manifest.write(&dir.join("manifest.json"))?;
        match run_cell(config, &scenario, seed, &dir) {
            Ok(report) => {
                report.write_csv(&dir.join("report.csv"))?;
                manifest.status = "ok".into();
                manifest.write(&dir.join("manifest.json"))?;
                results.push(CellResult {
                    algorithm: config.algorithm,
                    seed,
                    dir,
                    report,
                });
            }
            Err(err) => {
                if let Error::Training { partial, .. } = &err {
                    partial.write_csv(&dir.join("report.csv"))?;
                }
                manifest.status = "failed".into();
                manifest.error = Some(err.to_string());
                manifest.write(&dir.join("manifest.json"))?;
                first_error.get_or_insert(err);
            }
        }
    }
    match first_error {
        Some(err) => Err(err),
        None => Ok(results),
    }
}

fn run_cell(config: &ExperimentConfig, scenario: &ScenarioConfig, seed: u64, dir: &Path) -> Result<TrainingReport> {
    let safe = config.effective_safe();
    let mut net = ManagedNetwork::new(scenario.clone())?;
    match config.algorithm {
        Algorithm::Safe => {
            let (report, agent) = train_safe_from(&mut net, &safe, seed, None)?;
            save_policy(&dir.join("policy.ckpt"), &agent.policy)?;
            Ok(report)
        }
        Algorithm::Distributed => {
            let assignments = match &scenario.agents {
                Some(a) => a.resolve(scenario)?,
                None => default_assignments(scenario),
            };
            let run = train_distributed(&mut net, assignments, &safe, config.distributed.rebalance_period, seed)?;
            for (i, agent) in run.agents.iter().enumerate() {
                save_policy(&dir.join(format!("agent_{i}.ckpt")), &agent.policy)?;
            }
            if run.agents.len() > 1 {
                run.report.write_agents_csv(&dir.join("agents.csv"))?;
            }
            Ok(run.report)
        }
        Algorithm::ImitationSafe => {
            let demo_seeds: Vec<u64> = config.imitation.demo_seeds.iter().map(|s| derive_seed(seed, *s)).collect();
            let demos = collect_demonstrations(&mut net, config.imitation.steps_per_seed, &demo_seeds)?;
            let mut policy = crate::neural::GaussianPolicy::new(
                scenario.obs_dim(),
                scenario.action_dim(),
                &safe.hidden,
                safe.exploration.sigma,
                &mut rng_for(seed, crate::seeding::STREAM_POLICY_INIT),
            );
            policy.set_output_bias(crate::neural::initial_share_bias(scenario.num_slices()));
            let losses = bc_train(
                &mut policy,
                &demos,
                scenario.num_slices(),
                scenario.num_domains(),
                &config.imitation.bc,
                &mut rng_for(seed, STREAM_MINIBATCH),
            );
            let losses = match losses {
                Ok(l) => l,
                Err(Error::Diverged { losses }) => {
                    write_loss_csv(&dir.join("bc_loss.csv"), &losses)?;
                    return Err(Error::Diverged { losses });
                }
                Err(e) => return Err(e),
            };
            write_loss_csv(&dir.join("bc_loss.csv"), &losses)?;
            save_policy(&dir.join("bc_policy.ckpt"), &policy)?;
            policy.reset_log_std(safe.exploration.sigma);
            let (report, agent) = train_safe_from(&mut net, &safe, seed, Some(policy))?;
            save_policy(&dir.join("policy.ckpt"), &agent.policy)?;
            Ok(report)
        }
        Algorithm::BaselineOnly => run_baseline(&mut net, &safe, seed),
    }
}

/// Runs the baseline with the training schedule so its report lines up with learners'.
pub fn run_baseline<N: SlicingNetwork>(net: &mut N, config: &SafeConfig, seed: u64) -> Result<TrainingReport> {
    let scenario = net.scenario().clone();
    let mut report = TrainingReport::default();
    let mut episode = 0u64;
    let mut episode_step = 0usize;
    for iteration in 0..config.iterations {
        let (mut reward, mut cost, mut violations) = (0.0, 0.0, 0usize);
        for _ in 0..config.rollout_len {
            if episode_step == 0 {
                net.reset(episode_seed(seed, episode));
            }
            let action = baseline_policy(net.state(), &scenario, scenario.headroom).action;
            let outcome = net.apply(&action)?;
            reward += outcome.reward;
            cost += outcome.cost;
            violations += usize::from(outcome.sla_violated);
            episode_step += 1;
            if episode_step == config.episode_len {
                episode_step = 0;
                episode += 1;
            }
        }
        let n = config.rollout_len as f64;
        report.total_steps += config.rollout_len;
        report.baseline_steps += config.rollout_len;
        report.rows.push(ReportRow {
            iteration,
            mean_reward: reward / n,
            mean_cost: cost / n,
            violation_rate: violations as f64 / n,
            lambda: 0.0,
            switch_rate: 1.0,
        });
    }
    Ok(report)
}

/// Empirical CDF of the per-iteration violation rates of one report.
#[derive(Debug, Clone, PartialEq)]
pub struct ViolationCdf {
    pub source: String,
    /// `(violation level, cumulative probability)`, ascending by level.
    pub points: Vec<(f64, f64)>,
}

impl ViolationCdf {
    /// `P(rate ≤ level)`.
    pub fn at(&self, level: f64) -> f64 {
        self.points
            .iter()
            .take_while(|(l, _)| *l <= level)
            .last()
            .map_or(0.0, |(_, p)| *p)
    }
}

pub fn empirical_cdf(source: &str, rates: &[f64]) -> ViolationCdf {
    let mut sorted = rates.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let mut points: Vec<(f64, f64)> = Vec::new();
    for (i, r) in sorted.iter().enumerate() {
        let p = (i + 1) as f64 / n;
        match points.last_mut() {
            Some(last) if last.0 == *r => last.1 = p,
            _ => points.push((*r, p)),
        }
    }
    ViolationCdf {
        source: source.into(),
        points,
    }
}

/// Reads each report (rejecting foreign schemas) and builds its violation CDF.
pub fn violation_cdf(reports: &[PathBuf]) -> Result<Vec<ViolationCdf>> {
    reports
        .iter()
        .map(|path| {
            let rows = read_report_csv(path)?;
            let rates: Vec<f64> = rows.iter().map(|r| r.violation_rate).collect();
            Ok(empirical_cdf(&path.display().to_string(), &rates))
        })
        .collect()
}

pub fn write_cdf_csv(path: &Path, tables: &[ViolationCdf]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["source", "violation_level", "cumulative_probability"])?;
    for t in tables {
        for (level, p) in &t.points {
            w.write_record([t.source.clone(), level.to_string(), p.to_string()])?;
        }
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::slice_env::scenario::tests::two_slice;

    #[test]
    fn two_point_cdf() {
        let cdf = empirical_cdf("x", &[0.2, 0.1]);
        assert_eq!(cdf.points, vec![(0.1, 0.5), (0.2, 1.0)]);
        assert_eq!(cdf.at(0.15), 0.5);
        assert_eq!(cdf.at(0.05), 0.0);
    }

    #[test]
    fn zero_violation_cdf() {
        let cdf = empirical_cdf("x", &[0.0, 0.0, 0.0]);
        assert_eq!(cdf.points, vec![(0.0, 1.0)]);
    }

    #[test]
    fn managers_are_the_only_write_path() {
        let scenario = two_slice();
        let mut net = ManagedNetwork::new(scenario.clone()).unwrap();
        net.reset(1);
        for _ in 0..7 {
            let a = baseline_policy(net.state(), &scenario, scenario.headroom).action;
            net.apply(&a).unwrap();
        }
        assert_eq!(net.applied_actions(), 7);
        let m = &net.managers()[2];
        let state = net.state();
        assert_eq!(m.last_state().unwrap().rates[1], state.rate(1, 2));
    }

    #[test]
    fn managed_matches_plain_env() {
        let scenario = two_slice();
        let mut plain = SliceEnv::new(scenario.clone()).unwrap();
        let mut managed = ManagedNetwork::new(scenario.clone()).unwrap();
        plain.reset(4);
        managed.reset(4);
        for _ in 0..20 {
            let a = baseline_policy(plain.state(), &scenario, 1.0).action;
            assert_eq!(plain.apply(&a).unwrap(), managed.apply(&a).unwrap());
        }
    }

    #[test]
    fn infeasible_column_rejected_by_manager() {
        let spec = two_slice().domains[0].clone();
        let mut m = DomainManager::new(spec, 0);
        assert!(m.apply_action(vec![0.7, 0.6]).is_err());
        assert!(m.apply_action(vec![0.5, 0.5]).is_ok());
    }

    #[test]
    fn algorithm_names_round_trip() {
        for a in [Algorithm::Safe, Algorithm::Distributed, Algorithm::ImitationSafe, Algorithm::BaselineOnly] {
            assert_eq!(Algorithm::parse(a.name()).unwrap(), a);
        }
        assert!(Algorithm::parse("ppo").is_err());
    }
}
