use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::{AllocationAction, NetworkState, ScenarioConfig, SliceSpec, StepOutcome, EPS_THROUGHPUT, SLOT_SECONDS};
use crate::error::{Error, Result};
use crate::seeding::{rng_for, STREAM_ENV};

/// Anything that can be reset, observed and driven with allocations.
///
/// Implemented by the raw [`SliceEnv`] and by the orchestrator's managed
/// network, which routes every allocation through its domain managers.
pub trait SlicingNetwork {
    fn scenario(&self) -> &ScenarioConfig;
    fn reset(&mut self, seed: u64) -> NetworkState;
    fn state(&self) -> &NetworkState;
    fn apply(&mut self, action: &AllocationAction) -> Result<StepOutcome>;

    /// Normalised observation of the current state.
    fn observe(&self) -> Vec<f64> {
        SliceEnv::observe_state(self.scenario(), self.state())
    }
}

/// Per-slot performance of an allocation in a given state, before any transition.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    /// Offered load per (slice, domain) including carried backlog, jobs/s.
    pub offered: Vec<f64>,
    /// Served rate per (slice, domain), jobs/s.
    pub served: Vec<f64>,
    pub domain_latency: Vec<f64>,
    pub latency: Vec<f64>,
    pub throughput: Vec<f64>,
}

/// Latency and throughput of every slice under `action` in `state`.
pub fn evaluate(scenario: &ScenarioConfig, state: &NetworkState, action: &AllocationAction) -> Evaluation {
    let (ns, nd) = (scenario.num_slices(), scenario.num_domains());
    let mut offered = vec![0.0; ns * nd];
    let mut served = vec![0.0; ns * nd];
    let mut domain_latency = vec![0.0; ns * nd];
    let mut latency = vec![0.0; ns];
    let mut throughput = vec![f64::INFINITY; ns];
    for k in 0..ns {
        for (d, domain) in scenario.domains.iter().enumerate() {
            let i = k * nd + d;
            let load = (state.rates[i] + state.backlogs[i] / SLOT_SECONDS).min(domain.full_rate());
            let service = domain.full_rate() * action.share(k, d);
            let l = if service > load {
                (1.0 / (service - load)).min(scenario.l_max)
            } else {
                scenario.l_max
            };
            offered[i] = load;
            served[i] = load.min(service);
            domain_latency[i] = l;
            latency[k] += l;
            throughput[k] = throughput[k].min(served[i]);
        }
    }
    Evaluation {
        offered,
        served,
        domain_latency,
        latency,
        throughput,
    }
}

/// `−Σ_m w_m Σ_k a[k][m]`.
pub fn reward_fn(action: &AllocationAction, weights: &[f64]) -> f64 {
    -action.total_usage(weights)
}

/// `(tp_min − tp) / tp_min`; best-effort slices (`tp_min = 0`) contribute `−∞`.
pub fn throughput_margin(spec: &SliceSpec, tp: f64) -> f64 {
    if spec.min_throughput > 0.0 {
        (spec.min_throughput - tp) / spec.min_throughput.max(EPS_THROUGHPUT)
    } else {
        f64::NEG_INFINITY
    }
}

/// Worst normalised SLA margin over slices; `≤ 0` iff every latency and throughput target is met.
pub fn cost_fn(latency: &[f64], throughput: &[f64], specs: &[SliceSpec]) -> f64 {
    specs
        .iter()
        .zip(latency.iter().zip(throughput))
        .map(|(spec, (&l, &tp))| {
            let latency_margin = (l - spec.latency_bound) / spec.latency_bound;
            latency_margin.max(throughput_margin(spec, tp))
        })
        .fold(f64::NEG_INFINITY, f64::max)
}

/// The simulator. Deterministic for a given `(seed, scenario, action sequence)`.
#[derive(Debug, Clone)]
pub struct SliceEnv {
    scenario: ScenarioConfig,
    rng: ChaCha8Rng,
    state: NetworkState,
}

impl SliceEnv {
    pub fn new(scenario: ScenarioConfig) -> Result<Self> {
        scenario.validate()?;
        let mut rng = rng_for(0, STREAM_ENV);
        let state = Self::initial_state(&scenario, &mut rng);
        Ok(Self { scenario, rng, state })
    }

    fn sample_rates(scenario: &ScenarioConfig, t: u64, rng: &mut ChaCha8Rng) -> Vec<f64> {
        let nd = scenario.num_domains();
        let mut rates = Vec::with_capacity(scenario.num_slices() * nd);
        for slice in &scenario.slices {
            let z: f64 = rng.sample(StandardNormal);
            let rate = (slice.traffic.deterministic_rate(t) + slice.traffic.noise_std * z).max(0.0);
            rates.extend(std::iter::repeat_n(rate, nd));
        }
        rates
    }

    fn initial_state(scenario: &ScenarioConfig, rng: &mut ChaCha8Rng) -> NetworkState {
        let (ns, nd) = (scenario.num_slices(), scenario.num_domains());
        NetworkState {
            t: 0,
            slices: ns,
            domains: nd,
            rates: Self::sample_rates(scenario, 0, rng),
            backlogs: vec![0.0; ns * nd],
        }
    }

    /// Rates divided by the domain's full service rate, then backlogs likewise (per slot).
    pub fn observe_state(scenario: &ScenarioConfig, state: &NetworkState) -> Vec<f64> {
        let nd = scenario.num_domains();
        let scale = |i: usize| scenario.domains[i % nd].full_rate();
        let mut obs = Vec::with_capacity(scenario.obs_dim());
        obs.extend(state.rates.iter().enumerate().map(|(i, r)| r / scale(i)));
        obs.extend(
            state
                .backlogs
                .iter()
                .enumerate()
                .map(|(i, b)| b / (scale(i) * SLOT_SECONDS)),
        );
        obs
    }

    /// Performance, reward and cost of `action` in `state` without advancing time.
    pub fn score(&self, state: &NetworkState, action: &AllocationAction) -> (Evaluation, f64, f64) {
        let eval = evaluate(&self.scenario, state, action);
        let reward = reward_fn(action, &self.scenario.weights);
        let cost = cost_fn(&eval.latency, &eval.throughput, &self.scenario.slices);
        (eval, reward, cost)
    }

    fn check_action(&self, action: &AllocationAction) -> Result<()> {
        if action.num_slices() != self.scenario.num_slices() || action.num_domains() != self.scenario.num_domains() {
            return Err(Error::Dimension {
                context: "SliceEnv::step action",
                expected: self.scenario.action_dim(),
                got: action.flat().len(),
            });
        }
        action.validate()
    }

    pub fn step(&mut self, action: &AllocationAction) -> Result<StepOutcome> {
        self.check_action(action)?;
        let (eval, reward, cost) = self.score(&self.state, action);
        let backlogs: Vec<f64> = self
            .state
            .rates
            .iter()
            .zip(&self.state.backlogs)
            .zip(&eval.served)
            .map(|((rate, backlog), served)| (backlog + (rate - served) * SLOT_SECONDS).max(0.0))
            .collect();
        let t = self.state.t + 1;
        let rates = Self::sample_rates(&self.scenario, t, &mut self.rng);
        self.state = NetworkState {
            t,
            slices: self.state.slices,
            domains: self.state.domains,
            rates,
            backlogs,
        };
        Ok(StepOutcome {
            next_state: self.state.clone(),
            reward,
            cost,
            per_slice_latency: eval.latency,
            per_slice_throughput: eval.throughput,
            domain_latency: eval.domain_latency,
            domain_throughput: eval.served,
            sla_violated: cost >= 0.0,
        })
    }
}

impl SlicingNetwork for SliceEnv {
    fn scenario(&self) -> &ScenarioConfig {
        &self.scenario
    }

    fn reset(&mut self, seed: u64) -> NetworkState {
        self.rng = rng_for(seed, STREAM_ENV);
        self.state = Self::initial_state(&self.scenario, &mut self.rng);
        self.state.clone()
    }

    fn state(&self) -> &NetworkState {
        &self.state
    }

    fn apply(&mut self, action: &AllocationAction) -> Result<StepOutcome> {
        self.step(action)
    }
}
