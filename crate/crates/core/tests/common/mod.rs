#![allow(dead_code)]

use std::path::PathBuf;

use netslice::orchestrator::{load_config, ExperimentConfig};
use netslice::seeding::{derive_seed, STREAM_ENV};
use netslice::slice_env::{AllocationAction, ScenarioConfig, SliceEnv, SlicingNetwork};

pub fn scenarios_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios")
}

pub fn scenario(name: &str) -> ScenarioConfig {
    ScenarioConfig::load(&scenarios_dir().join(name)).expect("scenario file loads")
}

pub fn experiment(name: &str) -> ExperimentConfig {
    load_config(&scenarios_dir().join(name)).expect("experiment file loads")
}

/// Reset seed of evaluation episode `ep`, mirroring the learner's derivation.
pub fn eval_episode_seed(seed: u64, ep: u64) -> u64 {
    derive_seed(derive_seed(seed, STREAM_ENV), ep)
}

/// Smallest share on a `points`-point grid whose cost is strictly negative in the current state.
pub fn cheapest_safe_share(env: &SliceEnv, points: usize) -> f64 {
    let state = env.state().clone();
    for g in 0..points {
        let share = g as f64 / (points - 1) as f64;
        let action = AllocationAction::from_flat(1, 1, vec![share]).unwrap();
        let (_, _, cost) = env.score(&state, &action);
        if cost < 0.0 {
            return share;
        }
    }
    1.0
}

/// Brute-force constrained optimum of a one-slice, one-domain scenario.
///
/// Returns mean usage and violation rate over the same episodes the learner is
/// evaluated on.
pub fn grid_oracle(scenario: &ScenarioConfig, episodes: usize, len: usize, seed: u64) -> (f64, f64) {
    assert_eq!((scenario.num_slices(), scenario.num_domains()), (1, 1));
    let mut env = SliceEnv::new(scenario.clone()).unwrap();
    let (mut usage, mut violations, mut steps) = (0.0, 0usize, 0usize);
    for ep in 0..episodes {
        env.reset(eval_episode_seed(seed, ep as u64));
        for _ in 0..len {
            let share = cheapest_safe_share(&env, 51);
            let out = env.step(&AllocationAction::from_flat(1, 1, vec![share]).unwrap()).unwrap();
            usage -= out.reward;
            violations += usize::from(out.sla_violated);
            steps += 1;
        }
    }
    (usage / steps as f64, violations as f64 / steps as f64)
}

/// Largest elementwise relative error between an analytic gradient and central differences.
///
/// Entries whose magnitudes both fall below `floor` are compared absolutely against it.
pub fn fd_max_rel_error(params: &[f64], analytic: &[f64], h: f64, floor: f64, mut f: impl FnMut(&[f64]) -> f64) -> f64 {
    assert_eq!(params.len(), analytic.len());
    let mut p = params.to_vec();
    let mut worst = 0.0f64;
    for i in 0..p.len() {
        let orig = p[i];
        p[i] = orig + h;
        let up = f(&p);
        p[i] = orig - h;
        let down = f(&p);
        p[i] = orig;
        let numeric = (up - down) / (2.0 * h);
        let scale = analytic[i].abs().max(numeric.abs()).max(floor);
        worst = worst.max((analytic[i] - numeric).abs() / scale);
    }
    worst
}
