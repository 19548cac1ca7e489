//! Transitions, trajectories and return/advantage estimation.
//!
//! Rewards and constraint costs are carried as two parallel streams; each
//! gets its own value baseline and generalised advantage estimate.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One step of experience. Serialised field order: `state_vec, action_vec, logp, reward, cost, done`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub state_vec: Vec<f64>,
    pub action_vec: Vec<f64>,
    pub logp: f64,
    pub reward: f64,
    pub cost: f64,
    pub done: bool,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Trajectory {
    pub transitions: Vec<Transition>,
    pub reward_advantages: Vec<f64>,
    pub cost_advantages: Vec<f64>,
    pub reward_returns: Vec<f64>,
    pub cost_returns: Vec<f64>,
}

impl Trajectory {
    pub fn new(transitions: Vec<Transition>) -> Self {
        Self {
            transitions,
            ..Self::default()
        }
    }

    pub fn len(&self) -> usize {
        self.transitions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transitions.is_empty()
    }

    pub fn has_advantages(&self) -> bool {
        let n = self.len();
        self.reward_advantages.len() == n
            && self.cost_advantages.len() == n
            && self.reward_returns.len() == n
            && self.cost_returns.len() == n
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiscountConfig {
    pub gamma: f64,
    pub lambda_gae: f64,
}

impl Default for DiscountConfig {
    fn default() -> Self {
        Self {
            gamma: 0.99,
            lambda_gae: 0.95,
        }
    }
}

impl DiscountConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.gamma) {
            return Err(Error::Config(format!("gamma must lie in [0, 1), got {}", self.gamma)));
        }
        if !(0.0..=1.0).contains(&self.lambda_gae) {
            return Err(Error::Config(format!(
                "lambda_gae must lie in [0, 1], got {}",
                self.lambda_gae
            )));
        }
        Ok(())
    }
}

/// Discounted returns `G_t = r_t + γ G_{t+1}`, with `G_last = r_last`.
pub fn compute_returns(rewards: &[f64], gamma: f64) -> Vec<f64> {
    let mut out = vec![0.0; rewards.len()];
    let mut acc = 0.0;
    for (o, r) in out.iter_mut().zip(rewards).rev() {
        acc = r + gamma * acc;
        *o = acc;
    }
    out
}

/// Generalised advantage estimation over one signal stream.
///
/// `values` has one more entry than `signal`: the bootstrap value of the state
/// after the last transition. A `done` flag cuts both the bootstrap and the trace.
/// Returns `(advantages, value targets)`.
pub fn gae(signal: &[f64], dones: &[bool], values: &[f64], config: &DiscountConfig) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = signal.len();
    if values.len() != n + 1 {
        return Err(Error::Dimension {
            context: "advantage values",
            expected: n + 1,
            got: values.len(),
        });
    }
    if dones.len() != n {
        return Err(Error::Dimension {
            context: "advantage done flags",
            expected: n,
            got: dones.len(),
        });
    }
    let mut adv = vec![0.0; n];
    let mut next = 0.0;
    for t in (0..n).rev() {
        let live = if dones[t] { 0.0 } else { 1.0 };
        let delta = signal[t] + config.gamma * values[t + 1] * live - values[t];
        next = delta + config.gamma * config.lambda_gae * live * next;
        adv[t] = next;
    }
    let targets = adv.iter().zip(values).map(|(a, v)| a + v).collect();
    Ok((adv, targets))
}

/// Fills both advantage streams and their value targets.
pub fn compute_advantages(
    mut traj: Trajectory,
    reward_values: &[f64],
    cost_values: &[f64],
    config: &DiscountConfig,
) -> Result<Trajectory> {
    let dones: Vec<bool> = traj.transitions.iter().map(|t| t.done).collect();
    let rewards: Vec<f64> = traj.transitions.iter().map(|t| t.reward).collect();
    let costs: Vec<f64> = traj.transitions.iter().map(|t| t.cost).collect();
    let (ra, rr) = gae(&rewards, &dones, reward_values, config)?;
    let (ca, cr) = gae(&costs, &dones, cost_values, config)?;
    traj.reward_advantages = ra;
    traj.reward_returns = rr;
    traj.cost_advantages = ca;
    traj.cost_returns = cr;
    Ok(traj)
}

/// Standardises to zero mean and unit (population) standard deviation, with std floored at 1e-8.
pub fn normalize_advantages(values: &[f64]) -> Vec<f64> {
    if values.is_empty() {
        return Vec::new();
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let std = var.sqrt().max(1e-8);
    values.iter().map(|v| (v - mean) / std).collect()
}

/// Shuffled index batches covering `0..n`; the last batch may be short.
pub fn minibatches<R: Rng + ?Sized>(n: usize, batch_size: usize, rng: &mut R) -> Vec<Vec<usize>> {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(rng);
    idx.chunks(batch_size.max(1)).map(<[usize]>::to_vec).collect()
}

pub const RECORD_FORMAT: &str = "netslice-trajectory";
pub const RECORD_VERSION: u32 = 1;

/// First line of a record file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RecordHeader {
    pub format: String,
    pub version: u32,
    pub scenario_hash: String,
    pub seeds: Vec<u64>,
    pub state_dim: usize,
    pub action_dim: usize,
}

impl RecordHeader {
    pub fn new(scenario_hash: String, seeds: Vec<u64>, state_dim: usize, action_dim: usize) -> Self {
        Self {
            format: RECORD_FORMAT.to_string(),
            version: RECORD_VERSION,
            scenario_hash,
            seeds,
            state_dim,
            action_dim,
        }
    }
}

/// Writes a JSON-lines record file: the header, then one [`Transition`] object per line.
pub fn write_records(path: &Path, header: &RecordHeader, transitions: &[Transition]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer(&mut w, header)?;
    w.write_all(b"\n")?;
    for t in transitions {
        serde_json::to_writer(&mut w, t)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_records(path: &Path) -> Result<(RecordHeader, Vec<Transition>)> {
    let reader = BufReader::new(File::open(path)?);
    let mut lines = reader.lines().enumerate();
    let parse_err = |line: usize, e: serde_json::Error| Error::Parse {
        path: path.to_path_buf(),
        line: line + 1,
        column: e.column(),
        message: e.to_string(),
    };
    let (_, first) = lines
        .next()
        .ok_or_else(|| Error::Config(format!("{}: empty record file", path.display())))?;
    let header: RecordHeader = serde_json::from_str(&first?).map_err(|e| parse_err(0, e))?;
    if header.format != RECORD_FORMAT || header.version != RECORD_VERSION {
        return Err(Error::Config(format!(
            "{}: unsupported record format {} v{}",
            path.display(),
            header.format,
            header.version
        )));
    }
    let mut transitions = Vec::new();
    for (i, line) in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let t: Transition = serde_json::from_str(&line).map_err(|e| parse_err(i, e))?;
        if t.state_vec.len() != header.state_dim || t.action_vec.len() != header.action_dim {
            return Err(Error::Dimension {
                context: "record transition",
                expected: header.state_dim + header.action_dim,
                got: t.state_vec.len() + t.action_vec.len(),
            });
        }
        transitions.push(t);
    }
    Ok((header, transitions))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn transition(reward: f64, cost: f64, done: bool) -> Transition {
        Transition {
            state_vec: vec![0.0],
            action_vec: vec![0.0],
            logp: 0.0,
            reward,
            cost,
            done,
        }
    }

    #[test]
    fn returns_examples() {
        assert_eq!(compute_returns(&[1.0, 1.0, 1.0], 0.0), vec![1.0, 1.0, 1.0]);
        assert_eq!(compute_returns(&[1.0, 1.0, 1.0], 0.5), vec![1.75, 1.5, 1.0]);
    }

    #[test]
    fn returns_match_double_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let r: Vec<f64> = (0..20).map(|_| rng.random_range(-2.0..2.0)).collect();
        let fast = compute_returns(&r, 0.9);
        for t in 0..20 {
            let brute: f64 = (t..20).map(|j| 0.9f64.powi((j - t) as i32) * r[j]).sum();
            assert!((fast[t] - brute).abs() < 1e-12);
        }
    }

    #[test]
    fn gae_with_zero_values_and_unit_lambda_is_the_return() {
        let cfg = DiscountConfig {
            gamma: 0.9,
            lambda_gae: 1.0,
        };
        let traj = Trajectory::new(vec![
            transition(1.0, 0.5, false),
            transition(-2.0, -0.1, false),
            transition(0.5, 0.3, false),
        ]);
        let out = compute_advantages(traj, &[0.0; 4], &[0.0; 4], &cfg).unwrap();
        assert_eq!(out.reward_advantages, compute_returns(&[1.0, -2.0, 0.5], 0.9));
        assert_eq!(out.cost_advantages, compute_returns(&[0.5, -0.1, 0.3], 0.9));
        assert!(out.has_advantages());
    }

    #[test]
    fn gae_with_zero_lambda_is_td_error() {
        let cfg = DiscountConfig {
            gamma: 0.8,
            lambda_gae: 0.0,
        };
        let values = [0.3, -0.2, 0.7, 0.1];
        let (adv, _) = gae(&[1.0, 2.0, 3.0], &[false; 3], &values, &cfg).unwrap();
        for t in 0..3 {
            let delta = [1.0, 2.0, 3.0][t] + 0.8 * values[t + 1] - values[t];
            assert!((adv[t] - delta).abs() < 1e-12);
        }
    }

    #[test]
    fn gae_length_mismatch() {
        let cfg = DiscountConfig::default();
        assert!(matches!(
            gae(&[1.0, 2.0], &[false, false], &[0.0, 0.0], &cfg),
            Err(Error::Dimension { .. })
        ));
    }

    #[test]
    fn done_cuts_bootstrap() {
        let cfg = DiscountConfig {
            gamma: 0.9,
            lambda_gae: 1.0,
        };
        let (adv, _) = gae(&[1.0, 1.0], &[true, false], &[0.0, 0.0, 5.0], &cfg).unwrap();
        assert_eq!(adv[0], 1.0);
        assert!((adv[1] - (1.0 + 0.9 * 5.0)).abs() < 1e-12);
    }

    #[test]
    fn normalisation_examples() {
        assert_eq!(normalize_advantages(&[1.0; 4]), vec![0.0; 4]);
        assert_eq!(normalize_advantages(&[0.0, 2.0]), vec![-1.0, 1.0]);
    }

    #[test]
    fn discount_bounds() {
        assert!(DiscountConfig { gamma: 1.0, lambda_gae: 0.5 }.validate().is_err());
        assert!(DiscountConfig { gamma: 0.5, lambda_gae: 1.5 }.validate().is_err());
        assert!(DiscountConfig::default().validate().is_ok());
    }

    #[test]
    fn minibatches_cover_everything_once() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut all: Vec<usize> = minibatches(10, 3, &mut rng).concat();
        all.sort_unstable();
        assert_eq!(all, (0..10).collect::<Vec<_>>());
    }

    #[test]
    fn record_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.jsonl");
        let header = RecordHeader::new("abc".into(), vec![1, 2], 1, 1);
        let ts = vec![transition(1.0, -0.5, false), transition(0.25, 0.1, true)];
        write_records(&path, &header, &ts).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let second = text.lines().nth(1).unwrap();
        assert!(second.starts_with("{\"state_vec\":"));
        let (h, back) = read_records(&path).unwrap();
        assert_eq!(h, header);
        assert_eq!(back, ts);
    }
}
