use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::multi_agent::AssignmentConfig;

pub const DEFAULT_L_MAX: f64 = 10.0;
pub const DEFAULT_HEADROOM: f64 = 1.2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum DomainId {
    #[serde(rename = "RAN")]
    Ran,
    #[serde(rename = "TN")]
    Tn,
    #[serde(rename = "CN")]
    Cn,
    #[serde(rename = "EDGE")]
    Edge,
}

impl DomainId {
    pub const CHAIN: [DomainId; 4] = [DomainId::Ran, DomainId::Tn, DomainId::Cn, DomainId::Edge];

    pub fn chain_position(self) -> usize {
        self as usize
    }
}

impl fmt::Display for DomainId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DomainId::Ran => "RAN",
            DomainId::Tn => "TN",
            DomainId::Cn => "CN",
            DomainId::Edge => "EDGE",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainSpec {
    pub id: DomainId,
    /// Abstract resource units (PRBs, link bandwidth, CPU cores).
    pub capacity: f64,
    /// Jobs per second served per resource unit.
    pub service_rate: f64,
}

impl DomainSpec {
    /// Jobs per second the whole domain can serve.
    pub fn full_rate(&self) -> f64 {
        self.capacity * self.service_rate
    }
}

/// `base + amplitude · sin(2πt / period) + N(0, noise_std²)`, clamped at zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrafficModel {
    pub base_rate: f64,
    #[serde(default)]
    pub amplitude: f64,
    pub period: f64,
    #[serde(default)]
    pub noise_std: f64,
}

impl TrafficModel {
    pub fn deterministic_rate(&self, t: u64) -> f64 {
        self.base_rate + self.amplitude * (2.0 * std::f64::consts::PI * t as f64 / self.period).sin()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SliceSpec {
    #[serde(default)]
    pub name: String,
    /// End-to-end latency bound, seconds.
    pub latency_bound: f64,
    /// Minimum delivered throughput, jobs per second.
    #[serde(default)]
    pub min_throughput: f64,
    pub traffic: TrafficModel,
}

fn default_l_max() -> f64 {
    DEFAULT_L_MAX
}

fn default_headroom() -> f64 {
    DEFAULT_HEADROOM
}

/// Scenario file contents. Unknown keys are rejected.
///
/// ```json
/// {
///   "domains": [{"id": "RAN", "capacity": 50, "service_rate": 1.0}, ...],
///   "slices": [{"name": "embb", "latency_bound": 1.0, "min_throughput": 5,
///               "traffic": {"base_rate": 20, "amplitude": 6, "period": 32, "noise_std": 1}}],
///   "l_max": 10.0,
///   "headroom": 1.2,
///   "weights": [1, 1, 1, 1],
///   "agents": {"mode": "domains", "groups": [["RAN", "EDGE"], ["TN"], ["CN"]]},
///   "decomposition_weights": [1, 1, 1, 1]
/// }
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub domains: Vec<DomainSpec>,
    pub slices: Vec<SliceSpec>,
    #[serde(default = "default_l_max")]
    pub l_max: f64,
    #[serde(default = "default_headroom")]
    pub headroom: f64,
    /// Per-domain resource-usage weights; all ones when omitted.
    #[serde(default)]
    pub weights: Vec<f64>,
    /// Multi-agent partition used by distributed training.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub agents: Option<AssignmentConfig>,
    /// Per-domain load proxy for splitting latency budgets; all ones when omitted.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub decomposition_weights: Vec<f64>,
}

fn positive(value: f64, what: impl FnOnce() -> String) -> Result<()> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(Error::Config(format!("{} must be > 0, got {value}", what())))
    }
}

fn non_negative(value: f64, what: impl FnOnce() -> String) -> Result<()> {
    if value >= 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(Error::Config(format!("{} must be >= 0, got {value}", what())))
    }
}

impl ScenarioConfig {
    pub fn from_json_str(text: &str, origin: &Path) -> Result<Self> {
        let mut scenario: ScenarioConfig = serde_json::from_str(text).map_err(|e| Error::Parse {
            path: origin.to_path_buf(),
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        scenario.fill_defaults();
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read scenario {}: {e}", path.display())))?;
        Self::from_json_str(&text, path)
    }

    /// Replaces empty weight vectors with all-ones.
    pub fn fill_defaults(&mut self) {
        if self.weights.is_empty() {
            self.weights = vec![1.0; self.domains.len()];
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.slices.is_empty() {
            return Err(Error::Config("scenario needs at least one slice".into()));
        }
        if self.domains.is_empty() || self.domains.len() > 4 {
            return Err(Error::Config(format!(
                "scenario needs between 1 and 4 domains, got {}",
                self.domains.len()
            )));
        }
        for pair in self.domains.windows(2) {
            if pair[0].id.chain_position() >= pair[1].id.chain_position() {
                return Err(Error::Config(format!(
                    "domains must be distinct and listed in chain order RAN, TN, CN, EDGE (found {} before {})",
                    pair[0].id, pair[1].id
                )));
            }
        }
        for (i, d) in self.domains.iter().enumerate() {
            positive(d.capacity, || format!("domains[{i}].capacity"))?;
            positive(d.service_rate, || format!("domains[{i}].service_rate"))?;
        }
        for (k, s) in self.slices.iter().enumerate() {
            positive(s.latency_bound, || format!("slices[{k}].latency_bound"))?;
            non_negative(s.min_throughput, || format!("slices[{k}].min_throughput"))?;
            non_negative(s.traffic.base_rate, || format!("slices[{k}].traffic.base_rate"))?;
            non_negative(s.traffic.amplitude, || format!("slices[{k}].traffic.amplitude"))?;
            positive(s.traffic.period, || format!("slices[{k}].traffic.period"))?;
            non_negative(s.traffic.noise_std, || format!("slices[{k}].traffic.noise_std"))?;
        }
        positive(self.l_max, || "l_max".into())?;
        if !(self.headroom > 1.0 && self.headroom.is_finite()) {
            return Err(Error::Config(format!("headroom must be > 1, got {}", self.headroom)));
        }
        if self.weights.len() != self.domains.len() {
            return Err(Error::Config(format!(
                "weights has {} entries, expected one per domain ({})",
                self.weights.len(),
                self.domains.len()
            )));
        }
        for (i, w) in self.weights.iter().enumerate() {
            positive(*w, || format!("weights[{i}]"))?;
        }
        if !self.decomposition_weights.is_empty() {
            if self.decomposition_weights.len() != self.domains.len() {
                return Err(Error::Config(format!(
                    "decomposition_weights has {} entries, expected {}",
                    self.decomposition_weights.len(),
                    self.domains.len()
                )));
            }
            for (i, w) in self.decomposition_weights.iter().enumerate() {
                positive(*w, || format!("decomposition_weights[{i}]"))?;
            }
        }
        if let Some(agents) = &self.agents {
            agents.resolve(self)?;
        }
        Ok(())
    }

    pub fn num_slices(&self) -> usize {
        self.slices.len()
    }

    pub fn num_domains(&self) -> usize {
        self.domains.len()
    }

    pub fn domain_index(&self, id: DomainId) -> Option<usize> {
        self.domains.iter().position(|d| d.id == id)
    }

    /// Decomposition weights with the all-ones default applied.
    pub fn decomposition_weights(&self) -> Vec<f64> {
        if self.decomposition_weights.is_empty() {
            vec![1.0; self.domains.len()]
        } else {
            self.decomposition_weights.clone()
        }
    }

    /// Length of the normalised observation vector.
    pub fn obs_dim(&self) -> usize {
        2 * self.num_slices() * self.num_domains()
    }

    pub fn action_dim(&self) -> usize {
        self.num_slices() * self.num_domains()
    }

    /// SHA-256 over the canonical JSON serialisation.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_vec(self).expect("scenario serialises");
        hex::encode(Sha256::digest(&canonical))
    }
}
