use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on per-domain share sums, absorbing rounding from renormalisation.
const FEASIBILITY_TOL: f64 = 1e-9;

/// Resource shares `a[k][m]` of each domain `m` given to each slice `k`, stored slice-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AllocationAction {
    slices: usize,
    domains: usize,
    shares: Vec<f64>,
}

impl AllocationAction {
    pub fn zeros(slices: usize, domains: usize) -> Self {
        Self {
            slices,
            domains,
            shares: vec![0.0; slices * domains],
        }
    }

    /// Builds an allocation from a slice-major vector, enforcing every invariant.
    pub fn from_flat(slices: usize, domains: usize, shares: Vec<f64>) -> Result<Self> {
        if shares.len() != slices * domains {
            return Err(Error::Dimension {
                context: "AllocationAction",
                expected: slices * domains,
                got: shares.len(),
            });
        }
        let action = Self {
            slices,
            domains,
            shares,
        };
        action.validate()?;
        Ok(action)
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let domains = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != domains) {
            return Err(Error::Config("ragged allocation matrix".into()));
        }
        Self::from_flat(rows.len(), domains, rows.concat())
    }

    pub fn validate(&self) -> Result<()> {
        for k in 0..self.slices {
            for d in 0..self.domains {
                let v = self.share(k, d);
                if !(0.0..=1.0).contains(&v) {
                    return Err(Error::InvalidShare {
                        slice: k,
                        domain: d,
                        value: v,
                    });
                }
            }
        }
        for d in 0..self.domains {
            let total = self.column_sum(d);
            if total > 1.0 + FEASIBILITY_TOL {
                return Err(Error::Infeasible { domain: d, total });
            }
        }
        Ok(())
    }

    pub fn is_feasible(&self) -> bool {
        self.validate().is_ok()
    }

    pub fn num_slices(&self) -> usize {
        self.slices
    }

    pub fn num_domains(&self) -> usize {
        self.domains
    }

    pub fn share(&self, slice: usize, domain: usize) -> f64 {
        self.shares[slice * self.domains + domain]
    }

    pub fn column_sum(&self, domain: usize) -> f64 {
        (0..self.slices).map(|k| self.share(k, domain)).sum()
    }

    pub fn flat(&self) -> &[f64] {
        &self.shares
    }

    /// Unchecked mutable access; callers re-validate before stepping.
    pub fn flat_mut(&mut self) -> &mut [f64] {
        &mut self.shares
    }

    pub fn column(&self, domain: usize) -> Vec<f64> {
        (0..self.slices).map(|k| self.share(k, domain)).collect()
    }

    pub fn set_column(&mut self, domain: usize, column: &[f64]) {
        for (k, v) in column.iter().enumerate() {
            self.shares[k * self.domains + domain] = *v;
        }
    }

    pub fn total_usage(&self, weights: &[f64]) -> f64 {
        (0..self.domains).map(|d| weights[d] * self.column_sum(d)).sum()
    }
}

/// The MDP state: timeslot, per-slice per-domain arrival rates and queue backlogs.
///
/// Both matrices are stored slice-major (`index = slice · domains + domain`).
/// `rates[k][d]` is slice k's exogenous arrival rate; every domain on the
/// chain sees the same rate. [`NetworkState::to_flat`] lays out all rates
/// followed by all backlogs in that same order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkState {
    pub t: u64,
    pub slices: usize,
    pub domains: usize,
    pub rates: Vec<f64>,
    pub backlogs: Vec<f64>,
}

impl NetworkState {
    pub fn rate(&self, slice: usize, domain: usize) -> f64 {
        self.rates[slice * self.domains + domain]
    }

    pub fn backlog(&self, slice: usize, domain: usize) -> f64 {
        self.backlogs[slice * self.domains + domain]
    }

    pub fn to_flat(&self) -> Vec<f64> {
        let mut v = self.rates.clone();
        v.extend_from_slice(&self.backlogs);
        v
    }

    pub fn is_valid(&self) -> bool {
        self.rates
            .iter()
            .chain(&self.backlogs)
            .all(|x| x.is_finite() && *x >= 0.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepOutcome {
    pub next_state: NetworkState,
    pub reward: f64,
    pub cost: f64,
    pub per_slice_latency: Vec<f64>,
    pub per_slice_throughput: Vec<f64>,
    /// Per-slice per-domain latencies, slice-major.
    pub domain_latency: Vec<f64>,
    /// Per-slice per-domain served rates, slice-major.
    pub domain_throughput: Vec<f64>,
    pub sla_violated: bool,
}
