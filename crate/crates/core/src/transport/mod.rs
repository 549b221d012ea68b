//! Greedy (Laguerre-cell) allocation policies, their winning probabilities
//! and the dual solver that matches target quotas.

mod flow;
mod policy;
mod solver;
mod stats;

use serde::{Deserialize, Serialize};

use crate::distributions::ValueDistribution;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub use flow::FlowNetwork;
pub use policy::{members, GreedyPolicy, TieBreak, MAX_AGENTS};
pub use solver::{solve_dual, solve_dual_from, SolverConfig, SolverReport};
pub use stats::{win_probability_given_value, ArgmaxStats, Law, TieCell, MAX_STATS_AGENTS};

/// Target share of items per agent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<T>", into = "Vec<T>", bound = "T: Scalar")]
pub struct Quota<T> {
    targets: Vec<T>,
}

impl<T: Scalar> Quota<T> {
    pub fn new(targets: Vec<T>) -> Result<Self> {
        if targets.len() < 2 {
            return Err(Error::TooFewAgents(targets.len()));
        }
        if targets.iter().any(|p| !(p.is_finite() && *p > T::zero())) {
            return Err(Error::InvalidQuota("every share must be > 0".into()));
        }
        let total: T = targets.iter().copied().sum();
        let tol = T::of(1e-12).max(T::of(16.0) * T::epsilon());
        if (total - T::one()).abs() > tol {
            return Err(Error::InvalidQuota(format!("shares sum to {total}, not 1")));
        }
        Ok(Self { targets })
    }

    /// `1/n` each.
    pub fn equal(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::TooFewAgents(n));
        }
        Self::new(vec![T::one() / T::of_usize(n); n])
    }

    pub fn targets(&self) -> &[T] {
        &self.targets
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    /// `⌈p*_i · horizon⌉`.
    pub fn capacities(&self, horizon: usize) -> Vec<usize> {
        self.targets
            .iter()
            .map(|p| {
                let c = (*p * T::of_usize(horizon)).ceil().to_usize().unwrap_or(horizon);
                // guard against a share like 0.3 landing a hair above 0.3·T
                let exact = *p * T::of_usize(horizon);
                if c > 0 && (exact - T::of_usize(c - 1)).abs() <= T::of(1e-9) * T::of_usize(horizon.max(1)) {
                    c - 1
                } else {
                    c
                }
            })
            .collect()
    }
}

impl<T: Scalar> TryFrom<Vec<T>> for Quota<T> {
    type Error = Error;
    fn try_from(v: Vec<T>) -> Result<Self> {
        Self::new(v)
    }
}

impl<T: Scalar> From<Quota<T>> for Vec<T> {
    fn from(q: Quota<T>) -> Self {
        q.targets
    }
}

/// `p_j(F, λ)` for every agent, values i.i.d. `dist`.
pub fn allocation_probabilities<T: Scalar>(
    dist: &ValueDistribution<T>,
    policy: &GreedyPolicy<T>,
) -> Result<Vec<T>> {
    let stats = ArgmaxStats::compute(&Law::from_dist(dist)?, policy.lambda())?;
    Ok(stats.allocation_probabilities(policy))
}

/// `E[X_j; j wins]` for every agent.
pub fn expected_utilities<T: Scalar>(
    dist: &ValueDistribution<T>,
    policy: &GreedyPolicy<T>,
) -> Result<Vec<T>> {
    let stats = ArgmaxStats::compute(&Law::from_dist(dist)?, policy.lambda())?;
    Ok(stats.expected_utilities(policy))
}

/// `E(λ, F) = E[max_j (X_j + λ_j)] - λ·p*`.
pub fn dual_objective<T: Scalar>(
    dist: &ValueDistribution<T>,
    lambda: &[T],
    quota: &Quota<T>,
) -> Result<T> {
    if lambda.len() != quota.len() {
        return Err(Error::DimensionMismatch { expected: quota.len(), got: lambda.len() });
    }
    let stats = ArgmaxStats::compute(&Law::from_dist(dist)?, lambda)?;
    let linear: T = lambda.iter().zip(quota.targets()).map(|(l, p)| *l * *p).sum();
    Ok(stats.expected_max_score() - linear)
}
