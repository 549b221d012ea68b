//! Per-agent comparison of reported empirical CDFs against the pooled CDF of
//! everyone else, with the martingale-DKW threshold.

mod treap;

use serde::{Deserialize, Serialize};

use crate::distributions::{build_empirical, sup_distance};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

use treap::GapTreap;

/// Detector parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct DetectorConfig<T> {
    /// Failure probability `δ`.
    pub delta: T,
    /// Multiplier on the threshold; 1 keeps the constants 64 and 256e.
    pub constant_scale: T,
    /// Check every `stride` rounds.
    pub stride: usize,
}

impl<T: Scalar> DetectorConfig<T> {
    pub fn new(delta: T, constant_scale: T, stride: usize) -> Result<Self> {
        let cfg = Self { delta, constant_scale, stride };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.delta > T::zero() && self.delta < T::one()) {
            return Err(Error::InvalidConfig(format!("delta {} outside (0, 1)", self.delta)));
        }
        if !(self.constant_scale > T::zero() && self.constant_scale.is_finite()) {
            return Err(Error::InvalidConfig("constant_scale must be > 0".into()));
        }
        if self.stride == 0 {
            return Err(Error::InvalidConfig("stride must be >= 1".into()));
        }
        Ok(())
    }
}

impl<T: Scalar> Default for DetectorConfig<T> {
    fn default() -> Self {
        Self { delta: T::of(0.1), constant_scale: T::one(), stride: 1 }
    }
}

/// `Δ_t = scale · 64 · √(ln(256·e·t/δ) / t)`.
pub fn threshold<T: Scalar>(t: usize, cfg: &DetectorConfig<T>) -> T {
    let t = T::of_usize(t.max(1));
    let e = T::of(std::f64::consts::E);
    cfg.constant_scale * T::of(64.0) * ((T::of(256.0) * e * t / cfg.delta).ln() / t).sqrt()
}

/// `16 · √(ln(128·e·t/δ) / t)`.
pub fn corollary_threshold<T: Scalar>(t: usize, delta: T) -> T {
    let t = T::of_usize(t.max(1));
    let e = T::of(std::f64::consts::E);
    T::of(16.0) * ((T::of(128.0) * e * t / delta).ln() / t).sqrt()
}

/// Outcome of one detector check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "result", rename_all = "snake_case", bound = "T: Scalar")]
pub enum Decision<T> {
    Accept,
    Reject { agent: usize, distance: T, threshold: T },
}

impl<T> Decision<T> {
    pub fn is_reject(&self) -> bool {
        matches!(self, Decision::Reject { .. })
    }
}

/// All reports seen so far, one list per agent.
#[derive(Debug, Clone)]
pub struct DetectorState<T> {
    per_agent_samples: Vec<Vec<T>>,
    round: usize,
    index: GapTreap<T>,
}

impl<T: Scalar> DetectorState<T> {
    pub fn new(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::TooFewAgents(n));
        }
        if n > crate::transport::MAX_AGENTS {
            return Err(Error::Unsupported(format!("{n} agents in the detector")));
        }
        Ok(Self { per_agent_samples: vec![Vec::new(); n], round: 0, index: GapTreap::new(n) })
    }

    pub fn n(&self) -> usize {
        self.per_agent_samples.len()
    }

    /// Rounds recorded so far.
    pub fn round(&self) -> usize {
        self.round
    }

    pub fn samples(&self, agent: usize) -> &[T] {
        &self.per_agent_samples[agent]
    }

    /// Appends one report per agent.
    pub fn record(&mut self, reports: &[T]) -> Result<()> {
        if reports.len() != self.n() {
            return Err(Error::DimensionMismatch { expected: self.n(), got: reports.len() });
        }
        if let Some(bad) = reports.iter().find(|r| !r.is_finite()) {
            return Err(Error::InvalidConfig(format!("non-finite report {bad}")));
        }
        for (j, r) in reports.iter().enumerate() {
            self.per_agent_samples[j].push(*r);
            self.index.insert(*r, j);
        }
        self.round += 1;
        Ok(())
    }

    /// `sup_x |F̃_i(x) - F̄_i(x)|` for every agent, where `F̄_i` is agent `i`'s
    /// empirical CDF and `F̃_i` pools everyone else.
    pub fn sup_distances(&self) -> Vec<T> {
        let n = self.n();
        if self.round == 0 {
            return vec![T::zero(); n];
        }
        let denom = T::of_usize((n - 1) * self.round);
        (0..n)
            .map(|i| {
                let (hi, lo) = self.index.extremes(i);
                T::of_usize(hi.max(-lo) as usize) / denom
            })
            .collect()
    }

    /// Same as [`Self::sup_distances`], rebuilt from the raw lists.
    pub fn sup_distances_exhaustive(&self) -> Vec<T> {
        let n = self.n();
        if self.round == 0 {
            return vec![T::zero(); n];
        }
        (0..n)
            .map(|i| {
                let own = build_empirical(&self.per_agent_samples[i]).expect("non-empty");
                let rest: Vec<T> = (0..n)
                    .filter(|&j| j != i)
                    .flat_map(|j| self.per_agent_samples[j].iter().copied())
                    .collect();
                let pooled = build_empirical(&rest).expect("non-empty");
                sup_distance(&own, &pooled)
            })
            .collect()
    }

    /// Rejects the lowest-index agent whose distance reaches `Δ_t / 2`.
    pub fn check(&self, cfg: &DetectorConfig<T>) -> Decision<T> {
        Self::decide(self.round, &self.sup_distances(), cfg)
    }

    /// [`Self::check`] computed from the raw lists.
    pub fn check_exhaustive(&self, cfg: &DetectorConfig<T>) -> Decision<T> {
        Self::decide(self.round, &self.sup_distances_exhaustive(), cfg)
    }

    fn decide(round: usize, distances: &[T], cfg: &DetectorConfig<T>) -> Decision<T> {
        if round == 0 {
            return Decision::Accept;
        }
        let half = threshold(round, cfg) / T::of(2.0);
        match distances.iter().position(|d| *d >= half) {
            Some(agent) => Decision::Reject { agent, distance: distances[agent], threshold: half * T::of(2.0) },
            None => Decision::Accept,
        }
    }
}
