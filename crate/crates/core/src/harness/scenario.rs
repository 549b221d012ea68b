use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::agents::ReportStrategy;
use crate::detection::{threshold, DetectorConfig};
use crate::distributions::{EmpiricalCdf, ValueDistribution};
use crate::error::{Error, Result};
use crate::mechanism::{CappedRule, MechanismConfig};
use crate::transport::{Quota, SolverConfig};

/// Value law as written in a scenario file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DistributionSpec {
    Uniform {
        lo: f64,
        hi: f64,
    },
    Discrete {
        support: Vec<f64>,
        masses: Vec<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        upper_bound: Option<f64>,
    },
    Empirical {
        samples: Vec<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        upper_bound: Option<f64>,
    },
}

impl DistributionSpec {
    pub fn build(&self) -> Result<ValueDistribution<f64>> {
        match self {
            DistributionSpec::Uniform { lo, hi } => ValueDistribution::uniform(*lo, *hi),
            DistributionSpec::Discrete { support, masses, upper_bound } => {
                let d = ValueDistribution::discrete(support.clone(), masses.clone());
                match (d, upper_bound) {
                    (Ok(d), Some(u)) => d.with_upper_bound(*u),
                    (d, _) => d,
                }
            }
            DistributionSpec::Empirical { samples, upper_bound } => {
                let e = EmpiricalCdf::new(samples.clone())?;
                match upper_bound {
                    Some(u) => ValueDistribution::empirical_with_upper_bound(e, *u),
                    None => ValueDistribution::empirical(e),
                }
            }
        }
    }
}

/// Paired-run setup for incentive experiments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BicSpec {
    pub strategist: usize,
    pub strategy: ReportStrategy<f64>,
    /// Constant in the reported bound `c·√(nT·ln(nT/δ))`.
    #[serde(default = "default_bound_constant")]
    pub c: f64,
    /// For `delta_shift`: replace the shift by this fraction of `Δ_T / 2` at
    /// each horizon `T`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub calibrate_fraction: Option<f64>,
}

fn default_bound_constant() -> f64 {
    1.0
}

fn default_replications() -> usize {
    1
}

/// One experiment: a value law, agents, mechanism settings and replications.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    pub n: usize,
    pub horizons: Vec<usize>,
    /// Equal shares when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quota: Option<Vec<f64>>,
    pub distribution: DistributionSpec,
    /// All truthful when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub strategies: Option<Vec<ReportStrategy<f64>>>,
    #[serde(default)]
    pub detector: DetectorConfig<f64>,
    #[serde(default = "SolverConfig::empirical")]
    pub solver: SolverConfig<f64>,
    #[serde(default)]
    pub capped_rule: CappedRule,
    #[serde(default = "default_replications")]
    pub replications: usize,
    #[serde(default)]
    pub base_seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bic: Option<BicSpec>,
}

impl Scenario {
    /// Truthful agents with equal quotas on `distribution`.
    pub fn truthful(name: &str, n: usize, horizons: Vec<usize>, distribution: DistributionSpec) -> Self {
        Self {
            name: name.to_string(),
            n,
            horizons,
            quota: None,
            distribution,
            strategies: None,
            detector: DetectorConfig::default(),
            solver: SolverConfig::empirical(),
            capped_rule: CappedRule::Uniform,
            replications: 1,
            base_seed: 0,
            bic: None,
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let s: Scenario =
            toml::from_str(text).map_err(|e| Error::InvalidConfig(format!("scenario: {e}")))?;
        s.validate()?;
        Ok(s)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::InvalidConfig(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::InvalidConfig(format!("scenario: {e}")))
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::TooFewAgents(self.n));
        }
        if self.horizons.is_empty() || self.horizons.contains(&0) {
            return Err(Error::InvalidConfig("horizons must be a non-empty list of T >= 1".into()));
        }
        if self.replications == 0 {
            return Err(Error::InvalidConfig("replications must be >= 1".into()));
        }
        if let Some(s) = &self.strategies {
            if s.len() != self.n {
                return Err(Error::DimensionMismatch { expected: self.n, got: s.len() });
            }
        }
        if let Some(b) = &self.bic {
            if b.strategist >= self.n {
                return Err(Error::InvalidConfig(format!("strategist {} out of range", b.strategist)));
            }
        }
        self.detector.validate()?;
        self.quota()?;
        self.distribution.build()?;
        Ok(())
    }

    pub fn quota(&self) -> Result<Quota<f64>> {
        match &self.quota {
            Some(q) => {
                if q.len() != self.n {
                    return Err(Error::DimensionMismatch { expected: self.n, got: q.len() });
                }
                Quota::new(q.clone())
            }
            None => Quota::equal(self.n),
        }
    }

    pub fn strategies(&self) -> Vec<ReportStrategy<f64>> {
        self.strategies.clone().unwrap_or_else(|| vec![ReportStrategy::Truthful; self.n])
    }

    /// Seeds `base_seed + 0 .. base_seed + replications - 1`.
    pub fn seeds(&self) -> Vec<u64> {
        (0..self.replications as u64).map(|k| self.base_seed.wrapping_add(k)).collect()
    }

    pub fn mechanism_config(&self, horizon: usize, seed: u64) -> Result<MechanismConfig<f64>> {
        let cfg = MechanismConfig {
            n: self.n,
            horizon,
            quota: self.quota()?,
            detector: self.detector,
            solver: self.solver,
            initial_lambda: None,
            seed,
            capped_rule: self.capped_rule,
            record_trace: false,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Strategist's strategy at `horizon`, with the shift calibrated if asked.
    pub fn bic_strategy(&self, horizon: usize) -> Result<(usize, ReportStrategy<f64>)> {
        let b = self
            .bic
            .as_ref()
            .ok_or_else(|| Error::InvalidConfig("scenario has no [bic] section".into()))?;
        let strategy = match (&b.strategy, b.calibrate_fraction) {
            (ReportStrategy::DeltaShift { .. }, Some(frac)) => {
                let half = threshold(horizon, &self.detector) / 2.0;
                ReportStrategy::DeltaShift { delta: (frac * half).clamp(0.0, 1.0) }
            }
            (s, _) => s.clone(),
        };
        Ok((b.strategist, strategy))
    }
}
