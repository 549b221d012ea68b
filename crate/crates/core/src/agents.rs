//! Reporting strategies: truthful, the quantile misreporter, the Δ-shift
//! monotone misreporter and user-supplied adaptive strategies.

use std::fmt::Debug;
use std::sync::Arc;

use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::distributions::{monotone_push, Coupling, ValueDistribution};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::transport::{win_probability_given_value, GreedyPolicy, Law};

/// What an agent may condition its report on.
#[derive(Debug, Clone, Copy)]
pub struct VisibleHistory<'a, T> {
    pub agent: usize,
    /// 1-based index of the current round.
    pub round: usize,
    /// Own true values of past rounds.
    pub own_true: &'a [T],
    /// Own reports of past rounds.
    pub own_reports: &'a [T],
    /// Winner of each past round.
    pub winners: &'a [usize],
    /// Offsets of the policy in force this round.
    pub lambda: &'a [T],
}

/// A report rule that may depend on the visible history.
pub trait AdaptiveStrategy<T>: Debug + Send + Sync {
    fn report(&self, true_value: T, history: &VisibleHistory<'_, T>, rng: &mut dyn RngCore) -> T;
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", bound = "T: Scalar")]
pub enum ReportStrategy<T> {
    Truthful,
    /// Reports `high` when the true value is at least `F^{-1}(q)`, else `low`.
    QuantileThreshold { q: T, low: T, high: T },
    /// Reports `G^{-1}(F^u(x))` with `G = (F - delta)^+`.
    DeltaShift { delta: T },
    #[serde(skip)]
    Adaptive(Arc<dyn AdaptiveStrategy<T>>),
}

impl<T: Scalar> ReportStrategy<T> {
    pub fn is_truthful(&self) -> bool {
        matches!(self, ReportStrategy::Truthful)
    }
}

impl<T: PartialEq> PartialEq for ReportStrategy<T> {
    fn eq(&self, other: &Self) -> bool {
        use ReportStrategy::*;
        match (self, other) {
            (Truthful, Truthful) => true,
            (
                QuantileThreshold { q, low, high },
                QuantileThreshold { q: q2, low: l2, high: h2 },
            ) => q == q2 && low == l2 && high == h2,
            (DeltaShift { delta }, DeltaShift { delta: d2 }) => delta == d2,
            (Adaptive(a), Adaptive(b)) => Arc::ptr_eq(a, b),
            _ => false,
        }
    }
}

/// A strategy bound to the true value law.
#[derive(Debug, Clone)]
pub struct Reporter<T> {
    strategy: ReportStrategy<T>,
    truth: ValueDistribution<T>,
    cut: T,
    shifted: Option<ValueDistribution<T>>,
}

impl<T: Scalar> Reporter<T> {
    pub fn new(strategy: ReportStrategy<T>, truth: &ValueDistribution<T>) -> Result<Self> {
        let upper = truth.upper_bound();
        let mut cut = T::zero();
        let mut shifted = None;
        match &strategy {
            ReportStrategy::QuantileThreshold { q, low, high } => {
                if !(*q >= T::zero() && *q <= T::one()) {
                    return Err(Error::InvalidConfig(format!("quantile level {q} outside [0, 1]")));
                }
                for v in [*low, *high] {
                    check_range(v, upper)?;
                }
                cut = truth.quantile(*q);
            }
            ReportStrategy::DeltaShift { delta } => {
                shifted = Some(ValueDistribution::shifted_down(truth.clone(), *delta)?);
            }
            ReportStrategy::Truthful | ReportStrategy::Adaptive(_) => {}
        }
        Ok(Self { strategy, truth: truth.clone(), cut, shifted })
    }

    pub fn strategy(&self) -> &ReportStrategy<T> {
        &self.strategy
    }

    /// Law the reports follow, when it is a fixed law.
    pub fn reported_law(&self) -> Option<&ValueDistribution<T>> {
        match &self.strategy {
            ReportStrategy::Truthful => Some(&self.truth),
            ReportStrategy::DeltaShift { .. } => self.shifted.as_ref(),
            _ => None,
        }
    }

    pub fn report(
        &self,
        true_value: T,
        history: &VisibleHistory<'_, T>,
        rng: &mut dyn RngCore,
    ) -> Result<T> {
        let upper = self.truth.upper_bound();
        check_range(true_value, upper)?;
        let r = match &self.strategy {
            ReportStrategy::Truthful => true_value,
            ReportStrategy::QuantileThreshold { low, high, .. } => {
                if true_value >= self.cut {
                    *high
                } else {
                    *low
                }
            }
            ReportStrategy::DeltaShift { .. } => {
                let g = self.shifted.as_ref().expect("built with the strategy");
                monotone_push(&self.truth, g, true_value, rng)
            }
            ReportStrategy::Adaptive(s) => s.report(true_value, history, rng),
        };
        check_range(r, upper)?;
        Ok(r)
    }
}

fn check_range<T: Scalar>(v: T, upper: T) -> Result<()> {
    if v >= T::zero() && v <= upper {
        Ok(())
    } else {
        Err(Error::ReportOutOfRange { value: v.to_f64_lossy(), upper: upper.to_f64_lossy() })
    }
}

/// Expected one-round utility of `agent` when it reports through `coupling`
/// (true value from the source atoms, report from the target atoms) and the
/// other agents report truthfully from `others`.
pub fn coupling_utility<T: Scalar>(
    others: &ValueDistribution<T>,
    policy: &GreedyPolicy<T>,
    agent: usize,
    coupling: &Coupling<T>,
) -> Result<T> {
    let law = Law::from_dist(others)?;
    let win: Vec<T> = coupling
        .target
        .points
        .iter()
        .map(|r| win_probability_given_value(&law, policy, agent, *r))
        .collect();
    Ok(coupling
        .cells
        .iter()
        .map(|(i, j, m)| *m * coupling.source.points[*i] * win[*j])
        .sum())
}
