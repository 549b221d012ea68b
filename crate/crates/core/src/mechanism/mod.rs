//! The epoch-based online allocation loop with capacities, per-round misreport
//! detection and per-epoch relearning of the policy.

mod schedule;

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::agents::{ReportStrategy, Reporter, VisibleHistory};
use crate::detection::{Decision, DetectorConfig, DetectorState};
use crate::distributions::{EmpiricalCdf, ValueDistribution};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::transport::{solve_dual_from, GreedyPolicy, Quota, SolverConfig};

pub use schedule::EpochSchedule;

/// Random stream holding the true values.
pub const VALUE_STREAM: u64 = 0;
/// Random stream for allocation and tie-breaking.
pub const ALLOCATION_STREAM: u64 = 1;

/// Random stream of agent `i`'s reporting randomness.
pub fn agent_stream(i: usize) -> u64 {
    2 + i as u64
}

/// Rng for one stream of a run.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Allocation once some agent has reached capacity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CappedRule {
    /// Uniformly at random among agents below capacity.
    #[default]
    Uniform,
    /// Greedy policy restricted to agents below capacity.
    RestrictedGreedy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct MechanismConfig<T> {
    pub n: usize,
    pub horizon: usize,
    pub quota: Quota<T>,
    /// Also carries `δ`.
    pub detector: DetectorConfig<T>,
    pub solver: SolverConfig<T>,
    /// Offsets for the first epoch; zeros when absent.
    pub initial_lambda: Option<Vec<T>>,
    pub seed: u64,
    pub capped_rule: CappedRule,
    pub record_trace: bool,
}

impl<T: Scalar> MechanismConfig<T> {
    /// Equal quotas, default detector and empirical solver tolerance.
    pub fn new(n: usize, horizon: usize, seed: u64) -> Result<Self> {
        Ok(Self {
            n,
            horizon,
            quota: Quota::equal(n)?,
            detector: DetectorConfig::default(),
            solver: SolverConfig::empirical(),
            initial_lambda: None,
            seed,
            capped_rule: CappedRule::Uniform,
            record_trace: false,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::TooFewAgents(self.n));
        }
        if self.horizon == 0 {
            return Err(Error::InvalidConfig("horizon must be >= 1".into()));
        }
        if self.quota.len() != self.n {
            return Err(Error::DimensionMismatch { expected: self.n, got: self.quota.len() });
        }
        if let Some(l) = &self.initial_lambda {
            if l.len() != self.n {
                return Err(Error::DimensionMismatch { expected: self.n, got: l.len() });
            }
        }
        self.detector.validate()
    }

    /// `⌈p*_i · T⌉`.
    pub fn capacities(&self) -> Vec<usize> {
        self.quota.capacities(self.horizon)
    }
}

/// One played round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct RoundRecord<T> {
    pub t: usize,
    #[serde(rename = "true")]
    pub true_values: Vec<T>,
    #[serde(rename = "reported")]
    pub reported_values: Vec<T>,
    pub policy_epoch: u32,
    pub winner: usize,
    pub capped: Vec<usize>,
    /// `None` on rounds skipped by the check stride.
    pub detector: Option<Decision<T>>,
}

/// A rejection raised by the detector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct RejectEvent<T> {
    pub round: usize,
    pub agent: usize,
    pub distance: T,
    pub threshold: T,
}

/// Policy used during one epoch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct EpochRecord<T> {
    pub epoch: u32,
    pub first_round: usize,
    pub lambda: Vec<T>,
    pub residual: T,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Termination {
    HorizonComplete,
    DetectorReject { agent: usize, round: usize },
    AllCapped { round: usize },
    SolverFailure { round: usize, message: String },
}

impl Termination {
    pub fn label(&self) -> &'static str {
        match self {
            Termination::HorizonComplete => "horizon_complete",
            Termination::DetectorReject { .. } => "detector_reject",
            Termination::AllCapped { .. } => "all_capped",
            Termination::SolverFailure { .. } => "solver_failure",
        }
    }

    /// Round at which the run stopped early, if it did.
    pub fn round(&self) -> Option<usize> {
        match self {
            Termination::HorizonComplete => None,
            Termination::DetectorReject { round, .. }
            | Termination::AllCapped { round }
            | Termination::SolverFailure { round, .. } => Some(*round),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct MechanismOutcome<T> {
    pub termination: Termination,
    /// Rounds in which an item was allocated.
    pub rounds_played: usize,
    pub capacities: Vec<usize>,
    pub items_won: Vec<usize>,
    /// Sum of true values of the items won.
    pub utility: Vec<T>,
    pub epochs: Vec<EpochRecord<T>>,
    /// First round in which some agent was already at capacity.
    pub first_cap_round: Option<usize>,
    pub rejects: Vec<RejectEvent<T>>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub trace: Option<Vec<RoundRecord<T>>>,
}

impl<T: Scalar> MechanismOutcome<T> {
    /// Writes the trace as one JSON object per line.
    pub fn write_trace<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for r in self.trace.iter().flatten() {
            serde_json::to_writer(&mut out, r)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }
}

/// Plays the mechanism for up to `config.horizon` rounds.
pub fn run<T: Scalar>(
    config: &MechanismConfig<T>,
    dist: &ValueDistribution<T>,
    strategies: &[ReportStrategy<T>],
) -> Result<MechanismOutcome<T>> {
    config.validate()?;
    let n = config.n;
    if strategies.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: strategies.len() });
    }
    let reporters = strategies
        .iter()
        .map(|s| Reporter::new(s.clone(), dist))
        .collect::<Result<Vec<_>>>()?;
    let horizon = config.horizon;
    let schedule = EpochSchedule::new(horizon);
    let capacities = config.capacities();
    let upper = dist.upper_bound();

    let mut value_rng = stream_rng(config.seed, VALUE_STREAM);
    let mut alloc_rng = stream_rng(config.seed, ALLOCATION_STREAM);
    let mut agent_rngs: Vec<ChaCha8Rng> =
        (0..n).map(|i| stream_rng(config.seed, agent_stream(i))).collect();

    let start = config.initial_lambda.clone().unwrap_or_else(|| vec![T::zero(); n]);
    let mut policy = GreedyPolicy::new(start)?;
    let mut epochs = vec![EpochRecord {
        epoch: 0,
        first_round: 1,
        lambda: policy.lambda().to_vec(),
        residual: T::zero(),
        iterations: 0,
    }];
    let mut detector = DetectorState::new(n)?;
    let mut true_hist: Vec<Vec<T>> = vec![Vec::with_capacity(horizon); n];
    let mut winners: Vec<usize> = Vec::with_capacity(horizon);
    let mut items_won = vec![0usize; n];
    let mut utility = vec![T::zero(); n];
    let mut first_cap_round = None;
    let mut rejects = Vec::new();
    let mut trace = config.record_trace.then(Vec::new);
    let mut termination = Termination::HorizonComplete;
    let mut values = vec![T::zero(); n];
    let mut reports = vec![T::zero(); n];

    for t in 1..=horizon {
        for v in values.iter_mut() {
            *v = dist.sample(&mut value_rng);
        }
        for i in 0..n {
            let history = VisibleHistory {
                agent: i,
                round: t,
                own_true: &true_hist[i],
                own_reports: detector.samples(i),
                winners: &winners,
                lambda: policy.lambda(),
            };
            reports[i] = reporters[i].report(values[i], &history, &mut agent_rngs[i])?;
        }
        detector.record(&reports)?;
        for i in 0..n {
            true_hist[i].push(values[i]);
        }

        let decision = (t % config.detector.stride == 0).then(|| detector.check(&config.detector));
        if let Some(Decision::Reject { agent, distance, threshold }) = decision {
            rejects.push(RejectEvent { round: t, agent, distance, threshold });
            termination = Termination::DetectorReject { agent, round: t };
            if let Some(tr) = trace.as_mut() {
                tr.push(RoundRecord {
                    t,
                    true_values: values.clone(),
                    reported_values: reports.clone(),
                    policy_epoch: EpochSchedule::epoch_of(t),
                    winner: usize::MAX,
                    capped: Vec::new(),
                    detector: decision,
                });
            }
            break;
        }

        let capped: Vec<usize> = (0..n).filter(|&i| items_won[i] >= capacities[i]).collect();
        if capped.len() == n {
            termination = Termination::AllCapped { round: t };
            break;
        }
        let winner = if capped.is_empty() {
            policy.allocate(&reports, &mut alloc_rng)?
        } else {
            first_cap_round.get_or_insert(t);
            capacity_rule(&capped, &policy, &reports, config.capped_rule, &mut alloc_rng)?
        };
        items_won[winner] += 1;
        utility[winner] += values[winner];
        winners.push(winner);
        if let Some(tr) = trace.as_mut() {
            tr.push(RoundRecord {
                t,
                true_values: values.clone(),
                reported_values: reports.clone(),
                policy_epoch: EpochSchedule::epoch_of(t),
                winner,
                capped,
                detector: decision,
            });
        }

        if schedule.updates_after(t) {
            let pooled: Vec<T> = (0..n).flat_map(|i| detector.samples(i).iter().copied()).collect();
            let learned = EmpiricalCdf::new(pooled)
                .and_then(|e| ValueDistribution::empirical_with_upper_bound(e, upper))
                .and_then(|f| solve_dual_from(&f, &config.quota, &config.solver, policy.lambda()));
            match learned {
                Ok(report) => {
                    epochs.push(EpochRecord {
                        epoch: EpochSchedule::epoch_of(t + 1),
                        first_round: t + 1,
                        lambda: report.policy.lambda().to_vec(),
                        residual: report.residual,
                        iterations: report.iterations,
                    });
                    policy = report.policy;
                }
                Err(e) => {
                    termination = Termination::SolverFailure { round: t, message: e.to_string() };
                    break;
                }
            }
        }
    }

    Ok(MechanismOutcome {
        termination,
        rounds_played: winners.len(),
        capacities,
        items_won,
        utility,
        epochs,
        first_cap_round,
        rejects,
        trace,
    })
}

/// Winner when the agents in `capped` are at capacity.
pub fn capacity_rule<T: Scalar, R: Rng + ?Sized>(
    capped: &[usize],
    policy: &GreedyPolicy<T>,
    reports: &[T],
    rule: CappedRule,
    rng: &mut R,
) -> Result<usize> {
    let n = policy.n();
    if capped.is_empty() {
        return policy.allocate(reports, rng);
    }
    let open: Vec<usize> = (0..n).filter(|i| !capped.contains(i)).collect();
    if open.is_empty() {
        return Err(Error::InvalidConfig("every agent is at capacity".into()));
    }
    match rule {
        CappedRule::Uniform => Ok(open[rng.gen_range(0..open.len())]),
        CappedRule::RestrictedGreedy => {
            let masked: Vec<T> = (0..n)
                .map(|i| if capped.contains(&i) { T::neg_infinity() } else { reports[i] })
                .collect();
            policy.allocate(&masked, rng)
        }
    }
}
