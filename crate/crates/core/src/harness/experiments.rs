use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::agents::{ReportStrategy, Reporter, VisibleHistory};
use crate::distributions::ValueDistribution;
use crate::error::{Error, Result};
use crate::mechanism::{
    agent_stream, run, stream_rng, MechanismOutcome, Termination, ALLOCATION_STREAM, VALUE_STREAM,
};
use crate::transport::{expected_utilities, solve_dual, GreedyPolicy, Quota, SolverConfig, SolverReport};

use super::scenario::Scenario;
use super::stats::{bootstrap_mean_ci, log_log_slope, mean, quantile};

/// Bootstrap resamples for every reported interval.
pub const BOOTSTRAP_RESAMPLES: usize = 10_000;
const BOOTSTRAP_SEED: u64 = 0x5EED_B007;

/// Execution knobs that do not change results.
#[derive(Debug, Clone, Copy, Default)]
pub struct RunOptions {
    /// Worker threads; the global pool when `None`.
    pub threads: Option<usize>,
    pub keep_traces: bool,
}

fn fan_out<R, F>(opts: &RunOptions, seeds: &[u64], f: F) -> Result<Vec<R>>
where
    R: Send,
    F: Fn(u64) -> Result<R> + Sync + Send,
{
    let work = || seeds.par_iter().map(|s| f(*s)).collect::<Result<Vec<R>>>();
    match opts.threads {
        Some(k) => rayon::ThreadPoolBuilder::new()
            .num_threads(k.max(1))
            .build()
            .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?
            .install(work),
        None => work(),
    }
}

/// Per-round utility `E[X_i; i wins]` under the optimal offline policy for
/// the true law.
pub fn benchmark_utility(dist: &ValueDistribution<f64>, quota: &Quota<f64>) -> Result<Vec<f64>> {
    Ok(benchmark(dist, quota)?.1)
}

/// `λ*(F)` together with the benchmark utilities.
pub fn benchmark(
    dist: &ValueDistribution<f64>,
    quota: &Quota<f64>,
) -> Result<(SolverReport<f64>, Vec<f64>)> {
    let report = solve_dual(dist, quota, &SolverConfig::for_dist(dist))?;
    let u = expected_utilities(dist, &report.policy)?;
    Ok((report, u))
}

/// Average per-round utility of each agent under a fixed policy, with no
/// capacities and no detector.
pub fn static_policy_utilities(
    dist: &ValueDistribution<f64>,
    policy: &GreedyPolicy<f64>,
    strategies: &[ReportStrategy<f64>],
    rounds: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    let n = policy.n();
    if strategies.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: strategies.len() });
    }
    let reporters =
        strategies.iter().map(|s| Reporter::new(s.clone(), dist)).collect::<Result<Vec<_>>>()?;
    let mut value_rng = stream_rng(seed, VALUE_STREAM);
    let mut alloc_rng = stream_rng(seed, ALLOCATION_STREAM);
    let mut agent_rngs: Vec<_> = (0..n).map(|i| stream_rng(seed, agent_stream(i))).collect();
    let mut totals = vec![0.0; n];
    let mut values = vec![0.0; n];
    let mut reports = vec![0.0; n];
    for t in 1..=rounds {
        for v in values.iter_mut() {
            *v = dist.sample(&mut value_rng);
        }
        for i in 0..n {
            let h = VisibleHistory {
                agent: i,
                round: t,
                own_true: &[],
                own_reports: &[],
                winners: &[],
                lambda: policy.lambda(),
            };
            reports[i] = reporters[i].report(values[i], &h, &mut agent_rngs[i])?;
        }
        let w = policy.allocate(&reports, &mut alloc_rng)?;
        totals[w] += values[w];
    }
    Ok(totals.into_iter().map(|u| u / rounds.max(1) as f64).collect())
}

/// Regret of one agent in one seeded run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedRegret {
    pub seed: u64,
    pub termination: String,
    pub termination_round: Option<usize>,
    /// `T·E[u_i(X, X, λ*)] - Σ_t u_i`, per agent.
    pub regret: Vec<f64>,
    pub utility: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegretReport {
    pub horizon: usize,
    pub n: usize,
    /// `λ*` of the true law.
    pub lambda_star: Vec<f64>,
    /// Per-round benchmark utility per agent.
    pub benchmark: Vec<f64>,
    pub per_seed: Vec<SeedRegret>,
    /// Seeds dropped because the solver failed inside the run.
    pub failed_seeds: Vec<u64>,
    pub mean: Vec<f64>,
    pub ci: Vec<[f64; 2]>,
    /// Mean over seeds of the agent-averaged regret.
    pub pooled_mean: f64,
    pub pooled_ci: [f64; 2],
    pub max_regret: f64,
}

impl RegretReport {
    pub fn build(
        horizon: usize,
        lambda_star: Vec<f64>,
        benchmark: Vec<f64>,
        outcomes: &[(u64, MechanismOutcome<f64>)],
    ) -> Self {
        let n = benchmark.len();
        let mut per_seed = Vec::new();
        let mut failed_seeds = Vec::new();
        for (seed, out) in outcomes {
            if matches!(out.termination, Termination::SolverFailure { .. }) {
                failed_seeds.push(*seed);
                continue;
            }
            let regret =
                (0..n).map(|i| horizon as f64 * benchmark[i] - out.utility[i]).collect();
            per_seed.push(SeedRegret {
                seed: *seed,
                termination: out.termination.label().to_string(),
                termination_round: out.termination.round(),
                regret,
                utility: out.utility.clone(),
            });
        }
        let column = |i: usize| per_seed.iter().map(|s| s.regret[i]).collect::<Vec<f64>>();
        let mean_v = (0..n).map(|i| mean(&column(i))).collect();
        let ci = (0..n)
            .map(|i| {
                let (lo, hi) = bootstrap_mean_ci(&column(i), 0.95, BOOTSTRAP_RESAMPLES, BOOTSTRAP_SEED);
                [lo, hi]
            })
            .collect();
        let pooled: Vec<f64> = per_seed.iter().map(|s| mean(&s.regret)).collect();
        let (lo, hi) = bootstrap_mean_ci(&pooled, 0.95, BOOTSTRAP_RESAMPLES, BOOTSTRAP_SEED);
        let max_regret = per_seed
            .iter()
            .flat_map(|s| s.regret.iter().copied())
            .fold(f64::NEG_INFINITY, f64::max);
        Self {
            horizon,
            n,
            lambda_star,
            benchmark,
            per_seed,
            failed_seeds,
            mean: mean_v,
            ci,
            pooled_mean: mean(&pooled),
            pooled_ci: [lo, hi],
            max_regret,
        }
    }
}

/// Outcomes of every replication at one horizon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioRun {
    pub scenario: Scenario,
    pub horizon: usize,
    pub outcomes: Vec<(u64, MechanismOutcome<f64>)>,
    pub regret: RegretReport,
}

/// Runs every replication of `s` at `horizon`, ordered by seed.
pub fn run_scenario(s: &Scenario, horizon: usize, opts: &RunOptions) -> Result<ScenarioRun> {
    s.validate()?;
    let dist = s.distribution.build()?;
    let quota = s.quota()?;
    let (star, bench) = benchmark(&dist, &quota)?;
    let strategies = s.strategies();
    let outcomes = fan_out(opts, &s.seeds(), |seed| {
        let mut cfg = s.mechanism_config(horizon, seed)?;
        cfg.record_trace = opts.keep_traces;
        Ok((seed, run(&cfg, &dist, &strategies)?))
    })?;
    let regret = RegretReport::build(horizon, star.policy.lambda().to_vec(), bench, &outcomes);
    Ok(ScenarioRun { scenario: s.clone(), horizon, outcomes, regret })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub horizon: usize,
    pub pooled_mean: f64,
    pub pooled_ci: [f64; 2],
    pub max_regret: f64,
    /// `pooled_mean / √(T ln T)`.
    pub scaled_mean: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub scenario: Scenario,
    pub points: Vec<SweepPoint>,
    /// Log-log slope of the pooled mean regret against `T`.
    pub slope: Option<f64>,
    /// Largest `pooled_mean / √(T ln T)` over the sweep.
    pub fitted_c: f64,
    pub runs: Vec<RegretReport>,
}

/// Regret at every horizon of `s`.
pub fn sweep(s: &Scenario, opts: &RunOptions) -> Result<SweepReport> {
    let mut runs = Vec::new();
    for &t in &s.horizons {
        runs.push(run_scenario(s, t, opts)?.regret);
    }
    let points: Vec<SweepPoint> = runs
        .iter()
        .map(|r| SweepPoint {
            horizon: r.horizon,
            pooled_mean: r.pooled_mean,
            pooled_ci: r.pooled_ci,
            max_regret: r.max_regret,
            scaled_mean: r.pooled_mean / root_t_log_t(r.horizon),
        })
        .collect();
    let xs: Vec<f64> = points.iter().map(|p| p.horizon as f64).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.pooled_mean).collect();
    let fitted_c = points.iter().map(|p| p.scaled_mean).fold(f64::NEG_INFINITY, f64::max);
    Ok(SweepReport { scenario: s.clone(), slope: log_log_slope(&xs, &ys), fitted_c, points, runs })
}

/// `√(T ln T)`, with `T ln T` floored at 1.
pub fn root_t_log_t(t: usize) -> f64 {
    let t = t as f64;
    (t * t.ln()).max(1.0).sqrt()
}

/// `√(nT ln(nT/δ))`.
pub fn bic_scale(n: usize, t: usize, delta: f64) -> f64 {
    let nt = (n * t) as f64;
    (nt * (nt / delta).ln()).sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BicGainReport {
    pub horizon: usize,
    pub strategist: usize,
    pub strategy: ReportStrategy<f64>,
    pub seeds: Vec<u64>,
    /// Strategist's utility in the strategic run minus its utility in the
    /// all-truthful run with the same seed.
    pub gains: Vec<f64>,
    pub truthful_utility: Vec<f64>,
    pub strategic_utility: Vec<f64>,
    pub strategic_terminations: Vec<String>,
    pub mean_gain: f64,
    pub ci: [f64; 2],
    /// `(1 - δ)` quantile of the gains.
    pub upper_quantile: f64,
    /// `√(nT ln(nT/δ))`.
    pub bound_scale: f64,
    pub c: f64,
    /// Share of seeds with gain above `c · bound_scale`.
    pub fraction_exceeding: f64,
    pub failed_seeds: Vec<u64>,
    /// Whether both runs of every pair drew identical true values (checked
    /// only when traces are kept).
    pub pairing_verified: Option<bool>,
}

/// Paired runs: everyone truthful versus `strategist` playing `strategy`,
/// sharing the true-value stream.
pub fn run_bic_experiment(
    s: &Scenario,
    horizon: usize,
    strategist: usize,
    strategy: &ReportStrategy<f64>,
    opts: &RunOptions,
) -> Result<BicGainReport> {
    s.validate()?;
    if strategist >= s.n {
        return Err(Error::InvalidConfig(format!("strategist {strategist} out of range")));
    }
    let dist = s.distribution.build()?;
    let truthful = vec![ReportStrategy::Truthful; s.n];
    let mut deviating = truthful.clone();
    deviating[strategist] = strategy.clone();
    let pairs = fan_out(opts, &s.seeds(), |seed| {
        let mut cfg = s.mechanism_config(horizon, seed)?;
        cfg.record_trace = opts.keep_traces;
        let a = run(&cfg, &dist, &truthful)?;
        let b = run(&cfg, &dist, &deviating)?;
        Ok((seed, a, b))
    })?;
    let mut seeds = Vec::new();
    let mut gains = Vec::new();
    let mut truthful_utility = Vec::new();
    let mut strategic_utility = Vec::new();
    let mut strategic_terminations = Vec::new();
    let mut failed_seeds = Vec::new();
    let mut verified = opts.keep_traces.then_some(true);
    for (seed, a, b) in &pairs {
        let failed = |o: &MechanismOutcome<f64>| matches!(o.termination, Termination::SolverFailure { .. });
        if failed(a) || failed(b) {
            failed_seeds.push(*seed);
            continue;
        }
        if let (Some(ok), Some(ta), Some(tb)) = (verified.as_mut(), &a.trace, &b.trace) {
            *ok &= ta.iter().zip(tb).all(|(x, y)| x.true_values == y.true_values);
        }
        seeds.push(*seed);
        truthful_utility.push(a.utility[strategist]);
        strategic_utility.push(b.utility[strategist]);
        gains.push(b.utility[strategist] - a.utility[strategist]);
        strategic_terminations.push(b.termination.label().to_string());
    }
    let (lo, hi) = bootstrap_mean_ci(&gains, 0.95, BOOTSTRAP_RESAMPLES, BOOTSTRAP_SEED);
    let c = s.bic.as_ref().map_or(1.0, |b| b.c);
    let bound_scale = bic_scale(s.n, horizon, s.detector.delta);
    let exceeding = gains.iter().filter(|g| **g > c * bound_scale).count();
    Ok(BicGainReport {
        horizon,
        strategist,
        strategy: strategy.clone(),
        seeds,
        mean_gain: mean(&gains),
        ci: [lo, hi],
        upper_quantile: quantile(&gains, 1.0 - s.detector.delta),
        bound_scale,
        c,
        fraction_exceeding: exceeding as f64 / gains.len().max(1) as f64,
        gains,
        truthful_utility,
        strategic_utility,
        strategic_terminations,
        failed_seeds,
        pairing_verified: verified,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BicSweepReport {
    pub scenario: Scenario,
    pub points: Vec<BicGainReport>,
    /// Log-log slope of the mean gain, when every mean is positive.
    pub mean_slope: Option<f64>,
    /// Log-log slope of the `(1 - δ)` gain quantile, when every one is positive.
    pub quantile_slope: Option<f64>,
    /// Largest `mean_gain / √(T ln T)` over the sweep.
    pub fitted_c: f64,
}

/// [`run_bic_experiment`] at every horizon of `s`, using its `[bic]` section.
pub fn bic_sweep(s: &Scenario, opts: &RunOptions) -> Result<BicSweepReport> {
    let mut points = Vec::new();
    for &t in &s.horizons {
        let (i, strategy) = s.bic_strategy(t)?;
        points.push(run_bic_experiment(s, t, i, &strategy, opts)?);
    }
    let xs: Vec<f64> = points.iter().map(|p| p.horizon as f64).collect();
    let means: Vec<f64> = points.iter().map(|p| p.mean_gain).collect();
    let quants: Vec<f64> = points.iter().map(|p| p.upper_quantile).collect();
    let fitted_c = points
        .iter()
        .map(|p| p.mean_gain / root_t_log_t(p.horizon))
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(BicSweepReport {
        scenario: s.clone(),
        mean_slope: log_log_slope(&xs, &means),
        quantile_slope: log_log_slope(&xs, &quants),
        fitted_c,
        points,
    })
}
