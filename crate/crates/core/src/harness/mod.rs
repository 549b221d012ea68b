//! Replicated experiments: regret against the offline benchmark, paired
//! incentive runs, horizon sweeps and their on-disk reports.

mod experiments;
pub mod report;
mod scenario;
pub mod stats;

pub use experiments::{
    benchmark, benchmark_utility, bic_scale, bic_sweep, root_t_log_t, run_bic_experiment,
    run_scenario, static_policy_utilities, sweep, BicGainReport, BicSweepReport, RegretReport,
    RunOptions, ScenarioRun, SeedRegret, SweepPoint, SweepReport, BOOTSTRAP_RESAMPLES,
};
pub use scenario::{BicSpec, DistributionSpec, Scenario};
