//! Epoch-based online allocation with quotas, a misreport detector and
//! strategic agent models.
//!
//! The numerical core is generic over [`Scalar`] (`f32` or `f64`); the
//! aliases below fix it to `f64`.

pub mod agents;
pub mod detection;
pub mod distributions;
pub mod error;
pub mod harness;
pub mod mechanism;
pub mod scalar;
pub mod transport;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type ValueDistribution = distributions::ValueDistribution<f64>;
pub type EmpiricalCdf = distributions::EmpiricalCdf<f64>;
pub type GreedyPolicy = transport::GreedyPolicy<f64>;
pub type Quota = transport::Quota<f64>;
pub type SolverConfig = transport::SolverConfig<f64>;
pub type SolverReport = transport::SolverReport<f64>;
pub type DetectorConfig = detection::DetectorConfig<f64>;
pub type DetectorState = detection::DetectorState<f64>;
pub type ReportStrategy = agents::ReportStrategy<f64>;
pub type MechanismConfig = mechanism::MechanismConfig<f64>;
pub type MechanismOutcome = mechanism::MechanismOutcome<f64>;
