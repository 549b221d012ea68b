//! JSON and CSV output of experiment results.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mechanism::MechanismOutcome;

use super::experiments::{BicSweepReport, RegretReport, ScenarioRun, SweepReport};
use super::scenario::Scenario;

fn io<E: std::fmt::Display>(path: &Path) -> impl Fn(E) -> Error + '_ {
    move |e| Error::Io(format!("{}: {e}", path.display()))
}

pub fn write_json<V: Serialize>(path: &Path, value: &V) -> Result<()> {
    let f = File::create(path).map_err(io(path))?;
    serde_json::to_writer_pretty(BufWriter::new(f), value).map_err(io(path))
}

pub fn read_json<V: DeserializeOwned>(path: &Path) -> Result<V> {
    let text = fs::read_to_string(path).map_err(io(path))?;
    serde_json::from_str(&text).map_err(io(path))
}

/// One `(seed, agent)` line of `per_seed.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedRow {
    pub seed: u64,
    #[serde(rename = "T")]
    pub horizon: usize,
    pub agent: usize,
    pub regret: f64,
    pub utility: f64,
    pub termination: String,
    pub termination_round: Option<usize>,
}

pub fn regret_rows(r: &RegretReport) -> Vec<SeedRow> {
    r.per_seed
        .iter()
        .flat_map(|s| {
            (0..r.n).map(move |i| SeedRow {
                seed: s.seed,
                horizon: r.horizon,
                agent: i,
                regret: s.regret[i],
                utility: s.utility[i],
                termination: s.termination.clone(),
                termination_round: s.termination_round,
            })
        })
        .collect()
}

pub fn write_csv<V: Serialize>(path: &Path, rows: &[V]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(io(path))?;
    for r in rows {
        w.serialize(r).map_err(io(path))?;
    }
    w.flush().map_err(io(path))
}

pub fn read_csv<V: DeserializeOwned>(path: &Path) -> Result<Vec<V>> {
    let mut r = csv::Reader::from_path(path).map_err(io(path))?;
    r.deserialize().map(|row| row.map_err(io(path))).collect()
}

/// Contents of `summary.json` for a single-horizon run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub scenario: Scenario,
    pub horizon: usize,
    pub regret: RegretReport,
    pub outcomes: Vec<(u64, MechanismOutcome<f64>)>,
}

/// Writes `summary.json`, `per_seed.csv` and, when recorded, one NDJSON
/// trace per seed under `traces/`.
pub fn write_run(dir: &Path, run: &ScenarioRun) -> Result<()> {
    fs::create_dir_all(dir).map_err(io(dir))?;
    let outcomes = run
        .outcomes
        .iter()
        .map(|(s, o)| (*s, MechanismOutcome { trace: None, ..o.clone() }))
        .collect();
    let summary = RunSummary {
        scenario: run.scenario.clone(),
        horizon: run.horizon,
        regret: run.regret.clone(),
        outcomes,
    };
    write_json(&dir.join("summary.json"), &summary)?;
    write_csv(&dir.join("per_seed.csv"), &regret_rows(&run.regret))?;
    write_traces(dir, run.horizon, &run.outcomes)
}

fn write_traces(dir: &Path, horizon: usize, outcomes: &[(u64, MechanismOutcome<f64>)]) -> Result<()> {
    if outcomes.iter().all(|(_, o)| o.trace.is_none()) {
        return Ok(());
    }
    let tdir = dir.join("traces");
    fs::create_dir_all(&tdir).map_err(io(&tdir))?;
    for (seed, o) in outcomes.iter().filter(|(_, o)| o.trace.is_some()) {
        let path = tdir.join(format!("T{horizon}_seed{seed}.ndjson"));
        let f = File::create(&path).map_err(io(&path))?;
        o.write_trace(BufWriter::new(f)).map_err(io(&path))?;
    }
    Ok(())
}

/// Writes `sweep.json` and a `per_seed.csv` covering every horizon.
pub fn write_sweep(dir: &Path, sweep: &SweepReport) -> Result<()> {
    fs::create_dir_all(dir).map_err(io(dir))?;
    write_json(&dir.join("sweep.json"), sweep)?;
    let rows: Vec<SeedRow> = sweep.runs.iter().flat_map(regret_rows).collect();
    write_csv(&dir.join("per_seed.csv"), &rows)
}

/// One seed of a paired incentive experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GainRow {
    pub seed: u64,
    #[serde(rename = "T")]
    pub horizon: usize,
    pub gain: f64,
    pub truthful_utility: f64,
    pub strategic_utility: f64,
    pub termination: String,
}

/// Writes `bic.json` and `bic_per_seed.csv`.
pub fn write_bic(dir: &Path, report: &BicSweepReport) -> Result<()> {
    fs::create_dir_all(dir).map_err(io(dir))?;
    write_json(&dir.join("bic.json"), report)?;
    let rows: Vec<GainRow> = report
        .points
        .iter()
        .flat_map(|p| {
            (0..p.seeds.len()).map(move |k| GainRow {
                seed: p.seeds[k],
                horizon: p.horizon,
                gain: p.gains[k],
                truthful_utility: p.truthful_utility[k],
                strategic_utility: p.strategic_utility[k],
                termination: p.strategic_terminations[k].clone(),
            })
        })
        .collect();
    write_csv(&dir.join("bic_per_seed.csv"), &rows)
}
