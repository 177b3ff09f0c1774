//! Aggregates and report files.
//!
//! A report directory holds `trials.csv` (one row per trial), `summary.json`
//! (one entry per cell) and `timings.csv` (wall time per trial). The first
//! two depend only on the experiment spec; timings do not.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::run::{CellStatus, ExperimentOutcome, TrialRecord, TrialTiming};
use super::spec::CellSpec;
use crate::error::{Error, Result};
use crate::io::{to_json_string, write_json};
use crate::oracle::stable_subtree_bound;
use crate::recon::ReconConfig;

pub const SCHEMA_VERSION: u32 = 1;

/// Normal quantile for 95% intervals.
pub const Z95: f64 = 1.959_963_984_540_054;

/// Wilson score interval for `successes` out of `n`.
pub fn wilson(successes: u64, n: u64, z: f64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let n = n as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let centre = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    let lo = if successes == 0 { 0.0 } else { (centre - half).max(0.0) };
    let hi = if successes as f64 == n { 1.0 } else { (centre + half).min(1.0) };
    (lo, hi)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Proportion {
    pub successes: u64,
    pub n: u64,
    pub estimate: f64,
    /// 95% Wilson interval.
    pub ci: [f64; 2],
}

impl Proportion {
    pub fn new(successes: u64, n: u64) -> Self {
        let (lo, hi) = wilson(successes, n, Z95);
        Proportion {
            successes,
            n,
            estimate: if n == 0 { 0.0 } else { successes as f64 / n as f64 },
            ci: [lo, hi],
        }
    }

    fn count<'a, T: 'a>(items: impl IntoIterator<Item = &'a T>, flag: impl Fn(&T) -> Option<bool>) -> Option<Self> {
        let (mut hit, mut n) = (0, 0);
        for x in items {
            if let Some(f) = flag(x) {
                n += 1;
                hit += f as u64;
            }
        }
        (n > 0).then(|| Proportion::new(hit, n))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Mean {
    pub n: usize,
    pub mean: f64,
    /// 95% normal interval.
    pub ci: [f64; 2],
}

impl Mean {
    pub fn of(xs: impl IntoIterator<Item = f64>) -> Option<Self> {
        let xs: Vec<f64> = xs.into_iter().collect();
        if xs.is_empty() {
            return None;
        }
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = if xs.len() > 1 {
            xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        let half = Z95 * (var / n).sqrt();
        Some(Mean {
            n: xs.len(),
            mean,
            ci: [mean - half, mean + half],
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub index: usize,
    #[serde(flatten)]
    pub status: CellStatus,
    pub spec: CellSpec,
    pub config: Option<ReconConfig>,
    pub trials: usize,
    pub agreement: Option<Mean>,
    /// Mean agreement over trials where the stable subtree exists.
    pub agreement_given_stable: Option<Mean>,
    pub adversarial_agreement: Option<Mean>,
    pub exact_length_runs: usize,
    pub root_failures: usize,
    pub length_event: Option<Proportion>,
    pub stable_event: Option<Proportion>,
    pub event_e: Option<Proportion>,
    /// `1 - ` the stable-subtree frequency.
    pub chi_hat: Option<f64>,
    /// Per internal node, by the edge records.
    pub radioactivity: Option<Proportion>,
    /// Per internal node, as declared by the reconstruction.
    pub declared_radioactivity: Option<Proportion>,
    /// Stable-subtree bound at the measured radioactivity rate.
    pub stable_bound: Option<f64>,
    /// Anchor triples on stable parents separated at `gamma`.
    pub anchor_separation: Option<Proportion>,
    pub shift_violations: usize,
    pub domination_violations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub schema_version: u32,
    pub experiment: String,
    pub seed: u64,
    pub trials_per_cell: u64,
    pub cells: Vec<CellSummary>,
}

pub fn summarize_cell(
    index: usize,
    status: CellStatus,
    spec: CellSpec,
    config: Option<ReconConfig>,
    records: &[&TrialRecord],
) -> CellSummary {
    let sum = |f: &dyn Fn(&TrialRecord) -> Option<usize>| records.iter().filter_map(|r| f(r)).sum::<usize>() as u64;
    let node_rate = |f: &dyn Fn(&TrialRecord) -> Option<usize>| {
        let n: u64 = records.iter().filter(|r| f(r).is_some()).map(|r| r.internal_nodes as u64).sum();
        (n > 0).then(|| Proportion::new(sum(f), n))
    };
    let stable_event = Proportion::count(records.iter().copied(), |r| r.stable_event);
    let radioactivity = node_rate(&|r| r.true_radioactive_nodes);
    let anchor_samples = sum(&|r| r.anchor_samples);
    CellSummary {
        index,
        status,
        config,
        trials: records.len(),
        agreement: Mean::of(records.iter().map(|r| r.agreement)),
        agreement_given_stable: Mean::of(
            records
                .iter()
                .filter(|r| r.stable_event == Some(true))
                .map(|r| r.agreement),
        ),
        adversarial_agreement: Mean::of(records.iter().filter_map(|r| r.adversarial_agreement)),
        exact_length_runs: records.iter().filter(|r| r.output_len == spec.k).count(),
        root_failures: records.iter().filter(|r| r.root_failed).count(),
        length_event: Proportion::count(records.iter().copied(), |r| Some(r.length_event)),
        stable_event,
        event_e: Proportion::count(records.iter().copied(), |r| r.event_e),
        chi_hat: stable_event.map(|p| 1.0 - p.estimate),
        radioactivity,
        declared_radioactivity: node_rate(&|r| Some(r.radioactive_nodes)),
        stable_bound: radioactivity.map(|p| stable_subtree_bound(p.estimate, spec.d, spec.height)),
        anchor_separation: (anchor_samples > 0).then(|| Proportion::new(sum(&|r| r.anchor_separated), anchor_samples)),
        shift_violations: sum(&|r| r.shift_violations) as usize,
        domination_violations: sum(&|r| r.domination_violations) as usize,
        spec,
    }
}

pub fn summarize(outcome: &ExperimentOutcome) -> Summary {
    Summary {
        schema_version: SCHEMA_VERSION,
        experiment: outcome.spec.name.clone(),
        seed: outcome.spec.seed,
        trials_per_cell: outcome.spec.trials,
        cells: outcome
            .cells
            .iter()
            .map(|c| {
                let recs: Vec<&TrialRecord> = outcome.cell_records(c.index).collect();
                summarize_cell(c.index, c.status.clone(), c.spec.clone(), c.config, &recs)
            })
            .collect(),
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReportPaths {
    pub trials: PathBuf,
    pub summary: PathBuf,
    pub timings: PathBuf,
}

fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| with_path(path, e))?;
    for r in rows {
        w.serialize(r).map_err(|e| with_path(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn with_path(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        kind => Error::Parse {
            path: path.to_path_buf(),
            line: 0,
            msg: format!("{kind:?}"),
        },
    }
}

/// Writes the three report files into `dir`, creating it if needed.
pub fn emit_report(outcome: &ExperimentOutcome, dir: &Path) -> Result<ReportPaths> {
    if outcome.records.is_empty() && outcome.cells.is_empty() {
        return Err(Error::InvalidConfig("nothing to report".into()));
    }
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let paths = ReportPaths {
        trials: dir.join("trials.csv"),
        summary: dir.join("summary.json"),
        timings: dir.join("timings.csv"),
    };
    write_trials_csv(&paths.trials, &outcome.records)?;
    write_json(&paths.summary, &summarize(outcome))?;
    write_csv(&paths.timings, &outcome.timings)?;
    Ok(paths)
}

/// Writes a header even when there are no rows.
pub fn write_trials_csv(path: &Path, records: &[TrialRecord]) -> Result<()> {
    if records.is_empty() {
        let header = TRIAL_COLUMNS.join(",") + "\n";
        return std::fs::write(path, header).map_err(|e| Error::io(path, e));
    }
    write_csv(path, records)
}

pub fn read_trials_csv(path: &Path) -> Result<Vec<TrialRecord>> {
    read_csv(path)
}

pub fn read_timings_csv(path: &Path) -> Result<Vec<TrialTiming>> {
    read_csv(path)
}

fn read_csv<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| with_path(path, e))?;
    r.deserialize()
        .map(|row| {
            row.map_err(|e| {
                let line = e.position().map_or(0, |p| p.line() as usize);
                Error::Parse {
                    path: path.to_path_buf(),
                    line,
                    msg: e.to_string(),
                }
            })
        })
        .collect()
}

/// Column order of `trials.csv`.
pub const TRIAL_COLUMNS: [&str; 30] = [
    "cell",
    "trial",
    "seed",
    "length_event",
    "min_len",
    "max_len",
    "agreement",
    "output_len",
    "padded",
    "truncated",
    "root_failed",
    "radioactive_nodes",
    "internal_nodes",
    "true_radioactive_nodes",
    "stable_event",
    "event_e",
    "first_failure",
    "adversarial_agreement",
    "anchor_samples",
    "anchor_separated",
    "anchor_events",
    "anchor_failures",
    "bias_events",
    "bias_failures",
    "shift_checked",
    "shift_violations",
    "shift_exact",
    "domination_checked",
    "domination_violations",
    "dominated",
];

/// The summary as a JSON string.
pub fn summary_json(outcome: &ExperimentOutcome) -> Result<String> {
    to_json_string(&summarize(outcome))
}
