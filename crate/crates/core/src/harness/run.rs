//! The Monte-Carlo driver: one tree per trial, reconstructed and checked.

use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::spec::{CellSpec, ExperimentSpec};
use crate::error::{Error, Result};
use crate::evolution::{evolve_tree_with_budget, ModelParams};
use crate::io::f17;
use crate::oracle::{
    adversarial_reconstruct, anchor_correlation_stats, certify_event_e, check_domination, check_shifts, SubEvent,
};
use crate::recon::{reconstruct_root, ReconConfig};
use crate::rng::{derive_seed, Domain, TieCoins};

/// One CSV row. Oracle columns are empty when the oracle is off; shift and
/// domination columns are filled only on trials where `E` holds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub cell: usize,
    pub trial: u64,
    pub seed: u64,
    pub length_event: bool,
    pub min_len: usize,
    pub max_len: usize,
    /// Fraction of root sites reconstructed correctly.
    #[serde(with = "f17")]
    pub agreement: f64,
    pub output_len: usize,
    pub padded: usize,
    pub truncated: usize,
    pub root_failed: bool,
    /// Internal nodes the reconstruction declared radioactive.
    pub radioactive_nodes: usize,
    pub internal_nodes: usize,
    /// Internal nodes that are radioactive by the edge records.
    pub true_radioactive_nodes: Option<usize>,
    pub stable_event: Option<bool>,
    pub event_e: Option<bool>,
    pub first_failure: Option<SubEvent>,
    #[serde(with = "f17::option")]
    pub adversarial_agreement: Option<f64>,
    /// Anchor triples on stable parents, and those separated at `gamma`.
    pub anchor_samples: Option<usize>,
    pub anchor_separated: Option<usize>,
    pub anchor_events: Option<usize>,
    pub anchor_failures: Option<usize>,
    pub bias_events: Option<usize>,
    pub bias_failures: Option<usize>,
    pub shift_checked: Option<usize>,
    pub shift_violations: Option<usize>,
    pub shift_exact: Option<bool>,
    pub domination_checked: Option<usize>,
    pub domination_violations: Option<usize>,
    pub dominated: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialTiming {
    pub cell: usize,
    pub trial: u64,
    #[serde(with = "f17")]
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum CellStatus {
    Complete,
    /// The time budget ran out after `completed` trials.
    Partial { completed: u64 },
    Infeasible { reason: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellOutcome {
    pub index: usize,
    pub spec: CellSpec,
    #[serde(flatten)]
    pub status: CellStatus,
    pub params: Option<ModelParams>,
    pub config: Option<ReconConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentOutcome {
    pub spec: ExperimentSpec,
    pub cells: Vec<CellOutcome>,
    /// Ordered by cell, then trial.
    pub records: Vec<TrialRecord>,
    pub timings: Vec<TrialTiming>,
}

impl ExperimentOutcome {
    pub fn cell_records(&self, cell: usize) -> impl Iterator<Item = &TrialRecord> {
        self.records.iter().filter(move |r| r.cell == cell)
    }
}

/// Seed of trial `trial` in cell `cell`.
pub fn trial_seed(seed: u64, cell: usize, trial: u64) -> u64 {
    derive_seed(seed, Domain::Trial, cell as u64, trial)
}

/// Simulates, reconstructs and, with `oracle`, checks one tree.
#[allow(clippy::too_many_arguments)]
pub fn run_trial(
    params: &ModelParams,
    config: &ReconConfig,
    zeta: f64,
    oracle: bool,
    node_budget: usize,
    cell: usize,
    trial: u64,
    seed: u64,
) -> Result<TrialRecord> {
    let tree = evolve_tree_with_budget(params, seed, node_budget)?;
    let shape = tree.shape();
    let recon = reconstruct_root(&tree.leaf_bits(), shape, config, &TieCoins::new(seed))?;
    let truth = &tree.root().bits;
    let k = params.k;
    let agreement = recon.bits.iter().zip(truth).filter(|(x, y)| x == y).count() as f64 / k as f64;
    let length = tree.length_stats(zeta);
    let internal = shape.node_count() - shape.leaf_count();
    let mut rec = TrialRecord {
        cell,
        trial,
        seed,
        length_event: length.holds,
        min_len: length.min_len,
        max_len: length.max_len,
        agreement,
        output_len: recon.bits.len(),
        padded: recon.padded,
        truncated: recon.truncated,
        root_failed: recon.failed,
        radioactive_nodes: recon.radioactive_count(),
        internal_nodes: internal,
        true_radioactive_nodes: None,
        stable_event: None,
        event_e: None,
        first_failure: None,
        adversarial_agreement: None,
        anchor_samples: None,
        anchor_separated: None,
        anchor_events: None,
        anchor_failures: None,
        bias_events: None,
        bias_failures: None,
        shift_checked: None,
        shift_violations: None,
        shift_exact: None,
        domination_checked: None,
        domination_violations: None,
        dominated: None,
    };
    if !oracle {
        return Ok(rec);
    }

    let cert = certify_event_e(&tree, config, zeta, seed);
    rec.true_radioactive_nodes = Some(cert.report.radioactive_count());
    rec.stable_event = Some(cert.stable());
    rec.event_e = Some(cert.holds);
    rec.first_failure = cert.first_failure;
    rec.anchor_events = Some(cert.anchor_events);
    rec.anchor_failures = Some(cert.anchor_failures);
    rec.bias_events = Some(cert.bias_events);
    rec.bias_failures = Some(cert.bias_failures);
    let Some(stable) = cert.subtree.as_ref() else { return Ok(rec) };

    let anchors = anchor_correlation_stats(&tree, stable, config.ell, config.a);
    rec.anchor_samples = Some(anchors.samples.len());
    rec.anchor_separated = Some(anchors.samples.iter().filter(|s| s.separated(config.gamma)).count());
    let adv = adversarial_reconstruct(&tree, &cert.report, stable, 0, seed)?;
    rec.adversarial_agreement = Some(1.0 - adv.disagreements() as f64 / k as f64);
    if cert.holds {
        let shifts = check_shifts(&tree, &recon, stable, config.ell);
        rec.shift_checked = Some(shifts.checked);
        rec.shift_violations = Some(shifts.violations);
        rec.shift_exact = Some(shifts.exact());
        let dom = check_domination(truth, &recon.bits, &adv);
        rec.domination_checked = Some(dom.checked);
        rec.domination_violations = Some(dom.violations);
        rec.dominated = Some(dom.violations == 0);
    }
    Ok(rec)
}

/// Runs every cell of `spec` in order. Trials of a cell run in parallel on a
/// pool of `spec.threads` workers; results are collected in trial order.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentOutcome> {
    spec.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(spec.threads.unwrap_or(0))
        .build()
        .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?;
    let mut outcome = ExperimentOutcome {
        spec: spec.clone(),
        cells: Vec::new(),
        records: Vec::new(),
        timings: Vec::new(),
    };
    for (index, cell) in spec.all_cells().into_iter().enumerate() {
        let (params, config) = match cell.build(spec.node_budget) {
            Ok(built) => built,
            Err(e) => {
                log::warn!("cell {index} is infeasible: {e}");
                outcome.cells.push(CellOutcome {
                    index,
                    spec: cell,
                    status: CellStatus::Infeasible { reason: e.to_string() },
                    params: None,
                    config: None,
                });
                continue;
            }
        };
        let start = Instant::now();
        let budget = spec.time_budget_secs.map(Duration::from_secs_f64);
        let chunk = match budget {
            Some(_) => (pool.current_num_threads() as u64 * 2).max(1),
            None => spec.trials,
        };
        let mut rows: Vec<(TrialRecord, f64)> = Vec::new();
        let mut status = CellStatus::Complete;
        let mut next = 0;
        while next < spec.trials {
            if budget.is_some_and(|b| start.elapsed() >= b) {
                status = CellStatus::Partial { completed: next };
                break;
            }
            let end = (next + chunk).min(spec.trials);
            let done: Result<Vec<(TrialRecord, f64)>> = pool.install(|| {
                (next..end)
                    .into_par_iter()
                    .map(|trial| {
                        let t0 = Instant::now();
                        let seed = trial_seed(spec.seed, index, trial);
                        let rec = run_trial(&params, &config, cell.zeta, spec.oracle, spec.node_budget, index, trial, seed)?;
                        Ok((rec, t0.elapsed().as_secs_f64()))
                    })
                    .collect()
            });
            match done {
                Ok(done) => rows.extend(done),
                Err(e) => {
                    status = CellStatus::Infeasible { reason: e.to_string() };
                    rows.clear();
                    break;
                }
            }
            next = end;
        }
        if let CellStatus::Partial { completed } = status {
            log::warn!("cell {index} ran out of time after {completed} of {} trials", spec.trials);
        }
        for (rec, seconds) in rows {
            outcome.timings.push(TrialTiming {
                cell: index,
                trial: rec.trial,
                seconds,
            });
            outcome.records.push(rec);
        }
        outcome.cells.push(CellOutcome {
            index,
            spec: cell,
            status,
            params: Some(params),
            config: Some(config),
        });
    }
    Ok(outcome)
}
