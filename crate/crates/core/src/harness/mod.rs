//! Experiment driver: parameter grids, parallel trials, reports and
//! per-lemma verdicts.

pub mod lemmas;
pub mod report;
pub mod run;
pub mod spec;

pub use report::{emit_report, read_trials_csv, summarize, wilson, CellSummary, Summary};
pub use run::{run_experiment, run_trial, CellStatus, ExperimentOutcome, TrialRecord};
pub use spec::{CellSpec, ExperimentSpec, Grid, IndelSpec, Layout, DEFAULT_EPSILON};
