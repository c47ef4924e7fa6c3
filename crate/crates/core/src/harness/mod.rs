//! Strategy-by-gamma sweeps on a synthetic classification task.
//!
//! For every strategy, replacement probability and repetition the harness
//! augments the training split, trains a [`ToyModel`](crate::ToyModel) and
//! records held-out accuracy. Cells are independent and seeded from the cell
//! key alone, so any one of them can be rerun in isolation.

mod report;
mod specfile;
mod sweep;
mod task;

pub use report::{
    claims, emit_report, parse_report, pivot_csv, read_report, report_text, summary_csv,
    sweep_csv, timing_csv, CLAIM_GAMMA, PIVOT_FILE, REPORT_FILE, SOFT_MARGIN, SUMMARY_FILE,
    SWEEP_FILE, TIMING_FILE,
};
pub use specfile::{parse_sweep_spec, render_sweep_spec};
pub use sweep::{
    run_single_cell, run_sweep, CellKey, CellResult, CellSummary, SweepResult, SweepSpec,
};
pub use task::{make_synthetic_task, token_surface, SyntheticTask, TaskSpec};
