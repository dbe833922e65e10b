//! Experiment plumbing: configuration files, the sample cache, audit reports
//! and figure reproduction.
//!
//! Runs are keyed by a [`RunKey`] (spec, pair, auditor, seed); its SHA-256 is
//! the `config_hash` column of every CSV row, and the JSONL report carries the
//! key itself so any row can be re-run on its own.

mod cache;
mod config;
mod report;
mod reproduce;

pub use cache::{run_sample, BatchKey, CacheEntry, SampleCache, Stored};
pub use config::{ExperimentConfig, Grid, OutputPaths, DEFAULT_SAMPLE_BATCH};
pub use report::{ground_truth, run_audit, AuditRecord, AuditReport, RunKey, AUDIT_CSV_HEADER};
pub use reproduce::{
    reproduce, Case, FigureData, FigurePlan, FigureRow, FIGURES, FIGURE_CSV_HEADER,
};
