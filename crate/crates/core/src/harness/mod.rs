//! Experiment runners, configuration and output.

pub mod config;
pub mod experiments;
pub mod output;

pub use config::{ExperimentConfig, SigmaCell, SlackRule, WidthRule};
pub use experiments::{
    run_corollary_check, run_lemma_suite, run_mismatch_scan, run_phase_scan, CorollaryRecord, CorollarySummary,
    LemmaRecord, MismatchCell, MismatchRecord, Report, ScanCell, ScanRecord, Status,
};
pub use output::{git_blob_sha1, manifest_path, to_csv, Criterion, OutputDigest, RunManifest};
