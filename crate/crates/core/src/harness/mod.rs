//! Synthetic data, UCR-format ingestion, the experiment runner, reports
//! and plots.

pub mod data;
pub mod experiment;
pub mod plot;
pub mod report;
pub mod synth;

pub use data::{load_ucr_files, load_ucr_tsv, save_ucr_tsv, Dataset};
pub use experiment::{
    explain, run_experiment, run_with_model, AttributionSet, CalibrationMode, DatasetRef,
    ExperimentConfig, ExperimentReport, ModelRef, SampleAttribution, SpaceEntry,
};
pub use plot::{emit_attribution_plot, render_attribution_svg};
pub use report::{
    emit_report, format_cell, render_csv, render_markdown, render_report, space_display_name,
    write_attribution_csv, write_outputs, ReportFormat,
};
pub use synth::{synth_dataset, synth_with_truth, SynthKind, SynthOutput, SynthParams, SynthSpec};
