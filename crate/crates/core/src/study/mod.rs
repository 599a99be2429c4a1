//! Convergence studies: sweep configuration, error tables with rates, plot
//! data, and regeneration of published reference values.

mod config;
mod golden;
mod report;
mod run;

pub use config::{
    Coupling, ErrorNorm, ExperimentConfig, ExperimentKind, GradingExpr, OutputFormat, PdeProblemKind,
};
pub use golden::{
    agrees_to_digits, check_table, golden_config, golden_rows, CheckOutcome, GoldenRow, GoldenTable,
};
pub use report::{
    compute_rates, emit_pointwise_plot_data, parse_csv, write_csv, write_markdown, write_pointwise_series,
    ErrorReport, PointwiseSeries, RateBase, ReportRow,
};
pub use run::run_experiment;
