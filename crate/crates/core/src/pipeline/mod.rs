//! Study data: classification, covariate indices, analysis sample, tables.

mod analysis;
mod history;
mod indices;
mod io;
pub mod synthetic;
mod tables;

use thiserror::Error;

use crate::econometrics::EconError;

pub use analysis::{
    apply_filters, build_analysis, duration_correlation, mnl_frame, regression_frame, regression_spec, AnalysisConfig,
    AnalysisRow, Covariates, DurationCorrelation, Education, MnlCategory, OutcomeKind, SampleFilter, StudyInputs,
    BINARY_REGRESSORS, REGRESSORS, variable_frame,
};
pub use history::{
    classify_occupation, collapse_years, growth_flags, latest_spell, on_call_or_temp, ClassificationMode,
    EmploymentHistoryRow, GrowthFlags, Occupation, Spell, StatusCode, Window,
};
pub use indices::{
    cognitive_indices, combine_cognitive, combine_risk, optimism_index, optimism_indices, risk_indices, IndexValue,
    Instrument, Measurement, DEFAULT_OPTIMISM_REVERSED, RISK_QUALITATIVE_WEIGHT,
};
pub use io::{
    read_attitudes, read_covariates, read_history, read_measurements, write_covariates, write_history,
    write_measurements,
};
pub use tables::{
    descriptive_table, format_cell, parse_correlation_table, parse_descriptive_table, parse_regression_table,
    render_correlation_table, render_descriptive_table, render_duration_table, render_regression_table, stars,
    Cell, DescriptiveRow, DescriptiveTable, ParsedCorrelations, RegressionColumn, RegressionTable,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PipelineError {
    #[error("unknown status code `{0}`")]
    UnknownStatus(String),
    #[error("unknown classification mode `{0}`")]
    UnknownMode(String),
    #[error("unknown instrument `{0}`")]
    UnknownInstrument(String),
    #[error("unknown sample filter `{0}`")]
    UnknownFilter(String),
    #[error("unknown outcome `{0}`")]
    UnknownOutcome(String),
    #[error("unknown education level `{0}`")]
    UnknownEducation(String),
    #[error("employment history is empty")]
    EmptyHistory,
    #[error("no observations for the {0} index")]
    MissingIndex(&'static str),
    #[error("{what} out of range: {value}")]
    OutOfRange { what: &'static str, value: f64 },
    #[error("{what} has no variance in {year}")]
    DegenerateComponent { what: &'static str, year: i32 },
    #[error("filter `{filter}` does not apply to outcome `{outcome}`")]
    FilterNotApplicable { filter: String, outcome: String },
    #[error("need at least 3 entrants, found {0}")]
    TooFewEntrants(usize),
    #[error("malformed table: {0}")]
    MalformedTable(String),
    #[error(transparent)]
    Econ(#[from] EconError),
    #[error("io: {0}")]
    Io(String),
    #[error("csv: {0}")]
    Csv(String),
}

impl From<std::io::Error> for PipelineError {
    fn from(e: std::io::Error) -> Self {
        PipelineError::Io(e.to_string())
    }
}

impl From<csv::Error> for PipelineError {
    fn from(e: csv::Error) -> Self {
        PipelineError::Csv(e.to_string())
    }
}
