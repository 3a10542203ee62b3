//! CSV readers and writers for the study input files.
//!
//! | file | columns |
//! |------|---------|
//! | history | `respondent,year,status,supervised,age` |
//! | covariates | `respondent,age,female,married,children,education` |
//! | measurements | `respondent,year,instrument,item,value` |
//! | attitudes | estimator results table |

use std::collections::BTreeMap;
use std::io::{Read, Write};

use serde::de::DeserializeOwned;
use serde::Serialize;

use super::analysis::Covariates;
use super::history::EmploymentHistoryRow;
use super::indices::Measurement;
use super::PipelineError;
use crate::domain::RespondentId;
use crate::estimate::read_results_table;

fn read_all<T: DeserializeOwned, R: Read>(input: R) -> Result<Vec<T>, PipelineError> {
    csv::Reader::from_reader(input).deserialize().map(|r| r.map_err(PipelineError::from)).collect()
}

fn write_all<T: Serialize, W: Write>(out: W, rows: &[T]) -> Result<(), PipelineError> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_history<R: Read>(input: R) -> Result<Vec<EmploymentHistoryRow>, PipelineError> {
    read_all(input)
}

pub fn write_history<W: Write>(out: W, rows: &[EmploymentHistoryRow]) -> Result<(), PipelineError> {
    write_all(out, rows)
}

pub fn read_covariates<R: Read>(input: R) -> Result<Vec<Covariates>, PipelineError> {
    read_all(input)
}

pub fn write_covariates<W: Write>(out: W, rows: &[Covariates]) -> Result<(), PipelineError> {
    write_all(out, rows)
}

pub fn read_measurements<R: Read>(input: R) -> Result<Vec<Measurement>, PipelineError> {
    read_all(input)
}

pub fn write_measurements<W: Write>(out: W, rows: &[Measurement]) -> Result<(), PipelineError> {
    write_all(out, rows)
}

/// (aversion, sensitivity) for every respondent whose estimation succeeded.
pub fn read_attitudes<R: Read>(input: R) -> Result<BTreeMap<RespondentId, (f64, f64)>, PipelineError> {
    Ok(read_results_table(input)?
        .into_iter()
        .filter_map(|r| Some((r.respondent, (r.aversion?, r.sensitivity?))))
        .collect())
}
