//! Discrete-choice estimation and inference on a small columnar frame.

mod attenuation;
mod binary;
mod mnl;
mod stats;

use std::collections::BTreeSet;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use attenuation::{attenuation_monte_carlo, AttenuationConfig, AttenuationPoint};
pub use binary::{average_marginal_effects, binary_loglik_gradient, fit_logit, fit_probit, Ame, BinaryFit, BinaryLink};
pub use mnl::{amemiya_compare, fit_mnl, mnl_loglik_gradient, AmemiyaRow, MnlFit};
pub use stats::{correlation_matrix, standardize, Correlation, CorrelationMatrix, SdConvention};

pub const INTERCEPT: &str = "const";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EconError {
    #[error("unknown column `{0}`")]
    UnknownColumn(String),
    #[error("duplicate column `{0}`")]
    DuplicateColumn(String),
    #[error("column `{name}` has {found} rows, frame has {expected}")]
    LengthMismatch { name: String, expected: usize, found: usize },
    #[error("invalid regression spec: {0}")]
    InvalidSpec(String),
    #[error("zero variance in reference sample")]
    ZeroVariance,
    #[error("only {n} complete observations for `{a}` and `{b}`")]
    InsufficientObservations { a: String, b: String, n: usize },
    #[error("outcome `{0}` must be coded 0/1")]
    NonBinaryOutcome(String),
    #[error("design matrix is rank deficient")]
    RankDeficient,
    #[error("separation: coefficients diverge")]
    Separation,
    #[error("optimizer did not converge")]
    NotConverged,
    #[error("outcome needs at least two categories")]
    TooFewCategories,
    #[error("base category {0} not present in outcome")]
    MissingBaseCategory(f64),
    #[error("category {0} has no observations")]
    EmptyCategory(f64),
    #[error("regressor `{0}` not in fit")]
    UnknownRegressor(String),
    #[error("regressor sets differ between fits")]
    MismatchedRegressors,
    #[error("invalid config: {0}")]
    InvalidConfig(String),
}

/// Named numeric columns of equal length. `NaN` marks a missing value.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Frame {
    names: Vec<String>,
    columns: Vec<Vec<f64>>,
}

impl Frame {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn nrows(&self) -> usize {
        self.columns.first().map_or(0, Vec::len)
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn push(&mut self, name: impl Into<String>, values: Vec<f64>) -> Result<(), EconError> {
        let name = name.into();
        if self.names.contains(&name) {
            return Err(EconError::DuplicateColumn(name));
        }
        if !self.columns.is_empty() && values.len() != self.nrows() {
            return Err(EconError::LengthMismatch { name, expected: self.nrows(), found: values.len() });
        }
        self.names.push(name);
        self.columns.push(values);
        Ok(())
    }

    pub fn with(mut self, name: impl Into<String>, values: Vec<f64>) -> Result<Self, EconError> {
        self.push(name, values)?;
        Ok(self)
    }

    /// Replaces an existing column or appends a new one.
    pub fn set(&mut self, name: &str, values: Vec<f64>) -> Result<(), EconError> {
        match self.names.iter().position(|n| n == name) {
            Some(i) if values.len() == self.nrows() => {
                self.columns[i] = values;
                Ok(())
            }
            Some(_) => Err(EconError::LengthMismatch {
                name: name.to_string(),
                expected: self.nrows(),
                found: values.len(),
            }),
            None => self.push(name, values),
        }
    }

    pub fn column(&self, name: &str) -> Result<&[f64], EconError> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|i| self.columns[i].as_slice())
            .ok_or_else(|| EconError::UnknownColumn(name.to_string()))
    }

    /// Rows where every listed column is finite.
    pub fn complete_rows(&self, names: &[&str]) -> Result<Vec<usize>, EconError> {
        let cols: Vec<&[f64]> = names.iter().map(|n| self.column(n)).collect::<Result<_, _>>()?;
        Ok((0..self.nrows()).filter(|&i| cols.iter().all(|c| c[i].is_finite())).collect())
    }

    /// Keeps only the given rows, in order.
    pub fn take_rows(&self, rows: &[usize]) -> Frame {
        Frame {
            names: self.names.clone(),
            columns: self.columns.iter().map(|c| rows.iter().map(|&i| c[i]).collect()).collect(),
        }
    }
}

/// Outcome, regressors and inference options for one regression.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegressionSpec {
    pub outcome: String,
    pub regressors: Vec<String>,
    /// Regressors whose marginal effect is the discrete change from 0 to 1.
    pub binary: BTreeSet<String>,
    pub robust: bool,
}

impl RegressionSpec {
    pub fn new<S: AsRef<str>>(outcome: &str, regressors: &[S]) -> Self {
        Self {
            outcome: outcome.to_string(),
            regressors: regressors.iter().map(|s| s.as_ref().to_string()).collect(),
            binary: BTreeSet::new(),
            robust: true,
        }
    }

    pub fn with_binary<S: AsRef<str>>(mut self, names: &[S]) -> Self {
        self.binary.extend(names.iter().map(|s| s.as_ref().to_string()));
        self
    }

    pub fn with_robust(mut self, robust: bool) -> Self {
        self.robust = robust;
        self
    }

    pub fn validate(&self) -> Result<(), EconError> {
        let mut seen = BTreeSet::new();
        for r in &self.regressors {
            if r == INTERCEPT {
                return Err(EconError::InvalidSpec(format!("`{INTERCEPT}` is added automatically")));
            }
            if !seen.insert(r) {
                return Err(EconError::DuplicateColumn(r.clone()));
            }
        }
        if seen.contains(&self.outcome) {
            return Err(EconError::InvalidSpec("outcome listed among regressors".into()));
        }
        if let Some(b) = self.binary.iter().find(|b| !seen.contains(b)) {
            return Err(EconError::UnknownRegressor(b.clone()));
        }
        Ok(())
    }

    /// Coefficient names, intercept first.
    pub fn coefficient_names(&self) -> Vec<String> {
        std::iter::once(INTERCEPT.to_string()).chain(self.regressors.iter().cloned()).collect()
    }
}

/// Listwise-complete design matrix with an intercept column, and the outcome.
pub(crate) fn design(spec: &RegressionSpec, frame: &Frame) -> Result<(DMatrix<f64>, DVector<f64>), EconError> {
    spec.validate()?;
    let mut cols: Vec<&str> = vec![spec.outcome.as_str()];
    cols.extend(spec.regressors.iter().map(String::as_str));
    let rows = frame.complete_rows(&cols)?;
    let y = frame.column(&spec.outcome)?;
    let regs: Vec<&[f64]> =
        spec.regressors.iter().map(|r| frame.column(r)).collect::<Result<_, _>>()?;
    let k = regs.len() + 1;
    let x = DMatrix::from_fn(rows.len(), k, |i, j| if j == 0 { 1.0 } else { regs[j - 1][rows[i]] });
    let y = DVector::from_iterator(rows.len(), rows.iter().map(|&i| y[i]));
    if rows.len() < k {
        return Err(EconError::RankDeficient);
    }
    check_rank(&x)?;
    Ok((x, y))
}

fn check_rank(x: &DMatrix<f64>) -> Result<(), EconError> {
    let sv = x.clone().svd(false, false).singular_values;
    let max = sv.max();
    if !(max > 0.0) || sv.min() <= 1e-10 * max {
        return Err(EconError::RankDeficient);
    }
    Ok(())
}

/// `H⁻¹ (Σ sᵢsᵢ') H⁻¹`, or `−H⁻¹` when not robust.
pub(crate) fn covariance(
    hessian: &DMatrix<f64>,
    scores: &DMatrix<f64>,
    robust: bool,
) -> Result<DMatrix<f64>, EconError> {
    let neg = -hessian.clone();
    let inv = neg.cholesky().ok_or(EconError::RankDeficient)?.inverse();
    if robust {
        let meat = scores.transpose() * scores;
        Ok(&inv * meat * &inv)
    } else {
        Ok(inv)
    }
}

/// Two-sided normal p-value.
pub fn normal_p_value(z: f64) -> f64 {
    2.0 * crate::scalar::normal::sf(z.abs())
}
