use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use super::{EconError, Frame};

/// Divisor used for the standard deviation.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SdConvention {
    /// Divide by n.
    #[default]
    Population,
    /// Divide by n − 1.
    Sample,
}

/// Z-scores `column` with the mean and SD of the rows where `reference` is
/// true. Rows outside the reference use the same transformation; missing
/// values stay missing.
pub fn standardize(column: &[f64], reference: &[bool], convention: SdConvention) -> Result<Vec<f64>, EconError> {
    if column.len() != reference.len() {
        return Err(EconError::LengthMismatch {
            name: "reference".into(),
            expected: column.len(),
            found: reference.len(),
        });
    }
    let vals: Vec<f64> = column
        .iter()
        .zip(reference)
        .filter(|(v, r)| **r && v.is_finite())
        .map(|(v, _)| *v)
        .collect();
    let n = vals.len() as f64;
    let divisor = match convention {
        SdConvention::Population => n,
        SdConvention::Sample => n - 1.0,
    };
    if !(divisor > 0.0) {
        return Err(EconError::ZeroVariance);
    }
    let mean = vals.iter().sum::<f64>() / n;
    let sd = (vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / divisor).sqrt();
    if !(sd > 0.0) {
        return Err(EconError::ZeroVariance);
    }
    Ok(column.iter().map(|v| (v - mean) / sd).collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Correlation {
    pub r: f64,
    /// Two-sided p-value from the t transform with n − 2 degrees of freedom.
    pub p: f64,
    pub n: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrelationMatrix {
    pub names: Vec<String>,
    /// Row-major, `cells[i][j]` pairs `names[i]` with `names[j]`.
    pub cells: Vec<Vec<Correlation>>,
}

impl CorrelationMatrix {
    pub fn get(&self, a: &str, b: &str) -> Option<Correlation> {
        let i = self.names.iter().position(|n| n == a)?;
        let j = self.names.iter().position(|n| n == b)?;
        Some(self.cells[i][j])
    }
}

fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx).powi(2);
        syy += (b - my).powi(2);
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

fn p_value(r: f64, n: usize) -> f64 {
    if r.abs() >= 1.0 {
        return 0.0;
    }
    let df = (n - 2) as f64;
    let t = r * (df / (1.0 - r * r)).sqrt();
    let dist = StudentsT::new(0.0, 1.0, df).expect("df positive");
    2.0 * dist.sf(t.abs())
}

/// Pairwise-complete Pearson correlations.
pub fn correlation_matrix<S: AsRef<str>>(frame: &Frame, columns: &[S]) -> Result<CorrelationMatrix, EconError> {
    let names: Vec<String> = columns.iter().map(|c| c.as_ref().to_string()).collect();
    let data: Vec<&[f64]> = names.iter().map(|c| frame.column(c)).collect::<Result<_, _>>()?;
    let mut cells = vec![Vec::with_capacity(names.len()); names.len()];
    for i in 0..names.len() {
        for j in 0..names.len() {
            let (x, y): (Vec<f64>, Vec<f64>) = data[i]
                .iter()
                .zip(data[j])
                .filter(|(a, b)| a.is_finite() && b.is_finite())
                .map(|(a, b)| (*a, *b))
                .unzip();
            let n = x.len();
            if n < 3 {
                return Err(EconError::InsufficientObservations { a: names[i].clone(), b: names[j].clone(), n });
            }
            let r = pearson(&x, &y).ok_or(EconError::ZeroVariance)?;
            cells[i].push(Correlation { r, p: p_value(r, n), n });
        }
    }
    Ok(CorrelationMatrix { names, cells })
}
