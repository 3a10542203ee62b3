use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{covariance, design, BinaryFit, EconError, Frame, RegressionSpec};
use crate::optim::{newton_maximize, NewtonFailure, NewtonOptions};

#[derive(Clone, Debug, PartialEq)]
pub struct MnlFit {
    /// Coefficient names, intercept first.
    pub names: Vec<String>,
    /// Outcome codes in ascending order.
    pub categories: Vec<f64>,
    pub base: f64,
    /// One coefficient vector per category, aligned with `categories`; the
    /// base category's vector is zero.
    pub coefficients: Vec<DVector<f64>>,
    /// Covariance of the stacked non-base coefficient blocks, in category order.
    pub covariance: DMatrix<f64>,
    pub robust: bool,
    pub loglik: f64,
    pub n: usize,
}

impl MnlFit {
    fn category_index(&self, category: f64) -> Result<usize, EconError> {
        self.categories
            .iter()
            .position(|&c| c == category)
            .ok_or(EconError::EmptyCategory(category))
    }

    fn name_index(&self, name: &str) -> Result<usize, EconError> {
        self.names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| EconError::UnknownRegressor(name.to_string()))
    }

    /// Position of a category's block in the stacked parameter vector.
    fn block(&self, category: f64) -> Result<Option<usize>, EconError> {
        let c = self.category_index(category)?;
        let b = self.category_index(self.base)?;
        Ok(match c.cmp(&b) {
            std::cmp::Ordering::Equal => None,
            std::cmp::Ordering::Less => Some(c),
            std::cmp::Ordering::Greater => Some(c - 1),
        })
    }

    pub fn coefficient(&self, category: f64, name: &str) -> Result<f64, EconError> {
        Ok(self.coefficients[self.category_index(category)?][self.name_index(name)?])
    }

    pub fn se(&self, category: f64, name: &str) -> Result<f64, EconError> {
        let j = self.name_index(name)?;
        Ok(match self.block(category)? {
            None => 0.0,
            Some(b) => {
                let i = b * self.names.len() + j;
                self.covariance[(i, i)].sqrt()
            }
        })
    }

    /// Category probabilities for one design row (intercept first).
    pub fn probabilities(&self, row: &[f64]) -> Vec<f64> {
        let x = DVector::from_column_slice(row);
        let eta: Vec<f64> = self.coefficients.iter().map(|b| b.dot(&x)).collect();
        softmax(&eta)
    }
}

fn softmax(eta: &[f64]) -> Vec<f64> {
    let m = eta.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = eta.iter().map(|v| (v - m).exp()).collect();
    let z: f64 = e.iter().sum();
    e.into_iter().map(|v| v / z).collect()
}

struct Layout {
    /// Category index of each observation.
    choice: Vec<usize>,
    /// Category indices that carry free coefficients.
    free: Vec<usize>,
    categories: usize,
}

fn evaluate(
    x: &DMatrix<f64>,
    lay: &Layout,
    theta: &DVector<f64>,
) -> (f64, DVector<f64>, DMatrix<f64>, DMatrix<f64>) {
    let (n, k) = x.shape();
    let m = lay.free.len();
    let mut betas = vec![DVector::<f64>::zeros(k); lay.categories];
    for (b, &c) in lay.free.iter().enumerate() {
        betas[c] = theta.rows(b * k, k).into_owned();
    }
    let eta = DMatrix::from_fn(n, lay.categories, |i, c| x.row(i).dot(&betas[c].transpose()));
    let mut loglik = 0.0;
    let mut probs = DMatrix::zeros(n, m);
    let mut resid = DMatrix::zeros(n, m);
    for i in 0..n {
        let row: Vec<f64> = eta.row(i).iter().copied().collect();
        let mx = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = mx + row.iter().map(|v| (v - mx).exp()).sum::<f64>().ln();
        loglik += row[lay.choice[i]] - lse;
        for (b, &c) in lay.free.iter().enumerate() {
            let p = (row[c] - lse).exp();
            probs[(i, b)] = p;
            resid[(i, b)] = if lay.choice[i] == c { 1.0 } else { 0.0 } - p;
        }
    }
    let mut scores = DMatrix::zeros(n, m * k);
    for b in 0..m {
        for j in 0..k {
            for i in 0..n {
                scores[(i, b * k + j)] = resid[(i, b)] * x[(i, j)];
            }
        }
    }
    let gradient = scores.row_sum().transpose();
    let mut hessian = DMatrix::zeros(m * k, m * k);
    for a in 0..m {
        for b in a..m {
            let w = DMatrix::from_fn(n, k, |i, j| {
                let pa = probs[(i, a)];
                let pb = probs[(i, b)];
                x[(i, j)] * pa * (if a == b { 1.0 } else { 0.0 } - pb)
            });
            let block = -(x.transpose() * w);
            hessian.view_mut((a * k, b * k), (k, k)).copy_from(&block);
            if a != b {
                hessian.view_mut((b * k, a * k), (k, k)).copy_from(&block.transpose());
            }
        }
    }
    (loglik, gradient, hessian, scores)
}

/// Log-likelihood and gradient of the stacked non-base coefficients, in
/// ascending category order.
pub fn mnl_loglik_gradient(
    spec: &RegressionSpec,
    frame: &Frame,
    base: f64,
    theta: &DVector<f64>,
) -> Result<(f64, DVector<f64>), EconError> {
    let (x, y) = design(spec, frame)?;
    let (_, lay) = layout(&y, base)?;
    let (ll, g, _, _) = evaluate(&x, &lay, theta);
    Ok((ll, g))
}

fn layout(y: &DVector<f64>, base: f64) -> Result<(Vec<f64>, Layout), EconError> {
    let mut categories: Vec<f64> = y.iter().copied().collect();
    categories.sort_by(f64::total_cmp);
    categories.dedup();
    if categories.len() < 2 {
        return Err(EconError::TooFewCategories);
    }
    let base_idx = categories
        .iter()
        .position(|&c| c == base)
        .ok_or(EconError::MissingBaseCategory(base))?;
    let choice = y
        .iter()
        .map(|v| categories.iter().position(|c| c == v).expect("category from data"))
        .collect();
    let free = (0..categories.len()).filter(|&c| c != base_idx).collect();
    let lay = Layout { choice, free, categories: categories.len() };
    Ok((categories, lay))
}

/// Multinomial logit with `base` as the omitted category.
pub fn fit_mnl(spec: &RegressionSpec, frame: &Frame, base: f64) -> Result<MnlFit, EconError> {
    let (x, y) = design(spec, frame)?;
    let (categories, lay) = layout(&y, base)?;
    let k = x.ncols();
    let n = y.len();
    let count = |c: usize| lay.choice.iter().filter(|&&v| v == c).count() as f64;
    let base_idx = categories.iter().position(|&c| c == base).expect("checked");
    let mut start = DVector::zeros(lay.free.len() * k);
    for (b, &c) in lay.free.iter().enumerate() {
        start[b * k] = (count(c) / count(base_idx)).ln();
    }
    let objective = |t: &DVector<f64>| {
        let (ll, g, h, _) = evaluate(&x, &lay, t);
        (ll, g, h)
    };
    let max = match newton_maximize(objective, start, &NewtonOptions::default()) {
        Ok(m) => m,
        Err(NewtonFailure::Diverged { .. }) => return Err(EconError::Separation),
        Err(_) => return Err(EconError::NotConverged),
    };
    let (loglik, _, hessian, scores) = evaluate(&x, &lay, &max.x);
    let covariance = covariance(&hessian, &scores, spec.robust)?;
    let mut coefficients = vec![DVector::zeros(k); categories.len()];
    for (b, &c) in lay.free.iter().enumerate() {
        coefficients[c] = max.x.rows(b * k, k).into_owned();
    }
    Ok(MnlFit {
        names: spec.coefficient_names(),
        categories,
        base,
        coefficients,
        covariance,
        robust: spec.robust,
        loglik,
        n,
    })
}

/// Probit coefficient against the logit coefficient of one alternative.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AmemiyaRow {
    pub name: String,
    pub probit: f64,
    pub logit: f64,
    pub probit_z: f64,
    pub logit_z: f64,
    /// `probit / logit`; absent when the logit coefficient is zero.
    pub ratio: Option<f64>,
}

/// Coefficient ratios between a probit and one MNL alternative against the base.
///
/// `alternative` may be omitted when the MNL has exactly two categories.
pub fn amemiya_compare(
    probit: &BinaryFit,
    mnl: &MnlFit,
    alternative: Option<f64>,
) -> Result<Vec<AmemiyaRow>, EconError> {
    if probit.names != mnl.names {
        return Err(EconError::MismatchedRegressors);
    }
    let alt = match alternative {
        Some(a) => a,
        None if mnl.categories.len() == 2 => {
            *mnl.categories.iter().find(|&&c| c != mnl.base).expect("two categories")
        }
        None => {
            return Err(EconError::InvalidSpec(
                "choose an alternative when the outcome has more than two categories".into(),
            ))
        }
    };
    if alt == mnl.base {
        return Err(EconError::InvalidSpec("alternative equals the base category".into()));
    }
    probit
        .names
        .iter()
        .map(|name| {
            let p = probit.coefficient(name)?;
            let l = mnl.coefficient(alt, name)?;
            Ok(AmemiyaRow {
                name: name.clone(),
                probit: p,
                logit: l,
                probit_z: probit.z(name)?,
                logit_z: l / mnl.se(alt, name)?,
                ratio: (l != 0.0).then(|| p / l),
            })
        })
        .collect()
}
