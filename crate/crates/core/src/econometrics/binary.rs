use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{covariance, design, normal_p_value, EconError, Frame, RegressionSpec};
use crate::optim::{newton_maximize, NewtonFailure, NewtonOptions};
use crate::scalar::normal;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BinaryLink {
    Probit,
    Logit,
}

fn logistic(eta: f64) -> f64 {
    if eta >= 0.0 {
        1.0 / (1.0 + (-eta).exp())
    } else {
        let e = eta.exp();
        e / (1.0 + e)
    }
}

fn softplus(eta: f64) -> f64 {
    eta.max(0.0) + (-eta.abs()).exp().ln_1p()
}

impl BinaryLink {
    pub fn cdf(self, eta: f64) -> f64 {
        match self {
            BinaryLink::Probit => normal::cdf(eta),
            BinaryLink::Logit => logistic(eta),
        }
    }

    pub fn density(self, eta: f64) -> f64 {
        match self {
            BinaryLink::Probit => normal::pdf(eta),
            BinaryLink::Logit => {
                let p = logistic(eta);
                p * (1.0 - p)
            }
        }
    }

    fn density_slope(self, eta: f64) -> f64 {
        match self {
            BinaryLink::Probit => -eta * normal::pdf(eta),
            BinaryLink::Logit => {
                let p = logistic(eta);
                p * (1.0 - p) * (1.0 - 2.0 * p)
            }
        }
    }

    fn quantile(self, p: f64) -> f64 {
        match self {
            BinaryLink::Probit => normal::quantile(p),
            BinaryLink::Logit => (p / (1.0 - p)).ln(),
        }
    }

    /// Log-likelihood of one observation and its first and (negated) second
    /// derivatives with respect to the index.
    fn observation(self, y: f64, eta: f64) -> (f64, f64, f64) {
        match self {
            BinaryLink::Probit => {
                let q = 2.0 * y - 1.0;
                let ll = normal::ln_cdf(q * eta);
                let lambda = q * (normal::ln_pdf(q * eta) - ll).exp();
                (ll, lambda, lambda * (lambda + eta))
            }
            BinaryLink::Logit => {
                let p = logistic(eta);
                (y * eta - softplus(eta), y - p, p * (1.0 - p))
            }
        }
    }
}

/// Average marginal effect of one regressor.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ame {
    pub regressor: String,
    pub estimate: f64,
    pub se: f64,
    /// Discrete change from 0 to 1 rather than a derivative.
    pub discrete: bool,
}

impl Ame {
    pub fn z(&self) -> f64 {
        self.estimate / self.se
    }

    pub fn p_value(&self) -> f64 {
        normal_p_value(self.z())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BinaryFit {
    pub link: BinaryLink,
    /// Coefficient names, intercept first.
    pub names: Vec<String>,
    pub coefficients: DVector<f64>,
    pub covariance: DMatrix<f64>,
    pub robust: bool,
    pub loglik: f64,
    pub n: usize,
    pub mean_outcome: f64,
    pub ames: Vec<Ame>,
    pub iterations: usize,
}

impl BinaryFit {
    fn index(&self, name: &str) -> Result<usize, EconError> {
        self.names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| EconError::UnknownRegressor(name.to_string()))
    }

    pub fn coefficient(&self, name: &str) -> Result<f64, EconError> {
        Ok(self.coefficients[self.index(name)?])
    }

    pub fn se(&self, name: &str) -> Result<f64, EconError> {
        let i = self.index(name)?;
        Ok(self.covariance[(i, i)].sqrt())
    }

    pub fn z(&self, name: &str) -> Result<f64, EconError> {
        Ok(self.coefficient(name)? / self.se(name)?)
    }

    pub fn p_value(&self, name: &str) -> Result<f64, EconError> {
        Ok(normal_p_value(self.z(name)?))
    }

    pub fn ame(&self, name: &str) -> Option<&Ame> {
        self.ames.iter().find(|a| a.regressor == name)
    }
}

struct Evaluated {
    loglik: f64,
    gradient: DVector<f64>,
    hessian: DMatrix<f64>,
    /// Per-observation scores, one row each.
    scores: DMatrix<f64>,
}

fn evaluate(x: &DMatrix<f64>, y: &DVector<f64>, beta: &DVector<f64>, link: BinaryLink) -> Evaluated {
    let eta = x * beta;
    let (n, k) = x.shape();
    let mut loglik = 0.0;
    let mut d1 = DVector::zeros(n);
    let mut d2 = DVector::zeros(n);
    for i in 0..n {
        let (ll, a, b) = link.observation(y[i], eta[i]);
        loglik += ll;
        d1[i] = a;
        d2[i] = b;
    }
    let scores = DMatrix::from_fn(n, k, |i, j| x[(i, j)] * d1[i]);
    let weighted = DMatrix::from_fn(n, k, |i, j| x[(i, j)] * d2[i]);
    Evaluated {
        loglik,
        gradient: x.transpose() * &d1,
        hessian: -(x.transpose() * weighted),
        scores,
    }
}

/// Log-likelihood of a binary-choice model at `beta`, with its gradient.
pub fn binary_loglik_gradient(
    spec: &RegressionSpec,
    frame: &Frame,
    beta: &DVector<f64>,
    link: BinaryLink,
) -> Result<(f64, DVector<f64>), EconError> {
    let (x, y) = design(spec, frame)?;
    let e = evaluate(&x, &y, beta, link);
    Ok((e.loglik, e.gradient))
}

fn fit_binary(spec: &RegressionSpec, frame: &Frame, link: BinaryLink) -> Result<BinaryFit, EconError> {
    let (x, y) = design(spec, frame)?;
    if y.iter().any(|&v| v != 0.0 && v != 1.0) {
        return Err(EconError::NonBinaryOutcome(spec.outcome.clone()));
    }
    let n = y.len();
    let mean_outcome = y.mean();
    if mean_outcome == 0.0 || mean_outcome == 1.0 {
        return Err(EconError::Separation);
    }
    let mut start = DVector::zeros(x.ncols());
    start[0] = link.quantile(mean_outcome);

    let objective = |b: &DVector<f64>| {
        let e = evaluate(&x, &y, b, link);
        (e.loglik, e.gradient, e.hessian)
    };
    let perfect = |b: &DVector<f64>| {
        let eta = &x * b;
        eta.iter().zip(y.iter()).all(|(e, v)| (*e > 0.0) == (*v == 1.0))
    };
    let max = match newton_maximize(objective, start, &NewtonOptions::default()) {
        Ok(m) if perfect(&m.x) => return Err(EconError::Separation),
        Ok(m) => m,
        Err(NewtonFailure::Diverged { .. }) => return Err(EconError::Separation),
        Err(NewtonFailure::MaxIterations { x: b, .. }) => {
            return Err(if perfect(&b) { EconError::Separation } else { EconError::NotConverged });
        }
        Err(NewtonFailure::NonFinite) => return Err(EconError::NotConverged),
    };
    let e = evaluate(&x, &y, &max.x, link);
    let covariance = covariance(&e.hessian, &e.scores, spec.robust)?;
    let mut fit = BinaryFit {
        link,
        names: spec.coefficient_names(),
        coefficients: max.x,
        covariance,
        robust: spec.robust,
        loglik: e.loglik,
        n,
        mean_outcome,
        ames: Vec::new(),
        iterations: max.iterations,
    };
    fit.ames = ames_on(&fit, &x, spec)?;
    Ok(fit)
}

/// Probit by Newton iterations; AMEs are filled in.
pub fn fit_probit(spec: &RegressionSpec, frame: &Frame) -> Result<BinaryFit, EconError> {
    fit_binary(spec, frame, BinaryLink::Probit)
}

/// Binary logit by Newton iterations; AMEs are filled in.
pub fn fit_logit(spec: &RegressionSpec, frame: &Frame) -> Result<BinaryFit, EconError> {
    fit_binary(spec, frame, BinaryLink::Logit)
}

/// Average marginal effects with delta-method standard errors.
pub fn average_marginal_effects(
    fit: &BinaryFit,
    frame: &Frame,
    spec: &RegressionSpec,
) -> Result<Vec<Ame>, EconError> {
    if let Some(r) = spec.regressors.iter().find(|r| !fit.names.contains(r)) {
        return Err(EconError::UnknownRegressor(r.clone()));
    }
    if fit.names.len() != spec.regressors.len() + 1 {
        return Err(EconError::MismatchedRegressors);
    }
    let (x, _) = design(spec, frame)?;
    ames_on(fit, &x, spec)
}

fn ames_on(fit: &BinaryFit, x: &DMatrix<f64>, spec: &RegressionSpec) -> Result<Vec<Ame>, EconError> {
    let beta = &fit.coefficients;
    let link = fit.link;
    let (n, k) = x.shape();
    let nf = n as f64;
    let eta = x * beta;
    let mut out = Vec::with_capacity(spec.regressors.len());
    for (idx, name) in spec.regressors.iter().enumerate() {
        let j = fit.names.iter().position(|nm| nm == name).ok_or(EconError::UnknownRegressor(name.clone()))?;
        debug_assert_eq!(j, idx + 1);
        let discrete = spec.binary.contains(name);
        let mut estimate = 0.0;
        let mut grad = DVector::<f64>::zeros(k);
        for i in 0..n {
            let row = x.row(i).transpose();
            if discrete {
                let base = eta[i] - x[(i, j)] * beta[j];
                let (e0, e1) = (base, base + beta[j]);
                estimate += link.cdf(e1) - link.cdf(e0);
                let mut r1 = row.clone();
                let mut r0 = row;
                r1[j] = 1.0;
                r0[j] = 0.0;
                grad += link.density(e1) * r1 - link.density(e0) * r0;
            } else {
                let f = link.density(eta[i]);
                estimate += f * beta[j];
                grad += (beta[j] * link.density_slope(eta[i])) * row;
                grad[j] += f;
            }
        }
        estimate /= nf;
        grad /= nf;
        let var = (grad.transpose() * &fit.covariance * &grad)[0];
        out.push(Ame { regressor: name.clone(), estimate, se: var.max(0.0).sqrt(), discrete });
    }
    Ok(out)
}
