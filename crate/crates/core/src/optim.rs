//! Small unconstrained optimizers.
//!
//! [`bfgs_minimize`] drives the attitude estimator in its transformed
//! parameter space. [`newton_maximize`] fits the concave discrete-choice
//! likelihoods and drops to BFGS updates when the Hessian is not negative
//! definite.

use nalgebra::{DMatrix, DVector};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BfgsOptions {
    pub max_iterations: usize,
    /// Stop when the sup-norm of the gradient falls below this.
    pub gradient_tolerance: f64,
    /// Stop when the step's sup-norm falls below this.
    pub step_tolerance: f64,
}

impl Default for BfgsOptions {
    fn default() -> Self {
        Self { max_iterations: 500, gradient_tolerance: 1e-6, step_tolerance: 1e-10 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Minimum {
    pub x: DVector<f64>,
    pub value: f64,
    pub gradient_norm: f64,
    pub iterations: usize,
    pub converged: bool,
}

fn sup_norm(v: &DVector<f64>) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Quasi-Newton minimization with an Armijo backtracking line search.
pub fn bfgs_minimize<F>(mut objective: F, x0: DVector<f64>, opts: &BfgsOptions) -> Minimum
where
    F: FnMut(&DVector<f64>) -> (f64, DVector<f64>),
{
    let n = x0.len();
    let mut x = x0;
    let (mut f, mut g) = objective(&x);
    if !f.is_finite() || g.iter().any(|v| !v.is_finite()) {
        return Minimum { gradient_norm: f64::INFINITY, x, value: f, iterations: 0, converged: false };
    }
    let mut h_inv = DMatrix::<f64>::identity(n, n);
    let mut iterations = 0;
    let mut converged = sup_norm(&g) < opts.gradient_tolerance;

    while !converged && iterations < opts.max_iterations {
        iterations += 1;
        let mut dir = -(&h_inv * &g);
        let mut slope = g.dot(&dir);
        if !(slope < 0.0) {
            h_inv.fill_with_identity();
            dir = -g.clone();
            slope = -g.norm_squared();
        }
        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..60 {
            let trial = &x + t * &dir;
            let (ft, gt) = objective(&trial);
            if ft.is_finite() && ft <= f + 1e-4 * t * slope {
                accepted = Some((trial, ft, gt));
                break;
            }
            t *= 0.5;
        }
        let Some((x_new, f_new, g_new)) = accepted else {
            // No descent possible along the search direction.
            converged = sup_norm(&g) < opts.gradient_tolerance.sqrt();
            break;
        };
        let s = &x_new - &x;
        let y = &g_new - &g;
        let sy = s.dot(&y);
        let step = sup_norm(&s);
        let f_old = f;
        x = x_new;
        f = f_new;
        g = g_new;
        if sy > 1e-12 * s.norm() * y.norm() {
            let rho = 1.0 / sy;
            let hy = &h_inv * &y;
            let yhy = y.dot(&hy);
            h_inv += (rho * rho * yhy + rho) * (&s * s.transpose())
                - rho * (&hy * s.transpose() + &s * hy.transpose());
        }
        if sup_norm(&g) < opts.gradient_tolerance {
            converged = true;
        } else if step < opts.step_tolerance || (f_old - f).abs() <= 1e-15 * (1.0 + f.abs()) {
            converged = sup_norm(&g) < opts.gradient_tolerance.sqrt();
            break;
        }
    }
    Minimum { gradient_norm: sup_norm(&g), x, value: f, iterations, converged }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NewtonOptions {
    pub max_iterations: usize,
    pub step_tolerance: f64,
    /// Abort as diverged once the parameter norm exceeds this.
    pub max_norm: f64,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self { max_iterations: 200, step_tolerance: 1e-10, max_norm: 1e3 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Maximum {
    pub x: DVector<f64>,
    pub value: f64,
    pub gradient: DVector<f64>,
    pub hessian: DMatrix<f64>,
    pub iterations: usize,
    /// Number of iterations that used the quasi-Newton fallback.
    pub quasi_newton_steps: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub enum NewtonFailure {
    /// Parameter norm passed `max_norm`.
    Diverged { x: DVector<f64>, value: f64 },
    /// Iteration budget exhausted.
    MaxIterations { x: DVector<f64>, value: f64 },
    NonFinite,
}

/// Objective evaluation: value, gradient and Hessian.
pub type Evaluation = (f64, DVector<f64>, DMatrix<f64>);

/// Newton ascent with step halving.
pub fn newton_maximize<F>(
    mut objective: F,
    x0: DVector<f64>,
    opts: &NewtonOptions,
) -> Result<Maximum, NewtonFailure>
where
    F: FnMut(&DVector<f64>) -> Evaluation,
{
    let n = x0.len();
    let mut x = x0;
    let (mut f, mut g, mut h) = objective(&x);
    if !f.is_finite() {
        return Err(NewtonFailure::NonFinite);
    }
    // Inverse of the negated Hessian approximation for the BFGS fallback.
    let mut fallback: Option<DMatrix<f64>> = None;
    let mut quasi_newton_steps = 0;

    for iter in 1..=opts.max_iterations {
        let newton_dir = if fallback.is_none() {
            (-h.clone()).cholesky().map(|c| c.solve(&g))
        } else {
            None
        };
        let dir = match newton_dir {
            Some(d) => d,
            None => {
                quasi_newton_steps += 1;
                let b = fallback.get_or_insert_with(|| {
                    let scale = h.diagonal().iter().map(|v| v.abs()).fold(1e-8, f64::max);
                    DMatrix::identity(n, n) / scale
                });
                &*b * &g
            }
        };

        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..60 {
            let trial = &x + t * &dir;
            let eval = objective(&trial);
            if eval.0.is_finite() && eval.0 >= f - 1e-12 * f.abs() {
                accepted = Some((trial, eval));
                break;
            }
            t *= 0.5;
        }
        let Some((x_new, (f_new, g_new, h_new))) = accepted else {
            return Ok(Maximum {
                x,
                value: f,
                gradient: g,
                hessian: h,
                iterations: iter,
                quasi_newton_steps,
            });
        };
        let step = &x_new - &x;
        if let Some(b) = fallback.as_mut() {
            // Curvature pair for the concave direction: y = g_old − g_new.
            let y = &g - &g_new;
            let sy = step.dot(&y);
            if sy > 1e-12 * step.norm() * y.norm() {
                let rho = 1.0 / sy;
                let by = &*b * &y;
                let yby = y.dot(&by);
                *b += (rho * rho * yby + rho) * (&step * step.transpose())
                    - rho * (&by * step.transpose() + &step * by.transpose());
            }
            // Return to exact Newton once curvature is usable again.
            if (-h_new.clone()).cholesky().is_some() {
                fallback = None;
            }
        }
        x = x_new;
        f = f_new;
        g = g_new;
        h = h_new;
        if x.norm() > opts.max_norm {
            return Err(NewtonFailure::Diverged { x, value: f });
        }
        if sup_norm(&step) < opts.step_tolerance {
            return Ok(Maximum {
                x,
                value: f,
                gradient: g,
                hessian: h,
                iterations: iter,
                quasi_newton_steps,
            });
        }
    }
    Err(NewtonFailure::MaxIterations { x, value: f })
}
