//! Damped least-squares (Levenberg-Marquardt) minimizer.

use nalgebra::{DMatrix, DVector};

use super::FitResult;
use crate::error::{Error, Result};

/// A weighted residual vector `r_i = (data_i - model_i(p)) / sigma_i` and its
/// Jacobian `dr_i/dp_j`.
pub trait LeastSquaresProblem {
    fn residuals(&self, params: &DVector<f64>) -> DVector<f64>;

    fn jacobian(&self, params: &DVector<f64>) -> DMatrix<f64>;

    fn parameter_names(&self, n_params: usize) -> Vec<String> {
        (0..n_params).map(|i| format!("p{i}")).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LsqOptions {
    pub max_iterations: usize,
    /// Stop when an accepted step lowers the cost by less than this fraction.
    pub ftol: f64,
    /// Stop when the step norm drops below `xtol * (|p| + xtol)`.
    pub xtol: f64,
    /// Initial damping factor on `diag(J^T J)`.
    pub initial_damping: f64,
}

impl Default for LsqOptions {
    fn default() -> Self {
        Self {
            max_iterations: 200,
            ftol: 1e-10,
            xtol: 1e-12,
            initial_damping: 1e-3,
        }
    }
}

const SINGULAR_RTOL: f64 = 1e-12;

fn cost(r: &DVector<f64>) -> f64 {
    r.norm_squared()
}

fn all_finite(v: &DVector<f64>) -> bool {
    v.iter().all(|x| x.is_finite())
}

/// Minimizes `sum r_i^2` from `initial`.
///
/// The damping term is scaled by `diag(J^T J)` and adapted from the ratio of
/// actual to predicted cost reduction, so steps move between gradient descent
/// (large damping) and Gauss-Newton (small damping). The covariance is
/// `(J^T J)^-1` at the optimum, i.e. it assumes the sigmas are absolute.
pub fn lsq_minimize<P: LeastSquaresProblem + ?Sized>(
    problem: &P,
    initial: DVector<f64>,
    options: &LsqOptions,
) -> Result<FitResult> {
    let n = initial.len();
    let mut p = initial;
    let mut r = problem.residuals(&p);
    if !all_finite(&r) || !all_finite(&p) {
        return Err(Error::FitFailure(
            "residuals are not finite at the initial point".into(),
        ));
    }
    if r.len() < n {
        return Err(Error::InsufficientData(format!(
            "{} residuals for {} parameters",
            r.len(),
            n
        )));
    }
    let mut c = cost(&r);
    let mut jac = problem.jacobian(&p);
    // dimensionless: the damping term is already scaled by diag(J^T J)
    let mut mu = options.initial_damping;
    let mut nu = 2.0;
    let mut converged = c == 0.0;
    let mut iterations = 0;

    while !converged && iterations < options.max_iterations {
        iterations += 1;
        let jt = jac.transpose();
        let jtj = &jt * &jac;
        let grad = &jt * &r;
        if grad.amax() <= f64::EPSILON * f64::EPSILON * (1.0 + c) {
            converged = true;
            break;
        }
        let diag_floor = jtj.diagonal().max() * 1e-15 + f64::MIN_POSITIVE;
        loop {
            let mut damped = jtj.clone();
            for i in 0..n {
                damped[(i, i)] += mu * jtj[(i, i)].max(diag_floor);
            }
            let Some(chol) = damped.cholesky() else {
                mu *= nu;
                nu *= 2.0;
                if !mu.is_finite() {
                    return Err(Error::FitFailure("damping diverged".into()));
                }
                continue;
            };
            let step = -chol.solve(&grad);
            let small_step = step.norm() <= options.xtol * (p.norm() + options.xtol);
            let trial = &p + &step;
            let r_trial = problem.residuals(&trial);
            let c_trial = if all_finite(&r_trial) {
                cost(&r_trial)
            } else {
                f64::INFINITY
            };
            if c_trial < c {
                let predicted = c - cost(&(&r + &jac * &step));
                let rho = if predicted > 0.0 {
                    (c - c_trial) / predicted
                } else {
                    1.0
                };
                mu *= (1.0 - (2.0 * rho - 1.0).powi(3)).max(1.0 / 3.0);
                nu = 2.0;
                let rel_drop = (c - c_trial) / c;
                p = trial;
                r = r_trial;
                c = c_trial;
                jac = problem.jacobian(&p);
                converged = rel_drop < options.ftol || small_step || c == 0.0;
                break;
            }
            if small_step {
                converged = true;
                break;
            }
            mu *= nu;
            nu *= 2.0;
            if !mu.is_finite() {
                converged = true;
                break;
            }
        }
    }

    let names = problem.parameter_names(n);
    let covariance = covariance_from_jacobian(&jac)?;
    let result = FitResult::new(names, p.iter().copied().collect(), covariance, c, r.len(), iterations, converged);
    if converged {
        Ok(result)
    } else {
        Err(Error::NonConvergence {
            best: Box::new(result),
        })
    }
}

/// `(J^T J)^-1` via SVD; fails when the normal equations are singular.
pub fn covariance_from_jacobian(jac: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = jac.ncols();
    let jtj = jac.transpose() * jac;
    let svd = jtj.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let rank = svd
        .singular_values
        .iter()
        .filter(|&&s| s > SINGULAR_RTOL * smax && s > 0.0)
        .count();
    if rank < n {
        return Err(Error::RankDeficient { rank, n_params: n });
    }
    let inv = svd
        .pseudo_inverse(0.0)
        .map_err(|e| Error::FitFailure(e.to_string()))?;
    // symmetrize against round-off
    Ok((&inv + inv.transpose()) * 0.5)
}
