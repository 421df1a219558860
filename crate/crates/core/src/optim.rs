//! Damped Gauss-Newton (Levenberg-Marquardt) least squares with monotone
//! acceptance: a step is taken only if it lowers the cost.

use nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LmOptions {
    pub max_iterations: usize,
    /// Stop once the cost `Σ r²` drops below this.
    pub cost_tolerance: f64,
    /// Stop when an accepted step improves the cost by less than this
    /// fraction.
    pub relative_tolerance: f64,
    pub initial_damping: f64,
}

impl Default for LmOptions {
    fn default() -> Self {
        LmOptions { max_iterations: 500, cost_tolerance: 1e-28, relative_tolerance: 1e-15, initial_damping: 1e-3 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LmResult {
    pub params: DVector<f64>,
    /// `Σ r²` at `params`.
    pub cost: f64,
    pub iterations: usize,
    /// A stopping criterion was met before the iteration budget ran out.
    pub converged: bool,
    /// Cost after every accepted step, starting with the initial cost.
    pub history: Vec<f64>,
}

/// Minimize `Σ r(p)²` from `p0`.
pub fn levenberg_marquardt<R, J>(residual: R, jacobian: J, p0: DVector<f64>, options: &LmOptions) -> LmResult
where
    R: Fn(&DVector<f64>) -> DVector<f64>,
    J: Fn(&DVector<f64>) -> DMatrix<f64>,
{
    let mut p = p0;
    let mut r = residual(&p);
    let mut cost = r.norm_squared();
    let mut history = vec![cost];
    let mut lambda = options.initial_damping;
    let mut converged = false;
    let mut iterations = 0;

    if !cost.is_finite() {
        return LmResult { params: p, cost, iterations, converged, history };
    }

    'outer: while iterations < options.max_iterations {
        iterations += 1;
        if cost <= options.cost_tolerance {
            converged = true;
            break;
        }
        let jac = jacobian(&p);
        let jtj = jac.transpose() * &jac;
        let g = jac.transpose() * &r;
        if g.amax() == 0.0 {
            converged = true;
            break;
        }
        loop {
            let mut a = jtj.clone();
            for i in 0..a.nrows() {
                a[(i, i)] += lambda * jtj[(i, i)].max(1e-12);
            }
            let step = match a.clone().cholesky() {
                Some(ch) => ch.solve(&(-&g)),
                None => match a.lu().solve(&(-&g)) {
                    Some(s) => s,
                    None => {
                        lambda *= 10.0;
                        if lambda > 1e16 {
                            converged = true;
                            break 'outer;
                        }
                        continue;
                    }
                },
            };
            let trial = &p + &step;
            let r_trial = residual(&trial);
            let c_trial = r_trial.norm_squared();
            if c_trial.is_finite() && c_trial < cost {
                let improvement = (cost - c_trial) / cost;
                p = trial;
                r = r_trial;
                cost = c_trial;
                history.push(cost);
                lambda = (lambda / 3.0).max(1e-15);
                if improvement < options.relative_tolerance {
                    converged = true;
                    break 'outer;
                }
                break;
            }
            lambda *= 4.0;
            if lambda > 1e16 {
                // No descent direction left at machine precision.
                converged = true;
                break 'outer;
            }
        }
    }
    LmResult { params: p, cost, iterations, converged, history }
}

/// Central-difference Jacobian with step `rel_step·max(|p_i|, 1)`.
pub fn finite_difference_jacobian<R>(residual: &R, p: &DVector<f64>, rel_step: f64) -> DMatrix<f64>
where
    R: Fn(&DVector<f64>) -> DVector<f64>,
{
    let m = residual(p).len();
    let n = p.len();
    let mut jac = DMatrix::zeros(m, n);
    for i in 0..n {
        let h = rel_step * p[i].abs().max(1.0);
        let mut plus = p.clone();
        let mut minus = p.clone();
        plus[i] += h;
        minus[i] -= h;
        let col = (residual(&plus) - residual(&minus)) / (2.0 * h);
        jac.set_column(i, &col);
    }
    jac
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rosenbrock() {
        let r = |p: &DVector<f64>| DVector::from_vec(vec![10.0 * (p[1] - p[0] * p[0]), 1.0 - p[0]]);
        let j = |p: &DVector<f64>| DMatrix::from_row_slice(2, 2, &[-20.0 * p[0], 10.0, -1.0, 0.0]);
        let out = levenberg_marquardt(r, j, DVector::from_vec(vec![-1.2, 1.0]), &LmOptions::default());
        assert!(out.converged);
        assert!((out.params[0] - 1.0).abs() < 1e-10 && (out.params[1] - 1.0).abs() < 1e-10);
        assert!(out.history.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn fd_jacobian_matches() {
        let r = |p: &DVector<f64>| DVector::from_vec(vec![p[0].sin() * p[1], p[1].powi(3)]);
        let p = DVector::from_vec(vec![0.3, 1.7]);
        let j = finite_difference_jacobian(&r, &p, 1e-6);
        assert!((j[(0, 0)] - 0.3f64.cos() * 1.7).abs() < 1e-8);
        assert!((j[(1, 1)] - 3.0 * 1.7 * 1.7).abs() < 1e-6);
        assert!(j[(1, 0)].abs() < 1e-12);
    }
}
