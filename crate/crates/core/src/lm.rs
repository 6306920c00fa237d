//! Levenberg–Marquardt with Marquardt's diagonal scaling, shared by the
//! curve fits.

use nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone)]
pub(crate) struct LmOutcome {
    pub params: DVector<f64>,
    /// Half the sum of squared residuals at `params`.
    pub cost: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Minimizes `|r(p)|^2 / 2` where `model(p)` returns residuals and Jacobian.
///
/// Stops once a proposed step is smaller than `tol` relative to the
/// parameters, or when the residual vanishes.
pub(crate) fn minimize<F>(p0: DVector<f64>, max_iter: usize, tol: f64, mut model: F) -> LmOutcome
where
    F: FnMut(&DVector<f64>) -> (DVector<f64>, DMatrix<f64>),
{
    let mut p = p0;
    let (mut r, mut j) = model(&p);
    let mut cost = 0.5 * r.norm_squared();
    let mut lambda = 1e-3;
    for it in 1..=max_iter {
        if !cost.is_finite() {
            break;
        }
        if cost == 0.0 {
            return LmOutcome { params: p, cost, iterations: it, converged: true };
        }
        let jtj = j.transpose() * &j;
        let g = j.transpose() * &r;
        let mut a = jtj.clone();
        for k in 0..a.nrows() {
            a[(k, k)] += lambda * jtj[(k, k)].max(1e-300);
        }
        let Some(chol) = a.cholesky() else {
            lambda *= 10.0;
            if lambda > 1e20 {
                break;
            }
            continue;
        };
        let step = -chol.solve(&g);
        let small = step.norm() <= tol * (p.norm() + tol);
        let trial = &p + &step;
        let (r_t, j_t) = model(&trial);
        let cost_t = 0.5 * r_t.norm_squared();
        if cost_t.is_finite() && cost_t <= cost {
            p = trial;
            r = r_t;
            j = j_t;
            cost = cost_t;
            lambda = (lambda / 10.0).max(1e-15);
        } else {
            lambda *= 10.0;
        }
        if small {
            return LmOutcome { params: p, cost, iterations: it, converged: true };
        }
        if lambda > 1e20 {
            break;
        }
    }
    LmOutcome { params: p, cost, iterations: max_iter, converged: false }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fits_a_line() {
        let xs = [0.0, 1.0, 2.0, 3.0];
        let ys = [1.0, 3.0, 5.0, 7.0];
        let out = minimize(DVector::from_vec(vec![0.0, 0.0]), 100, 1e-12, |p| {
            let r = DVector::from_iterator(4, xs.iter().zip(&ys).map(|(x, y)| p[0] + p[1] * x - y));
            let j = DMatrix::from_fn(4, 2, |i, k| if k == 0 { 1.0 } else { xs[i] });
            (r, j)
        });
        assert!(out.converged);
        assert!((out.params[0] - 1.0).abs() < 1e-9);
        assert!((out.params[1] - 2.0).abs() < 1e-9);
    }

    #[test]
    fn rosenbrock() {
        let out = minimize(DVector::from_vec(vec![-1.2, 1.0]), 500, 1e-14, |p| {
            let r = DVector::from_vec(vec![10.0 * (p[1] - p[0] * p[0]), 1.0 - p[0]]);
            let j = DMatrix::from_row_slice(2, 2, &[-20.0 * p[0], 10.0, -1.0, 0.0]);
            (r, j)
        });
        assert!(out.converged);
        assert!((out.params[0] - 1.0).abs() < 1e-8 && (out.params[1] - 1.0).abs() < 1e-8);
    }
}
