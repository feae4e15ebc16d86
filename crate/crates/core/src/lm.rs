//! Levenberg-Marquardt least squares over a subset of active parameters.

use crate::scalar::Real;

#[derive(Debug, Clone, Copy)]
pub struct LmOptions<T> {
    pub max_iter: usize,
    /// Stop once a step improves the cost by less than this fraction.
    pub ftol: T,
    pub xtol: T,
}

impl<T: Real> Default for LmOptions<T> {
    fn default() -> Self {
        Self { max_iter: 500, ftol: T::epsilon() * T::lit(16.0), xtol: T::epsilon() * T::lit(16.0) }
    }
}

#[derive(Debug, Clone)]
pub struct LmReport<T> {
    pub params: Vec<T>,
    /// Sum of squared residuals at `params`.
    pub cost: T,
    pub iterations: usize,
}

/// Evaluates residuals and the dense Jacobian (row-major, one row per residual).
pub trait LeastSquaresProblem<T> {
    fn residual_count(&self) -> usize;
    fn param_count(&self) -> usize;
    fn evaluate(&self, params: &[T], residuals: &mut [T], jacobian: Option<&mut [T]>);
}

fn sum_sq<T: Real>(r: &[T]) -> T {
    r.iter().map(|&x| x * x).sum()
}

/// Solves the square system `a x = b` in place by Gaussian elimination with
/// partial pivoting. Returns `None` when the matrix is singular.
pub fn solve_dense<T: Real>(mut a: Vec<T>, mut b: Vec<T>) -> Option<Vec<T>> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| a[i * n + col].abs().partial_cmp(&a[j * n + col].abs()).unwrap())?;
        if a[pivot * n + col].abs() <= T::min_positive_value() {
            return None;
        }
        if pivot != col {
            for k in 0..n {
                a.swap(pivot * n + k, col * n + k);
            }
            b.swap(pivot, col);
        }
        for row in col + 1..n {
            let f = a[row * n + col] / a[col * n + col];
            for k in col..n {
                a[row * n + k] = a[row * n + k] - f * a[col * n + k];
            }
            b[row] = b[row] - f * b[col];
        }
    }
    let mut x = vec![T::zero(); n];
    for row in (0..n).rev() {
        let s: T = (row + 1..n).map(|k| a[row * n + k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row * n + row];
    }
    x.iter().all(|v| v.is_finite()).then_some(x)
}

pub fn minimize<T: Real, P: LeastSquaresProblem<T>>(
    problem: &P,
    x0: &[T],
    active: &[usize],
    opts: &LmOptions<T>,
) -> LmReport<T> {
    let m = problem.residual_count();
    let p = problem.param_count();
    let k = active.len();
    let mut x = x0.to_vec();
    let mut r = vec![T::zero(); m];
    let mut jac = vec![T::zero(); m * p];
    problem.evaluate(&x, &mut r, Some(&mut jac));
    let mut cost = sum_sq(&r);
    let mut lambda = T::lit(1e-3);
    let mut trial_r = vec![T::zero(); m];
    let mut iterations = 0;

    while iterations < opts.max_iter && k > 0 {
        iterations += 1;
        let mut jtj = vec![T::zero(); k * k];
        let mut jtr = vec![T::zero(); k];
        for i in 0..m {
            let row = &jac[i * p..(i + 1) * p];
            for (a, &ca) in active.iter().enumerate() {
                jtr[a] = jtr[a] + row[ca] * r[i];
                for (b, &cb) in active.iter().enumerate().skip(a) {
                    jtj[a * k + b] = jtj[a * k + b] + row[ca] * row[cb];
                }
            }
        }
        for a in 0..k {
            for b in 0..a {
                jtj[a * k + b] = jtj[b * k + a];
            }
        }
        let gradient_small = jtr.iter().all(|g| g.abs() <= T::min_positive_value().sqrt());
        if gradient_small || cost == T::zero() {
            break;
        }

        let mut accepted = false;
        while lambda < T::lit(1e16) {
            let mut damped = jtj.clone();
            for a in 0..k {
                let d = jtj[a * k + a].max(T::lit(1e-12));
                damped[a * k + a] = damped[a * k + a] + lambda * d;
            }
            let rhs: Vec<T> = jtr.iter().map(|&g| -g).collect();
            let Some(step) = solve_dense(damped, rhs) else {
                lambda = lambda * T::lit(10.0);
                continue;
            };
            let mut trial = x.clone();
            for (a, &c) in active.iter().enumerate() {
                trial[c] = trial[c] + step[a];
            }
            problem.evaluate(&trial, &mut trial_r, None);
            let trial_cost = sum_sq(&trial_r);
            if trial_cost.is_finite() && trial_cost < cost {
                let step_norm = step.iter().map(|&s| s * s).sum::<T>().sqrt();
                let x_norm = active.iter().map(|&c| x[c] * x[c]).sum::<T>().sqrt();
                let rel_gain = (cost - trial_cost) / cost;
                x = trial;
                cost = trial_cost;
                problem.evaluate(&x, &mut r, Some(&mut jac));
                lambda = (lambda / T::lit(3.0)).max(T::lit(1e-12));
                accepted = true;
                if rel_gain <= opts.ftol || step_norm <= opts.xtol * (x_norm + opts.xtol) {
                    return LmReport { params: x, cost, iterations };
                }
                break;
            }
            lambda = lambda * T::lit(4.0);
        }
        if !accepted {
            break;
        }
    }
    LmReport { params: x, cost, iterations }
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Exp {
        xs: Vec<f64>,
        ys: Vec<f64>,
    }

    impl LeastSquaresProblem<f64> for Exp {
        fn residual_count(&self) -> usize {
            self.xs.len()
        }
        fn param_count(&self) -> usize {
            2
        }
        fn evaluate(&self, p: &[f64], r: &mut [f64], jac: Option<&mut [f64]>) {
            for (i, (&x, &y)) in self.xs.iter().zip(&self.ys).enumerate() {
                r[i] = p[0] * (p[1] * x).exp() - y;
            }
            if let Some(j) = jac {
                for (i, &x) in self.xs.iter().enumerate() {
                    j[2 * i] = (p[1] * x).exp();
                    j[2 * i + 1] = p[0] * x * (p[1] * x).exp();
                }
            }
        }
    }

    #[test]
    fn fits_exponential() {
        let xs: Vec<f64> = (0..20).map(|i| i as f64 * 0.1).collect();
        let ys = xs.iter().map(|x| 2.5 * (-1.3 * x).exp()).collect();
        let r = minimize(&Exp { xs, ys }, &[1.0, 0.0], &[0, 1], &LmOptions::default());
        assert!((r.params[0] - 2.5).abs() < 1e-8 && (r.params[1] + 1.3).abs() < 1e-8, "{:?}", r.params);
    }

    #[test]
    fn inactive_parameter_stays_put() {
        let xs: Vec<f64> = (0..20).map(|i| i as f64 * 0.1).collect();
        let ys = xs.iter().map(|x| 2.5 * (-1.3 * x).exp()).collect();
        let r = minimize(&Exp { xs, ys }, &[2.5, 0.0], &[1], &LmOptions::default());
        assert_eq!(r.params[0], 2.5);
        assert!((r.params[1] + 1.3).abs() < 1e-8);
    }

    #[test]
    fn dense_solve() {
        let x: Vec<f64> = solve_dense(vec![0.0, 2.0, 1.0, 1.0], vec![4.0, 3.0]).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-12 && (x[1] - 2.0).abs() < 1e-12);
        assert!(solve_dense(vec![1.0, 2.0, 2.0, 4.0], vec![1.0, 2.0]).is_none());
    }
}
