//! Bounded Nelder-Mead simplex search.

use crate::scalar::Real;

#[derive(Debug, Clone, Copy)]
pub struct SimplexOptions<T> {
    pub initial_step: T,
    /// Stop when every vertex lies within this distance (per axis) of the best one...
    pub x_tol: T,
    /// ...and the function values span less than this.
    pub f_tol: T,
    pub max_evals: usize,
}

#[derive(Debug, Clone)]
pub struct SimplexResult<T> {
    pub x: Vec<T>,
    pub value: T,
    pub evals: usize,
}

/// Minimizes `f` over the box `[lower, upper]` starting from `x0`.
/// Trial points are clamped into the box. The returned value never exceeds `f(x0)`.
pub fn minimize<T: Real, F>(mut f: F, x0: &[T], lower: &[T], upper: &[T], opts: &SimplexOptions<T>) -> SimplexResult<T>
where
    F: FnMut(&[T]) -> T,
{
    let n = x0.len();
    let clamp = |x: &mut Vec<T>| {
        for i in 0..n {
            x[i] = x[i].max(lower[i]).min(upper[i]);
        }
    };
    let mut evals = 0usize;
    let mut eval = |x: &[T], evals: &mut usize| {
        *evals += 1;
        let v = f(x);
        if v.is_nan() {
            T::infinity()
        } else {
            v
        }
    };

    let mut simplex: Vec<(Vec<T>, T)> = Vec::with_capacity(n + 1);
    let start = x0.to_vec();
    let f0 = eval(&start, &mut evals);
    simplex.push((start, f0));
    for i in 0..n {
        let mut x = x0.to_vec();
        x[i] = if x[i] + opts.initial_step <= upper[i] { x[i] + opts.initial_step } else { x[i] - opts.initial_step };
        clamp(&mut x);
        let fx = eval(&x, &mut evals);
        simplex.push((x, fx));
    }

    let half = T::lit(0.5);
    let two = T::lit(2.0);
    while evals < opts.max_evals {
        simplex.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap_or(std::cmp::Ordering::Equal));
        let best = simplex[0].1;
        let worst = simplex[n].1;
        let spread = (worst - best).abs();
        let size = simplex[1..]
            .iter()
            .flat_map(|(x, _)| x.iter().zip(&simplex[0].0).map(|(a, b)| (*a - *b).abs()))
            .fold(T::zero(), T::max);
        if size <= opts.x_tol && spread <= opts.f_tol {
            break;
        }

        let mut centroid = vec![T::zero(); n];
        for (x, _) in &simplex[..n] {
            for i in 0..n {
                centroid[i] = centroid[i] + x[i];
            }
        }
        for c in centroid.iter_mut() {
            *c = *c / T::from_count(n);
        }
        let along = |t: T| {
            let mut x: Vec<T> = (0..n).map(|i| centroid[i] + (simplex[n].0[i] - centroid[i]) * t).collect();
            clamp(&mut x);
            x
        };

        let xr = along(-T::one());
        let fr = eval(&xr, &mut evals);
        if fr < simplex[0].1 {
            let xe = along(-two);
            let fe = eval(&xe, &mut evals);
            simplex[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
            continue;
        }
        if fr < simplex[n - 1].1 {
            simplex[n] = (xr, fr);
            continue;
        }
        let (xc, fc) = if fr < simplex[n].1 {
            let xc = along(-half);
            let fc = eval(&xc, &mut evals);
            (xc, fc)
        } else {
            let xc = along(half);
            let fc = eval(&xc, &mut evals);
            (xc, fc)
        };
        if fc < simplex[n].1.min(fr) {
            simplex[n] = (xc, fc);
            continue;
        }
        // shrink towards the best vertex
        let best_x = simplex[0].0.clone();
        for k in 1..=n {
            let mut x: Vec<T> = (0..n).map(|i| best_x[i] + (simplex[k].0[i] - best_x[i]) * half).collect();
            clamp(&mut x);
            let fx = eval(&x, &mut evals);
            simplex[k] = (x, fx);
        }
    }
    simplex.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap_or(std::cmp::Ordering::Equal));
    let (x, value) = simplex.swap_remove(0);
    if value <= f0 {
        SimplexResult { x, value, evals }
    } else {
        SimplexResult { x: x0.to_vec(), value: f0, evals }
    }
}
