//! Iterative blood-pool based intensity normalization of the SA stack.

use serde::{Deserialize, Serialize};

use crate::contour::{ContourSet, Polygon, SliceRegions};
use crate::error::{Error, Result};
use crate::geometry::SliceImage;
use crate::rician::{build_relative_probability, fit_mixture, MixtureFit, RelativeProbability, DEFAULT_BINS};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalizeOptions<T> {
    /// Convergence bound on `max_k |ref / mean_k - 1|`.
    pub epsilon: T,
    pub max_iter: usize,
    pub bins: usize,
}

impl<T: Real> Default for NormalizeOptions<T> {
    fn default() -> Self {
        Self { epsilon: T::lit(0.01), max_iter: 20, bins: DEFAULT_BINS }
    }
}

/// Index of the reference slice of a stack.
pub fn reference_slice(n: usize) -> usize {
    n / 2
}

/// Intensities of every pixel inside the epicardial contour of every slice.
pub fn lv_voxels<T: Real>(stack: &[SliceImage<T>], contours: &ContourSet<T>) -> Result<Vec<T>> {
    let mut out = Vec::new();
    for (k, slice) in stack.iter().enumerate() {
        let c = contours.get(k)?;
        c.epi.validate().map_err(|_| Error::EmptyRegion { slice: k })?;
        let mask = c.epi.rasterize(slice.rows(), slice.cols());
        let before = out.len();
        out.extend(slice.pixels.iter().zip(&mask).filter(|(_, &m)| m).map(|(&v, _)| v));
        if out.len() == before {
            return Err(Error::EmptyRegion { slice: k });
        }
    }
    Ok(out)
}

/// Row-major indices of pixels inside `endo` at or above `i_thrh`.
pub fn bp_pixels<T: Real>(slice: &SliceImage<T>, endo: &Polygon<T>, i_thrh: T, slice_index: usize) -> Result<Vec<usize>> {
    let mask = endo.rasterize(slice.rows(), slice.cols());
    let px: Vec<usize> = (0..mask.len()).filter(|&i| mask[i] && slice.pixels[i] >= i_thrh).collect();
    if px.is_empty() {
        return Err(Error::EmptyBloodPool { slice: slice_index });
    }
    Ok(px)
}

/// Joint min-max rescale of every pixel of the stack to `[0, 1]`.
pub fn rescale_stack<T: Real>(stack: &mut [SliceImage<T>]) -> Result<()> {
    let (lo, hi) = stack
        .iter()
        .flat_map(|s| s.pixels.iter())
        .fold((T::infinity(), T::neg_infinity()), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    if !(hi > lo) {
        return Err(Error::ZeroRange);
    }
    let span = hi - lo;
    for s in stack.iter_mut() {
        for v in s.pixels.iter_mut() {
            *v = (*v - lo) / span;
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizationIteration<T> {
    pub i_thrh: T,
    pub bp_means: Vec<T>,
    pub factors: Vec<T>,
}

#[derive(Debug, Clone)]
pub struct NormalizationResult<T> {
    pub stack: Vec<SliceImage<T>>,
    pub history: Vec<NormalizationIteration<T>>,
    pub iterations: usize,
    pub converged: bool,
    pub fit: MixtureFit<T>,
    pub relative_probability: RelativeProbability<T>,
}

fn fit_stack<T: Real>(stack: &[SliceImage<T>], contours: &ContourSet<T>, bins: usize) -> Result<(MixtureFit<T>, RelativeProbability<T>)> {
    let lv = lv_voxels(stack, contours)?;
    let rp = build_relative_probability(&lv, bins)?;
    let mut fit = fit_mixture(&rp)?;
    fit.params = fit.params.with_threshold()?;
    Ok((fit, rp))
}

/// Repeats {fit, threshold, per-slice BP means, rescale by `ref / mean_k`}
/// until every ratio is within `epsilon` of 1, then rescales the stack to `[0, 1]`.
pub fn iterate_normalization<T: Real>(
    stack: &[SliceImage<T>],
    contours: &ContourSet<T>,
    opts: &NormalizeOptions<T>,
) -> Result<NormalizationResult<T>> {
    if !(opts.epsilon > T::zero()) {
        return Err(Error::InvalidConfig("epsilon must be positive".into()));
    }
    if stack.is_empty() {
        return Err(Error::EmptyInput);
    }
    for k in 0..stack.len() {
        contours.get(k)?;
    }
    let reference = reference_slice(stack.len());
    let endo_masks: Vec<Vec<bool>> = stack
        .iter()
        .enumerate()
        .map(|(k, s)| contours.get(k).map(|c| SliceRegions::rasterize(c, s.rows(), s.cols()).endo))
        .collect::<Result<_>>()?;

    let mut current = stack.to_vec();
    let mut history = Vec::new();
    let mut last_fit = None;
    let mut converged = false;
    for _ in 0..opts.max_iter {
        rescale_stack(&mut current)?;
        let (fit, rp) = fit_stack(&current, contours, opts.bins)?;
        let thr = fit.params.i_thrh.expect("threshold computed");
        let means = current
            .iter()
            .zip(&endo_masks)
            .enumerate()
            .map(|(k, (s, mask))| {
                let (sum, n) = s
                    .pixels
                    .iter()
                    .zip(mask)
                    .filter(|(&v, &m)| m && v >= thr)
                    .fold((T::zero(), 0usize), |(acc, n), (&v, _)| (acc + v, n + 1));
                if n == 0 {
                    Err(Error::EmptyBloodPool { slice: k })
                } else {
                    Ok(sum / T::from_count(n))
                }
            })
            .collect::<Result<Vec<T>>>()?;
        let factors: Vec<T> = means.iter().map(|&m| means[reference] / m).collect();
        let worst = factors.iter().map(|&f| (f - T::one()).abs()).fold(T::zero(), T::max);
        history.push(NormalizationIteration { i_thrh: thr, bp_means: means, factors: factors.clone() });
        last_fit = Some((fit, rp));
        if worst < opts.epsilon {
            converged = true;
            break;
        }
        for (s, &f) in current.iter_mut().zip(&factors) {
            for v in s.pixels.iter_mut() {
                *v = *v * f;
            }
        }
    }
    rescale_stack(&mut current)?;
    let (fit, relative_probability) = match (converged, last_fit) {
        (true, Some(found)) => found,
        _ => fit_stack(&current, contours, opts.bins)?,
    };
    Ok(NormalizationResult { stack: current, iterations: history.len(), history, converged, fit, relative_probability })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::contour::SliceContours;
    use crate::geometry::SlicePose;
    use crate::vec3::Vec3;

    fn pose(rows: usize, cols: usize) -> SlicePose<f64> {
        SlicePose::new(Vec3::zero(), Vec3::new(1.0, 0.0, 0.0), Vec3::new(0.0, 1.0, 0.0), 1.0, 1.0, rows, cols).unwrap()
    }

    #[test]
    fn lv_voxel_counting() {
        let square = Polygon::new(vec![(0.5, 0.5), (0.5, 3.5), (3.5, 3.5), (3.5, 0.5)]);
        let inner = Polygon::new(vec![(1.5, 1.5), (1.5, 2.5), (2.5, 2.5), (2.5, 1.5)]);
        let c = SliceContours { endo: inner, epi: square };
        let contours = ContourSet { slices: vec![Some(c.clone()), Some(c.clone()), Some(c)] };
        let stack = vec![SliceImage::filled(pose(6, 6), 1.0); 3];
        assert_eq!(lv_voxels(&stack, &contours).unwrap().len(), 27);
    }

    #[test]
    fn circle_count_matches_brute_force() {
        let epi = Polygon::circle((31.5, 32.25), 10.0, 128);
        let c = SliceContours { endo: Polygon::circle((31.5, 32.25), 5.0, 64), epi: epi.clone() };
        let stack = vec![SliceImage::filled(pose(64, 64), 2.0)];
        let got = lv_voxels(&stack, &ContourSet { slices: vec![Some(c)] }).unwrap().len();
        let brute = (0..64).flat_map(|r| (0..64).map(move |c| (r, c))).filter(|&(r, c)| epi.contains(r as f64, c as f64)).count();
        assert_eq!(got, brute);
    }

    #[test]
    fn degenerate_and_missing_contours() {
        let flat = Polygon::new(vec![(1.0, 1.0), (2.0, 2.0), (3.0, 3.0)]);
        let c = SliceContours { endo: flat.clone(), epi: flat };
        let stack = vec![SliceImage::filled(pose(6, 6), 1.0)];
        assert!(matches!(lv_voxels(&stack, &ContourSet { slices: vec![Some(c)] }), Err(Error::EmptyRegion { slice: 0 })));
        assert!(matches!(lv_voxels(&stack, &ContourSet { slices: vec![None] }), Err(Error::MissingContour { slice: 0 })));
    }

    #[test]
    fn blood_pool_excludes_dark_blob() {
        let endo = Polygon::new(vec![(0.5, 0.5), (0.5, 6.5), (6.5, 6.5), (6.5, 0.5)]);
        let mut img = SliceImage::filled(pose(8, 8), 0.9);
        assert_eq!(bp_pixels(&img, &endo, 0.5, 0).unwrap().len(), 36);
        for (r, c) in [(2, 2), (2, 3), (3, 2), (3, 3)] {
            img.set(r, c, 0.1);
        }
        assert_eq!(bp_pixels(&img, &endo, 0.5, 0).unwrap().len(), 32);
        assert!(matches!(bp_pixels(&img, &endo, 0.95, 3), Err(Error::EmptyBloodPool { slice: 3 })));
    }

    #[test]
    fn rescale_spans_unit_interval() {
        let mut stack = vec![SliceImage::new(pose(1, 3), vec![2.0, 4.0, 6.0]).unwrap(), SliceImage::new(pose(1, 3), vec![3.0, 10.0, 5.0]).unwrap()];
        rescale_stack(&mut stack).unwrap();
        assert_eq!(stack[0].pixels, vec![0.0, 0.25, 0.5]);
        assert_eq!(stack[1].pixels[1], 1.0);
        let mut flat = vec![SliceImage::filled(pose(2, 2), 1.0)];
        assert!(matches!(rescale_stack(&mut flat), Err(Error::ZeroRange)));
    }
}
