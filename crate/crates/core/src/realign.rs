//! Misalignment correction by translating slices to minimize the total
//! alignment cost: intersecting costs between SA/LA and LA/LA slice pairs plus
//! the `gamma`-weighted contiguous costs between adjacent SA slices.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{
    clip_line_to_roi, contiguous_regions, plane_intersection, sample_segment_pair, Interval, Roi, SliceImage,
};
use crate::scalar::Real;
use crate::simplex::{self, SimplexOptions};
use crate::vec3::Vec3;

pub const DEFAULT_GAMMA: f64 = 0.01;

/// Rescales `values` to zero mean and unit population standard deviation.
pub fn zscore_normalize<T: Real>(values: &[T]) -> Result<Vec<T>> {
    if values.len() < 2 {
        return Err(Error::TooFewSamples { found: values.len() });
    }
    let n = T::from_count(values.len());
    let mean = values.iter().copied().sum::<T>() / n;
    let var = values.iter().map(|&x| (x - mean) * (x - mean)).sum::<T>() / n;
    let sd = var.sqrt();
    let scale = values.iter().fold(T::zero(), |m, &x| m.max(x.abs()));
    if !(sd > T::epsilon().sqrt() * scale) || sd == T::zero() {
        return Err(Error::ZeroVariance);
    }
    Ok(values.iter().map(|&x| (x - mean) / sd).collect())
}

pub fn mean_squared_difference<T: Real>(a: &[T], b: &[T]) -> Result<T> {
    if a.len() != b.len() {
        return Err(Error::ShapeMismatch { left: a.len(), right: b.len() });
    }
    if a.is_empty() {
        return Ok(T::zero());
    }
    let s: T = a.iter().zip(b).map(|(&x, &y)| (x - y) * (x - y)).sum();
    Ok(s / T::from_count(a.len()))
}

/// Why a cost term carried no information.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Degeneracy {
    Parallel,
    NoOverlap,
    TooFewSamples,
    ZeroVariance,
}

/// Outcome of one pairwise cost evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PairCost<T> {
    Value(T),
    Degenerate(Degeneracy),
}

impl<T: Real> PairCost<T> {
    /// Contribution to the total: degenerate terms count as zero.
    pub fn contribution(&self) -> T {
        match *self {
            PairCost::Value(v) => v,
            PairCost::Degenerate(_) => T::zero(),
        }
    }

    pub fn is_degenerate(&self) -> bool {
        matches!(self, PairCost::Degenerate(_))
    }
}

fn dissimilarity<T: Real>(a: &[T], b: &[T]) -> Result<PairCost<T>> {
    if a.len() < 2 {
        return Ok(PairCost::Degenerate(Degeneracy::TooFewSamples));
    }
    match (zscore_normalize(a), zscore_normalize(b)) {
        (Ok(za), Ok(zb)) => Ok(PairCost::Value(mean_squared_difference(&za, &zb)?)),
        _ => Ok(PairCost::Degenerate(Degeneracy::ZeroVariance)),
    }
}

/// Intersecting cost of two slices. With `roi` the sampling range is confined
/// to that ROI of `a` (SA-LA pairs); without it the whole common chord is used.
pub fn intersecting_cost<T: Real>(a: &SliceImage<T>, b: &SliceImage<T>, roi: Option<&Roi>) -> PairCost<T> {
    let Some(line) = plane_intersection(&a.pose, &b.pose) else {
        return PairCost::Degenerate(Degeneracy::Parallel);
    };
    let clip = |img: &SliceImage<T>, roi: &Roi| clip_line_to_roi(img, roi, &line).ok().flatten();
    let full_a = Roi::full(a.rows(), a.cols());
    let full_b = Roi::full(b.rows(), b.cols());
    let interval = [clip(a, roi.unwrap_or(&full_a)), clip(b, &full_b)]
        .into_iter()
        .try_fold(Interval { t_min: T::neg_infinity(), t_max: T::infinity() }, |acc, iv| acc.intersect(iv?));
    let Some(interval) = interval else {
        return PairCost::Degenerate(Degeneracy::NoOverlap);
    };
    let step = a.pose.min_spacing().min(b.pose.min_spacing());
    match sample_segment_pair(a, b, &line, interval, step) {
        Ok((sa, sb)) => dissimilarity(&sa.values, &sb.values).unwrap_or(PairCost::Degenerate(Degeneracy::ZeroVariance)),
        Err(_) => PairCost::Degenerate(Degeneracy::TooFewSamples),
    }
}

pub fn contiguous_cost<T: Real>(a: &SliceImage<T>, roi_a: &Roi, b: &SliceImage<T>, roi_b: &Roi) -> Result<PairCost<T>> {
    let (ra, rb) = contiguous_regions(a, roi_a, b, roi_b)?;
    let (va, vb): (Vec<T>, Vec<T>) = ra
        .values
        .iter()
        .zip(&rb.values)
        .zip(ra.valid.iter().zip(&rb.valid))
        .filter(|(_, (&ok_a, &ok_b))| ok_a && ok_b)
        .map(|((&x, &y), _)| (x, y))
        .unzip();
    dissimilarity(&va, &vb)
}

/// One term of the total alignment cost. Slice indices are global: SA slices
/// come first (`0..m`), LA slices follow (`m..m + n`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Term {
    SaLa { sa: usize, la: usize },
    LaLa { first: usize, second: usize },
    Contiguous { upper: usize, lower: usize },
}

impl Term {
    pub fn involves(&self, slice: usize) -> bool {
        match *self {
            Term::SaLa { sa, la } => sa == slice || la == slice,
            Term::LaLa { first, second } => first == slice || second == slice,
            Term::Contiguous { upper, lower } => upper == slice || lower == slice,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct TermCost<T> {
    pub term: Term,
    pub cost: PairCost<T>,
}

#[derive(Debug, Clone)]
pub struct AlignmentProblem<T> {
    /// SA slices ordered base to apex.
    pub sa_slices: Vec<SliceImage<T>>,
    pub la_slices: Vec<SliceImage<T>>,
    pub sa_rois: Vec<Roi>,
    pub gamma: T,
}

impl<T: Real> AlignmentProblem<T> {
    pub fn new(sa_slices: Vec<SliceImage<T>>, la_slices: Vec<SliceImage<T>>, sa_rois: Vec<Roi>, gamma: T) -> Result<Self> {
        if sa_slices.is_empty() {
            return Err(Error::NoCostTerms);
        }
        if sa_rois.len() != sa_slices.len() {
            return Err(Error::ShapeMismatch { left: sa_rois.len(), right: sa_slices.len() });
        }
        for (s, roi) in sa_slices.iter().zip(&sa_rois) {
            roi.validate(s.rows(), s.cols())?;
        }
        if gamma < T::zero() {
            return Err(Error::InvalidConfig("gamma must be non-negative".into()));
        }
        Ok(Self { sa_slices, la_slices, sa_rois, gamma })
    }

    pub fn slice_count(&self) -> usize {
        self.sa_slices.len() + self.la_slices.len()
    }

    /// The gauge-fixed slice: the middle SA slice.
    pub fn anchor(&self) -> usize {
        self.sa_slices.len() / 2
    }

    pub fn slice(&self, i: usize) -> &SliceImage<T> {
        let m = self.sa_slices.len();
        if i < m {
            &self.sa_slices[i]
        } else {
            &self.la_slices[i - m]
        }
    }

    fn slice_mut(&mut self, i: usize) -> &mut SliceImage<T> {
        let m = self.sa_slices.len();
        if i < m {
            &mut self.sa_slices[i]
        } else {
            &mut self.la_slices[i - m]
        }
    }

    pub fn ipps(&self) -> Vec<Vec3<T>> {
        (0..self.slice_count()).map(|i| self.slice(i).pose.ipp).collect()
    }

    pub fn set_ipps(&mut self, ipps: &[Vec3<T>]) -> Result<()> {
        if ipps.len() != self.slice_count() {
            return Err(Error::WrongPositionCount { expected: self.slice_count(), found: ipps.len() });
        }
        for (i, &p) in ipps.iter().enumerate() {
            self.slice_mut(i).pose.ipp = p;
        }
        Ok(())
    }

    /// Every term of the total cost, each pair counted once.
    pub fn terms(&self) -> Vec<Term> {
        let m = self.sa_slices.len();
        let n = self.la_slices.len();
        let mut out = Vec::with_capacity(m * n + n * n.saturating_sub(1) / 2 + m);
        for k in 0..m {
            for j in 0..n {
                out.push(Term::SaLa { sa: k, la: m + j });
            }
        }
        for j in 0..n {
            for jj in j + 1..n {
                out.push(Term::LaLa { first: m + j, second: m + jj });
            }
        }
        for k in 0..m.saturating_sub(1) {
            out.push(Term::Contiguous { upper: k, lower: k + 1 });
        }
        out
    }

    pub fn evaluate_term(&self, term: Term) -> PairCost<T> {
        match term {
            Term::SaLa { sa, la } => intersecting_cost(&self.sa_slices[sa], self.slice(la), Some(&self.sa_rois[sa])),
            Term::LaLa { first, second } => intersecting_cost(self.slice(first), self.slice(second), None),
            Term::Contiguous { upper, lower } => contiguous_cost(
                &self.sa_slices[upper],
                &self.sa_rois[upper],
                &self.sa_slices[lower],
                &self.sa_rois[lower],
            )
            .unwrap_or(PairCost::Degenerate(Degeneracy::Parallel)),
        }
    }

    fn weight(&self, term: Term) -> T {
        match term {
            Term::Contiguous { .. } => self.gamma,
            _ => T::one(),
        }
    }

    /// Cost of every term at the current slice positions.
    pub fn breakdown(&self) -> Vec<TermCost<T>> {
        self.terms().into_iter().map(|term| TermCost { term, cost: self.evaluate_term(term) }).collect()
    }

    fn weighted_sum(&self, terms: impl IntoIterator<Item = Term>) -> T {
        terms
            .into_iter()
            .map(|t| match self.weight(t) {
                w if w == T::zero() => T::zero(),
                w => w * self.evaluate_term(t).contribution(),
            })
            .sum()
    }

    /// Total alignment cost at the current positions.
    pub fn current_cost(&self) -> T {
        self.weighted_sum(self.terms())
    }
}

/// Total alignment cost with the slices placed at `ipp_all`.
pub fn total_cost<T: Real>(problem: &AlignmentProblem<T>, ipp_all: &[Vec3<T>]) -> Result<T> {
    let mut placed = problem.clone();
    placed.set_ipps(ipp_all)?;
    Ok(placed.current_cost())
}

#[derive(Debug, Clone, Copy)]
pub struct OptimizerOptions<T> {
    pub max_sweeps: usize,
    /// Relative improvement of a sweep below which the search stops.
    pub rel_tol: T,
    /// Per-axis translation bound (mm) around the initial IPP.
    pub bound_mm: T,
    pub initial_step_mm: T,
    pub max_evals_per_slice: usize,
}

impl<T: Real> Default for OptimizerOptions<T> {
    fn default() -> Self {
        Self {
            max_sweeps: 50,
            rel_tol: T::lit(1e-6),
            bound_mm: T::lit(20.0),
            initial_step_mm: T::lit(2.0),
            max_evals_per_slice: 300,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct AlignmentResult<T> {
    pub corrected_ipps: Vec<Vec3<T>>,
    pub translations: Vec<Vec3<T>>,
    pub anchor: usize,
    pub initial_cost: T,
    pub final_cost: T,
    pub iterations: usize,
    pub evaluations: usize,
    pub terms_before: Vec<TermCost<T>>,
    pub terms_after: Vec<TermCost<T>>,
    pub degenerate_terms: Vec<Term>,
}

/// Minimizes the total cost by block-coordinate descent: each sweep runs a
/// bounded simplex search over the 3 translation components of every slice
/// except the anchor, holding the others fixed, followed by one search over a
/// common translation of all non-anchor slices.
pub fn optimize<T: Real>(problem: &AlignmentProblem<T>) -> Result<AlignmentResult<T>> {
    optimize_with(problem, &OptimizerOptions::default())
}

pub fn optimize_with<T: Real>(problem: &AlignmentProblem<T>, opts: &OptimizerOptions<T>) -> Result<AlignmentResult<T>> {
    let terms = problem.terms();
    if problem.slice_count() < 2 || terms.is_empty() {
        return Err(Error::NoCostTerms);
    }
    let terms_before = problem.breakdown();
    if terms_before.iter().all(|t| t.cost.is_degenerate()) {
        return Err(Error::AllTermsDegenerate);
    }
    let initial_cost: T = terms_before.iter().map(|t| problem.weight(t.term) * t.cost.contribution()).sum();
    let start = problem.ipps();
    let anchor = problem.anchor();
    let mut work = problem.clone();
    let mut cost = initial_cost;
    let mut iterations = 0;
    let mut evaluations = 0;

    let involving: Vec<Vec<Term>> =
        (0..work.slice_count()).map(|s| terms.iter().copied().filter(|t| t.involves(s)).collect()).collect();
    let simplex_opts = SimplexOptions {
        initial_step: opts.initial_step_mm,
        x_tol: T::lit(1e-2),
        f_tol: T::lit(1e-10),
        max_evals: opts.max_evals_per_slice,
    };

    for _ in 0..opts.max_sweeps {
        iterations += 1;
        for s in (0..work.slice_count()).filter(|&s| s != anchor && !involving[s].is_empty()) {
            let origin = start[s];
            let here = work.slice(s).pose.ipp - origin;
            let x0 = [here.x, here.y, here.z];
            let lower = [-opts.bound_mm; 3];
            let upper = [opts.bound_mm; 3];
            let result = simplex::minimize(
                |x: &[T]| {
                    work.slice_mut(s).pose.ipp = origin + Vec3::new(x[0], x[1], x[2]);
                    work.weighted_sum(involving[s].iter().copied())
                },
                &x0,
                &lower,
                &upper,
                &simplex_opts,
            );
            evaluations += result.evals;
            work.slice_mut(s).pose.ipp = origin + Vec3::new(result.x[0], result.x[1], result.x[2]);
        }
        // common move of every slice but the anchor, evaluated through the
        // anchor's own terms by moving it the opposite way
        if !involving[anchor].is_empty() {
            let fixed = work.slice(anchor).pose.ipp;
            let movable: Vec<usize> = (0..work.slice_count()).filter(|&s| s != anchor).collect();
            let mut lower = [-opts.bound_mm; 3];
            let mut upper = [opts.bound_mm; 3];
            for &s in &movable {
                let here = (work.slice(s).pose.ipp - start[s]).to_array();
                for a in 0..3 {
                    lower[a] = lower[a].max(-opts.bound_mm - here[a]);
                    upper[a] = upper[a].min(opts.bound_mm - here[a]);
                }
            }
            let result = simplex::minimize(
                |x: &[T]| {
                    work.slice_mut(anchor).pose.ipp = fixed - Vec3::new(x[0], x[1], x[2]);
                    work.weighted_sum(involving[anchor].iter().copied())
                },
                &[T::zero(); 3],
                &lower,
                &upper,
                &simplex_opts,
            );
            evaluations += result.evals;
            work.slice_mut(anchor).pose.ipp = fixed;
            let delta = Vec3::new(result.x[0], result.x[1], result.x[2]);
            for &s in &movable {
                work.slice_mut(s).pose.ipp += delta;
            }
        }
        let next = work.current_cost();
        let improvement = cost - next;
        cost = next.min(cost);
        if improvement <= opts.rel_tol * cost.abs().max(T::epsilon()) {
            break;
        }
    }

    let terms_after = work.breakdown();
    let final_cost: T = terms_after.iter().map(|t| work.weight(t.term) * t.cost.contribution()).sum();
    let (corrected, final_cost, terms_after) = if final_cost <= initial_cost {
        (work.ipps(), final_cost, terms_after)
    } else {
        (start.clone(), initial_cost, terms_before.clone())
    };
    let degenerate_terms = terms_after.iter().filter(|t| t.cost.is_degenerate()).map(|t| t.term).collect();
    Ok(AlignmentResult {
        translations: corrected.iter().zip(&start).map(|(&c, &s)| c - s).collect(),
        corrected_ipps: corrected,
        anchor,
        initial_cost,
        final_cost,
        iterations,
        evaluations,
        terms_before,
        terms_after,
        degenerate_terms,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::SlicePose;

    #[test]
    fn zscore_examples() {
        let z = zscore_normalize(&[2.0, 4.0, 6.0]).unwrap();
        let e = 1.5f64.sqrt();
        assert!((z[0] + e).abs() < 1e-12 && z[1].abs() < 1e-12 && (z[2] - e).abs() < 1e-12);
        let again = zscore_normalize(&z).unwrap();
        assert!(again.iter().zip(&z).all(|(a, b)| (a - b).abs() < 1e-9));
        assert!(matches!(zscore_normalize(&[5.0, 5.0, 5.0]), Err(Error::ZeroVariance)));
        assert!(zscore_normalize(&[1.0]).is_err());
    }

    #[test]
    fn msd_examples() {
        assert_eq!(mean_squared_difference(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(mean_squared_difference(&[0.0, 0.0], &[1.0, 1.0]).unwrap(), 1.0);
        assert_eq!(mean_squared_difference(&[0.0, 2.0], &[1.0, 0.0]).unwrap(), 2.5);
        assert!(matches!(mean_squared_difference(&[0.0], &[1.0, 0.0]), Err(Error::ShapeMismatch { .. })));
    }

    fn field(p: Vec3<f64>) -> f64 {
        (p.x * 0.11).sin() + (p.y * 0.07).cos() * 0.8 + (p.z * 0.09).sin() * 0.6 + 0.01 * p.x * p.y
    }

    fn render(pose: SlicePose<f64>) -> SliceImage<f64> {
        let mut img = SliceImage::filled(pose, 0.0);
        for r in 0..pose.rows {
            for c in 0..pose.cols {
                img.set(r, c, field(pose.pixel_to_patient(r as f64, c as f64)));
            }
        }
        img
    }

    fn v(x: f64, y: f64, z: f64) -> Vec3<f64> {
        Vec3::new(x, y, z)
    }

    #[test]
    fn intersecting_cost_of_consistent_field_is_small() {
        let sa = render(SlicePose::new(v(-30.0, -30.0, 0.0), v(1.0, 0.0, 0.0), v(0.0, 1.0, 0.0), 1.0, 1.0, 61, 61).unwrap());
        let la = render(SlicePose::new(v(-30.0, 0.0, -30.0), v(1.0, 0.0, 0.0), v(0.0, 0.0, 1.0), 1.0, 1.0, 61, 61).unwrap());
        // the shared line runs along grid rows of both slices, so sampling is exact
        let c = intersecting_cost(&sa, &la, Some(&Roi::new(10, 50, 10, 50))).contribution();
        assert!(c < 1e-6, "{c}");
        let mut moved = sa.clone();
        moved.pose = moved.pose.translated(v(0.0, 3.0, 0.0));
        let c2 = intersecting_cost(&moved, &la, Some(&Roi::new(10, 50, 10, 50))).contribution();
        assert!(c2 > c);
    }

    #[test]
    fn constant_field_pair_is_degenerate() {
        let sa = SliceImage::filled(SlicePose::new(v(0.0, 0.0, 0.0), v(1.0, 0.0, 0.0), v(0.0, 1.0, 0.0), 1.0, 1.0, 20, 20).unwrap(), 3.0);
        let la = SliceImage::filled(SlicePose::new(v(0.0, 5.0, -10.0), v(1.0, 0.0, 0.0), v(0.0, 0.0, 1.0), 1.0, 1.0, 20, 20).unwrap(), 3.0);
        assert_eq!(intersecting_cost(&sa, &la, None), PairCost::Degenerate(Degeneracy::ZeroVariance));
        let parallel = SliceImage::filled(sa.pose.translated(v(0.0, 0.0, 10.0)), 1.0);
        assert_eq!(intersecting_cost(&sa, &parallel, None), PairCost::Degenerate(Degeneracy::Parallel));
        let roi = Roi::full(20, 20);
        assert_eq!(contiguous_cost(&sa, &roi, &parallel, &roi).unwrap(), PairCost::Degenerate(Degeneracy::ZeroVariance));
    }

    #[test]
    fn duplicate_slice_has_zero_contiguous_cost() {
        let sa = render(SlicePose::new(v(0.0, 0.0, 0.0), v(1.0, 0.0, 0.0), v(0.0, 1.0, 0.0), 1.0, 1.0, 30, 30).unwrap());
        let roi = Roi::new(5, 25, 5, 25);
        assert!(contiguous_cost(&sa, &roi, &sa, &roi).unwrap().contribution() < 1e-9);
    }

    #[test]
    fn term_count_matches_summation() {
        let pose = |z: f64| SlicePose::new(v(0.0, 0.0, z), v(1.0, 0.0, 0.0), v(0.0, 1.0, 0.0), 1.0, 1.0, 8, 8).unwrap();
        let sa: Vec<_> = (0..6).map(|k| SliceImage::filled(pose(k as f64 * 10.0), 0.0)).collect();
        let la = vec![SliceImage::filled(pose(0.0), 0.0), SliceImage::filled(pose(0.0), 0.0)];
        let p = AlignmentProblem::new(sa, la, vec![Roi::full(8, 8); 6], 0.01).unwrap();
        let terms = p.terms();
        assert_eq!(terms.len(), 18);
        assert_eq!(terms.iter().filter(|t| matches!(t, Term::SaLa { .. })).count(), 12);
        assert_eq!(terms.iter().filter(|t| matches!(t, Term::LaLa { .. })).count(), 1);
        assert_eq!(terms.iter().filter(|t| matches!(t, Term::Contiguous { .. })).count(), 5);
    }

    #[test]
    fn single_slice_has_no_terms() {
        let pose = SlicePose::new(v(0.0, 0.0, 0.0), v(1.0, 0.0, 0.0), v(0.0, 1.0, 0.0), 1.0, 1.0, 8, 8).unwrap();
        let p = AlignmentProblem::new(vec![render(pose)], vec![], vec![Roi::full(8, 8)], 0.01).unwrap();
        assert!(matches!(optimize(&p), Err(Error::NoCostTerms)));
    }
}
