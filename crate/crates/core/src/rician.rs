//! LV intensity model: a Rayleigh component with an offset for dark normal
//! myocardium plus a Gaussian component for the bright blood pool and infarcts,
//! fitted to the peak-normalized intensity histogram.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lm::{self, LeastSquaresProblem, LmOptions};
use crate::scalar::Real;

pub const DEFAULT_BINS: usize = 64;
pub const MIN_FIT_BINS: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RicianMixtureParams<T> {
    pub alpha_r: T,
    pub sigma_r: T,
    pub a: T,
    pub alpha_g: T,
    pub sigma_g: T,
    pub mu: T,
    /// Intersection of the two components, once computed.
    pub i_thrh: Option<T>,
}

impl<T: Real> RicianMixtureParams<T> {
    pub fn new(alpha_r: T, sigma_r: T, a: T, alpha_g: T, sigma_g: T, mu: T) -> Self {
        Self { alpha_r, sigma_r, a, alpha_g, sigma_g, mu, i_thrh: None }
    }

    /// Mode of the shifted Rayleigh component, `sigma_r - a`.
    pub fn rayleigh_mode(&self) -> T {
        self.sigma_r - self.a
    }

    pub fn rayleigh_peak(&self) -> T {
        self.alpha_r / self.sigma_r * T::lit(-0.5).exp()
    }

    pub fn gaussian_peak(&self) -> T {
        self.alpha_g / (T::TAU().sqrt() * self.sigma_g)
    }

    /// Distance between the component modes, used as the graph-cut potential width.
    pub fn mode_gap(&self) -> T {
        self.mu - self.rayleigh_mode()
    }

    pub fn mixture(&self, x: T) -> T {
        rayleigh_shifted(x, self) + gaussian_term(x, self)
    }

    /// Returns a copy with both amplitudes multiplied by `k`.
    pub fn scaled(&self, k: T) -> Self {
        Self { alpha_r: self.alpha_r * k, alpha_g: self.alpha_g * k, ..*self }
    }

    pub fn with_threshold(mut self) -> Result<Self> {
        self.i_thrh = Some(find_threshold(&self)?);
        Ok(self)
    }
}

/// Shifted Rayleigh term, zero for `x + a < 0`.
pub fn rayleigh_shifted<T: Real>(x: T, p: &RicianMixtureParams<T>) -> T {
    let s = x + p.a;
    if s <= T::zero() {
        return T::zero();
    }
    let s2 = p.sigma_r * p.sigma_r;
    p.alpha_r * s / s2 * (-(s * s) / (T::lit(2.0) * s2)).exp()
}

pub fn gaussian_term<T: Real>(x: T, p: &RicianMixtureParams<T>) -> T {
    let z = (x - p.mu) / p.sigma_g;
    p.alpha_g / (T::TAU().sqrt() * p.sigma_g) * (-(z * z) / T::lit(2.0)).exp()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelativeProbability<T> {
    pub bin_centers: Vec<T>,
    pub values: Vec<T>,
}

impl<T: Real> RelativeProbability<T> {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Sum of squared deviations of `params` from the curve.
    pub fn residual(&self, params: &RicianMixtureParams<T>) -> T {
        self.bin_centers.iter().zip(&self.values).map(|(&x, &y)| (params.mixture(x) - y).powi(2)).sum()
    }
}

/// Equal-width histogram over `[min, max]` of the samples, divided by its
/// largest count.
pub fn build_relative_probability<T: Real>(intensities: &[T], n_bins: usize) -> Result<RelativeProbability<T>> {
    if intensities.is_empty() {
        return Err(Error::EmptyInput);
    }
    if n_bins < 2 {
        return Err(Error::TooFewBins { min: 2, found: n_bins });
    }
    let (lo, hi) = intensities.iter().fold((T::infinity(), T::neg_infinity()), |(lo, hi), &x| (lo.min(x), hi.max(x)));
    if !(hi > lo) {
        return Err(Error::ZeroRange);
    }
    let width = (hi - lo) / T::from_count(n_bins);
    let mut counts = vec![0usize; n_bins];
    for &x in intensities {
        let i = ((x - lo) / width).floor().to_usize().unwrap_or(0).min(n_bins - 1);
        counts[i] += 1;
    }
    let peak = T::from_count(*counts.iter().max().unwrap_or(&1));
    Ok(RelativeProbability {
        bin_centers: (0..n_bins).map(|i| lo + width * (T::from_count(i) + T::lit(0.5))).collect(),
        values: counts.iter().map(|&c| T::from_count(c) / peak).collect(),
    })
}

/// Result of [`fit_mixture`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MixtureFit<T> {
    pub params: RicianMixtureParams<T>,
    /// Sum of squared residuals of the fitted curve.
    pub residual: T,
    /// Best residual achieved by a single Rayleigh or single Gaussian model.
    pub single_component_residual: T,
}

// Parameter vector: [ln alpha_r, ln sigma_r, a, ln alpha_g, ln sigma_g, mu].
const RAYLEIGH: [usize; 3] = [0, 1, 2];
const GAUSSIAN: [usize; 3] = [3, 4, 5];
const ALL: [usize; 6] = [0, 1, 2, 3, 4, 5];

fn decode<T: Real>(x: &[T]) -> RicianMixtureParams<T> {
    RicianMixtureParams::new(x[0].exp(), x[1].exp(), x[2], x[3].exp(), x[4].exp(), x[5])
}

fn encode<T: Real>(p: &RicianMixtureParams<T>) -> Vec<T> {
    let floor = T::min_positive_value();
    vec![p.alpha_r.max(floor).ln(), p.sigma_r.ln(), p.a, p.alpha_g.max(floor).ln(), p.sigma_g.ln(), p.mu]
}

struct CurveFit<'a, T> {
    rp: &'a RelativeProbability<T>,
    rayleigh: bool,
    gaussian: bool,
}

impl<T: Real> LeastSquaresProblem<T> for CurveFit<'_, T> {
    fn residual_count(&self) -> usize {
        self.rp.len()
    }

    fn param_count(&self) -> usize {
        6
    }

    fn evaluate(&self, x: &[T], residuals: &mut [T], jacobian: Option<&mut [T]>) {
        let p = decode(x);
        let two = T::lit(2.0);
        let mut jac = jacobian;
        for (i, (&xi, &yi)) in self.rp.bin_centers.iter().zip(&self.rp.values).enumerate() {
            let ray = if self.rayleigh { rayleigh_shifted(xi, &p) } else { T::zero() };
            let gau = if self.gaussian { gaussian_term(xi, &p) } else { T::zero() };
            residuals[i] = ray + gau - yi;
            if let Some(j) = jac.as_deref_mut() {
                let row = &mut j[i * 6..(i + 1) * 6];
                row.fill(T::zero());
                let s = xi + p.a;
                if self.rayleigh && s > T::zero() {
                    let s2 = p.sigma_r * p.sigma_r;
                    let e = (-(s * s) / (two * s2)).exp();
                    row[0] = ray;
                    row[1] = ray * (s * s / s2 - two);
                    row[2] = p.alpha_r * e / s2 * (T::one() - s * s / s2);
                }
                if self.gaussian {
                    let z = (xi - p.mu) / p.sigma_g;
                    row[3] = gau;
                    row[4] = gau * (z * z - T::one());
                    row[5] = gau * z / p.sigma_g;
                }
            }
        }
    }
}

/// Weighted Otsu split of the curve: index of the first bin of the upper class.
fn otsu_split<T: Real>(rp: &RelativeProbability<T>) -> usize {
    let n = rp.len();
    let total: T = rp.values.iter().copied().sum();
    let total_mean: T = rp.bin_centers.iter().zip(&rp.values).map(|(&x, &w)| x * w).sum();
    let mut best = (T::neg_infinity(), n / 2);
    let mut w0 = T::zero();
    let mut s0 = T::zero();
    for k in 1..n {
        w0 = w0 + rp.values[k - 1];
        s0 = s0 + rp.values[k - 1] * rp.bin_centers[k - 1];
        let w1 = total - w0;
        if w0 <= T::zero() || w1 <= T::zero() {
            continue;
        }
        let m0 = s0 / w0;
        let m1 = (total_mean - s0) / w1;
        let between = w0 * w1 * (m0 - m1) * (m0 - m1);
        if between > best.0 {
            best = (between, k);
        }
    }
    best.1
}

fn weighted_moments<T: Real>(xs: &[T], ws: &[T]) -> (T, T, T) {
    let w: T = ws.iter().copied().sum();
    let mean = xs.iter().zip(ws).map(|(&x, &w)| x * w).sum::<T>() / w;
    let var = xs.iter().zip(ws).map(|(&x, &w)| w * (x - mean) * (x - mean)).sum::<T>() / w;
    let peak = ws.iter().copied().fold(T::zero(), T::max);
    (mean, var.sqrt(), peak)
}

/// Starting points derived from the Otsu split: Rayleigh moment matching with
/// `a = 0`, and a variant that also matches the spread and solves for `a`.
fn initial_guesses<T: Real>(rp: &RelativeProbability<T>) -> Vec<RicianMixtureParams<T>> {
    let k = otsu_split(rp).clamp(1, rp.len() - 1);
    let (lo_mean, lo_sd, lo_peak) = weighted_moments(&rp.bin_centers[..k], &rp.values[..k]);
    let (hi_mean, hi_sd, hi_peak) = weighted_moments(&rp.bin_centers[k..], &rp.values[k..]);
    let width = rp.bin_centers[1] - rp.bin_centers[0];
    let half_pi_sqrt = T::FRAC_PI_2().sqrt();
    let sigma_g = hi_sd.max(width);
    let alpha_g = hi_peak.max(T::lit(1e-6)) * T::TAU().sqrt() * sigma_g;
    let amp_r = |sigma: T| lo_peak.max(T::lit(1e-6)) * sigma * T::lit(0.5).exp();

    let mut out = Vec::new();
    let sigma_mean = (lo_mean / half_pi_sqrt).max(width);
    out.push(RicianMixtureParams::new(amp_r(sigma_mean), sigma_mean, T::zero(), alpha_g, sigma_g, hi_mean));
    let sigma_var = (lo_sd * (T::lit(2.0) / (T::lit(4.0) - T::PI())).sqrt()).max(width);
    let a = sigma_var * half_pi_sqrt - lo_mean;
    out.push(RicianMixtureParams::new(amp_r(sigma_var), sigma_var, a, alpha_g, sigma_g, hi_mean));
    out
}

fn run<T: Real>(rp: &RelativeProbability<T>, start: &RicianMixtureParams<T>, rayleigh: bool, gaussian: bool) -> (RicianMixtureParams<T>, T) {
    let problem = CurveFit { rp, rayleigh, gaussian };
    let active: &[usize] = match (rayleigh, gaussian) {
        (true, true) => &ALL,
        (true, false) => &RAYLEIGH,
        _ => &GAUSSIAN,
    };
    let report = lm::minimize(&problem, &encode(start), active, &LmOptions::default());
    let mut p = decode(&report.params);
    if !rayleigh {
        p.alpha_r = T::zero();
    }
    if !gaussian {
        p.alpha_g = T::zero();
    }
    let cost = rp.residual(&p);
    (p, cost)
}

/// Least-squares fit of the mixture to `rp`.
///
/// Fails with [`Error::NonBimodal`] when no bright Gaussian class can be
/// resolved inside the intensity range, or when the mixture cannot beat the
/// best single-component model.
pub fn fit_mixture<T: Real>(rp: &RelativeProbability<T>) -> Result<MixtureFit<T>> {
    if rp.len() < MIN_FIT_BINS {
        return Err(Error::TooFewBins { min: MIN_FIT_BINS, found: rp.len() });
    }
    let guesses = initial_guesses(rp);
    let keep_best = |best: Option<(RicianMixtureParams<T>, T)>, cand: (RicianMixtureParams<T>, T)| match best {
        Some(b) if b.1 <= cand.1 || !cand.1.is_finite() => Some(b),
        _ => Some(cand),
    };

    let mut single: Option<(RicianMixtureParams<T>, T)> = None;
    for g in &guesses {
        single = keep_best(single, run(rp, g, true, false));
        single = keep_best(single, run(rp, g, false, true));
    }
    let (single_params, single_residual) = single.expect("at least one start");

    let mut best: Option<(RicianMixtureParams<T>, T)> = None;
    for g in &guesses {
        best = keep_best(best, run(rp, g, true, true));
    }
    if best.expect("at least one start").1 > single_residual {
        // restart the mixture from the better single-component solution
        let mut start = if single_params.alpha_g > T::zero() { guesses[0] } else { single_params };
        if single_params.alpha_g > T::zero() {
            start.alpha_g = single_params.alpha_g;
            start.sigma_g = single_params.sigma_g;
            start.mu = single_params.mu;
            start.alpha_r = single_params.alpha_g * T::lit(1e-6);
        } else {
            let g = guesses[0];
            start.alpha_g = single_params.alpha_r * T::lit(1e-6);
            start.sigma_g = g.sigma_g;
            start.mu = g.mu;
        }
        best = keep_best(best, run(rp, &start, true, true));
    }
    let (params, residual) = best.expect("at least one start");
    let tol = T::epsilon().sqrt() * rp.values.iter().map(|&v| v * v).sum::<T>();
    if residual > single_residual + tol {
        return Err(Error::NonBimodal(format!(
            "mixture residual {residual} exceeds single-component residual {single_residual}"
        )));
    }
    let (first, last) = (rp.bin_centers[0], rp.bin_centers[rp.len() - 1]);
    let curve_peak = rp.values.iter().copied().fold(T::zero(), T::max);
    if params.gaussian_peak() < T::lit(0.01) * curve_peak {
        return Err(Error::NonBimodal("no bright Gaussian component".into()));
    }
    if params.mu < first || params.mu > last {
        return Err(Error::NonBimodal(format!("Gaussian mode {} outside intensity range", params.mu)));
    }
    if params.alpha_r > T::lit(0.01) * params.alpha_g && params.mu <= params.rayleigh_mode() {
        return Err(Error::NonBimodal("Gaussian mode is not above the Rayleigh mode".into()));
    }
    // the tiny-amplitude encoding floor should not leak out as a real component
    let mut params = params;
    if params.alpha_r <= T::min_positive_value() * T::lit(2.0) {
        params.alpha_r = T::zero();
    }
    Ok(MixtureFit { params, residual, single_component_residual: single_residual })
}

/// Intensity in `(sigma_r - a, mu)` where the two components are equal.
///
/// Scans from `mu` downward for the first sign change of
/// `rayleigh - gaussian` and refines it by bisection.
pub fn find_threshold<T: Real>(p: &RicianMixtureParams<T>) -> Result<T> {
    if !(p.alpha_r > T::zero() && p.alpha_g > T::zero()) {
        return Err(Error::NoIntersection);
    }
    let lo = p.rayleigh_mode();
    let hi = p.mu;
    if !(lo < hi) {
        return Err(Error::NoIntersection);
    }
    let diff = |x: T| rayleigh_shifted(x, p) - gaussian_term(x, p);
    let tol = T::lit(1e-9) * p.rayleigh_peak().max(p.gaussian_peak());
    let steps = 4096;
    let h = (hi - lo) / T::from_count(steps);
    let mut upper = hi;
    let mut f_upper = diff(upper);
    for i in (0..steps).rev() {
        let x = lo + h * T::from_count(i);
        let f = diff(x);
        if f >= T::zero() && f_upper < T::zero() {
            let (mut a, mut b) = (x, upper);
            if f <= tol {
                if x > lo {
                    return Ok(x);
                }
            }
            for _ in 0..200 {
                let m = (a + b) / T::lit(2.0);
                let fm = diff(m);
                if fm.abs() <= tol || (b - a) <= T::epsilon() * b.abs().max(T::one()) {
                    a = m;
                    b = m;
                    break;
                }
                if fm >= T::zero() {
                    a = m;
                } else {
                    b = m;
                }
            }
            let x = (a + b) / T::lit(2.0);
            if x > lo && x < hi {
                return Ok(x);
            }
            return Err(Error::NoIntersection);
        }
        upper = x;
        f_upper = f;
    }
    Err(Error::NoIntersection)
}
